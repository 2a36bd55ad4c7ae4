#include "subsetvis/exploration.hpp"

#include <algorithm>
#include <charconv>

#include "subsetvis/error.hpp"

namespace subsetvis::exploration {

namespace {

std::uint64_t id_number(const std::string& id) {
  std::uint64_t n = 0;
  std::from_chars(id.data() + 1, id.data() + id.size(), n);
  return n;
}

bool id_less(const std::string& a, const std::string& b) {
  if (a.front() != b.front()) return a.front() < b.front();
  return id_number(a) < id_number(b);
}

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, Eigen::Index cols) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), rows.empty() ? cols : static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (static_cast<Eigen::Index>(rows[r].size()) != m.cols()) {
      fail(ErrorKind::invalid_argument, "bad_snapshot", "ragged matrix in snapshot");
    }
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return m;
}

nlohmann::json raw_filters_json(std::span<const Filter> filters) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& f : filters) out.push_back({{"attribute", f.attribute}, {"bins", f.range}});
  return out;
}

std::vector<Filter> raw_filters_from_json(const nlohmann::json& j, const Dataset& dataset) {
  std::vector<Filter> out;
  for (const auto& f : j) {
    out.push_back(make_filter(dataset, f.at("attribute").get<AttributeId>(), f.at("bins").get<std::vector<BinIndex>>()));
  }
  return out;
}

nlohmann::json optional_string(const std::optional<std::string>& s) {
  return s ? nlohmann::json(*s) : nlohmann::json(nullptr);
}

nlohmann::json clusters_json(const analysis::ClusterAssignment& a, std::span<const std::string> ids) {
  auto j = analysis::assignment_to_json(a);
  nlohmann::json links = nlohmann::json::array();
  for (const auto& group : a.groups()) {
    nlohmann::json members = nlohmann::json::array();
    for (auto i : group) members.push_back(ids[i]);
    links.push_back(members);
  }
  j["links"] = links;
  nlohmann::json noise = nlohmann::json::array();
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    if (a.labels[i] == analysis::kNoise) noise.push_back(ids[i]);
  }
  j["noise"] = noise;
  return j;
}

}  // namespace

std::string_view to_string(NodeOrigin o) { return o == NodeOrigin::root ? "root" : "selection"; }

ProjectionState compute_projection(const ProjectionInput& input, const sen::EpochObserver& observer) {
  auto model = sen::train(input.data, input.train_config, observer);
  auto tc = input.tsne_config;
  tc.output_dims = 2;
  auto proj = tsne::tsne(model.embeddings, tc);
  ProjectionState out;
  out.subsets = input.subsets;
  out.train_config = input.train_config;
  out.tsne_config = tc;
  out.embeddings = std::move(model.embeddings);
  out.coords = std::move(proj.coords);
  out.loss_history = std::move(model.loss_history);
  out.epochs = model.epochs;
  out.converged = model.converged;
  out.sizes = input.sizes;
  return out;
}

ClusterParams cluster_params_from_json(const nlohmann::json& j) {
  ClusterParams p;
  if (j.is_null()) return p;
  try {
    if (j.contains("method")) p.method = analysis::parse_cluster_method(j.at("method").get<std::string>());
    const auto& params = j.contains("params") ? j.at("params") : j;
    if (params.contains("k")) p.k = params.at("k").get<int>();
    if (params.contains("linkage")) p.linkage = analysis::parse_linkage(params.at("linkage").get<std::string>());
    if (params.contains("eps")) p.eps = params.at("eps").get<double>();
    if (params.contains("min_pts")) p.min_pts = params.at("min_pts").get<int>();
    if (params.contains("seed")) p.seed = params.at("seed").get<std::uint64_t>();
    if (params.contains("restarts")) p.restarts = params.at("restarts").get<int>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::invalid_argument, "bad_cluster_params", e.what());
  }
  return p;
}

Session::Session(std::shared_ptr<const Dataset> dataset, std::string dataset_id, SessionOptions options)
    : dataset_(std::move(dataset)),
      dataset_id_(std::move(dataset_id)),
      options_(options),
      cube_(std::make_shared<CubeIndex>()) {
  if (!dataset_) fail(ErrorKind::invalid_argument, "no_dataset", "session needs a dataset");
  ExplorationNode root;
  root.id = kRootNode;
  root.origin = NodeOrigin::root;
  root.selection = Selection{};
  Subset all;
  all.id = kRootSubset;
  add_subset(std::move(all), root.id, "", {});
  root.subsets.push_back(kRootSubset);
  nodes_.emplace(root.id, std::move(root));
  counters_['n'] = 1;
  counters_['s'] = 1;
}

std::string Session::next_id(char prefix) {
  auto& n = counters_[prefix];
  return std::string(1, prefix) + std::to_string(n++);
}

const ExplorationNode& Session::node(const std::string& id) const {
  const auto it = nodes_.find(id);
  if (it == nodes_.end()) fail(ErrorKind::not_found, "unknown_node", "no node '" + id + "'");
  return it->second;
}

const SubsetEntry& Session::subset_entry(const std::string& id) const {
  const auto it = subsets_.find(id);
  if (it == subsets_.end()) fail(ErrorKind::not_found, "unknown_subset", "no subset '" + id + "'");
  return it->second;
}

const Subset& Session::subset(const std::string& id) const { return subset_entry(id).subset; }

const CandidateSet& Session::candidate_set(const std::string& id) const {
  const auto it = candidate_sets_.find(id);
  if (it == candidate_sets_.end()) fail(ErrorKind::not_found, "unknown_candidate_set", "no candidate set '" + id + "'");
  return it->second;
}

const ProjectionState& Session::projection(const std::string& id) const {
  const auto it = projections_.find(id);
  if (it == projections_.end()) fail(ErrorKind::not_found, "unknown_projection", "no projection '" + id + "'");
  return it->second;
}

const ProjectionState& Session::current_projection() const {
  if (current_projection_.empty()) fail(ErrorKind::not_found, "no_projection", "nothing has been projected yet");
  return projection(current_projection_);
}

const ProjectionState& Session::resolve_projection(const std::string& id) const {
  return id.empty() ? current_projection() : projection(id);
}

ProjectionState& Session::resolve_projection(const std::string& id) {
  const auto& p = std::as_const(*this).resolve_projection(id);
  return projections_.at(p.id);
}

std::vector<std::string> Session::node_ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : nodes_) out.push_back(id);
  std::sort(out.begin(), out.end(), id_less);
  return out;
}

void Session::ensure_cube(std::span<const AttributeTuple> tuples) {
  bool missing = false;
  for (const auto& t : tuples) missing = missing || !cube_->covers(t);
  if (!missing) return;
  cube_ = std::make_shared<CubeIndex>(cube_->extended(*dataset_, tuples, options_.max_cube_cells, options_.policy));
}

void Session::materialize(Subset& subset, std::span<const AttributeId> excluded) {
  std::vector<AttributeId> filter_attrs;
  for (const auto& f : subset.filters) filter_attrs.push_back(f.attribute);
  std::vector<AttributeId> skip(excluded.begin(), excluded.end());
  skip.insert(skip.end(), subset.slicing_attributes.begin(), subset.slicing_attributes.end());
  auto tuples = feature_tuples(*dataset_, filter_attrs, skip);
  if (!filter_attrs.empty()) tuples.push_back(canonical_tuple(filter_attrs));
  ensure_cube(tuples);
  extract_features(subset, *dataset_, *cube_, excluded);
}

const SubsetEntry& Session::add_subset(Subset subset, std::string producer, std::string candidate_set,
                                       std::vector<AttributeId> excluded) {
  materialize(subset, excluded);
  SubsetEntry entry{std::move(subset), std::move(producer), std::move(candidate_set), std::move(excluded)};
  const auto id = entry.subset.id;
  return subsets_.insert_or_assign(id, std::move(entry)).first->second;
}

const CandidateSet& Session::slice_node(const std::string& node_id, AttributeId attribute) {
  const auto& n = node(node_id);
  dataset_->attribute(attribute);  // throws for an unknown id
  for (const auto& cs : n.candidate_sets) {
    const auto& existing = candidate_set(cs);
    if (existing.attribute == attribute) return existing;
  }
  if (!n.selection) {
    fail(ErrorKind::conflict, "node_not_sliceable",
         "node '" + node_id + "' mixes subsets from different slicing rounds and cannot be sliced");
  }
  auto children = slice(*dataset_, *n.selection, attribute);
  auto path = n.selection->path;

  CandidateSet cs;
  cs.id = next_id('c');
  cs.node = node_id;
  cs.attribute = attribute;
  for (auto& s : children) {
    s.id = next_id('s');
    cs.subsets.push_back(s.id);
    add_subset(std::move(s), node_id, cs.id, path);
  }
  nodes_.at(node_id).candidate_sets.push_back(cs.id);
  return candidate_sets_.emplace(cs.id, std::move(cs)).first->second;
}

ProjectionInput Session::prepare_projection(std::span<const std::string> subset_ids,
                                            const sen::TrainConfig& train_cfg,
                                            const tsne::TsneConfig& tsne_cfg) const {
  if (subset_ids.size() < 2) {
    fail(ErrorKind::invalid_argument, "too_few_subsets", "a projection needs at least 2 subsets");
  }
  std::vector<std::string> seen(subset_ids.begin(), subset_ids.end());
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
    fail(ErrorKind::invalid_argument, "duplicate_subset", "a subset is listed twice");
  }
  std::vector<Subset> cohort;
  std::vector<std::uint64_t> sizes;
  for (const auto& id : subset_ids) {
    cohort.push_back(subset(id));
    sizes.push_back(cohort.back().record_count);
  }
  train_cfg.validate();
  tsne_cfg.validate();
  auto tc = train_cfg;
  tc.policy = options_.policy;
  auto pc = tsne_cfg;
  pc.policy = options_.policy;
  return {std::vector<std::string>(subset_ids.begin(), subset_ids.end()), sen::TrainingData::from_subsets(cohort),
          std::move(sizes), tc, pc};
}

const ProjectionState& Session::commit_projection(ProjectionState state) {
  for (const auto& id : state.subsets) subset_entry(id);
  state.id = next_id('p');
  current_projection_ = state.id;
  return projections_.insert_or_assign(state.id, std::move(state)).first->second;
}

const ProjectionState& Session::project(std::span<const std::string> subset_ids, const sen::TrainConfig& train_cfg,
                                        const tsne::TsneConfig& tsne_cfg) {
  return commit_projection(compute_projection(prepare_projection(subset_ids, train_cfg, tsne_cfg)));
}

std::vector<std::string> Session::ancestry(const std::string& node_id) const {
  std::vector<std::string> chain;
  std::optional<std::string> at = node_id;
  while (at) {
    chain.push_back(*at);
    at = node(*at).parent;
  }
  std::reverse(chain.begin(), chain.end());
  return chain;
}

std::string Session::common_ancestor(const std::vector<std::string>& nodes) const {
  auto common = ancestry(nodes.front());
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    const auto other = ancestry(nodes[i]);
    std::size_t n = 0;
    while (n < common.size() && n < other.size() && common[n] == other[n]) ++n;
    common.resize(n);
  }
  return common.back();
}

const ExplorationNode& Session::select(std::span<const std::string> subset_ids, const std::string& projection_id) {
  const auto& proj = resolve_projection(projection_id);
  if (subset_ids.empty()) fail(ErrorKind::invalid_argument, "empty_selection", "select needs at least one subset");
  std::vector<std::string> seen(subset_ids.begin(), subset_ids.end());
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
    fail(ErrorKind::invalid_argument, "duplicate_subset", "a subset is listed twice");
  }
  std::vector<std::string> producers;
  std::vector<std::string> sets;
  for (const auto& id : subset_ids) {
    const auto& e = subset_entry(id);
    if (std::find(proj.subsets.begin(), proj.subsets.end(), id) == proj.subsets.end()) {
      fail(ErrorKind::conflict, "subset_not_projected", "subset '" + id + "' is not part of projection '" + proj.id + "'");
    }
    if (!nodes_.contains(e.producer) || (!e.candidate_set.empty() && !candidate_sets_.contains(e.candidate_set))) {
      fail(ErrorKind::conflict, "producer_removed", "the node that produced subset '" + id + "' was removed");
    }
    producers.push_back(e.producer);
    sets.push_back(e.candidate_set);
  }

  ExplorationNode n;
  n.id = next_id('n');
  n.origin = NodeOrigin::selection;
  n.subsets.assign(subset_ids.begin(), subset_ids.end());
  const bool single_round =
      !sets.front().empty() && std::all_of(sets.begin(), sets.end(), [&](const auto& s) { return s == sets.front(); });
  if (single_round) {
    const auto& cs = candidate_set(sets.front());
    const auto& parent = node(cs.node);
    n.parent = parent.id;
    n.slicing_attribute = cs.attribute;
    std::vector<BinIndex> bins;
    for (const auto& id : subset_ids) bins.push_back(*subset(id).unit_bin);
    Selection sel = *parent.selection;
    auto f = make_filter(*dataset_, cs.attribute, bins);
    if (!is_hidden(f, *dataset_)) sel.filters.push_back(std::move(f));
    std::sort(sel.filters.begin(), sel.filters.end(),
              [](const Filter& x, const Filter& y) { return x.attribute < y.attribute; });
    sel.path.push_back(cs.attribute);
    n.selection = std::move(sel);
  } else {
    n.parent = common_ancestor(producers);
  }
  nodes_.at(*n.parent).children.push_back(n.id);
  return nodes_.emplace(n.id, std::move(n)).first->second;
}

std::vector<std::string> Session::highlight(AttributeId attribute, std::span<const BinIndex> bins,
                                            const std::string& projection_id) const {
  const auto& proj = resolve_projection(projection_id);
  const auto& attr = dataset_->attribute(attribute);
  for (auto b : bins) {
    if (b >= attr.bin_count()) {
      fail(ErrorKind::invalid_argument, "bin_out_of_range", "bin " + std::to_string(b) + " is outside '" + attr.name + "'");
    }
  }
  const bool sliced = std::any_of(proj.subsets.begin(), proj.subsets.end(), [&](const auto& id) {
    const auto& sa = subset(id).slicing_attributes;
    return std::find(sa.begin(), sa.end(), attribute) != sa.end();
  });
  if (!sliced) {
    fail(ErrorKind::invalid_argument, "not_a_slicing_attribute",
         "'" + attr.name + "' is not a slicing attribute of the projected subsets");
  }
  std::vector<BinIndex> query(bins.begin(), bins.end());
  std::sort(query.begin(), query.end());
  std::vector<std::string> out;
  for (const auto& id : proj.subsets) {
    const auto* f = subset(id).filter_on(attribute);
    if (f && std::includes(query.begin(), query.end(), f->range.begin(), f->range.end())) out.push_back(id);
  }
  return out;
}

const analysis::ClusterAssignment& Session::cluster(const ClusterParams& params, const std::string& projection_id) {
  auto& proj = resolve_projection(projection_id);
  switch (params.method) {
    case analysis::ClusterMethod::kmeans:
      proj.clusters = analysis::kmeans(proj.embeddings, params.k, params.seed, params.restarts);
      break;
    case analysis::ClusterMethod::agglomerative:
      proj.clusters = analysis::agglomerative(proj.embeddings, params.k, params.linkage);
      break;
    case analysis::ClusterMethod::density:
      proj.clusters = analysis::density_cluster(proj.embeddings, params.eps, params.min_pts);
      break;
  }
  return *proj.clusters;
}

void Session::remove_leaf(const std::string& node_id) {
  const auto& n = node(node_id);
  if (!n.parent) fail(ErrorKind::conflict, "cannot_remove_root", "the root node cannot be removed");
  if (!n.children.empty()) fail(ErrorKind::conflict, "node_has_children", "node '" + node_id + "' has children");
  for (const auto& cs : n.candidate_sets) candidate_sets_.erase(cs);
  std::erase(nodes_.at(*n.parent).children, node_id);
  nodes_.erase(node_id);
}

std::vector<FeatureSummary> Session::node_features(const std::string& node_id) const {
  const auto& n = node(node_id);
  std::map<AttributeId, FeatureSummary> by_attr;
  for (const auto& id : n.subsets) {
    for (const auto& fv : subset(id).features) {
      auto& fs = by_attr[fv.feature_id];
      fs.attribute = fv.feature_id;
      fs.subsets.push_back(id);
      fs.vectors.push_back(fv.values);
      if (fs.aggregated_counts.empty()) fs.aggregated_counts.assign(fv.raw_counts.size(), 0);
      for (std::size_t b = 0; b < fv.raw_counts.size(); ++b) fs.aggregated_counts[b] += fv.raw_counts[b];
    }
  }
  std::vector<FeatureSummary> out;
  for (auto& [_, fs] : by_attr) {
    fs.aggregated = make_feature(fs.attribute, fs.aggregated_counts).values;
    fs.consistency = analysis::consistency(fs.vectors);
    out.push_back(std::move(fs));
  }
  return out;
}

std::vector<NodeMeasure> Session::node_measures(const std::string& node_id) const {
  std::vector<NodeMeasure> out;
  for (const auto& fs : node_features(node_id)) {
    out.push_back({fs.attribute, analysis::marginal_measures(fs.aggregated_counts)});
  }
  return out;
}

nlohmann::json Session::subset_json(const std::string& id) const {
  const auto& e = subset_entry(id);
  const auto& s = e.subset;
  nlohmann::json j{{"id", s.id},
                   {"label", describe(s, *dataset_)},
                   {"record_count", s.record_count},
                   {"filters", filters_to_json(s.filters, *dataset_)},
                   {"producer", e.producer}};
  nlohmann::json slicing = nlohmann::json::array();
  for (auto a : s.slicing_attributes) slicing.push_back(dataset_->attribute(a).name);
  j["slicing_attributes"] = slicing;
  if (s.unit_bin && !s.slicing_attributes.empty()) {
    const auto& attr = dataset_->attribute(s.slicing_attributes.back());
    j["unit_bin"] = *s.unit_bin;
    j["unit_label"] = attr.bins[*s.unit_bin];
    j["unit_rank"] = attr.ordered() ? nlohmann::json(*s.unit_bin) : nlohmann::json(nullptr);
  } else {
    j["unit_bin"] = nullptr;
  }
  nlohmann::json features = nlohmann::json::array();
  for (const auto& fv : s.features) features.push_back(dataset_->attribute(fv.feature_id).name);
  j["feature_attributes"] = features;
  return j;
}

nlohmann::json Session::candidate_set_json(const std::string& id) const {
  const auto& cs = candidate_set(id);
  const auto& attr = dataset_->attribute(cs.attribute);
  nlohmann::json subsets = nlohmann::json::array();
  for (const auto& sid : cs.subsets) subsets.push_back(subset_json(sid));
  return {{"id", cs.id},
          {"node", cs.node},
          {"attribute", attr.name},
          {"attribute_id", cs.attribute},
          {"color_key", attr.name},
          {"ordered", attr.ordered()},
          {"subsets", subsets}};
}

nlohmann::json Session::tree_json() const {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& id : node_ids()) {
    const auto& n = nodes_.at(id);
    nlohmann::json subsets = nlohmann::json::array();
    for (const auto& sid : n.subsets) subsets.push_back(subset_json(sid));
    nlohmann::json sets = nlohmann::json::array();
    for (const auto& cs : n.candidate_sets) sets.push_back(candidate_set_json(cs));
    nlohmann::json j{{"id", n.id},
                     {"parent", optional_string(n.parent)},
                     {"origin", to_string(n.origin)},
                     {"children", n.children},
                     {"subsets", subsets},
                     {"candidate_sets", sets},
                     {"sliceable", n.selection.has_value()}};
    if (n.slicing_attribute) {
      const auto& attr = dataset_->attribute(*n.slicing_attribute);
      j["slicing_attribute"] = attr.name;
      j["color_key"] = attr.name;
      j["ordered"] = attr.ordered();
    } else {
      j["slicing_attribute"] = nullptr;
      j["color_key"] = nullptr;
      j["ordered"] = false;
    }
    if (n.selection) {
      nlohmann::json path = nlohmann::json::array();
      for (auto a : n.selection->path) path.push_back(dataset_->attribute(a).name);
      j["path"] = path;
      j["filters"] = filters_to_json(n.selection->filters, *dataset_);
    }
    nodes.push_back(std::move(j));
  }
  return {{"dataset", dataset_id_}, {"root", kRootNode}, {"nodes", nodes}};
}

nlohmann::json Session::node_features_json(const std::string& node_id) const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& fs : node_features(node_id)) {
    const auto& attr = dataset_->attribute(fs.attribute);
    nlohmann::json per_subset = nlohmann::json::array();
    for (std::size_t i = 0; i < fs.subsets.size(); ++i) {
      per_subset.push_back({{"subset_id", fs.subsets[i]}, {"values", fs.vectors[i]}});
    }
    out.push_back({{"attribute", attr.name},
                   {"attribute_id", fs.attribute},
                   {"kind", to_string(attr.kind)},
                   {"chart", attr.kind == AttributeKind::temporal ? "line" : "bar"},
                   {"bins", attr.bins},
                   {"aggregated", fs.aggregated},
                   {"aggregated_counts", fs.aggregated_counts},
                   {"consistency", fs.consistency},
                   {"subsets", per_subset}});
  }
  return {{"node", node_id}, {"features", out}};
}

nlohmann::json Session::node_measures_json(const std::string& node_id) const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& m : node_measures(node_id)) {
    auto j = analysis::measures_to_json(m.measures);
    j["attribute"] = dataset_->attribute(m.attribute).name;
    j["attribute_id"] = m.attribute;
    out.push_back(std::move(j));
  }
  return {{"node", node_id}, {"measures", out}};
}

nlohmann::json Session::projection_json(const ProjectionState& p) const {
  nlohmann::json points = nlohmann::json::array();
  for (std::size_t i = 0; i < p.subsets.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    std::vector<double> emb(static_cast<std::size_t>(p.embeddings.cols()));
    for (Eigen::Index c = 0; c < p.embeddings.cols(); ++c) emb[static_cast<std::size_t>(c)] = p.embeddings(r, c);
    points.push_back({{"subset_id", p.subsets[i]},
                      {"label", describe(subset(p.subsets[i]), *dataset_)},
                      {"x", p.coords(r, 0)},
                      {"y", p.coords(r, 1)},
                      {"size", p.sizes[i]},
                      {"embedding", emb}});
  }
  nlohmann::json j{{"id", p.id},
                   {"points", points},
                   {"epochs", p.epochs},
                   {"converged", p.converged},
                   {"final_loss", p.loss_history.empty() ? 0.0 : p.loss_history.back()}};
  j["clusters"] = p.clusters ? clusters_json(*p.clusters, p.subsets) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json Session::snapshot() const {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& id : node_ids()) {
    const auto& n = nodes_.at(id);
    nlohmann::json j{{"id", n.id},
                     {"parent", optional_string(n.parent)},
                     {"origin", to_string(n.origin)},
                     {"subsets", n.subsets},
                     {"children", n.children},
                     {"candidate_sets", n.candidate_sets}};
    j["slicing_attribute"] = n.slicing_attribute ? nlohmann::json(*n.slicing_attribute) : nlohmann::json(nullptr);
    if (n.selection) {
      j["selection"] = {{"filters", raw_filters_json(n.selection->filters)}, {"path", n.selection->path}};
    } else {
      j["selection"] = nullptr;
    }
    nodes.push_back(std::move(j));
  }
  std::vector<std::string> subset_ids;
  for (const auto& [id, _] : subsets_) subset_ids.push_back(id);
  std::sort(subset_ids.begin(), subset_ids.end(), id_less);
  nlohmann::json subsets = nlohmann::json::array();
  for (const auto& id : subset_ids) {
    const auto& e = subsets_.at(id);
    subsets.push_back({{"id", id},
                       {"filters", raw_filters_json(e.subset.filters)},
                       {"slicing_attributes", e.subset.slicing_attributes},
                       {"unit_bin", e.subset.unit_bin ? nlohmann::json(*e.subset.unit_bin) : nlohmann::json(nullptr)},
                       {"producer", e.producer},
                       {"candidate_set", e.candidate_set},
                       {"excluded", e.excluded},
                       {"record_count", e.subset.record_count}});
  }
  std::vector<std::string> set_ids;
  for (const auto& [id, _] : candidate_sets_) set_ids.push_back(id);
  std::sort(set_ids.begin(), set_ids.end(), id_less);
  nlohmann::json sets = nlohmann::json::array();
  for (const auto& id : set_ids) {
    const auto& cs = candidate_sets_.at(id);
    sets.push_back({{"id", id}, {"node", cs.node}, {"attribute", cs.attribute}, {"subsets", cs.subsets}});
  }
  std::vector<std::string> proj_ids;
  for (const auto& [id, _] : projections_) proj_ids.push_back(id);
  std::sort(proj_ids.begin(), proj_ids.end(), id_less);
  nlohmann::json projections = nlohmann::json::array();
  for (const auto& id : proj_ids) {
    const auto& p = projections_.at(id);
    nlohmann::json j{{"id", id},
                     {"subsets", p.subsets},
                     {"train_config", sen::config_to_json(p.train_config)},
                     {"tsne_config", tsne::config_to_json(p.tsne_config)},
                     {"embeddings", matrix_json(p.embeddings)},
                     {"coords", matrix_json(p.coords)},
                     {"loss_history", p.loss_history},
                     {"epochs", p.epochs},
                     {"converged", p.converged},
                     {"sizes", p.sizes}};
    if (p.clusters) {
      j["clusters"] = {{"method", analysis::to_string(p.clusters->method)},
                       {"k", p.clusters->k},
                       {"labels", p.clusters->labels},
                       {"inertia", p.clusters->inertia}};
    } else {
      j["clusters"] = nullptr;
    }
    projections.push_back(std::move(j));
  }
  nlohmann::json counters = nlohmann::json::object();
  for (const auto& [prefix, n] : counters_) counters[std::string(1, prefix)] = n;
  return {{"format", "subsetvis-session/1"},
          {"dataset", dataset_id_},
          {"options", {{"max_cube_cells", options_.max_cube_cells}, {"seed", options_.seed}}},
          {"counters", counters},
          {"nodes", nodes},
          {"candidate_sets", sets},
          {"subsets", subsets},
          {"projections", projections},
          {"current_projection", current_projection_}};
}

Session Session::restore(std::shared_ptr<const Dataset> dataset, const nlohmann::json& snap, SessionOptions options) {
  try {
    if (snap.at("format") != "subsetvis-session/1") {
      fail(ErrorKind::invalid_argument, "bad_snapshot", "unsupported snapshot format");
    }
    options.max_cube_cells = snap.at("options").at("max_cube_cells").get<std::size_t>();
    options.seed = snap.at("options").at("seed").get<std::uint64_t>();
    Session s(std::move(dataset), snap.at("dataset").get<std::string>(), options);
    s.nodes_.clear();
    s.subsets_.clear();
    const auto& ds = *s.dataset_;
    for (const auto& j : snap.at("subsets")) {
      Subset sub;
      sub.id = j.at("id").get<std::string>();
      sub.filters = raw_filters_from_json(j.at("filters"), ds);
      sub.slicing_attributes = j.at("slicing_attributes").get<std::vector<AttributeId>>();
      if (!j.at("unit_bin").is_null()) sub.unit_bin = j.at("unit_bin").get<BinIndex>();
      s.add_subset(std::move(sub), j.at("producer").get<std::string>(), j.at("candidate_set").get<std::string>(),
                   j.at("excluded").get<std::vector<AttributeId>>());
    }
    for (const auto& j : snap.at("candidate_sets")) {
      CandidateSet cs{j.at("id").get<std::string>(), j.at("node").get<std::string>(),
                      j.at("attribute").get<AttributeId>(), j.at("subsets").get<std::vector<std::string>>()};
      s.candidate_sets_.emplace(cs.id, std::move(cs));
    }
    for (const auto& j : snap.at("nodes")) {
      ExplorationNode n;
      n.id = j.at("id").get<std::string>();
      if (!j.at("parent").is_null()) n.parent = j.at("parent").get<std::string>();
      n.origin = j.at("origin") == "root" ? NodeOrigin::root : NodeOrigin::selection;
      n.subsets = j.at("subsets").get<std::vector<std::string>>();
      n.children = j.at("children").get<std::vector<std::string>>();
      n.candidate_sets = j.at("candidate_sets").get<std::vector<std::string>>();
      if (!j.at("slicing_attribute").is_null()) n.slicing_attribute = j.at("slicing_attribute").get<AttributeId>();
      if (!j.at("selection").is_null()) {
        Selection sel;
        sel.filters = raw_filters_from_json(j.at("selection").at("filters"), ds);
        sel.path = j.at("selection").at("path").get<std::vector<AttributeId>>();
        n.selection = std::move(sel);
      }
      s.nodes_.emplace(n.id, std::move(n));
    }
    for (const auto& j : snap.at("projections")) {
      ProjectionState p;
      p.id = j.at("id").get<std::string>();
      p.subsets = j.at("subsets").get<std::vector<std::string>>();
      p.train_config = sen::config_from_json(j.at("train_config"));
      p.tsne_config = tsne::config_from_json(j.at("tsne_config"));
      p.embeddings = matrix_from_json(j.at("embeddings"), static_cast<Eigen::Index>(p.train_config.embedding_len));
      p.coords = matrix_from_json(j.at("coords"), 2);
      p.loss_history = j.at("loss_history").get<std::vector<double>>();
      p.epochs = j.at("epochs").get<std::size_t>();
      p.converged = j.at("converged").get<bool>();
      p.sizes = j.at("sizes").get<std::vector<std::uint64_t>>();
      if (!j.at("clusters").is_null()) {
        const auto& c = j.at("clusters");
        analysis::ClusterAssignment a;
        a.method = analysis::parse_cluster_method(c.at("method").get<std::string>());
        a.k = c.at("k").get<int>();
        a.labels = c.at("labels").get<std::vector<int>>();
        a.inertia = c.at("inertia").get<double>();
        p.clusters = std::move(a);
      }
      s.projections_.emplace(p.id, std::move(p));
    }
    s.current_projection_ = snap.at("current_projection").get<std::string>();
    s.counters_.clear();
    for (const auto& [prefix, n] : snap.at("counters").items()) s.counters_[prefix.front()] = n.get<std::uint64_t>();
    if (!s.nodes_.contains(kRootNode)) fail(ErrorKind::invalid_argument, "bad_snapshot", "snapshot has no root node");
    return s;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::invalid_argument, "bad_snapshot", e.what());
  }
}

}  // namespace subsetvis::exploration
