#include "subsetvis/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "subsetvis/clustering.hpp"
#include "subsetvis/dataset.hpp"
#include "subsetvis/error.hpp"
#include "subsetvis/rng.hpp"

namespace subsetvis::experiments {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::size_t parse_size(std::string_view text, const char* what) {
  std::size_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end) {
    fail(ErrorKind::invalid_argument, "bad_view_split", std::string("malformed ") + what + " '" + std::string(text) + "'");
  }
  return v;
}

std::vector<double> ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) r[order[t]] = avg;
    i = j + 1;
  }
  return r;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

analysis::QualityReport combine(std::span<const analysis::QualityReport> rs, bool variance) {
  auto field = [&](double analysis::QualityReport::*f) {
    std::vector<double> v;
    for (const auto& r : rs) v.push_back(r.*f);
    return variance ? sample_variance(v) : mean(v);
  };
  return {field(&analysis::QualityReport::acc), field(&analysis::QualityReport::nmi),
          field(&analysis::QualityReport::ari), field(&analysis::QualityReport::silhouette),
          field(&analysis::QualityReport::chi)};
}

}  // namespace

std::vector<std::size_t> MultiViewRecordSet::view_dims() const {
  std::vector<std::size_t> out;
  if (views.empty()) return out;
  for (const auto& v : views.front()) out.push_back(v.size());
  return out;
}

std::size_t MultiViewRecordSet::category_count() const {
  std::vector<int> sorted = labels;
  std::sort(sorted.begin(), sorted.end());
  return static_cast<std::size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
}

void MultiViewRecordSet::validate() const {
  if (labels.size() != views.size()) {
    fail(ErrorKind::invalid_argument, "length_mismatch", "one label per record is required");
  }
  if (labels.empty()) fail(ErrorKind::invalid_argument, "empty_input", "record set is empty");
  const auto dims = view_dims();
  if (dims.empty()) fail(ErrorKind::invalid_argument, "empty_input", "records have no views");
  for (std::size_t r = 0; r < views.size(); ++r) {
    if (views[r].size() != dims.size()) {
      fail(ErrorKind::invalid_argument, "inconsistent_views",
           "record " + std::to_string(r) + " has " + std::to_string(views[r].size()) + " views, expected " +
               std::to_string(dims.size()));
    }
    for (std::size_t v = 0; v < dims.size(); ++v) {
      if (views[r][v].size() != dims[v]) {
        fail(ErrorKind::invalid_argument, "inconsistent_views",
             "record " + std::to_string(r) + " view " + std::to_string(v) + " has length " +
                 std::to_string(views[r][v].size()) + ", expected " + std::to_string(dims[v]));
      }
      for (double x : views[r][v]) {
        if (!std::isfinite(x)) {
          fail(ErrorKind::invalid_argument, "non_finite_feature", "record " + std::to_string(r) + " has a non-finite value");
        }
      }
    }
  }
}

MultiViewRecordSet load_jsonl(std::string_view text) {
  MultiViewRecordSet rs;
  std::map<std::string, int> names;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
      if (end == text.size()) break;
      continue;
    }
    try {
      const auto j = nlohmann::json::parse(line);
      const auto& label = j.at("label");
      int id = 0;
      if (label.is_number_integer()) {
        id = label.get<int>();
      } else {
        const auto name = label.get<std::string>();
        auto [it, _] = names.emplace(name, static_cast<int>(names.size()));
        id = it->second;
      }
      rs.labels.push_back(id);
      rs.views.push_back(j.at("views").get<std::vector<std::vector<double>>>());
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::invalid_argument, "bad_jsonl", "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (end == text.size()) break;
  }
  rs.validate();
  return rs;
}

std::string to_jsonl(const MultiViewRecordSet& rs) {
  std::string out;
  for (std::size_t r = 0; r < rs.size(); ++r) {
    out += nlohmann::json{{"label", rs.labels[r]}, {"views", rs.views[r]}}.dump();
    out += '\n';
  }
  return out;
}

std::vector<std::size_t> parse_view_split(std::string_view spec) {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  while (pos <= spec.size()) {
    auto end = spec.find(',', pos);
    if (end == std::string_view::npos) end = spec.size();
    const auto part = spec.substr(pos, end - pos);
    const auto x = part.find('x');
    if (x == std::string_view::npos) {
      out.push_back(parse_size(part, "view length"));
    } else {
      const auto len = parse_size(part.substr(0, x), "view length");
      const auto times = parse_size(part.substr(x + 1), "repeat count");
      out.insert(out.end(), times, len);
    }
    pos = end + 1;
  }
  if (out.empty() || std::find(out.begin(), out.end(), 0u) != out.end()) {
    fail(ErrorKind::invalid_argument, "bad_view_split", "view lengths must be positive");
  }
  return out;
}

std::vector<std::size_t> handwritten_split() {
  std::vector<std::size_t> out(29, 20);
  out.push_back(69);
  return out;
}

std::vector<std::vector<double>> split_views(std::span<const double> flat, std::span<const std::size_t> lengths) {
  const auto total = std::accumulate(lengths.begin(), lengths.end(), std::size_t{0});
  if (total != flat.size()) {
    fail(ErrorKind::invalid_argument, "length_mismatch",
         "view lengths add to " + std::to_string(total) + " but the record has " + std::to_string(flat.size()) +
             " values");
  }
  std::vector<std::vector<double>> out;
  std::size_t at = 0;
  for (auto len : lengths) {
    out.emplace_back(flat.begin() + static_cast<std::ptrdiff_t>(at), flat.begin() + static_cast<std::ptrdiff_t>(at + len));
    at += len;
  }
  return out;
}

MultiViewRecordSet load_flat_csv(std::string_view text, std::string_view label_column,
                                 std::span<const std::size_t> lengths) {
  const auto rows = parse_csv(text);
  if (rows.size() < 2) fail(ErrorKind::invalid_argument, "empty_input", "CSV has no data rows");
  const auto& header = rows.front();
  const auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end()) {
    fail(ErrorKind::invalid_argument, "unknown_column", "label column '" + std::string(label_column) + "' not found");
  }
  const auto label_idx = static_cast<std::size_t>(label_it - header.begin());
  MultiViewRecordSet rs;
  std::map<std::string, int> names;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) {
      fail(ErrorKind::invalid_argument, "bad_csv", "row " + std::to_string(r + 1) + " has the wrong field count");
    }
    std::vector<double> flat;
    flat.reserve(row.size() - 1);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c == label_idx) continue;
      double v = 0.0;
      const auto& s = row[c];
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || ptr != s.data() + s.size()) {
        fail(ErrorKind::invalid_argument, "bad_csv",
             "row " + std::to_string(r + 1) + ", column '" + header[c] + "': not a number");
      }
      flat.push_back(v);
    }
    auto [it, _] = names.emplace(row[label_idx], static_cast<int>(names.size()));
    rs.labels.push_back(it->second);
    rs.views.push_back(split_views(flat, lengths));
  }
  rs.validate();
  return rs;
}

Replacement replace_features(const MultiViewRecordSet& rs, std::size_t m, std::uint64_t seed) {
  const auto n = rs.view_count();
  if (m > n) {
    fail(ErrorKind::invalid_argument, "too_many_replacements",
         "cannot replace " + std::to_string(m) + " of " + std::to_string(n) + " views");
  }
  Rng rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order.begin(), order.end());
  Replacement out;
  out.replaced_views.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m));
  std::sort(out.replaced_views.begin(), out.replaced_views.end());
  out.data = rs;
  const auto dims = rs.view_dims();
  for (auto v : out.replaced_views) {
    for (std::size_t d = 0; d < dims[v]; ++d) {
      double lo = rs.views[0][v][d], hi = lo;
      for (const auto& rec : rs.views) {
        lo = std::min(lo, rec[v][d]);
        hi = std::max(hi, rec[v][d]);
      }
      for (auto& rec : out.data.views) rec[v][d] = rng.uniform(lo, hi);
    }
  }
  return out;
}

MultiViewRecordSet make_surrogate(const SurrogateConfig& cfg) {
  if (cfg.categories == 0 || cfg.per_category == 0 || cfg.view_dims.empty()) {
    fail(ErrorKind::invalid_argument, "bad_surrogate", "surrogate needs categories, records and views");
  }
  Rng rng(cfg.seed);
  std::vector<std::vector<std::vector<double>>> prototypes(cfg.categories);
  for (auto& proto : prototypes) {
    for (auto len : cfg.view_dims) {
      std::vector<double> v(len);
      for (auto& x : v) x = rng.uniform();
      proto.push_back(std::move(v));
    }
  }
  MultiViewRecordSet rs;
  for (std::size_t c = 0; c < cfg.categories; ++c) {
    for (std::size_t i = 0; i < cfg.per_category; ++i) {
      auto rec = prototypes[c];
      for (auto& view : rec) {
        for (auto& x : view) x += cfg.noise * rng.normal();
      }
      rs.labels.push_back(static_cast<int>(c));
      rs.views.push_back(std::move(rec));
    }
  }
  return rs;
}

std::string_view to_string(Method m) { return m == Method::sen ? "sen" : "concat_tsne"; }

Method parse_method(std::string_view text) {
  if (text == "sen") return Method::sen;
  if (text == "concat" || text == "concat_tsne" || text == "tsne") return Method::concat_tsne;
  fail(ErrorKind::invalid_argument, "unknown_method", "unknown method '" + std::string(text) + "'");
}

const CellSummary& ExperimentReport::find(Method method, std::size_t replaced) const {
  for (const auto& s : summary) {
    if (s.method == method && s.replaced == replaced) return s;
  }
  fail(ErrorKind::not_found, "unknown_cell",
       "no summary for " + std::string(to_string(method)) + " at m=" + std::to_string(replaced));
}

Matrix sen_embed(const MultiViewRecordSet& rs, const sen::TrainConfig& cfg) {
  std::vector<sen::SubsetFeatures> subsets(rs.size());
  for (std::size_t r = 0; r < rs.size(); ++r) {
    for (std::size_t v = 0; v < rs.views[r].size(); ++v) {
      subsets[r].emplace_back(static_cast<sen::FeatureKey>(v), rs.views[r][v]);
    }
  }
  return sen::train(sen::TrainingData(subsets), cfg).embeddings;
}

Matrix concatenate(const MultiViewRecordSet& rs) {
  const auto dims = rs.view_dims();
  const auto total = std::accumulate(dims.begin(), dims.end(), std::size_t{0});
  Matrix out(static_cast<Eigen::Index>(rs.size()), static_cast<Eigen::Index>(total));
  for (std::size_t r = 0; r < rs.size(); ++r) {
    Eigen::Index c = 0;
    for (const auto& view : rs.views[r]) {
      for (double x : view) out(static_cast<Eigen::Index>(r), c++) = x;
    }
  }
  return out;
}

analysis::QualityReport evaluate(const Matrix& embedding, const Matrix& projection_2d, std::span<const int> labels,
                                 std::uint64_t seed, int restarts) {
  std::vector<int> sorted(labels.begin(), labels.end());
  std::sort(sorted.begin(), sorted.end());
  const int k = static_cast<int>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
  const auto clusters = analysis::kmeans(embedding, k, seed, restarts);
  analysis::QualityReport r;
  r.acc = analysis::acc(clusters.labels, labels);
  r.nmi = analysis::nmi(clusters.labels, labels);
  r.ari = analysis::ari(clusters.labels, labels);
  r.silhouette = analysis::silhouette(projection_2d, labels);
  r.chi = analysis::chi(projection_2d, labels);
  return r;
}

ExperimentReport run_experiment(const MultiViewRecordSet& rs, const ExperimentConfig& cfg, const Progress& progress) {
  rs.validate();
  if (cfg.trials == 0) fail(ErrorKind::invalid_argument, "bad_experiment_config", "trials must be positive");
  if (cfg.methods.empty()) fail(ErrorKind::invalid_argument, "bad_experiment_config", "no methods given");
  for (auto m : cfg.replacement_counts) {
    if (m > rs.view_count()) {
      fail(ErrorKind::invalid_argument, "too_many_replacements",
           "cannot replace " + std::to_string(m) + " of " + std::to_string(rs.view_count()) + " views");
    }
  }
  ExperimentReport report;
  report.config = {{"methods", nlohmann::json::array()},
                   {"replacement_counts", cfg.replacement_counts},
                   {"trials", cfg.trials},
                   {"seed", cfg.seed},
                   {"embedding_dims", cfg.embedding_dims},
                   {"kmeans_restarts", cfg.kmeans_restarts},
                   {"records", rs.size()},
                   {"views", rs.view_count()},
                   {"view_dims", rs.view_dims()},
                   {"categories", rs.category_count()},
                   {"sen", sen::config_to_json(cfg.sen)},
                   {"tsne", tsne::config_to_json(cfg.tsne)}};
  for (auto m : cfg.methods) report.config["methods"].push_back(to_string(m));

  for (std::size_t mi = 0; mi < cfg.replacement_counts.size(); ++mi) {
    const auto m = cfg.replacement_counts[mi];
    for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
      // The seed depends on (m, trial) only, so both methods see the same
      // mutated data.
      const auto trial_seed = mix_seed(cfg.seed, m * 1000 + trial);
      const auto mutated = replace_features(rs, m, trial_seed);
      for (auto method : cfg.methods) {
        const auto start = Clock::now();
        Matrix embedding;
        auto tc2 = cfg.tsne;
        tc2.output_dims = 2;
        tc2.seed = mix_seed(trial_seed, 3);
        Matrix coords;
        if (method == Method::sen) {
          auto sc = cfg.sen;
          sc.embedding_len = cfg.embedding_dims;
          sc.seed = mix_seed(trial_seed, 1);
          embedding = sen_embed(mutated.data, sc);
          // Embed first, then project, as in the interactive workflow.
          coords = tsne::tsne(embedding, tc2).coords;
        } else {
          auto tc = cfg.tsne;
          tc.output_dims = cfg.embedding_dims;
          tc.seed = mix_seed(trial_seed, 2);
          const auto flat = concatenate(mutated.data);
          embedding = tsne::tsne(flat, tc).coords;
          coords = tsne::tsne(flat, tc2).coords;
        }
        CellResult cell;
        cell.method = method;
        cell.replaced = m;
        cell.trial = trial;
        cell.seed = trial_seed;
        cell.replaced_views = mutated.replaced_views;
        cell.report = evaluate(embedding, coords, mutated.data.labels, mix_seed(trial_seed, 4), cfg.kmeans_restarts);
        cell.seconds = seconds_since(start);
        if (progress) progress(cell);
        report.cells.push_back(std::move(cell));
      }
    }
  }

  for (auto method : cfg.methods) {
    for (auto m : cfg.replacement_counts) {
      std::vector<analysis::QualityReport> rows;
      for (const auto& c : report.cells) {
        if (c.method == method && c.replaced == m) rows.push_back(c.report);
      }
      CellSummary s;
      s.method = method;
      s.replaced = m;
      s.trials = rows.size();
      s.mean = combine(rows, false);
      s.variance = combine(rows, true);
      report.summary.push_back(s);
    }
  }
  return report;
}

std::string report_csv(const ExperimentReport& report) {
  std::ostringstream out;
  out.precision(10);
  out << "method,replaced,trials,acc,acc_var,nmi,nmi_var,ari,ari_var,silhouette,silhouette_var,chi,chi_var\n";
  for (const auto& s : report.summary) {
    out << to_string(s.method) << ',' << s.replaced << ',' << s.trials << ',' << s.mean.acc << ',' << s.variance.acc
        << ',' << s.mean.nmi << ',' << s.variance.nmi << ',' << s.mean.ari << ',' << s.variance.ari << ','
        << s.mean.silhouette << ',' << s.variance.silhouette << ',' << s.mean.chi << ',' << s.variance.chi << '\n';
  }
  return out.str();
}

nlohmann::json report_json(const ExperimentReport& report) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : report.cells) {
    cells.push_back({{"method", to_string(c.method)},
                     {"replaced", c.replaced},
                     {"trial", c.trial},
                     {"seed", c.seed},
                     {"replaced_views", c.replaced_views},
                     {"report", analysis::report_to_json(c.report)},
                     {"seconds", c.seconds}});
  }
  nlohmann::json summary = nlohmann::json::array();
  for (const auto& s : report.summary) {
    summary.push_back({{"method", to_string(s.method)},
                       {"replaced", s.replaced},
                       {"trials", s.trials},
                       {"mean", analysis::report_to_json(s.mean)},
                       {"variance", analysis::report_to_json(s.variance)}});
  }
  return {{"config", report.config}, {"cells", cells}, {"summary", summary}};
}

sen::TrainingData random_training_data(std::size_t subsets, std::size_t features, std::size_t dims,
                                       std::uint64_t seed) {
  Rng rng(seed);
  std::vector<sen::SubsetFeatures> data(subsets);
  for (auto& s : data) {
    for (std::size_t f = 0; f < features; ++f) {
      std::vector<double> v(dims);
      for (auto& x : v) x = rng.uniform();
      s.emplace_back(static_cast<sen::FeatureKey>(f), std::move(v));
    }
  }
  return sen::TrainingData(data);
}

std::vector<BenchCell> bench_efficiency(const BenchConfig& cfg, const std::function<void(const BenchCell&)>& progress) {
  if (cfg.repetitions == 0) fail(ErrorKind::invalid_argument, "bad_bench_config", "repetitions must be positive");
  std::vector<BenchCell> out;
  for (auto k : cfg.subset_counts) {
    for (auto f : cfg.feature_counts) {
      BenchCell cell;
      cell.subsets = k;
      cell.features = f;
      for (std::size_t rep = 0; rep < cfg.repetitions; ++rep) {
        const auto seed = mix_seed(cfg.seed, (k * 100 + f) * 100 + rep);
        const auto data = random_training_data(k, f, cfg.feature_dims, seed);
        auto sc = cfg.sen;
        sc.seed = mix_seed(seed, 1);
        const auto start = Clock::now();
        const auto model = sen::train(data, sc);
        cell.seconds.push_back(seconds_since(start));
        cell.epochs.push_back(model.epochs);
      }
      cell.mean_seconds = mean(cell.seconds);
      cell.variance = sample_variance(cell.seconds);
      if (progress) progress(cell);
      out.push_back(std::move(cell));
    }
  }
  return out;
}

std::string bench_csv(std::span<const BenchCell> cells) {
  std::ostringstream out;
  out.precision(6);
  out << "subsets,features,mean_seconds,variance,mean_epochs,repetitions\n";
  for (const auto& c : cells) {
    double epochs = 0.0;
    for (auto e : c.epochs) epochs += static_cast<double>(e);
    epochs /= static_cast<double>(std::max<std::size_t>(1, c.epochs.size()));
    out << c.subsets << ',' << c.features << ',' << c.mean_seconds << ',' << c.variance << ',' << epochs << ','
        << c.seconds.size() << '\n';
  }
  return out.str();
}

double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(ErrorKind::invalid_argument, "length_mismatch", "spearman needs equal lengths");
  if (x.size() < 2) fail(ErrorKind::invalid_argument, "too_few_points", "spearman needs at least 2 pairs");
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  return pearson(rx, ry);
}

}  // namespace subsetvis::experiments
