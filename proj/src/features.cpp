#include "subsetvis/features.hpp"

#include <algorithm>

#include "subsetvis/error.hpp"

namespace subsetvis {

namespace {

bool contains(std::span<const AttributeId> ids, AttributeId id) {
  return std::find(ids.begin(), ids.end(), id) != ids.end();
}

std::vector<AttributeId> excluded_for(const Subset& subset, std::span<const AttributeId> excluded) {
  std::vector<AttributeId> out(excluded.begin(), excluded.end());
  for (AttributeId a : subset.slicing_attributes) {
    if (!contains(out, a)) out.push_back(a);
  }
  return out;
}

}  // namespace

const Filter* Subset::filter_on(AttributeId attribute) const {
  for (const auto& f : filters) {
    if (f.attribute == attribute) return &f;
  }
  return nullptr;
}

const FeatureVector* Subset::feature(AttributeId attribute) const {
  for (const auto& f : features) {
    if (f.feature_id == attribute) return &f;
  }
  return nullptr;
}

std::vector<Subset> slice(const Dataset& dataset, const Selection& parent, AttributeId attribute) {
  const auto& attr = dataset.attribute(attribute);
  const bool filtered = std::any_of(parent.filters.begin(), parent.filters.end(),
                                    [&](const Filter& f) { return f.attribute == attribute; });
  if (filtered || contains(parent.path, attribute)) {
    fail(ErrorKind::conflict, "duplicate_slicing_attribute",
         "'" + attr.name + "' is already a slicing attribute of this selection");
  }
  std::vector<Subset> out;
  out.reserve(attr.bin_count());
  for (BinIndex b = 0; b < attr.bin_count(); ++b) {
    Subset s;
    s.filters = parent.filters;
    s.filters.push_back(make_filter(dataset, attribute, {b}));
    // A one-bin attribute yields a full-domain (hidden) filter.
    std::erase_if(s.filters, [&](const Filter& f) { return is_hidden(f, dataset); });
    std::sort(s.filters.begin(), s.filters.end(),
              [](const Filter& x, const Filter& y) { return x.attribute < y.attribute; });
    for (AttributeId p : parent.path) {
      if (std::any_of(s.filters.begin(), s.filters.end(), [&](const Filter& f) { return f.attribute == p; })) {
        s.slicing_attributes.push_back(p);
      }
    }
    for (const auto& f : s.filters) {
      if (!contains(s.slicing_attributes, f.attribute) && f.attribute != attribute) {
        s.slicing_attributes.push_back(f.attribute);
      }
    }
    if (s.filter_on(attribute)) s.slicing_attributes.push_back(attribute);
    s.unit_bin = b;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<AttributeId> feature_attributes(const Dataset& dataset, std::span<const AttributeId> excluded) {
  std::vector<AttributeId> out;
  for (AttributeId a = 0; a < dataset.attribute_count(); ++a) {
    if (!contains(excluded, a)) out.push_back(a);
  }
  return out;
}

std::vector<AttributeTuple> feature_tuples(const Dataset& dataset,
                                           std::span<const AttributeId> filter_attributes,
                                           std::span<const AttributeId> excluded) {
  std::vector<AttributeId> skip(excluded.begin(), excluded.end());
  skip.insert(skip.end(), filter_attributes.begin(), filter_attributes.end());
  std::vector<AttributeTuple> out;
  for (AttributeId f : feature_attributes(dataset, skip)) {
    AttributeTuple t(filter_attributes.begin(), filter_attributes.end());
    t.push_back(f);
    out.push_back(canonical_tuple(std::move(t)));
  }
  return out;
}

FeatureVector make_feature(AttributeId attribute, std::vector<std::uint64_t> counts) {
  FeatureVector fv;
  fv.feature_id = attribute;
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  fv.values.assign(counts.size(), 0.0);
  if (total > 0) {
    for (std::size_t i = 0; i < counts.size(); ++i) {
      fv.values[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
    }
  }
  fv.raw_counts = std::move(counts);
  return fv;
}

std::vector<std::uint64_t> marginal_counts(const Dataset& dataset, const CubeIndex& cube,
                                           std::span<const Filter> filters, AttributeId target) {
  AttributeTuple tuple{target};
  for (const auto& f : filters) tuple.push_back(f.attribute);
  (void)dataset;
  return cube.find(tuple).marginal(filters, target);
}

void extract_features(Subset& subset, const Dataset& dataset, const CubeIndex& cube,
                      std::span<const AttributeId> excluded) {
  const auto skip = excluded_for(subset, excluded);
  subset.features.clear();
  std::vector<AttributeId> filter_attrs;
  for (const auto& f : subset.filters) filter_attrs.push_back(f.attribute);
  const auto targets = feature_attributes(dataset, skip);
  for (AttributeId a : targets) {
    subset.features.push_back(make_feature(a, marginal_counts(dataset, cube, subset.filters, a)));
  }
  if (!targets.empty()) {
    std::uint64_t n = 0;
    for (auto c : subset.features.front().raw_counts) n += c;
    subset.record_count = n;
  } else if (!filter_attrs.empty()) {
    // No feature left to carry the count; ask the cube over the filter tuple.
    const AttributeId any = filter_attrs.front();
    std::uint64_t n = 0;
    for (auto c : cube.find(filter_attrs).marginal(subset.filters, any)) n += c;
    subset.record_count = n;
  } else {
    subset.record_count = dataset.record_count();
  }
}

std::uint64_t count_matching(const Dataset& dataset, std::span<const Filter> filters) {
  std::uint64_t n = 0;
  for (std::size_t r = 0; r < dataset.record_count(); ++r) {
    bool keep = true;
    for (const auto& f : filters) {
      if (!f.contains(dataset.cell(r, f.attribute))) {
        keep = false;
        break;
      }
    }
    n += keep ? 1 : 0;
  }
  return n;
}

void extract_features_scan(Subset& subset, const Dataset& dataset, std::span<const AttributeId> excluded) {
  const auto skip = excluded_for(subset, excluded);
  const auto targets = feature_attributes(dataset, skip);
  std::vector<std::vector<std::uint64_t>> counts;
  for (AttributeId a : targets) counts.emplace_back(dataset.attribute(a).bin_count(), 0);
  std::uint64_t n = 0;
  for (std::size_t r = 0; r < dataset.record_count(); ++r) {
    bool keep = true;
    for (const auto& f : subset.filters) {
      if (!f.contains(dataset.cell(r, f.attribute))) {
        keep = false;
        break;
      }
    }
    if (!keep) continue;
    ++n;
    for (std::size_t t = 0; t < targets.size(); ++t) ++counts[t][dataset.cell(r, targets[t])];
  }
  subset.record_count = n;
  subset.features.clear();
  for (std::size_t t = 0; t < targets.size(); ++t) {
    subset.features.push_back(make_feature(targets[t], std::move(counts[t])));
  }
}

std::string describe(const Subset& subset, const Dataset& dataset) {
  std::string out;
  for (const auto& f : subset.filters) {
    const auto& attr = dataset.attribute(f.attribute);
    if (!out.empty()) out += '|';
    out += attr.name + '=';
    if (f.range.size() > 1) out += '{';
    for (std::size_t i = 0; i < f.range.size(); ++i) {
      if (i) out += ',';
      out += attr.bins[f.range[i]];
    }
    if (f.range.size() > 1) out += '}';
  }
  return out.empty() ? std::string("*") : out;
}

nlohmann::json filters_to_json(std::span<const Filter> filters, const Dataset& dataset) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& f : filters) {
    const auto& attr = dataset.attribute(f.attribute);
    nlohmann::json labels = nlohmann::json::array();
    for (auto b : f.range) labels.push_back(attr.bins[b]);
    out.push_back({{"attribute", attr.name}, {"attribute_id", f.attribute}, {"bins", f.range}, {"labels", labels}});
  }
  return out;
}

nlohmann::json subset_to_json(const Subset& subset, const Dataset& dataset) {
  nlohmann::json features = nlohmann::json::object();
  for (const auto& fv : subset.features) features[dataset.attribute(fv.feature_id).name] = fv.values;
  return {{"id", subset.id},
          {"filters", filters_to_json(subset.filters, dataset)},
          {"record_count", subset.record_count},
          {"features", std::move(features)}};
}

std::string features_jsonl(std::span<const Subset> subsets, const Dataset& dataset) {
  std::string out;
  for (const auto& s : subsets) {
    out += subset_to_json(s, dataset).dump();
    out += '\n';
  }
  return out;
}

}  // namespace subsetvis
