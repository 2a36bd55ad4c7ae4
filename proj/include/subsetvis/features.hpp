#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "subsetvis/cube.hpp"
#include "subsetvis/dataset.hpp"

namespace subsetvis {

// Distribution of a subset's records over the bins of one attribute.
struct FeatureVector {
  AttributeId feature_id = 0;
  std::vector<double> values;  // proportions; all zero for an empty subset
  std::vector<std::uint64_t> raw_counts;
};

struct Subset {
  std::string id;
  std::vector<Filter> filters;  // hidden filters omitted
  std::vector<AttributeId> slicing_attributes;
  std::uint64_t record_count = 0;
  // The single bin of the most recent slicing attribute.
  std::optional<BinIndex> unit_bin;
  std::vector<FeatureVector> features;  // ascending feature_id

  std::size_t dimensionality() const { return slicing_attributes.size(); }
  bool empty() const { return record_count == 0; }
  const Filter* filter_on(AttributeId attribute) const;
  const FeatureVector* feature(AttributeId attribute) const;
};

// A record selection to slice: a conjunction of filters plus the slicing
// attributes already used on the way to it. Features of `path` attributes
// are never extracted, even when their filter became hidden.
struct Selection {
  std::vector<Filter> filters;
  std::vector<AttributeId> path;
};

// One child subset per bin of `attribute`, with filters = parent filters plus
// a single-bin filter. Record counts and features are left for
// extract_features. Throws Error(conflict, "duplicate_slicing_attribute").
std::vector<Subset> slice(const Dataset& dataset, const Selection& parent,
                          AttributeId attribute);

// Attributes whose features a subset carries: all except its path and
// slicing attributes.
std::vector<AttributeId> feature_attributes(const Dataset& dataset,
                                            std::span<const AttributeId> excluded);

// Cube tuples needed to extract features for subsets filtered on
// `filter_attributes`.
std::vector<AttributeTuple> feature_tuples(const Dataset& dataset,
                                           std::span<const AttributeId> filter_attributes,
                                           std::span<const AttributeId> excluded);

// Fills record_count and features from the cube.
void extract_features(Subset& subset, const Dataset& dataset, const CubeIndex& cube,
                      std::span<const AttributeId> excluded);

// Reference path: same result by scanning every record.
void extract_features_scan(Subset& subset, const Dataset& dataset,
                           std::span<const AttributeId> excluded);

// Records matching all filters, counted by a scan.
std::uint64_t count_matching(const Dataset& dataset, std::span<const Filter> filters);

// Per-bin counts of `target` over records matching `filters`, via the cube.
std::vector<std::uint64_t> marginal_counts(const Dataset& dataset, const CubeIndex& cube,
                                           std::span<const Filter> filters,
                                           AttributeId target);

FeatureVector make_feature(AttributeId attribute, std::vector<std::uint64_t> counts);

// "Week=Sat|Hour=20" style description built from bin labels.
std::string describe(const Subset& subset, const Dataset& dataset);

nlohmann::json filters_to_json(std::span<const Filter> filters, const Dataset& dataset);
// One line of the feature export.
nlohmann::json subset_to_json(const Subset& subset, const Dataset& dataset);
std::string features_jsonl(std::span<const Subset> subsets, const Dataset& dataset);

}  // namespace subsetvis
