#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include "subsetvis/dataset.hpp"
#include "subsetvis/exec.hpp"

namespace subsetvis {

// A filter restricts one attribute to a set of bins.
struct Filter {
  AttributeId attribute = 0;
  std::vector<BinIndex> range;  // sorted, unique, non-empty

  bool contains(BinIndex bin) const;
  bool operator==(const Filter&) const = default;
};

// Sorts and deduplicates the range and checks it against the schema.
Filter make_filter(const Dataset& dataset, AttributeId attribute,
                   std::vector<BinIndex> range);

// A filter covering the attribute's whole domain.
bool is_hidden(const Filter& filter, const Dataset& dataset);

// Dense count array over the cross product of bins of an attribute tuple.
class Aggregate {
 public:
  Aggregate(std::vector<AttributeId> attributes, std::vector<std::size_t> dims);

  const std::vector<AttributeId>& attributes() const { return attributes_; }
  const std::vector<std::size_t>& dims() const { return dims_; }
  std::span<const std::uint64_t> counts() const { return counts_; }
  std::span<std::uint64_t> mutable_counts() { return counts_; }
  std::size_t cell_count() const { return counts_.size(); }

  std::size_t offset(std::span<const BinIndex> bins) const;
  std::uint64_t at(std::span<const BinIndex> bins) const {
    return counts_[offset(bins)];
  }
  std::uint64_t total() const;

  // Sums out one attribute.
  Aggregate marginalize(AttributeId attribute) const;

  // Per-bin counts of `target` over the cells allowed by `filters`. Every
  // filter attribute and the target must belong to this aggregate; other
  // axes are summed over.
  std::vector<std::uint64_t> marginal(std::span<const Filter> filters,
                                      AttributeId target) const;

 private:
  std::vector<AttributeId> attributes_;
  std::vector<std::size_t> dims_;
  std::vector<std::size_t> strides_;
  std::vector<std::uint64_t> counts_;
};

using AttributeTuple = std::vector<AttributeId>;

// Normalized (sorted, unique) form used as the cube key.
AttributeTuple canonical_tuple(AttributeTuple tuple);

// Immutable set of group-by aggregates, one per attribute tuple.
class CubeIndex {
 public:
  CubeIndex() = default;

  bool covers(const AttributeTuple& tuple) const;
  // Throws Error(domain, "cube_missing_tuple") when the tuple is absent.
  const Aggregate& find(const AttributeTuple& tuple) const;
  std::size_t cell_count() const;
  std::size_t size() const { return aggregates_.size(); }

  // Copy sharing existing aggregates plus any missing tuples built from
  // `dataset`.
  CubeIndex extended(const Dataset& dataset, std::span<const AttributeTuple> tuples,
                     std::size_t max_cells,
                     ExecPolicy policy = ExecPolicy::parallel) const;

 private:
  friend CubeIndex cube_build(const Dataset&, std::span<const AttributeTuple>,
                              std::size_t, ExecPolicy);
  std::map<AttributeTuple, std::shared_ptr<const Aggregate>> aggregates_;
};

inline constexpr std::size_t kDefaultMaxCubeCells = std::size_t{1} << 26;

// Throws Error(domain, "cube_budget_exceeded") naming the required cell count
// when the new aggregates would exceed `max_cells`.
CubeIndex cube_build(const Dataset& dataset, std::span<const AttributeTuple> tuples,
                     std::size_t max_cells = kDefaultMaxCubeCells,
                     ExecPolicy policy = ExecPolicy::parallel);

// Counting kernel for one aggregate.
Aggregate count_records(const Dataset& dataset, const AttributeTuple& tuple,
                        ExecPolicy policy);

}  // namespace subsetvis
