#include "subsetvis/cube.hpp"

#include <algorithm>
#include <numeric>

#include <omp.h>

#include "subsetvis/error.hpp"

namespace subsetvis {

bool Filter::contains(BinIndex bin) const {
  return std::binary_search(range.begin(), range.end(), bin);
}

Filter make_filter(const Dataset& dataset, AttributeId attribute, std::vector<BinIndex> range) {
  const auto& attr = dataset.attribute(attribute);
  std::sort(range.begin(), range.end());
  range.erase(std::unique(range.begin(), range.end()), range.end());
  if (range.empty()) {
    fail(ErrorKind::invalid_argument, "empty_filter", "filter on '" + attr.name + "' has an empty range");
  }
  if (range.back() >= attr.bin_count()) {
    fail(ErrorKind::invalid_argument, "bin_out_of_range",
         "bin " + std::to_string(range.back()) + " is outside '" + attr.name + "' (" +
             std::to_string(attr.bin_count()) + " bins)");
  }
  return Filter{attribute, std::move(range)};
}

bool is_hidden(const Filter& filter, const Dataset& dataset) {
  return filter.range.size() == dataset.attribute(filter.attribute).bin_count();
}

Aggregate::Aggregate(std::vector<AttributeId> attributes, std::vector<std::size_t> dims)
    : attributes_(std::move(attributes)), dims_(std::move(dims)) {
  strides_.assign(dims_.size(), 1);
  std::size_t cells = 1;
  for (std::size_t i = dims_.size(); i-- > 0;) {
    strides_[i] = cells;
    cells *= dims_[i];
  }
  counts_.assign(cells, 0);
}

std::size_t Aggregate::offset(std::span<const BinIndex> bins) const {
  std::size_t off = 0;
  for (std::size_t i = 0; i < bins.size(); ++i) off += bins[i] * strides_[i];
  return off;
}

std::uint64_t Aggregate::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

Aggregate Aggregate::marginalize(AttributeId attribute) const {
  const auto it = std::find(attributes_.begin(), attributes_.end(), attribute);
  if (it == attributes_.end()) {
    fail(ErrorKind::invalid_argument, "not_in_aggregate", "attribute is not an axis of this aggregate");
  }
  const auto axis = static_cast<std::size_t>(it - attributes_.begin());
  auto attrs = attributes_;
  auto dims = dims_;
  attrs.erase(attrs.begin() + static_cast<std::ptrdiff_t>(axis));
  dims.erase(dims.begin() + static_cast<std::ptrdiff_t>(axis));
  Aggregate out(std::move(attrs), std::move(dims));
  // Row-major layout: split each offset into (outer, axis, inner).
  const std::size_t inner = strides_[axis];
  const std::size_t n_axis = dims_[axis];
  const std::size_t outer = counts_.size() / (inner * n_axis);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t a = 0; a < n_axis; ++a) {
      const std::size_t base = (o * n_axis + a) * inner;
      for (std::size_t i = 0; i < inner; ++i) out.counts_[o * inner + i] += counts_[base + i];
    }
  }
  return out;
}

std::vector<std::uint64_t> Aggregate::marginal(std::span<const Filter> filters,
                                               AttributeId target) const {
  const std::size_t rank = attributes_.size();
  std::vector<std::vector<BinIndex>> allowed(rank);
  std::size_t target_axis = rank;
  for (std::size_t i = 0; i < rank; ++i) {
    if (attributes_[i] == target) target_axis = i;
    allowed[i].resize(dims_[i]);
    std::iota(allowed[i].begin(), allowed[i].end(), BinIndex{0});
  }
  if (target_axis == rank) {
    fail(ErrorKind::invalid_argument, "not_in_aggregate", "target attribute is not an axis of this aggregate");
  }
  for (const auto& f : filters) {
    const auto it = std::find(attributes_.begin(), attributes_.end(), f.attribute);
    if (it == attributes_.end()) {
      fail(ErrorKind::invalid_argument, "not_in_aggregate", "filter attribute is not an axis of this aggregate");
    }
    auto& a = allowed[static_cast<std::size_t>(it - attributes_.begin())];
    std::vector<BinIndex> kept;
    std::set_intersection(a.begin(), a.end(), f.range.begin(), f.range.end(), std::back_inserter(kept));
    a = std::move(kept);
  }

  std::vector<std::uint64_t> out(dims_[target_axis], 0);
  if (std::any_of(allowed.begin(), allowed.end(), [](const auto& a) { return a.empty(); })) return out;

  // Odometer over the allowed bins of every axis.
  std::vector<std::size_t> pos(rank, 0);
  while (true) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < rank; ++i) off += allowed[i][pos[i]] * strides_[i];
    out[allowed[target_axis][pos[target_axis]]] += counts_[off];
    std::size_t i = rank;
    while (i-- > 0) {
      if (++pos[i] < allowed[i].size()) break;
      pos[i] = 0;
    }
    if (i == static_cast<std::size_t>(-1)) break;
  }
  return out;
}

AttributeTuple canonical_tuple(AttributeTuple tuple) {
  std::sort(tuple.begin(), tuple.end());
  tuple.erase(std::unique(tuple.begin(), tuple.end()), tuple.end());
  return tuple;
}

bool CubeIndex::covers(const AttributeTuple& tuple) const {
  return aggregates_.contains(canonical_tuple(tuple));
}

const Aggregate& CubeIndex::find(const AttributeTuple& tuple) const {
  const auto it = aggregates_.find(canonical_tuple(tuple));
  if (it == aggregates_.end()) {
    fail(ErrorKind::domain, "cube_missing_tuple", "cube index does not cover the requested attribute tuple");
  }
  return *it->second;
}

std::size_t CubeIndex::cell_count() const {
  std::size_t cells = 0;
  for (const auto& [_, agg] : aggregates_) cells += agg->cell_count();
  return cells;
}

Aggregate count_records(const Dataset& dataset, const AttributeTuple& tuple, ExecPolicy policy) {
  std::vector<std::size_t> dims;
  std::vector<std::span<const BinIndex>> cols;
  for (AttributeId a : tuple) {
    dims.push_back(dataset.attribute(a).bin_count());
    cols.push_back(dataset.column(a));
  }
  Aggregate agg(tuple, dims);
  std::vector<std::size_t> strides(dims.size(), 1);
  for (std::size_t i = dims.size(); i-- > 1;) strides[i - 1] = strides[i] * dims[i];

  const auto n = static_cast<std::ptrdiff_t>(dataset.record_count());
  auto counts = agg.mutable_counts();
  auto cell_of = [&](std::ptrdiff_t r) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < cols.size(); ++i) off += cols[i][static_cast<std::size_t>(r)] * strides[i];
    return off;
  };

  if (policy == ExecPolicy::serial) {
    for (std::ptrdiff_t r = 0; r < n; ++r) ++counts[cell_of(r)];
    return agg;
  }

  // Thread-private histograms merged afterwards; integer sums make the
  // merge order irrelevant.
  const int threads = omp_get_max_threads();
  std::vector<std::vector<std::uint64_t>> partial(static_cast<std::size_t>(threads));
#pragma omp parallel num_threads(threads)
  {
    auto& local = partial[static_cast<std::size_t>(omp_get_thread_num())];
    local.assign(counts.size(), 0);
#pragma omp for schedule(static)
    for (std::ptrdiff_t r = 0; r < n; ++r) ++local[cell_of(r)];
  }
  for (const auto& local : partial) {
    for (std::size_t c = 0; c < local.size(); ++c) counts[c] += local[c];
  }
  return agg;
}

namespace {

std::size_t required_cells(const Dataset& dataset, const AttributeTuple& tuple) {
  std::size_t cells = 1;
  for (AttributeId a : tuple) cells *= dataset.attribute(a).bin_count();
  return cells;
}

}  // namespace

CubeIndex cube_build(const Dataset& dataset, std::span<const AttributeTuple> tuples,
                     std::size_t max_cells, ExecPolicy policy) {
  return CubeIndex{}.extended(dataset, tuples, max_cells, policy);
}

CubeIndex CubeIndex::extended(const Dataset& dataset, std::span<const AttributeTuple> tuples,
                              std::size_t max_cells, ExecPolicy policy) const {
  CubeIndex out = *this;
  std::vector<AttributeTuple> missing;
  std::size_t cells = cell_count();
  for (const auto& t : tuples) {
    auto key = canonical_tuple(t);
    if (key.empty()) fail(ErrorKind::invalid_argument, "empty_tuple", "cube tuples must be non-empty");
    if (key.size() > dataset.attribute_count()) {
      fail(ErrorKind::invalid_argument, "bad_tuple", "tuple exceeds the schema arity");
    }
    if (out.aggregates_.contains(key) || std::find(missing.begin(), missing.end(), key) != missing.end()) {
      continue;
    }
    cells += required_cells(dataset, key);
    missing.push_back(std::move(key));
  }
  if (cells > max_cells) {
    fail(ErrorKind::domain, "cube_budget_exceeded",
         "cube would need " + std::to_string(cells) + " cells, budget is " + std::to_string(max_cells));
  }
  for (auto& key : missing) {
    auto agg = std::make_shared<const Aggregate>(count_records(dataset, key, policy));
    out.aggregates_.emplace(std::move(key), std::move(agg));
  }
  return out;
}

}  // namespace subsetvis
