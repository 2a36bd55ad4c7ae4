#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

namespace subsetvis::analysis {

// Mean over positions of the population standard deviation across vectors.
// 0 means every vector is identical.
double consistency(std::span<const std::vector<double>> vectors);

struct MarginalMeasures {
  double uniformity = 0.0;  // normalized Shannon entropy in [0, 1]
  std::size_t outlier_count = 0;
};

// Linear-interpolation quantile of sorted data, q in [0, 1].
double quantile(std::span<const double> sorted, double q);

// Uniformity of a count vector and number of bins whose count falls outside
// Tukey's fences [Q1 - 1.5 IQR, Q3 + 1.5 IQR].
MarginalMeasures marginal_measures(std::span<const std::uint64_t> counts);

nlohmann::json measures_to_json(const MarginalMeasures& m);

}  // namespace subsetvis::analysis
