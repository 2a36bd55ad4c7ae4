#include "subsetvis/measures.hpp"

#include <algorithm>
#include <cmath>

#include "subsetvis/error.hpp"

namespace subsetvis::analysis {

double consistency(std::span<const std::vector<double>> vectors) {
  if (vectors.empty()) fail(ErrorKind::invalid_argument, "empty_node", "consistency needs at least one vector");
  const std::size_t dim = vectors.front().size();
  if (dim == 0) fail(ErrorKind::invalid_argument, "empty_vector", "feature vectors are empty");
  for (const auto& v : vectors) {
    if (v.size() != dim) {
      fail(ErrorKind::invalid_argument, "mixed_lengths", "feature vectors have different lengths");
    }
  }
  const double n = static_cast<double>(vectors.size());
  double total = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    const double origin = vectors.front()[d];
    double mean = 0.0;
    for (const auto& v : vectors) mean += v[d] - origin;
    mean /= n;
    double var = 0.0;
    for (const auto& v : vectors) var += (v[d] - origin - mean) * (v[d] - origin - mean);
    total += std::sqrt(var / n);
  }
  return total / static_cast<double>(dim);
}

double quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) fail(ErrorKind::invalid_argument, "empty_input", "quantile of empty data");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

MarginalMeasures marginal_measures(std::span<const std::uint64_t> counts) {
  MarginalMeasures m;
  if (counts.empty()) return m;
  double total = 0.0;
  for (auto c : counts) total += static_cast<double>(c);
  if (total > 0.0) {
    if (counts.size() == 1) {
      m.uniformity = 1.0;
    } else {
      double h = 0.0;
      for (auto c : counts) {
        if (c > 0) {
          const double p = static_cast<double>(c) / total;
          h -= p * std::log(p);
        }
      }
      m.uniformity = std::clamp(h / std::log(static_cast<double>(counts.size())), 0.0, 1.0);
    }
  }
  std::vector<double> sorted(counts.begin(), counts.end());
  std::sort(sorted.begin(), sorted.end());
  const double q1 = quantile(sorted, 0.25);
  const double q3 = quantile(sorted, 0.75);
  const double iqr = q3 - q1;
  const double lo = q1 - 1.5 * iqr;
  const double hi = q3 + 1.5 * iqr;
  for (double c : sorted) {
    if (c < lo || c > hi) ++m.outlier_count;
  }
  return m;
}

nlohmann::json measures_to_json(const MarginalMeasures& m) {
  return {{"uniformity", m.uniformity}, {"outlier_count", m.outlier_count}};
}

}  // namespace subsetvis::analysis
