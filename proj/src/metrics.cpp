#include "subsetvis/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "subsetvis/error.hpp"

namespace subsetvis::analysis {

namespace {

struct Contingency {
  Eigen::MatrixXd table;  // pred cluster x truth class
  Eigen::VectorXd rows, cols;
  double n = 0.0;
};

std::vector<int> compact(std::span<const int> labels, int& count) {
  std::map<int, int> ids;
  std::vector<int> out;
  out.reserve(labels.size());
  for (int l : labels) {
    auto [it, _] = ids.emplace(l, static_cast<int>(ids.size()));
    out.push_back(it->second);
  }
  count = static_cast<int>(ids.size());
  return out;
}

Contingency contingency(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size()) {
    fail(ErrorKind::invalid_argument, "length_mismatch", "label vectors have different lengths");
  }
  if (pred.empty()) fail(ErrorKind::invalid_argument, "empty_labels", "label vectors are empty");
  int np = 0, nt = 0;
  const auto p = compact(pred, np);
  const auto t = compact(truth, nt);
  Contingency c;
  c.table = Eigen::MatrixXd::Zero(np, nt);
  for (std::size_t i = 0; i < p.size(); ++i) c.table(p[i], t[i]) += 1.0;
  c.rows = c.table.rowwise().sum();
  c.cols = c.table.colwise().sum().transpose();
  c.n = static_cast<double>(pred.size());
  return c;
}

double comb2(double x) { return 0.5 * x * (x - 1.0); }

double entropy(const Eigen::VectorXd& counts, double n) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < counts.size(); ++i) {
    if (counts(i) > 0) {
      const double p = counts(i) / n;
      h -= p * std::log(p);
    }
  }
  return h;
}

}  // namespace

nlohmann::json report_to_json(const QualityReport& r) {
  return {{"acc", r.acc}, {"nmi", r.nmi}, {"ari", r.ari}, {"silhouette", r.silhouette}, {"chi", r.chi}};
}

QualityReport report_from_json(const nlohmann::json& j) {
  return {j.at("acc").get<double>(), j.at("nmi").get<double>(), j.at("ari").get<double>(),
          j.at("silhouette").get<double>(), j.at("chi").get<double>()};
}

std::vector<std::size_t> max_weight_assignment(const Eigen::MatrixXd& weights) {
  // Hungarian method (shortest augmenting paths with potentials) on costs
  // -weights, 1-based internally.
  const auto n = static_cast<std::size_t>(weights.rows());
  if (weights.cols() != weights.rows()) {
    fail(ErrorKind::invalid_argument, "not_square", "assignment needs a square matrix");
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> way(n + 1, 0), match(n + 1, 0);  // match[col] = row
  for (std::size_t row = 1; row <= n; ++row) {
    match[0] = row;
    std::size_t col0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[col0] = 1;
      const std::size_t r = match[col0];
      double delta = inf;
      std::size_t col1 = 0;
      for (std::size_t c = 1; c <= n; ++c) {
        if (used[c]) continue;
        const double cost = -weights(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(c - 1));
        const double cur = cost - u[r] - v[c];
        if (cur < minv[c]) {
          minv[c] = cur;
          way[c] = col0;
        }
        if (minv[c] < delta) {
          delta = minv[c];
          col1 = c;
        }
      }
      for (std::size_t c = 0; c <= n; ++c) {
        if (used[c]) {
          u[match[c]] += delta;
          v[c] -= delta;
        } else {
          minv[c] -= delta;
        }
      }
      col0 = col1;
    } while (match[col0] != 0);
    do {
      const std::size_t col1 = way[col0];
      match[col0] = match[col1];
      col0 = col1;
    } while (col0 != 0);
  }
  std::vector<std::size_t> out(n);
  for (std::size_t c = 1; c <= n; ++c) out[match[c] - 1] = c - 1;
  return out;
}

double acc(std::span<const int> pred, std::span<const int> truth) {
  const auto c = contingency(pred, truth);
  const auto size = std::max(c.table.rows(), c.table.cols());
  Eigen::MatrixXd square = Eigen::MatrixXd::Zero(size, size);
  square.topLeftCorner(c.table.rows(), c.table.cols()) = c.table;
  const auto assignment = max_weight_assignment(square);
  double agree = 0.0;
  for (std::size_t r = 0; r < assignment.size(); ++r) {
    agree += square(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(assignment[r]));
  }
  return agree / c.n;
}

double nmi(std::span<const int> pred, std::span<const int> truth) {
  const auto c = contingency(pred, truth);
  const double hp = entropy(c.rows, c.n);
  const double ht = entropy(c.cols, c.n);
  if (hp == 0.0 && ht == 0.0) return 1.0;  // both a single cluster
  if (hp == 0.0 || ht == 0.0) return 0.0;
  if (c.table.rows() == c.table.cols() && ((c.table.array() > 0).rowwise().count() == 1).all() &&
      ((c.table.array() > 0).colwise().count() == 1).all()) {
    return 1.0;  // same partition up to relabelling
  }
  double mi = 0.0;
  for (Eigen::Index i = 0; i < c.table.rows(); ++i) {
    for (Eigen::Index j = 0; j < c.table.cols(); ++j) {
      const double nij = c.table(i, j);
      if (nij > 0) mi += nij / c.n * std::log(c.n * nij / (c.rows(i) * c.cols(j)));
    }
  }
  return std::clamp(mi / std::sqrt(hp * ht), 0.0, 1.0);
}

double ari(std::span<const int> pred, std::span<const int> truth) {
  const auto c = contingency(pred, truth);
  double index = 0.0;
  for (Eigen::Index i = 0; i < c.table.rows(); ++i) {
    for (Eigen::Index j = 0; j < c.table.cols(); ++j) index += comb2(c.table(i, j));
  }
  double sum_rows = 0.0, sum_cols = 0.0;
  for (Eigen::Index i = 0; i < c.rows.size(); ++i) sum_rows += comb2(c.rows(i));
  for (Eigen::Index j = 0; j < c.cols.size(); ++j) sum_cols += comb2(c.cols(j));
  const double pairs = comb2(c.n);
  if (pairs == 0.0) return 1.0;
  const double expected = sum_rows * sum_cols / pairs;
  const double max_index = 0.5 * (sum_rows + sum_cols);
  // Zero only when both are all-singletons or both a single cluster.
  if (max_index - expected == 0.0) return 1.0;
  return (index - expected) / (max_index - expected);
}

double silhouette(const Eigen::MatrixXd& points, std::span<const int> labels) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (labels.size() != n) fail(ErrorKind::invalid_argument, "length_mismatch", "one label per point is required");
  int k = 0;
  const auto lab = compact(labels, k);
  if (k < 2 || static_cast<std::size_t>(k) > n - 1) {
    fail(ErrorKind::domain, "silhouette_undefined", "silhouette needs 2 <= clusters <= n - 1");
  }
  std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
  for (int l : lab) ++sizes[static_cast<std::size_t>(l)];
  double total = 0.0;
  std::vector<double> mean_dist(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < n; ++i) {
    const auto own = static_cast<std::size_t>(lab[i]);
    if (sizes[own] == 1) continue;  // contributes 0
    std::fill(mean_dist.begin(), mean_dist.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      mean_dist[static_cast<std::size_t>(lab[j])] +=
          (points.row(static_cast<Eigen::Index>(i)) - points.row(static_cast<Eigen::Index>(j))).norm();
    }
    const double a = mean_dist[own] / static_cast<double>(sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < mean_dist.size(); ++c) {
      if (c != own) b = std::min(b, mean_dist[c] / static_cast<double>(sizes[c]));
    }
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

double chi(const Eigen::MatrixXd& points, std::span<const int> labels) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (labels.size() != n) fail(ErrorKind::invalid_argument, "length_mismatch", "one label per point is required");
  int k = 0;
  const auto lab = compact(labels, k);
  if (k < 2 || static_cast<std::size_t>(k) >= n) {
    fail(ErrorKind::domain, "chi_undefined", "Calinski-Harabasz needs 2 <= clusters < n");
  }
  const Eigen::RowVectorXd centre = points.colwise().mean();
  Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(k, points.cols());
  std::vector<double> sizes(static_cast<std::size_t>(k), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    centroids.row(lab[i]) += points.row(static_cast<Eigen::Index>(i));
    sizes[static_cast<std::size_t>(lab[i])] += 1.0;
  }
  double between = 0.0;
  for (int c = 0; c < k; ++c) {
    centroids.row(c) /= sizes[static_cast<std::size_t>(c)];
    between += sizes[static_cast<std::size_t>(c)] * (centroids.row(c) - centre).squaredNorm();
  }
  double within = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    within += (points.row(static_cast<Eigen::Index>(i)) - centroids.row(lab[i])).squaredNorm();
  }
  within = std::max(within, 1e-12);
  return (between / static_cast<double>(k - 1)) / (within / static_cast<double>(n - static_cast<std::size_t>(k)));
}

}  // namespace subsetvis::analysis
