#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace subsetvis::analysis {

struct QualityReport {
  double acc = 0.0;
  double nmi = 0.0;
  double ari = 0.0;
  double silhouette = 0.0;
  double chi = 0.0;
};

nlohmann::json report_to_json(const QualityReport& r);
QualityReport report_from_json(const nlohmann::json& j);

// Maximum-weight perfect matching on a square matrix; returns, for each row,
// its assigned column.
std::vector<std::size_t> max_weight_assignment(const Eigen::MatrixXd& weights);

// Best fraction of agreeing labels over one-to-one cluster/class matchings.
double acc(std::span<const int> pred, std::span<const int> truth);

// I(pred; truth) / sqrt(H(pred) H(truth)).
double nmi(std::span<const int> pred, std::span<const int> truth);

// Adjusted Rand index. Can be negative.
double ari(std::span<const int> pred, std::span<const int> truth);

// Mean silhouette over items; singleton-cluster items score 0. Needs
// 2 <= clusters <= n - 1.
double silhouette(const Eigen::MatrixXd& points, std::span<const int> labels);

// Calinski-Harabasz. Zero within-cluster dispersion is floored at 1e-12.
double chi(const Eigen::MatrixXd& points, std::span<const int> labels);

}  // namespace subsetvis::analysis
