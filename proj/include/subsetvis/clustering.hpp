#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace subsetvis::analysis {

using Matrix = Eigen::MatrixXd;

enum class ClusterMethod { kmeans, agglomerative, density };
enum class Linkage { average, complete, single };

std::string_view to_string(ClusterMethod m);
ClusterMethod parse_cluster_method(std::string_view text);
Linkage parse_linkage(std::string_view text);

inline constexpr int kNoise = -1;

struct ClusterAssignment {
  std::vector<int> labels;  // [0, k), or kNoise for density-based noise
  int k = 0;
  ClusterMethod method = ClusterMethod::kmeans;
  double inertia = 0.0;     // k-means within-cluster SSE

  // Item indices per cluster, in label order.
  std::vector<std::vector<std::size_t>> groups() const;
};

nlohmann::json assignment_to_json(const ClusterAssignment& a);

// Lloyd iterations from k-means++ seeding, until the assignment stops
// changing or 300 iterations. With restarts > 1 the lowest-inertia run wins.
// Rows of `vectors` are items.
ClusterAssignment kmeans(const Matrix& vectors, int k, std::uint64_t seed, int restarts = 1,
                         int max_iterations = 300);

// Bottom-up merging until k clusters remain; ties go to the lowest pair.
ClusterAssignment agglomerative(const Matrix& vectors, int k, Linkage linkage = Linkage::average);

// DBSCAN: core points have >= min_pts neighbours within eps (self included).
ClusterAssignment density_cluster(const Matrix& vectors, double eps, int min_pts);

}  // namespace subsetvis::analysis
