#pragma once

// Exact O(k^2) t-SNE. Defaults follow the reference implementation:
// perplexity 20 (our choice for subset cohorts), 1000 iterations, early
// exaggeration 12 for 250 iterations, learning rate 200, momentum 0.5 then
// 0.8, per-coordinate adaptive gains.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "subsetvis/exec.hpp"

namespace subsetvis::tsne {

using Matrix = Eigen::MatrixXd;

struct TsneConfig {
  double perplexity = 20.0;
  std::size_t iterations = 1000;
  double early_exaggeration = 12.0;
  std::size_t exaggeration_iterations = 250;
  double learning_rate = 200.0;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  std::size_t momentum_switch_iteration = 250;
  std::size_t output_dims = 2;
  std::uint64_t seed = 0;
  ExecPolicy policy = ExecPolicy::parallel;

  void validate() const;
};

nlohmann::json config_to_json(const TsneConfig& cfg);
TsneConfig config_from_json(const nlohmann::json& j, TsneConfig base = {});

struct Affinities {
  Matrix p;                           // symmetric joint probabilities
  std::vector<double> beta;           // per-point precision 1/(2 sigma^2)
  std::vector<double> entropy_bits;   // per-point conditional entropy
  double perplexity = 0.0;            // after clamping
};

struct Projection {
  Matrix coords;  // k x output_dims, mean-centred
  std::vector<double> kl_history;
  double perplexity = 0.0;
};

// Largest usable perplexity for k points.
double clamp_perplexity(double perplexity, std::size_t k);

Affinities affinities(const Matrix& points, double perplexity,
                      ExecPolicy policy = ExecPolicy::parallel);

// One gradient evaluation of KL(P || Q) at `y`. Returns the KL of the
// unexaggerated P; `exaggeration` scales P inside the gradient only.
double kl_gradient(const Matrix& p, const Matrix& y, double exaggeration, Matrix& grad,
                   ExecPolicy policy);

// Throws Error(domain, "tsne_diverged") naming the iteration.
Projection tsne(const Matrix& points, const TsneConfig& cfg);

// {"subset_id": ..., "x": ..., "y": ...} per line.
std::string coords_jsonl(const Matrix& coords, std::span<const std::string> ids);

}  // namespace subsetvis::tsne
