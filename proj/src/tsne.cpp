#include "subsetvis/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "subsetvis/error.hpp"
#include "subsetvis/rng.hpp"

namespace subsetvis::tsne {

namespace {

constexpr double kProbabilityFloor = 1e-12;
constexpr double kEntropyTolerance = 1e-6;  // nats
constexpr int kMaxBisectionSteps = 200;

Matrix squared_distances(const Matrix& x, ExecPolicy policy) {
  const auto k = x.rows();
  Matrix d(k, k);
#pragma omp parallel for schedule(static) if (policy == ExecPolicy::parallel)
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) d(i, j) = (x.row(i) - x.row(j)).squaredNorm();
  }
  return d;
}

}  // namespace

void TsneConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorKind::invalid_argument, "bad_tsne_config", what); };
  if (!(perplexity > 0)) bad("perplexity must be positive");
  if (iterations == 0) bad("iterations must be positive");
  if (!(early_exaggeration > 0)) bad("early_exaggeration must be positive");
  if (!(learning_rate > 0)) bad("learning_rate must be positive");
  if (output_dims == 0) bad("output_dims must be positive");
}

nlohmann::json config_to_json(const TsneConfig& c) {
  return {{"perplexity", c.perplexity},
          {"iterations", c.iterations},
          {"early_exaggeration", c.early_exaggeration},
          {"exaggeration_iterations", c.exaggeration_iterations},
          {"learning_rate", c.learning_rate},
          {"initial_momentum", c.initial_momentum},
          {"final_momentum", c.final_momentum},
          {"momentum_switch_iteration", c.momentum_switch_iteration},
          {"output_dims", c.output_dims},
          {"seed", c.seed}};
}

TsneConfig config_from_json(const nlohmann::json& j, TsneConfig c) {
  if (j.is_null()) return c;
  if (!j.is_object()) fail(ErrorKind::invalid_argument, "bad_tsne_config", "t-SNE config must be an object");
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  try {
    get("perplexity", c.perplexity);
    get("iterations", c.iterations);
    get("early_exaggeration", c.early_exaggeration);
    get("exaggeration_iterations", c.exaggeration_iterations);
    get("learning_rate", c.learning_rate);
    get("initial_momentum", c.initial_momentum);
    get("final_momentum", c.final_momentum);
    get("momentum_switch_iteration", c.momentum_switch_iteration);
    get("output_dims", c.output_dims);
    get("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::invalid_argument, "bad_tsne_config", e.what());
  }
  c.validate();
  return c;
}

double clamp_perplexity(double perplexity, std::size_t k) {
  const double limit = (static_cast<double>(k) - 1.0) / 3.0;
  if (perplexity < limit) return perplexity;
  return std::max(1.0, limit);
}

Affinities affinities(const Matrix& points, double perplexity, ExecPolicy policy) {
  const auto k = points.rows();
  if (k < 2) fail(ErrorKind::invalid_argument, "too_few_points", "affinities need at least 2 points");
  if (!points.allFinite()) fail(ErrorKind::invalid_argument, "non_finite_input", "points must be finite");
  Affinities out;
  out.perplexity = clamp_perplexity(perplexity, static_cast<std::size_t>(k));
  const double target = std::log(out.perplexity);
  const Matrix dist = squared_distances(points, policy);

  Matrix cond = Matrix::Zero(k, k);
  out.beta.assign(static_cast<std::size_t>(k), 1.0);
  out.entropy_bits.assign(static_cast<std::size_t>(k), 0.0);

#pragma omp parallel for schedule(dynamic) if (policy == ExecPolicy::parallel)
  for (Eigen::Index i = 0; i < k; ++i) {
    // Offsets from the nearest neighbour keep exp() in range.
    double dmin = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < k; ++j) {
      if (j != i) dmin = std::min(dmin, dist(i, j));
    }
    std::vector<double> d;
    d.reserve(static_cast<std::size_t>(k - 1));
    double spread = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (j == i) continue;
      d.push_back(dist(i, j) - dmin);
      spread += d.back();
    }
    spread /= static_cast<double>(d.size());

    double beta = spread > 0.0 ? 1.0 / spread : 1.0;
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    std::vector<double> w(d.size());
    double entropy = 0.0;
    for (int step = 0; step < kMaxBisectionSteps; ++step) {
      double sum = 0.0, weighted = 0.0;
      for (std::size_t j = 0; j < d.size(); ++j) {
        w[j] = std::exp(-beta * d[j]);
        sum += w[j];
        weighted += w[j] * d[j];
      }
      entropy = std::log(sum) + beta * weighted / sum;
      const double diff = entropy - target;
      // Coincident neighbours make the entropy independent of beta.
      if (std::fabs(diff) < kEntropyTolerance || spread == 0.0) break;
      if (diff > 0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = std::isinf(lo) ? beta * 0.5 : 0.5 * (beta + lo);
      }
    }
    double sum = 0.0;
    for (double x : w) sum += x;
    std::size_t idx = 0;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (j != i) cond(i, j) = w[idx++] / sum;
    }
    out.beta[static_cast<std::size_t>(i)] = beta;
    out.entropy_bits[static_cast<std::size_t>(i)] = entropy / std::numbers::ln2;
  }

  out.p = (cond + cond.transpose()) / (2.0 * static_cast<double>(k));
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      if (i != j) out.p(i, j) = std::max(out.p(i, j), kProbabilityFloor);
    }
  }
  out.p /= out.p.sum();
  return out;
}

double kl_gradient(const Matrix& p, const Matrix& y, double exaggeration, Matrix& grad, ExecPolicy policy) {
  const auto k = y.rows();
  const auto dims = y.cols();
  const bool parallel = policy == ExecPolicy::parallel;
  Matrix num(k, k);
  std::vector<double> row_sum(static_cast<std::size_t>(k), 0.0);
#pragma omp parallel for schedule(static) if (parallel)
  for (Eigen::Index i = 0; i < k; ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (i == j) {
        num(i, j) = 0.0;
        continue;
      }
      double d2 = 0.0;
      for (Eigen::Index c = 0; c < dims; ++c) {
        const double diff = y(i, c) - y(j, c);
        d2 += diff * diff;
      }
      num(i, j) = 1.0 / (1.0 + d2);
      s += num(i, j);
    }
    row_sum[static_cast<std::size_t>(i)] = s;
  }
  double sum_q = 0.0;
  for (double s : row_sum) sum_q += s;

  grad.resize(k, dims);
  std::vector<double> row_kl(static_cast<std::size_t>(k), 0.0);
#pragma omp parallel for schedule(static) if (parallel)
  for (Eigen::Index i = 0; i < k; ++i) {
    double kl = 0.0;
    for (Eigen::Index c = 0; c < dims; ++c) grad(i, c) = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (i == j) continue;
      const double q = num(i, j) / sum_q;
      const double mult = (exaggeration * p(i, j) - q) * num(i, j);
      for (Eigen::Index c = 0; c < dims; ++c) grad(i, c) += mult * (y(i, c) - y(j, c));
      if (p(i, j) > 0.0) kl += p(i, j) * std::log(p(i, j) / std::max(q, kProbabilityFloor));
    }
    for (Eigen::Index c = 0; c < dims; ++c) grad(i, c) *= 4.0;
    row_kl[static_cast<std::size_t>(i)] = kl;
  }
  double kl = 0.0;
  for (double x : row_kl) kl += x;
  return kl;
}

Projection tsne(const Matrix& points, const TsneConfig& cfg) {
  cfg.validate();
  const auto k = points.rows();
  if (k < 2) fail(ErrorKind::invalid_argument, "too_few_points", "t-SNE needs at least 2 points");
  const auto aff = affinities(points, cfg.perplexity, cfg.policy);
  const auto dims = static_cast<Eigen::Index>(cfg.output_dims);

  Rng rng(cfg.seed);
  Matrix y(k, dims);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index c = 0; c < dims; ++c) y(i, c) = 1e-4 * rng.normal();
  }
  Matrix update = Matrix::Zero(k, dims);
  Matrix gains = Matrix::Ones(k, dims);
  Matrix grad;

  Projection out;
  out.perplexity = aff.perplexity;
  out.kl_history.reserve(cfg.iterations);
  for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
    const double exaggeration = iter < cfg.exaggeration_iterations ? cfg.early_exaggeration : 1.0;
    const double momentum = iter < cfg.momentum_switch_iteration ? cfg.initial_momentum : cfg.final_momentum;
    const double kl = kl_gradient(aff.p, y, exaggeration, grad, cfg.policy);
    if (!std::isfinite(kl) || !grad.allFinite()) {
      fail(ErrorKind::domain, "tsne_diverged", "non-finite value at t-SNE iteration " + std::to_string(iter));
    }
    out.kl_history.push_back(kl);
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index c = 0; c < dims; ++c) {
        const bool flip = (grad(i, c) > 0.0) != (update(i, c) > 0.0);
        gains(i, c) = std::max(flip ? gains(i, c) + 0.2 : gains(i, c) * 0.8, 0.01);
        update(i, c) = momentum * update(i, c) - cfg.learning_rate * gains(i, c) * grad(i, c);
        y(i, c) += update(i, c);
      }
    }
    const Eigen::RowVectorXd centre = y.colwise().mean();
    y.rowwise() -= centre;
  }
  if (!y.allFinite()) fail(ErrorKind::domain, "tsne_diverged", "non-finite coordinates after t-SNE");
  out.coords = std::move(y);
  return out;
}

std::string coords_jsonl(const Matrix& coords, std::span<const std::string> ids) {
  if (ids.size() != static_cast<std::size_t>(coords.rows()) || coords.cols() < 2) {
    fail(ErrorKind::invalid_argument, "shape_mismatch", "one id per 2-D coordinate row is required");
  }
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out += nlohmann::json{{"subset_id", ids[i]}, {"x", coords(r, 0)}, {"y", coords(r, 1)}}.dump();
    out += '\n';
  }
  return out;
}

}  // namespace subsetvis::tsne
