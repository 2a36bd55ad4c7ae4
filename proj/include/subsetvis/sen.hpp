#pragma once

// Subset embedding network: one small reconstruction MLP per feature, all
// reading a shared, learnable embedding table. A subset only takes part in
// the losses of the features it owns, so cohorts may mix subsets with
// different feature sets.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "subsetvis/exec.hpp"
#include "subsetvis/features.hpp"

namespace subsetvis::sen {

using FeatureKey = std::uint32_t;
using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

// Targets of one feature across the subsets that own it.
struct FeatureBlock {
  FeatureKey key = 0;
  std::vector<std::size_t> members;  // ascending subset indices
  Matrix targets;                    // members.size() x dim

  std::size_t dim() const { return static_cast<std::size_t>(targets.cols()); }
};

// For each feature, the subsets owning it.
struct MembershipIndex {
  std::vector<FeatureKey> keys;
  std::vector<std::vector<std::size_t>> members;

  bool owns(std::size_t subset, std::size_t feature) const;
};

using SubsetFeatures = std::vector<std::pair<FeatureKey, std::vector<double>>>;

class TrainingData {
 public:
  // One entry per subset, each listing the features it owns.
  explicit TrainingData(const std::vector<SubsetFeatures>& subsets);

  // Keys features by attribute id.
  static TrainingData from_subsets(std::span<const Subset> subsets);

  std::size_t subset_count() const { return subset_count_; }
  const std::vector<FeatureBlock>& features() const { return features_; }
  MembershipIndex membership() const;

 private:
  std::size_t subset_count_ = 0;
  std::vector<FeatureBlock> features_;  // ascending key
};

struct TrainConfig {
  std::size_t embedding_len = 30;
  std::size_t hidden_width = 64;
  double lr_subnet = 1e-3;
  double lr_embedding = 1e-3;
  // Per-epoch multiplicative learning-rate decay; 1 disables it.
  double lr_decay = 1.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t max_epochs = 2000;
  std::size_t plateau_window = 20;
  double plateau_rel_threshold = 1e-4;
  std::uint64_t seed = 0;
  ExecPolicy policy = ExecPolicy::parallel;

  void validate() const;
};

nlohmann::json config_to_json(const TrainConfig& cfg);
// Missing keys keep their defaults.
TrainConfig config_from_json(const nlohmann::json& j, TrainConfig base = {});

// out = relu(h W1 + b1) W2 + b2, with h a row vector.
struct Subnet {
  Matrix w1;      // E x H
  RowVector b1;   // H
  Matrix w2;      // H x D
  RowVector b2;   // D

  std::size_t input_len() const { return static_cast<std::size_t>(w1.rows()); }
  std::size_t hidden() const { return static_cast<std::size_t>(w1.cols()); }
  std::size_t output_len() const { return static_cast<std::size_t>(w2.cols()); }
};

struct SubnetGradient {
  Matrix w1;
  RowVector b1;
  Matrix w2;
  RowVector b2;
};

struct SENModel {
  TrainConfig config;
  Matrix embeddings;  // k x E, row i belongs to subset i
  std::vector<Subnet> subnets;
  MembershipIndex membership;
  std::vector<double> loss_history;
  std::size_t epochs = 0;
  bool converged = false;
};

struct Gradients {
  double loss = 0.0;
  std::vector<SubnetGradient> subnets;
  Matrix embeddings;
};

// Stopping rule: the windowed mean of the loss improves by less than the
// relative threshold on each of `window` consecutive epochs.
class PlateauRule {
 public:
  PlateauRule(std::size_t window, double rel_threshold);
  // Feeds one epoch's loss; returns true once training should stop.
  bool update(double loss);

 private:
  std::size_t window_;
  double threshold_;
  std::vector<double> history_;
  double previous_mean_ = 0.0;
  std::size_t streak_ = 0;
};

// Throws Error(invalid_argument, "shape_mismatch").
RowVector subnet_forward(const Subnet& net, const RowVector& h);

// Sum over members of the squared residual norm.
double subnet_loss(const Subnet& net, const Matrix& embeddings, const FeatureBlock& feature);

// Loss of one subnet plus, when requested, its parameter gradient and the
// gradient w.r.t. each member's embedding (members.size() x E).
double subnet_backward(const Subnet& net, const Matrix& embeddings, const FeatureBlock& feature,
                       SubnetGradient* param_grad, Matrix* member_grad);

double total_loss(const SENModel& model, const TrainingData& data);

Gradients gradients(const SENModel& model, const TrainingData& data,
                    ExecPolicy policy = ExecPolicy::parallel);

// Seeded random initialization, no training.
SENModel init_model(const TrainingData& data, const TrainConfig& cfg);

using EpochObserver = std::function<void(std::size_t epoch, double loss)>;

// Alternates per-subnet parameter steps and one embedding step per epoch
// until the plateau rule fires or max_epochs is reached. Throws
// Error(domain, "training_diverged") on a non-finite loss or parameter.
SENModel train(const TrainingData& data, const TrainConfig& cfg, const EpochObserver& observer = {});

nlohmann::json model_to_json(const SENModel& model);
SENModel model_from_json(const nlohmann::json& j);

// {"subset_id": ..., "embedding": [...]} per line.
std::string embeddings_jsonl(const Matrix& embeddings, std::span<const std::string> ids);

}  // namespace subsetvis::sen
