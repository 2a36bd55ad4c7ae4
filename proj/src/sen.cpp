#include "subsetvis/sen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "subsetvis/error.hpp"
#include "subsetvis/rng.hpp"

namespace subsetvis::sen {

namespace {

struct AdamSlot {
  Matrix m, v;
  void init(Eigen::Index rows, Eigen::Index cols) {
    m = Matrix::Zero(rows, cols);
    v = Matrix::Zero(rows, cols);
  }
};

struct SubnetAdam {
  AdamSlot w1, b1, w2, b2;
};

struct AdamStep {
  double lr, beta1, beta2, eps, correction1, correction2;

  template <typename Param, typename Grad>
  void apply(Param& param, const Grad& grad, AdamSlot& slot) const {
    slot.m = beta1 * slot.m + (1.0 - beta1) * grad;
    slot.v = beta2 * slot.v + (1.0 - beta2) * grad.cwiseProduct(grad);
    const auto m_hat = slot.m.array() / correction1;
    const auto v_hat = slot.v.array() / correction2;
    param.array() -= lr * m_hat / (v_hat.sqrt() + eps);
  }
};

template <typename M>
bool all_finite(const M& m) {
  return m.allFinite();
}

bool finite(const Subnet& s) {
  return all_finite(s.w1) && all_finite(s.b1) && all_finite(s.w2) && all_finite(s.b2);
}

void gather_rows(const Matrix& embeddings, const std::vector<std::size_t>& members, Matrix& out) {
  out.resize(static_cast<Eigen::Index>(members.size()), embeddings.cols());
  for (std::size_t r = 0; r < members.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = embeddings.row(static_cast<Eigen::Index>(members[r]));
  }
}

void check_shapes(const Subnet& net, const Matrix& embeddings, const FeatureBlock& feature) {
  if (static_cast<std::size_t>(embeddings.cols()) != net.input_len() || feature.dim() != net.output_len() ||
      static_cast<std::size_t>(feature.targets.rows()) != feature.members.size()) {
    fail(ErrorKind::invalid_argument, "shape_mismatch", "subnet, embedding and feature shapes disagree");
  }
}

[[noreturn]] void diverged(std::size_t epoch, std::string where) {
  fail(ErrorKind::domain, "training_diverged",
       "non-finite value at epoch " + std::to_string(epoch) + " in " + where);
}

}  // namespace

bool MembershipIndex::owns(std::size_t subset, std::size_t feature) const {
  const auto& m = members.at(feature);
  return std::binary_search(m.begin(), m.end(), subset);
}

TrainingData::TrainingData(const std::vector<SubsetFeatures>& subsets) : subset_count_(subsets.size()) {
  std::map<FeatureKey, std::vector<std::pair<std::size_t, const std::vector<double>*>>> by_key;
  for (std::size_t i = 0; i < subsets.size(); ++i) {
    if (subsets[i].empty()) {
      fail(ErrorKind::invalid_argument, "subset_without_features",
           "subset " + std::to_string(i) + " owns no features");
    }
    for (const auto& [key, values] : subsets[i]) {
      auto& rows = by_key[key];
      if (!rows.empty() && rows.back().first == i) {
        fail(ErrorKind::invalid_argument, "duplicate_feature",
             "subset " + std::to_string(i) + " lists feature " + std::to_string(key) + " twice");
      }
      if (!rows.empty() && rows.front().second->size() != values.size()) {
        fail(ErrorKind::invalid_argument, "inconsistent_feature_length",
             "feature " + std::to_string(key) + " has vectors of lengths " +
                 std::to_string(rows.front().second->size()) + " and " + std::to_string(values.size()));
      }
      if (values.empty()) {
        fail(ErrorKind::invalid_argument, "empty_feature", "feature " + std::to_string(key) + " is empty");
      }
      rows.emplace_back(i, &values);
    }
  }
  for (auto& [key, rows] : by_key) {
    FeatureBlock block;
    block.key = key;
    const auto dim = static_cast<Eigen::Index>(rows.front().second->size());
    block.targets.resize(static_cast<Eigen::Index>(rows.size()), dim);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      block.members.push_back(rows[r].first);
      for (Eigen::Index c = 0; c < dim; ++c) {
        const double x = (*rows[r].second)[static_cast<std::size_t>(c)];
        if (!std::isfinite(x)) {
          fail(ErrorKind::invalid_argument, "non_finite_feature", "feature values must be finite");
        }
        block.targets(static_cast<Eigen::Index>(r), c) = x;
      }
    }
    features_.push_back(std::move(block));
  }
}

TrainingData TrainingData::from_subsets(std::span<const Subset> subsets) {
  std::vector<SubsetFeatures> rows;
  rows.reserve(subsets.size());
  for (const auto& s : subsets) {
    SubsetFeatures f;
    for (const auto& fv : s.features) f.emplace_back(fv.feature_id, fv.values);
    rows.push_back(std::move(f));
  }
  return TrainingData(rows);
}

MembershipIndex TrainingData::membership() const {
  MembershipIndex idx;
  for (const auto& f : features_) {
    idx.keys.push_back(f.key);
    idx.members.push_back(f.members);
  }
  return idx;
}

void TrainConfig::validate() const {
  auto bad = [](const std::string& what) {
    fail(ErrorKind::invalid_argument, "bad_train_config", what);
  };
  if (embedding_len == 0) bad("embedding_len must be positive");
  if (hidden_width == 0) bad("hidden_width must be positive");
  if (!(lr_subnet > 0) || !(lr_embedding > 0)) bad("learning rates must be positive");
  if (!(lr_decay > 0) || lr_decay > 1.0) bad("lr_decay must be in (0, 1]");
  if (max_epochs == 0) bad("max_epochs must be positive");
  if (plateau_window < 2) bad("plateau_window must be >= 2");
  if (!(plateau_rel_threshold > 0)) bad("plateau_rel_threshold must be positive");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1) || !(adam_eps > 0)) {
    bad("invalid Adam constants");
  }
}

nlohmann::json config_to_json(const TrainConfig& c) {
  return {{"embedding_len", c.embedding_len},
          {"hidden_width", c.hidden_width},
          {"lr_subnet", c.lr_subnet},
          {"lr_embedding", c.lr_embedding},
          {"lr_decay", c.lr_decay},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_eps", c.adam_eps},
          {"max_epochs", c.max_epochs},
          {"plateau_window", c.plateau_window},
          {"plateau_rel_threshold", c.plateau_rel_threshold},
          {"seed", c.seed}};
}

TrainConfig config_from_json(const nlohmann::json& j, TrainConfig c) {
  if (j.is_null()) return c;
  if (!j.is_object()) fail(ErrorKind::invalid_argument, "bad_train_config", "train config must be an object");
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  try {
    get("embedding_len", c.embedding_len);
    get("hidden_width", c.hidden_width);
    get("lr_subnet", c.lr_subnet);
    get("lr_embedding", c.lr_embedding);
    get("lr_decay", c.lr_decay);
    get("adam_beta1", c.adam_beta1);
    get("adam_beta2", c.adam_beta2);
    get("adam_eps", c.adam_eps);
    get("max_epochs", c.max_epochs);
    get("plateau_window", c.plateau_window);
    get("plateau_rel_threshold", c.plateau_rel_threshold);
    get("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::invalid_argument, "bad_train_config", e.what());
  }
  c.validate();
  return c;
}

PlateauRule::PlateauRule(std::size_t window, double rel_threshold)
    : window_(window), threshold_(rel_threshold) {}

bool PlateauRule::update(double loss) {
  history_.push_back(loss);
  if (history_.size() < window_) return false;
  const double mean =
      std::accumulate(history_.end() - static_cast<std::ptrdiff_t>(window_), history_.end(), 0.0) /
      static_cast<double>(window_);
  if (history_.size() > window_) {
    const double rel = previous_mean_ > 0.0 ? (previous_mean_ - mean) / previous_mean_ : 0.0;
    streak_ = rel < threshold_ ? streak_ + 1 : 0;
  }
  previous_mean_ = mean;
  return streak_ >= window_;
}

RowVector subnet_forward(const Subnet& net, const RowVector& h) {
  if (static_cast<std::size_t>(h.size()) != net.input_len() || net.b1.size() != net.w1.cols() ||
      net.w2.rows() != net.w1.cols() || net.b2.size() != net.w2.cols()) {
    fail(ErrorKind::invalid_argument, "shape_mismatch", "embedding length does not match the subnet");
  }
  const RowVector hidden = (h * net.w1 + net.b1).cwiseMax(0.0);
  return hidden * net.w2 + net.b2;
}

namespace {

// Per-thread scratch reused across calls; matrices keep their capacity
// when the shapes repeat.
struct BackwardScratch {
  Matrix input, pre, hidden, residual, d_pre;
};

}  // namespace

double subnet_backward(const Subnet& net, const Matrix& embeddings, const FeatureBlock& feature,
                       SubnetGradient* param_grad, Matrix* member_grad) {
  check_shapes(net, embeddings, feature);
  thread_local BackwardScratch ws;
  gather_rows(embeddings, feature.members, ws.input);
  ws.pre.noalias() = ws.input * net.w1;
  ws.pre.rowwise() += net.b1;
  ws.hidden = ws.pre.cwiseMax(0.0);
  ws.residual.noalias() = ws.hidden * net.w2;
  ws.residual.rowwise() += net.b2;
  ws.residual -= feature.targets;
  const double loss = ws.residual.squaredNorm();
  if (!param_grad && !member_grad) return loss;

  ws.residual *= 2.0;
  ws.d_pre.noalias() = ws.residual * net.w2.transpose();
  ws.d_pre.array() *= (ws.pre.array() > 0.0).cast<double>();
  if (param_grad) {
    param_grad->w2.noalias() = ws.hidden.transpose() * ws.residual;
    param_grad->b2 = ws.residual.colwise().sum();
    param_grad->w1.noalias() = ws.input.transpose() * ws.d_pre;
    param_grad->b1 = ws.d_pre.colwise().sum();
  }
  if (member_grad) member_grad->noalias() = ws.d_pre * net.w1.transpose();
  return loss;
}

double subnet_loss(const Subnet& net, const Matrix& embeddings, const FeatureBlock& feature) {
  return subnet_backward(net, embeddings, feature, nullptr, nullptr);
}

double total_loss(const SENModel& model, const TrainingData& data) {
  if (model.subnets.size() != data.features().size()) {
    fail(ErrorKind::invalid_argument, "shape_mismatch", "model and data feature counts differ");
  }
  double loss = 0.0;
  for (std::size_t v = 0; v < model.subnets.size(); ++v) {
    loss += subnet_loss(model.subnets[v], model.embeddings, data.features()[v]);
  }
  return loss;
}

Gradients gradients(const SENModel& model, const TrainingData& data, ExecPolicy policy) {
  const auto& feats = data.features();
  if (model.subnets.size() != feats.size()) {
    fail(ErrorKind::invalid_argument, "shape_mismatch", "model and data feature counts differ");
  }
  const auto n = static_cast<std::ptrdiff_t>(feats.size());
  Gradients g;
  g.subnets.resize(feats.size());
  std::vector<Matrix> member_grads(feats.size());
  std::vector<double> losses(feats.size(), 0.0);
#pragma omp parallel for schedule(dynamic) if (policy == ExecPolicy::parallel)
  for (std::ptrdiff_t v = 0; v < n; ++v) {
    const auto i = static_cast<std::size_t>(v);
    losses[i] = subnet_backward(model.subnets[i], model.embeddings, feats[i], &g.subnets[i], &member_grads[i]);
  }
  g.embeddings = Matrix::Zero(model.embeddings.rows(), model.embeddings.cols());
  for (std::size_t v = 0; v < feats.size(); ++v) {
    g.loss += losses[v];
    for (std::size_t r = 0; r < feats[v].members.size(); ++r) {
      g.embeddings.row(static_cast<Eigen::Index>(feats[v].members[r])) +=
          member_grads[v].row(static_cast<Eigen::Index>(r));
    }
  }
  return g;
}

SENModel init_model(const TrainingData& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.subset_count() < 2) {
    fail(ErrorKind::invalid_argument, "too_few_subsets", "training needs at least 2 subsets");
  }
  SENModel model;
  model.config = cfg;
  model.membership = data.membership();
  Rng rng(cfg.seed);
  const auto k = static_cast<Eigen::Index>(data.subset_count());
  const auto e = static_cast<Eigen::Index>(cfg.embedding_len);
  const auto h = static_cast<Eigen::Index>(cfg.hidden_width);
  model.embeddings.resize(k, e);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < e; ++j) model.embeddings(i, j) = rng.uniform(-0.05, 0.05);
  }
  auto glorot = [&](Eigen::Index rows, Eigen::Index cols) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Matrix w(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) w(i, j) = rng.uniform(-limit, limit);
    }
    return w;
  };
  for (const auto& f : data.features()) {
    const auto d = static_cast<Eigen::Index>(f.dim());
    Subnet s;
    s.w1 = glorot(e, h);
    s.b1 = RowVector::Zero(h);
    s.w2 = glorot(h, d);
    s.b2 = RowVector::Zero(d);
    model.subnets.push_back(std::move(s));
  }
  return model;
}

SENModel train(const TrainingData& data, const TrainConfig& cfg, const EpochObserver& observer) {
  SENModel model = init_model(data, cfg);
  const auto& feats = data.features();
  const auto n = static_cast<std::ptrdiff_t>(feats.size());
  const bool parallel = cfg.policy == ExecPolicy::parallel;

  std::vector<SubnetAdam> subnet_adam(feats.size());
  for (std::size_t v = 0; v < feats.size(); ++v) {
    const auto& s = model.subnets[v];
    subnet_adam[v].w1.init(s.w1.rows(), s.w1.cols());
    subnet_adam[v].b1.init(1, s.b1.cols());
    subnet_adam[v].w2.init(s.w2.rows(), s.w2.cols());
    subnet_adam[v].b2.init(1, s.b2.cols());
  }
  AdamSlot emb_adam;
  emb_adam.init(model.embeddings.rows(), model.embeddings.cols());

  std::vector<SubnetGradient> grads(feats.size());
  std::vector<Matrix> member_grads(feats.size());
  std::vector<double> losses(feats.size());
  std::vector<char> bad(feats.size());
  Matrix emb_grad(model.embeddings.rows(), model.embeddings.cols());
  PlateauRule plateau(cfg.plateau_window, cfg.plateau_rel_threshold);

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double t = static_cast<double>(epoch + 1);
    const double decay = std::pow(cfg.lr_decay, static_cast<double>(epoch));
    const double c1 = 1.0 - std::pow(cfg.adam_beta1, t);
    const double c2 = 1.0 - std::pow(cfg.adam_beta2, t);
    const AdamStep subnet_step{cfg.lr_subnet * decay, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, c1, c2};
    const AdamStep emb_step{cfg.lr_embedding * decay, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, c1, c2};

    // Parameter step of every subnet against the start-of-epoch embeddings.
    // Subnets own disjoint parameters, so they update independently.
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (std::ptrdiff_t v = 0; v < n; ++v) {
      const auto i = static_cast<std::size_t>(v);
      auto& net = model.subnets[i];
      const double loss = subnet_backward(net, model.embeddings, feats[i], &grads[i], nullptr);
      auto& st = subnet_adam[i];
      subnet_step.apply(net.w1, grads[i].w1, st.w1);
      subnet_step.apply(net.b1, grads[i].b1, st.b1);
      subnet_step.apply(net.w2, grads[i].w2, st.w2);
      subnet_step.apply(net.b2, grads[i].b2, st.b2);
      bad[i] = !std::isfinite(loss) || !finite(net);
    }
    for (std::size_t v = 0; v < feats.size(); ++v) {
      if (bad[v]) diverged(epoch, "subnet " + std::to_string(v) + " (feature " + std::to_string(feats[v].key) + ")");
    }

    // Embedding step on the summed loss under the updated subnets.
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (std::ptrdiff_t v = 0; v < n; ++v) {
      const auto i = static_cast<std::size_t>(v);
      losses[i] = subnet_backward(model.subnets[i], model.embeddings, feats[i], nullptr, &member_grads[i]);
    }
    emb_grad.setZero();
    double loss = 0.0;
    for (std::size_t v = 0; v < feats.size(); ++v) {
      loss += losses[v];
      for (std::size_t r = 0; r < feats[v].members.size(); ++r) {
        emb_grad.row(static_cast<Eigen::Index>(feats[v].members[r])) +=
            member_grads[v].row(static_cast<Eigen::Index>(r));
      }
    }
    if (!std::isfinite(loss)) diverged(epoch, "embedding loss");
    emb_step.apply(model.embeddings, emb_grad, emb_adam);
    if (!all_finite(model.embeddings)) diverged(epoch, "embeddings");

    model.loss_history.push_back(loss);
    model.epochs = epoch + 1;
    if (observer) observer(epoch, loss);
    if (plateau.update(loss)) {
      model.converged = true;
      break;
    }
  }
  return model;
}

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != data.size()) {
    fail(ErrorKind::invalid_argument, "bad_model", "matrix shape does not match its data");
  }
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = data[static_cast<std::size_t>(i * cols + k)];
  }
  return m;
}

}  // namespace

nlohmann::json model_to_json(const SENModel& model) {
  nlohmann::json subnets = nlohmann::json::array();
  for (std::size_t v = 0; v < model.subnets.size(); ++v) {
    const auto& s = model.subnets[v];
    subnets.push_back({{"key", model.membership.keys.at(v)},
                       {"members", model.membership.members.at(v)},
                       {"w1", matrix_to_json(s.w1)},
                       {"b1", matrix_to_json(s.b1)},
                       {"w2", matrix_to_json(s.w2)},
                       {"b2", matrix_to_json(s.b2)}});
  }
  return {{"format", "subsetvis-sen/1"},
          {"config", config_to_json(model.config)},
          {"embeddings", matrix_to_json(model.embeddings)},
          {"subnets", std::move(subnets)},
          {"loss_history", model.loss_history},
          {"epochs", model.epochs},
          {"converged", model.converged}};
}

SENModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", "") != "subsetvis-sen/1") {
      fail(ErrorKind::invalid_argument, "bad_model", "unrecognized model format");
    }
    SENModel m;
    m.config = config_from_json(j.at("config"));
    m.embeddings = matrix_from_json(j.at("embeddings"));
    for (const auto& s : j.at("subnets")) {
      m.membership.keys.push_back(s.at("key").get<FeatureKey>());
      m.membership.members.push_back(s.at("members").get<std::vector<std::size_t>>());
      Subnet net;
      net.w1 = matrix_from_json(s.at("w1"));
      net.b1 = matrix_from_json(s.at("b1"));
      net.w2 = matrix_from_json(s.at("w2"));
      net.b2 = matrix_from_json(s.at("b2"));
      if (net.w1.rows() != m.embeddings.cols() || net.b1.size() != net.w1.cols() ||
          net.w2.rows() != net.w1.cols() || net.b2.size() != net.w2.cols()) {
        fail(ErrorKind::invalid_argument, "bad_model", "subnet shapes are inconsistent");
      }
      m.subnets.push_back(std::move(net));
    }
    m.loss_history = j.at("loss_history").get<std::vector<double>>();
    m.epochs = j.at("epochs").get<std::size_t>();
    m.converged = j.at("converged").get<bool>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::invalid_argument, "bad_model", e.what());
  }
}

std::string embeddings_jsonl(const Matrix& embeddings, std::span<const std::string> ids) {
  if (ids.size() != static_cast<std::size_t>(embeddings.rows())) {
    fail(ErrorKind::invalid_argument, "shape_mismatch", "one id per embedding row is required");
  }
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(embeddings.cols()));
    for (Eigen::Index c = 0; c < embeddings.cols(); ++c) row[static_cast<std::size_t>(c)] = embeddings(static_cast<Eigen::Index>(i), c);
    out += nlohmann::json{{"subset_id", ids[i]}, {"embedding", row}}.dump();
    out += '\n';
  }
  return out;
}

}  // namespace subsetvis::sen
