#pragma once

// Exploration session: the tree of selected subset groups, the candidate
// subsets produced by slicing a node, and projections of subset cohorts.
//
// A Session is not thread-safe; callers serialize mutations. Projection is
// split into prepare (reads), compute (no session access) and commit (write)
// so a long training run can proceed outside the caller's lock.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "subsetvis/clustering.hpp"
#include "subsetvis/cube.hpp"
#include "subsetvis/dataset.hpp"
#include "subsetvis/features.hpp"
#include "subsetvis/measures.hpp"
#include "subsetvis/sen.hpp"
#include "subsetvis/tsne.hpp"

namespace subsetvis::exploration {

enum class NodeOrigin { root, selection };
std::string_view to_string(NodeOrigin o);

inline constexpr const char* kRootNode = "n0";
inline constexpr const char* kRootSubset = "s0";

struct ExplorationNode {
  std::string id;
  std::optional<std::string> parent;
  std::vector<std::string> subsets;  // selection order
  std::optional<AttributeId> slicing_attribute;
  std::vector<std::string> children;
  std::vector<std::string> candidate_sets;
  NodeOrigin origin = NodeOrigin::root;
  // Record set as a conjunction; absent for nodes mixing subsets from
  // different slicing rounds, which cannot be sliced further.
  std::optional<Selection> selection;
};

// Subsets produced by slicing one node on one attribute.
struct CandidateSet {
  std::string id;
  std::string node;
  AttributeId attribute = 0;
  std::vector<std::string> subsets;
};

struct SubsetEntry {
  Subset subset;
  std::string producer;  // node whose slicing produced it
  std::string candidate_set;  // empty for the root subset
  std::vector<AttributeId> excluded;  // path attributes kept out of features
};

struct FeatureSummary {
  AttributeId attribute = 0;
  std::vector<std::string> subsets;               // owners, node order
  std::vector<std::vector<double>> vectors;       // one per owner
  std::vector<std::uint64_t> aggregated_counts;   // summed over owners
  std::vector<double> aggregated;                 // proportions
  double consistency = 0.0;
};

struct NodeMeasure {
  AttributeId attribute = 0;
  analysis::MarginalMeasures measures;
};

struct ProjectionState {
  std::string id;
  std::vector<std::string> subsets;
  sen::TrainConfig train_config;
  tsne::TsneConfig tsne_config;
  Eigen::MatrixXd embeddings;  // row per subset
  Eigen::MatrixXd coords;      // row per subset, 2 columns
  std::vector<double> loss_history;
  std::size_t epochs = 0;
  bool converged = false;
  std::vector<std::uint64_t> sizes;  // record counts
  std::optional<analysis::ClusterAssignment> clusters;
};

struct ProjectionInput {
  std::vector<std::string> subsets;
  sen::TrainingData data;
  std::vector<std::uint64_t> sizes;
  sen::TrainConfig train_config;
  tsne::TsneConfig tsne_config;
};

ProjectionState compute_projection(const ProjectionInput& input,
                                   const sen::EpochObserver& observer = {});

struct ClusterParams {
  analysis::ClusterMethod method = analysis::ClusterMethod::kmeans;
  int k = 2;
  analysis::Linkage linkage = analysis::Linkage::average;
  double eps = 0.5;
  int min_pts = 3;
  std::uint64_t seed = 0;
  int restarts = 10;
};

ClusterParams cluster_params_from_json(const nlohmann::json& j);

struct SessionOptions {
  std::size_t max_cube_cells = kDefaultMaxCubeCells;
  std::uint64_t seed = 0;  // default training and t-SNE seed
  ExecPolicy policy = ExecPolicy::parallel;
};

class Session {
 public:
  Session(std::shared_ptr<const Dataset> dataset, std::string dataset_id, SessionOptions options = {});

  const Dataset& dataset() const { return *dataset_; }
  const std::string& dataset_id() const { return dataset_id_; }
  const SessionOptions& options() const { return options_; }

  const ExplorationNode& node(const std::string& id) const;
  const Subset& subset(const std::string& id) const;
  const SubsetEntry& subset_entry(const std::string& id) const;
  const CandidateSet& candidate_set(const std::string& id) const;
  const ProjectionState& projection(const std::string& id) const;
  // Most recent projection. Throws Error(not_found, "no_projection").
  const ProjectionState& current_projection() const;
  std::vector<std::string> node_ids() const;

  // Slicing a node twice on the same attribute returns the existing set.
  // Throws Error(conflict, "duplicate_slicing_attribute") for an attribute on
  // the node's path and Error(conflict, "node_not_sliceable") for mixed
  // nodes.
  const CandidateSet& slice_node(const std::string& node_id, AttributeId attribute);

  ProjectionInput prepare_projection(std::span<const std::string> subset_ids,
                                     const sen::TrainConfig& train_cfg,
                                     const tsne::TsneConfig& tsne_cfg) const;
  const ProjectionState& commit_projection(ProjectionState state);
  const ProjectionState& project(std::span<const std::string> subset_ids,
                                 const sen::TrainConfig& train_cfg,
                                 const tsne::TsneConfig& tsne_cfg);

  // New child node from projected subsets; an empty projection id means the
  // current one.
  const ExplorationNode& select(std::span<const std::string> subset_ids,
                                const std::string& projection_id = {});

  // Projected subsets whose filter on `attribute` lies within `bins`.
  std::vector<std::string> highlight(AttributeId attribute, std::span<const BinIndex> bins,
                                     const std::string& projection_id = {}) const;

  // Clusters the projection's embeddings and stores the result on it.
  const analysis::ClusterAssignment& cluster(const ClusterParams& params,
                                             const std::string& projection_id = {});

  // Removes a childless non-root node.
  void remove_leaf(const std::string& node_id);

  std::vector<FeatureSummary> node_features(const std::string& node_id) const;
  std::vector<NodeMeasure> node_measures(const std::string& node_id) const;

  nlohmann::json tree_json() const;
  nlohmann::json node_features_json(const std::string& node_id) const;
  nlohmann::json node_measures_json(const std::string& node_id) const;
  nlohmann::json candidate_set_json(const std::string& id) const;
  nlohmann::json projection_json(const ProjectionState& p) const;
  nlohmann::json subset_json(const std::string& id) const;

  // Whole session; the dump is byte-stable for equal sessions.
  nlohmann::json snapshot() const;
  static Session restore(std::shared_ptr<const Dataset> dataset, const nlohmann::json& snapshot,
                         SessionOptions options = {});

 private:
  std::string next_id(char prefix);
  const ProjectionState& resolve_projection(const std::string& id) const;
  ProjectionState& resolve_projection(const std::string& id);
  void ensure_cube(std::span<const AttributeTuple> tuples);
  void materialize(Subset& subset, std::span<const AttributeId> excluded);
  const SubsetEntry& add_subset(Subset subset, std::string producer, std::string candidate_set,
                                std::vector<AttributeId> excluded);
  std::string common_ancestor(const std::vector<std::string>& nodes) const;
  std::vector<std::string> ancestry(const std::string& node_id) const;

  std::shared_ptr<const Dataset> dataset_;
  std::string dataset_id_;
  SessionOptions options_;
  std::shared_ptr<const CubeIndex> cube_;
  std::map<std::string, ExplorationNode> nodes_;
  std::map<std::string, SubsetEntry> subsets_;
  std::map<std::string, CandidateSet> candidate_sets_;
  std::map<std::string, ProjectionState> projections_;
  std::string current_projection_;
  std::map<char, std::uint64_t> counters_;
};

}  // namespace subsetvis::exploration
