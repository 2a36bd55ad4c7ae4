#pragma once

// Quantitative experiment harness: pattern-encoding and visual-perception
// accuracy of SEN embeddings against a concatenate-then-t-SNE baseline as
// more views are replaced by noise, and the training-time grid.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "subsetvis/metrics.hpp"
#include "subsetvis/sen.hpp"
#include "subsetvis/tsne.hpp"

namespace subsetvis::experiments {

using Matrix = Eigen::MatrixXd;

// Each record is treated as a subset whose features are its views.
struct MultiViewRecordSet {
  std::vector<int> labels;
  std::vector<std::vector<std::vector<double>>> views;  // record -> view -> values

  std::size_t size() const { return labels.size(); }
  std::size_t view_count() const { return views.empty() ? 0 : views.front().size(); }
  std::vector<std::size_t> view_dims() const;
  std::size_t category_count() const;
  void validate() const;
};

// JSON-lines: {"label": ..., "views": [[...], [...]]}. Labels may be numbers
// or strings; strings are numbered in order of first appearance.
MultiViewRecordSet load_jsonl(std::string_view text);
std::string to_jsonl(const MultiViewRecordSet& rs);

// "20x29,69" -> 29 lengths of 20 then one of 69.
std::vector<std::size_t> parse_view_split(std::string_view spec);

// Lengths of the 649-attribute handwritten-digits layout.
std::vector<std::size_t> handwritten_split();

// Contiguous split of a flat vector. Throws Error(invalid_argument,
// "length_mismatch") when the lengths do not add up.
std::vector<std::vector<double>> split_views(std::span<const double> flat, std::span<const std::size_t> lengths);

// Flat numeric CSV with a header; `label_column` names the category column,
// the remaining columns are split into views.
MultiViewRecordSet load_flat_csv(std::string_view text, std::string_view label_column,
                                 std::span<const std::size_t> lengths);

struct Replacement {
  MultiViewRecordSet data;
  std::vector<std::size_t> replaced_views;  // ascending
};

// Refills m randomly chosen views of every record with uniform noise drawn
// per coordinate within the original observed min/max.
Replacement replace_features(const MultiViewRecordSet& rs, std::size_t m, std::uint64_t seed);

struct SurrogateConfig {
  std::size_t categories = 10;
  std::size_t per_category = 20;
  std::vector<std::size_t> view_dims = handwritten_split();
  double noise = 0.3;  // within-category Gaussian spread around prototypes
  std::uint64_t seed = 1;
};

// Categories with one random prototype per view; records scatter around it.
MultiViewRecordSet make_surrogate(const SurrogateConfig& cfg);

enum class Method { sen, concat_tsne };
std::string_view to_string(Method m);
Method parse_method(std::string_view text);

struct ExperimentConfig {
  std::vector<Method> methods = {Method::sen, Method::concat_tsne};
  std::vector<std::size_t> replacement_counts = {0, 5, 10, 15, 20, 25};
  std::size_t trials = 5;
  std::uint64_t seed = 7;
  sen::TrainConfig sen;
  tsne::TsneConfig tsne;            // perplexity 20, other defaults
  std::size_t embedding_dims = 30;  // both arms embed to this length
  int kmeans_restarts = 10;
};

struct CellResult {
  Method method = Method::sen;
  std::size_t replaced = 0;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> replaced_views;
  analysis::QualityReport report;
  double seconds = 0.0;
};

struct CellSummary {
  Method method = Method::sen;
  std::size_t replaced = 0;
  std::size_t trials = 0;
  analysis::QualityReport mean;
  analysis::QualityReport variance;  // sample variance over trials
};

struct ExperimentReport {
  std::vector<CellResult> cells;
  std::vector<CellSummary> summary;
  nlohmann::json config;

  const CellSummary& find(Method method, std::size_t replaced) const;
};

// SEN embeddings of the records, one subnet per view.
Matrix sen_embed(const MultiViewRecordSet& rs, const sen::TrainConfig& cfg);
// Views concatenated per record.
Matrix concatenate(const MultiViewRecordSet& rs);

// Scores one method: k-means (k = category count) on `embedding` for
// ACC/NMI/ARI, and SC/CHI of the true categories on `projection_2d`.
analysis::QualityReport evaluate(const Matrix& embedding, const Matrix& projection_2d,
                                 std::span<const int> labels, std::uint64_t seed, int restarts);

using Progress = std::function<void(const CellResult&)>;

ExperimentReport run_experiment(const MultiViewRecordSet& rs, const ExperimentConfig& cfg,
                                const Progress& progress = {});

std::string report_csv(const ExperimentReport& report);
nlohmann::json report_json(const ExperimentReport& report);

struct BenchConfig {
  std::vector<std::size_t> subset_counts = {100, 300, 500};
  std::vector<std::size_t> feature_counts = {10, 15, 20, 25, 30};
  std::size_t feature_dims = 20;
  std::size_t repetitions = 5;
  std::uint64_t seed = 11;
  sen::TrainConfig sen;
};

struct BenchCell {
  std::size_t subsets = 0;
  std::size_t features = 0;
  std::vector<double> seconds;
  std::vector<std::size_t> epochs;
  double mean_seconds = 0.0;
  double variance = 0.0;
};

// Random subsets owning every feature, uniform values in [0, 1).
sen::TrainingData random_training_data(std::size_t subsets, std::size_t features, std::size_t dims,
                                       std::uint64_t seed);

// Wall-clock SEN training time per grid cell; cells run one after another.
std::vector<BenchCell> bench_efficiency(const BenchConfig& cfg,
                                        const std::function<void(const BenchCell&)>& progress = {});
std::string bench_csv(std::span<const BenchCell> cells);

double mean(std::span<const double> x);
double sample_variance(std::span<const double> x);
// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace subsetvis::experiments
