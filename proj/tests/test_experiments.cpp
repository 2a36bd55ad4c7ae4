#include <gtest/gtest.h>

#include <numeric>

#include "subsetvis/error.hpp"
#include "subsetvis/experiments.hpp"

using namespace subsetvis;
using namespace subsetvis::experiments;

namespace {

MultiViewRecordSet tiny_records() {
  MultiViewRecordSet rs;
  rs.labels = {0, 0, 1, 1};
  rs.views = {
      {{0.0, 1.0}, {5.0}, {1.0, 1.0, 1.0}},
      {{0.1, 0.9}, {4.0}, {2.0, 1.0, 0.0}},
      {{1.0, 0.0}, {-2.0}, {0.0, 0.0, 3.0}},
      {{0.9, 0.2}, {-1.0}, {1.0, 2.0, 3.0}},
  };
  return rs;
}

}  // namespace

TEST(ViewSplit, ParseAndSplit) {
  EXPECT_EQ(parse_view_split("20x29,69").size(), 30u);
  EXPECT_EQ(parse_view_split("3,2x2"), (std::vector<std::size_t>{3, 2, 2}));
  const auto hw = handwritten_split();
  ASSERT_EQ(hw.size(), 30u);
  EXPECT_EQ(std::accumulate(hw.begin(), hw.end(), std::size_t{0}), 649u);
  EXPECT_EQ(hw.back(), 69u);
  EXPECT_THROW(parse_view_split("2x"), Error);
  EXPECT_THROW(parse_view_split("a"), Error);

  const std::vector<double> flat{1, 2, 3, 4, 5};
  const std::vector<std::size_t> lengths{2, 3};
  const auto views = split_views(flat, lengths);
  EXPECT_EQ(views[1], (std::vector<double>{3, 4, 5}));
  const std::vector<std::size_t> wrong{2, 2};
  try {
    split_views(flat, wrong);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "length_mismatch");
  }
}

TEST(Records, JsonlRoundTripAndStringLabels) {
  const auto rs = tiny_records();
  const auto back = load_jsonl(to_jsonl(rs));
  EXPECT_EQ(back.labels, rs.labels);
  EXPECT_EQ(back.views, rs.views);
  EXPECT_EQ(back.view_count(), 3u);
  EXPECT_EQ(back.category_count(), 2u);

  const auto named = load_jsonl(
      "{\"label\": \"cat\", \"views\": [[1.0]]}\n\n{\"label\": \"dog\", \"views\": [[2.0]]}\n"
      "{\"label\": \"cat\", \"views\": [[3.0]]}\n");
  EXPECT_EQ(named.labels, (std::vector<int>{0, 1, 0}));
  EXPECT_THROW(load_jsonl("{\"label\": 0, \"views\": [[1.0]]}\n{\"label\": 1, \"views\": [[1.0, 2.0]]}\n"), Error);
  EXPECT_THROW(load_jsonl("{oops}\n"), Error);
}

TEST(Records, FlatCsv) {
  const auto rs = load_flat_csv("label,a,b,c\n3,1,2,3\n5,4,5,6\n", "label", std::vector<std::size_t>{1, 2});
  EXPECT_EQ(rs.size(), 2u);
  EXPECT_EQ(rs.views[1][1], (std::vector<double>{5, 6}));
  EXPECT_NE(rs.labels[0], rs.labels[1]);
  EXPECT_THROW(load_flat_csv("x,a\n1,2\n", "label", std::vector<std::size_t>{1}), Error);
}

TEST(Replace, PicksMViewsWithinObservedRange) {
  const auto rs = tiny_records();
  const auto r = replace_features(rs, 2, 9);
  ASSERT_EQ(r.replaced_views.size(), 2u);
  EXPECT_TRUE(std::is_sorted(r.replaced_views.begin(), r.replaced_views.end()));
  for (std::size_t v = 0; v < 3; ++v) {
    const bool replaced = std::find(r.replaced_views.begin(), r.replaced_views.end(), v) != r.replaced_views.end();
    for (std::size_t i = 0; i < rs.size(); ++i) {
      if (!replaced) {
        EXPECT_EQ(r.data.views[i][v], rs.views[i][v]);
        continue;
      }
      for (std::size_t c = 0; c < rs.views[i][v].size(); ++c) {
        double lo = rs.views[0][v][c], hi = lo;
        for (std::size_t j = 0; j < rs.size(); ++j) {
          lo = std::min(lo, rs.views[j][v][c]);
          hi = std::max(hi, rs.views[j][v][c]);
        }
        EXPECT_GE(r.data.views[i][v][c], lo);
        EXPECT_LE(r.data.views[i][v][c], hi);
      }
    }
  }
  EXPECT_EQ(r.data.labels, rs.labels);
  EXPECT_EQ(replace_features(rs, 2, 9).data.views, r.data.views);
  EXPECT_TRUE(replace_features(rs, 0, 9).replaced_views.empty());
  try {
    replace_features(rs, 4, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "too_many_replacements");
  }
}

TEST(Surrogate, ShapeAndDeterminism) {
  SurrogateConfig cfg;
  cfg.per_category = 3;
  const auto a = make_surrogate(cfg);
  EXPECT_EQ(a.size(), 30u);
  EXPECT_EQ(a.view_count(), 30u);
  EXPECT_EQ(a.category_count(), 10u);
  EXPECT_EQ(a.view_dims(), handwritten_split());
  EXPECT_EQ(make_surrogate(cfg).views, a.views);
  cfg.seed = 2;
  EXPECT_NE(make_surrogate(cfg).views, a.views);
}

TEST(Embedding, ConcatenateAndSen) {
  const auto rs = tiny_records();
  const auto c = concatenate(rs);
  EXPECT_EQ(c.rows(), 4);
  EXPECT_EQ(c.cols(), 6);
  EXPECT_EQ(c(2, 2), -2.0);
  sen::TrainConfig cfg;
  cfg.max_epochs = 20;
  const auto e = sen_embed(rs, cfg);
  EXPECT_EQ(e.rows(), 4);
  EXPECT_EQ(e.cols(), 30);
}

TEST(Evaluate, PerfectSeparation) {
  Matrix emb(6, 2);
  emb << 0, 0, 0.1, 0, 0, 0.1, 10, 10, 10.1, 10, 10, 10.1;
  const std::vector<int> labels{0, 0, 0, 1, 1, 1};
  const auto r = evaluate(emb, emb, labels, 3, 5);
  EXPECT_EQ(r.acc, 1.0);
  EXPECT_DOUBLE_EQ(r.nmi, 1.0);
  EXPECT_DOUBLE_EQ(r.ari, 1.0);
  EXPECT_GT(r.silhouette, 0.9);
  EXPECT_GT(r.chi, 100.0);
}

TEST(Stats, MeanVarianceSpearman) {
  const std::vector<double> x{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(mean(x), 2.5);
  EXPECT_DOUBLE_EQ(sample_variance(x), 5.0 / 3.0);
  const std::vector<double> one{7};
  EXPECT_EQ(sample_variance(one), 0.0);
  const std::vector<double> down{9, 5, 4, 1};
  EXPECT_DOUBLE_EQ(spearman(x, down), -1.0);
  const std::vector<double> monotone{1, 10, 100, 1000};
  EXPECT_DOUBLE_EQ(spearman(x, monotone), 1.0);
  // Ties take average ranks: y ranks (1.5, 1.5, 3, 4).
  const std::vector<double> tied{2, 2, 3, 4};
  const double r = spearman(x, tied);
  EXPECT_NEAR(r, 0.9486832980505138, 1e-12);
}

TEST(Experiment, SmallRunReportsEveryCell) {
  SurrogateConfig sc;
  sc.categories = 3;
  sc.per_category = 6;
  sc.view_dims = {4, 4, 4, 4};
  const auto rs = make_surrogate(sc);
  ExperimentConfig cfg;
  cfg.replacement_counts = {0, 2};
  cfg.trials = 2;
  cfg.sen.max_epochs = 60;
  cfg.tsne.iterations = 250;
  std::size_t seen = 0;
  const auto report = run_experiment(rs, cfg, [&](const CellResult&) { ++seen; });
  EXPECT_EQ(report.cells.size(), 8u);
  EXPECT_EQ(seen, 8u);
  EXPECT_EQ(report.summary.size(), 4u);
  const auto& s = report.find(Method::sen, 2);
  EXPECT_EQ(s.trials, 2u);
  EXPECT_THROW(report.find(Method::sen, 3), Error);
  for (const auto& c : report.cells) {
    EXPECT_EQ(c.replaced_views.size(), c.replaced);
    EXPECT_GE(c.report.acc, 1.0 / 3.0 - 1e-12);
  }
  // Both methods see the same mutated data in a trial.
  EXPECT_EQ(report.cells[2].replaced_views, report.cells[3].replaced_views);

  const auto csv = report_csv(report);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "method,replaced,trials,acc,acc_var,nmi,nmi_var,ari,ari_var,silhouette,silhouette_var,chi,chi_var");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  const auto j = report_json(report);
  EXPECT_EQ(j.at("cells").size(), 8u);

  EXPECT_EQ(parse_method("concat"), Method::concat_tsne);
  EXPECT_EQ(parse_method(to_string(Method::sen)), Method::sen);
  EXPECT_THROW(parse_method("msne"), Error);
}

TEST(Bench, TinyGrid) {
  BenchConfig cfg;
  cfg.subset_counts = {10};
  cfg.feature_counts = {2, 3};
  cfg.feature_dims = 4;
  cfg.repetitions = 2;
  cfg.sen.max_epochs = 30;
  const auto cells = bench_efficiency(cfg);
  ASSERT_EQ(cells.size(), 2u);
  EXPECT_EQ(cells[1].features, 3u);
  EXPECT_EQ(cells[0].seconds.size(), 2u);
  const auto data = random_training_data(10, 3, 4, 1);
  EXPECT_EQ(data.subset_count(), 10u);
  EXPECT_EQ(data.features().size(), 3u);
  const auto csv = bench_csv(cells);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}
