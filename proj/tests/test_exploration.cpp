#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "subsetvis/error.hpp"
#include "subsetvis/exploration.hpp"

using namespace subsetvis;
using namespace subsetvis::exploration;

namespace {

sen::TrainConfig quick_train() {
  sen::TrainConfig c;
  c.max_epochs = 150;
  c.seed = 3;
  return c;
}

tsne::TsneConfig quick_tsne() {
  tsne::TsneConfig c;
  c.iterations = 300;
  c.seed = 3;
  return c;
}

std::string code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

class SessionTest : public ::testing::Test {
 protected:
  SessionTest() : session(fixtures::shared_crime(3000), "d1") {}

  AttributeId attr(const char* name) const { return session.dataset().attribute_id(name); }

  Session session;
};

}  // namespace

TEST_F(SessionTest, RootHoldsAllRecords) {
  const auto& root = session.node(kRootNode);
  EXPECT_FALSE(root.parent);
  ASSERT_EQ(root.subsets, std::vector<std::string>{kRootSubset});
  EXPECT_EQ(session.subset(kRootSubset).record_count, 3000u);
  EXPECT_EQ(session.subset(kRootSubset).features.size(), 5u);
  EXPECT_EQ(session.node_ids(), std::vector<std::string>{"n0"});
}

TEST_F(SessionTest, SliceWeekGivesSevenSubsets) {
  const auto& cs = session.slice_node(kRootNode, attr("Week"));
  ASSERT_EQ(cs.subsets.size(), 7u);
  std::uint64_t total = 0;
  for (const auto& id : cs.subsets) {
    const auto& s = session.subset(id);
    total += s.record_count;
    EXPECT_EQ(s.features.size(), 4u);
    EXPECT_EQ(s.feature(attr("Week")), nullptr);
  }
  EXPECT_EQ(total, 3000u);
  EXPECT_EQ(session.subset(cs.subsets[5]).unit_bin, 5u);
  // Slicing twice on the same attribute hands back the same set.
  EXPECT_EQ(session.slice_node(kRootNode, attr("Week")).id, cs.id);
  EXPECT_EQ(code_of([&] { session.slice_node("n9", 0); }), "unknown_node");
  EXPECT_EQ(code_of([&] { session.slice_node(kRootNode, 99); }), "unknown_attribute");
}

TEST_F(SessionTest, ProjectSelectAndSliceAgain) {
  const auto week = session.slice_node(kRootNode, attr("Week")).subsets;
  const auto& p = session.project(week, quick_train(), quick_tsne());
  EXPECT_EQ(p.subsets, week);
  EXPECT_EQ(p.coords.rows(), 7);
  EXPECT_EQ(p.coords.cols(), 2);
  EXPECT_EQ(p.embeddings.cols(), 30);
  EXPECT_EQ(session.current_projection().id, p.id);

  const std::vector<std::string> weekend{week[5], week[6]};
  const auto& n = session.select(weekend);
  EXPECT_EQ(n.parent, std::optional<std::string>(kRootNode));
  EXPECT_EQ(n.subsets, weekend);
  ASSERT_TRUE(n.selection);
  ASSERT_EQ(n.selection->filters.size(), 1u);
  EXPECT_EQ(n.selection->filters[0].range, (std::vector<BinIndex>{5, 6}));
  EXPECT_EQ(n.slicing_attribute, attr("Week"));

  const auto& hours = session.slice_node(n.id, attr("Hour"));
  ASSERT_EQ(hours.subsets.size(), 24u);
  std::uint64_t total = 0;
  for (const auto& id : hours.subsets) {
    const auto& s = session.subset(id);
    total += s.record_count;
    EXPECT_EQ(s.features.size(), 3u);
    EXPECT_EQ(s.dimensionality(), 2u);
  }
  EXPECT_EQ(total, session.subset(week[5]).record_count + session.subset(week[6]).record_count);
  EXPECT_EQ(code_of([&] { session.slice_node(n.id, attr("Week")); }), "duplicate_slicing_attribute");
}

TEST_F(SessionTest, SelectingAllBinsHidesTheFilter) {
  const auto week = session.slice_node(kRootNode, attr("Week")).subsets;
  session.project(week, quick_train(), quick_tsne());
  const auto& n = session.select(week);
  EXPECT_TRUE(n.selection->filters.empty());
  EXPECT_EQ(n.selection->path, std::vector<AttributeId>{attr("Week")});
  const auto& hours = session.slice_node(n.id, attr("Hour"));
  EXPECT_EQ(session.subset(hours.subsets[0]).features.size(), 3u);
}

TEST_F(SessionTest, MixedSelectionAttachesToCommonAncestor) {
  const auto week = session.slice_node(kRootNode, attr("Week")).subsets;
  const auto type = session.slice_node(kRootNode, attr("Type")).subsets;
  std::vector<std::string> cohort{week[0], week[1], type[0], type[1]};
  session.project(cohort, quick_train(), quick_tsne());
  const std::vector<std::string> mixed{week[0], type[1]};
  const auto& n = session.select(mixed);
  EXPECT_EQ(n.parent, std::optional<std::string>(kRootNode));
  EXPECT_FALSE(n.selection);
  EXPECT_EQ(code_of([&] { session.slice_node(n.id, attr("Hour")); }), "node_not_sliceable");
}

TEST_F(SessionTest, SelectErrors) {
  const auto week = session.slice_node(kRootNode, attr("Week")).subsets;
  EXPECT_EQ(code_of([&] { session.select(week); }), "no_projection");
  const std::vector<std::string> some{week[0], week[1], week[2]};
  session.project(some, quick_train(), quick_tsne());
  EXPECT_EQ(code_of([&] { session.select({}); }), "empty_selection");
  const std::vector<std::string> dup{week[0], week[0]};
  EXPECT_EQ(code_of([&] { session.select(dup); }), "duplicate_subset");
  const std::vector<std::string> outside{week[4]};
  EXPECT_EQ(code_of([&] { session.select(outside); }), "subset_not_projected");
  const std::vector<std::string> ghost{"s404"};
  EXPECT_EQ(code_of([&] { session.select(ghost); }), "unknown_subset");
}

TEST_F(SessionTest, ProjectErrors) {
  const auto week = session.slice_node(kRootNode, attr("Week")).subsets;
  const std::vector<std::string> one{week[0]};
  EXPECT_EQ(code_of([&] { session.project(one, quick_train(), quick_tsne()); }), "too_few_subsets");
  const std::vector<std::string> dup{week[0], week[0]};
  EXPECT_EQ(code_of([&] { session.project(dup, quick_train(), quick_tsne()); }), "duplicate_subset");
  const std::vector<std::string> ghost{week[0], "s99"};
  EXPECT_EQ(code_of([&] { session.project(ghost, quick_train(), quick_tsne()); }), "unknown_subset");
}

TEST_F(SessionTest, HighlightNightHours) {
  const auto& hours = session.slice_node(kRootNode, attr("Hour"));
  session.project(hours.subsets, quick_train(), quick_tsne());
  const std::vector<BinIndex> night{22, 23, 0, 1, 2, 3};
  const auto lit = session.highlight(attr("Hour"), night);
  ASSERT_EQ(lit.size(), 6u);
  for (const auto& id : lit) {
    const auto b = *session.subset(id).unit_bin;
    EXPECT_TRUE(b >= 22 || b <= 3);
  }
  const std::vector<BinIndex> bad{24};
  EXPECT_EQ(code_of([&] { session.highlight(attr("Hour"), bad); }), "bin_out_of_range");
  EXPECT_EQ(code_of([&] { session.highlight(attr("Week"), std::vector<BinIndex>{1}); }), "not_a_slicing_attribute");
}

TEST_F(SessionTest, NodeFeaturesAggregateCounts) {
  const auto week = session.slice_node(kRootNode, attr("Week")).subsets;
  session.project(week, quick_train(), quick_tsne());
  const std::vector<std::string> pick{week[1], week[3]};
  const auto& n = session.select(pick);
  const auto feats = session.node_features(n.id);
  ASSERT_EQ(feats.size(), 4u);
  for (const auto& f : feats) {
    ASSERT_EQ(f.subsets, pick);
    const auto* a = session.subset(pick[0]).feature(f.attribute);
    const auto* b = session.subset(pick[1]).feature(f.attribute);
    for (std::size_t i = 0; i < f.aggregated_counts.size(); ++i) {
      EXPECT_EQ(f.aggregated_counts[i], a->raw_counts[i] + b->raw_counts[i]);
    }
    EXPECT_DOUBLE_EQ(f.consistency, analysis::consistency(f.vectors));
  }
  const auto measures = session.node_measures(n.id);
  EXPECT_EQ(measures.size(), 4u);
  const auto j = session.node_features_json(n.id);
  EXPECT_EQ(j.at("features").size(), 4u);
  for (const auto& f : j.at("features")) {
    EXPECT_EQ(f.at("chart"), f.at("kind") == "temporal" ? "line" : "bar");
  }
}

TEST_F(SessionTest, ClusterStoresOnProjection) {
  const auto hours = session.slice_node(kRootNode, attr("Hour")).subsets;
  const auto& p = session.project(hours, quick_train(), quick_tsne());
  ClusterParams params;
  params.k = 2;
  const auto& a = session.cluster(params);
  EXPECT_EQ(a.labels.size(), 24u);
  EXPECT_TRUE(session.projection(p.id).clusters.has_value());
  const auto j = session.projection_json(session.projection(p.id));
  EXPECT_EQ(j.at("points").size(), 24u);
  EXPECT_TRUE(j.at("clusters").is_object());
  params.method = analysis::ClusterMethod::agglomerative;
  params.k = 3;
  EXPECT_EQ(session.cluster(params, p.id).k, 3);
  const auto from_json = cluster_params_from_json({{"method", "density"}, {"params", {{"eps", 2.5}, {"min_pts", 2}}}});
  EXPECT_EQ(from_json.method, analysis::ClusterMethod::density);
  EXPECT_DOUBLE_EQ(from_json.eps, 2.5);
}

TEST_F(SessionTest, RemoveLeafRules) {
  const auto week = session.slice_node(kRootNode, attr("Week")).subsets;
  session.project(week, quick_train(), quick_tsne());
  const std::vector<std::string> pick{week[0], week[1]};
  const auto id = session.select(pick).id;
  session.slice_node(id, attr("Hour"));
  EXPECT_EQ(code_of([&] { session.remove_leaf(kRootNode); }), "cannot_remove_root");
  session.remove_leaf(id);
  EXPECT_EQ(code_of([&] { session.node(id); }), "unknown_node");
  EXPECT_TRUE(session.node(kRootNode).children.empty());
  EXPECT_EQ(session.node_ids().size(), 1u);
}

TEST_F(SessionTest, ParentWithChildrenCannotBeRemoved) {
  const auto week = session.slice_node(kRootNode, attr("Week")).subsets;
  session.project(week, quick_train(), quick_tsne());
  const std::vector<std::string> pick{week[0], week[1]};
  const auto parent = session.select(pick).id;
  const auto hours = session.slice_node(parent, attr("Hour")).subsets;
  session.project(hours, quick_train(), quick_tsne());
  const std::vector<std::string> two{hours[0], hours[1]};
  session.select(two);
  EXPECT_EQ(code_of([&] { session.remove_leaf(parent); }), "node_has_children");
}

TEST_F(SessionTest, SnapshotRoundTripIsByteStable) {
  const auto week = session.slice_node(kRootNode, attr("Week")).subsets;
  session.project(week, quick_train(), quick_tsne());
  const std::vector<std::string> pick{week[5], week[6]};
  const auto n = session.select(pick).id;
  const auto hours = session.slice_node(n, attr("Hour")).subsets;
  session.project(hours, quick_train(), quick_tsne());
  ClusterParams params;
  session.cluster(params);

  const auto snap = session.snapshot();
  EXPECT_EQ(snap.at("format"), "subsetvis-session/1");
  const auto text = snap.dump();
  const auto restored = Session::restore(fixtures::shared_crime(3000), nlohmann::json::parse(text));
  EXPECT_EQ(restored.snapshot().dump(), text);
  EXPECT_EQ(restored.tree_json().dump(), session.tree_json().dump());
  EXPECT_EQ(restored.node_features_json(n).dump(), session.node_features_json(n).dump());
  EXPECT_EQ(restored.current_projection().id, session.current_projection().id);
}

TEST_F(SessionTest, TreeJsonShape) {
  session.slice_node(kRootNode, attr("Week"));
  const auto tree = session.tree_json();
  ASSERT_EQ(tree.at("nodes").size(), 1u);
  const auto& root = tree.at("nodes")[0];
  EXPECT_EQ(root.at("id"), "n0");
  EXPECT_EQ(root.at("candidate_sets").size(), 1u);
  EXPECT_EQ(root.at("candidate_sets")[0].at("subsets").size(), 7u);
  EXPECT_EQ(root.at("candidate_sets")[0].at("ordered"), true);
  EXPECT_EQ(root.at("sliceable"), true);
}

TEST(ComputeProjection, ObserverAndDeterminism) {
  Session a(fixtures::shared_crime(2000), "d1");
  const auto ids = a.slice_node(kRootNode, a.dataset().attribute_id("Region")).subsets;
  auto input = a.prepare_projection(ids, quick_train(), quick_tsne());
  std::size_t calls = 0;
  const auto s1 = compute_projection(input, [&](std::size_t, double) { ++calls; });
  EXPECT_EQ(calls, s1.epochs);
  const auto s2 = compute_projection(input);
  EXPECT_TRUE(s1.coords == s2.coords);
  EXPECT_EQ(s1.sizes.size(), ids.size());
}
