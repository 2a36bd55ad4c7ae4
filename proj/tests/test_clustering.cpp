#include <gtest/gtest.h>

#include <limits>
#include <set>

#include "subsetvis/clustering.hpp"
#include "subsetvis/error.hpp"
#include "subsetvis/metrics.hpp"
#include "subsetvis/rng.hpp"

using namespace subsetvis;
using namespace subsetvis::analysis;

namespace {

Matrix blobs(int groups, int per, double spread, std::uint64_t seed, int dims = 2) {
  Rng rng(seed);
  Matrix x(groups * per, dims);
  for (int g = 0; g < groups; ++g) {
    for (int i = 0; i < per; ++i) {
      for (int c = 0; c < dims; ++c) {
        x(g * per + i, c) = (c == 0 ? 15.0 * g : 15.0 * (g % 2)) + spread * rng.normal();
      }
    }
  }
  return x;
}

std::vector<int> blob_labels(int groups, int per) {
  std::vector<int> l;
  for (int g = 0; g < groups; ++g) l.insert(l.end(), static_cast<std::size_t>(per), g);
  return l;
}

// Naive agglomeration: recompute every cluster-pair linkage from point
// distances before each merge.
std::vector<int> agglomerate_naive(const Matrix& x, int k, Linkage linkage) {
  const auto n = static_cast<std::size_t>(x.rows());
  std::vector<std::vector<std::size_t>> clusters(n);
  for (std::size_t i = 0; i < n; ++i) clusters[i] = {i};
  auto d = [&](std::size_t a, std::size_t b) {
    return (x.row(static_cast<Eigen::Index>(a)) - x.row(static_cast<Eigen::Index>(b))).norm();
  };
  while (clusters.size() > static_cast<std::size_t>(k)) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t ba = 0, bb = 1;
    for (std::size_t a = 0; a < clusters.size(); ++a) {
      for (std::size_t b = a + 1; b < clusters.size(); ++b) {
        double v = linkage == Linkage::single ? std::numeric_limits<double>::infinity() : 0.0;
        for (auto i : clusters[a]) {
          for (auto j : clusters[b]) {
            if (linkage == Linkage::single) v = std::min(v, d(i, j));
            if (linkage == Linkage::complete) v = std::max(v, d(i, j));
            if (linkage == Linkage::average) v += d(i, j);
          }
        }
        if (linkage == Linkage::average) v /= static_cast<double>(clusters[a].size() * clusters[b].size());
        if (v < best) {
          best = v;
          ba = a;
          bb = b;
        }
      }
    }
    clusters[ba].insert(clusters[ba].end(), clusters[bb].begin(), clusters[bb].end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bb));
  }
  std::vector<int> labels(n);
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    for (auto i : clusters[c]) labels[i] = static_cast<int>(c);
  }
  return labels;
}

}  // namespace

TEST(Kmeans, RecoversSeparatedBlobs) {
  const auto x = blobs(4, 15, 0.5, 2);
  const auto a = kmeans(x, 4, 1, 5);
  EXPECT_EQ(a.k, 4);
  EXPECT_EQ(a.labels.size(), 60u);
  EXPECT_DOUBLE_EQ(ari(a.labels, blob_labels(4, 15)), 1.0);
  EXPECT_GT(a.inertia, 0.0);
  EXPECT_EQ(a.groups().size(), 4u);
}

TEST(Kmeans, InertiaIsWithinClusterSse) {
  const auto x = blobs(3, 10, 2.0, 5);
  const auto a = kmeans(x, 3, 4);
  double sse = 0.0;
  for (const auto& g : a.groups()) {
    Eigen::RowVectorXd c = Eigen::RowVectorXd::Zero(x.cols());
    for (auto i : g) c += x.row(static_cast<Eigen::Index>(i));
    c /= static_cast<double>(g.size());
    for (auto i : g) sse += (x.row(static_cast<Eigen::Index>(i)) - c).squaredNorm();
  }
  EXPECT_NEAR(a.inertia, sse, 1e-9 * sse);
}

TEST(Kmeans, RestartsNeverWorse) {
  const auto x = blobs(5, 8, 6.0, 3);
  const auto one = kmeans(x, 5, 9, 1);
  const auto many = kmeans(x, 5, 9, 10);
  EXPECT_LE(many.inertia, one.inertia + 1e-9);
}

TEST(Kmeans, DeterministicAndValidated) {
  const auto x = blobs(3, 10, 3.0, 4);
  EXPECT_EQ(kmeans(x, 3, 7, 3).labels, kmeans(x, 3, 7, 3).labels);
  EXPECT_THROW(kmeans(x, 0, 1), Error);
  EXPECT_THROW(kmeans(x, 31, 1), Error);
  EXPECT_THROW(kmeans(x, 2, 1, 0), Error);
  EXPECT_EQ(kmeans(x, 30, 1).inertia, 0.0);
}

TEST(Kmeans, DuplicatePointsDoNotBreakSeeding) {
  Matrix x = Matrix::Zero(6, 2);
  x(5, 0) = 1.0;
  const auto a = kmeans(x, 3, 1);
  EXPECT_EQ(a.labels.size(), 6u);
}

TEST(Agglomerative, MatchesNaiveMerging) {
  for (auto linkage : {Linkage::single, Linkage::complete, Linkage::average}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      Rng rng(seed);
      Matrix x(25, 3);
      for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform();
      for (int k : {1, 3, 6}) {
        const auto got = agglomerative(x, k, linkage);
        EXPECT_EQ(got.k, k);
        if (k == 1) continue;
        EXPECT_DOUBLE_EQ(ari(got.labels, agglomerate_naive(x, k, linkage)), 1.0);
      }
    }
  }
}

TEST(Agglomerative, SingleLinkFollowsChains) {
  Matrix x(6, 1);
  x << 0, 1, 2, 3, 10, 30;
  const auto a = agglomerative(x, 3, Linkage::single);
  EXPECT_EQ(a.labels[0], a.labels[3]);
  EXPECT_NE(a.labels[3], a.labels[4]);
  EXPECT_NE(a.labels[4], a.labels[5]);
}

TEST(Density, FindsFiveGroupsAndNoise) {
  Matrix x = blobs(5, 12, 0.3, 6);
  Matrix y(x.rows() + 1, 2);
  y << x, Eigen::RowVector2d(500.0, 500.0);
  const auto a = density_cluster(y, 2.0, 4);
  EXPECT_EQ(a.k, 5);
  EXPECT_EQ(a.labels.back(), kNoise);
  std::vector<int> head(a.labels.begin(), a.labels.end() - 1);
  EXPECT_DOUBLE_EQ(ari(head, blob_labels(5, 12)), 1.0);
  EXPECT_THROW(density_cluster(y, 0.0, 3), Error);
  EXPECT_THROW(density_cluster(y, 1.0, 0), Error);
}

TEST(Density, EverythingNoiseWhenEpsTiny) {
  const auto x = blobs(2, 5, 1.0, 1);
  const auto a = density_cluster(x, 1e-9, 2);
  EXPECT_EQ(a.k, 0);
  for (int l : a.labels) EXPECT_EQ(l, kNoise);
}

TEST(ClusterJson, MethodNamesAndAssignment) {
  EXPECT_EQ(parse_cluster_method("kmeans"), ClusterMethod::kmeans);
  EXPECT_EQ(parse_cluster_method(to_string(ClusterMethod::density)), ClusterMethod::density);
  EXPECT_THROW(parse_cluster_method("spectral"), Error);
  EXPECT_EQ(parse_linkage("complete"), Linkage::complete);
  EXPECT_THROW(parse_linkage("ward"), Error);
  const auto a = kmeans(blobs(2, 4, 0.1, 1), 2, 1);
  const auto j = assignment_to_json(a);
  EXPECT_EQ(j.at("labels").size(), 8u);
}
