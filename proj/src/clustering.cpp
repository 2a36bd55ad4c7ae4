#include "subsetvis/clustering.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "subsetvis/error.hpp"
#include "subsetvis/rng.hpp"

namespace subsetvis::analysis {

namespace {

// Renumbers labels in order of first appearance; noise stays -1.
int canonical_labels(std::vector<int>& labels) {
  std::vector<std::pair<int, int>> seen;
  int next = 0;
  for (int& l : labels) {
    if (l == kNoise) continue;
    auto it = std::find_if(seen.begin(), seen.end(), [&](const auto& p) { return p.first == l; });
    if (it == seen.end()) {
      seen.emplace_back(l, next);
      l = next++;
    } else {
      l = it->second;
    }
  }
  return next;
}

double squared_distance(const Matrix& x, Eigen::Index i, const Matrix& c, Eigen::Index j) {
  return (x.row(i) - c.row(j)).squaredNorm();
}

struct LloydResult {
  std::vector<int> labels;
  double inertia = 0.0;
};

LloydResult lloyd(const Matrix& x, int k, Rng& rng, int max_iterations) {
  const auto n = x.rows();
  Matrix centers(k, x.cols());

  // k-means++ seeding.
  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  std::vector<char> chosen(static_cast<std::size_t>(n), 0);
  auto pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
  for (int c = 0; c < k; ++c) {
    if (c > 0) {
      double total = 0.0;
      for (double d : d2) total += d;
      if (total > 0.0) {
        const double u = rng.uniform() * total;
        double acc = 0.0;
        pick = -1;
        for (Eigen::Index i = 0; i < n; ++i) {
          acc += d2[static_cast<std::size_t>(i)];
          if (u < acc) {
            pick = i;
            break;
          }
        }
        if (pick < 0) {
          // Rounding at the top end: last item with positive weight.
          for (Eigen::Index i = n; i-- > 0;) {
            if (d2[static_cast<std::size_t>(i)] > 0.0) {
              pick = i;
              break;
            }
          }
        }
      } else {
        // Fewer distinct points than clusters: take any unused item.
        std::vector<Eigen::Index> unused;
        for (Eigen::Index i = 0; i < n; ++i) {
          if (!chosen[static_cast<std::size_t>(i)]) unused.push_back(i);
        }
        pick = unused[rng.below(unused.size())];
      }
    }
    chosen[static_cast<std::size_t>(pick)] = 1;
    centers.row(c) = x.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], squared_distance(x, i, centers, c));
    }
  }

  LloydResult r;
  r.labels.assign(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = squared_distance(x, i, centers, 0);
      for (int c = 1; c < k; ++c) {
        const double d = squared_distance(x, i, centers, c);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (r.labels[static_cast<std::size_t>(i)] != best) {
        r.labels[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    if (!changed) break;
    Matrix sums = Matrix::Zero(k, x.cols());
    std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int l = r.labels[static_cast<std::size_t>(i)];
      sums.row(l) += x.row(i);
      ++sizes[static_cast<std::size_t>(l)];
    }
    for (int c = 0; c < k; ++c) {
      // An emptied cluster keeps its previous centre.
      if (sizes[static_cast<std::size_t>(c)] > 0) {
        centers.row(c) = sums.row(c) / static_cast<double>(sizes[static_cast<std::size_t>(c)]);
      }
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    r.inertia += squared_distance(x, i, centers, r.labels[static_cast<std::size_t>(i)]);
  }
  return r;
}

}  // namespace

std::string_view to_string(ClusterMethod m) {
  switch (m) {
    case ClusterMethod::kmeans: return "kmeans";
    case ClusterMethod::agglomerative: return "agglomerative";
    case ClusterMethod::density: return "density";
  }
  return "kmeans";
}

ClusterMethod parse_cluster_method(std::string_view text) {
  if (text == "kmeans" || text == "k-means") return ClusterMethod::kmeans;
  if (text == "agglomerative" || text == "hierarchical") return ClusterMethod::agglomerative;
  if (text == "density" || text == "dbscan") return ClusterMethod::density;
  fail(ErrorKind::invalid_argument, "unknown_cluster_method", "unknown clustering method '" + std::string(text) + "'");
}

Linkage parse_linkage(std::string_view text) {
  if (text == "average") return Linkage::average;
  if (text == "complete") return Linkage::complete;
  if (text == "single") return Linkage::single;
  fail(ErrorKind::invalid_argument, "unknown_linkage", "unknown linkage '" + std::string(text) + "'");
}

std::vector<std::vector<std::size_t>> ClusterAssignment::groups() const {
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= 0) out[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  return out;
}

nlohmann::json assignment_to_json(const ClusterAssignment& a) {
  return {{"method", to_string(a.method)}, {"k", a.k}, {"labels", a.labels}, {"groups", a.groups()}};
}

ClusterAssignment kmeans(const Matrix& vectors, int k, std::uint64_t seed, int restarts, int max_iterations) {
  const auto n = vectors.rows();
  if (k <= 0) fail(ErrorKind::invalid_argument, "bad_cluster_count", "k must be positive");
  if (k > n) {
    fail(ErrorKind::invalid_argument, "bad_cluster_count",
         "k = " + std::to_string(k) + " exceeds the item count " + std::to_string(n));
  }
  if (restarts < 1 || max_iterations < 1) {
    fail(ErrorKind::invalid_argument, "bad_cluster_params", "restarts and max_iterations must be positive");
  }
  Rng rng(seed);
  LloydResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    auto run = lloyd(vectors, k, rng, max_iterations);
    if (run.inertia < best.inertia) best = std::move(run);
  }
  ClusterAssignment out;
  out.method = ClusterMethod::kmeans;
  out.labels = std::move(best.labels);
  out.inertia = best.inertia;
  // Empty clusters are dropped from k.
  out.k = canonical_labels(out.labels);
  return out;
}

ClusterAssignment agglomerative(const Matrix& vectors, int k, Linkage linkage) {
  const auto n = static_cast<std::size_t>(vectors.rows());
  if (k <= 0 || static_cast<std::size_t>(k) > n) {
    fail(ErrorKind::invalid_argument, "bad_cluster_count", "k must be in [1, item count]");
  }
  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      dist[i][j] = dist[j][i] =
          (vectors.row(static_cast<Eigen::Index>(i)) - vectors.row(static_cast<Eigen::Index>(j))).norm();
    }
  }
  std::vector<std::vector<std::size_t>> members(n);
  for (std::size_t i = 0; i < n; ++i) members[i] = {i};
  std::vector<char> alive(n, 1);
  std::size_t clusters = n;
  while (clusters > static_cast<std::size_t>(k)) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (alive[j] && dist[i][j] < best) {
          best = dist[i][j];
          bi = i;
          bj = j;
        }
      }
    }
    // Lance-Williams update of distances to the merged cluster.
    const double ni = static_cast<double>(members[bi].size());
    const double nj = static_cast<double>(members[bj].size());
    for (std::size_t m = 0; m < n; ++m) {
      if (!alive[m] || m == bi || m == bj) continue;
      double d = 0.0;
      switch (linkage) {
        case Linkage::single: d = std::min(dist[bi][m], dist[bj][m]); break;
        case Linkage::complete: d = std::max(dist[bi][m], dist[bj][m]); break;
        case Linkage::average: d = (ni * dist[bi][m] + nj * dist[bj][m]) / (ni + nj); break;
      }
      dist[bi][m] = dist[m][bi] = d;
    }
    members[bi].insert(members[bi].end(), members[bj].begin(), members[bj].end());
    members[bj].clear();
    alive[bj] = 0;
    --clusters;
  }
  ClusterAssignment out;
  out.method = ClusterMethod::agglomerative;
  out.labels.assign(n, 0);
  int label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!alive[i]) continue;
    for (auto m : members[i]) out.labels[m] = label;
    ++label;
  }
  out.k = canonical_labels(out.labels);
  return out;
}

ClusterAssignment density_cluster(const Matrix& vectors, double eps, int min_pts) {
  if (!(eps > 0.0)) fail(ErrorKind::invalid_argument, "bad_cluster_params", "eps must be positive");
  if (min_pts < 1) fail(ErrorKind::invalid_argument, "bad_cluster_params", "min_pts must be >= 1");
  const auto n = static_cast<std::size_t>(vectors.rows());
  const double eps2 = eps * eps;
  auto neighbours = [&](std::size_t i) {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < n; ++j) {
      if ((vectors.row(static_cast<Eigen::Index>(i)) - vectors.row(static_cast<Eigen::Index>(j))).squaredNorm() <= eps2) {
        out.push_back(j);
      }
    }
    return out;
  };
  constexpr int kUnvisited = -2;
  std::vector<int> labels(n, kUnvisited);
  int cluster = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != kUnvisited) continue;
    auto seeds = neighbours(i);
    if (seeds.size() < static_cast<std::size_t>(min_pts)) {
      labels[i] = kNoise;
      continue;
    }
    labels[i] = cluster;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const std::size_t q = seeds[s];
      if (labels[q] == kNoise) labels[q] = cluster;  // border point
      if (labels[q] != kUnvisited) continue;
      labels[q] = cluster;
      auto more = neighbours(q);
      if (more.size() >= static_cast<std::size_t>(min_pts)) seeds.insert(seeds.end(), more.begin(), more.end());
    }
    ++cluster;
  }
  ClusterAssignment out;
  out.method = ClusterMethod::density;
  out.labels = std::move(labels);
  out.k = canonical_labels(out.labels);
  return out;
}

}  // namespace subsetvis::analysis
