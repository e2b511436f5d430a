#pragma once

// Partitioning of influence graphs: spectral embedding, k-means (Lloyd with
// k-means++ seeding) and average-linkage agglomerative clustering.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "infocluster/influence.hpp"
#include "infocluster/infotransfer.hpp"
#include "json.hpp"

namespace infocluster {

struct ClusterLabels {
  std::vector<int> labels;
  int k = 0;
  std::string method;
  std::uint64_t seed = 0;
  /// Within-cluster sum of squares (k-means based methods only).
  double wcss = 0.0;
  /// Set when fewer than the requested number of distinct clusters exist.
  bool degenerate = false;
  /// WCSS after every assignment step of the selected k-means run.
  std::vector<double> wcss_history;
};

/// Renumbers cluster ids by order of first appearance (first node gets 0).
inline std::vector<int> canonical_labels(const std::vector<int>& labels) {
  std::map<int, int> remap;
  std::vector<int> out;
  out.reserve(labels.size());
  for (int l : labels) {
    auto it = remap.find(l);
    if (it == remap.end()) it = remap.emplace(l, static_cast<int>(remap.size())).first;
    out.push_back(it->second);
  }
  return out;
}

/// W(i, j) = (|T(i, j)| + |T(j, i)|) / 2 with a zero diagonal.
inline Matrix symmetrize_affinity(const Matrix& t) {
  if (t.rows() != t.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "symmetrize_affinity: matrix must be square");
  }
  Matrix w(t.rows(), t.cols());
  for (Index i = 0; i < t.rows(); ++i) {
    for (Index j = 0; j < t.cols(); ++j) {
      w(i, j) = i == j ? 0.0 : 0.5 * (std::abs(t(i, j)) + std::abs(t(j, i)));
    }
  }
  return w;
}

inline Matrix symmetrize_affinity(const TransferMatrix& tm) {
  if (!tm.all_ok()) {
    throw Error(ErrorCode::kNumericalDomain,
                "symmetrize_affinity: transfer matrix has missing entries");
  }
  Matrix t = tm.values;
  t.diagonal().setZero();
  return symmetrize_affinity(t);
}

/// Uses the thresholded transfers behind the graph's edges.
inline Matrix symmetrize_affinity(const InfluenceGraph& g) {
  return symmetrize_affinity(g.transfer);
}

/// d_sym(i, j) = min(dist(i, j), dist(j, i)); diagonal 0.
inline Matrix symmetrize_distance(const InfluenceGraph& g) {
  Matrix d(g.size(), g.size());
  for (Index i = 0; i < g.size(); ++i) {
    for (Index j = 0; j < g.size(); ++j) {
      d(i, j) = i == j ? 0.0 : std::min(g.dist(i, j), g.dist(j, i));
    }
  }
  return d;
}

namespace detail {

inline double squared_distance(const Matrix& points, Index row, const Matrix& centers,
                               Index c) {
  return (points.row(row) - centers.row(c)).squaredNorm();
}

// Nearest center; ties go to the lowest index.
inline std::pair<int, double> nearest_center(const Matrix& points, Index row,
                                             const Matrix& centers) {
  int best = 0;
  double best_d = squared_distance(points, row, centers, 0);
  for (Index c = 1; c < centers.rows(); ++c) {
    const double d = squared_distance(points, row, centers, c);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return {best, best_d};
}

inline Matrix kmeanspp_init(const Matrix& points, int k, std::mt19937_64& rng) {
  const Index n = points.rows();
  Matrix centers(k, points.cols());
  std::uniform_int_distribution<Index> pick(0, n - 1);
  centers.row(0) = points.row(pick(rng));
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (Index i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int j = 0; j < c; ++j) best = std::min(best, squared_distance(points, i, centers, j));
      d2[i] = best;
      total += best;
    }
    Index chosen = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      chosen = n - 1;
      for (Index i = 0; i < n; ++i) {
        target -= d2[i];
        if (target < 0.0 && d2[i] > 0.0) {
          chosen = i;
          break;
        }
      }
      while (d2[chosen] == 0.0 && chosen > 0) --chosen;
    } else {
      chosen = pick(rng);
    }
    centers.row(c) = points.row(chosen);
  }
  return centers;
}

struct LloydRun {
  std::vector<int> labels;
  double wcss = 0.0;
  std::vector<double> history;
};

inline LloydRun lloyd(const Matrix& points, int k, std::mt19937_64& rng, int max_iter = 300) {
  const Index n = points.rows();
  Matrix centers = kmeanspp_init(points, k, rng);
  LloydRun run;
  run.labels.assign(static_cast<std::size_t>(n), -1);
  std::vector<double> cost(static_cast<std::size_t>(n));
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (Index i = 0; i < n; ++i) {
      const auto [c, d] = nearest_center(points, i, centers);
      if (run.labels[i] != c) changed = true;
      run.labels[i] = c;
      cost[i] = d;
    }
    // An empty cluster takes the point farthest from its center; this can
    // only lower the objective.
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (int l : run.labels) ++counts[l];
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      Index far = -1;
      for (Index i = 0; i < n; ++i) {
        if (counts[run.labels[i]] > 1 && cost[i] > 0.0 && (far < 0 || cost[i] > cost[far])) {
          far = i;
        }
      }
      if (far < 0) continue;  // fewer distinct points than clusters
      --counts[run.labels[far]];
      run.labels[far] = c;
      counts[c] = 1;
      cost[far] = 0.0;
      centers.row(c) = points.row(far);
      changed = true;
    }
    double wcss = 0.0;
    for (double v : cost) wcss += v;
    run.history.push_back(wcss);
    if (!changed && it > 0) break;
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      Vector mean = Vector::Zero(points.cols());
      for (Index i = 0; i < n; ++i) {
        if (run.labels[i] == c) mean += points.row(i).transpose();
      }
      centers.row(c) = (mean / static_cast<double>(counts[c])).transpose();
    }
  }
  run.wcss = 0.0;
  for (Index i = 0; i < n; ++i) run.wcss += squared_distance(points, i, centers, run.labels[i]);
  return run;
}

}  // namespace detail

/// Within-cluster sum of squares of a labelling, centroids from the members.
inline double within_cluster_ss(const Matrix& points, const std::vector<int>& labels) {
  std::map<int, std::vector<Index>> members;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    members[labels[i]].push_back(static_cast<Index>(i));
  }
  double total = 0.0;
  for (const auto& [label, idx] : members) {
    Vector mean = Vector::Zero(points.cols());
    for (Index i : idx) mean += points.row(i).transpose();
    mean /= static_cast<double>(idx.size());
    for (Index i : idx) total += (points.row(i).transpose() - mean).squaredNorm();
  }
  return total;
}

/// Lloyd's iteration from k-means++ seeds; the best of `restarts` runs by WCSS
/// (ties to the earliest run). Run r uses seed + r.
inline ClusterLabels kmeans_cluster(const Matrix& points, int k, std::uint64_t seed,
                                    int restarts = 10) {
  const Index n = points.rows();
  if (k < 1 || k > n) {
    throw Error(ErrorCode::kInvalidArgument,
                "kmeans_cluster: k must be in [1, number of points]");
  }
  if (restarts < 1) {
    throw Error(ErrorCode::kInvalidArgument, "kmeans_cluster: restarts must be >= 1");
  }
  if (!points.allFinite()) {
    throw Error(ErrorCode::kNumericalDomain, "kmeans_cluster: non-finite coordinates");
  }
  detail::LloydRun best;
  bool have = false;
  for (int r = 0; r < restarts; ++r) {
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(r));
    detail::LloydRun run = detail::lloyd(points, k, rng);
    if (!have || run.wcss < best.wcss) {
      best = std::move(run);
      have = true;
    }
  }
  ClusterLabels out;
  out.labels = canonical_labels(best.labels);
  out.k = 1 + *std::max_element(out.labels.begin(), out.labels.end());
  out.degenerate = out.k < k;
  out.method = "kmeans";
  out.seed = seed;
  out.wcss = best.wcss;
  out.wcss_history = std::move(best.history);
  return out;
}

inline constexpr double kDegreeFloor = 1e-12;

/// First k eigenvectors (ascending eigenvalue) of I - D^{-1/2} W D^{-1/2}, as
/// a G x k matrix; rows optionally scaled to unit length.
inline Matrix spectral_embedding(const Matrix& w, int k, bool row_normalize = true) {
  const Index n = w.rows();
  if (w.rows() != w.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "spectral_embedding: affinity must be square");
  }
  if (k < 1 || k > n) {
    throw Error(ErrorCode::kInvalidArgument, "spectral_embedding: k must be in [1, G]");
  }
  if ((w - w.transpose()).cwiseAbs().maxCoeff() > 1e-12 || w.minCoeff() < 0.0) {
    throw Error(ErrorCode::kInvalidArgument,
                "spectral_embedding: affinity must be symmetric and nonnegative");
  }
  if (w.cwiseAbs().maxCoeff() == 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "spectral_embedding: affinity is all zero");
  }
  Matrix a = w;
  a.diagonal().setZero();
  const Vector inv_sqrt = a.rowwise().sum().cwiseMax(kDegreeFloor).cwiseSqrt().cwiseInverse();
  Matrix lap = -(inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal());
  lap.diagonal().array() += 1.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (lap + lap.transpose()));
  Matrix emb = es.eigenvectors().leftCols(k);
  if (row_normalize) {
    for (Index i = 0; i < n; ++i) {
      const double norm = emb.row(i).norm();
      if (norm > 0.0) emb.row(i) /= norm;
    }
  }
  return emb;
}

/// Normalized-Laplacian spectral clustering: row-normalized embedding of the
/// k smallest eigenvectors, then kmeans_cluster.
inline ClusterLabels spectral_clustering(const Matrix& w, int k, std::uint64_t seed,
                                         int restarts = 10) {
  if (k < 2 || k > w.rows()) {
    throw Error(ErrorCode::kInvalidArgument, "spectral_clustering: k must be in [2, G]");
  }
  ClusterLabels out = kmeans_cluster(spectral_embedding(w, k, true), k, seed, restarts);
  out.method = "spectral";
  return out;
}

namespace detail {

// Shortest decimal text that reads back to the same double.
inline std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

struct Merge {
  int left = 0;
  int right = 0;
  double height = 0.0;
  int id = 0;
  int size = 0;
};

/// Binary merge tree; leaves have ids 0..G-1 and merge i creates id G+i.
struct Dendrogram {
  std::vector<std::string> leaves;
  std::vector<Merge> merges;
  std::string linkage = "average";

  /// Flat labels from stopping before the last k-1 merges.
  std::vector<int> cut(int k) const {
    const int g = static_cast<int>(leaves.size());
    if (k < 1 || k > g) {
      throw Error(ErrorCode::kInvalidArgument, "Dendrogram::cut: k must be in [1, G]");
    }
    std::vector<int> parent(static_cast<std::size_t>(2 * g), -1);
    for (int m = 0; m < g - k; ++m) {
      parent[merges[m].left] = merges[m].id;
      parent[merges[m].right] = merges[m].id;
    }
    std::vector<int> root(static_cast<std::size_t>(g));
    for (int i = 0; i < g; ++i) {
      int r = i;
      while (parent[r] >= 0) r = parent[r];
      root[i] = r;
    }
    return canonical_labels(root);
  }

  /// Leaf ids under a node.
  std::vector<int> members(int id) const {
    const int g = static_cast<int>(leaves.size());
    if (id < g) return {id};
    const Merge& m = merges[static_cast<std::size_t>(id - g)];
    std::vector<int> out = members(m.left);
    const std::vector<int> right = members(m.right);
    out.insert(out.end(), right.begin(), right.end());
    return out;
  }

  /// Branch length of each child is the parent's height minus its own
  /// (leaves sit at height 0).
  std::string to_newick() const {
    const int g = static_cast<int>(leaves.size());
    auto quote = [](const std::string& s) {
      const bool plain = std::none_of(s.begin(), s.end(), [](char c) {
        return c == ' ' || c == '(' || c == ')' || c == ',' || c == ':' || c == ';' ||
               c == '[' || c == ']' || c == '\'';
      });
      if (plain) return s;
      std::string out = "'";
      for (char c : s) {
        if (c == '\'') out += '\'';
        out += c;
      }
      return out + "'";
    };
    auto height = [&](int id) {
      return id < g ? 0.0 : merges[static_cast<std::size_t>(id - g)].height;
    };
    std::function<std::string(int)> render = [&](int id) -> std::string {
      if (id < g) return quote(leaves[static_cast<std::size_t>(id)]);
      const Merge& m = merges[static_cast<std::size_t>(id - g)];
      return "(" + render(m.left) + ":" + detail::shortest(m.height - height(m.left)) + "," +
             render(m.right) + ":" + detail::shortest(m.height - height(m.right)) + ")";
    };
    if (g == 1) return quote(leaves.front()) + ";";
    return render(merges.back().id) + ";";
  }

  nlohmann::json to_json() const {
    nlohmann::json ms = nlohmann::json::array();
    for (const auto& m : merges) {
      ms.push_back({{"left", m.left},
                    {"right", m.right},
                    {"height", m.height},
                    {"id", m.id},
                    {"size", m.size}});
    }
    return {{"kind", "dendrogram"}, {"linkage", linkage}, {"leaves", leaves}, {"merges", ms}};
  }
};

enum class Linkage { kAverage };

/// Agglomerative clustering of a symmetric distance matrix. Each step merges
/// the pair of active clusters with the smallest average inter-cluster
/// distance; ties go to the lowest (left, right) id pair.
inline Dendrogram hierarchical_cluster(const Matrix& d, const std::vector<std::string>& leaves,
                                       Linkage linkage = Linkage::kAverage) {
  (void)linkage;
  const Index g = d.rows();
  if (d.rows() != d.cols() || g < 1) {
    throw Error(ErrorCode::kShapeMismatch, "hierarchical_cluster: distances must be square");
  }
  if (static_cast<Index>(leaves.size()) != g) {
    throw Error(ErrorCode::kShapeMismatch, "hierarchical_cluster: leaf labels mismatch");
  }
  if (!d.allFinite() || d.minCoeff() < 0.0 ||
      (d - d.transpose()).cwiseAbs().maxCoeff() > 0.0 || d.diagonal().cwiseAbs().maxCoeff() > 0.0) {
    throw Error(ErrorCode::kInvalidArgument,
                "hierarchical_cluster: distances must be finite, symmetric, nonnegative with "
                "zero diagonal");
  }
  Dendrogram out;
  out.leaves = leaves;
  // Slot s holds the active cluster with id ids[s]; slots are kept sorted by id.
  std::vector<int> ids(static_cast<std::size_t>(g));
  std::vector<int> sizes(static_cast<std::size_t>(g), 1);
  for (Index i = 0; i < g; ++i) ids[i] = static_cast<int>(i);
  Matrix dist = d;
  int next_id = static_cast<int>(g);
  while (ids.size() > 1) {
    const auto active = static_cast<Index>(ids.size());
    Index bi = 0, bj = 1;
    double best = dist(0, 1);
    for (Index i = 0; i < active; ++i) {
      for (Index j = i + 1; j < active; ++j) {
        if (dist(i, j) < best) {
          best = dist(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    const double ni = sizes[bi];
    const double nj = sizes[bj];
    out.merges.push_back(Merge{ids[bi], ids[bj], best, next_id, sizes[bi] + sizes[bj]});
    // Lance-Williams update for average linkage, stored in slot bi.
    for (Index k = 0; k < active; ++k) {
      if (k == bi || k == bj) continue;
      const double v = (ni * dist(bi, k) + nj * dist(bj, k)) / (ni + nj);
      dist(bi, k) = v;
      dist(k, bi) = v;
    }
    ids[bi] = next_id++;
    sizes[bi] += sizes[bj];
    // Drop slot bj, then move the new cluster (largest id) to the end.
    std::vector<Index> keep;
    for (Index k = 0; k < active; ++k) {
      if (k != bj && k != bi) keep.push_back(k);
    }
    keep.push_back(bi);
    Matrix next = dist(keep, keep);
    std::vector<int> next_ids, next_sizes;
    for (Index k : keep) {
      next_ids.push_back(ids[k]);
      next_sizes.push_back(sizes[k]);
    }
    dist = std::move(next);
    ids = std::move(next_ids);
    sizes = std::move(next_sizes);
  }
  return out;
}

/// Adjusted Rand index between two labellings of the same nodes.
inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kShapeMismatch, "adjusted_rand_index: label lengths differ");
  }
  const double n = static_cast<double>(a.size());
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1;
    ra[a[i]] += 1;
    rb[b[i]] += 1;
  }
  auto c2 = [](double x) { return x * (x - 1) / 2; };
  double index = 0, sa = 0, sb = 0;
  for (const auto& [key, v] : joint) index += c2(v);
  for (const auto& [key, v] : ra) sa += c2(v);
  for (const auto& [key, v] : rb) sb += c2(v);
  const double expected = sa * sb / c2(n);
  const double max_index = 0.5 * (sa + sb);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

/// CSV with header node,label.
inline std::string labels_csv(const std::vector<std::string>& nodes,
                              const ClusterLabels& labels) {
  std::ostringstream os;
  os << "node,label\n";
  for (std::size_t i = 0; i < nodes.size(); ++i) os << nodes[i] << ',' << labels.labels[i] << '\n';
  return os.str();
}

}  // namespace infocluster
