#pragma once

// Independent reference computations used only by the tests. None of these
// call into the library's numerical routines.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Idx = std::vector<Eigen::Index>;

inline Matrix select(const Matrix& m, const Idx& r, const Idx& c) {
  Matrix out(r.size(), c.size());
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t j = 0; j < c.size(); ++j) out(i, j) = m(r[i], c[j]);
  return out;
}

// Leibniz-free cofactor expansion; fine for the small sizes used here.
inline double naive_det(const Matrix& m) {
  const auto n = m.rows();
  if (n == 1) return m(0, 0);
  if (n == 2) return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  double det = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    Matrix minor(n - 1, n - 1);
    for (Eigen::Index r = 1; r < n; ++r)
      for (Eigen::Index c = 0, cc = 0; c < n; ++c)
        if (c != j) minor(r - 1, cc++) = m(r, c);
    det += (j % 2 ? -1.0 : 1.0) * m(0, j) * naive_det(minor);
  }
  return det;
}

// Schur complement of the `cond` block via the full inverse:
// S_keep|cond = ((S^-1)_keep,keep)^-1 over the joint index set keep + cond.
inline Matrix schur_via_inverse(const Matrix& s, const Idx& keep, const Idx& cond) {
  Idx all = keep;
  all.insert(all.end(), cond.begin(), cond.end());
  const Matrix joint = select(s, all, all);
  const Matrix inv = joint.inverse();
  Idx k(keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) k[i] = static_cast<Eigen::Index>(i);
  return select(inv, k, k).inverse();
}

// Steady-state covariance from the vectorized discrete Lyapunov equation
// (I - A kron A) vec(S) = vec(q I).
inline Matrix lyapunov_kron(const Matrix& a, double q) {
  const auto n = a.rows();
  Matrix kron(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) kron.block(i * n, j * n, n, n) = a(i, j) * a;
  const Matrix lhs = Matrix::Identity(n * n, n * n) - kron;
  Vector rhs = Vector::Zero(n * n);
  for (Eigen::Index i = 0; i < n; ++i) rhs(i * n + i) = q;
  const Vector v = lhs.fullPivLu().solve(rhs);
  Matrix s(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) s(i, j) = v(j * n + i);
  return 0.5 * (s + s.transpose());
}

// Minimum within-cluster sum of squares over all 2-partitions.
inline double best_bipartition_wcss(const Matrix& pts) {
  const auto n = pts.rows();
  auto cost = [&](const std::vector<int>& lab) {
    double total = 0.0;
    for (int c = 0; c < 2; ++c) {
      Vector mean = Vector::Zero(pts.cols());
      int cnt = 0;
      for (Eigen::Index i = 0; i < n; ++i)
        if (lab[i] == c) mean += pts.row(i).transpose(), ++cnt;
      if (cnt == 0) return std::numeric_limits<double>::infinity();
      mean /= cnt;
      for (Eigen::Index i = 0; i < n; ++i)
        if (lab[i] == c) total += (pts.row(i).transpose() - mean).squaredNorm();
    }
    return total;
  };
  double best = std::numeric_limits<double>::infinity();
  for (long mask = 1; mask < (1L << (n - 1)); ++mask) {
    std::vector<int> lab(n, 0);
    for (Eigen::Index i = 0; i < n - 1; ++i) lab[i] = (mask >> i) & 1;
    best = std::min(best, cost(lab));
  }
  return best;
}

struct NaiveMerge {
  int left;
  int right;
  double height;
};

// Average linkage recomputed from member lists at every step; clusters are
// tracked by id (leaves 0..G-1, merge i -> G+i) and ties go to the lowest
// (left, right) id pair.
inline std::vector<NaiveMerge> naive_average_linkage(const Matrix& d) {
  const int g = static_cast<int>(d.rows());
  std::vector<std::pair<int, std::vector<int>>> active;
  for (int i = 0; i < g; ++i) active.push_back({i, {i}});
  std::vector<NaiveMerge> out;
  int next = g;
  while (active.size() > 1) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < active.size(); ++i)
      for (std::size_t j = 0; j < active.size(); ++j) {
        if (active[i].first >= active[j].first) continue;
        double sum = 0.0;
        for (int a : active[i].second)
          for (int b : active[j].second) sum += d(a, b);
        const double avg =
            sum / static_cast<double>(active[i].second.size() * active[j].second.size());
        const bool better =
            avg < best ||
            (avg == best && std::make_pair(active[i].first, active[j].first) <
                                std::make_pair(active[bi].first, active[bj].first));
        if (better) best = avg, bi = i, bj = j;
      }
    out.push_back({active[bi].first, active[bj].first, best});
    std::vector<int> members = active[bi].second;
    members.insert(members.end(), active[bj].second.begin(), active[bj].second.end());
    active.erase(active.begin() + static_cast<long>(std::max(bi, bj)));
    active.erase(active.begin() + static_cast<long>(std::min(bi, bj)));
    active.push_back({next++, members});
  }
  return out;
}

// 0.5 log det of the residual covariance of y_next regressed on y_now, from
// samples stored one per column.
inline double sample_conditional_half_logdet(const Matrix& y_next, const Matrix& y_now) {
  const double n = static_cast<double>(y_next.cols());
  const Matrix syy = y_now * y_now.transpose() / n;
  const Matrix sny = y_next * y_now.transpose() / n;
  const Matrix snn = y_next * y_next.transpose() / n;
  const Matrix resid = snn - sny * syy.inverse() * sny.transpose();
  return 0.5 * std::log(naive_det(resid));
}

}  // namespace oracle
