#pragma once

// Linear stochastic systems z(t+1) = A z(t) + sigma xi(t): block partitions,
// Schur complements and covariance propagation.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "infocluster/error.hpp"

namespace infocluster {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using IndexSet = std::vector<Index>;

inline constexpr double kSymmetryTolerance = 1e-10;
inline constexpr double kPsdTolerance = 1e-10;
inline constexpr double kDefaultConditionCap = 1e12;

inline std::string format_indices(const IndexSet& s) {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << '}';
  return os.str();
}

inline IndexSet concat(const IndexSet& a, const IndexSet& b) {
  IndexSet out(a);
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

/// Spectral radius (largest eigenvalue modulus) of a square matrix.
inline double spectral_radius(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(a, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// One-step dynamics z(t+1) = A z(t) + sigma xi(t).
class LinearModel {
 public:
  LinearModel(Matrix a, double sigma, std::vector<std::string> names = {})
      : a_(std::move(a)), sigma_(sigma), names_(std::move(names)) {
    if (a_.rows() != a_.cols() || a_.rows() == 0) {
      throw Error(ErrorCode::kShapeMismatch,
                  "LinearModel: dynamics matrix must be square and non-empty");
    }
    if (!(sigma_ > 0.0) || !std::isfinite(sigma_)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "LinearModel: sigma must be positive and finite");
    }
    if (!a_.allFinite()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "LinearModel: dynamics matrix has non-finite entries");
    }
    if (names_.empty()) {
      for (Index i = 0; i < a_.rows(); ++i) {
        names_.push_back("x" + std::to_string(i + 1));
      }
    }
    if (static_cast<Index>(names_.size()) != a_.rows()) {
      throw Error(ErrorCode::kShapeMismatch,
                  "LinearModel: names length must equal the state dimension");
    }
  }

  const Matrix& a() const { return a_; }
  double sigma() const { return sigma_; }
  double noise_variance() const { return sigma_ * sigma_; }
  const std::vector<std::string>& names() const { return names_; }
  Index size() const { return a_.rows(); }

 private:
  Matrix a_;
  double sigma_;
  std::vector<std::string> names_;
};

/// Source x1, conditioning x2 (possibly empty) and target y index sets.
struct SubspacePartition {
  IndexSet x1;
  IndexSet x2;
  IndexSet y;

  /// x = (x1, x2) in that order.
  IndexSet x() const { return concat(x1, x2); }

  /// Throws kIndexOutOfRange / kOverlappingSets / kInvalidArgument.
  void validate(Index n) const {
    if (x1.empty() || y.empty()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "SubspacePartition: source and target sets must be nonempty");
    }
    std::vector<int> owner(static_cast<std::size_t>(std::max<Index>(n, 0)), -1);
    const std::array<const IndexSet*, 3> sets{&x1, &x2, &y};
    for (int s = 0; s < 3; ++s) {
      for (Index i : *sets[s]) {
        if (i < 0 || i >= n) {
          throw Error(ErrorCode::kIndexOutOfRange,
                      "SubspacePartition: index " + std::to_string(i) +
                          " out of range for dimension " + std::to_string(n));
        }
        if (owner[i] != -1) {
          throw Error(ErrorCode::kOverlappingSets,
                      "SubspacePartition: index " + std::to_string(i) +
                          " appears in more than one set");
        }
        owner[i] = s;
      }
    }
  }
};

/// Symmetric positive semidefinite N x N matrix.
class Covariance {
 public:
  /// Validates symmetry and positive semidefiniteness (within 1e-10).
  explicit Covariance(Matrix s) : s_(std::move(s)) {
    if (s_.rows() != s_.cols()) {
      throw Error(ErrorCode::kShapeMismatch, "Covariance: matrix must be square");
    }
    if (!s_.allFinite()) {
      throw Error(ErrorCode::kNumericalDomain, "Covariance: non-finite entries");
    }
    if ((s_ - s_.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance) {
      throw Error(ErrorCode::kNumericalDomain, "Covariance: matrix is not symmetric");
    }
    s_ = 0.5 * (s_ + s_.transpose());
    if (s_.size() > 0) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(s_, Eigen::EigenvaluesOnly);
      if (es.eigenvalues().minCoeff() < -kPsdTolerance) {
        throw Error(ErrorCode::kNumericalDomain,
                    "Covariance: matrix is not positive semidefinite");
      }
    }
  }

  static Covariance identity(Index n) { return Covariance(Matrix::Identity(n, n)); }

  /// For matrices that are PSD by construction (e.g. A S A' + Q with S PSD);
  /// only symmetrizes.
  static Covariance from_recursion(const Matrix& s) {
    Covariance c;
    c.s_ = 0.5 * (s + s.transpose());
    return c;
  }

  const Matrix& matrix() const { return s_; }
  Index size() const { return s_.rows(); }

 private:
  Covariance() = default;
  Matrix s_;
};

/// The nine blocks of a matrix split along (x1, x2, y).
class BlockView {
 public:
  enum Part { kX1 = 0, kX2 = 1, kY = 2 };

  BlockView(const Matrix& m, const SubspacePartition& p) : sets_{p.x1, p.x2, p.y} {
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) blocks_[r][c] = m(sets_[r], sets_[c]);
    }
  }

  const Matrix& block(Part row, Part col) const { return blocks_[row][col]; }

  /// The y rows restricted to the x = (x1, x2) columns.
  Matrix yx() const {
    Matrix out(blocks_[kY][kX1].rows(), blocks_[kY][kX1].cols() + blocks_[kY][kX2].cols());
    out << blocks_[kY][kX1], blocks_[kY][kX2];
    return out;
  }

  /// Block matrix in (x1, x2, y) order.
  Matrix reassemble() const {
    Index n = 0;
    std::array<Index, 4> offset{0, 0, 0, 0};
    for (int r = 0; r < 3; ++r) {
      offset[r + 1] = offset[r] + static_cast<Index>(sets_[r].size());
    }
    n = offset[3];
    Matrix out(n, n);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        out.block(offset[r], offset[c], blocks_[r][c].rows(), blocks_[r][c].cols()) =
            blocks_[r][c];
      }
    }
    return out;
  }

 private:
  std::array<IndexSet, 3> sets_;
  std::array<std::array<Matrix, 3>, 3> blocks_;
};

inline BlockView partition_blocks(const Matrix& a, const SubspacePartition& p) {
  if (a.rows() != a.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "partition_blocks: matrix must be square");
  }
  p.validate(a.rows());
  return BlockView(a, p);
}

namespace detail {

inline void check_index_sets(const IndexSet& keep, const IndexSet& condition, Index n) {
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (const IndexSet* s : {&keep, &condition}) {
    for (Index i : *s) {
      if (i < 0 || i >= n) {
        throw Error(ErrorCode::kIndexOutOfRange,
                    "schur_complement: index " + std::to_string(i) + " out of range");
      }
      if (seen[i]) {
        throw Error(ErrorCode::kOverlappingSets,
                    "schur_complement: index " + std::to_string(i) + " repeated");
      }
      seen[i] = 1;
    }
  }
}

// S_kk - S_kc S_cc^{-1} S_kc' without index validation.
inline Matrix schur_unchecked(const Matrix& s, const IndexSet& keep,
                              const IndexSet& condition, double condition_cap) {
  Matrix s_kk = s(keep, keep);
  if (condition.empty()) return s_kk;
  const Matrix s_cc = s(condition, condition);
  const Matrix s_kc = s(keep, condition);

  Eigen::SelfAdjointEigenSolver<Matrix> es(s_cc);
  const Vector& ev = es.eigenvalues();
  const double largest = ev.cwiseAbs().maxCoeff();
  const double smallest = ev.minCoeff();
  if (!(smallest > 0.0) || largest / smallest > condition_cap) {
    std::ostringstream os;
    os << "schur_complement: singular conditioning block " << format_indices(condition)
       << " (eigenvalue range [" << smallest << ", " << largest << "])";
    throw Error(ErrorCode::kSingular, os.str());
  }
  // V diag(1/ev) V' applied through the eigenbasis.
  const Matrix w = s_kc * es.eigenvectors();
  Matrix out = s_kk - w * ev.cwiseInverse().asDiagonal() * w.transpose();
  return 0.5 * (out + out.transpose());
}

}  // namespace detail

/// S_keep - S_keep,cond S_cond^{-1} S_keep,cond'. Throws kSingular when the
/// conditioning block's condition number exceeds `condition_cap`.
inline Matrix schur_complement(const Covariance& s, const IndexSet& keep,
                               const IndexSet& condition,
                               double condition_cap = kDefaultConditionCap) {
  detail::check_index_sets(keep, condition, s.size());
  return detail::schur_unchecked(s.matrix(), keep, condition, condition_cap);
}

/// A S A' + sigma^2 I.
inline Covariance covariance_step(const LinearModel& m, const Covariance& s) {
  if (s.size() != m.size()) {
    throw Error(ErrorCode::kShapeMismatch, "covariance_step: covariance shape mismatch");
  }
  Matrix next = m.a() * s.matrix() * m.a().transpose();
  next.diagonal().array() += m.noise_variance();
  return Covariance::from_recursion(next);
}

struct SteadyStateOptions {
  double tol = 1e-10;
  long max_iter = 100000;
};

/// Fixed point of covariance_step, reached by iterating the recursion from S0.
/// The returned matrix has Lyapunov residual ||A S A' + sigma^2 I - S||_F <= tol.
inline Covariance steady_state_covariance(const LinearModel& m, const Covariance& s0,
                                          const SteadyStateOptions& opts = {}) {
  if (s0.size() != m.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                "steady_state_covariance: initial covariance shape mismatch");
  }
  const double rho = spectral_radius(m.a());
  if (rho >= 1.0) {
    std::ostringstream os;
    os << "steady_state_covariance: spectral radius " << rho
       << " >= 1, covariance recursion does not converge";
    throw Error(ErrorCode::kUnstable, os.str());
  }
  Covariance s = s0;
  double residual = std::numeric_limits<double>::infinity();
  for (long it = 0; it < opts.max_iter; ++it) {
    Covariance next = covariance_step(m, s);
    residual = (next.matrix() - s.matrix()).norm();
    if (residual <= opts.tol) return s;
    s = std::move(next);
  }
  std::ostringstream os;
  os << "steady_state_covariance: no convergence after " << opts.max_iter
     << " iterations (last residual " << residual << ")";
  throw Error(ErrorCode::kNonConvergence, os.str());
}

}  // namespace infocluster
