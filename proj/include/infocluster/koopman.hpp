#pragma once

// Ridge-regularized one-step operator estimation from snapshot data with
// identity observables, and the frozen-variable variant.

#include <sstream>
#include <utility>
#include <vector>

#include "infocluster/statespace.hpp"
#include "infocluster/timeseries.hpp"

namespace infocluster {

/// Yp = columns 0..M-1, Yf = columns 1..M.
struct SnapshotPair {
  Matrix past;
  Matrix future;

  Index dimension() const { return past.rows(); }
  Index pairs() const { return past.cols(); }
};

inline SnapshotPair snapshots(const TimeSeries& ts) {
  const Index m = ts.steps() - 1;
  if (m < 1) {
    throw Error(ErrorCode::kInvalidArgument, "snapshots: at least two columns required");
  }
  return SnapshotPair{ts.data().leftCols(m), ts.data().rightCols(m)};
}

/// Factorization of (Yp Yp' + lambda I), reusable across right-hand sides
/// that share the same inputs Yp.
class RidgeSolver {
 public:
  RidgeSolver(const Matrix& past, double lambda) : past_(past), lambda_(lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
      throw Error(ErrorCode::kInvalidArgument, "fit_koopman: lambda must be >= 0");
    }
    if (past.cols() < 1) {
      throw Error(ErrorCode::kInvalidArgument, "fit_koopman: at least one snapshot pair");
    }
    if (!past.allFinite()) {
      throw Error(ErrorCode::kNumericalDomain, "fit_koopman: non-finite snapshot data");
    }
    Matrix gram = past * past.transpose();
    gram.diagonal().array() += lambda;
    llt_.compute(gram);
    if (llt_.info() != Eigen::Success || !(llt_.rcond() > 1e-14)) {
      std::ostringstream os;
      os << "fit_koopman: Yp Yp' + lambda I is singular or numerically rank deficient"
         << " (lambda = " << lambda << ")";
      if (lambda == 0.0) os << "; use lambda > 0";
      throw Error(ErrorCode::kSingular, os.str());
    }
  }

  /// K = Yf Yp' (Yp Yp' + lambda I)^{-1}.
  Matrix solve(const Matrix& future) const {
    if (future.rows() != past_.rows() || future.cols() != past_.cols()) {
      throw Error(ErrorCode::kShapeMismatch, "fit_koopman: Yp and Yf shapes differ");
    }
    if (!future.allFinite()) {
      throw Error(ErrorCode::kNumericalDomain, "fit_koopman: non-finite snapshot data");
    }
    // Gram is symmetric, so K' = Gram^{-1} Yp Yf'.
    return llt_.solve(past_ * future.transpose()).transpose();
  }

  double lambda() const { return lambda_; }

 private:
  Matrix past_;
  double lambda_;
  Eigen::LLT<Matrix> llt_;
};

/// Minimizer of ||K Yp - Yf||_F^2 + lambda ||K||_F^2.
inline Matrix fit_koopman(const SnapshotPair& sp, double lambda) {
  return RidgeSolver(sp.past, lambda).solve(sp.future);
}

/// Inputs z_k and targets that keep the frozen coordinates at z_k while the
/// free coordinates advance to z_{k+1}.
struct FrozenDataset {
  Matrix inputs;
  Matrix targets;
  IndexSet frozen;
};

inline void check_frozen_set(const IndexSet& frozen, Index n, const char* who) {
  if (frozen.empty()) {
    throw Error(ErrorCode::kInvalidArgument, std::string(who) + ": frozen set is empty");
  }
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (Index i : frozen) {
    if (i < 0 || i >= n) {
      throw Error(ErrorCode::kIndexOutOfRange,
                  std::string(who) + ": frozen index " + std::to_string(i) + " out of range");
    }
    if (seen[i]) {
      throw Error(ErrorCode::kOverlappingSets,
                  std::string(who) + ": frozen index " + std::to_string(i) + " repeated");
    }
    seen[i] = 1;
  }
  if (static_cast<Index>(frozen.size()) == n) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(who) + ": cannot freeze every variable");
  }
}

inline FrozenDataset freeze_dataset(const TimeSeries& ts, const IndexSet& frozen) {
  check_frozen_set(frozen, ts.variables(), "freeze_dataset");
  SnapshotPair sp = snapshots(ts);
  for (Index i : frozen) sp.future.row(i) = sp.past.row(i);
  return FrozenDataset{std::move(sp.past), std::move(sp.future), frozen};
}

/// How the frozen coordinates' own rows of the frozen-dynamics matrix are set.
enum class FrozenRows {
  kFitted,          ///< Estimated from the frozen dataset like every other row.
  kClampedIdentity  ///< Overwritten with the exact identity rows.
};

namespace detail {

inline Matrix frozen_fit(const RidgeSolver& solver, const Matrix& past, const Matrix& future,
                         const IndexSet& frozen, FrozenRows rows) {
  Matrix targets = future;
  for (Index i : frozen) targets.row(i) = past.row(i);
  Matrix k = solver.solve(targets);
  if (rows == FrozenRows::kClampedIdentity) {
    for (Index i : frozen) {
      k.row(i).setZero();
      k(i, i) = 1.0;
    }
  }
  return k;
}

}  // namespace detail

/// Frozen-dynamics operator: fit_koopman on (Z, Z_frozen).
inline Matrix fit_frozen(const TimeSeries& ts, const IndexSet& frozen, double lambda,
                         FrozenRows rows = FrozenRows::kFitted) {
  check_frozen_set(frozen, ts.variables(), "fit_frozen");
  const SnapshotPair sp = snapshots(ts);
  const RidgeSolver solver(sp.past, lambda);
  return detail::frozen_fit(solver, sp.past, sp.future, frozen, rows);
}

}  // namespace infocluster
