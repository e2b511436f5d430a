#pragma once

// Information transfer between subspaces of a linear Gaussian system, both in
// closed form for a known model and from time-series data through a fitted
// operator and its frozen-source counterpart.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "infocluster/koopman.hpp"
#include "infocluster/statespace.hpp"
#include "infocluster/timeseries.hpp"
#include "json.hpp"

namespace infocluster {

/// Transfer in nats for the window t -> t+1; `step` is empty for the
/// steady-state limit.
struct TransferValue {
  double value = 0.0;
  std::optional<long> step;
  long iterations = 0;

  bool steady() const { return !step.has_value(); }
};

/// 1/2 log det(Ayx S Ayx' + noise_var I), through a Cholesky factorization.
inline double conditional_entropy_term(const Matrix& ayx, const Matrix& sschur,
                                       double noise_var) {
  if (!(noise_var > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "conditional_entropy_term: noise_var must be positive");
  }
  if (sschur.rows() != sschur.cols() || ayx.cols() != sschur.rows()) {
    throw Error(ErrorCode::kShapeMismatch,
                "conditional_entropy_term: Ayx columns must match the Schur block");
  }
  Matrix m = ayx * sschur * ayx.transpose();
  m = 0.5 * (m + m.transpose());
  m.diagonal().array() += noise_var;
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kNumericalDomain,
                "conditional_entropy_term: determinant argument is not positive definite");
  }
  return llt.matrixLLT().diagonal().array().log().sum();
}

namespace detail {

// Closed-form transfer at covariance s; the partition is assumed valid.
inline double linear_transfer_value(const Matrix& a, double noise_var,
                                    const SubspacePartition& p, const Matrix& s,
                                    double cap) {
  const IndexSet x = p.x();
  const Matrix s_x = schur_unchecked(s, x, p.y, cap);
  const double full = conditional_entropy_term(a(p.y, x), s_x, noise_var);
  double frozen = 0.0;
  if (p.x2.empty()) {
    frozen = 0.5 * static_cast<double>(p.y.size()) * std::log(noise_var);
  } else {
    const Matrix s_x2 = schur_unchecked(s, p.x2, p.y, cap);
    frozen = conditional_entropy_term(a(p.y, p.x2), s_x2, noise_var);
  }
  return full - frozen;
}

}  // namespace detail

/// Closed-form one-step transfer from x1 to y given x2, evaluated at the
/// state covariance S (= Sigma(t) for the window t -> t+1).
inline TransferValue linear_transfer(const LinearModel& m, const SubspacePartition& p,
                                     const Covariance& s, long step = 0,
                                     double condition_cap = kDefaultConditionCap) {
  if (s.size() != m.size()) {
    throw Error(ErrorCode::kShapeMismatch, "linear_transfer: covariance shape mismatch");
  }
  p.validate(m.size());
  return TransferValue{
      detail::linear_transfer_value(m.a(), m.noise_variance(), p, s.matrix(), condition_cap),
      step, 0};
}

struct SteadyTransferOptions {
  double tol = 1e-8;
  long max_iter = 10000;
  double condition_cap = kDefaultConditionCap;
};

/// Iterates the covariance recursion from S0, evaluating the transfer at each
/// step, until successive values differ by less than tol.
inline TransferValue steady_state_transfer(const LinearModel& m, const SubspacePartition& p,
                                           const Covariance& s0,
                                           const SteadyTransferOptions& opts = {}) {
  if (s0.size() != m.size()) {
    throw Error(ErrorCode::kShapeMismatch, "steady_state_transfer: S0 shape mismatch");
  }
  p.validate(m.size());
  const double rho = spectral_radius(m.a());
  if (rho >= 1.0) {
    std::ostringstream os;
    os << "steady_state_transfer: spectral radius " << rho << " >= 1";
    throw Error(ErrorCode::kUnstable, os.str());
  }
  Covariance s = s0;
  double prev = detail::linear_transfer_value(m.a(), m.noise_variance(), p, s.matrix(),
                                              opts.condition_cap);
  double value = prev;
  for (long it = 1; it <= opts.max_iter; ++it) {
    s = covariance_step(m, s);
    value = detail::linear_transfer_value(m.a(), m.noise_variance(), p, s.matrix(),
                                          opts.condition_cap);
    if (std::abs(value - prev) < opts.tol) return TransferValue{value, std::nullopt, it};
    prev = value;
  }
  std::ostringstream os;
  os.precision(17);
  os << "steady_state_transfer: no convergence within " << opts.max_iter
     << " iterations (last iterates " << prev << ", " << value << ")";
  throw Error(ErrorCode::kNonConvergence, os.str());
}

/// Covariance used for the frozen-source conditional entropy.
enum class FrozenCovariance {
  /// Sigma(t) of the fitted system with the frozen coordinates held fixed
  /// (zero variance and zero covariance with every other coordinate).
  kHeld,
  /// Separate recursion Sigma'(t) = A_frozen Sigma'(t-1) A_frozen' + noise I,
  /// stopped when the non-frozen covariance has converged.
  kPropagated,
};

struct TransferOptions {
  double lambda = 0.05;
  /// Noise variance in the covariance recursion and the entropy terms;
  /// defaults to lambda.
  std::optional<double> noise_var;
  /// Initial covariance; identity when absent.
  std::optional<Matrix> s0;
  double tol = 1e-8;
  long max_iter = 10000;
  /// Convergence threshold on ||Sigma(t+1) - Sigma(t)||_F used by kPropagated.
  double covariance_tol = 1e-10;
  FrozenCovariance frozen_covariance = FrozenCovariance::kHeld;
  FrozenRows frozen_rows = FrozenRows::kFitted;
  double condition_cap = kDefaultConditionCap;

  double effective_noise_var() const {
    const double v = noise_var.value_or(lambda);
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "transfer: noise variance must be positive (set noise_var when lambda = 0)");
    }
    return v;
  }
};

inline std::string to_string(FrozenCovariance f) {
  return f == FrozenCovariance::kHeld ? "held" : "propagated";
}

namespace detail {

// One ordered (source, target) evaluation inside the data-driven recursion.
struct PairTask {
  SubspacePartition partition;
  IndexSet x;
  Matrix full_yx;    // rows y, columns x of the fitted operator
  Matrix frozen;     // frozen-dynamics operator (whole matrix)
  Matrix frozen_yx;  // rows y, columns x of the frozen operator
  Matrix frozen_cov; // kPropagated only
  double prev = 0.0;
  double value = 0.0;
  bool done = false;
  long iterations = 0;
  std::string error;
  ErrorCode error_code = ErrorCode::kNonConvergence;
};

inline PairTask make_pair_task(const SubspacePartition& p, const Matrix& fitted,
                               Matrix frozen, const Matrix& s0) {
  PairTask t;
  t.partition = p;
  t.x = p.x();
  t.full_yx = fitted(p.y, t.x);
  t.frozen_yx = frozen(p.y, t.x);
  t.frozen = std::move(frozen);
  t.frozen_cov = s0;
  return t;
}

inline double held_frozen_entropy(const PairTask& t, const Matrix& s_x_given_y,
                                  double noise_var) {
  // x1 leads x and holding it fixed leaves Sigma_yy untouched, so the held
  // conditional covariance is s_x_given_y with the x1 rows and columns zeroed.
  Matrix held = s_x_given_y;
  const Index n1 = static_cast<Index>(t.partition.x1.size());
  held.topRows(n1).setZero();
  held.leftCols(n1).setZero();
  return conditional_entropy_term(t.frozen_yx, held, noise_var);
}

inline double evaluate_pair(const PairTask& t, const Matrix& s, double noise_var,
                            FrozenCovariance mode, double cap) {
  const Matrix s_x = schur_unchecked(s, t.x, t.partition.y, cap);
  const double h_full = conditional_entropy_term(t.full_yx, s_x, noise_var);
  double h_frozen = 0.0;
  if (mode == FrozenCovariance::kHeld) {
    h_frozen = held_frozen_entropy(t, s_x, noise_var);
  } else {
    const Matrix f_x = schur_unchecked(t.frozen_cov, t.x, t.partition.y, cap);
    h_frozen = conditional_entropy_term(t.frozen_yx, f_x, noise_var);
  }
  return h_full - h_frozen;
}

// Runs the shared covariance recursion of the fitted operator and evaluates
// every unfinished task at each step.
inline void run_pair_tasks(std::vector<PairTask>& tasks, const Matrix& fitted,
                           const TransferOptions& opts) {
  const double nv = opts.effective_noise_var();
  const double rho = spectral_radius(fitted);
  if (rho >= 1.0) {
    std::ostringstream os;
    os << "fitted operator has spectral radius " << rho
       << " >= 1; steady-state transfer is undefined";
    for (auto& t : tasks) {
      t.error = os.str();
      t.error_code = ErrorCode::kUnstable;
    }
    return;
  }
  const Index n = fitted.rows();
  Matrix s = opts.s0.value_or(Matrix::Identity(n, n));

  auto step_cov = [nv](const Matrix& a, const Matrix& cov) {
    Matrix next = a * cov * a.transpose();
    next = 0.5 * (next + next.transpose());
    next.diagonal().array() += nv;
    return next;
  };
  auto eval = [&](PairTask& t) {
    try {
      t.value = evaluate_pair(t, s, nv, opts.frozen_covariance, opts.condition_cap);
    } catch (const Error& e) {
      t.error = e.what();
      t.error_code = e.code();
      t.done = true;
    }
  };

  std::size_t remaining = tasks.size();
  for (auto& t : tasks) {
    eval(t);
    t.prev = t.value;
    if (t.done) --remaining;
  }
  for (long it = 1; it <= opts.max_iter && remaining > 0; ++it) {
    Matrix next = step_cov(fitted, s);
    const bool cov_converged = (next - s).norm() <= opts.covariance_tol;
    s = std::move(next);
    for (auto& t : tasks) {
      if (t.done) continue;
      if (opts.frozen_covariance == FrozenCovariance::kPropagated) {
        t.frozen_cov = step_cov(t.frozen, t.frozen_cov);
      }
      eval(t);
      if (t.done) {
        --remaining;
        continue;
      }
      t.iterations = it;
      const bool stop = std::abs(t.value - t.prev) < opts.tol ||
                        (opts.frozen_covariance == FrozenCovariance::kPropagated &&
                         cov_converged);
      if (stop) {
        t.done = true;
        --remaining;
      } else {
        t.prev = t.value;
      }
    }
  }
  for (auto& t : tasks) {
    if (!t.done) {
      std::ostringstream os;
      os.precision(17);
      os << "no convergence within " << opts.max_iter << " iterations (last iterates "
         << t.prev << ", " << t.value << ")";
      t.error = os.str();
    }
  }
}

inline void check_s0(const TransferOptions& opts, Index n) {
  if (opts.s0) {
    if (opts.s0->rows() != n || opts.s0->cols() != n) {
      throw Error(ErrorCode::kShapeMismatch, "transfer: S0 shape mismatch");
    }
    Covariance validated(*opts.s0);
    (void)validated;
  }
}

}  // namespace detail

/// Data-driven transfer from x1 to y given x2. Fits the one-step operator A
/// from the snapshots and propagates Sigma(t) = A Sigma(t-1) A' + noise I,
/// evaluating H(y_{t+1} | y_t) = 1/2 log det(A_yx Sigma^S A_yx' + noise I).
/// The frozen-dynamics operator, fitted on the x1-frozen dataset, gives the
/// same entropy with x1 held; the difference is returned once it has
/// converged in t.
inline TransferValue transfer_from_data(const TimeSeries& ts, const SubspacePartition& p,
                                        const TransferOptions& opts = {}) {
  p.validate(ts.variables());
  detail::check_s0(opts, ts.variables());
  opts.effective_noise_var();
  const SnapshotPair sp = snapshots(ts);
  const RidgeSolver solver(sp.past, opts.lambda);
  const Matrix fitted = solver.solve(sp.future);
  Matrix frozen = detail::frozen_fit(solver, sp.past, sp.future, p.x1, opts.frozen_rows);

  const Index n = ts.variables();
  std::vector<detail::PairTask> tasks;
  tasks.push_back(detail::make_pair_task(p, fitted, std::move(frozen),
                                         opts.s0.value_or(Matrix::Identity(n, n))));
  detail::run_pair_tasks(tasks, fitted, opts);
  const auto& t = tasks.front();
  if (!t.error.empty()) throw Error(t.error_code, "transfer_from_data: " + t.error);
  return TransferValue{t.value, std::nullopt, t.iterations};
}

struct TransferGroup {
  std::string label;
  IndexSet indices;
};

struct TransferProvenance {
  std::string method = "data";  // "data" or "analytical"
  double lambda = 0.0;
  double noise_var = 0.0;
  double tol = 0.0;
  long max_iter = 0;
  std::string frozen_covariance = "held";
  std::optional<std::uint64_t> seed;
  std::string data_digest;
};

/// Directed transfers T(i, j) from group i to group j. The diagonal is
/// absent (NaN); failed pairs are NaN with a message in `errors`.
struct TransferMatrix {
  std::vector<TransferGroup> groups;
  Matrix values;
  std::vector<std::vector<std::string>> errors;
  TransferProvenance provenance;

  Index size() const { return static_cast<Index>(groups.size()); }
  bool ok(Index i, Index j) const {
    return i != j && errors[i][j].empty() && std::isfinite(values(i, j));
  }
  bool all_ok() const {
    for (Index i = 0; i < size(); ++i) {
      for (Index j = 0; j < size(); ++j) {
        if (i != j && !ok(i, j)) return false;
      }
    }
    return true;
  }
};

namespace detail {

inline void check_groups(const std::vector<TransferGroup>& groups, Index n) {
  if (groups.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "transfer_matrix: at least two groups required");
  }
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (const auto& g : groups) {
    if (g.indices.empty()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "transfer_matrix: group '" + g.label + "' is empty");
    }
    for (Index i : g.indices) {
      if (i < 0 || i >= n) {
        throw Error(ErrorCode::kIndexOutOfRange,
                    "transfer_matrix: group '" + g.label + "' index out of range");
      }
      if (seen[i]) {
        throw Error(ErrorCode::kOverlappingSets,
                    "transfer_matrix: groups overlap at index " + std::to_string(i));
      }
      seen[i] = 1;
    }
  }
}

// Source group i, target group j, everything else conditioning.
inline SubspacePartition pair_partition(const std::vector<TransferGroup>& groups,
                                        std::size_t i, std::size_t j, Index n) {
  SubspacePartition p{groups[i].indices, {}, groups[j].indices};
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  for (Index k : p.x1) used[k] = 1;
  for (Index k : p.y) used[k] = 1;
  for (Index k = 0; k < n; ++k) {
    if (!used[k]) p.x2.push_back(k);
  }
  return p;
}

inline TransferMatrix empty_matrix(const std::vector<TransferGroup>& groups) {
  const auto g = static_cast<Index>(groups.size());
  TransferMatrix tm;
  tm.groups = groups;
  tm.values = Matrix::Constant(g, g, std::numeric_limits<double>::quiet_NaN());
  tm.errors.assign(groups.size(), std::vector<std::string>(groups.size()));
  return tm;
}

}  // namespace detail

/// All ordered group pairs from data. The fit and its factorization are
/// shared; each pair gets its own frozen fit. Per-pair failures are recorded
/// in `errors` instead of aborting.
inline TransferMatrix transfer_matrix(const TimeSeries& ts,
                                      const std::vector<TransferGroup>& groups,
                                      const TransferOptions& opts = {}) {
  const Index n = ts.variables();
  detail::check_groups(groups, n);
  detail::check_s0(opts, n);
  TransferMatrix tm = detail::empty_matrix(groups);
  tm.provenance.method = "data";
  tm.provenance.lambda = opts.lambda;
  tm.provenance.noise_var = opts.effective_noise_var();
  tm.provenance.tol = opts.tol;
  tm.provenance.max_iter = opts.max_iter;
  tm.provenance.frozen_covariance = to_string(opts.frozen_covariance);

  const SnapshotPair sp = snapshots(ts);
  const RidgeSolver solver(sp.past, opts.lambda);
  const Matrix fitted = solver.solve(sp.future);
  const Matrix s0 = opts.s0.value_or(Matrix::Identity(n, n));

  std::vector<detail::PairTask> tasks;
  std::vector<std::pair<std::size_t, std::size_t>> where;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    Matrix frozen =
        detail::frozen_fit(solver, sp.past, sp.future, groups[i].indices, opts.frozen_rows);
    for (std::size_t j = 0; j < groups.size(); ++j) {
      if (i == j) continue;
      tasks.push_back(
          detail::make_pair_task(detail::pair_partition(groups, i, j, n), fitted, frozen, s0));
      where.emplace_back(i, j);
    }
  }
  detail::run_pair_tasks(tasks, fitted, opts);
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    const auto [i, j] = where[k];
    if (tasks[k].error.empty()) {
      tm.values(static_cast<Index>(i), static_cast<Index>(j)) = tasks[k].value;
    } else {
      tm.errors[i][j] = tasks[k].error;
    }
  }
  return tm;
}

/// All ordered group pairs in closed form at steady state for a known model.
inline TransferMatrix transfer_matrix(const LinearModel& m,
                                      const std::vector<TransferGroup>& groups,
                                      const Covariance& s0,
                                      const SteadyTransferOptions& opts = {}) {
  detail::check_groups(groups, m.size());
  TransferMatrix tm = detail::empty_matrix(groups);
  tm.provenance.method = "analytical";
  tm.provenance.noise_var = m.noise_variance();
  tm.provenance.tol = opts.tol;
  tm.provenance.max_iter = opts.max_iter;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    for (std::size_t j = 0; j < groups.size(); ++j) {
      if (i == j) continue;
      try {
        tm.values(static_cast<Index>(i), static_cast<Index>(j)) =
            steady_state_transfer(m, detail::pair_partition(groups, i, j, m.size()), s0, opts)
                .value;
      } catch (const Error& e) {
        tm.errors[i][j] = e.what();
      }
    }
  }
  return tm;
}

/// One group per variable, labelled by variable name.
inline std::vector<TransferGroup> singleton_groups(const std::vector<std::string>& names) {
  std::vector<TransferGroup> groups;
  for (std::size_t i = 0; i < names.size(); ++i) {
    groups.push_back({names[i], {static_cast<Index>(i)}});
  }
  return groups;
}

/// Structured document: group labels and indices, the matrix with null on
/// the diagonal and for failed pairs, per-pair errors and provenance.
inline nlohmann::json to_json(const TransferMatrix& tm) {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : tm.groups) {
    groups.push_back({{"label", g.label}, {"indices", g.indices}});
  }
  nlohmann::json matrix = nlohmann::json::array();
  nlohmann::json errors = nlohmann::json::array();
  for (Index i = 0; i < tm.size(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index j = 0; j < tm.size(); ++j) {
      if (tm.ok(i, j)) {
        row.push_back(tm.values(i, j));
      } else {
        row.push_back(nullptr);
      }
      if (i != j && !tm.errors[i][j].empty()) {
        errors.push_back({{"source", tm.groups[i].label},
                          {"target", tm.groups[j].label},
                          {"message", tm.errors[i][j]}});
      }
    }
    matrix.push_back(std::move(row));
  }
  const auto& p = tm.provenance;
  nlohmann::json prov = {{"method", p.method},
                         {"lambda", p.lambda},
                         {"noise_var", p.noise_var},
                         {"tol", p.tol},
                         {"max_iter", p.max_iter},
                         {"frozen_covariance", p.frozen_covariance},
                         {"data_digest", p.data_digest}};
  prov["seed"] = p.seed ? nlohmann::json(*p.seed) : nlohmann::json(nullptr);
  return {{"kind", "transfer_matrix"},
          {"units", "nats"},
          {"groups", std::move(groups)},
          {"matrix", std::move(matrix)},
          {"errors", std::move(errors)},
          {"provenance", std::move(prov)}};
}

inline TransferMatrix transfer_matrix_from_json(const nlohmann::json& j) {
  try {
    std::vector<TransferGroup> groups;
    for (const auto& g : j.at("groups")) {
      groups.push_back({g.at("label").get<std::string>(), g.at("indices").get<IndexSet>()});
    }
    TransferMatrix tm = detail::empty_matrix(groups);
    const auto& m = j.at("matrix");
    if (static_cast<Index>(m.size()) != tm.size()) {
      throw Error(ErrorCode::kParse, "transfer matrix: row count does not match groups");
    }
    for (Index r = 0; r < tm.size(); ++r) {
      if (static_cast<Index>(m[r].size()) != tm.size()) {
        throw Error(ErrorCode::kParse, "transfer matrix: ragged row");
      }
      for (Index c = 0; c < tm.size(); ++c) {
        if (!m[r][c].is_null()) tm.values(r, c) = m[r][c].get<double>();
      }
    }
    auto index_of = [&](const std::string& label) {
      for (std::size_t k = 0; k < groups.size(); ++k) {
        if (groups[k].label == label) return k;
      }
      throw Error(ErrorCode::kParse, "transfer matrix: unknown group '" + label + "'");
    };
    if (j.contains("errors")) {
      for (const auto& e : j.at("errors")) {
        tm.errors[index_of(e.at("source").get<std::string>())]
                 [index_of(e.at("target").get<std::string>())] =
            e.at("message").get<std::string>();
      }
    }
    for (Index r = 0; r < tm.size(); ++r) {
      for (Index c = 0; c < tm.size(); ++c) {
        if (r != c && !std::isfinite(tm.values(r, c)) && tm.errors[r][c].empty()) {
          tm.errors[r][c] = "missing value";
        }
      }
    }
    if (j.contains("provenance")) {
      const auto& p = j.at("provenance");
      tm.provenance.method = p.value("method", std::string("data"));
      tm.provenance.lambda = p.value("lambda", 0.0);
      tm.provenance.noise_var = p.value("noise_var", 0.0);
      tm.provenance.tol = p.value("tol", 0.0);
      tm.provenance.max_iter = p.value("max_iter", 0L);
      tm.provenance.frozen_covariance = p.value("frozen_covariance", std::string("held"));
      tm.provenance.data_digest = p.value("data_digest", std::string());
      if (p.contains("seed") && !p.at("seed").is_null()) {
        tm.provenance.seed = p.at("seed").get<std::uint64_t>();
      }
    }
    return tm;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("transfer matrix: ") + e.what());
  }
}

}  // namespace infocluster
