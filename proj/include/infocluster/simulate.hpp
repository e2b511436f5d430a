#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "infocluster/statespace.hpp"
#include "infocluster/timeseries.hpp"

namespace infocluster {

namespace detail {

// Symmetric square root V sqrt(max(ev, 0)) V' of a PSD matrix.
inline Matrix psd_sqrt(const Matrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

inline TimeSeries simulate_from(const LinearModel& m, const Vector& x0, long steps,
                                std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const Index n = m.size();
  Matrix data(n, steps + 1);
  data.col(0) = x0;
  Vector xi(n);
  for (long t = 0; t < steps; ++t) {
    for (Index i = 0; i < n; ++i) xi(i) = normal(rng);
    data.col(t + 1).noalias() = m.a() * data.col(t);
    data.col(t + 1) += m.sigma() * xi;
  }
  return TimeSeries(std::move(data), m.names());
}

}  // namespace detail

/// Trajectory of z(t+1) = A z(t) + sigma xi(t) starting from a fixed state.
/// Deterministic given the seed.
inline TimeSeries simulate_linear(const LinearModel& m, const Vector& x0, long steps,
                                  std::uint64_t seed) {
  if (steps < 1) {
    throw Error(ErrorCode::kInvalidArgument, "simulate_linear: steps must be >= 1");
  }
  if (x0.size() != m.size()) {
    throw Error(ErrorCode::kShapeMismatch, "simulate_linear: initial state shape mismatch");
  }
  std::mt19937_64 rng(seed);
  return detail::simulate_from(m, x0, steps, rng);
}

/// As above with z(0) drawn from N(0, S0); the noise stream continues from
/// the same generator.
inline TimeSeries simulate_linear(const LinearModel& m, const Covariance& s0, long steps,
                                  std::uint64_t seed) {
  if (s0.size() != m.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                "simulate_linear: initial covariance shape mismatch");
  }
  if (steps < 1) {
    throw Error(ErrorCode::kInvalidArgument, "simulate_linear: steps must be >= 1");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector xi(m.size());
  for (Index i = 0; i < m.size(); ++i) xi(i) = normal(rng);
  const Vector x0 = detail::psd_sqrt(s0.matrix()) * xi;
  return detail::simulate_from(m, x0, steps, rng);
}

/// The three-state benchmark 0.9 * [[0,0,0],[2,0,0.8],[2,1,0]] with unit noise.
inline LinearModel make_three_state() {
  Matrix a(3, 3);
  a << 0.0, 0.0, 0.0,
       2.0, 0.0, 0.8,
       2.0, 1.0, 0.0;
  a *= 0.9;
  return LinearModel(a, 1.0, {"x1", "x2", "x3"});
}

/// Parameters of the two-community damped oscillator network
/// theta'' = -(L + g I) theta - d theta'.
struct OscillatorParams {
  int n_per_community = 6;
  double intra_w = 5.0;
  double inter_w = 0.05;
  double damping = 1.0;
  double dt = 0.01;
  double sigma = 0.01;
  /// Self-stiffness g added to every oscillator. With g = 0 the Laplacian's
  /// zero mode puts an eigenvalue exactly on the unit circle.
  double grounding = 1.0;
  /// Relative uniform jitter on intra-community weights, w * (1 + j (u - 1/2)).
  double weight_jitter = 0.5;
  std::uint64_t weight_seed = 0;
};

struct OscillatorNetwork {
  LinearModel model;
  Matrix adjacency;
  Matrix laplacian;
  double damping;
  double dt;
  double spectral_radius;
  /// Set when the Euler-discretized system is not strictly stable (spectral
  /// radius within 1e-10 of 1 counts as marginal).
  bool unstable;
};

/// Two communities of n oscillators, each a clique of weight intra_w, joined
/// by one bridge edge of weight inter_w between the last node of the first
/// community and the first node of the second. The 2N-state continuous
/// system is discretized by forward Euler, A_d = I + dt A_c, with state order
/// (theta_1, theta_1', ..., theta_N, theta_N').
inline OscillatorNetwork make_oscillator_network(const OscillatorParams& p = {}) {
  if (p.n_per_community < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "make_oscillator_network: n_per_community must be >= 2");
  }
  if (!(p.intra_w > 0.0) || p.inter_w < 0.0) {
    throw Error(ErrorCode::kInvalidArgument,
                "make_oscillator_network: intra_w must be > 0 and inter_w >= 0");
  }
  if (!(p.damping > 0.0) || !(p.dt > 0.0) || !(p.sigma > 0.0) || p.grounding < 0.0 ||
      p.weight_jitter < 0.0 || p.weight_jitter >= 2.0) {
    throw Error(ErrorCode::kInvalidArgument,
                "make_oscillator_network: damping, dt, sigma must be > 0, grounding >= 0, "
                "jitter in [0, 2)");
  }
  const int n = p.n_per_community;
  const int g = 2 * n;
  std::mt19937_64 rng(p.weight_seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Matrix w = Matrix::Zero(g, g);
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        double weight = p.intra_w;
        if (p.weight_jitter > 0.0) weight *= 1.0 + p.weight_jitter * (unif(rng) - 0.5);
        w(c * n + i, c * n + j) = weight;
        w(c * n + j, c * n + i) = weight;
      }
    }
  }
  w(n - 1, n) = p.inter_w;
  w(n, n - 1) = p.inter_w;

  Matrix lap = -w;
  lap.diagonal() = w.rowwise().sum();

  Matrix ac = Matrix::Zero(2 * g, 2 * g);
  for (int k = 0; k < g; ++k) {
    ac(2 * k, 2 * k + 1) = 1.0;
    for (int j = 0; j < g; ++j) ac(2 * k + 1, 2 * j) = -lap(k, j);
    ac(2 * k + 1, 2 * k) -= p.grounding;
    ac(2 * k + 1, 2 * k + 1) = -p.damping;
  }
  Matrix ad = Matrix::Identity(2 * g, 2 * g) + p.dt * ac;

  std::vector<std::string> names;
  for (int k = 0; k < g; ++k) {
    names.push_back("theta" + std::to_string(k + 1));
    names.push_back("dtheta" + std::to_string(k + 1));
  }
  const double rho = spectral_radius(ad);
  return OscillatorNetwork{LinearModel(std::move(ad), p.sigma, std::move(names)),
                           std::move(w),
                           std::move(lap),
                           p.damping,
                           p.dt,
                           rho,
                           rho >= 1.0 - 1e-10};
}

}  // namespace infocluster
