#include <gtest/gtest.h>

#include "infocluster/simulate.hpp"
#include "oracles.hpp"

using namespace infocluster;

TEST(Simulate, DeterministicGivenSeed) {
  const LinearModel m = make_three_state();
  const TimeSeries a = simulate_linear(m, Covariance::identity(3), 100, 42);
  const TimeSeries b = simulate_linear(m, Covariance::identity(3), 100, 42);
  const TimeSeries c = simulate_linear(m, Covariance::identity(3), 100, 43);
  EXPECT_TRUE((a.data().array() == b.data().array()).all());
  EXPECT_FALSE((a.data().array() == c.data().array()).all());
  EXPECT_EQ(a.steps(), 101);
}

TEST(Simulate, FixedStartAndNoiselessPath) {
  Matrix a(2, 2);
  a << 0.5, 0.1, 0.0, 0.3;
  const LinearModel m(a, 1e-300);
  Vector x0(2);
  x0 << 1.0, -2.0;
  const TimeSeries ts = simulate_linear(m, x0, 5, 0);
  Vector x = x0;
  for (Index t = 0; t <= 5; ++t) {
    EXPECT_LT((ts.data().col(t) - x).norm(), 1e-250);
    x = a * x;
  }
}

TEST(Simulate, EmpiricalCovarianceApproachesSteadyState) {
  const LinearModel m = make_three_state();
  const TimeSeries ts = simulate_linear(m, Covariance::identity(3), 200000, 7);
  const Matrix d = ts.data().rightCols(199000);
  const Matrix emp = d * d.transpose() / static_cast<double>(d.cols());
  const Matrix ref = oracle::lyapunov_kron(m.a(), 1.0);
  EXPECT_LT((emp - ref).norm() / ref.norm(), 0.03);
}

TEST(Simulate, RejectsBadArguments) {
  const LinearModel m = make_three_state();
  EXPECT_THROW(simulate_linear(m, Vector::Zero(2), 10, 0), Error);
  EXPECT_THROW(simulate_linear(m, Vector::Zero(3), 0, 0), Error);
}

TEST(Oscillator, DefaultIsStableWithTwoCommunities) {
  const OscillatorNetwork net = make_oscillator_network();
  EXPECT_FALSE(net.unstable);
  EXPECT_LT(net.spectral_radius, 1.0);
  EXPECT_EQ(net.model.size(), 24);
  EXPECT_EQ(net.model.names()[0], "theta1");
  EXPECT_EQ(net.model.names()[1], "dtheta1");
  // Single bridge between the communities.
  int cross = 0;
  for (Index i = 0; i < 6; ++i)
    for (Index j = 6; j < 12; ++j) cross += net.adjacency(i, j) != 0.0;
  EXPECT_EQ(cross, 1);
  EXPECT_EQ(net.adjacency(5, 6), 0.05);
  EXPECT_LT((net.laplacian.rowwise().sum()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Oscillator, UngroundedLaplacianSitsOnTheUnitCircle) {
  OscillatorParams p;
  p.grounding = 0.0;
  const OscillatorNetwork net = make_oscillator_network(p);
  EXPECT_TRUE(net.unstable);
  EXPECT_NEAR(net.spectral_radius, 1.0, 1e-9);
}

TEST(Oscillator, EulerStructure) {
  OscillatorParams p;
  p.weight_jitter = 0.0;
  const OscillatorNetwork net = make_oscillator_network(p);
  const Matrix& a = net.model.a();
  // theta_k(t+1) = theta_k + dt theta_k'
  EXPECT_DOUBLE_EQ(a(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(a(0, 1), p.dt);
  // theta_k'(t+1) = theta_k' (1 - dt d) - dt ((L + g I) theta)_k
  EXPECT_DOUBLE_EQ(a(1, 1), 1.0 - p.dt * p.damping);
  EXPECT_DOUBLE_EQ(a(1, 0), -p.dt * (net.laplacian(0, 0) + p.grounding));
  EXPECT_DOUBLE_EQ(a(1, 2), p.dt * p.intra_w);
}
