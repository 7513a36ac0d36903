#include "qdlab/boltzmann.hpp"

#include <gtest/gtest.h>

using namespace qdlab;

namespace {

const PotentialProfile flat = PotentialProfile::flat();
const PotentialProfile gauss = PotentialProfile::gaussian();

Vec vec3(double x, double y, double z) {
  Vec v(3);
  v << x, y, z;
  return v;
}

// <cos> for |B^|^2 = exp(-|u-v|^2) on the shell of radius rho, d = 3
double gauss_mean_cos(double rho) {
  double a = 2 * rho * rho;
  return 1.0 / std::tanh(a) - 1.0 / a;
}

}  // namespace

TEST(CollisionKernel, ZeroTransfer) {
  Vec v = vec3(0.6, -0.2, 0.3);
  EXPECT_NEAR(collision_rate_density(v, v, gauss), 2 * pi / v.norm(), 1e-14);
  EXPECT_NEAR(collision_rate_density(v, v, PotentialProfile::gaussian(1.5)), 2 * pi * 2.25 / v.norm(), 1e-13);
}

TEST(CollisionKernel, FlatIsConstantOnShell) {
  Vec v = vec3(1, 0, 0);
  for (auto u : {vec3(0, 1, 0), vec3(-1, 0, 0), vec3(0.6, 0.8, 0)})
    EXPECT_DOUBLE_EQ(collision_rate_density(u, v, flat), 2 * pi);
}

TEST(CollisionKernel, GaussianAngularForm) {
  Vec v = vec3(1, 0, 0);
  for (double th : {0.1, 0.7, 1.5, 2.9}) {
    Vec u = vec3(std::cos(th), std::sin(th), 0);
    EXPECT_NEAR(collision_rate_density(u, v, gauss), 2 * pi * std::exp(-2 * (1 - std::cos(th))), 1e-13);
  }
}

TEST(CollisionKernel, OffShellRejected) {
  EXPECT_THROW(collision_rate_density(vec3(2, 0, 0), vec3(1, 0, 0), gauss), domain_error);
}

TEST(JumpRate, FlatShellVolume) {
  EXPECT_NEAR(total_jump_rate(vec3(1, 0, 0), flat), 8 * pi * pi, 1e-10);
  EXPECT_NEAR(total_jump_rate(vec3(0, 0.6, 0.8), flat), 8 * pi * pi, 1e-10);
}

TEST(JumpRate, MonteCarloSurfaceIntegral) {
  Vec v = vec3(0.3, 0.9, -0.1);
  double R = v.norm();
  JumpProcess J(flat, dispersion_relation(v));
  auto rng = stream(2, 0);
  Accum acc;
  for (int i = 0; i < 200000; ++i) acc.add(gauss.bhat2((J.uniform(rng) - v).norm()));
  double area = 4 * pi * R * R;
  double mc = 2 * pi * acc.mean * area / R, se = 2 * pi * acc.stderr_() * area / R;
  EXPECT_NEAR(total_jump_rate(v, gauss), mc, 4 * se);
}

TEST(JumpRate, EqualsTwiceImagSelfEnergy) {
  for (int i = 0; i < 20; ++i) {
    double e = 0.05 + 0.2 * i;
    Vec v = vec3(0, 0, std::sqrt(2 * e));
    double I = self_energy_imag(e, gauss);
    EXPECT_NEAR(total_jump_rate(v, gauss) / (2 * I), 1.0, 1e-4) << e;
  }
  EXPECT_NEAR(total_jump_rate(vec3(1, 0, 0), gauss), 2 * pi * pi * (1 - std::exp(-4.0)), 1e-9);
}

TEST(JumpRate, VanishesAtZeroEnergy) {
  double prev = 1e9;
  for (double e : {1e-2, 1e-4, 1e-6, 1e-8}) {
    double r = total_jump_rate(vec3(std::sqrt(2 * e), 0, 0), gauss);
    EXPECT_LT(r, prev);
    prev = r;
  }
  // 8 pi^2 rho as rho -> 0
  EXPECT_NEAR(prev / (8 * pi * pi * std::sqrt(2e-8)), 1.0, 1e-6);
  EXPECT_THROW(total_jump_rate(Vec::Zero(3), gauss), domain_error);
}

TEST(PostCollision, FlatIsUniform) {
  Vec v = vec3(1, 0, 0);
  auto rng = stream(3, 0);
  std::vector<long> c(20, 0);
  for (int i = 0; i < 10000; ++i) ++c[static_cast<std::size_t>(shell_cell(sample_post_collision(v, flat, rng)))];
  EXPECT_GT(chi_square_uniform(c).p, 1e-3);
}

TEST(PostCollision, StaysOnShell) {
  auto rng = stream(4, 0);
  for (auto& prof : {flat, gauss, gauss.with_cutoff(3.0)}) {
    Vec v = vec3(0.3, -0.7, 1.1);
    double r = v.norm();
    JumpProcess J(prof, dispersion_relation(v));
    for (int i = 0; i < 2000; ++i) {
      v = J.jump(v, rng);
      EXPECT_NEAR(v.norm(), r, 1e-12 * r);
    }
  }
}

TEST(PostCollision, GaussianMeanCosine) {
  Vec v = vec3(0, 1, 0);
  JumpProcess J(gauss, 0.5);
  auto rng = stream(5, 0);
  Accum acc;
  for (int i = 0; i < 100000; ++i) acc.add(J.jump(v, rng).dot(v));
  // 1-d quadrature oracle and its closed form
  double q = mean_cosine(0.5, gauss);
  EXPECT_NEAR(q, gauss_mean_cos(1.0), 1e-10);
  EXPECT_NEAR(acc.mean, q, 3 * acc.stderr_());
}

TEST(PostCollision, RejectionRouteMatchesInverseCdf) {
  // same kernel given as a custom radial function goes through rejection
  auto custom = PotentialProfile::radial([](double p) { return std::exp(-0.5 * p * p); }, 12.0);
  Vec v = vec3(0, 0, 1.2);
  JumpProcess J(custom, dispersion_relation(v));
  auto rng = stream(6, 0);
  Accum acc;
  for (int i = 0; i < 50000; ++i) acc.add(J.jump(v, rng).dot(v) / v.squaredNorm());
  EXPECT_NEAR(acc.mean, gauss_mean_cos(1.2), 3 * acc.stderr_());
}

TEST(PostCollision, UniformIsStationary) {
  JumpProcess J(gauss, 0.5);
  auto rng = stream(7, 0);
  std::vector<long> c(20, 0);
  for (int i = 0; i < 100000; ++i) ++c[static_cast<std::size_t>(shell_cell(J.jump(J.uniform(rng), rng)))];
  EXPECT_GT(chi_square_uniform(c).p, 1e-3);
}

TEST(Trajectory, ShortHorizonHasNoJumps) {
  auto rng = stream(8, 0);
  auto tr = simulate_trajectory(vec3(1, 0, 0), 1e-12, flat, rng);
  EXPECT_TRUE(tr.jump_times.empty());
  EXPECT_EQ(tr.velocities.size(), 1u);
}

TEST(Trajectory, PoissonJumpCount) {
  JumpProcess J(flat, 0.5);
  double h = 0.05;
  Accum n;
  for (int i = 0; i < 10000; ++i) {
    auto rng = stream(9, static_cast<std::uint64_t>(i));
    n.add(static_cast<double>(simulate_trajectory(J, vec3(1, 0, 0), h, rng).jump_times.size()));
  }
  EXPECT_NEAR(n.mean, J.rate() * h, 3 * n.stderr_());
}

TEST(Trajectory, EnergyAndOrderInvariants) {
  auto rng = stream(10, 0);
  Vec v0 = vec3(0.2, 0.5, -0.8);
  double e = dispersion_relation(v0);
  auto tr = simulate_trajectory(v0, 3.0, gauss, rng);
  ASSERT_GT(tr.jump_times.size(), 10u);
  EXPECT_EQ(tr.velocities.size(), tr.jump_times.size() + 1);
  for (std::size_t k = 0; k < tr.jump_times.size(); ++k) {
    EXPECT_LT(tr.jump_times[k], tr.horizon);
    if (k > 0) {
      EXPECT_GT(tr.jump_times[k], tr.jump_times[k - 1]);
    }
  }
  for (auto& v : tr.velocities) EXPECT_LE(std::abs(dispersion_relation(v) - e), 1e-12);
}

TEST(Autocorrelation, FlatIsSingleExponential) {
  double e = 0.5;
  JumpProcess J(flat, e);
  std::vector<double> lags{0.0, 0.005, 0.01, 0.02, 0.04};
  auto est = velocity_autocorrelation(e, lags, 20000, flat, 11);
  EXPECT_NEAR(est[0].value, 2 * e, 1e-12);
  for (auto& l : est) EXPECT_NEAR(l.value, 2 * e * std::exp(-J.rate() * l.lag), 3 * l.stderr_ + 1e-12) << l.lag;
  EXPECT_THROW(velocity_autocorrelation(e, lags, 1, flat, 1), domain_error);
}

TEST(Autocorrelation, GaussianDecayIsExponential) {
  double e = 0.5;
  double rate = momentum_relaxation_rate(e, gauss);
  std::vector<double> lags;
  for (int j = 0; j <= 8; ++j) lags.push_back(j * 0.25 / rate);
  auto est = velocity_autocorrelation(e, lags, 20000, gauss, 12);
  std::vector<double> x, y;
  for (auto& l : est) {
    x.push_back(l.lag);
    y.push_back(std::log(l.value));
  }
  auto f = fit_line(x, y);
  EXPECT_GE(f.r2, 0.99);
  EXPECT_LT(f.slope, 0.0);
  EXPECT_NEAR(-f.slope / rate, 1.0, 0.05);
}

TEST(Diffusion, FlatClosedForm) {
  BoltzmannBudget B;
  B.n_traj = 30000;
  auto r = diffusion_coefficient(0.5, flat, B, 13);
  double D = 1.0 / (96 * std::pow(pi, 4));
  EXPECT_NEAR(r.closed_form, D, 1e-12);
  EXPECT_NEAR(r.green_kubo.D / D, 1.0, 0.02);
  EXPECT_NEAR(r.msd.D / D, 1.0, 0.02);
  EXPECT_TRUE(r.routes_agree);
  EXPECT_LT(r.isotropy_max_z, 3.0);
  EXPECT_GT(r.green_kubo.D, 0.0);
  EXPECT_GE(r.green_kubo.stderr_, 0.0);
}

TEST(Diffusion, FlatEnergyDependence) {
  for (double e : {0.5, 1.0}) {
    double want = 2 * e / (4 * pi * pi * 3 * 2 * pi * sphere_area(3) * std::pow(2 * e, 0.5));
    EXPECT_NEAR(diffusion_closed_form(e, flat) / want, 1.0, 1e-10);
    BoltzmannBudget B;
    B.n_traj = 10000;
    auto r = diffusion_coefficient(e, flat, B, 14);
    EXPECT_NEAR(r.msd.D / want, 1.0, 4 * r.msd.stderr_ / want);
  }
}

TEST(Diffusion, GaussianRoutesAgree) {
  BoltzmannBudget B;
  B.n_traj = 10000;
  auto r = diffusion_coefficient(0.5, gauss, B, 15);
  EXPECT_TRUE(r.routes_agree);
  EXPECT_NEAR(r.msd.D, r.closed_form, 4 * r.msd.stderr_);
  EXPECT_NEAR(r.green_kubo.D, r.closed_form, 4 * r.green_kubo.stderr_);
}

TEST(Mixing, FlatUniformAfterFiveJumps) {
  JumpProcess J(flat, 0.5);
  auto rep = mixing_diagnostics(0.5, flat, {1 / J.rate(), 5 / J.rate()}, 10000, 16);
  EXPECT_GT(rep.final_p, 1e-3);
}

TEST(Mixing, GaussianUniformAfterTwentyJumps) {
  JumpProcess J(gauss, 0.5);
  std::vector<double> ts;
  for (double k : {0.5, 1.0, 2.0, 4.0, 8.0, 20.0}) ts.push_back(k / J.rate());
  auto rep = mixing_diagnostics(0.5, gauss, ts, 10000, 17);
  EXPECT_GT(rep.final_p, 1e-3);
  EXPECT_TRUE(rep.tv_monotone);
  EXPECT_GT(rep.fitted_rate, 0.0);
  // starting cell drains toward 1/20
  EXPECT_GT(rep.first_cell.front(), rep.first_cell.back());
  EXPECT_NEAR(rep.first_cell.back(), 0.05, 0.01);
}
