#include "qdlab/dispersion.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace qdlab;

namespace {

const PotentialProfile gauss = PotentialProfile::gaussian();

ThetaFn gauss_theta() { return theta_fn(theta_table(gauss)); }

// closed form for B^ = exp(-p^2/2), d = 3
double imag_closed(double a) { return a > 0 ? pi * pi * (1 - std::exp(-8 * a)) / std::sqrt(2 * a) : 0.0; }

Vec vec3(double x, double y, double z) {
  Vec v(3);
  v << x, y, z;
  return v;
}

}  // namespace

TEST(Dispersion, Relation) {
  EXPECT_DOUBLE_EQ(dispersion_relation(Vec::Zero(3)), 0.0);
  EXPECT_DOUBLE_EQ(dispersion_relation(vec3(1, 0, 0)), 0.5);
  EXPECT_DOUBLE_EQ(dispersion_relation(vec3(1, 1, 1)), 1.5);
}

TEST(ShellFunctional, ConstantMatchesSphereVolume) {
  for (int d : {3, 4})
    for (double e : {0.25, 0.5, 1.0, 2.0}) {
      double got = shell_functional([](const Vec&) { return 1.0; }, e, d);
      double want = sphere_area(d) * std::pow(2 * e, 0.5 * d - 1);
      EXPECT_NEAR(got / want, 1.0, 1e-6) << "d=" << d << " e=" << e;
    }
  EXPECT_NEAR(shell_functional([](const Vec&) { return 1.0; }, 0.5), 4 * pi, 1e-9);
}

TEST(ShellFunctional, OddFunctionVanishes) {
  auto h = [](const Vec& v) { return v(0) * std::exp(v(1)) + std::pow(v(2), 3); };
  EXPECT_NEAR(shell_functional(h, 0.7), 0.0, 1e-12);
}

TEST(ShellFunctional, MonteCarloCrossCheck) {
  // uniform points on the sphere from normalized Gaussians
  auto h = [](const Vec& v) { return std::exp(-0.3 * sq(v(0) - 0.2)) + v(2) * v(2); };
  double e = 0.8, R = std::sqrt(2 * e);
  auto rng = stream(11, 0);
  std::normal_distribution<double> N;
  Accum acc;
  for (int i = 0; i < 200000; ++i) {
    Vec v = vec3(N(rng), N(rng), N(rng));
    acc.add(h(Vec(R * v / v.norm())));
  }
  double mc = acc.mean * 4 * pi * R * R / R, se = acc.stderr_() * 4 * pi * R;
  EXPECT_NEAR(shell_functional(h, e), mc, 4 * se);
}

TEST(ShellFunctional, RejectsNonPositiveEnergy) {
  EXPECT_THROW(shell_functional([](const Vec&) { return 1.0; }, 0.0), domain_error);
}

TEST(SelfEnergyImag, EmptyShell) {
  EXPECT_EQ(self_energy_imag(0.0, gauss), 0.0);
  EXPECT_EQ(self_energy_imag(-1.0, gauss), 0.0);
}

TEST(SelfEnergyImag, GaussianClosedForm) {
  // pi^2 (1 - e^{-4}) at alpha = 1/2
  EXPECT_NEAR(self_energy_imag(0.5, gauss), pi * pi * (1 - std::exp(-4.0)), 1e-10);
  EXPECT_NEAR(self_energy_imag(0.5, gauss), 9.68883629, 1e-7);
  for (double a : {0.01, 0.3, 1.7, 6.0}) EXPECT_NEAR(self_energy_imag(a, gauss) / imag_closed(a), 1.0, 1e-10);
}

TEST(SelfEnergyImag, ReferencePointIndependence) {
  double a = 0.5, R = 1.0;
  Vec r1 = vec3(R, 0, 0);
  Vec r2 = vec3(0.3, -0.5, 0.0);
  r2(2) = std::sqrt(R * R - 0.34);
  double i1 = self_energy_imag_at(r1, gauss), i2 = self_energy_imag_at(r2, gauss);
  EXPECT_NEAR(i1, i2, 1e-9 * i1);
  EXPECT_NEAR(i1, self_energy_imag(a, gauss), 1e-8 * i1);
}

TEST(SelfEnergyImag, NonNegative) {
  auto flat = PotentialProfile::flat(0.7);
  for (double a = -1; a < 8; a += 0.37) {
    EXPECT_GE(self_energy_imag(a, gauss), 0.0);
    EXPECT_GE(self_energy_imag(a, flat), 0.0);
  }
}

TEST(SelfEnergy, EpsRouteMatchesShellRouteAtHalf) {
  auto v = self_energy(0.5, gauss);
  EXPECT_NEAR(v.im_part / self_energy_imag(0.5, gauss), 1.0, 0.01);
  EXPECT_NEAR(v.re_part, -3.35592425, 0.01 * 3.36);
  EXPECT_GT(v.quadrature_error, 0.0);
}

TEST(SelfEnergy, RoutesAgreeOnFiftyPointGrid) {
  for (int i = 0; i < 50; ++i) {
    double a = 0.05 + i * 0.1;
    auto v = self_energy(a, gauss);
    auto pv = self_energy_pv(a, gauss);
    double I = self_energy_imag(a, gauss);
    EXPECT_NEAR(v.im_part, I, 0.01 * I) << "alpha=" << a;
    EXPECT_NEAR(pv.im_part, I, 1e-9 * I) << "alpha=" << a;
    EXPECT_NEAR(v.re_part, pv.re_part, 0.01 * std::abs(pv.re_part)) << "alpha=" << a;
  }
}

TEST(SelfEnergy, NegativeAlphaIsReal) {
  auto v = self_energy(-0.5, gauss);
  EXPECT_EQ(v.im_part, 0.0);
  EXPECT_LT(v.re_part, 0.0);
  EXPECT_NEAR(v.re_part, self_energy_pv(-0.5, gauss).re_part, 1e-6);
}

TEST(SelfEnergy, BadEpsSequence) {
  EXPECT_THROW(self_energy(0.5, gauss, {1e-3, 1e-2}), domain_error);
  EXPECT_THROW(self_energy(0.5, gauss, {1e-3}), domain_error);
  EXPECT_THROW(self_energy(0.5, PotentialProfile::flat()), domain_error);
}

TEST(SelfEnergy, ZeroProfile) {
  auto v = self_energy(0.5, PotentialProfile::zero());
  EXPECT_EQ(v.re_part, 0.0);
  EXPECT_EQ(v.im_part, 0.0);
}

TEST(SelfEnergy, TableMatchesDirect) {
  auto t = theta_table(gauss);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0.0, 60.0);
  for (int i = 0; i < 40; ++i) {
    double a = U(rng);
    auto pv = self_energy_pv(a, gauss);
    cplx tv = (*t)(a);
    EXPECT_NEAR(tv.real(), pv.re_part, 5e-6 * std::abs(pv.re_part) + 1e-9) << a;
    EXPECT_NEAR(-tv.imag(), pv.im_part, 5e-6 * pv.im_part + 1e-9) << a;
  }
}

TEST(SelfEnergy, HolderExponentOnDyadicGaps) {
  auto fit = [](double a0) {
    std::vector<double> h, dv;
    auto t0 = self_energy_pv(a0, gauss).theta();
    for (int k = 4; k <= 12; ++k) {
      double g = std::ldexp(1.0, -k);
      h.push_back(g);
      dv.push_back(std::abs(self_energy_pv(a0 + g, gauss).theta() - t0));
    }
    return loglog_slope(h, dv);
  };
  for (double a0 : {0.25, 0.5, 1.0, 3.0}) EXPECT_GE(fit(a0), 0.5) << a0;
  // at the branch point alpha = 0 the exponent is exactly 1/2 in the limit; check the bound itself
  double edge = fit(0.0);
  RecordProperty("holder_exponent_at_zero", std::to_string(edge));
  EXPECT_NEAR(edge, 0.5, 0.03);
  auto t0 = self_energy_pv(0.0, gauss).theta();
  double cmax = 0, clast = 0;
  for (int k = 2; k <= 20; ++k) {
    double g = std::ldexp(1.0, -k);
    clast = std::abs(self_energy_pv(g, gauss).theta() - t0) / std::sqrt(g);
    cmax = std::max(cmax, clast);
  }
  EXPECT_LE(cmax, 1.05 * clast);
  EXPECT_LT(cmax, 100.0);
}

TEST(SelfEnergy, LargeAlphaDecay) {
  std::vector<double> a, m;
  for (double x = 50; x <= 3200; x *= 2) {
    a.push_back(x);
    m.push_back(std::abs(self_energy_pv(x, gauss).theta()));
  }
  double slope = -loglog_slope(a, m);
  EXPECT_GE(slope, 0.4);
  EXPECT_LE(slope, 0.6);
}

TEST(Propagator, FreeWhenLambdaZero) {
  ModelParams P = ModelParams::scaled(3, 0.1, 0.05, 0.01, 1.0);
  P.lambda = 0.0;
  Vec v = vec3(0.4, 0.8, -0.1);
  cplx want = 1.0 / cplx(0.3 - dispersion_relation(v), P.eta);
  EXPECT_NEAR(std::abs(renormalized_propagator(0.3, v, P, gauss_theta()) - want), 0.0, 1e-12 * std::abs(want));
}

TEST(Propagator, ModulusBoundedByInverseEta) {
  auto th = gauss_theta();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-2, 2);
  for (double lam : {0.3, 0.1, 0.02}) {
    auto P = ModelParams::scaled(3, lam, 0.1, 0.01, 1.0);
    for (int i = 0; i < 300; ++i) {
      Vec v = vec3(U(rng), U(rng), U(rng));
      double a = U(rng) + dispersion_relation(v) * (i % 2);
      EXPECT_LE(std::abs(renormalized_propagator(a, v, P, th)), (1 + 1e-12) / P.eta);
    }
  }
}

TEST(Propagator, ComposesWithSelfEnergyOutput) {
  auto P = ModelParams::scaled(3, 0.1, 0.5, 0.01, 1.0);
  auto se = self_energy(0.5, gauss);
  ThetaFn fixed = [&](double) { return se.theta(); };
  Vec v = vec3(1, 0, 0);
  cplx direct = 1.0 / (0.5 - (0.5 + 0.01 * cplx(se.re_part, -se.im_part)) + cplx(0, P.eta));
  cplx got = renormalized_propagator(0.5, v, P, fixed);
  EXPECT_NEAR(std::abs(got - direct), 0.0, 1e-14 * std::abs(direct));
  // about 1/(lambda^2 I + eta) in modulus, shifted by lambda^2 R
  EXPECT_NEAR(std::abs(got), 1.0 / std::hypot(0.01 * se.im_part + P.eta, 0.01 * se.re_part), 1e-9);
}

TEST(PropagatorIntegrals, LadderIntegralNearOne) {
  auto th = gauss_theta();
  auto P = ModelParams::scaled(3, 0.05, 0.05, 0.01, 1.0);
  double a = omega(0.5, P.lambda, th).real();
  auto c = propagator_integral_check(P, gauss, a, 1.0, 0.0, th);
  EXPECT_GE(c.ladder_value, 0.8);
  EXPECT_LE(c.ladder_value, 1.2);
  EXPECT_TRUE(std::isfinite(c.ladder_C0));
  EXPECT_TRUE(std::isfinite(c.ratio_a2()) && std::isfinite(c.ratio_a3()) && std::isfinite(c.ratio_logest()));
}

TEST(PropagatorIntegrals, TwoAIntScalesLikeInverseLambdaSquared) {
  auto th = gauss_theta();
  std::vector<double> ls{0.1, 0.05, 0.025}, v;
  for (double l : ls) {
    auto P = ModelParams::scaled(3, l, 0.05, 0.01, 1.0);
    v.push_back(propagator_integral_check(P, gauss, 0.5, 1.0, 0.0, th).a2_lhs);
  }
  EXPECT_NEAR(loglog_slope(ls, v), -2.0, 0.3);
}

TEST(PropagatorIntegrals, LogEstRatioDecaysOffShell) {
  auto th = gauss_theta();
  auto P = ModelParams::scaled(3, 0.05, 0.05, 0.01, 1.0);
  double prev = std::numeric_limits<double>::infinity();
  for (double q : {1.0, 1.5, 2.0, 3.0, 4.0, 6.0}) {
    double r = propagator_integral_check(P, gauss, 0.5, q, 0.0, th).ratio_logest();
    EXPECT_LT(r, prev) << q;
    prev = r;
  }
}

TEST(PropagatorIntegrals, Preconditions) {
  auto th = gauss_theta();
  auto P = ModelParams::scaled(3, 0.05, 0.05, 0.01, 1.0);
  auto bad = P;
  bad.eta = 2 * P.lambda * P.lambda;
  EXPECT_THROW(propagator_integral_check(bad, gauss, 0.5, 1.0, 0.0, th), domain_error);
  EXPECT_THROW(propagator_integral_check(P, gauss, 0.5, 1.0, 1.0, th), domain_error);
  auto k = ModelParams::scaled(3, 0.05, 0.2, 0.01, 1.0);
  EXPECT_THROW(propagator_integral_check(k, gauss, 0.5, 1.0, 0.0, th), domain_error);
}

namespace {

// sup over alpha = e(p) on a log grid from 0.01 eta to about 8
struct GateScan {
  double sup = 0, max_ratio = 0;
  bool all_ok = true;
};

GateScan gate_scan(double lam, double kappa) {
  auto th = gauss_theta();
  auto P = ModelParams::scaled(3, lam, kappa, 0.01, 1.0);
  GateScan s;
  double top = std::log10(8.0 / (0.01 * P.eta));
  for (int i = 0; i < 100; ++i) {
    double a = 0.01 * P.eta * std::pow(10.0, top * i / 99.0);
    auto v = gate_theta_factor(a, std::sqrt(2 * a), P, gauss, th);
    s.sup = std::max(s.sup, std::abs(v.omega_factor));
    s.max_ratio = std::max(s.max_ratio, v.bound_ratio);
    s.all_ok = s.all_ok && v.bound_ok;
  }
  return s;
}

}  // namespace

TEST(GateTheta, BoundedOnDiagnosticGrid) {
  for (double l : {4e-4, 2e-4, 1e-4}) {
    auto s = gate_scan(l, 0.3);
    EXPECT_TRUE(s.all_ok) << l;
    EXPECT_LE(s.max_ratio, 10.0) << l;
  }
}

TEST(GateTheta, VanishesLikeLambdaToOneMinusHalfKappa) {
  std::vector<double> ls{4e-4, 2e-4, 1e-4}, sup;
  for (double l : ls) sup.push_back(gate_scan(l, 0.3).sup);
  EXPECT_NEAR(loglog_slope(ls, sup), 1 - 0.15, 0.2);
}

TEST(GateTheta, GenericEnergyIsOrderLambdaSquared) {
  auto th = gauss_theta();
  std::vector<double> ls{4e-4, 2e-4, 1e-4}, v;
  for (double l : ls) {
    auto P = ModelParams::scaled(3, l, 0.3, 0.01, 1.0);
    v.push_back(std::abs(gate_theta_factor(0.5, 1.0, P, gauss, th).omega_factor));
  }
  EXPECT_NEAR(loglog_slope(ls, v), 2.0, 0.1);
}

TEST(GateTheta, ZeroPotential) {
  auto z = PotentialProfile::zero();
  auto th = theta_fn(theta_table(z));
  auto P = ModelParams::scaled(3, 1e-4, 0.3, 0.01, 1.0);
  auto v = gate_theta_factor(0.5, 1.0, P, z, th);
  EXPECT_EQ(std::abs(v.omega_factor), 0.0);
  EXPECT_TRUE(v.bound_ok);
}

TEST(GateTheta, Preconditions) {
  auto th = gauss_theta();
  auto P = ModelParams::scaled(3, 0.1, 0.3, 0.01, 1.0);
  EXPECT_THROW(gate_theta_factor(0.5, 1.0, P, gauss, th), domain_error);
}
