#pragma once

// e(p) = p^2/2, self-energy Theta = R - iI, renormalized propagator and the propagator-integral checks

#include "qdlab/core.hpp"
#include "qdlab/profile.hpp"
#include "qdlab/quadrature.hpp"
#include "qdlab/stats.hpp"

#include <Eigen/Dense>
#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <type_traits>

namespace qdlab {

using Vec = Eigen::VectorXd;

inline double dispersion_relation(const Vec& p) { return 0.5 * p.squaredNorm(); }

// ---- sphere product rule ----

struct SphereRule {
  int d = 3;
  std::vector<Vec> x;  // unit vectors
  std::vector<double> w;
};

// hyperspherical angles: Gauss-Legendre in each polar angle, trapezoid in the azimuth
inline SphereRule sphere_rule(int d, unsigned n) {
  if (d < 2) throw domain_error("sphere_rule: d >= 2");
  SphereRule S;
  S.d = d;
  auto th = gauss_legendre(n, 0.0, pi);
  unsigned m = 2 * n;
  std::function<void(int, Vec, double, double)> rec = [&](int k, Vec v, double amp, double wt) {
    // k = index of the next coordinate; amp = product of sines so far
    if (k == d - 2) {
      for (unsigned j = 0; j < m; ++j) {
        double ph = 2 * pi * j / m;
        Vec u = v;
        u(d - 2) = amp * std::cos(ph);
        u(d - 1) = amp * std::sin(ph);
        S.x.push_back(u);
        S.w.push_back(wt * 2 * pi / m);
      }
      return;
    }
    int power = d - 2 - k;
    for (std::size_t i = 0; i < th.x.size(); ++i) {
      Vec u = v;
      u(k) = amp * std::cos(th.x[i]);
      rec(k + 1, u, amp * std::sin(th.x[i]), wt * th.w[i] * std::pow(std::sin(th.x[i]), power));
    }
  };
  rec(0, Vec::Zero(d), 1.0, 1.0);
  return S;
}

// [h](e) = int h(v) delta(e - e(v)) dv = (2e)^{-1/2} * surface integral over |v| = sqrt(2e)
template <class H>
double shell_functional(H&& h, double e, int d = 3, unsigned n = 32) {
  if (!(e > 0)) throw domain_error("shell_functional: e must be > 0");
  double R = std::sqrt(2 * e);
  static thread_local std::map<std::pair<int, unsigned>, SphereRule> cache;
  auto key = std::make_pair(d, n);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, sphere_rule(d, n)).first;
  const SphereRule& S = it->second;
  double s = 0.0;
  for (std::size_t i = 0; i < S.x.size(); ++i) s += S.w[i] * h(Vec(R * S.x[i]));
  return s * std::pow(R, d - 1) / R;
}

// ---- radial integrals with resonance peaks ----

struct Peak {
  double center;
  double width;
};

// breakpoints at c +- w * 10^k so that GK61 resolves Lorentzian peaks
inline std::vector<double> peak_breakpoints(double a, double b, const std::vector<Peak>& peaks) {
  std::vector<double> pts{a, b};
  for (auto& p : peaks) {
    if (!(p.width > 0) || !std::isfinite(p.center)) continue;
    if (p.center > a && p.center < b) pts.push_back(p.center);
    for (double f = 1.0; f < 1e13; f *= 4.0)
      for (double sgn : {-1.0, 1.0}) {
        double x = p.center + sgn * f * p.width;
        if (x > a && x < b) pts.push_back(x);
      }
  }
  std::sort(pts.begin(), pts.end());
  return pts;
}

// the core |s - c| < 30 w of the first peak is integrated in u with s = c + w tan(u);
// integrands taking (s, x) also get the offset x = s - c without rounding through s
template <class F>
auto radial_integrate(F&& f0, double smax, const std::vector<Peak>& peaks, double rel_tol = 1e-10,
                      double abs_tol = 0.0) {
  double c = peaks.empty() ? 0.0 : peaks[0].center;
  auto f2 = [&](double s, double x) {
    if constexpr (std::is_invocable_v<F, double, double>) return f0(s, x);
    else return f0(s);
  };
  auto f = [&](double s) { return f2(s, s - c); };
  using T = decltype(f(0.0));
  if (peaks.empty() || !(peaks[0].width > 0) || peaks[0].center - 30 * peaks[0].width >= smax)
    return adaptive_integrate(f, peak_breakpoints(0.0, smax, peaks), rel_tol, abs_tol);
  const Peak& p = peaks[0];
  double lo = std::max(0.0, p.center - 30 * p.width), hi = std::min(smax, p.center + 30 * p.width);
  auto g = [&](double u) {
    double t = std::tan(u);
    double x = p.width * t;
    return T(f2(p.center + x, x) * (p.width * (1 + t * t)));
  };
  double ul = std::atan((lo - p.center) / p.width), uh = std::atan((hi - p.center) / p.width);
  std::vector<double> upts{ul, uh};
  if (ul < 0 && uh > 0) upts.push_back(0.0);
  QuadResult<T> out = adaptive_integrate(g, upts, rel_tol, abs_tol);
  auto pts = peak_breakpoints(0.0, smax, peaks);
  std::vector<double> left, right;
  for (double x : pts) {
    if (x <= lo) left.push_back(x);
    if (x >= hi) right.push_back(x);
  }
  if (lo > 0) {
    left.push_back(lo);
    auto a = adaptive_integrate(f, left, rel_tol, abs_tol);
    out.value += a.value;
    out.error += a.error;
  }
  if (hi < smax) {
    right.push_back(hi);
    auto b = adaptive_integrate(f, right, rel_tol, abs_tol);
    out.value += b.value;
    out.error += b.error;
  }
  return out;
}

// ---- self-energy ----

struct SelfEnergyValue {
  double alpha = 0.0;
  double re_part = 0.0;
  double im_part = 0.0;  // I(alpha) >= 0
  double quadrature_error = 0.0;
  cplx theta() const { return {re_part, -im_part}; }
};

struct extrapolation_error : std::runtime_error {
  std::vector<double> eps;
  std::vector<cplx> values;
  extrapolation_error(const std::string& w, std::vector<double> e, std::vector<cplx> v)
      : std::runtime_error(w), eps(std::move(e)), values(std::move(v)) {}
};

// reference point: |r| = sqrt(2 alpha) for alpha > 0, r = 0 otherwise
inline double reference_radius(double alpha) { return alpha > 0 ? std::sqrt(2 * alpha) : 0.0; }

// I(alpha) = pi int delta(e(q)-alpha) |B^(q-r)|^2 dq, polar angle integral by adaptive GK
inline double self_energy_imag(double alpha, const PotentialProfile& prof, int d = 3, double tol = 1e-12) {
  if (alpha <= 0 || prof.is_zero()) return 0.0;
  double rho = std::sqrt(2 * alpha);
  auto f = [&](double th) { return prof.bhat2(2 * rho * std::sin(0.5 * th)) * std::pow(std::sin(th), d - 2); };
  auto r = adaptive_integrate(f, {0.0, 0.5 * pi, pi}, tol);
  return pi * std::pow(rho, d - 2) * sphere_area(d - 1) * r.value;
}

// same quantity with an arbitrary reference point r, e(r) = alpha, by a sphere product rule
inline double self_energy_imag_at(const Vec& r, const PotentialProfile& prof, unsigned n = 48) {
  double alpha = dispersion_relation(r);
  if (alpha <= 0) return 0.0;
  auto h = [&](const Vec& q) { return prof.bhat2((q - r).norm()); };
  return pi * shell_functional(h, alpha, static_cast<int>(r.size()), n);
}

inline void require_decay(const PotentialProfile& prof) {
  if (!prof.decays()) throw domain_error("real part of the self-energy diverges for a non-decaying profile");
}

// Theta_eps(alpha) = int |B^(q-r)|^2 / (alpha - e(q) + i eps) dq
inline QuadResult<cplx> self_energy_eps(double alpha, double eps, const PotentialProfile& prof, int d = 3,
                                        double tol = 1e-9) {
  require_decay(prof);
  double rho = reference_radius(alpha);
  double smax = rho + prof.support();
  std::vector<Peak> pk;
  if (alpha > 0) pk.push_back({rho, eps / std::max(rho, std::sqrt(eps))});
  auto f = [&](double s) {
    return cplx(std::pow(s, d - 1) * prof.angular(s, rho, 2, d)) / cplx(alpha - 0.5 * s * s, eps);
  };
  return radial_integrate(f, smax, pk, tol);
}

// Neville extrapolation of the eps-sequence to eps = 0
inline SelfEnergyValue self_energy(double alpha, const PotentialProfile& prof,
                                   std::vector<double> eps_seq = {1e-2, 1e-3, 1e-4}, int d = 3) {
  if (eps_seq.size() < 2) throw domain_error("self_energy: need >= 2 eps values");
  for (std::size_t i = 0; i + 1 < eps_seq.size(); ++i)
    if (!(eps_seq[i] > eps_seq[i + 1] && eps_seq[i + 1] > 0)) throw domain_error("eps_seq must decrease strictly");
  SelfEnergyValue out;
  out.alpha = alpha;
  if (prof.is_zero()) return out;
  std::vector<cplx> vals;
  double qerr = 0.0;
  for (double e : eps_seq) {
    auto r = self_energy_eps(alpha, e, prof, d);
    vals.push_back(r.value);
    qerr += r.error;
  }
  auto neville = [&](std::size_t from) {
    std::vector<cplx> P(vals.begin() + from, vals.end());
    std::vector<double> x(eps_seq.begin() + from, eps_seq.end());
    for (std::size_t m = 1; m < P.size(); ++m)
      for (std::size_t i = 0; i + m < P.size(); ++i) P[i] = (x[i + m] * P[i] - x[i] * P[i + 1]) / (x[i + m] - x[i]);
    return P[0];
  };
  cplx all = neville(0), tail = neville(eps_seq.size() - 2);
  double ext = std::abs(all - tail);
  if (ext > 0.1 * std::abs(all) + 1e-12) throw extrapolation_error("eps -> 0 extrapolation unstable", eps_seq, vals);
  out.re_part = all.real();
  out.im_part = std::max(0.0, -all.imag());
  if (alpha <= 0) out.im_part = 0.0;
  out.quadrature_error = ext + qerr;
  return out;
}

// principal value by symmetric subtraction around the pole, I from the shell formula
inline SelfEnergyValue self_energy_pv(double alpha, const PotentialProfile& prof, int d = 3, double tol = 1e-12) {
  SelfEnergyValue out;
  out.alpha = alpha;
  if (prof.is_zero()) return out;
  require_decay(prof);
  double rho = reference_radius(alpha);
  double smax = rho + prof.support();
  auto g = [&](double s) { return std::pow(s, d - 1) * prof.angular(s, rho, 2, d); };
  if (alpha <= 0) {
    auto r = adaptive_integrate([&](double s) { return g(s) / (alpha - 0.5 * s * s); }, {0.0, 1.0, smax}, tol);
    out.re_part = r.value;
    out.quadrature_error = r.error;
    return out;
  }
  double s0 = rho;
  auto h = [&](double s) { return 2 * g(s) / (s0 + s); };
  double h0 = h(s0);
  auto sub = [&](double s) { return (h(s) - h0) / (s0 - s); };
  auto a = adaptive_integrate(sub, {0.0, s0, 2 * s0}, tol, 1e-14);
  QuadResult<double> b;
  if (smax > 2 * s0) b = adaptive_integrate([&](double s) { return h(s) / (s0 - s); }, {2 * s0, 2 * s0 + 1.0, smax}, tol);
  out.re_part = a.value + b.value;
  out.im_part = pi * std::pow(rho, d - 2) * prof.angular(rho, rho, 2, d);
  out.quadrature_error = a.error + b.error;
  return out;
}

// cubic B-spline table of R and I over rho = sqrt(2e)
class SelfEnergyTable {
 public:
  SelfEnergyTable(const PotentialProfile& prof, int d = 3, double rho_max = 14.0, int n = 561)
      : prof_(prof), d_(d), rho_max_(rho_max) {
    if (prof.is_zero()) {
      zero_ = true;
      return;
    }
    h_ = rho_max / (n - 1);
    std::vector<double> R(n), I(n);
    for (int i = 0; i < n; ++i) {
      auto v = self_energy_pv(0.5 * sq(i * h_), prof, d);
      R[i] = v.re_part;
      I[i] = v.im_part;
    }
    // I is odd in rho, R even: exact endpoint slopes at rho = 0
    double dI0 = (4 * I[1] - I[2]) / (2 * h_);  // one-sided, I(0) = 0
    re_ = std::make_unique<boost::math::interpolators::cardinal_cubic_b_spline<double>>(R.begin(), R.end(), 0.0, h_,
                                                                                      0.0);
    im_ = std::make_unique<boost::math::interpolators::cardinal_cubic_b_spline<double>>(I.begin(), I.end(), 0.0, h_,
                                                                                      dI0);
  }
  // Theta(e) = R - iI
  cplx operator()(double e) const {
    if (zero_) return 0.0;
    if (e < 0) {
      auto v = self_energy_pv(e, prof_, d_);
      return v.theta();
    }
    double rho = std::sqrt(2 * e);
    if (rho > rho_max_) return self_energy_pv(e, prof_, d_).theta();
    return {(*re_)(rho), -std::max(0.0, (*im_)(rho))};
  }
  double R(double e) const { return (*this)(e).real(); }
  double I(double e) const { return -(*this)(e).imag(); }
  const PotentialProfile& profile() const { return prof_; }
  int dim() const { return d_; }

 private:
  PotentialProfile prof_;
  int d_;
  double rho_max_;
  double h_ = 0.0;
  bool zero_ = false;
  std::unique_ptr<boost::math::interpolators::cardinal_cubic_b_spline<double>> re_, im_;
};

// shared tables for the built-in profiles
inline std::shared_ptr<const SelfEnergyTable> theta_table(const PotentialProfile& prof, int d = 3) {
  static std::map<std::string, std::shared_ptr<const SelfEnergyTable>> cache;
  static std::mutex mu;
  if (prof.kind == PotentialProfile::Kind::custom) return std::make_shared<SelfEnergyTable>(prof, d);
  std::lock_guard<std::mutex> lock(mu);
  auto key = prof.name() + "/" + std::to_string(d);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto t = std::make_shared<const SelfEnergyTable>(prof, d);
  cache[key] = t;
  return t;
}

using ThetaFn = std::function<cplx(double)>;

inline ThetaFn theta_fn(std::shared_ptr<const SelfEnergyTable> t) {
  return [t](double e) { return (*t)(e); };
}

// omega = e + lambda^2 Theta(e)
inline cplx omega(double e, double lambda, const ThetaFn& theta) { return e + lambda * lambda * theta(e); }

inline cplx renormalized_propagator(double alpha, const Vec& v, const ModelParams& P, const ThetaFn& theta) {
  if (!(P.eta > 0)) throw domain_error("eta must be > 0");
  return 1.0 / (alpha - omega(dispersion_relation(v), P.lambda, theta) + cplx(0, P.eta));
}

// resonance of alpha - omega(s) in the radial variable
inline Peak omega_peak(double alpha, double lambda, double eta, const ThetaFn& theta) {
  cplx th = theta(std::max(alpha, 0.0));
  double e0 = alpha - lambda * lambda * th.real();
  double gam = lambda * lambda * (-th.imag()) + eta;
  if (e0 <= 0) return {0.0, std::sqrt(gam)};
  double s = std::sqrt(2 * e0);
  return {s, gam / std::max(s, std::sqrt(gam))};
}

// ---- propagator bound checks ----

struct PropagatorCheck {
  double logest_lhs = 0, logest_rhs = 0;
  double a2_lhs = 0, a2_rhs = 0;
  double a3_lhs = 0, a3_rhs = 0;
  double ladder_value = 0;  // ladder integral, left side
  double ladder_C0 = 0;     // smallest C0 making the bound hold
  double ratio_logest() const { return logest_lhs / logest_rhs; }
  double ratio_a2() const { return a2_lhs / a2_rhs; }
  double ratio_a3() const { return a3_lhs / a3_rhs; }
};

inline PropagatorCheck propagator_integral_check(const ModelParams& P, const PotentialProfile& prof, double alpha,
                                                 double qnorm, double a, const ThetaFn& theta) {
  if (!(P.eta <= P.lambda * P.lambda * (1 + 1e-12) && P.eta >= std::pow(P.lambda, 2 + 4 * P.kappa) * (1 - 1e-12)))
    throw domain_error("propagator_integral_check: need lambda^2 >= eta >= lambda^{2+4kappa}");
  if (P.kappa > 1.0 / 12) throw domain_error("propagator_integral_check: kappa <= 1/12");
  if (a < 0 || a >= 1) throw domain_error("a must lie in [0,1)");
  int d = P.d;
  double lam2 = P.lambda * P.lambda;
  double smax = qnorm + prof.support();
  Peak pk = omega_peak(alpha, P.lambda, P.eta, theta);
  auto den = [&](double s) { return std::abs(alpha - omega(0.5 * s * s, P.lambda, theta) + cplx(0, P.eta)); };
  auto den0 = [&](double s) { return std::abs(cplx(alpha - 0.5 * s * s, P.eta)); };
  PropagatorCheck c;
  double br = bracket(alpha);
  double shell = bracket(qnorm - std::sqrt(2 * std::abs(alpha)));
  c.logest_lhs = radial_integrate([&](double s) { return std::pow(s, d - 1) * prof.angular(s, qnorm, 1, d) / den(s); },
                                  smax, {pk}, 1e-9)
                     .value;
  c.logest_rhs = std::abs(std::log(P.lambda)) * std::log(br) / (std::sqrt(br) * shell);
  c.a2_lhs = radial_integrate(
                 [&](double s) { return std::pow(s, d - 1) * prof.angular(s, qnorm, 1, d) / std::pow(den(s), 2 - a); },
                 smax, {pk}, 1e-9)
                 .value;
  c.a2_rhs = std::pow(lam2, -(1 - a)) / (std::pow(br, a / 2) * shell);
  Peak pk0{alpha > 0 ? std::sqrt(2 * alpha) : 0.0, P.eta / std::max(std::sqrt(2 * std::abs(alpha)), std::sqrt(P.eta))};
  c.a3_lhs = radial_integrate(
                 [&](double s) { return std::pow(s, d - 1) * prof.angular(s, qnorm, 1, d) / std::pow(den0(s), 2 - a); },
                 smax, {pk0}, 1e-9)
                 .value;
  c.a3_rhs = std::pow(P.eta, -2 * (1 - a)) / (std::pow(br, a / 2) * shell);
  c.ladder_value =
      lam2 * radial_integrate([&](double s) { return std::pow(s, d - 1) * prof.angular(s, qnorm, 2, d) / sq(den(s)); },
                              smax, {pk}, 1e-9)
                 .value;
  double scale = std::pow(P.lambda, -12 * P.kappa) *
                 (P.lambda + std::sqrt(std::abs(alpha - omega(0.5 * qnorm * qnorm, P.lambda, theta))));
  c.ladder_C0 = std::max(0.0, (c.ladder_value - 1.0) / scale);
  return c;
}

// ---- gate-theta cancellation factor ----

struct GateThetaValue {
  cplx omega_factor;
  double bound_ratio = 0;  // |Omega| / (lambda^2 eta^{-1/2})
  bool bound_ok = false;
};

// Omega(alpha,p) = [int |B^(q-p)|^2/(alpha - conj(omega(q)) - i eta) dq - conj(theta(p))] lambda^2/(alpha - conj(omega(p)) - i eta)
inline GateThetaValue gate_theta_factor(double alpha, double pnorm, const ModelParams& P,
                                        const PotentialProfile& prof, const ThetaFn& theta, double C = 10.0) {
  double lam2 = P.lambda * P.lambda;
  if (!(P.eta / std::pow(P.lambda, 3) > 10 && lam2 / P.eta > 10))
    throw domain_error("gate_theta_factor: need eta/lambda^3 > 10 and lambda^2/eta > 10");
  GateThetaValue out;
  if (prof.is_zero()) {
    out.bound_ok = true;
    return out;
  }
  int d = P.d;
  Peak pk = omega_peak(alpha, P.lambda, P.eta, theta);
  double smax = pnorm + prof.support();
  // alpha - e(s) = (alpha - c^2/2) - c x - x^2/2 around the resonance c
  double c = pk.center, a0 = alpha - 0.5 * c * c;
  auto f = [&](double s, double x) {
    cplx th = theta(0.5 * s * s);
    cplx den = a0 - c * x - 0.5 * x * x - lam2 * std::conj(th) - cplx(0, P.eta);
    return cplx(std::pow(s, d - 1) * prof.angular(s, pnorm, 2, d)) / den;
  };
  auto G = radial_integrate(f, smax, {pk}, 1e-12, 1e-14);
  double ep = 0.5 * pnorm * pnorm;
  // on-shell theta(p): reference point p itself
  cplx th = self_energy_pv(ep, prof, d, 1e-13).theta();
  cplx omp = ep + lam2 * theta(ep);
  out.omega_factor = (G.value - std::conj(th)) * lam2 / (alpha - std::conj(omp) - cplx(0, P.eta));
  out.bound_ratio = std::abs(out.omega_factor) / (lam2 / std::sqrt(P.eta));
  out.bound_ok = out.bound_ratio <= C;
  return out;
}

}  // namespace qdlab
