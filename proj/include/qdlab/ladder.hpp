#pragma once

// ladder terms W(t,k,O): resolvent form (k <= 2, radial reduction), Boltzmann semigroup form (Monte Carlo),
// the free k = 0 term, the resolvent-pair -> delta comparison and the heat-equation target

#include "qdlab/boltzmann.hpp"
#include "qdlab/core.hpp"
#include "qdlab/dispersion.hpp"
#include "qdlab/profile.hpp"
#include "qdlab/quadrature.hpp"
#include "qdlab/stats.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <array>
#include <functional>
#include <optional>
#include <random>

namespace qdlab {

// ---- initial states ----

// psi^(v) = N phi((|v - c| - r0) / w), phi(u) = exp(-1/(1-u^2)) on |u| < 1.
// c = 0, r0 > 0 gives a radial shell bump; r0 = 0 a packet around c.
struct InitialState {
  Vec center;
  double r0 = 1.0;
  double width = 0.25;
  double norm = 1.0;
  double env = 0.0;  // rejection envelope for u^{d-1} |psi^|^2 in u = |v - c|

  static double phi(double u) { return std::abs(u) < 1 ? std::exp(-1.0 / (1.0 - u * u)) : 0.0; }

  static InitialState bump(const Vec& c, double r0, double w) {
    if (!(w > 0) || r0 < 0) throw domain_error("InitialState: need width > 0 and r0 >= 0");
    if (r0 > 0 && r0 < w) throw domain_error("InitialState: shell bump needs r0 >= width");
    InitialState s;
    s.center = c;
    s.r0 = r0;
    s.width = w;
    int d = static_cast<int>(c.size());
    double lo = s.u_min(), hi = s.u_max();
    auto dens = [&](double u) { return std::pow(u, d - 1) * sq(phi((u - r0) / w)); };
    double m = adaptive_integrate(dens, {lo, r0 > 0 ? r0 : 0.5 * (lo + hi), hi}, 1e-13).value * sphere_area(d);
    s.norm = 1.0 / std::sqrt(m);
    double mx = 0.0;
    for (int i = 0; i <= 4096; ++i) mx = std::max(mx, dens(lo + (hi - lo) * i / 4096.0));
    s.env = 1.05 * mx;
    return s;
  }
  static InitialState shell(double rho, double w, int d = 3) { return bump(Vec::Zero(d), rho, w); }
  static InitialState packet(const Vec& vbar, double w) { return bump(vbar, 0.0, w); }

  int dim() const { return static_cast<int>(center.size()); }
  bool radial() const { return center.norm() == 0.0; }
  double u_min() const { return std::max(0.0, r0 - width); }
  double u_max() const { return r0 + width; }

  double psi0_hat_u(double u) const { return norm * phi((u - r0) / width); }
  cplx psi0_hat(const Vec& v) const { return psi0_hat_u((v - center).norm()); }

  // [|psi^|^2](e)
  double energy_density(double e, unsigned n = 48) const {
    if (!(e > 0)) return 0.0;
    double rho = std::sqrt(2 * e);
    if (radial()) return sphere_area(dim()) * std::pow(rho, dim() - 2) * sq(psi0_hat_u(rho));
    double c = center.norm();
    if (rho < c - u_max() || rho > c + u_max()) return 0.0;
    if (dim() == 3) {
      // u = |v - c| on the sphere: dw = 2 pi u du / (rho c)
      double lo = std::max(std::abs(rho - c), u_min()), hi = std::min(rho + c, u_max());
      if (!(hi > lo)) return 0.0;
      return 2 * pi / c *
             adaptive_integrate([&](double u) { return u * sq(psi0_hat_u(u)); }, {lo, hi}, 1e-11, 1e-300).value;
    }
    return shell_functional([&](const Vec& v) { return std::norm(psi0_hat(v)); }, e, dim(), n);
  }
  // speeds |v| carrying mass
  double speed_min() const { return radial() ? u_min() : std::max(0.0, center.norm() - u_max()); }
  double speed_max() const { return radial() ? u_max() : center.norm() + u_max(); }

  // conj(W^0)(xi, v) = psi^(v - xi/2) conj(psi^(v + xi/2))
  cplx wigner_hat_conj(const Vec& xi, const Vec& v) const {
    return psi0_hat(v - 0.5 * xi) * std::conj(psi0_hat(v + 0.5 * xi));
  }

  // v ~ |psi^|^2 dv
  template <class Rng>
  Vec sample(Rng& rng) const {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::normal_distribution<double> N;
    int d = dim();
    double lo = u_min(), hi = u_max(), u = 0.0;
    for (;;) {
      u = lo + (hi - lo) * U(rng);
      if (U(rng) * env < std::pow(u, d - 1) * sq(phi((u - r0) / width))) break;
    }
    Vec w(d);
    for (int i = 0; i < d; ++i) w(i) = N(rng);
    return center + u * w / w.norm();
  }
};

// ---- observables ----

// O(X, v) with Fourier transform O^(xi, v) = int e^{-2 pi i X.xi} O(X, v) dX.
// X-independent observables carry g(v) only (O^ is g(v) delta(xi)).
struct Observable {
  std::function<cplx(const Vec&, const Vec&)> ohat;
  std::function<double(const Vec&, const Vec&)> o_phys;
  std::function<double(const Vec&)> g;     // set when O(X, v) = g(v)
  std::function<double(double)> of_energy;  // set when the v-dependence is h(e(v))
  double xi_max = 0.0;                      // |O^| negligible beyond
  double x_scale = 0.0;                     // gaussian width in X, 0 if X-independent

  bool x_independent() const { return static_cast<bool>(g); }
  bool is_zero = false;

  static Observable velocity(std::function<double(const Vec&)> g) {
    Observable o;
    o.g = g;
    o.o_phys = [g](const Vec&, const Vec& v) { return g(v); };
    return o;
  }
  static Observable energy(std::function<double(double)> h) {
    auto o = velocity([h](const Vec& v) { return h(dispersion_relation(v)); });
    o.of_energy = h;
    return o;
  }
  static Observable one() { return energy([](double) { return 1.0; }); }
  static Observable zero() {
    auto o = energy([](double) { return 0.0; });
    o.is_zero = true;
    return o;
  }
  // exp(-|X|^2 / (2 s^2)) h(e(v))
  static Observable gaussian(double s, std::function<double(double)> h, int d = 3) {
    if (!(s > 0)) throw domain_error("Observable::gaussian: s must be > 0");
    Observable o;
    o.of_energy = h;
    o.x_scale = s;
    o.o_phys = [s, h](const Vec& X, const Vec& v) { return std::exp(-X.squaredNorm() / (2 * s * s)) * h(dispersion_relation(v)); };
    double c = std::pow(2 * pi * s * s, 0.5 * d);
    o.ohat = [s, h, c](const Vec& xi, const Vec& v) {
      return cplx(c * std::exp(-2 * pi * pi * s * s * xi.squaredNorm()) * h(dispersion_relation(v)));
    };
    o.xi_max = std::sqrt(40.0 / (2 * pi * pi)) / s;
    return o;
  }
};

// ---- terms ----

struct LadderTerm {
  int k = 0;
  cplx value{};
  double stderr_ = 0.0;  // MC standard error or quadrature error
  std::string route;     // resolvent | semigroup | free
};

// f[z_1..z_n] for f(z) = exp(-i t z)
inline cplx time_kernel(double t, const std::vector<cplx>& z) {
  const std::size_t n = z.size();
  if (n == 0) throw domain_error("time_kernel: no nodes");
  const cplx mi(0, -t);
  if (n == 1) return std::exp(mi * z[0]);
  if (n == 2) {
    cplx x = mi * (z[1] - z[0]);
    cplx phi1 = std::abs(x) < 1e-5 ? 1.0 + x * (0.5 + x / 6.0) : (std::exp(x) - 1.0) / x;
    return std::exp(mi * z[0]) * mi * phi1;
  }
  if (n == 3) {
    // farthest pair outermost keeps the recursion stable
    std::array<cplx, 3> y{z[0], z[1], z[2]};
    double g01 = std::abs(y[0] - y[1]), g02 = std::abs(y[0] - y[2]), g12 = std::abs(y[1] - y[2]);
    if (g01 >= g02 && g01 >= g12) std::swap(y[1], y[2]);
    else if (g12 >= g02 && g12 >= g01) std::swap(y[0], y[1]);
    if (t * std::abs(y[2] - y[0]) > 1e-3)
      return (time_kernel(t, {y[1], y[2]}) - time_kernel(t, {y[0], y[1]})) / (y[2] - y[0]);
  }
  cplx c = 0.0;
  for (auto& w : z) c += w;
  c /= static_cast<double>(n);
  Eigen::MatrixXcd J = Eigen::MatrixXcd::Zero(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    J(i, i) = mi * (z[i] - c);
    if (i + 1 < n) J(i, i + 1) = mi;
  }
  Eigen::MatrixXcd E = J.exp();
  return std::exp(mi * c) * E(0, n - 1);
}

struct FreeTermRule {
  unsigned radial = 24;  // Gauss-Legendre points per radial direction
  unsigned sphere = 12;  // sphere_rule order
};

// Xi_0 = int dxi dv e^{i t eps v.xi} e^{2 t lambda^2 Im theta(e(v))} O^(xi,v) conj(W^0)(eps xi, v)
inline cplx free_term(double t, const ModelParams& P, const Observable& obs, const InitialState& init,
                      const ThetaFn& theta, FreeTermRule rule = {}) {
  const int d = init.dim();
  if (obs.is_zero) return 0.0;
  double lam2 = P.lambda * P.lambda;
  auto damp = [&](const Vec& v) { return std::exp(2 * t * lam2 * theta(dispersion_relation(v)).imag()); };
  SphereRule S = sphere_rule(d, rule.sphere);
  double pad = obs.x_independent() ? 0.0 : 0.5 * P.epsilon * obs.xi_max;
  Rule ru = gauss_legendre(rule.radial, std::max(0.0, init.u_min() - pad), init.u_max() + pad);
  if (obs.x_independent()) {
    cplx sum = 0.0;
    for (std::size_t i = 0; i < ru.x.size(); ++i)
      for (std::size_t j = 0; j < S.x.size(); ++j) {
        Vec v = init.center + ru.x[i] * S.x[j];
        sum += ru.w[i] * S.w[j] * std::pow(ru.x[i], d - 1) * damp(v) * obs.g(v) * std::norm(init.psi0_hat(v));
      }
    return sum;
  }
  if (!obs.ohat) throw domain_error("free_term: observable has no Fourier form");
  Rule rx = gauss_legendre(rule.radial, 0.0, obs.xi_max);
  cplx sum = 0.0;
  for (std::size_t i = 0; i < ru.x.size(); ++i)
    for (std::size_t j = 0; j < S.x.size(); ++j) {
      Vec v = init.center + ru.x[i] * S.x[j];
      double wv = ru.w[i] * S.w[j] * std::pow(ru.x[i], d - 1);
      cplx dv = damp(v);
      cplx inner = 0.0;
      for (std::size_t a = 0; a < rx.x.size(); ++a)
        for (std::size_t b = 0; b < S.x.size(); ++b) {
          Vec xi = rx.x[a] * S.x[b];
          cplx w = init.wigner_hat_conj(P.epsilon * xi, v);
          if (w == 0.0) continue;
          inner += rx.w[a] * S.w[b] * std::pow(rx.x[a], d - 1) * std::exp(cplx(0, t * P.epsilon * v.dot(xi))) *
                   obs.ohat(xi, v) * w;
        }
      sum += wv * dv * inner;
    }
  return sum;
}

// ---- resolvent pair -> delta ----

struct ResolventDeltaReport {
  cplx omega_integral{};
  cplx delta_form{};
  double difference = 0.0;
  double ratio = 0.0;  // difference / lambda^{1/2 - 4 kappa}
  double quadrature_error = 0.0;
};

// f radial: f(p) = fr(|p|); r along the first axis
inline ResolventDeltaReport resolvent_pair_delta_check(const std::function<double(double)>& fr, double alpha,
                                                       double beta, double rnorm, const ModelParams& P,
                                                       const ThetaFn& theta, double smax = 12.0) {
  const double lam = P.lambda, lam2 = lam * lam, eta = P.eta;
  if (P.d != 3) throw domain_error("resolvent_pair_delta_check: d = 3 only");
  if (!(P.kappa < 0.125)) throw domain_error("resolvent_pair_delta_check: need kappa < 1/8");
  if (rnorm < 0 || rnorm > std::pow(lam, 2 + P.kappa / 4) * (1 + 1e-12))
    throw domain_error("resolvent_pair_delta_check: need |r| <= lambda^{2+kappa/4}");
  if (eta < std::pow(lam, 2 + 4 * P.kappa) * (1 - 1e-12) || eta > std::pow(lam, 2 + P.kappa) * (1 + 1e-12))
    throw domain_error("resolvent_pair_delta_check: need lambda^{2+4kappa} <= eta <= lambda^{2+kappa}");
  ResolventDeltaReport rep;
  const double gamma = 0.5 * (alpha + beta);
  if (!(gamma > 0)) throw domain_error("resolvent_pair_delta_check: need (alpha+beta)/2 > 0");

  auto om = [&](double e) { return omega(e, lam, theta); };
  Peak pa = omega_peak(alpha, lam, eta, theta), pb = omega_peak(beta, lam, eta, theta);
  auto speak = [](const Peak& p) {
    double s = std::sqrt(2 * std::max(p.center, 1e-12));
    return Peak{s, p.width / s};
  };
  std::vector<Peak> peaks{speak(pa), speak(pb)};
  auto integrand = [&](double s, double c) {
    double em = 0.5 * (s * s - 2 * s * c * rnorm + rnorm * rnorm);
    double ep = 0.5 * (s * s + 2 * s * c * rnorm + rnorm * rnorm);
    cplx den = (alpha - std::conj(om(std::max(em, 0.0))) - cplx(0, eta)) * (beta - om(std::max(ep, 0.0)) + cplx(0, eta));
    return lam2 * fr(s) / den;
  };
  double err = 0.0;
  if (rnorm == 0.0) {
    auto q = radial_integrate([&](double s) { return 4 * pi * s * s * integrand(s, 0.0); }, smax, peaks, 1e-9, 1e-15);
    rep.omega_integral = q.value;
    err = q.error;
  } else {
    auto inner = [&](double c) {
      auto q = radial_integrate([&](double s) { return 2 * pi * s * s * integrand(s, c); }, smax, peaks, 1e-9, 1e-15);
      err += q.error;
      return q.value;
    };
    auto q = adaptive_integrate(inner, {-1.0, 0.0, 1.0}, 1e-8, 1e-14);
    rep.omega_integral = q.value;
    err = q.error + err / 1e3;
  }
  // -2 pi i lambda^2 int f delta(e - gamma) / ((alpha-beta) + 2 p.r - 2i(lambda^2 I(gamma) + eta)) dp
  double rho = std::sqrt(2 * gamma);
  double G = lam2 * (-theta(gamma).imag()) + eta;
  cplx A = cplx(alpha - beta, -2 * G);
  double B = 2 * rho * rnorm;
  // int_{-1}^{1} dc / (A + B c)
  cplx ang = std::abs(B) < 1e-14 * std::abs(A) ? 2.0 / A : (std::log(A + B) - std::log(A - B)) / B;
  rep.delta_form = cplx(0, -2 * pi) * lam2 * (2 * pi * rho * fr(rho)) * ang;
  rep.difference = std::abs(rep.omega_integral - rep.delta_form);
  rep.ratio = rep.difference / std::pow(lam, 0.5 - 4 * P.kappa);
  rep.quadrature_error = err;
  return rep;
}

// ---- resolvent form ----

// the alpha and beta integrals close by residues:
//   e^{2 t eta}/(2 pi)^2 int dalpha dbeta e^{i(alpha-beta)t} prod conj(R(alpha, v_j)) R(beta, v_j) = |f[omega_1..omega_n]|^2
// with f(z) = e^{-itz}; what is left is a radial integral, valid for radial psi^ and O = h(e(v)).
inline LadderTerm ladder_term_resolvent(double t, int k, const ModelParams& P, const Observable& obs,
                                        const InitialState& init, const PotentialProfile& prof, const ThetaFn& theta,
                                        double rel_tol = 1e-6, long max_evals = 50000000) {
  if (k < 1 || k > 2) throw domain_error("ladder_term_resolvent: k in {1, 2}");
  if (P.d != 3 || init.dim() != 3) throw domain_error("ladder_term_resolvent: d = 3 only");
  if (!init.radial()) throw domain_error("ladder_term_resolvent: needs a radial initial state");
  if (!obs.x_independent() || !obs.of_energy)
    throw domain_error("ladder_term_resolvent: needs an X-independent observable of the form h(e(v))");
  LadderTerm out;
  out.k = k;
  out.route = "resolvent";
  if (obs.is_zero || prof.is_zero()) return out;
  const double lam = P.lambda, lam2 = lam * lam;
  const double smax = init.u_max() + prof.support();
  long evals = 0;  // counted across refinements
  auto w_of = [&](double s) { return omega(0.5 * s * s, lam, theta); };
  auto width = [&](double s) {
    double g = std::max(1.0 / t, lam2 * (-theta(0.5 * s * s).imag()));
    return g / std::max(s, 1e-3);
  };
  auto count = [&] {
    if (++evals > max_evals)
      throw quadrature_error("ladder_term_resolvent: evaluation cap exceeded after " + std::to_string(evals) + " calls",
                             static_cast<double>(evals));
  };
  if (k == 1) {
    auto edge = [&](double s1) {
      cplx w1 = w_of(s1);
      return radial_integrate(
                 [&](double s2) {
                   count();
                   return s2 * s2 * prof.angular(s2, s1, 2) * obs.of_energy(0.5 * s2 * s2) *
                          std::norm(time_kernel(t, {w1, w_of(s2)}));
                 },
                 smax, {{s1, width(s1)}}, 0.1 * rel_tol, 1e-300)
          .value;
    };
    auto q = adaptive_integrate([&](double s1) { return 4 * pi * s1 * s1 * sq(init.psi0_hat_u(s1)) * edge(s1); },
                                {init.u_min(), init.r0, init.u_max()}, rel_tol, 1e-300);
    out.value = lam2 * q.value;
    out.stderr_ = lam2 * q.error + std::abs(out.value) * 0.1 * rel_tol;
    return out;
  }
  // k = 2: three nested radial sums on fixed Gauss-Legendre rules over the peak breakpoints,
  // order raised until two successive orders agree
  auto sweep = [&](unsigned n) {
    auto rule = [&](const std::vector<Peak>& peaks) {
      auto pts = peak_breakpoints(0.0, smax, peaks);
      Rule r;
      for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        Rule g = gauss_legendre(n, pts[i], pts[i + 1]);
        r.x.insert(r.x.end(), g.x.begin(), g.x.end());
        r.w.insert(r.w.end(), g.w.begin(), g.w.end());
      }
      return r;
    };
    Rule r1 = gauss_legendre(4 * n, init.u_min(), init.u_max());
    double total = 0.0;
    for (std::size_t a = 0; a < r1.x.size(); ++a) {
      double s1 = r1.x[a];
      cplx w1 = w_of(s1);
      Rule r2 = rule({{s1, width(s1)}});
      double mid = 0.0;
      for (std::size_t b = 0; b < r2.x.size(); ++b) {
        double s2 = r2.x[b];
        double a12 = prof.angular(s2, s1, 2);
        if (a12 == 0.0) continue;
        cplx w2 = w_of(s2);
        Rule r3 = rule({{s2, width(s2)}, {s1, width(s1)}});
        double in = 0.0;
        for (std::size_t c = 0; c < r3.x.size(); ++c) {
          double s3 = r3.x[c];
          count();
          in += r3.w[c] * s3 * s3 * prof.angular(s3, s2, 2) * obs.of_energy(0.5 * s3 * s3) *
                std::norm(time_kernel(t, {w1, w2, w_of(s3)}));
        }
        mid += r2.w[b] * s2 * s2 * a12 * in;
      }
      total += r1.w[a] * 4 * pi * s1 * s1 * sq(init.psi0_hat_u(s1)) * mid;
    }
    return sq(lam2) * total;
  };
  double prev = sweep(6);
  for (unsigned n = 10;; n += 4) {
    double cur;
    try {
      cur = sweep(n);
    } catch (const quadrature_error&) {
      throw quadrature_error("ladder_term_resolvent: evaluation cap exceeded at order " + std::to_string(n) +
                                 ", last value " + std::to_string(prev),
                             std::abs(prev));
    }
    double err = std::abs(cur - prev);
    prev = cur;
    if (err <= rel_tol * std::abs(cur) || cur == 0.0) {
      out.value = cur;
      out.stderr_ = err;
      return out;
    }
  }
}

// ---- semigroup form ----

struct SemigroupPath {
  double a = 0.0;     // energy
  double rate = 0.0;  // 2 I(a)
  std::vector<Vec> v;         // v_1..v_{k+1}
  std::vector<double> frac;   // simplex fractions tau_j / tau
};

template <class Rng>
SemigroupPath draw_semigroup_path(int k, const InitialState& init, const PotentialProfile& prof, Rng& rng) {
  SemigroupPath p;
  p.v.push_back(init.sample(rng));
  p.a = dispersion_relation(p.v[0]);
  JumpProcess J(prof, p.a, init.dim());
  p.rate = J.rate();
  for (int j = 0; j < k; ++j) p.v.push_back(J.jump(p.v.back(), rng));
  std::exponential_distribution<double> E(1.0);
  double s = 0.0;
  for (int j = 0; j <= k; ++j) {
    p.frac.push_back(E(rng));
    s += p.frac.back();
  }
  for (auto& f : p.frac) f /= s;
  return p;
}

inline double poisson_weight(int k, double mean) {
  if (mean <= 0) return k == 0 ? 1.0 : 0.0;
  return std::exp(-mean + k * std::log(mean) - std::lgamma(k + 1.0));
}

// contribution e^{-2 tau I}(2 tau I)^k/k! O(lambda^{kappa/2} x, v_{k+1}), x = (2 pi)^{-1} tau sum_j frac_j v_j
inline double semigroup_value(const SemigroupPath& p, double tau, double xscale, const Observable& obs) {
  int k = static_cast<int>(p.v.size()) - 1;
  double w = poisson_weight(k, tau * p.rate);
  if (w == 0.0) return 0.0;
  if (obs.x_independent()) return w * obs.g(p.v.back());
  Vec x = Vec::Zero(p.v[0].size());
  for (int j = 0; j <= k; ++j) x += p.frac[j] * p.v[j];
  x *= xscale * tau / (2 * pi);
  return w * obs.o_phys(x, p.v.back());
}

inline std::uint64_t semigroup_index(int k, long i) { return (static_cast<std::uint64_t>(k) << 40) + static_cast<std::uint64_t>(i); }

// streams depend on (seed, k, i) only, so runs at different lambda share random numbers
inline LadderTerm ladder_term_semigroup(double t, int k, const ModelParams& P, const Observable& obs,
                                        const InitialState& init, const PotentialProfile& prof, std::uint64_t seed,
                                        long n_samples = 100000) {
  if (k < 0) throw domain_error("ladder_term_semigroup: k >= 0");
  if (n_samples < 2) throw domain_error("ladder_term_semigroup: need at least 2 samples");
  if (!obs.o_phys) throw domain_error("ladder_term_semigroup: observable needs a physical-space form");
  LadderTerm out;
  out.k = k;
  out.route = "semigroup";
  double tau = P.lambda * P.lambda * t;
  double xs = std::pow(P.lambda, P.kappa / 2);
  Accum acc;
  for (long i = 0; i < n_samples; ++i) {
    auto rng = stream(seed, semigroup_index(k, i));
    acc.add(semigroup_value(draw_semigroup_path(k, init, prof, rng), tau, xs, obs));
  }
  out.value = acc.mean;
  out.stderr_ = acc.stderr_();
  return out;
}

// E over the jump process of O(lambda^{kappa/2} x(tau), v(tau)) with v(0) ~ |psi^|^2, by trajectories
inline LadderTerm jump_process_average(double tau, double xscale, const Observable& obs, const InitialState& init,
                                       const PotentialProfile& prof, std::uint64_t seed, long n_traj) {
  Accum acc;
  for (long i = 0; i < n_traj; ++i) {
    auto rng = stream(seed, i);
    Vec v0 = init.sample(rng);
    JumpProcess J(prof, dispersion_relation(v0), init.dim());
    auto tr = simulate_trajectory(J, v0, tau, rng);
    Vec x = tr.displacement(tau) * (xscale / (2 * pi));
    acc.add(obs.o_phys(x, tr.at(tau)));
  }
  return {-1, acc.mean, acc.stderr_(), "trajectory"};
}

// ---- heat equation ----

using DiffusionProvider = std::function<double(double)>;

inline DiffusionProvider boltzmann_diffusion(const PotentialProfile& prof, int d = 3) {
  return [prof, d](double e) { return diffusion_closed_form(e, prof, d); };
}

struct HeatSolution {
  double T = 0.0;
  Vec X;
  double e = 0.0;
  double value = 0.0;
};

// f(T,X,e) = [|psi^|^2](e) (4 pi D_e T)^{-d/2} exp(-|X|^2 / (4 D_e T))
inline double heat_solution(double T, const Vec& X, double e, const DiffusionProvider& D, const InitialState& init) {
  if (!(T > 0)) throw domain_error("heat_solution: T must be > 0");
  double De = D(e);
  if (!(De > 0)) throw domain_error("heat_solution: D_e must be > 0");
  int d = static_cast<int>(X.size());
  return init.energy_density(e) * std::pow(4 * pi * De * T, -0.5 * d) * std::exp(-X.squaredNorm() / (4 * De * T));
}

inline HeatSolution heat_point(double T, const Vec& X, double e, const DiffusionProvider& D, const InitialState& init) {
  return {T, X, e, heat_solution(T, X, e, D, init)};
}

// Gauss-Hermite nodes for weight exp(-x^2) by Golub-Welsch
inline Rule gauss_hermite(unsigned n) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (unsigned i = 1; i < n; ++i) J(i, i - 1) = J(i - 1, i) = std::sqrt(0.5 * i);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  Rule r;
  for (unsigned i = 0; i < n; ++i) {
    r.x.push_back(es.eigenvalues()(i));
    r.w.push_back(std::sqrt(pi) * sq(es.eigenvectors()(0, i)));
  }
  return r;
}

struct HeatTargetRule {
  unsigned energy = 32;
  unsigned sphere = 10;
  unsigned hermite = 14;
};

// int dX dv O(X,v) f(T,X,e(v)) / [1](e(v)): the shell-normalized target, so O = 1 has mass 1
inline double heat_target(double T, const Observable& obs, const InitialState& init, const DiffusionProvider& D,
                          HeatTargetRule rule = {}) {
  if (!(T > 0)) throw domain_error("heat_target: T must be > 0");
  const int d = init.dim();
  double smin = init.speed_min(), smax = init.speed_max();
  Rule rs = gauss_legendre(rule.energy, smin, smax);
  SphereRule S = sphere_rule(d, rule.sphere);
  Rule gh = gauss_hermite(rule.hermite);
  double area = sphere_area(d);
  double total = 0.0;
  for (std::size_t i = 0; i < rs.x.size(); ++i) {
    double s = rs.x[i], e = 0.5 * s * s;
    double mu = init.energy_density(e);  // de = s ds
    if (mu == 0.0) continue;
    double sig = std::sqrt(2 * D(e) * T);
    double shell = 0.0;
    for (std::size_t j = 0; j < S.x.size(); ++j) {
      Vec v = s * S.x[j];
      double ex = 0.0;
      if (obs.x_independent()) {
        ex = obs.g(v);
      } else {
        // E over X ~ N(0, sig^2 I)
        std::vector<unsigned> idx(d, 0);
        for (;;) {
          Vec X(d);
          double w = 1.0;
          for (int c = 0; c < d; ++c) {
            X(c) = std::sqrt(2.0) * sig * gh.x[idx[c]];
            w *= gh.w[idx[c]] / std::sqrt(pi);
          }
          ex += w * obs.o_phys(X, v);
          int c = 0;
          while (c < d && ++idx[c] == rule.hermite) idx[c++] = 0;
          if (c == d) break;
        }
      }
      shell += S.w[j] * ex;
    }
    total += rs.w[i] * s * mu * shell / area;
  }
  return total;
}

struct HeatLimitRow {
  double lambda = 0.0;
  double tau = 0.0;
  long K = 0;
  double semigroup_sum = 0.0;
  double stderr_ = 0.0;
  double target = 0.0;
  double gap = 0.0;
};

struct HeatLimitReport {
  std::vector<HeatLimitRow> rows;
  std::vector<double> gap_step;         // gap_{i+1} - gap_i
  std::vector<double> gap_step_stderr;  // paired (common random numbers)
  bool monotone = false;
  bool warning = false;  // a step increases beyond two paired standard errors
};

// sum_{k<K} semigroup terms against the heat target along a lambda sequence; the same draws are used for
// every lambda so the gap differences carry little noise
inline HeatLimitReport heat_limit_residual(double T, const Observable& obs, const InitialState& init,
                                           const std::vector<double>& lambdas, const ModelParams& tmpl,
                                           const PotentialProfile& prof, std::uint64_t seed, long n_per_k = 20000,
                                           DiffusionProvider D = {}) {
  if (lambdas.size() < 2) throw domain_error("heat_limit_residual: need at least two lambda values");
  if (!D) D = boltzmann_diffusion(prof, init.dim());
  const std::size_t m = lambdas.size();
  HeatLimitReport rep;
  std::vector<ModelParams> Ps;
  long kmax = 0;
  for (double lam : lambdas) {
    Ps.push_back(ModelParams::scaled(init.dim(), lam, tmpl.kappa, tmpl.delta, T));
    kmax = std::max(kmax, Ps.back().K);
  }
  double target = heat_target(T, obs, init, D);
  std::vector<double> sum(m, 0.0), var(m, 0.0);
  std::vector<double> dvar(m - 1, 0.0);
  for (long k = 0; k < kmax; ++k) {
    std::vector<Accum> acc(m);
    std::vector<Accum> dacc(m - 1);
    for (long i = 0; i < n_per_k; ++i) {
      auto rng = stream(seed, semigroup_index(static_cast<int>(k), i));
      auto path = draw_semigroup_path(static_cast<int>(k), init, prof, rng);
      std::vector<double> val(m, 0.0);
      for (std::size_t j = 0; j < m; ++j)
        if (k < Ps[j].K) val[j] = semigroup_value(path, Ps[j].tau(), std::pow(lambdas[j], tmpl.kappa / 2), obs);
      for (std::size_t j = 0; j < m; ++j) acc[j].add(val[j]);
      for (std::size_t j = 0; j + 1 < m; ++j) dacc[j].add(val[j + 1] - val[j]);
    }
    for (std::size_t j = 0; j < m; ++j) {
      sum[j] += acc[j].mean;
      var[j] += sq(acc[j].stderr_());
    }
    for (std::size_t j = 0; j + 1 < m; ++j) dvar[j] += sq(dacc[j].stderr_());
  }
  for (std::size_t j = 0; j < m; ++j) {
    HeatLimitRow r;
    r.lambda = lambdas[j];
    r.tau = Ps[j].tau();
    r.K = Ps[j].K;
    r.semigroup_sum = sum[j];
    r.stderr_ = std::sqrt(var[j]);
    r.target = target;
    r.gap = std::abs(sum[j] - target);
    rep.rows.push_back(r);
  }
  rep.monotone = true;
  for (std::size_t j = 0; j + 1 < m; ++j) {
    double step = rep.rows[j + 1].gap - rep.rows[j].gap;
    double se = std::sqrt(dvar[j]);
    rep.gap_step.push_back(step);
    rep.gap_step_stderr.push_back(se);
    if (step >= 0) rep.monotone = false;
    if (step > 2 * se) rep.warning = true;
  }
  return rep;
}

}  // namespace qdlab
