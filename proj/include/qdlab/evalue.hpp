#pragma once

// Monte Carlo E-values of partitioned Feynman graphs and the time-kernel factorial bound

#include "qdlab/graphcalc.hpp"
#include "qdlab/ladder.hpp"

#include <random>

namespace qdlab {

struct EValueSetup {
  PotentialProfile prof = PotentialProfile::gaussian();
  InitialState init = InitialState::shell(1.0, 0.25);
  ThetaFn theta;
  double alpha = 0.5;  // the same alpha on every edge
  std::uint64_t seed = 1;
  double shell_share = 0.7;  // mixture weight of the energy-shell proposal
  double gauss_sigma = 1.0;  // broad component N(0, sigma^2 I)
};

struct EValueEstimate {
  double estimate = 0.0;
  double stderr_ = 0.0;
  long n_samples = 0;
  std::vector<int> G;         // maximizing set of vertices carrying <.>^{-2d}
  double max_share = 0.0;     // largest single-sample share of the sum
  std::size_t free_dim = 0;   // number of free edge momenta
};

struct variance_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

// free momentum proposal: Cauchy in energy around the renormalized resonance, uniform direction,
// mixed with a broad Gaussian
struct ShellProposal {
  double center, width, share, sigma, zeta;
  int d;
  double emax() const { return 0.5 * zeta * zeta; }
  double cdf(double e) const { return std::atan((e - center) / width) / pi + 0.5; }
  double mass() const { return cdf(emax()) - cdf(0.0); }

  template <class Rng>
  Vec draw(Rng& rng) const {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::normal_distribution<double> N;
    Vec w(d);
    if (U(rng) < share) {
      double u = cdf(0.0) + U(rng) * mass();
      double e = center + width * std::tan(pi * (u - 0.5));
      e = std::clamp(e, 1e-300, emax());
      for (int i = 0; i < d; ++i) w(i) = N(rng);
      return w * (std::sqrt(2 * e) / w.norm());
    }
    for (int i = 0; i < d; ++i) w(i) = sigma * N(rng);
    return w;
  }
  double pdf(const Vec& w) const {
    double s = w.norm(), e = 0.5 * s * s;
    double g = std::exp(-0.5 * w.squaredNorm() / (sigma * sigma)) / std::pow(2 * pi * sigma * sigma, 0.5 * d);
    double sh = 0.0;
    if (s > 0 && s <= zeta) {
      double pe = width / (pi * ((e - center) * (e - center) + width * width)) / mass();
      sh = pe / (std::pow(s, d - 2) * sphere_area(d));  // dw = s^{d-2} de dOmega
    }
    return share * sh + (1 - share) * g;
  }
};

}  // namespace detail

// E_g(P, u = 0, alpha) = lambda^{N-2} sup_{|G|<=g} int dmu(w) prod_e |alpha - omega(w_e) + i eta|^{-1} Delta N_G(w);
// P.truncated drops the propagators on the two edges at 0*
inline EValueEstimate mc_e_value(const FeynmanPartition& P, const ModelParams& prm, long n_samples,
                                 const EValueSetup& S) {
  if (P.n() + P.n_tilde() > 4) throw domain_error("mc_e_value: n + n' <= 4");
  if (n_samples < 2) throw domain_error("mc_e_value: need at least 2 samples");
  if (!S.theta) throw domain_error("mc_e_value: self-energy provider missing");
  P.validate();
  const int d = prm.d, N = P.N();
  auto sys = build_delta_constraints(P);
  auto span = spanning_momenta(sys);
  const std::size_t F = span.free_edges.size();
  const double lam = prm.lambda, eta = prm.eta, zeta = prm.zeta;
  const int star = P.pos(V_STAR);

  // vertices that may carry <.>^{-2d}: ordinary ones
  std::vector<int> ordinary;
  for (int k = 0; k < N; ++k)
    if (!is_special(P.circle[k])) ordinary.push_back(k);
  std::vector<std::vector<int>> subsets{{}};
  for (int g = 1; g <= std::min<int>(P.g_budget, static_cast<int>(ordinary.size())); ++g) {
    std::vector<int> sel(ordinary.size(), 0);
    std::fill(sel.end() - g, sel.end(), 1);
    do {
      std::vector<int> G;
      for (std::size_t i = 0; i < sel.size(); ++i)
        if (sel[i]) G.push_back(ordinary[i]);
      subsets.push_back(G);
    } while (std::next_permutation(sel.begin(), sel.end()));
  }

  cplx th = S.theta(std::max(S.alpha, 1e-12));
  detail::ShellProposal Q{S.alpha - lam * lam * th.real(), lam * lam * (-th.imag()) + eta, S.shell_share,
                          S.gauss_sigma, zeta, d};
  if (!(Q.width > 0)) Q.width = eta;

  EValueEstimate best;
  best.estimate = -1.0;
  best.free_dim = F;
  double pref = std::pow(lam, N - 2);
  for (const auto& G : subsets) {
    std::vector<char> inG(N, 0);
    for (int k : G) inG[k] = 1;
    Accum acc;
    double maxw = 0.0, sum = 0.0;
    std::vector<Vec> w(N, Vec::Zero(d));
    for (long i = 0; i < n_samples; ++i) {
      auto rng = stream(S.seed, static_cast<std::uint64_t>(i));
      double q = 1.0;
      for (std::size_t f = 0; f < F; ++f) {
        Vec x = Q.draw(rng);
        q *= Q.pdf(x);
        w[span.free_edges[f]] = x;
      }
      for (int k : span.determined_edges) {
        const auto& cf = span.expr.at(k).first;
        Vec x = Vec::Zero(d);
        for (std::size_t f = 0; f < F; ++f)
          if (cf[f] != Rat(0)) x += boost::rational_cast<double>(cf[f]) * w[span.free_edges[f]];
        w[k] = x;
      }
      double val = 0.0;
      bool inside = true;
      for (int k = 0; k < N && inside; ++k) inside = w[k].norm() <= zeta;
      if (inside) {
        val = 1.0;
        for (int k = 0; k < N; ++k) {
          if (P.truncated && (k == star - 1 || k == star)) continue;
          val /= std::abs(S.alpha - omega(dispersion_relation(w[k]), lam, S.theta) + cplx(0, eta));
        }
        // psi0 on the two edges at 0
        val *= std::abs(S.init.psi0_hat(w[0])) * std::abs(S.init.psi0_hat(w[N - 1]));
        for (int k : ordinary) {
          Vec diff = w[(k + N - 1) % N] - w[k];
          val *= inG[k] ? std::pow(bracket(diff.norm()), -2.0 * d) : std::abs(S.prof.bhat(diff.norm()));
        }
        val *= pref / q;
      }
      acc.add(val);
      sum += val;
      maxw = std::max(maxw, val);
    }
    if (acc.mean > best.estimate) {
      best.estimate = acc.mean;
      best.stderr_ = acc.stderr_();
      best.G = G;
      best.max_share = sum > 0 ? maxw / sum : 0.0;
    }
  }
  best.n_samples = n_samples;
  if (best.estimate > 0 && (best.stderr_ > 0.5 * best.estimate || best.max_share > 0.5)) {
    std::ostringstream os;
    os << "mc_e_value: variance blow-up (estimate " << best.estimate << ", stderr " << best.stderr_
       << ", largest sample share " << best.max_share << ")";
    throw variance_error(os.str());
  }
  return best;
}

// ---- time kernel and the factorial bound ----

struct FactorialRow {
  int k = 0;
  double I = 0.0;
  double stderr_ = 0.0;
  double ratio = 0.0;  // I(k) [(k-1)!]^a / (T lambda^{-2-kappa a})^{k-1} / |log lambda|^2
};

struct FactorialReport {
  double a = 0.75;
  std::vector<FactorialRow> rows;
  double ca_fit = 0.0;           // smallest C_a that covers every row
  bool successive_decrease = false;  // I(k+1)/I(k) decreasing over k >= 2
};

// I(k) = int dp |K(t,p,k)|^2 |psi0(p_1)|^2 prod_{j=1}^k |B(p_j - p_{j+1})|^2, K(t,p,k) = f[omega(p_1)..omega(p_k)]
// for f(z) = e^{-itz}; p_{k+1} integrates to ||B||_2^2
inline FactorialReport time_kernel_factorial_check(int kmax, const ModelParams& P, const PotentialProfile& prof,
                                                   const InitialState& init, const ThetaFn& theta,
                                                   std::uint64_t seed, long n_samples = 20000, double a = 0.75) {
  if (P.d != 3) throw domain_error("time_kernel_factorial_check: d = 3");
  if (kmax < 1 || kmax > 6) throw domain_error("time_kernel_factorial_check: 1 <= k <= 6");
  if (prof.kind != PotentialProfile::Kind::gaussian || std::isfinite(prof.cutoff))
    throw domain_error("time_kernel_factorial_check: needs the untruncated gaussian profile");
  const double lam = P.lambda, lam2 = lam * lam, t = P.t;
  const double A2 = sq(prof.amplitude);
  const double bnorm = A2 * std::pow(pi, 1.5);  // int A^2 e^{-x^2} dx
  std::normal_distribution<double> N;
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const double share = 0.5;
  auto bhat2 = [&](const Vec& x) { return A2 * std::exp(-x.squaredNorm()); };

  FactorialReport rep;
  rep.a = a;
  for (int k = 1; k <= kmax; ++k) {
    Accum acc;
    for (long i = 0; i < n_samples; ++i) {
      auto rng = stream(seed, semigroup_index(k, i));
      std::vector<Vec> p{init.sample(rng)};
      std::vector<cplx> om{omega(dispersion_relation(p[0]), lam, theta)};
      double w = 1.0;
      for (int j = 1; j < k; ++j) {
        const Vec& prev = p.back();
        double ec = dispersion_relation(prev);
        double gam = std::max(1.0 / t, lam2 * (-theta(ec).imag()));
        Vec x(3);
        if (U(rng) < share) {
          for (int c = 0; c < 3; ++c) x(c) = prev(c) + std::sqrt(0.5) * N(rng);
        } else {
          // Cauchy energy on (0, inf) around ec, uniform direction
          double lo = std::atan(-ec / gam);
          double e = ec + gam * std::tan(lo + U(rng) * (0.5 * pi - lo));
          e = std::max(e, 1e-300);
          for (int c = 0; c < 3; ++c) x(c) = N(rng);
          x *= std::sqrt(2 * e) / x.norm();
        }
        double s = x.norm(), e = 0.5 * s * s;
        double lo = std::atan(-ec / gam);
        double pe = gam / (((e - ec) * (e - ec) + gam * gam) * (0.5 * pi - lo));
        double q = share * bhat2(x - prev) / bnorm + (1 - share) * pe / (4 * pi * s);
        w *= bhat2(x - prev) / q;
        p.push_back(x);
        om.push_back(omega(e, lam, theta));
      }
      acc.add(w * std::norm(time_kernel(t, om)) * bnorm);
    }
    FactorialRow r;
    r.k = k;
    r.I = acc.mean;
    r.stderr_ = acc.stderr_();
    double base = P.T * std::pow(lam, -2 - P.kappa * a);
    r.ratio = r.I * std::pow(std::tgamma(k), a) / std::pow(base, k - 1) / sq(std::log(lam));
    rep.rows.push_back(r);
  }
  // C_a^{k-1} >= ratio_k for k >= 2, and the k = 1 row fixes the |log lambda|^2 prefactor scale
  for (auto& r : rep.rows)
    if (r.k >= 2) rep.ca_fit = std::max(rep.ca_fit, std::pow(r.ratio / std::max(rep.rows[0].ratio, 1e-300), 1.0 / (r.k - 1)));
  rep.successive_decrease = true;
  for (std::size_t i = 2; i + 1 < rep.rows.size(); ++i) {
    double q1 = rep.rows[i].I / rep.rows[i - 1].I, q2 = rep.rows[i + 1].I / rep.rows[i].I;
    if (!(q2 < q1)) rep.successive_decrease = false;
  }
  return rep;
}

}  // namespace qdlab
