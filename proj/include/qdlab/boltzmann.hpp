#pragma once

// momentum jump process on an energy shell: collision kernel, exact kinetic Monte Carlo,
// velocity autocorrelation, diffusion constant and mixing diagnostics

#include "qdlab/core.hpp"
#include "qdlab/dispersion.hpp"
#include "qdlab/profile.hpp"
#include "qdlab/quadrature.hpp"
#include "qdlab/stats.hpp"

#include <Eigen/Dense>

#include <random>

namespace qdlab {

struct EnergyShell {
  double e = 0.5;
  int d = 3;
  double radius() const { return std::sqrt(2 * e); }
};

struct JumpTrajectory {
  std::vector<double> jump_times;
  std::vector<Vec> velocities;  // one more than jump_times
  double horizon = 0.0;

  const Vec& at(double t) const {
    auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
    return velocities[static_cast<std::size_t>(it - jump_times.begin())];
  }
  // int_0^tau v(s) ds
  Vec displacement(double tau) const {
    Vec x = Vec::Zero(velocities[0].size());
    double prev = 0.0;
    for (std::size_t k = 0; k <= jump_times.size(); ++k) {
      double next = k < jump_times.size() ? std::min(jump_times[k], tau) : tau;
      x += (next - prev) * velocities[k];
      prev = next;
      if (next >= tau) break;
    }
    return x;
  }
};

struct DiffusionEstimate {
  double e = 0.0;
  double D = 0.0;
  double stderr_ = 0.0;
  std::size_t n_samples = 0;
  std::string method;
  double tail = 0.0;  // green-kubo: fitted-exponential part beyond the last window
};

// 2 pi |B^(u-v)|^2 / |grad e(u)| as a surface density on the shell of v
inline double collision_rate_density(const Vec& u, const Vec& v, const PotentialProfile& prof, double tol = 1e-9) {
  double eu = dispersion_relation(u), ev = dispersion_relation(v);
  if (std::abs(eu - ev) > tol * std::max(1.0, ev)) throw domain_error("collision_rate_density: u is off the shell of v");
  if (!(ev > 0)) throw domain_error("collision_rate_density: e(v) must be > 0");
  return 2 * pi * prof.bhat2((u - v).norm()) / u.norm();
}

// Householder map sending e_0 to the unit vector a
inline Eigen::MatrixXd pole_rotation(const Vec& a) {
  int d = static_cast<int>(a.size());
  Vec w = Vec::Unit(d, 0) - a.normalized();
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(d, d);
  if (w.norm() > 1e-14) H -= 2 * w * w.transpose() / w.squaredNorm();
  return H;
}

// int sigma(u, v) du = 2 pi [|B^(. - v)|^2](e(v)), sphere product rule with its pole at v
inline double total_jump_rate(const Vec& v, const PotentialProfile& prof, unsigned n = 64) {
  double e = dispersion_relation(v);
  if (!(e > 0)) throw domain_error("total_jump_rate: e(v) must be > 0");
  if (prof.is_zero()) return 0.0;
  int d = static_cast<int>(v.size());
  Eigen::MatrixXd H = pole_rotation(v);
  double R = v.norm();
  const SphereRule S = sphere_rule(d, n);
  double s = 0.0;
  for (std::size_t i = 0; i < S.x.size(); ++i) s += S.w[i] * prof.bhat2((R * (H * S.x[i]) - v).norm());
  return 2 * pi * s * std::pow(R, d - 2);
}

// E[cos angle(u, v)] under the post-collision law
inline double mean_cosine(double e, const PotentialProfile& prof, int d = 3) {
  if (!(e > 0)) throw domain_error("mean_cosine: e must be > 0");
  double rho = std::sqrt(2 * e);
  auto w = [&](double c) { return prof.bhat2(rho * std::sqrt(2 * std::max(0.0, 1 - c))) * std::pow(1 - c * c, 0.5 * (d - 3)); };
  std::vector<double> pts{-1.0, 0.0, 0.9, 1.0};
  double num = adaptive_integrate([&](double c) { return c * w(c); }, pts, 1e-12, 1e-300).value;
  double den = adaptive_integrate(w, pts, 1e-12, 1e-300).value;
  if (!(den > 0)) return 0.0;
  return num / den;
}

// velocity relaxation rate R (1 - <cos>): E[v(t).v(0)] = 2e exp(-rate t) for radial kernels
inline double momentum_relaxation_rate(double e, const PotentialProfile& prof, int d = 3) {
  Vec v = Vec::Zero(d);
  v(0) = std::sqrt(2 * e);
  return total_jump_rate(v, prof) * (1 - mean_cosine(e, prof, d));
}

// D_e = 2e / ((2 pi)^2 d R (1 - <cos>))
inline double diffusion_closed_form(double e, const PotentialProfile& prof, int d = 3) {
  return 2 * e / (4 * pi * pi * d * momentum_relaxation_rate(e, prof, d));
}

// jump sampler on one shell; the rate depends only on |v|
class JumpProcess {
 public:
  JumpProcess(const PotentialProfile& prof, double e, int d = 3) : prof_(prof), e_(e), d_(d), rho_(std::sqrt(2 * e)) {
    if (!(e > 0)) throw domain_error("JumpProcess: e must be > 0");
    // 2 pi rho^{d-2} int_S |B^(rho w - v)|^2 dw
    rate_ = 2 * pi * std::pow(rho_, d - 2) * prof.angular(rho_, rho_, 2, d);
    closed_gauss_ = prof.kind == PotentialProfile::Kind::gaussian && !std::isfinite(prof.cutoff) && d == 3;
    uniform_ = prof.kind == PotentialProfile::Kind::flat && !std::isfinite(prof.cutoff);
    if (!closed_gauss_ && !uniform_) {
      for (int i = 0; i <= 2048; ++i) envelope_ = std::max(envelope_, prof.bhat2(2 * rho_ * i / 2048.0));
      envelope_ *= 1.05;
    }
  }

  double rate() const { return rate_; }
  double energy() const { return e_; }
  double radius() const { return rho_; }
  int dim() const { return d_; }

  template <class Rng>
  Vec uniform(Rng& rng) const {
    std::normal_distribution<double> N;
    Vec v(d_);
    for (int i = 0; i < d_; ++i) v(i) = N(rng);
    return v * (rho_ / v.norm());
  }

  // u on the shell of v with density proportional to |B^(u - v)|^2
  template <class Rng>
  Vec jump(const Vec& v, Rng& rng, long cap = 1000000) const {
    if (uniform_) return uniform(rng);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    if (closed_gauss_) {
      // cos theta has density ~ exp(2 rho^2 c) on [-1, 1]
      double r2 = rho_ * rho_;
      double c = 1.0 + std::log1p(-U(rng) * (-std::expm1(-4 * r2))) / (2 * r2);
      c = std::clamp(c, -1.0, 1.0);
      return rotate_to(v, c, rng);
    }
    for (long it = 0; it < cap; ++it) {
      Vec u = uniform(rng);
      if (U(rng) * envelope_ < prof_.bhat2((u - v).norm())) return u;
    }
    throw std::runtime_error("sample_post_collision: rejection cap exceeded");
  }

  template <class Rng>
  double holding_time(Rng& rng) const {
    if (rate_ <= 0) return std::numeric_limits<double>::infinity();
    std::exponential_distribution<double> E(rate_);
    return E(rng);
  }

 private:
  template <class Rng>
  Vec rotate_to(const Vec& v, double c, Rng& rng) const {
    std::normal_distribution<double> N;
    Vec a = v / v.norm();
    Vec w(d_);
    double nw = 0.0;
    do {
      for (int i = 0; i < d_; ++i) w(i) = N(rng);
      w -= w.dot(a) * a;
      nw = w.norm();
    } while (nw < 1e-12);
    Vec u = c * a + std::sqrt(std::max(0.0, 1 - c * c)) * (w / nw);
    return u * (rho_ / u.norm());
  }

  PotentialProfile prof_;
  double e_;
  int d_;
  double rho_;
  double rate_ = 0.0;
  double envelope_ = 0.0;
  bool closed_gauss_ = false, uniform_ = false;
};

template <class Rng>
Vec sample_post_collision(const Vec& v, const PotentialProfile& prof, Rng& rng) {
  return JumpProcess(prof, dispersion_relation(v), static_cast<int>(v.size())).jump(v, rng);
}

template <class Rng>
JumpTrajectory simulate_trajectory(const JumpProcess& J, const Vec& v0, double horizon, Rng& rng) {
  if (!(horizon > 0)) throw domain_error("simulate_trajectory: horizon must be > 0");
  JumpTrajectory tr;
  tr.horizon = horizon;
  tr.velocities.push_back(v0);
  double t = J.holding_time(rng);
  while (t < horizon) {
    tr.jump_times.push_back(t);
    tr.velocities.push_back(J.jump(tr.velocities.back(), rng));
    t += J.holding_time(rng);
  }
  return tr;
}

template <class Rng>
JumpTrajectory simulate_trajectory(const Vec& v0, double horizon, const PotentialProfile& prof, Rng& rng) {
  if (!(dispersion_relation(v0) > 0)) throw domain_error("simulate_trajectory: e(v0) must be > 0");
  return simulate_trajectory(JumpProcess(prof, dispersion_relation(v0), static_cast<int>(v0.size())), v0, horizon, rng);
}

struct LagEstimate {
  double lag = 0, value = 0, stderr_ = 0;
};

// E_e[v(t).v(0)] from equilibrium starts; stream i drives trajectory i
inline std::vector<LagEstimate> velocity_autocorrelation(double e, const std::vector<double>& lags, long n_traj,
                                                         const PotentialProfile& prof, std::uint64_t seed, int d = 3) {
  if (n_traj < 2) throw domain_error("velocity_autocorrelation: n_traj >= 2");
  JumpProcess J(prof, e, d);
  double hmax = *std::max_element(lags.begin(), lags.end());
  std::vector<Accum> acc(lags.size());
  for (long i = 0; i < n_traj; ++i) {
    auto rng = stream(seed, static_cast<std::uint64_t>(i));
    Vec v0 = J.uniform(rng);
    auto tr = simulate_trajectory(J, v0, std::nextafter(hmax, 1e300), rng);
    for (std::size_t j = 0; j < lags.size(); ++j) acc[j].add(tr.at(lags[j]).dot(v0));
  }
  std::vector<LagEstimate> out;
  for (std::size_t j = 0; j < lags.size(); ++j) out.push_back({lags[j], acc[j].mean, acc[j].stderr_()});
  return out;
}

struct BoltzmannBudget {
  long n_traj = 100000;
  int windows = 4;         // green-kubo time origins per trajectory
  double gk_window = 8.0;  // in relaxation times
  double msd_t1 = 5.0, msd_t2 = 200.0;
};

struct DiffusionReport {
  DiffusionEstimate green_kubo, msd;
  double relaxation_rate = 0.0;
  double closed_form = 0.0;
  double isotropy_max_z = 0.0;  // largest |off-diagonal| / stderr
  bool routes_agree = true;
};

// both estimators of D_e = (1/((2pi)^2 d)) int_0^inf E[v(t).v(0)] dt
inline DiffusionReport diffusion_coefficient(double e, const PotentialProfile& prof, const BoltzmannBudget& B,
                                             std::uint64_t seed, int d = 3) {
  if (!(e > 0)) throw domain_error("diffusion_coefficient: e must be > 0");
  JumpProcess J(prof, e, d);
  DiffusionReport rep;
  rep.relaxation_rate = momentum_relaxation_rate(e, prof, d);
  rep.closed_form = diffusion_closed_form(e, prof, d);
  const double norm = 1.0 / (4 * pi * pi * d);
  const double Tc = B.gk_window / rep.relaxation_rate;

  // green-kubo: exact integral of v(t).v(s) over t in [s, s + Tc] per window
  Accum gk;
  std::vector<double> lag_grid;
  for (int j = 0; j <= 16; ++j) lag_grid.push_back(Tc * j / 16.0);
  std::vector<Accum> cacc(lag_grid.size());
  for (long i = 0; i < B.n_traj; ++i) {
    auto rng = stream(seed, static_cast<std::uint64_t>(i));
    Vec v = J.uniform(rng);
    double tsum = 0.0;
    for (int w = 0; w < B.windows; ++w) {
      Vec v0 = v;
      double t = 0.0, integral = 0.0;
      std::size_t next_lag = 0;
      while (true) {
        double h = J.holding_time(rng);
        double end = std::min(t + h, Tc);
        while (next_lag < lag_grid.size() && (lag_grid[next_lag] < end || end >= Tc)) {
          cacc[next_lag].add(v.dot(v0));
          ++next_lag;
        }
        integral += (end - t) * v.dot(v0);
        if (t + h >= Tc) {
          // the process is memoryless: restart the clock at the window edge
          break;
        }
        t += h;
        v = J.jump(v, rng);
      }
      tsum += integral;
    }
    gk.add(tsum / B.windows);
  }
  // tail beyond Tc from a log-linear fit of the measured correlation
  std::vector<double> lx, ly;
  for (std::size_t j = 0; j < lag_grid.size(); ++j)
    if (cacc[j].mean > 3 * cacc[j].stderr_()) {
      lx.push_back(lag_grid[j]);
      ly.push_back(std::log(cacc[j].mean));
    }
  double tail = 0.0;
  if (lx.size() >= 2) {
    auto f = fit_line(lx, ly);
    if (f.slope < 0) tail = std::exp(f.intercept + f.slope * Tc) / (-f.slope);
  }
  rep.green_kubo = {e, norm * (gk.mean + tail), norm * gk.stderr_(), static_cast<std::size_t>(gk.n), "green-kubo",
                    norm * tail};

  // msd: increment of |x|^2 between t1 and t2 removes the ballistic offset
  double t1 = B.msd_t1 / rep.relaxation_rate, t2 = B.msd_t2 / rep.relaxation_rate;
  Accum msd;
  std::vector<Accum> cov(static_cast<std::size_t>(d * d));
  for (long i = 0; i < B.n_traj; ++i) {
    auto rng = stream(seed ^ 0x5bd1e995ULL, static_cast<std::uint64_t>(i));
    Vec v = J.uniform(rng);
    Vec x = Vec::Zero(d), x1;
    double t = 0.0;
    bool have1 = false;
    while (true) {
      double h = J.holding_time(rng);
      if (!have1 && t + h >= t1) {
        x1 = x + (t1 - t) * v;
        have1 = true;
      }
      if (t + h >= t2) {
        x += (t2 - t) * v;
        break;
      }
      x += h * v;
      t += h;
      v = J.jump(v, rng);
    }
    x /= 2 * pi;
    x1 /= 2 * pi;
    msd.add((x.squaredNorm() - x1.squaredNorm()) / (2 * d * (t2 - t1)));
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) cov[static_cast<std::size_t>(a * d + b)].add(x(a) * x(b) / (2 * t2));
  }
  rep.msd = {e, msd.mean, msd.stderr_(), static_cast<std::size_t>(msd.n), "msd", 0.0};
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      if (a != b) {
        auto& c = cov[static_cast<std::size_t>(a * d + b)];
        rep.isotropy_max_z = std::max(rep.isotropy_max_z, std::abs(c.mean) / c.stderr_());
      }
  double comb = std::hypot(rep.green_kubo.stderr_, rep.msd.stderr_);
  rep.routes_agree = std::abs(rep.green_kubo.D - rep.msd.D) <= 5 * comb;
  return rep;
}

// 20 equal-area cells: 4 bands in the polar cosine times 5 azimuth sectors
inline int shell_cell(const Vec& v) {
  double z = v(v.size() - 1) / v.norm();
  int band = std::min(3, static_cast<int>((z + 1) * 2));
  double ph = std::atan2(v(1), v(0)) + pi;
  int sec = std::min(4, static_cast<int>(ph / (2 * pi) * 5));
  return band * 5 + sec;
}

struct MixingReport {
  std::vector<double> times;
  std::vector<double> tv;             // distance of the cell histogram to uniform
  std::vector<double> first_cell;     // occupancy of the starting cell
  std::vector<double> p_values;       // chi-square against uniform
  double final_p = 0.0;
  double fitted_rate = 0.0;           // decay rate of tv
  bool tv_monotone = true;            // within 3 binomial standard errors
};

// n_walkers started at v0 = rho e_d, histograms at the given times
inline MixingReport mixing_diagnostics(double e, const PotentialProfile& prof, const std::vector<double>& times,
                                       long n_walkers, std::uint64_t seed, int d = 3) {
  JumpProcess J(prof, e, d);
  Vec v0 = Vec::Zero(d);
  v0(d - 1) = J.radius();
  int c0 = shell_cell(v0);
  std::vector<std::vector<long>> counts(times.size(), std::vector<long>(20, 0));
  double tmax = *std::max_element(times.begin(), times.end());
  for (long i = 0; i < n_walkers; ++i) {
    auto rng = stream(seed, static_cast<std::uint64_t>(i));
    auto tr = simulate_trajectory(J, v0, std::nextafter(tmax, 1e300), rng);
    for (std::size_t j = 0; j < times.size(); ++j) ++counts[j][static_cast<std::size_t>(shell_cell(tr.at(times[j])))];
  }
  MixingReport rep;
  rep.times = times;
  double noise = std::sqrt(20.0 / static_cast<double>(n_walkers));
  for (std::size_t j = 0; j < times.size(); ++j) {
    double tv = 0.0;
    for (long c : counts[j]) tv += std::abs(static_cast<double>(c) / static_cast<double>(n_walkers) - 0.05);
    rep.tv.push_back(0.5 * tv);
    rep.first_cell.push_back(static_cast<double>(counts[j][static_cast<std::size_t>(c0)]) / static_cast<double>(n_walkers));
    rep.p_values.push_back(chi_square_uniform(counts[j]).p);
    if (j > 0 && rep.tv[j] > rep.tv[j - 1] + 3 * noise) rep.tv_monotone = false;
  }
  rep.final_p = rep.p_values.back();
  std::vector<double> lx, ly;
  for (std::size_t j = 0; j < times.size(); ++j)
    if (rep.tv[j] > 3 * noise) {
      lx.push_back(times[j]);
      ly.push_back(std::log(rep.tv[j]));
    }
  if (lx.size() >= 2) rep.fitted_rate = -fit_line(lx, ly).slope;
  return rep;
}

}  // namespace qdlab
