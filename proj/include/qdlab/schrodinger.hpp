#pragma once

// direct split-step simulation in a periodic box with Poisson scatterers, discrete Wigner transform,
// and the kinetic-scale comparison against the jump process

#include "qdlab/ladder.hpp"

#include <fftw3.h>

#include <array>
#include <map>
#include <memory>
#include <numeric>
#include <optional>

namespace qdlab {

struct BoxConfig {
  double L = 8.0;
  int grid = 64;  // points per side, even
  int d = 3;
  double dt = 0.02;
  int order = 4;  // 2: Strang; 4: triple-jump composition of Strang substeps

  double h() const { return L / grid; }
  std::size_t size() const { return static_cast<std::size_t>(std::llround(std::pow(grid, d))); }
  double cell() const { return std::pow(h(), d); }
  double volume() const { return std::pow(L, d); }
  double freq(int k) const { return (k < grid / 2 ? k : k - grid) / L; }

  // the potential cutoff lambda^{-delta} must sit below the Nyquist momentum grid / (2L)
  std::vector<std::string> diagnostics(double lambda, double delta) const {
    std::vector<std::string> out;
    if (!(L > 0)) out.push_back("L must be > 0");
    if (grid < 2 || grid % 2) out.push_back("grid must be even and >= 2");
    if (d < 1 || d > 3) out.push_back("d must be 1, 2 or 3");
    if (!(dt > 0)) out.push_back("dt must be > 0");
    if (order != 2 && order != 4) out.push_back("order must be 2 or 4");
    if (out.empty() && !(grid / L > 2 * std::pow(lambda, -delta)))
      out.push_back("grid/L = " + std::to_string(grid / L) + " does not resolve the cutoff 2 lambda^{-delta} = " +
                    std::to_string(2 * std::pow(lambda, -delta)));
    return out;
  }
  void validate() const {
    auto dg = diagnostics(0.5, 0.0);
    for (auto& s : dg)
      if (s.rfind("grid/L", 0) != 0) throw domain_error("BoxConfig: " + s);
  }
  // mean free path lambda^{-2}; shorter boxes see their own images
  bool boundary_contaminated(double lambda) const { return L < 4.0 / (lambda * lambda); }
};

// multi-index of flat position i in a grid^d array, last axis fastest
inline std::array<int, 3> unflatten(std::size_t i, int n, int d) {
  std::array<int, 3> k{0, 0, 0};
  for (int a = d - 1; a >= 0; --a) {
    k[a] = static_cast<int>(i % n);
    i /= n;
  }
  return k;
}

inline std::size_t flatten(const std::array<int, 3>& k, int n, int d) {
  std::size_t i = 0;
  for (int a = 0; a < d; ++a) i = i * n + static_cast<std::size_t>(((k[a] % n) + n) % n);
  return i;
}

// unnormalized FFTW transforms on n^d arrays, plans cached per shape
class Fft {
 public:
  Fft(int n, int d) : n_(n), d_(d) {
    std::size_t N = 1;
    for (int a = 0; a < d; ++a) N *= n;
    size_ = N;
    buf_ = fftw_alloc_complex(N);
    int dims[3] = {n, n, n};
    fwd_ = fftw_plan_dft(d, dims, buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft(d, dims, buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~Fft() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(buf_);
  }
  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;

  static Fft& get(int n, int d) {
    static std::map<std::pair<int, int>, std::unique_ptr<Fft>> cache;
    auto& p = cache[{n, d}];
    if (!p) p = std::make_unique<Fft>(n, d);
    return *p;
  }

  // a_k = sum_m x_m e^{-2 pi i k m / n}
  void forward(std::vector<cplx>& a) { run(a, fwd_); }
  // x_m = sum_k a_k e^{+2 pi i k m / n}
  void backward(std::vector<cplx>& a) { run(a, bwd_); }

 private:
  void run(std::vector<cplx>& a, fftw_plan p) {
    if (a.size() != size_) throw domain_error("Fft: array size does not match the plan");
    std::copy(a.begin(), a.end(), reinterpret_cast<cplx*>(buf_));
    fftw_execute(p);
    std::copy(reinterpret_cast<cplx*>(buf_), reinterpret_cast<cplx*>(buf_) + size_, a.begin());
  }
  int n_, d_;
  std::size_t size_;
  fftw_complex* buf_;
  fftw_plan fwd_, bwd_;
};

// psi(x_m) on x_m = m h, m in [0, grid)^d
struct WaveField {
  BoxConfig box;
  std::vector<cplx> psi;

  double norm2() const {
    double s = 0.0;
    for (const auto& z : psi) s += std::norm(z);
    return s * box.cell();
  }
  // a_k with psi = sum_k a_k e^{2 pi i f_k x}; mass per mode L^d |a_k|^2
  std::vector<cplx> modes() const {
    auto a = psi;
    Fft::get(box.grid, box.d).forward(a);
    double s = 1.0 / static_cast<double>(box.size());
    for (auto& z : a) z *= s;
    return a;
  }
  std::vector<double> momentum_mass() const {
    auto a = modes();
    std::vector<double> m(a.size());
    double V = box.volume();
    for (std::size_t i = 0; i < a.size(); ++i) m[i] = V * std::norm(a[i]);
    return m;
  }
  Vec momentum(std::size_t i) const {
    auto k = unflatten(i, box.grid, box.d);
    Vec p(box.d);
    for (int a = 0; a < box.d; ++a) p(a) = box.freq(k[a]);
    return p;
  }
};

// psi^ sampled from the initial state on the momentum lattice, centred at x0 (default: box centre), unit norm
inline WaveField make_wave(const BoxConfig& box, const InitialState& init, std::optional<Vec> x0 = std::nullopt) {
  box.validate();
  if (init.dim() != box.d) throw domain_error("make_wave: dimension mismatch");
  Vec c = x0 ? *x0 : Vec::Constant(box.d, 0.5 * box.L);
  WaveField w{box, std::vector<cplx>(box.size())};
  for (std::size_t i = 0; i < w.psi.size(); ++i) {
    Vec p = w.momentum(i);
    w.psi[i] = init.psi0_hat(p) * std::exp(cplx(0, -2 * pi * p.dot(c)));
  }
  Fft::get(box.grid, box.d).backward(w.psi);
  double s = 1.0 / std::sqrt(w.norm2());
  if (!std::isfinite(s)) throw domain_error("make_wave: initial state vanishes on the momentum lattice");
  for (auto& z : w.psi) z *= s;
  return w;
}

// psi(x_m) = f(x_m), not renormalized
inline WaveField wave_from(const BoxConfig& box, const std::function<cplx(const Vec&)>& f) {
  box.validate();
  WaveField w{box, std::vector<cplx>(box.size())};
  for (std::size_t i = 0; i < w.psi.size(); ++i) {
    auto k = unflatten(i, box.grid, box.d);
    Vec x(box.d);
    for (int a = 0; a < box.d; ++a) x(a) = k[a] * box.h();
    w.psi[i] = f(x);
  }
  return w;
}

struct PotentialRealization {
  long M = 0;
  std::vector<Vec> centers;
  std::vector<int> charges;
  std::vector<double> V;  // on the position grid
};

// Poisson(L^d) centres, +-1 charges, V = sum_j q_j B(x - y_j) periodized, built mode by mode
template <class Rng>
PotentialRealization sample_potential(const BoxConfig& box, const PotentialProfile& prof, Rng& rng) {
  box.validate();
  const int n = box.grid, d = box.d;
  PotentialRealization R;
  std::poisson_distribution<long> P(box.volume());
  std::uniform_real_distribution<double> U(0.0, box.L);
  std::bernoulli_distribution C(0.5);
  R.M = P(rng);
  for (long j = 0; j < R.M; ++j) {
    Vec y(d);
    for (int a = 0; a < d; ++a) y(a) = U(rng);
    R.centers.push_back(y);
    R.charges.push_back(C(rng) ? 1 : -1);
  }
  std::vector<cplx> S(box.size(), 0.0);
  if (!prof.is_zero()) {
    // e^{-2 pi i f.y} factorizes over axes
    std::vector<std::vector<cplx>> ph(d, std::vector<cplx>(n));
    for (long j = 0; j < R.M; ++j) {
      for (int a = 0; a < d; ++a)
        for (int k = 0; k < n; ++k) ph[a][k] = std::exp(cplx(0, -2 * pi * box.freq(k) * R.centers[j](a)));
      double q = R.charges[j];
      for (std::size_t i = 0; i < S.size(); ++i) {
        auto k = unflatten(i, n, d);
        cplx z = q;
        for (int a = 0; a < d; ++a) z *= ph[a][k[a]];
        S[i] += z;
      }
    }
    WaveField tmp{box, {}};
    for (std::size_t i = 0; i < S.size(); ++i) S[i] *= prof.bhat(tmp.momentum(i).norm()) / box.volume();
    Fft::get(n, d).backward(S);
  }
  R.V.resize(S.size());
  for (std::size_t i = 0; i < S.size(); ++i) R.V[i] = S[i].real();
  return R;
}

// E V(x)^2 = int |B|^2 = int |B^|^2 at unit density and m_2 = 1
inline double campbell_variance(const PotentialProfile& prof, int d = 3) {
  if (prof.is_zero()) return 0.0;
  double c = sphere_area(d);
  return adaptive_integrate([&](double s) { return c * std::pow(s, d - 1) * prof.bhat2(s); }, {0.0, 1.0, prof.support()},
                            1e-12)
      .value;
}

struct norm_drift_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// symmetric split step: half potential, exact kinetic e^{-i c dt |p|^2/2}, half potential, with c = 1 (order 2)
// or the triple jump c = (w1, w0, w1), w1 = 1/(2 - 2^{1/3}), w0 = 1 - 2 w1 (order 4); dt shrunk to divide t
inline WaveField evolve(const WaveField& psi0, const std::vector<double>& V, double lambda, double t,
                        std::optional<double> dt_override = std::nullopt) {
  const BoxConfig& box = psi0.box;
  box.validate();
  if (!(t >= 0)) throw domain_error("evolve: t must be >= 0");
  if (V.size() != psi0.psi.size() && !V.empty()) throw domain_error("evolve: potential grid mismatch");
  if (t == 0) return psi0;
  double dt0 = dt_override.value_or(box.dt);
  long steps = std::max<long>(1, static_cast<long>(std::ceil(t / dt0 - 1e-12)));
  double dt = t / steps;
  std::vector<double> sub{1.0};
  if (box.order == 4) {
    double w1 = 1.0 / (2.0 - std::cbrt(2.0));
    sub = {w1, 1.0 - 2.0 * w1, w1};
  }
  WaveField w = psi0;
  auto& F = Fft::get(box.grid, box.d);
  const double inv = 1.0 / static_cast<double>(w.psi.size());
  struct Phases {
    std::vector<cplx> kin, half;
  };
  std::vector<Phases> ph(2);  // indexed by distinct substep weight
  auto build = [&](Phases& P, double c) {
    P.kin.resize(w.psi.size());
    for (std::size_t i = 0; i < P.kin.size(); ++i)
      P.kin[i] = std::exp(cplx(0, -c * dt * dispersion_relation(w.momentum(i)))) * inv;
    P.half.resize(V.size());
    for (std::size_t i = 0; i < V.size(); ++i) P.half[i] = std::exp(cplx(0, -0.5 * c * dt * lambda * V[i]));
  };
  build(ph[0], sub[0]);
  if (sub.size() > 1) build(ph[1], sub[1]);
  double n0 = psi0.norm2();
  for (long s = 0; s < steps; ++s) {
    for (std::size_t j = 0; j < sub.size(); ++j) {
      const Phases& P = ph[j == 1 ? 1 : 0];
      for (std::size_t i = 0; i < P.half.size(); ++i) w.psi[i] *= P.half[i];
      F.forward(w.psi);
      for (std::size_t i = 0; i < P.kin.size(); ++i) w.psi[i] *= P.kin[i];
      F.backward(w.psi);
      for (std::size_t i = 0; i < P.half.size(); ++i) w.psi[i] *= P.half[i];
    }
  }
  double drift = std::abs(w.norm2() - n0) / std::max(n0, 1e-300);
  if (drift > 1e-8) throw norm_drift_error("evolve: norm drift " + std::to_string(drift));
  return w;
}

// ---- Wigner transform ----

// W(x, v) = int e^{-2 pi i v eta} conj psi(x - eta/2) psi(x + eta/2) d eta on the doubled lattice:
// x on spacing h/2, eta = m h with m mod 2n, v on spacing 1/(2L), 2n points per axis.
// Rescaled: W^eps(X, V) = eps^{-d} W(X/eps, V), X = eps x.
// Both marginals are exact on this lattice; the price is an image W(x + L/2 e_a, v) = (-1)^{k_a} W(x, v).
struct WignerGrid {
  int d = 3;
  int n2 = 0;  // points per axis in both X and V
  double dX = 0.0, dV = 0.0;
  double epsilon = 1.0;
  std::vector<double> values;  // [x][v], each flattened with the last axis fastest

  std::size_t per_side() const { return static_cast<std::size_t>(std::llround(std::pow(n2, d))); }
  double at(std::size_t ix, std::size_t iv) const { return values[ix * per_side() + iv]; }
  double V(int k) const { return (k < n2 / 2 ? k : k - n2) * dV; }
  Vec Vvec(std::size_t iv) const {
    auto k = unflatten(iv, n2, d);
    Vec v(d);
    for (int a = 0; a < d; ++a) v(a) = V(k[a]);
    return v;
  }
  Vec Xvec(std::size_t ix) const {
    auto k = unflatten(ix, n2, d);
    Vec x(d);
    for (int a = 0; a < d; ++a) x(a) = k[a] * dX;
    return x;
  }
  double mass() const {
    double s = 0.0;
    for (double w : values) s += w;
    return s * std::pow(dX * dV, d);
  }
  // int W^eps dV at each X
  std::vector<double> position_marginal() const {
    std::size_t P = per_side();
    std::vector<double> m(P, 0.0);
    for (std::size_t i = 0; i < P; ++i)
      for (std::size_t j = 0; j < P; ++j) m[i] += values[i * P + j];
    for (auto& x : m) x *= std::pow(dV, d);
    return m;
  }
  // int W^eps dX at each V
  std::vector<double> velocity_marginal() const {
    std::size_t P = per_side();
    std::vector<double> m(P, 0.0);
    for (std::size_t i = 0; i < P; ++i)
      for (std::size_t j = 0; j < P; ++j) m[j] += values[i * P + j];
    for (auto& x : m) x *= std::pow(dX, d);
    return m;
  }
};

namespace detail {

// trigonometric interpolant of psi on the doubled grid (modes kept on [-n/2, n/2))
inline std::vector<cplx> refine(const WaveField& w) {
  const int n = w.box.grid, d = w.box.d, n2 = 2 * n;
  auto a = w.modes();
  std::size_t P = static_cast<std::size_t>(std::llround(std::pow(n2, d)));
  std::vector<cplx> b(P, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto k = unflatten(i, n, d);
    for (int c = 0; c < d; ++c)
      if (k[c] >= n / 2) k[c] += n;  // negative frequencies move to the top of the doubled range
    b[flatten(k, n2, d)] = a[i];
  }
  Fft::get(n2, d).backward(b);
  return b;
}

// W at one fine-grid point: h^d sum_m e^{-2 pi i k.m/(2n)} conj phi(j - m) phi(j + m)
inline std::vector<double> wigner_row(const std::vector<cplx>& phi, std::size_t ix, int n2, int d, double h) {
  auto j = unflatten(ix, n2, d);
  std::vector<cplx> g(phi.size());
  for (std::size_t im = 0; im < g.size(); ++im) {
    auto m = unflatten(im, n2, d);
    std::array<int, 3> lo{}, hi{};
    for (int a = 0; a < d; ++a) {
      lo[a] = j[a] - m[a];
      hi[a] = j[a] + m[a];
    }
    g[im] = std::conj(phi[flatten(lo, n2, d)]) * phi[flatten(hi, n2, d)];
  }
  Fft::get(n2, d).forward(g);
  std::vector<double> row(g.size());
  double c = std::pow(h, d);
  for (std::size_t i = 0; i < g.size(); ++i) row[i] = c * g[i].real();
  return row;
}

}  // namespace detail

inline constexpr std::size_t wigner_max_entries = std::size_t(1) << 25;

inline WignerGrid wigner_rescaled(const WaveField& w, double epsilon) {
  if (!(epsilon > 0)) throw domain_error("wigner_rescaled: epsilon must be > 0");
  const int n2 = 2 * w.box.grid, d = w.box.d;
  WignerGrid W;
  W.d = d;
  W.n2 = n2;
  W.epsilon = epsilon;
  W.dX = epsilon * 0.5 * w.box.h();
  W.dV = 1.0 / (2 * w.box.L);
  std::size_t P = W.per_side();
  if (P * P > wigner_max_entries)
    throw domain_error("wigner_rescaled: " + std::to_string(P * P) + " entries exceed the full-grid cap; use wigner_at");
  auto phi = detail::refine(w);
  W.values.resize(P * P);
  double s = std::pow(epsilon, -d);
  for (std::size_t ix = 0; ix < P; ++ix) {
    auto row = detail::wigner_row(phi, ix, n2, d, w.box.h());
    for (std::size_t iv = 0; iv < P; ++iv) W.values[ix * P + iv] = s * row[iv];
  }
  return W;
}

// unscaled W(x_j, .) at one coarse grid point x_j = j h, for grids too big for the full array
inline std::vector<double> wigner_at(const WaveField& w, std::size_t coarse_index) {
  const int n = w.box.grid, n2 = 2 * n, d = w.box.d;
  auto k = unflatten(coarse_index, n, d);
  for (int a = 0; a < d; ++a) k[a] *= 2;
  return detail::wigner_row(detail::refine(w), flatten(k, n2, d), n2, d, w.box.h());
}

// <O, W^eps> summed over the grid cells
inline double pair(const WignerGrid& W, const Observable& obs) {
  std::size_t P = W.per_side();
  std::vector<Vec> vs(P);
  for (std::size_t j = 0; j < P; ++j) vs[j] = W.Vvec(j);
  double s = 0.0;
  for (std::size_t i = 0; i < P; ++i) {
    Vec X = W.Xvec(i);
    for (std::size_t j = 0; j < P; ++j) s += obs.o_phys(X, vs[j]) * W.values[i * P + j];
  }
  return s * std::pow(W.dX * W.dV, W.d);
}

// mean of several grids of the same shape
inline WignerGrid average(const std::vector<WignerGrid>& Ws) {
  if (Ws.empty()) throw domain_error("average: no grids");
  WignerGrid A = Ws[0];
  for (std::size_t r = 1; r < Ws.size(); ++r) {
    if (Ws[r].values.size() != A.values.size()) throw domain_error("average: shape mismatch");
    for (std::size_t i = 0; i < A.values.size(); ++i) A.values[i] += Ws[r].values[i];
  }
  for (auto& x : A.values) x /= static_cast<double>(Ws.size());
  return A;
}

// <g, |psi^|^2> for O(X, v) = g(v): the X-integral of W^eps is |psi^(v)|^2 at every eps
inline double velocity_pairing(const WaveField& w, const std::function<double(const Vec&)>& g) {
  auto m = w.momentum_mass();
  double s = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) s += m[i] * g(w.momentum(i));
  return s;
}

// ---- disorder averages ----

struct DisorderRun {
  BoxConfig box;
  PotentialProfile prof = PotentialProfile::gaussian();
  InitialState init = InitialState::packet((Vec(3) << 0, 0, 1).finished(), 0.3);
  std::uint64_t seed = 1;
};

struct DisorderAverage {
  double value = 0.0;
  double stderr_ = 0.0;
  long n_real = 0;
  std::vector<double> per_realization;
  std::vector<double> mean_mass;  // disorder-averaged momentum masses |psi^_t|^2 on the lattice
};

// realization r uses stream(seed, r) whatever lambda is, so runs at different lambda share potentials
inline DisorderAverage disorder_average_observable(const Observable& obs, double lambda, double t, long n_real,
                                                   const DisorderRun& run) {
  if (!obs.x_independent()) throw domain_error("disorder_average_observable: needs an X-independent observable");
  if (n_real < 1) throw domain_error("disorder_average_observable: n_real >= 1");
  auto psi0 = make_wave(run.box, run.init);
  DisorderAverage out;
  out.n_real = n_real;
  out.mean_mass.assign(run.box.size(), 0.0);
  Accum acc;
  for (long r = 0; r < n_real; ++r) {
    auto rng = stream(run.seed, static_cast<std::uint64_t>(r));
    auto R = sample_potential(run.box, run.prof, rng);
    auto wt = evolve(psi0, R.V, lambda, t);
    auto m = wt.momentum_mass();
    double v = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      v += m[i] * obs.g(wt.momentum(i));
      out.mean_mass[i] += m[i] / n_real;
    }
    out.per_realization.push_back(v);
    acc.add(v);
  }
  out.value = acc.mean;
  out.stderr_ = n_real > 1 ? acc.stderr_() : 0.0;
  return out;
}

// ---- kinetic comparison ----

// E g(v_tau) for the jump process started from the lattice distribution of psi0:
// sum_p m_p g(p) exactly, plus a Monte Carlo estimate of E[g(v_tau) - g(v_0)] which vanishes without jumps
struct KineticSide {
  double value = 0.0;
  double stderr_ = 0.0;
  double k0 = 0.0;  // the no-jump part, sum_p m_p g(p)
};

inline KineticSide kinetic_expectation(double tau, const Observable& obs, const WaveField& psi0,
                                       const PotentialProfile& prof, std::uint64_t seed, long n_traj) {
  auto m = psi0.momentum_mass();
  KineticSide K;
  for (std::size_t i = 0; i < m.size(); ++i) K.k0 += m[i] * obs.g(psi0.momentum(i));
  K.value = K.k0;
  if (prof.is_zero() || tau == 0) return K;
  std::discrete_distribution<std::size_t> pick(m.begin(), m.end());
  double total = std::accumulate(m.begin(), m.end(), 0.0);
  Accum acc;
  for (long i = 0; i < n_traj; ++i) {
    auto rng = stream(seed ^ 0x6b696e6574696331ULL, static_cast<std::uint64_t>(i));
    Vec v0 = psi0.momentum(pick(rng));
    if (v0.norm() == 0) {
      acc.add(0.0);
      continue;
    }
    JumpProcess J(prof, dispersion_relation(v0), psi0.box.d);
    auto tr = simulate_trajectory(J, v0, tau, rng);
    acc.add(obs.g(tr.at(tau)) - obs.g(v0));
  }
  K.value += total * acc.mean;
  K.stderr_ = total * acc.stderr_();
  return K;
}

struct KineticRow {
  double lambda = 0.0;
  double t = 0.0;
  double sim = 0.0, sim_stderr = 0.0;
  double gap = 0.0, gap_stderr = 0.0;  // sim - kinetic
  double leakage = 0.0;                 // averaged mass outside |e(v) - e0| < band
  bool boundary_contaminated = false;
};

struct KineticReport {
  double T_kin = 0.0;
  double e0 = 0.0;
  double kinetic = 0.0, kinetic_stderr = 0.0, kinetic_k0 = 0.0;
  std::vector<KineticRow> rows;
  bool gap_decreasing = false;      // |gap| strictly decreasing along the sequence
  bool leakage_decreasing = false;
};

struct KineticSettings {
  long n_real = 8;
  long n_traj = 200000;
  double band = 0.1;
};

// lambda^2 t = T_kin for every lambda; the jump-process side does not depend on lambda
inline KineticReport kinetic_compare(const std::vector<double>& lambdas, double T_kin, const Observable& obs,
                                     const DisorderRun& run, const KineticSettings& S = {}) {
  if (lambdas.size() < 2) throw domain_error("kinetic_compare: need at least two lambdas");
  if (!(T_kin >= 0)) throw domain_error("kinetic_compare: T_kin >= 0");
  auto psi0 = make_wave(run.box, run.init);
  KineticReport rep;
  rep.T_kin = T_kin;
  auto m0 = psi0.momentum_mass();
  for (std::size_t i = 0; i < m0.size(); ++i) rep.e0 += m0[i] * dispersion_relation(psi0.momentum(i));
  auto K = kinetic_expectation(T_kin, obs, psi0, run.prof, run.seed, S.n_traj);
  rep.kinetic = K.value;
  rep.kinetic_stderr = K.stderr_;
  rep.kinetic_k0 = K.k0;
  for (double lam : lambdas) {
    if (!(lam > 0)) throw domain_error("kinetic_compare: lambda must be > 0");
    KineticRow row;
    row.lambda = lam;
    row.t = T_kin / (lam * lam);
    auto D = disorder_average_observable(obs, lam, row.t, S.n_real, run);
    row.sim = D.value;
    row.sim_stderr = D.stderr_;
    row.gap = D.value - K.value;
    row.gap_stderr = std::hypot(D.stderr_, K.stderr_);
    double in = 0.0, tot = 0.0;
    for (std::size_t i = 0; i < D.mean_mass.size(); ++i) {
      tot += D.mean_mass[i];
      if (std::abs(dispersion_relation(psi0.momentum(i)) - rep.e0) < S.band) in += D.mean_mass[i];
    }
    row.leakage = tot > 0 ? 1.0 - in / tot : 0.0;
    row.boundary_contaminated = run.box.boundary_contaminated(lam);
    rep.rows.push_back(row);
  }
  rep.gap_decreasing = rep.leakage_decreasing = true;
  for (std::size_t i = 1; i < rep.rows.size(); ++i) {
    if (!(std::abs(rep.rows[i].gap) < std::abs(rep.rows[i - 1].gap))) rep.gap_decreasing = false;
    if (!(rep.rows[i].leakage < rep.rows[i - 1].leakage)) rep.leakage_decreasing = false;
  }
  return rep;
}

}  // namespace qdlab
