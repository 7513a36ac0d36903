#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qdlab {

using cplx = std::complex<double>;
inline constexpr double pi = std::numbers::pi;

struct domain_error : std::domain_error {
  using std::domain_error::domain_error;
};

// carries the residual / error estimate of the failed integral
struct quadrature_error : std::runtime_error {
  double residual;
  quadrature_error(const std::string& what, double res)
      : std::runtime_error(what), residual(res) {}
};

struct config_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// <x> = (2 + x^2)^{1/2}
inline double bracket(double x) { return std::sqrt(2.0 + x * x); }

// area of the unit sphere S^{d-1} in R^d
inline double sphere_area(int d) {
  return 2.0 * std::pow(pi, 0.5 * d) / std::tgamma(0.5 * d);
}

inline double sq(double x) { return x * x; }

// parameter family with the scaling relations
//   eps = lambda^{2+kappa/2}, t = lambda^{-2-kappa} T, K = floor(lambda^{-delta} lambda^2 t),
//   zeta = lambda^{-kappa-3delta}, eta in [lambda^{2+4kappa}, lambda^{2+kappa}]
struct ModelParams {
  int d = 3;
  double lambda = 0.05;
  double kappa = 0.05;
  double delta = 0.01;
  double eta = 0.0;
  double epsilon = 0.0;
  double t = 0.0;
  double T = 1.0;
  long K = 0;
  double zeta = 0.0;

  // eta = lambda^{eta_exp}, default the upper end 2+kappa
  static ModelParams scaled(int d, double lambda, double kappa, double delta, double T,
                            double eta_exp = std::numeric_limits<double>::quiet_NaN()) {
    ModelParams p;
    p.d = d;
    p.lambda = lambda;
    p.kappa = kappa;
    p.delta = delta;
    p.T = T;
    if (std::isnan(eta_exp)) eta_exp = 2.0 + kappa;
    p.eta = std::pow(lambda, eta_exp);
    p.epsilon = std::pow(lambda, 2.0 + kappa / 2.0);
    p.t = std::pow(lambda, -2.0 - kappa) * T;
    p.K = static_cast<long>(std::floor(std::pow(lambda, -delta) * lambda * lambda * p.t));
    p.zeta = std::pow(lambda, -kappa - 3.0 * delta);
    return p;
  }

  double tau() const { return lambda * lambda * t; }

  // invariant violations as text, empty when consistent
  std::vector<std::string> diagnostics(double rel = 1e-9) const {
    std::vector<std::string> out;
    auto off = [&](double a, double b) { return std::abs(a - b) > rel * std::max(std::abs(a), std::abs(b)); };
    if (d < 3) out.push_back("d must be >= 3");
    if (!(lambda > 0)) out.push_back("lambda must be > 0");
    if (kappa < 0) out.push_back("kappa must be >= 0");
    if (!(delta > 0)) out.push_back("delta must be > 0");
    if (!(eta > 0)) out.push_back("eta must be > 0");
    if (!out.empty()) return out;
    if (off(epsilon, std::pow(lambda, 2 + kappa / 2)))
      out.push_back("epsilon != lambda^(2+kappa/2) (space scaling)");
    if (off(t, std::pow(lambda, -2 - kappa) * T))
      out.push_back("t != lambda^(-2-kappa) T (time scaling)");
    long k = static_cast<long>(std::floor(std::pow(lambda, -delta) * lambda * lambda * t));
    if (k != K) out.push_back("K != floor(lambda^-delta lambda^2 t)");
    if (off(zeta, std::pow(lambda, -kappa - 3 * delta)))
      out.push_back("zeta != lambda^(-kappa-3delta)");
    double lo = std::pow(lambda, 2 + 4 * kappa), hi = std::pow(lambda, 2 + kappa);
    if (eta < lo * (1 - rel) || eta > hi * (1 + rel)) {
      std::ostringstream os;
      os << "eta=" << eta << " outside [lambda^(2+4kappa), lambda^(2+kappa)] = [" << lo << ", " << hi
         << "] required by the propagator estimates";
      out.push_back(os.str());
    }
    return out;
  }
};

// one independent stream per (seed, index)
inline std::mt19937_64 stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq ss{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                   static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x9e3779b9u};
  return std::mt19937_64(ss);
}

}  // namespace qdlab
