#pragma once

// radial potential profiles B^(p) and their angular averages

#include "qdlab/core.hpp"
#include "qdlab/quadrature.hpp"

#include <functional>
#include <string>

namespace qdlab {

struct PotentialProfile {
  enum class Kind { gaussian, flat, zero, custom };
  Kind kind = Kind::gaussian;
  double amplitude = 1.0;  // B^(0)
  double cutoff = std::numeric_limits<double>::infinity();
  std::function<double(double)> custom;  // radial B^, used when kind == custom
  double custom_support = 12.0;

  static PotentialProfile gaussian(double amp = 1.0) { return {Kind::gaussian, amp, std::numeric_limits<double>::infinity(), {}, 12.0}; }
  static PotentialProfile flat(double amp = 1.0) { return {Kind::flat, amp, std::numeric_limits<double>::infinity(), {}, 12.0}; }
  static PotentialProfile zero() { return {Kind::zero, 0.0, std::numeric_limits<double>::infinity(), {}, 12.0}; }
  static PotentialProfile radial(std::function<double(double)> f, double support) {
    PotentialProfile p{Kind::custom, f(0.0), std::numeric_limits<double>::infinity(), {}, support};
    p.custom = std::move(f);
    p.custom_support = support;
    return p;
  }
  // cutoff at lambda^{-delta}
  PotentialProfile with_cutoff(double radius) const {
    auto p = *this;
    p.cutoff = radius;
    return p;
  }

  std::string name() const {
    std::string s = kind == Kind::gaussian ? "gaussian" : kind == Kind::flat ? "flat" : kind == Kind::zero ? "zero" : "custom";
    if (amplitude != 1.0 && kind != Kind::zero) s += "(amp=" + std::to_string(amplitude) + ")";
    if (std::isfinite(cutoff)) s += "[cut " + std::to_string(cutoff) + "]";
    return s;
  }

  bool is_zero() const { return kind == Kind::zero || amplitude == 0.0; }
  bool decays() const { return kind != Kind::flat || std::isfinite(cutoff); }

  // C-infinity step: 1 below 0.9 c, 0 above c
  double chi(double x) const {
    if (!std::isfinite(cutoff)) return 1.0;
    double a = 0.9 * cutoff;
    if (x <= a) return 1.0;
    if (x >= cutoff) return 0.0;
    double u = (x - a) / (cutoff - a);
    auto h = [](double y) { return y > 0 ? std::exp(-1.0 / y) : 0.0; };
    return h(1 - u) / (h(1 - u) + h(u));
  }

  double bhat(double x) const {
    double v = 0.0;
    switch (kind) {
      case Kind::gaussian: v = amplitude * std::exp(-0.5 * x * x); break;
      case Kind::flat: v = amplitude; break;
      case Kind::zero: v = 0.0; break;
      case Kind::custom: v = custom(x); break;
    }
    return v * chi(x);
  }
  double bhat2(double x) const { return sq(bhat(x)); }

  // radius beyond which |B^|^2 < 1e-30
  double support() const {
    double r = std::numeric_limits<double>::infinity();
    if (kind == Kind::gaussian) r = std::sqrt(2.0 * (69.1 + 2.0 * std::log(std::max(amplitude, 1e-300))));
    if (kind == Kind::custom) r = custom_support;
    if (kind == Kind::zero) r = 0.0;
    return std::min(r, cutoff);
  }

  // A_m(s, rho) = integral over the unit sphere of |B^(s w - rho e)|^m
  double angular(double s, double rho, int m, int d = 3) const {
    if (is_zero()) return 0.0;
    if (kind == Kind::flat && !std::isfinite(cutoff)) return std::pow(std::abs(amplitude), m) * sphere_area(d);
    if (kind == Kind::gaussian && !std::isfinite(cutoff) && d == 3) {
      // 2 pi int_{-1}^{1} exp(-m(s^2+rho^2-2 s rho u)/2) du
      double a = std::pow(std::abs(amplitude), m);
      double x = m * s * rho;
      double base = std::exp(-0.5 * m * sq(s - rho));
      if (x < 1e-12) return a * 4.0 * pi * std::exp(-0.5 * m * (s * s + rho * rho));
      return a * 2.0 * pi * base * (-std::expm1(-2.0 * x)) / x;
    }
    // polar angle theta in [0, pi] with weight sin^{d-2}
    const Rule& r = gauss_legendre(96);
    double c = sphere_area(d - 1), sum = 0.0;
    for (std::size_t i = 0; i < r.x.size(); ++i) {
      double th = 0.5 * pi * (r.x[i] + 1.0);
      double dist = std::sqrt(std::max(0.0, s * s + rho * rho - 2 * s * rho * std::cos(th)));
      sum += r.w[i] * std::pow(std::abs(bhat(dist)), m) * std::pow(std::sin(th), d - 2);
    }
    return c * 0.5 * pi * sum;
  }
};

}  // namespace qdlab
