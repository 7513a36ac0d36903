#pragma once

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace qdlab {

// Welford accumulator, mergeable
struct Accum {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    double dx = x - mean;
    mean += dx / static_cast<double>(n);
    m2 += dx * (x - mean);
  }
  void merge(const Accum& o) {
    if (o.n == 0) return;
    if (n == 0) {
      *this = o;
      return;
    }
    double na = static_cast<double>(n), nb = static_cast<double>(o.n);
    double dx = o.mean - mean;
    mean += dx * nb / (na + nb);
    m2 += o.m2 + dx * dx * na * nb / (na + nb);
    n += o.n;
  }
  double var() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
  double sd() const { return std::sqrt(var()); }
  double stderr_() const { return n > 1 ? std::sqrt(var() / static_cast<double>(n)) : 0.0; }
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double slope_se = 0.0;
};

inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_line: need >= 2 points");
  double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = syy - f.slope * sxy;
  f.r2 = syy > 0 ? 1.0 - ssr / syy : 1.0;
  if (x.size() > 2) f.slope_se = std::sqrt(std::max(ssr, 0.0) / (n - 2) / sxx);
  return f;
}

// slope of log|y| against log x
inline double loglog_slope(std::span<const double> x, std::span<const double> y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(std::abs(y[i])));
  }
  return fit_line(lx, ly).slope;
}

struct ChiSquare {
  double stat = 0.0;
  int dof = 0;
  double p = 1.0;
};

// counts against equal expected frequencies
inline ChiSquare chi_square_uniform(std::span<const long> counts) {
  double total = 0;
  for (long c : counts) total += static_cast<double>(c);
  double expct = total / static_cast<double>(counts.size());
  ChiSquare r;
  for (long c : counts) r.stat += (c - expct) * (c - expct) / expct;
  r.dof = static_cast<int>(counts.size()) - 1;
  boost::math::chi_squared dist(r.dof);
  r.p = boost::math::cdf(boost::math::complement(dist, r.stat));
  return r;
}

}  // namespace qdlab
