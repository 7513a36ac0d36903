#pragma once

#include "qdlab/core.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/legendre.hpp>

#include <algorithm>
#include <map>
#include <mutex>
#include <queue>
#include <vector>

namespace qdlab {

struct Rule {
  std::vector<double> x, w;
};

// Gauss-Legendre on [-1, 1], cached per order
inline const Rule& gauss_legendre(unsigned n) {
  static std::map<unsigned, Rule> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  Rule r;
  auto z = boost::math::legendre_p_zeros<double>(static_cast<int>(n));
  for (double x : z) {
    double dp = boost::math::legendre_p_prime(static_cast<int>(n), x);
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    if (x == 0.0) {
      r.x.push_back(0.0);
      r.w.push_back(w);
    } else {
      r.x.push_back(x);
      r.w.push_back(w);
      r.x.push_back(-x);
      r.w.push_back(w);
    }
  }
  std::vector<std::size_t> idx(r.x.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return r.x[a] < r.x[b]; });
  Rule s;
  for (auto i : idx) {
    s.x.push_back(r.x[i]);
    s.w.push_back(r.w[i]);
  }
  return cache.emplace(n, std::move(s)).first->second;
}

inline Rule gauss_legendre(unsigned n, double a, double b) {
  const Rule& r = gauss_legendre(n);
  Rule o;
  double h = 0.5 * (b - a), m = 0.5 * (a + b);
  for (std::size_t i = 0; i < r.x.size(); ++i) {
    o.x.push_back(m + h * r.x[i]);
    o.w.push_back(h * r.w[i]);
  }
  return o;
}

template <class F>
auto gl_integrate(F&& f, double a, double b, unsigned n) {
  auto r = gauss_legendre(n, a, b);
  decltype(f(a)) s{};
  for (std::size_t i = 0; i < r.x.size(); ++i) s += r.w[i] * f(r.x[i]);
  return s;
}

template <class T>
struct QuadResult {
  T value{};
  double error = 0.0;
};

// global adaptive Gauss-Kronrod 61: bisect the worst interval until the summed error meets the target;
// throws with the residual when tol is missed
template <class F>
auto adaptive_integrate(F&& f, std::vector<double> pts, double rel_tol = 1e-10, double abs_tol = 0.0,
                        std::size_t max_intervals = 4000) {
  using T = decltype(f(pts.front()));
  using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  struct Piece {
    double a, b;
    T v;
    double err;
    bool operator<(const Piece& o) const { return err < o.err; }
  };
  auto eval = [&](double a, double b) {
    double err = 0.0;
    T v = GK::integrate(f, a, b, 0, 0.0, &err);
    // boost reports the error of the rule on [-1,1]; rescale to [a,b]
    return Piece{a, b, v, err * 0.5 * (b - a)};
  };
  std::priority_queue<Piece> q;
  T total{};
  double err = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    auto p = eval(pts[i], pts[i + 1]);
    total += p.v;
    err += p.err;
    q.push(p);
  }
  auto target = [&] { return std::max(abs_tol, rel_tol * std::abs(total)); };
  while (!q.empty() && err > target() && q.size() < max_intervals) {
    Piece w = q.top();
    double m = 0.5 * (w.a + w.b);
    if (!(m > w.a && m < w.b)) break;  // interval at machine resolution
    q.pop();
    auto l = eval(w.a, m), r = eval(m, w.b);
    total += l.v + r.v - w.v;
    err += l.err + r.err - w.err;
    q.push(l);
    q.push(r);
  }
  // recompute the sums to shed accumulated cancellation
  T tv{};
  double te = 0.0;
  while (!q.empty()) {
    tv += q.top().v;
    te += q.top().err;
    q.pop();
  }
  QuadResult<T> out{tv, te};
  if (te > 10 * std::max(abs_tol, rel_tol * std::abs(tv)) && te > 1e-14)
    throw quadrature_error("adaptive quadrature did not reach tolerance", te);
  return out;
}

}  // namespace qdlab
