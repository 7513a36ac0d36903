#pragma once

// finite-dimensional Duhamel expansion and its regrouping by stopping class

#include "qdlab/combinatorics.hpp"
#include "qdlab/quadrature.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <map>
#include <random>
#include <tuple>
#include <vector>

namespace qdlab {

using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

// H = F + sum_g W_g with F = H0 + lambda^2 theta diagonal,
// W_g = lambda V_g for g = 1..M and W_theta = -lambda^2 theta
struct DuhamelModel {
  int dim = 8;
  int M = 3;
  double lambda = 0.3;
  Eigen::VectorXd h0;
  Eigen::VectorXd theta;
  std::vector<CMat> V;  // index 1..M, V[0] unused
  CVec psi0;

  CMat F() const { return (h0 + lambda * lambda * theta).cast<cplx>().asDiagonal(); }
  CMat W(int g) const {
    if (g == THETA) return CMat((-lambda * lambda * theta).cast<cplx>().asDiagonal());
    return lambda * V[g];
  }
  CMat Vtilde() const {
    CMat s = W(THETA);
    for (int g = 1; g <= M; ++g) s += W(g);
    return s;
  }
  CMat H() const { return F() + Vtilde(); }
};

// random surrogate: rank-2 Hermitian obstacles of unit norm, theta >= 0
inline DuhamelModel random_duhamel_model(int dim, int M, double lambda, std::uint64_t seed) {
  auto rng = stream(seed, 7);
  std::normal_distribution<double> N;
  std::uniform_real_distribution<double> U(0.0, 2.0);
  DuhamelModel m;
  m.dim = dim;
  m.M = M;
  m.lambda = lambda;
  m.h0.resize(dim);
  m.theta.resize(dim);
  for (int i = 0; i < dim; ++i) {
    m.h0[i] = U(rng);
    m.theta[i] = 0.5 * U(rng);
  }
  auto rvec = [&] {
    CVec v(dim);
    for (int i = 0; i < dim; ++i) v[i] = cplx(N(rng), N(rng));
    return v;
  };
  m.V.assign(M + 1, CMat::Zero(dim, dim));
  for (int g = 1; g <= M; ++g) {
    CVec a = rvec(), b = rvec();
    CMat v = a * a.adjoint() - b * b.adjoint();
    m.V[g] = v / v.operatorNorm();
  }
  m.psi0 = rvec();
  m.psi0.normalize();
  return m;
}

inline CMat expm_hermitian(const CMat& H, double t) {
  Eigen::SelfAdjointEigenSolver<CMat> es(H);
  CVec ph = (es.eigenvalues().cast<cplx>() * cplx(0, -t)).array().exp();
  return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

// exact e^{-itH} psi0
inline CVec exact_evolution(const DuhamelModel& m, double t) { return expm_hermitian(m.H(), t) * m.psi0; }

// (-i)^n int_{simplex} e^{-i(t-s_n)A0} W_{g_n} e^{-i(s_n - s_{n-1})F} ... W_{g_1} e^{-i s_1 F} psi0 through the
// top-right block of one block-bidiagonal exponential; A0 = H gives the remainder form
inline CVec van_loan_term(const DuhamelModel& m, const Word& g, double t, bool full_last = false) {
  int n = static_cast<int>(g.size()), D = m.dim;
  CMat B = CMat::Zero((n + 1) * D, (n + 1) * D);
  CMat F = m.F();
  for (int b = 0; b <= n; ++b) B.block(b * D, b * D, D, D) = cplx(0, -1) * F;
  if (full_last) B.block(0, 0, D, D) = cplx(0, -1) * m.H();
  for (int b = 0; b < n; ++b) B.block(b * D, (b + 1) * D, D, D) = cplx(0, -1) * m.W(g[n - 1 - b]);
  CMat E = (t * B).exp();
  return E.block(0, n * D, D, D) * m.psi0;
}

// Chebyshev-Lobatto cumulative integration on [0, t]
struct ChebIntegrator {
  int n = 0;
  double t = 0;
  std::vector<double> s;  // increasing nodes, s[0] = 0, s[n-1] = t
  Eigen::MatrixXd Q;      // (Q f)_i = int_0^{s_i} f

  ChebIntegrator(int n_, double t_) : n(n_), t(t_) {
    std::vector<double> x(n);
    for (int j = 0; j < n; ++j) x[j] = -std::cos(pi * j / (n - 1));
    for (int j = 0; j < n; ++j) s.push_back(0.5 * t * (x[j] + 1.0));
    auto T = [](int k, double y) { return std::cos(k * std::acos(std::clamp(y, -1.0, 1.0))); };
    Eigen::MatrixXd Vd(n, n);
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) Vd(j, k) = T(k, x[j]);
    // antiderivative of T_k in the T basis, degree <= n
    Eigen::MatrixXd Int = Eigen::MatrixXd::Zero(n + 1, n);
    Int(1, 0) = 1.0;
    if (n > 1) Int(2, 1) = 0.25;
    for (int k = 2; k < n; ++k) {
      Int(k + 1, k) += 1.0 / (2.0 * (k + 1));
      Int(k - 1, k) -= 1.0 / (2.0 * (k - 1));
    }
    Eigen::MatrixXd P(n, n + 1);
    for (int j = 0; j < n; ++j)
      for (int k = 0; k <= n; ++k) P(j, k) = T(k, x[j]) - T(k, -1.0);
    Q = 0.5 * t * P * Int * Vd.partialPivLu().inverse();
  }

  // barycentric interpolation matrix onto arbitrary points
  Eigen::MatrixXd interp(const std::vector<double>& y) const {
    Eigen::MatrixXd B(y.size(), n);
    for (std::size_t i = 0; i < y.size(); ++i) {
      double den = 0;
      std::vector<double> num(n);
      int hit = -1;
      for (int j = 0; j < n; ++j) {
        double wj = (j % 2 ? -1.0 : 1.0) * ((j == 0 || j == n - 1) ? 0.5 : 1.0);
        double dy = y[i] - s[j];
        if (dy == 0) hit = j;
        num[j] = wj / dy;
        den += num[j];
      }
      for (int j = 0; j < n; ++j) B(i, j) = hit >= 0 ? (j == hit) : num[j] / den;
    }
    return B;
  }
};

// sampled interaction-picture trajectory phi(s_j), stored as dim x n
using Traj = CMat;

struct DuhamelReport {
  int dim = 0, N = 0, M = 0, K = 0;
  double t = 0, lambda = 0;
  double residual = 0;          // |sum psi_n + Psi_N - e^{-itH} psi0|
  double van_loan_gap = 0;      // max |psi_n(chebyshev) - psi_n(van loan)|
  double regroup_gap = 0;       // |regrouped sum - e^{-itH} psi0|
  double regroup_vs_direct = 0; // |regrouped sum - (sum psi_n + Psi_N)|
  long tree_nodes = 0, stopped_leaves = 0;
  std::map<std::string, double> bucket_norms;
  bool ok(double tol_res = 1e-8, double tol_regroup = 1e-10) const {
    return residual < tol_res && regroup_gap < tol_regroup && regroup_vs_direct < tol_res;
  }
};

class DuhamelEngine {
 public:
  DuhamelEngine(const DuhamelModel& m, double t, int cheb = 48, unsigned gl = 48)
      : m_(m), t_(t), ch_(cheb, t), f_(m.h0 + m.lambda * m.lambda * m.theta) {
    gl_ = gauss_legendre(gl, 0.0, t);
    Bgl_ = ch_.interp(gl_.x);
    Eigen::SelfAdjointEigenSolver<CMat> es(m.H());
    for (double s : gl_.x) {
      CVec ph = (es.eigenvalues().cast<cplx>() * cplx(0, -(t - s))).array().exp();
      Egl_.push_back(es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint());
    }
  }

  Traj start() const { return m_.psi0.replicate(1, ch_.n); }

  // phi_new(s) = -i int_0^s e^{iuF} W e^{-iuF} phi(u) du
  Traj step(const Traj& phi, const CMat& W) const {
    int D = m_.dim;
    Traj g(D, ch_.n);
    for (int j = 0; j < ch_.n; ++j) {
      double u = ch_.s[j];
      CVec x = phi.col(j);
      for (int a = 0; a < D; ++a) x[a] *= std::exp(cplx(0, -u * f_[a]));
      x = W * x;
      for (int a = 0; a < D; ++a) x[a] *= std::exp(cplx(0, u * f_[a]));
      g.col(j) = x;
    }
    Traj out(D, ch_.n);
    for (int a = 0; a < D; ++a) out.row(a) = (ch_.Q.cast<cplx>() * g.row(a).transpose()).transpose();
    return cplx(0, -1) * out;
  }

  // Schroedinger-picture value at t
  CVec at_t(const Traj& phi) const {
    CVec x = phi.col(ch_.n - 1);
    for (int a = 0; a < m_.dim; ++a) x[a] *= std::exp(cplx(0, -t_ * f_[a]));
    return x;
  }

  // -i int_0^t e^{-i(t-s)H} W psi(s) ds, psi(s) = e^{-isF} phi(s)
  CVec remainder(const Traj& phi, const CMat& W) const {
    CMat vals = phi * Bgl_.transpose().cast<cplx>();
    CVec acc = CVec::Zero(m_.dim);
    for (std::size_t i = 0; i < gl_.x.size(); ++i) {
      CVec x = vals.col(i);
      for (int a = 0; a < m_.dim; ++a) x[a] *= std::exp(cplx(0, -gl_.x[i] * f_[a]));
      acc += gl_.w[i] * (Egl_[i] * (W * x));
    }
    return cplx(0, -1) * acc;
  }

  const DuhamelModel& model() const { return m_; }

 private:
  const DuhamelModel& m_;
  double t_;
  ChebIntegrator ch_;
  Eigen::VectorXd f_;
  Rule gl_;
  Eigen::MatrixXd Bgl_;
  std::vector<CMat> Egl_;
};

// (i) sum_{n<N} psi_n + Psi_N against e^{-itH}psi0, with psi_n checked against the block-exponential oracle;
// (ii) depth-first expansion over label words, halted at the first stopping prefix, summed by class
inline DuhamelReport duhamel_matrix_check(int dim, int N, double t, std::uint64_t seed, int M = 3, int K = 2,
                                          double lambda = 0.3) {
  if (dim > 12 || N > 4 || N < 1) throw config_error("duhamel check needs dim <= 12, 1 <= N <= 4");
  auto model = random_duhamel_model(dim, M, lambda, seed);
  DuhamelEngine eng(model, t);
  DuhamelReport rep;
  rep.dim = dim;
  rep.N = N;
  rep.M = M;
  rep.K = K;
  rep.t = t;
  rep.lambda = lambda;
  CVec exact = exact_evolution(model, t);
  CMat Vt = model.Vtilde();

  Traj phi = eng.start();
  CVec direct = CVec::Zero(dim);
  for (int n = 0; n < N; ++n) {
    CVec psin = eng.at_t(phi);
    direct += psin;
    // block-exponential oracle
    CMat Dm = CMat::Zero((n + 1) * dim, (n + 1) * dim);
    for (int b = 0; b <= n; ++b) Dm.block(b * dim, b * dim, dim, dim) = cplx(0, -1) * model.F();
    for (int b = 0; b < n; ++b) Dm.block(b * dim, (b + 1) * dim, dim, dim) = cplx(0, -1) * Vt;
    CVec vl = (t * Dm).exp().block(0, n * dim, dim, dim) * model.psi0;
    rep.van_loan_gap = std::max(rep.van_loan_gap, (vl - psin).norm());
    if (n + 1 < N) phi = eng.step(phi, Vt);
  }
  direct += eng.remainder(phi, Vt);
  rep.residual = (direct - exact).norm();

  std::map<std::string, CVec> buckets;
  auto add = [&](const std::string& key, const CVec& v) {
    auto it = buckets.find(key);
    if (it == buckets.end()) buckets.emplace(key, v);
    else it->second += v;
  };
  std::function<void(const Word&, const Traj&)> dfs = [&](const Word& w, const Traj& ph) {
    ++rep.tree_nodes;
    if (static_cast<int>(w.size()) > K + 6) throw std::logic_error("expansion tree did not stop");
    auto sd = skeleton_indices(w);
    add("open(k=" + std::to_string(sd.k) + ",r=" + std::to_string(sd.r) + ")", eng.at_t(ph));
    for (int g = 0; g <= M; ++g) {
      Word c = w;
      c.push_back(g);
      auto cls = stopping_class(c, K);
      CMat Wg = model.W(g);
      if (cls.tag != Tag::none) {
        ++rep.stopped_leaves;
        add(std::string(tag_name(cls.tag)) + "(k=" + std::to_string(cls.k) + ",r=" + std::to_string(cls.r) + ")",
            eng.remainder(ph, Wg));
      } else {
        dfs(c, eng.step(ph, Wg));
      }
    }
  };
  dfs({}, eng.start());
  CVec regrouped = CVec::Zero(dim);
  for (auto& [k, v] : buckets) {
    rep.bucket_norms[k] = v.norm();
    regrouped += v;
  }
  rep.regroup_gap = (regrouped - exact).norm();
  rep.regroup_vs_direct = (regrouped - direct).norm();
  return rep;
}

}  // namespace qdlab
