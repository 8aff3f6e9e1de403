#pragma once

// Independent numerical oracles the library is tested against. Everything
// here is deliberately brute force: explicit Jacobians, explicit matrix
// inverses, explicit quadrature — the slow-but-obvious counterparts of the
// library's analytic paths.

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "tflw/flow.hpp"
#include "tflw/gaussian.hpp"
#include "tflw/rng.hpp"
#include "tflw/train.hpp"

namespace oracles {

// Nudge every parameter by uniform noise so a freshly created (identity)
// model becomes a generic nonlinear flow. Scale stays moderate to keep
// densities well conditioned.
inline void perturb(tflw::FlowModel& model, std::uint64_t seed, double scale = 0.4) {
  tflw::Rng rng(seed);
  Eigen::VectorXd p = model.params();
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] += rng.uniform(-scale, scale);
  model.set_params(p);
}

// Dense Jacobian of the data-to-latent map at x by central differences.
inline Eigen::MatrixXd fd_jacobian_inverse(const tflw::FlowModel& model,
                                           const Eigen::VectorXd& x, double h = 1e-6) {
  const int d = static_cast<int>(x.size());
  Eigen::MatrixXd j(d, d);
  for (int c = 0; c < d; ++c) {
    Eigen::VectorXd hi = x, lo = x;
    hi[c] += h;
    lo[c] -= h;
    const Eigen::VectorXd zp = model.inverse(hi.transpose()).row(0);
    const Eigen::VectorXd zm = model.inverse(lo.transpose()).row(0);
    j.col(c) = (zp - zm) / (2.0 * h);
  }
  return j;
}

// log|det J| of the data-to-latent map by the dense numerical Jacobian.
inline double fd_logdet_inverse(const tflw::FlowModel& model, const Eigen::VectorXd& x,
                                double h = 1e-6) {
  return std::log(std::abs(fd_jacobian_inverse(model, x, h).determinant()));
}

// Central-difference gradient of the mean batch NLL with respect to every
// parameter. The analytic counterpart is tflw::nll_and_grad.
inline Eigen::VectorXd fd_nll_grad(const tflw::FlowModel& model, const Eigen::MatrixXd& batch,
                                   double h = 1e-5) {
  tflw::FlowModel work = model;
  const Eigen::VectorXd theta = model.params();
  Eigen::VectorXd g(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd tp = theta, tm = theta;
    tp[i] += h;
    tm[i] -= h;
    work.set_params(tp);
    const double up = tflw::mean_nll(work, batch);
    work.set_params(tm);
    const double dn = tflw::mean_nll(work, batch);
    g[i] = (up - dn) / (2.0 * h);
  }
  return g;
}

// Conjugate posterior by direct evaluation with explicit dense inverses:
//   Sigma_p = (Sigma0^-1 + m Sigma^-1)^-1,  mu_p = Sigma_p (Sigma0^-1 mu0 + m Sigma^-1 zbar).
inline tflw::GaussianSpec posterior_dense_oracle(const Eigen::VectorXd& mu0,
                                                 const Eigen::MatrixXd& sigma0,
                                                 const Eigen::MatrixXd& sigma, int m,
                                                 const Eigen::VectorXd& zbar) {
  const Eigen::MatrixXd s0_inv = sigma0.inverse();
  const Eigen::MatrixXd s_inv = sigma.inverse();
  const Eigen::MatrixXd sigma_p = (s0_inv + m * s_inv).inverse();
  tflw::GaussianSpec g;
  g.mean = sigma_p * (s0_inv * mu0 + m * s_inv * zbar);
  g.cov = tflw::Covariance::dense_spd(0.5 * (sigma_p + sigma_p.transpose()));
  return g;
}

// Total probability mass of a 1-D model over [lo, hi] by the trapezoid rule.
inline double density_mass_1d(const tflw::FlowModel& model, double lo, double hi, double step) {
  const long n = static_cast<long>((hi - lo) / step) + 1;
  Eigen::MatrixXd xs(n, 1);
  for (long i = 0; i < n; ++i) xs(i, 0) = lo + static_cast<double>(i) * step;
  const Eigen::VectorXd lp = model.log_prob(xs);
  double mass = 0.0;
  for (long i = 0; i + 1 < n; ++i) {
    mass += 0.5 * (std::exp(lp[i]) + std::exp(lp[i + 1])) * step;
  }
  return mass;
}

// Random SPD matrix A A^T + eps I with entries from Rng.
inline Eigen::MatrixXd random_spd(int d, tflw::Rng& rng, double eps = 0.3) {
  Eigen::MatrixXd a(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) a(i, j) = rng.uniform(-1.0, 1.0);
  }
  Eigen::MatrixXd s = a * a.transpose() + eps * Eigen::MatrixXd::Identity(d, d);
  return 0.5 * (s + s.transpose());
}

inline Eigen::VectorXd random_vector(int d, tflw::Rng& rng, double lo = -3.0, double hi = 3.0) {
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v[i] = rng.uniform(lo, hi);
  return v;
}

}  // namespace oracles
