#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "tflw/errors.hpp"
#include "tflw/rng.hpp"

namespace tflw {

// Dense covariance guardrails.
inline constexpr int kDenseDimMax = 512;
inline constexpr double kSymmetryTol = 1e-10;

enum class CovKind : std::uint8_t { Isotropic = 0, Diagonal = 1, Dense = 2 };

inline const char* cov_kind_name(CovKind k) {
  switch (k) {
    case CovKind::Isotropic: return "isotropic";
    case CovKind::Diagonal: return "diagonal";
    case CovKind::Dense: return "dense";
  }
  return "?";
}

// Covariance payload in the coarsest representation that holds it. Isotropic
// carries no intrinsic dimension; validation takes the ambient d.
struct Covariance {
  CovKind kind = CovKind::Isotropic;
  double iso = 1.0;        // Isotropic variance
  Eigen::VectorXd diag;    // Diagonal variances
  Eigen::MatrixXd dense;   // Dense SPD matrix

  static Covariance isotropic(double variance) {
    Covariance c;
    c.kind = CovKind::Isotropic;
    c.iso = variance;
    return c;
  }
  static Covariance diagonal(Eigen::VectorXd variances) {
    Covariance c;
    c.kind = CovKind::Diagonal;
    c.diag = std::move(variances);
    return c;
  }
  static Covariance dense_spd(Eigen::MatrixXd m) {
    Covariance c;
    c.kind = CovKind::Dense;
    c.dense = std::move(m);
    return c;
  }

  // Re-express in a finer representation; `to` must be at least as fine.
  Covariance promoted(CovKind to, int d) const {
    if (to == kind) return *this;
    if (static_cast<int>(to) < static_cast<int>(kind)) {
      throw std::invalid_argument("cannot demote covariance representation");
    }
    if (kind == CovKind::Isotropic && to == CovKind::Diagonal) {
      return diagonal(Eigen::VectorXd::Constant(d, iso));
    }
    if (kind == CovKind::Isotropic && to == CovKind::Dense) {
      return dense_spd(iso * Eigen::MatrixXd::Identity(d, d));
    }
    // Diagonal -> Dense
    return dense_spd(Eigen::MatrixXd(diag.asDiagonal()));
  }

  void validate(int d, const std::string& who) const {
    switch (kind) {
      case CovKind::Isotropic:
        if (!(iso > 0.0) || !std::isfinite(iso)) {
          throw NumericError(who + ": isotropic variance must be positive and finite");
        }
        return;
      case CovKind::Diagonal:
        if (diag.size() != d) {
          throw std::invalid_argument(who + ": diagonal covariance has dimension " +
                                      std::to_string(diag.size()) + ", expected " +
                                      std::to_string(d));
        }
        if (!diag.allFinite() || (diag.array() <= 0.0).any()) {
          throw NumericError(who + ": diagonal covariance entries must be positive");
        }
        return;
      case CovKind::Dense: {
        if (d > kDenseDimMax) {
          throw std::invalid_argument(who + ": dense covariance limited to d <= " +
                                      std::to_string(kDenseDimMax));
        }
        if (dense.rows() != d || dense.cols() != d) {
          throw std::invalid_argument(who + ": dense covariance is " +
                                      std::to_string(dense.rows()) + "x" +
                                      std::to_string(dense.cols()) + ", expected " +
                                      std::to_string(d) + "x" + std::to_string(d));
        }
        if (!dense.allFinite()) throw NumericError(who + ": dense covariance has non-finite entries");
        const double asym = (dense - dense.transpose()).cwiseAbs().maxCoeff();
        if (asym > kSymmetryTol) {
          throw NumericError(who + ": dense covariance asymmetric by " + std::to_string(asym));
        }
        Eigen::LLT<Eigen::MatrixXd> llt(dense);
        if (llt.info() != Eigen::Success) {
          Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense, Eigen::EigenvaluesOnly);
          throw NumericError(who + ": dense covariance is not positive definite (smallest "
                                   "eigenvalue approx " +
                             std::to_string(es.eigenvalues().minCoeff()) + ")");
        }
        return;
      }
    }
  }

  double log_det(int d) const {
    switch (kind) {
      case CovKind::Isotropic:
        return d * std::log(iso);
      case CovKind::Diagonal:
        return diag.array().log().sum();
      case CovKind::Dense: {
        Eigen::LLT<Eigen::MatrixXd> llt(dense);
        return 2.0 * Eigen::VectorXd(llt.matrixLLT().diagonal()).array().log().sum();
      }
    }
    return 0.0;
  }

  double trace(int d) const {
    switch (kind) {
      case CovKind::Isotropic: return d * iso;
      case CovKind::Diagonal: return diag.sum();
      case CovKind::Dense: return dense.trace();
    }
    return 0.0;
  }
};

// The finer of two representations (isotropic < diagonal < dense).
inline CovKind join_kind(CovKind a, CovKind b) {
  return static_cast<int>(a) >= static_cast<int>(b) ? a : b;
}

// Multivariate Gaussian N(mean, cov); plays the prior, the posterior and the
// posterior predictive.
struct GaussianSpec {
  Eigen::VectorXd mean;
  Covariance cov;

  int dim() const { return static_cast<int>(mean.size()); }

  void validate(const std::string& who = "gaussian") const {
    if (mean.size() < 1) throw std::invalid_argument(who + ": empty mean");
    if (!mean.allFinite()) throw NumericError(who + ": mean has non-finite entries");
    cov.validate(dim(), who);
  }

  double log_density(const Eigen::VectorXd& z) const {
    if (z.size() != mean.size()) {
      throw std::invalid_argument("log_density: dimension mismatch");
    }
    const int d = dim();
    const double c = -0.5 * d * std::log(2.0 * std::numbers::pi);
    const Eigen::VectorXd delta = z - mean;
    switch (cov.kind) {
      case CovKind::Isotropic:
        return c - 0.5 * d * std::log(cov.iso) - 0.5 * delta.squaredNorm() / cov.iso;
      case CovKind::Diagonal:
        return c - 0.5 * cov.diag.array().log().sum() -
               0.5 * (delta.array().square() / cov.diag.array()).sum();
      case CovKind::Dense: {
        Eigen::LLT<Eigen::MatrixXd> llt(cov.dense);
        if (llt.info() != Eigen::Success) {
          throw NumericError("log_density: covariance is not positive definite");
        }
        const double logdet =
            2.0 * Eigen::VectorXd(llt.matrixLLT().diagonal()).array().log().sum();
        return c - 0.5 * logdet - 0.5 * delta.dot(llt.solve(delta));
      }
    }
    throw std::logic_error("unreachable");
  }
};

inline GaussianSpec standard_prior(int d) {
  GaussianSpec g;
  g.mean = Eigen::VectorXd::Zero(d);
  g.cov = Covariance::isotropic(1.0);
  return g;
}

// n iid draws, one per row; Dense covariances are factored by Cholesky.
// Reproducible: latent normals are consumed row by row, dimension by
// dimension, from Rng(seed).
inline Eigen::MatrixXd sample_latent(const GaussianSpec& g, int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample count must be >= 1");
  g.validate("sample_latent");
  const int d = g.dim();
  Rng rng(seed);
  Eigen::MatrixXd eps(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) eps(i, j) = rng.normal();
  }
  switch (g.cov.kind) {
    case CovKind::Isotropic:
      return (eps.array() * std::sqrt(g.cov.iso)).matrix().rowwise() + g.mean.transpose();
    case CovKind::Diagonal:
      return (eps.array().rowwise() * g.cov.diag.array().sqrt().transpose()).matrix().rowwise() +
             g.mean.transpose();
    case CovKind::Dense: {
      Eigen::LLT<Eigen::MatrixXd> llt(g.cov.dense);
      if (llt.info() != Eigen::Success) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.cov.dense, Eigen::EigenvaluesOnly);
        throw NumericError("sample_latent: Cholesky failed, smallest eigenvalue approx " +
                           std::to_string(es.eigenvalues().minCoeff()));
      }
      Eigen::MatrixXd l = llt.matrixL();
      return (eps * l.transpose()).rowwise() + g.mean.transpose();
    }
  }
  throw std::logic_error("unreachable");
}

// Linear interpolation of distribution parameters: mean and covariance are
// mixed convexly, which preserves positive definiteness. Endpoints are
// returned unchanged.
inline GaussianSpec interpolate(const GaussianSpec& a, const GaussianSpec& b, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("interpolation t must be in [0, 1]");
  if (a.dim() != b.dim()) {
    throw std::invalid_argument("interpolate: dimension mismatch " + std::to_string(a.dim()) +
                                " vs " + std::to_string(b.dim()));
  }
  if (t == 0.0) return a;
  if (t == 1.0) return b;

  const int d = a.dim();
  const CovKind kind = join_kind(a.cov.kind, b.cov.kind);
  const Covariance ca = a.cov.promoted(kind, d);
  const Covariance cb = b.cov.promoted(kind, d);

  GaussianSpec out;
  out.mean = (1.0 - t) * a.mean + t * b.mean;
  switch (kind) {
    case CovKind::Isotropic:
      out.cov = Covariance::isotropic((1.0 - t) * ca.iso + t * cb.iso);
      break;
    case CovKind::Diagonal:
      out.cov = Covariance::diagonal((1.0 - t) * ca.diag + t * cb.diag);
      break;
    case CovKind::Dense:
      out.cov = Covariance::dense_spd((1.0 - t) * ca.dense + t * cb.dense);
      break;
  }
  return out;
}

// KL(g || N(0, I)) = (tr(Sigma) + ||mu||^2 - d - log det Sigma) / 2.
inline double kl_to_prior(const GaussianSpec& g) {
  g.validate("kl_to_prior");
  const int d = g.dim();
  return 0.5 * (g.cov.trace(d) + g.mean.squaredNorm() - d - g.cov.log_det(d));
}

}  // namespace tflw
