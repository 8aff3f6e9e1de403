#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "tflw/errors.hpp"
#include "tflw/flow.hpp"
#include "tflw/gaussian.hpp"

namespace tflw {

// Latent-space summary of a batch of conditioning examples: the per-example
// encodings, their mean, and the count. The mean is the only sufficient
// statistic the conjugate update needs, but keeping the encodings around lets
// callers inspect or reuse them.
struct Evidence {
  Eigen::MatrixXd latents;     // m x d, one encoded example per row
  Eigen::VectorXd latent_mean; // column mean of `latents`
  int count = 0;               // m

  int dim() const { return static_cast<int>(latent_mean.size()); }
};

// Likelihood model for the latent encodings: z_i ~ N(theta, lambda * I) with
// unknown mean theta. Smaller lambda trusts the evidence more.
struct LikelihoodConfig {
  double lambda = 1.0;

  void validate() const {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
      throw std::invalid_argument("likelihood lambda must be positive and finite");
    }
  }
};

// Middle of the workable band [0.3 m, 0.7 m]: evidence of size m gets
// lambda = m / 2 unless the caller overrides it.
inline double default_lambda(int evidence_count) {
  return 0.5 * static_cast<double>(evidence_count);
}

// Push conditioning data through the density direction of the flow and
// collect the latent sufficient statistics.
inline Evidence encode_evidence(const FlowModel& model, const Eigen::MatrixXd& x) {
  if (x.rows() < 1) throw std::invalid_argument("evidence must contain at least one example");
  Evidence ev;
  ev.latents = model.inverse(x);
  ev.latent_mean = ev.latents.colwise().mean();
  ev.count = static_cast<int>(x.rows());
  return ev;
}

// Conjugate update for a Gaussian mean under a Gaussian prior, arbitrary
// covariance representations:
//   Sigma_p = (Sigma_0^-1 + m Sigma^-1)^-1
//   mu_p    = Sigma_p (Sigma_0^-1 mu_0 + m Sigma^-1 zbar)
// Inverses are never formed explicitly for the dense case; both applications
// go through Cholesky solves.
inline GaussianSpec posterior_general(const GaussianSpec& prior, const Covariance& noise,
                                      const Evidence& ev) {
  prior.validate("prior");
  const int d = prior.dim();
  if (ev.dim() != d) {
    throw std::invalid_argument("posterior: evidence dimension " + std::to_string(ev.dim()) +
                                " does not match prior dimension " + std::to_string(d));
  }
  if (ev.count < 1) throw std::invalid_argument("posterior: evidence count must be >= 1");
  noise.validate(d, "likelihood");
  const double m = static_cast<double>(ev.count);
  const Eigen::VectorXd& zbar = ev.latent_mean;

  const CovKind kind = join_kind(prior.cov.kind, noise.kind);
  GaussianSpec post;
  switch (kind) {
    case CovKind::Isotropic: {
      const double p0 = 1.0 / prior.cov.iso;        // prior precision
      const double pl = m / noise.iso;              // evidence precision
      const double v = 1.0 / (p0 + pl);
      post.mean = v * (p0 * prior.mean + pl * zbar);
      post.cov = Covariance::isotropic(v);
      break;
    }
    case CovKind::Diagonal: {
      const Eigen::ArrayXd p0 = prior.cov.promoted(kind, d).diag.array().inverse();
      const Eigen::ArrayXd pl = m * noise.promoted(kind, d).diag.array().inverse();
      const Eigen::ArrayXd v = (p0 + pl).inverse();
      post.mean = (v * (p0 * prior.mean.array() + pl * zbar.array())).matrix();
      post.cov = Covariance::diagonal(v.matrix());
      break;
    }
    case CovKind::Dense: {
      const Eigen::MatrixXd s0 = prior.cov.promoted(kind, d).dense;
      const Eigen::MatrixXd sl = noise.promoted(kind, d).dense;
      Eigen::LLT<Eigen::MatrixXd> llt0(s0);
      Eigen::LLT<Eigen::MatrixXd> lltl(sl);
      if (llt0.info() != Eigen::Success) {
        throw NumericError("posterior: prior covariance is not positive definite");
      }
      if (lltl.info() != Eigen::Success) {
        throw NumericError("posterior: likelihood covariance is not positive definite");
      }
      const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
      const Eigen::MatrixXd prec = llt0.solve(eye) + m * lltl.solve(eye);
      Eigen::LLT<Eigen::MatrixXd> lltp(prec);
      if (lltp.info() != Eigen::Success) {
        throw NumericError("posterior: combined precision is not positive definite");
      }
      const Eigen::VectorXd h = llt0.solve(prior.mean) + m * lltl.solve(zbar);
      post.mean = lltp.solve(h);
      Eigen::MatrixXd sigma_p = lltp.solve(eye);
      // Symmetrize: the two triangular solves introduce roundoff asymmetry.
      post.cov = Covariance::dense_spd(0.5 * (sigma_p + sigma_p.transpose()));
      break;
    }
  }
  return post;
}

// Fast path for the default setup (standard-normal prior, isotropic evidence
// noise lambda * I):
//   mu_p    = (m / lambda) zbar / (m / lambda + 1)
//   Sigma_p = 1 / (m / lambda + 1) * I
inline GaussianSpec posterior_isotropic(const Evidence& ev, const LikelihoodConfig& like) {
  like.validate();
  if (ev.count < 1) throw std::invalid_argument("posterior: evidence count must be >= 1");
  if (ev.dim() < 1) throw std::invalid_argument("posterior: empty evidence");
  const double r = static_cast<double>(ev.count) / like.lambda;
  GaussianSpec post;
  post.mean = (r / (r + 1.0)) * ev.latent_mean;
  post.cov = Covariance::isotropic(1.0 / (r + 1.0));
  return post;
}

// Distribution of a new encoding given the posterior over the mean:
//   z_new ~ N(mu_p, Sigma_p + Sigma).
inline GaussianSpec posterior_predictive(const GaussianSpec& posterior, const Covariance& noise) {
  posterior.validate("posterior");
  const int d = posterior.dim();
  noise.validate(d, "likelihood");
  const CovKind kind = join_kind(posterior.cov.kind, noise.kind);
  GaussianSpec pp;
  pp.mean = posterior.mean;
  switch (kind) {
    case CovKind::Isotropic:
      pp.cov = Covariance::isotropic(posterior.cov.iso + noise.iso);
      break;
    case CovKind::Diagonal:
      pp.cov = Covariance::diagonal(posterior.cov.promoted(kind, d).diag +
                                    noise.promoted(kind, d).diag);
      break;
    case CovKind::Dense:
      pp.cov = Covariance::dense_spd(posterior.cov.promoted(kind, d).dense +
                                     noise.promoted(kind, d).dense);
      break;
  }
  return pp;
}

inline GaussianSpec posterior_predictive(const GaussianSpec& posterior,
                                         const LikelihoodConfig& like) {
  like.validate();
  return posterior_predictive(posterior, Covariance::isotropic(like.lambda));
}

// Draw latents from `g` and decode them through the generative direction.
inline Eigen::MatrixXd conditioned_sample(const FlowModel& model, const GaussianSpec& g, int n,
                                          std::uint64_t seed) {
  if (g.dim() != model.d) {
    throw std::invalid_argument("conditioned_sample: distribution dimension " +
                                std::to_string(g.dim()) + " does not match flow dimension " +
                                std::to_string(model.d));
  }
  const Eigen::MatrixXd z = sample_latent(g, n, seed);
  return model.forward(z);
}

// Log-density of a latent under the base prior N(0, I):
//   -(d/2) log(2 pi) - ||z||^2 / 2.
// Diagnostic for judging how "natural" an encoding is; the full model
// density (including the flow's log-det) lives in FlowModel::log_prob.
inline double prior_logprob(const Eigen::VectorXd& z) {
  if (z.size() < 1) throw std::invalid_argument("prior_logprob: empty latent");
  if (!z.allFinite()) throw NumericError("prior_logprob: latent has non-finite entries");
  return -0.5 * z.size() * std::log(2.0 * std::numbers::pi) - 0.5 * z.squaredNorm();
}

}  // namespace tflw
