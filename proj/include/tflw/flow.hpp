#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tflw/errors.hpp"
#include "tflw/mlp.hpp"
#include "tflw/preprocess.hpp"
#include "tflw/rng.hpp"

namespace tflw {

// Coupling log-scales are squashed to [-kLogScaleMax, kLogScaleMax], so the
// per-dimension scale factors stay in [e^-5, e^5] and inversion never
// divides by zero.
inline constexpr double kLogScaleMax = 5.0;

inline double clamp_log_scale(double raw) {
  return kLogScaleMax * std::tanh(raw / kLogScaleMax);
}

inline int default_hidden_width(int d) { return std::max(64, 4 * d); }

// mask[j] == 1 marks dimensions that pass through the coupling unchanged and
// feed the conditioner; the rest receive the affine update. For d == 1 the
// mask is all-zero and the conditioner degenerates to learnable constants.
inline std::vector<std::uint8_t> alternating_mask(int d, int parity) {
  std::vector<std::uint8_t> mask(d, 0);
  if (d == 1) return mask;
  for (int j = 0; j < d; ++j) mask[j] = (j % 2 == parity) ? 1 : 0;
  return mask;
}

// One flow step: a per-dimension affine normalization (log-scale + bias,
// data-initialized at training start) followed by a masked affine coupling.
struct CouplingBlock {
  Eigen::VectorXd norm_log_scale;
  Eigen::VectorXd norm_bias;
  std::vector<std::uint8_t> mask;
  Mlp conditioner;  // in: #pass dims, out: 2 * #trans dims, columns [shift | raw log-scale]

  std::vector<int> pass_idx, trans_idx;  // derived from mask

  int dim() const { return static_cast<int>(mask.size()); }

  void rebuild_index() {
    pass_idx.clear();
    trans_idx.clear();
    for (int j = 0; j < dim(); ++j) {
      (mask[j] ? pass_idx : trans_idx).push_back(j);
    }
    if (trans_idx.empty()) {
      throw std::invalid_argument("coupling mask leaves no dimensions to transform");
    }
  }

  static CouplingBlock create(int d, int parity, int hidden, Rng& rng) {
    CouplingBlock b;
    b.norm_log_scale = Eigen::VectorXd::Zero(d);
    b.norm_bias = Eigen::VectorXd::Zero(d);
    b.mask = alternating_mask(d, parity);
    b.rebuild_index();
    b.conditioner = Mlp::create(static_cast<int>(b.pass_idx.size()), hidden,
                                2 * static_cast<int>(b.trans_idx.size()), rng);
    return b;
  }
};

namespace detail {

inline Eigen::MatrixXd gather_cols(const Eigen::MatrixXd& m, const std::vector<int>& idx) {
  Eigen::MatrixXd out(m.rows(), static_cast<int>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out.col(static_cast<int>(k)) = m.col(idx[k]);
  return out;
}

inline void scatter_cols(Eigen::MatrixXd& m, const std::vector<int>& idx,
                         const Eigen::MatrixXd& vals) {
  for (std::size_t k = 0; k < idx.size(); ++k) m.col(idx[k]) = vals.col(static_cast<int>(k));
}

}  // namespace detail

// Trainable invertible map between latent space (standard-normal prior) and
// data space, with exact log-densities from per-layer analytic log-dets.
// Immutable after training; forward/inverse/log_prob/sample are pure.
struct FlowModel {
  static constexpr std::uint32_t kFormatVersion = 1;

  int d = 0;
  DataTransform preprocess;
  std::vector<CouplingBlock> blocks;
  bool norm_initialized = false;

  static FlowModel create(int d, int n_blocks, int hidden, DataTransform pre,
                          std::uint64_t seed) {
    if (d < 1) throw std::invalid_argument("dimension must be positive");
    if (n_blocks < 1) throw std::invalid_argument("need at least one block");
    if (hidden < 1) throw std::invalid_argument("hidden width must be positive");
    FlowModel m;
    m.d = d;
    m.preprocess = std::move(pre);
    Rng rng(seed);
    m.blocks.reserve(n_blocks);
    for (int k = 0; k < n_blocks; ++k) {
      m.blocks.push_back(CouplingBlock::create(d, k % 2, hidden, rng));
    }
    return m;
  }

  // Latent -> data, rows are samples. Accumulates log|det df/dz| per sample
  // into `logdet` when given.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& z, Eigen::VectorXd* logdet = nullptr) const {
    check_input(z, "forward");
    Eigen::MatrixXd u = z;
    if (logdet) logdet->setZero(z.rows());
    for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) {
      const CouplingBlock& b = *it;
      // coupling inverse: recover the transformed half from the unchanged half
      Eigen::MatrixXd pass = detail::gather_cols(u, b.pass_idx);
      Eigen::MatrixXd st = b.conditioner.forward(pass);
      const int nt = static_cast<int>(b.trans_idx.size());
      Eigen::MatrixXd shift = st.leftCols(nt);
      Eigen::MatrixXd logs = st.rightCols(nt).unaryExpr(&clamp_log_scale);
      Eigen::MatrixXd trans = detail::gather_cols(u, b.trans_idx);
      trans = (trans - shift).array() * (-logs).array().exp();
      detail::scatter_cols(u, b.trans_idx, trans);
      if (logdet) *logdet -= logs.rowwise().sum();
      // normalization inverse
      u = (u.rowwise() - b.norm_bias.transpose()).array().rowwise() *
          (-b.norm_log_scale).transpose().array().exp();
      if (logdet) logdet->array() -= b.norm_log_scale.sum();
    }
    return preprocess.to_data(u, logdet);
  }

  // Data -> latent. Accumulates log|det df^-1/dx| per sample into `logdet`.
  Eigen::MatrixXd inverse(const Eigen::MatrixXd& x, Eigen::VectorXd* logdet = nullptr) const {
    check_input(x, "inverse");
    if (logdet) logdet->setZero(x.rows());
    Eigen::MatrixXd u = preprocess.to_model(x, logdet);
    for (const CouplingBlock& b : blocks) {
      u = (u.array().rowwise() * b.norm_log_scale.transpose().array().exp()).matrix().rowwise() +
          b.norm_bias.transpose();
      if (logdet) logdet->array() += b.norm_log_scale.sum();
      Eigen::MatrixXd pass = detail::gather_cols(u, b.pass_idx);
      Eigen::MatrixXd st = b.conditioner.forward(pass);
      const int nt = static_cast<int>(b.trans_idx.size());
      Eigen::MatrixXd shift = st.leftCols(nt);
      Eigen::MatrixXd logs = st.rightCols(nt).unaryExpr(&clamp_log_scale);
      Eigen::MatrixXd trans = detail::gather_cols(u, b.trans_idx);
      trans = (trans.array() * logs.array().exp()) + shift.array();
      detail::scatter_cols(u, b.trans_idx, trans);
      if (logdet) *logdet += logs.rowwise().sum();
    }
    return u;
  }

  // Exact log-density per row: log N(f^-1(x); 0, I) + log|det df^-1/dx|.
  Eigen::VectorXd log_prob(const Eigen::MatrixXd& x) const {
    Eigen::VectorXd logdet;
    Eigen::MatrixXd z = inverse(x, &logdet);
    const double c = -0.5 * d * std::log(2.0 * std::numbers::pi);
    return (logdet.array() + c - 0.5 * z.array().square().rowwise().sum()).matrix();
  }

  // n draws f(z_i), z_i iid standard normal; latent entries are generated
  // row by row, dimension by dimension, so the stream is seed-reproducible.
  Eigen::MatrixXd sample(int n, std::uint64_t seed) const {
    if (n < 1) throw std::invalid_argument("sample count must be >= 1");
    Rng rng(seed);
    Eigen::MatrixXd z(n, d);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) z(i, j) = rng.normal();
    }
    return forward(z);
  }

  // Flat parameter vector; per block: norm_log_scale, norm_bias, then the
  // conditioner tensors w1, b1, w2, b2, w3, b3 in Eigen's storage order.
  int param_count() const {
    int n = 0;
    for (const CouplingBlock& b : blocks) {
      n += static_cast<int>(b.norm_log_scale.size() + b.norm_bias.size() +
                            b.conditioner.w1.size() + b.conditioner.b1.size() +
                            b.conditioner.w2.size() + b.conditioner.b2.size() +
                            b.conditioner.w3.size() + b.conditioner.b3.size());
    }
    return n;
  }

  Eigen::VectorXd params() const {
    Eigen::VectorXd out(param_count());
    int at = 0;
    auto put = [&](const double* p, Eigen::Index n) {
      std::copy(p, p + n, out.data() + at);
      at += static_cast<int>(n);
    };
    for (const CouplingBlock& b : blocks) {
      put(b.norm_log_scale.data(), b.norm_log_scale.size());
      put(b.norm_bias.data(), b.norm_bias.size());
      put(b.conditioner.w1.data(), b.conditioner.w1.size());
      put(b.conditioner.b1.data(), b.conditioner.b1.size());
      put(b.conditioner.w2.data(), b.conditioner.w2.size());
      put(b.conditioner.b2.data(), b.conditioner.b2.size());
      put(b.conditioner.w3.data(), b.conditioner.w3.size());
      put(b.conditioner.b3.data(), b.conditioner.b3.size());
    }
    return out;
  }

  void set_params(const Eigen::VectorXd& flat) {
    if (flat.size() != param_count()) {
      throw std::invalid_argument("parameter vector size " + std::to_string(flat.size()) +
                                  " does not match model (" + std::to_string(param_count()) + ")");
    }
    int at = 0;
    auto take = [&](double* p, Eigen::Index n) {
      std::copy(flat.data() + at, flat.data() + at + n, p);
      at += static_cast<int>(n);
    };
    for (CouplingBlock& b : blocks) {
      take(b.norm_log_scale.data(), b.norm_log_scale.size());
      take(b.norm_bias.data(), b.norm_bias.size());
      take(b.conditioner.w1.data(), b.conditioner.w1.size());
      take(b.conditioner.b1.data(), b.conditioner.b1.size());
      take(b.conditioner.w2.data(), b.conditioner.w2.size());
      take(b.conditioner.b2.data(), b.conditioner.b2.size());
      take(b.conditioner.w3.data(), b.conditioner.w3.size());
      take(b.conditioner.b3.data(), b.conditioner.b3.size());
    }
  }

 private:
  void check_input(const Eigen::MatrixXd& m, const char* op) const {
    if (m.cols() != d) {
      throw std::invalid_argument(std::string(op) + ": input dimension " +
                                  std::to_string(m.cols()) + " does not match model d=" +
                                  std::to_string(d));
    }
    if (!m.allFinite()) {
      throw NumericError(std::string(op) + ": input contains non-finite values");
    }
  }
};

}  // namespace tflw
