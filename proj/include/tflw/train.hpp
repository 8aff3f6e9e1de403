#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tflw/dataset.hpp"
#include "tflw/errors.hpp"
#include "tflw/flow.hpp"
#include "tflw/rng.hpp"

namespace tflw {

enum class OptimizerKind : std::uint8_t { Sgd = 0, Adam = 1 };

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 128;
  int epochs = 100;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double grad_clip = 10.0;     // global L2 norm ceiling; <= 0 disables clipping
  double dequant_noise = 0.0;  // uniform noise amplitude added to raw inputs
  std::uint64_t seed = 0;
  bool norm_data_init = true;  // initialize per-block normalization from data

  void validate() const {
    if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning rate must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    if (epochs < 1) throw std::invalid_argument("epoch count must be >= 1");
    if (dequant_noise < 0.0) throw std::invalid_argument("dequantization noise must be >= 0");
  }
};

namespace detail {

struct BlockCache {
  Eigen::MatrixXd u_act;  // post-normalization activations (coupling input)
  Mlp::Cache mlp;
  Eigen::MatrixXd s;  // clamped log-scales, batch x #trans
};

inline FlowModel zeros_like(const FlowModel& model) {
  FlowModel g = model;
  g.set_params(Eigen::VectorXd::Zero(model.param_count()));
  return g;
}

}  // namespace detail

// Mean negative log-likelihood of a raw batch and its exact gradient with
// respect to every model parameter (reverse-mode through the data-to-latent
// pass). The finite-difference oracle in the test suite is the contract for
// this function.
inline double nll_and_grad(const FlowModel& model, const Eigen::MatrixXd& x_raw,
                           Eigen::VectorXd& grad) {
  const int batch = static_cast<int>(x_raw.rows());
  if (batch < 1) throw std::invalid_argument("empty batch");
  const double inv_b = 1.0 / batch;

  Eigen::VectorXd logdet_pre = Eigen::VectorXd::Zero(batch);
  Eigen::MatrixXd u = model.preprocess.to_model(x_raw, &logdet_pre);

  std::vector<detail::BlockCache> caches(model.blocks.size());
  double logdet_params = 0.0;  // (1/B) sum_i sum_layers logdets that depend on parameters
  for (std::size_t k = 0; k < model.blocks.size(); ++k) {
    const CouplingBlock& b = model.blocks[k];
    detail::BlockCache& c = caches[k];
    u = (u.array().rowwise() * b.norm_log_scale.transpose().array().exp()).matrix().rowwise() +
        b.norm_bias.transpose();
    c.u_act = u;
    logdet_params += b.norm_log_scale.sum();

    Eigen::MatrixXd pass = detail::gather_cols(u, b.pass_idx);
    Eigen::MatrixXd st = b.conditioner.forward(pass, &c.mlp);
    const int nt = static_cast<int>(b.trans_idx.size());
    c.s = st.rightCols(nt).unaryExpr(&clamp_log_scale);
    Eigen::MatrixXd trans = detail::gather_cols(u, b.trans_idx);
    trans = (trans.array() * c.s.array().exp()) + st.leftCols(nt).array();
    detail::scatter_cols(u, b.trans_idx, trans);
    logdet_params += inv_b * c.s.sum();
  }

  const double loss = 0.5 * inv_b * u.squaredNorm() +
                      0.5 * model.d * std::log(2.0 * std::numbers::pi) - logdet_params -
                      inv_b * logdet_pre.sum();

  FlowModel shadow = detail::zeros_like(model);
  Eigen::MatrixXd g = u * inv_b;  // dL/dz
  for (int k = static_cast<int>(model.blocks.size()) - 1; k >= 0; --k) {
    const CouplingBlock& b = model.blocks[k];
    CouplingBlock& gb = shadow.blocks[k];
    const detail::BlockCache& c = caches[k];
    const int nt = static_cast<int>(b.trans_idx.size());

    Eigen::MatrixXd g_out_trans = detail::gather_cols(g, b.trans_idx);
    Eigen::MatrixXd es = c.s.array().exp();
    Eigen::MatrixXd u_trans = detail::gather_cols(c.u_act, b.trans_idx);

    Eigen::MatrixXd g_s =
        (g_out_trans.array() * u_trans.array() * es.array() - inv_b).matrix();
    Eigen::MatrixXd g_y(batch, 2 * nt);
    g_y.leftCols(nt) = g_out_trans;  // d/d shift
    g_y.rightCols(nt) =
        (g_s.array() * (1.0 - (c.s.array() / kLogScaleMax).square())).matrix();

    Eigen::MatrixXd g_pass_extra = b.conditioner.backward(c.mlp, g_y, gb.conditioner);

    Eigen::MatrixXd g_act(batch, model.d);
    detail::scatter_cols(g_act, b.trans_idx, (g_out_trans.array() * es.array()).matrix());
    Eigen::MatrixXd g_pass = detail::gather_cols(g, b.pass_idx) + g_pass_extra;
    detail::scatter_cols(g_act, b.pass_idx, g_pass);

    // normalization: u_act = exp(nls) * u_in + nb
    gb.norm_bias += g_act.colwise().sum().transpose();
    gb.norm_log_scale +=
        ((g_act.array() * (c.u_act.rowwise() - b.norm_bias.transpose()).array())
             .colwise()
             .sum()
             .transpose() -
         1.0)
            .matrix();
    g = (g_act.array().rowwise() * b.norm_log_scale.transpose().array().exp()).matrix();
  }

  grad = shadow.params();
  return loss;
}

inline double mean_nll(const FlowModel& model, const Eigen::MatrixXd& x_raw) {
  return -model.log_prob(x_raw).mean();
}

// Set each block's normalization so its output has zero mean and unit
// variance per dimension on the given raw data (run block by block in the
// data-to-latent direction). Standard data-dependent initialization.
inline void normalization_data_init(FlowModel& model, const Eigen::MatrixXd& x_raw) {
  Eigen::MatrixXd u = model.preprocess.to_model(x_raw);
  for (CouplingBlock& b : model.blocks) {
    Eigen::VectorXd mu = u.colwise().mean();
    Eigen::VectorXd sd =
        ((u.rowwise() - mu.transpose()).array().square().colwise().mean())
            .sqrt()
            .max(1e-6)
            .transpose();
    b.norm_log_scale = -sd.array().log();
    b.norm_bias = -(mu.array() / sd.array());

    u = (u.array().rowwise() * b.norm_log_scale.transpose().array().exp()).matrix().rowwise() +
        b.norm_bias.transpose();
    Eigen::MatrixXd st = b.conditioner.forward(detail::gather_cols(u, b.pass_idx));
    const int nt = static_cast<int>(b.trans_idx.size());
    Eigen::MatrixXd trans = detail::gather_cols(u, b.trans_idx);
    trans = (trans.array() * st.rightCols(nt).unaryExpr(&clamp_log_scale).array().exp()) +
            st.leftCols(nt).array();
    detail::scatter_cols(u, b.trans_idx, trans);
  }
  model.norm_initialized = true;
}

// Maximum-likelihood training. Deterministic given the seed (single-writer,
// sequential updates). Returns the per-epoch mean NLL trace.
inline std::vector<double> train(FlowModel& model, const Dataset& data,
                                 const TrainConfig& cfg) {
  cfg.validate();
  data.validate();
  if (data.dim() != model.d) {
    throw std::invalid_argument("dataset dimension " + std::to_string(data.dim()) +
                                " does not match model d=" + std::to_string(model.d));
  }

  const int n = data.n();
  Rng rng(cfg.seed);

  if (cfg.norm_data_init && !model.norm_initialized) {
    const int init_n = std::min(n, 512);
    normalization_data_init(model, data.points.topRows(init_n));
  }

  const int n_params = model.param_count();
  Eigen::VectorXd theta = model.params();
  Eigen::VectorXd grad(n_params);
  Eigen::VectorXd adam_m = Eigen::VectorXd::Zero(n_params);
  Eigen::VectorXd adam_v = Eigen::VectorXd::Zero(n_params);
  constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  long step = 0;

  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;

  std::vector<double> epoch_nll;
  epoch_nll.reserve(cfg.epochs);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double nll_sum = 0.0;
    int n_batches = (n + cfg.batch_size - 1) / cfg.batch_size;
    for (int bi = 0; bi < n_batches; ++bi) {
      const int lo = bi * cfg.batch_size;
      const int hi = std::min(n, lo + cfg.batch_size);
      Eigen::MatrixXd xb(hi - lo, data.dim());
      for (int r = lo; r < hi; ++r) xb.row(r - lo) = data.points.row(order[r]);
      if (cfg.dequant_noise > 0.0) {
        for (int i = 0; i < xb.rows(); ++i) {
          for (int j = 0; j < xb.cols(); ++j) xb(i, j) += cfg.dequant_noise * rng.uniform();
        }
      }

      const double loss = nll_and_grad(model, xb, grad);
      if (!std::isfinite(loss) || !grad.allFinite()) {
        throw NumericError("training loss is non-finite at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(bi));
      }
      nll_sum += loss * (hi - lo);

      if (cfg.grad_clip > 0.0) {
        const double gnorm = grad.norm();
        if (gnorm > cfg.grad_clip) grad *= cfg.grad_clip / gnorm;
      }
      if (cfg.optimizer == OptimizerKind::Adam) {
        ++step;
        adam_m = beta1 * adam_m + (1.0 - beta1) * grad;
        adam_v = beta2 * adam_v + (1.0 - beta2) * grad.array().square().matrix();
        const double mc = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double vc = 1.0 - std::pow(beta2, static_cast<double>(step));
        theta -= (cfg.learning_rate / mc) *
                 (adam_m.array() / ((adam_v.array() / vc).sqrt() + adam_eps)).matrix();
      } else {
        theta -= cfg.learning_rate * grad;
      }
      model.set_params(theta);
    }
    epoch_nll.push_back(nll_sum / n);
  }
  return epoch_nll;
}

}  // namespace tflw
