#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "tflw/rng.hpp"

namespace tflw {

// Two-hidden-layer tanh network used as the coupling conditioner. The output
// layer is zero-initialized so a freshly built coupling block is the identity
// map. Handles zero input width (the d = 1 case): the network then reduces to
// learnable constants driven by its biases.
struct Mlp {
  Eigen::MatrixXd w1, w2, w3;  // (h x in), (h x h), (out x h)
  Eigen::VectorXd b1, b2, b3;

  static Mlp create(int in, int hidden, int out, Rng& rng) {
    Mlp m;
    m.w1.resize(hidden, in);
    m.w2.resize(hidden, hidden);
    m.w3 = Eigen::MatrixXd::Zero(out, hidden);
    m.b1 = Eigen::VectorXd::Zero(hidden);
    m.b2 = Eigen::VectorXd::Zero(hidden);
    m.b3 = Eigen::VectorXd::Zero(out);
    const double a1 = std::sqrt(6.0 / (in + hidden));
    for (int i = 0; i < m.w1.size(); ++i) m.w1.data()[i] = rng.uniform(-a1, a1);
    const double a2 = std::sqrt(6.0 / (hidden + hidden));
    for (int i = 0; i < m.w2.size(); ++i) m.w2.data()[i] = rng.uniform(-a2, a2);
    return m;
  }

  int in_dim() const { return static_cast<int>(w1.cols()); }
  int hidden_dim() const { return static_cast<int>(w1.rows()); }
  int out_dim() const { return static_cast<int>(w3.rows()); }

  struct Cache {
    Eigen::MatrixXd x, h1, h2;  // input and post-tanh activations, rows = samples
  };

  // X: (batch x in) -> (batch x out).
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Cache* cache = nullptr) const {
    Eigen::MatrixXd h1 = ((x * w1.transpose()).rowwise() + b1.transpose()).array().tanh();
    Eigen::MatrixXd h2 = ((h1 * w2.transpose()).rowwise() + b2.transpose()).array().tanh();
    Eigen::MatrixXd y = (h2 * w3.transpose()).rowwise() + b3.transpose();
    if (cache) {
      cache->x = x;
      cache->h1 = std::move(h1);
      cache->h2 = std::move(h2);
      return y;
    }
    return y;
  }

  // Reverse pass: given dL/dY, accumulate parameter gradients into `grad`
  // (same shapes as *this) and return dL/dX.
  Eigen::MatrixXd backward(const Cache& c, const Eigen::MatrixXd& gy, Mlp& grad) const {
    Eigen::MatrixXd gh2 = gy * w3;
    Eigen::MatrixXd gz2 = gh2.array() * (1.0 - c.h2.array().square());
    Eigen::MatrixXd gh1 = gz2 * w2;
    Eigen::MatrixXd gz1 = gh1.array() * (1.0 - c.h1.array().square());

    grad.w3 += gy.transpose() * c.h2;
    grad.b3 += gy.colwise().sum();
    grad.w2 += gz2.transpose() * c.h1;
    grad.b2 += gz2.colwise().sum();
    grad.w1 += gz1.transpose() * c.x;
    grad.b1 += gz1.colwise().sum();
    return gz1 * w1;
  }
};

}  // namespace tflw
