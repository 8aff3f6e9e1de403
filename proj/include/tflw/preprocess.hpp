#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "tflw/errors.hpp"

namespace tflw {

enum class TransformKind : std::uint8_t {
  Identity = 0,
  Affine = 1,      // per-dimension standardization, y = (x - shift) / scale
  LogitPixel = 2,  // pixels in [0, range): u = x/range, y = logit(alpha + (1-2*alpha)*u)
};

// Elementwise invertible transform applied between raw data space and the
// coupling stack, with its exact per-sample log-Jacobian. For LogitPixel the
// squeeze into [alpha, 1-alpha] keeps the logit argument inside the open unit
// interval; out-of-range inputs are clamped before the logit, so the
// data-to-model direction is total.
struct DataTransform {
  TransformKind kind = TransformKind::Identity;
  Eigen::VectorXd shift;  // Affine only, length d
  Eigen::VectorXd scale;  // Affine only, length d, strictly positive
  double alpha = 0.05;
  double pixel_range = 256.0;

  static DataTransform identity() { return {}; }

  static DataTransform standardize(const Eigen::MatrixXd& data) {
    DataTransform t;
    t.kind = TransformKind::Affine;
    t.shift = data.colwise().mean();
    Eigen::VectorXd var = (data.rowwise() - t.shift.transpose()).array().square().colwise().mean();
    t.scale = var.array().sqrt().max(1e-12);
    return t;
  }

  static DataTransform logit_pixel(double alpha = 0.05, double pixel_range = 256.0) {
    if (!(alpha > 0.0 && alpha < 0.5)) throw std::invalid_argument("logit alpha must be in (0, 0.5)");
    if (!(pixel_range > 0.0)) throw std::invalid_argument("pixel range must be positive");
    DataTransform t;
    t.kind = TransformKind::LogitPixel;
    t.alpha = alpha;
    t.pixel_range = pixel_range;
    return t;
  }

  // Data space -> model space, rows are samples. Adds log|det dy/dx| per
  // sample into `logdet` when given.
  Eigen::MatrixXd to_model(const Eigen::MatrixXd& x, Eigen::VectorXd* logdet = nullptr) const {
    switch (kind) {
      case TransformKind::Identity:
        return x;
      case TransformKind::Affine: {
        check_dim(static_cast<int>(x.cols()));
        Eigen::MatrixXd y =
            (x.rowwise() - shift.transpose()).array().rowwise() / scale.transpose().array();
        if (logdet) logdet->array() -= scale.array().log().sum();
        return y;
      }
      case TransformKind::LogitPixel: {
        const double w = 1.0 - 2.0 * alpha;
        Eigen::MatrixXd y(x.rows(), x.cols());
        for (int i = 0; i < x.rows(); ++i) {
          double ld = 0.0;
          for (int j = 0; j < x.cols(); ++j) {
            double p = alpha + w * (x(i, j) / pixel_range);
            p = std::clamp(p, kOpenEps, 1.0 - kOpenEps);
            y(i, j) = std::log(p) - std::log1p(-p);
            ld += std::log(w / pixel_range) - std::log(p) - std::log1p(-p);
          }
          if (logdet) (*logdet)(i) += ld;
        }
        return y;
      }
    }
    throw std::logic_error("unreachable");
  }

  // Model space -> data space, the exact inverse of to_model on its image.
  // Adds log|det dx/dy| per sample into `logdet` when given.
  Eigen::MatrixXd to_data(const Eigen::MatrixXd& y, Eigen::VectorXd* logdet = nullptr) const {
    switch (kind) {
      case TransformKind::Identity:
        return y;
      case TransformKind::Affine: {
        check_dim(static_cast<int>(y.cols()));
        Eigen::MatrixXd x =
            (y.array().rowwise() * scale.transpose().array()).matrix().rowwise() +
            shift.transpose();
        if (logdet) logdet->array() += scale.array().log().sum();
        return x;
      }
      case TransformKind::LogitPixel: {
        const double w = 1.0 - 2.0 * alpha;
        Eigen::MatrixXd x(y.rows(), y.cols());
        for (int i = 0; i < y.rows(); ++i) {
          double ld = 0.0;
          for (int j = 0; j < y.cols(); ++j) {
            const double v = y(i, j);
            const double p = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                                      : std::exp(v) / (1.0 + std::exp(v));
            x(i, j) = pixel_range * (p - alpha) / w;
            const double pc = std::clamp(p, kOpenEps, 1.0 - kOpenEps);
            ld -= std::log(w / pixel_range) - std::log(pc) - std::log1p(-pc);
          }
          if (logdet) (*logdet)(i) += ld;
        }
        return x;
      }
    }
    throw std::logic_error("unreachable");
  }

  std::string describe() const {
    switch (kind) {
      case TransformKind::Identity:
        return "identity";
      case TransformKind::Affine:
        return "affine(d=" + std::to_string(shift.size()) + ")";
      case TransformKind::LogitPixel:
        return "logit-pixel(alpha=" + std::to_string(alpha) +
               ",range=" + std::to_string(pixel_range) + ")";
    }
    return "?";
  }

 private:
  static constexpr double kOpenEps = 1e-12;

  void check_dim(int d) const {
    if (shift.size() != d || scale.size() != d) {
      throw std::invalid_argument("transform dimension " + std::to_string(shift.size()) +
                                  " does not match data dimension " + std::to_string(d));
    }
  }
};

}  // namespace tflw
