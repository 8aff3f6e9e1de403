#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tflw/dataset.hpp"
#include "tflw/errors.hpp"
#include "tflw/flow.hpp"
#include "tflw/gaussian.hpp"
#include "tflw/posterior.hpp"

namespace tflw {

// How to pick the likelihood variance per class. The fraction form scales
// with each class's own evidence count (lambda_c = fraction * m_c), keeping
// every class at the same trust ratio even when class sizes differ.
struct LambdaPolicy {
  enum class Mode : std::uint8_t { Absolute = 0, FractionOfM = 1 };
  Mode mode = Mode::FractionOfM;
  double value = 0.5;

  static LambdaPolicy absolute(double lambda) { return {Mode::Absolute, lambda}; }
  static LambdaPolicy fraction_of_m(double f) { return {Mode::FractionOfM, f}; }

  double resolve(int m) const {
    const double lambda = mode == Mode::Absolute ? value : value * static_cast<double>(m);
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
      throw std::invalid_argument("lambda policy resolves to a non-positive value");
    }
    return lambda;
  }

  std::string describe() const {
    return mode == Mode::Absolute ? "absolute " + std::to_string(value)
                                  : std::to_string(value) + " * m per class";
  }
};

// One conditioned class: its label, evidence count, the lambda that was used,
// and the resulting posterior predictive over latents.
struct ClassEntry {
  int label = 0;
  int count = 0;        // m for this class
  double lambda = 0.0;  // resolved absolute value
  GaussianSpec predictive;
};

// Labeled collection of posterior predictive distributions, one per class,
// all derived from the same flow (identified by its checkpoint hash).
struct ClassifierBank {
  std::vector<ClassEntry> classes;  // ordered by ascending label
  LambdaPolicy policy;
  std::uint64_t model_hash = 0;

  int dim() const { return classes.empty() ? 0 : classes.front().predictive.dim(); }

  void validate() const {
    if (classes.empty()) throw std::invalid_argument("classifier bank has no classes");
    const int d = classes.front().predictive.dim();
    for (std::size_t i = 0; i < classes.size(); ++i) {
      classes[i].predictive.validate("class " + std::to_string(classes[i].label) +
                                     " predictive");
      if (classes[i].predictive.dim() != d) {
        throw std::invalid_argument("class predictives disagree on dimension");
      }
      if (i > 0 && classes[i].label <= classes[i - 1].label) {
        throw std::invalid_argument("class labels must be unique and ascending");
      }
    }
  }
};

// Condition the flow on each class's examples. No gradient steps anywhere:
// per class this is encode -> conjugate update -> predictive.
inline ClassifierBank fit(const FlowModel& model, const Dataset& labeled,
                          const LambdaPolicy& policy = LambdaPolicy::fraction_of_m(0.5)) {
  labeled.validate();
  if (!labeled.has_labels()) throw std::invalid_argument("fit requires a labeled dataset");
  if (labeled.dim() != model.d) {
    throw std::invalid_argument("dataset dimension " + std::to_string(labeled.dim()) +
                                " does not match flow dimension " + std::to_string(model.d));
  }
  const std::map<int, std::vector<int>> by_label = labeled.rows_by_label();

  ClassifierBank bank;
  bank.policy = policy;
  for (const auto& [label, rows] : by_label) {
    Eigen::MatrixXd x(rows.size(), labeled.dim());
    for (std::size_t i = 0; i < rows.size(); ++i) x.row(i) = labeled.points.row(rows[i]);

    ClassEntry entry;
    entry.label = label;
    entry.count = static_cast<int>(rows.size());
    entry.lambda = policy.resolve(entry.count);

    const Evidence ev = encode_evidence(model, x);
    const LikelihoodConfig like{entry.lambda};
    entry.predictive = posterior_predictive(posterior_isotropic(ev, like), like);
    bank.classes.push_back(std::move(entry));
  }
  bank.validate();
  return bank;
}

// Argmax over class log-densities of the encoded point; ties go to the
// lowest label. Returns the winning label; `scores` (optional) receives the
// per-class log-densities in bank order.
inline int predict_latent(const ClassifierBank& bank, const Eigen::VectorXd& z,
                          std::vector<double>* scores = nullptr) {
  if (bank.classes.empty()) throw std::invalid_argument("classifier bank has no classes");
  if (scores) scores->clear();
  int best_label = bank.classes.front().label;
  double best = -std::numeric_limits<double>::infinity();
  bool first = true;
  for (const ClassEntry& entry : bank.classes) {
    const double s = entry.predictive.log_density(z);
    if (scores) scores->push_back(s);
    // Strict > plus ascending label order implements the lowest-label tie rule.
    if (first || s > best) {
      best = s;
      best_label = entry.label;
      first = false;
    }
  }
  return best_label;
}

inline int predict(const ClassifierBank& bank, const FlowModel& model, const Eigen::VectorXd& x,
                   std::vector<double>* scores = nullptr) {
  if (x.size() != model.d) {
    throw std::invalid_argument("predict: point dimension " + std::to_string(x.size()) +
                                " does not match flow dimension " + std::to_string(model.d));
  }
  const Eigen::MatrixXd z = model.inverse(x.transpose());
  return predict_latent(bank, z.row(0).transpose(), scores);
}

enum class KnnSpace : std::uint8_t { Pixel = 0, Latent = 1 };

inline const char* knn_space_name(KnnSpace s) {
  return s == KnnSpace::Pixel ? "pixel" : "latent";
}

// k-NN over precomputed reference coordinates (pixel values or latents).
// Majority vote; vote ties resolved by lowest label, distance ties by
// dataset order (stable selection of the k smallest).
inline int knn_vote(const Eigen::MatrixXd& refs, const std::vector<int>& labels,
                    const Eigen::VectorXd& q, int k) {
  const int n = static_cast<int>(refs.rows());
  if (n < 1) throw std::invalid_argument("k-NN: empty labeled set");
  if (k < 1 || k > n) {
    throw std::invalid_argument("k-NN: k = " + std::to_string(k) + " with " + std::to_string(n) +
                                " labeled examples");
  }
  const Eigen::VectorXd d2 = (refs.rowwise() - q.transpose()).rowwise().squaredNorm();
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return d2[a] < d2[b]; });

  std::map<int, int> votes;
  for (int i = 0; i < k; ++i) votes[labels[order[i]]]++;
  int best_label = votes.begin()->first;
  int best_count = votes.begin()->second;
  for (const auto& [label, count] : votes) {
    if (count > best_count) {  // map iterates ascending: ties keep the lowest label
      best_count = count;
      best_label = label;
    }
  }
  return best_label;
}

inline int knn_predict(KnnSpace space, const FlowModel& model, const Dataset& labeled,
                       const Eigen::VectorXd& x, int k = 1) {
  labeled.validate();
  if (!labeled.has_labels()) throw std::invalid_argument("k-NN requires a labeled dataset");
  if (x.size() != labeled.dim()) {
    throw std::invalid_argument("k-NN: point dimension " + std::to_string(x.size()) +
                                " does not match dataset dimension " +
                                std::to_string(labeled.dim()));
  }
  if (space == KnnSpace::Pixel) {
    return knn_vote(labeled.points, labeled.labels, x, k);
  }
  const Eigen::MatrixXd refs = model.inverse(labeled.points);
  const Eigen::MatrixXd zq = model.inverse(x.transpose());
  return knn_vote(refs, labeled.labels, zq.row(0).transpose(), k);
}

// Evaluation summary for one method. `confusion` is indexed by position in
// `labels` (rows = true class, cols = predicted class); predictions outside
// the label set land in `foreign`, test points whose encoding came out
// non-finite land in `degenerate` (scored incorrect, never dropped). All
// counts together sum to the test-set size.
struct EvalReport {
  std::string method;            // "predictive", "knn_pixel", "knn_latent"
  std::vector<int> labels;       // ascending class labels seen in the test set
  Eigen::MatrixXi confusion;     // |labels| x |labels|
  std::vector<int> degenerate;   // per true class
  std::vector<int> foreign;      // per true class: predicted label not in `labels`
  std::vector<double> per_class_accuracy;
  double accuracy = 0.0;
  int n_test = 0;
  int k = 0;                     // k-NN only, 0 otherwise
  std::vector<int> m_per_class;  // support count per class (fit-time), empty for k-NN
  double lambda = 0.0;           // 0 for k-NN
  std::uint64_t seed = 0;

  void validate() const {
    const int c = static_cast<int>(labels.size());
    long total = 0;
    for (int i = 0; i < c; ++i) {
      for (int j = 0; j < c; ++j) total += confusion(i, j);
      total += degenerate[i] + foreign[i];
    }
    if (total != n_test) {
      throw std::logic_error("confusion counts sum to " + std::to_string(total) + ", expected " +
                             std::to_string(n_test));
    }
    for (double a : per_class_accuracy) {
      if (!(a >= 0.0 && a <= 1.0)) throw std::logic_error("per-class accuracy out of [0, 1]");
    }
    if (!(accuracy >= 0.0 && accuracy <= 1.0)) throw std::logic_error("accuracy out of [0, 1]");
  }
};

namespace detail {

// Shared scoring loop: `predicted` holds one label per test row, or nullopt
// (encoded as INT_MIN) for degenerate rows.
inline EvalReport tally(const std::vector<int>& truth, const std::vector<int>& predicted,
                        std::string method) {
  constexpr int kDegenerate = std::numeric_limits<int>::min();
  EvalReport rep;
  rep.method = std::move(method);
  rep.n_test = static_cast<int>(truth.size());

  std::vector<int> sorted_labels = truth;
  std::sort(sorted_labels.begin(), sorted_labels.end());
  sorted_labels.erase(std::unique(sorted_labels.begin(), sorted_labels.end()),
                      sorted_labels.end());
  rep.labels = sorted_labels;
  const int c = static_cast<int>(rep.labels.size());
  rep.confusion = Eigen::MatrixXi::Zero(c, c);
  rep.degenerate.assign(c, 0);
  rep.foreign.assign(c, 0);

  auto index_of = [&](int label) -> int {
    const auto it = std::lower_bound(rep.labels.begin(), rep.labels.end(), label);
    if (it == rep.labels.end() || *it != label) return -1;
    return static_cast<int>(it - rep.labels.begin());
  };

  int correct = 0;
  std::vector<int> class_total(c, 0), class_correct(c, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int ti = index_of(truth[i]);
    class_total[ti]++;
    if (predicted[i] == kDegenerate) {
      rep.degenerate[ti]++;
      continue;
    }
    const int pi = index_of(predicted[i]);
    if (pi < 0) {
      rep.foreign[ti]++;
      continue;
    }
    rep.confusion(ti, pi)++;
    if (pi == ti) {
      correct++;
      class_correct[ti]++;
    }
  }
  rep.accuracy = truth.empty() ? 0.0 : static_cast<double>(correct) / truth.size();
  rep.per_class_accuracy.resize(c);
  for (int i = 0; i < c; ++i) {
    rep.per_class_accuracy[i] =
        class_total[i] == 0 ? 0.0 : static_cast<double>(class_correct[i]) / class_total[i];
  }
  rep.validate();
  return rep;
}

}  // namespace detail

// Evaluate the posterior-predictive classifier. Test latents are encoded in
// one batch; non-finite encodings are scored incorrect and surfaced in the
// report's `degenerate` counts.
inline EvalReport evaluate(const ClassifierBank& bank, const FlowModel& model,
                           const Dataset& test) {
  bank.validate();
  test.validate();
  if (!test.has_labels()) throw std::invalid_argument("evaluate requires a labeled test set");
  if (test.dim() != model.d) {
    throw std::invalid_argument("test dimension " + std::to_string(test.dim()) +
                                " does not match flow dimension " + std::to_string(model.d));
  }
  constexpr int kDegenerate = std::numeric_limits<int>::min();
  const Eigen::MatrixXd z = model.inverse(test.points);
  std::vector<int> predicted(test.n());
  for (int i = 0; i < test.n(); ++i) {
    if (!z.row(i).allFinite()) {
      predicted[i] = kDegenerate;
      continue;
    }
    predicted[i] = predict_latent(bank, z.row(i).transpose());
  }
  EvalReport rep = detail::tally(test.labels, predicted, "predictive");
  rep.lambda = bank.classes.front().lambda;
  for (const ClassEntry& e : bank.classes) rep.m_per_class.push_back(e.count);
  return rep;
}

// Evaluate a k-NN baseline over the same support/test split.
inline EvalReport evaluate_knn(KnnSpace space, const FlowModel& model, const Dataset& labeled,
                               const Dataset& test, int k = 1) {
  labeled.validate();
  test.validate();
  if (!labeled.has_labels() || !test.has_labels()) {
    throw std::invalid_argument("k-NN evaluation requires labeled support and test sets");
  }
  if (labeled.dim() != test.dim()) {
    throw std::invalid_argument("support dimension " + std::to_string(labeled.dim()) +
                                " does not match test dimension " + std::to_string(test.dim()));
  }
  constexpr int kDegenerate = std::numeric_limits<int>::min();
  Eigen::MatrixXd refs, queries;
  if (space == KnnSpace::Pixel) {
    refs = labeled.points;
    queries = test.points;
  } else {
    if (labeled.dim() != model.d) {
      throw std::invalid_argument("latent k-NN: dataset dimension does not match flow");
    }
    refs = model.inverse(labeled.points);
    queries = model.inverse(test.points);
  }
  if (!refs.allFinite()) {
    throw NumericError("k-NN: support-set encodings contain non-finite values");
  }
  std::vector<int> predicted(test.n());
  for (int i = 0; i < test.n(); ++i) {
    if (!queries.row(i).allFinite()) {
      predicted[i] = kDegenerate;
      continue;
    }
    predicted[i] = knn_vote(refs, labeled.labels, queries.row(i).transpose(), k);
  }
  EvalReport rep = detail::tally(test.labels, predicted,
                                 space == KnnSpace::Pixel ? "knn_pixel" : "knn_latent");
  rep.k = k;
  return rep;
}

}  // namespace tflw
