#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "oracles.hpp"
#include "tflw/classifier.hpp"
#include "tflw/dataset.hpp"
#include "tflw/flow.hpp"
#include "tflw/rng.hpp"

using Catch::Approx;

namespace {

tflw::FlowModel identity_model(int d) {
  return tflw::FlowModel::create(d, 2, 8, tflw::DataTransform::identity(), 1);
}

tflw::ClassEntry entry_at(int label, const Eigen::VectorXd& mean, double var) {
  tflw::ClassEntry e;
  e.label = label;
  e.count = 1;
  e.lambda = 1.0;
  e.predictive.mean = mean;
  e.predictive.cov = tflw::Covariance::isotropic(var);
  return e;
}

tflw::ClassifierBank two_class_bank(double separation) {
  tflw::ClassifierBank bank;
  bank.classes.push_back(entry_at(0, Eigen::VectorXd::Constant(2, -separation), 1.0));
  bank.classes.push_back(entry_at(1, Eigen::VectorXd::Constant(2, separation), 1.0));
  return bank;
}

}  // namespace

TEST_CASE("single observation, unit noise scale: predictive is half the point plus unit noise") {
  tflw::FlowModel m = identity_model(2);
  tflw::Dataset ds;
  ds.points = (Eigen::MatrixXd(1, 2) << 4.0, -2.0).finished();
  ds.labels = {3};
  const tflw::ClassifierBank bank = tflw::fit(m, ds, tflw::LambdaPolicy::absolute(1.0));

  REQUIRE(bank.classes.size() == 1);
  const tflw::ClassEntry& e = bank.classes[0];
  CHECK(e.label == 3);
  CHECK(e.count == 1);
  CHECK(e.lambda == Approx(1.0));
  CHECK(e.predictive.mean[0] == Approx(2.0).margin(1e-12));
  CHECK(e.predictive.mean[1] == Approx(-1.0).margin(1e-12));
  CHECK(e.predictive.cov.iso == Approx(1.5).epsilon(1e-12));
}

TEST_CASE("ten classes of ten examples produce a ten-entry bank") {
  tflw::FlowModel m = identity_model(3);
  tflw::Rng rng(5);
  tflw::Dataset ds;
  ds.points.resize(100, 3);
  ds.labels.resize(100);
  for (int c = 0; c < 10; ++c) {
    for (int i = 0; i < 10; ++i) {
      const int row = c * 10 + i;
      for (int j = 0; j < 3; ++j) ds.points(row, j) = c + 0.1 * rng.normal();
      ds.labels[row] = c;
    }
  }
  const tflw::ClassifierBank bank = tflw::fit(m, ds);
  REQUIRE(bank.classes.size() == 10);
  for (int c = 0; c < 10; ++c) {
    CHECK(bank.classes[c].label == c);
    CHECK(bank.classes[c].count == 10);
    CHECK(bank.classes[c].lambda == Approx(5.0));  // default policy: half of m
  }
  CHECK_NOTHROW(bank.validate());
}

TEST_CASE("fitting is invariant to within-class example order") {
  tflw::FlowModel m = identity_model(2);
  oracles::perturb(m, 21);
  tflw::Rng rng(9);
  Eigen::MatrixXd pts(8, 2);
  for (int i = 0; i < pts.size(); ++i) pts.data()[i] = rng.uniform(-1.0, 1.0);

  tflw::Dataset fwd;
  fwd.points = pts;
  fwd.labels = {0, 0, 0, 0, 1, 1, 1, 1};
  tflw::Dataset rev;
  rev.points.resize(8, 2);
  for (int i = 0; i < 4; ++i) rev.points.row(i) = pts.row(3 - i);
  for (int i = 4; i < 8; ++i) rev.points.row(i) = pts.row(11 - i);
  rev.labels = fwd.labels;

  const tflw::ClassifierBank a = tflw::fit(m, fwd);
  const tflw::ClassifierBank b = tflw::fit(m, rev);
  for (int c = 0; c < 2; ++c) {
    CHECK((a.classes[c].predictive.mean - b.classes[c].predictive.mean).cwiseAbs().maxCoeff() <
          1e-12);
    CHECK(a.classes[c].predictive.cov.iso == Approx(b.classes[c].predictive.cov.iso));
  }
}

TEST_CASE("fit rejects unlabeled or mismatched datasets") {
  tflw::FlowModel m = identity_model(2);
  tflw::Dataset unlabeled;
  unlabeled.points = Eigen::MatrixXd::Zero(3, 2);
  CHECK_THROWS_AS(tflw::fit(m, unlabeled), std::invalid_argument);

  tflw::Dataset wrong;
  wrong.points = Eigen::MatrixXd::Zero(3, 5);
  wrong.labels = {0, 1, 0};
  CHECK_THROWS_AS(tflw::fit(m, wrong), std::invalid_argument);
}

TEST_CASE("noise-scale policies resolve as documented") {
  CHECK(tflw::LambdaPolicy::absolute(2.0).resolve(5) == Approx(2.0));
  CHECK(tflw::LambdaPolicy::fraction_of_m(0.5).resolve(8) == Approx(4.0));
  CHECK(tflw::LambdaPolicy::fraction_of_m(0.3).resolve(10) == Approx(3.0));
  CHECK_THROWS_AS(tflw::LambdaPolicy::absolute(0.0).resolve(3), std::invalid_argument);
  CHECK_THROWS_AS(tflw::LambdaPolicy::fraction_of_m(-1.0).resolve(3), std::invalid_argument);
}

TEST_CASE("a single-class bank always answers with its label") {
  tflw::FlowModel m = identity_model(2);
  tflw::ClassifierBank bank;
  bank.classes.push_back(entry_at(7, Eigen::VectorXd::Zero(2), 1.0));
  tflw::Rng rng(31);
  for (int i = 0; i < 10; ++i) {
    CHECK(tflw::predict(bank, m, oracles::random_vector(2, rng, -20.0, 20.0)) == 7);
  }
}

TEST_CASE("equal-covariance classes split space at the mean bisector") {
  tflw::FlowModel m = identity_model(2);
  const tflw::ClassifierBank bank = two_class_bank(5.0);
  CHECK(tflw::predict(bank, m, Eigen::VectorXd::Constant(2, 4.8)) == 1);
  CHECK(tflw::predict(bank, m, Eigen::VectorXd::Constant(2, -4.8)) == 0);
}

TEST_CASE("prediction equals the brute-force argmax over class log-densities") {
  tflw::Rng rng(37);
  tflw::ClassifierBank bank;
  Eigen::VectorXd v(3);
  v << 0.4, 1.2, 0.8;
  for (int c = 0; c < 5; ++c) {
    tflw::ClassEntry e;
    e.label = c * 2;  // labels 0, 2, 4, 6, 8
    e.count = 3;
    e.lambda = 1.5;
    e.predictive.mean = oracles::random_vector(3, rng);
    if (c % 2 == 0) {
      e.predictive.cov = tflw::Covariance::isotropic(rng.uniform(0.3, 2.0));
    } else {
      e.predictive.cov = tflw::Covariance::diagonal(v * rng.uniform(0.5, 1.5));
    }
    bank.classes.push_back(e);
  }

  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::VectorXd z = oracles::random_vector(3, rng, -4.0, 4.0);
    int best_label = -1;
    double best = -std::numeric_limits<double>::infinity();
    for (const tflw::ClassEntry& e : bank.classes) {
      const double s = e.predictive.log_density(z);
      if (s > best) {
        best = s;
        best_label = e.label;
      }
    }
    INFO("trial " << trial);
    CHECK(tflw::predict_latent(bank, z) == best_label);
  }
}

TEST_CASE("argmax is stable under strictly increasing transforms of the scores") {
  tflw::Rng rng(41);
  const tflw::ClassifierBank bank = two_class_bank(1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd z = oracles::random_vector(2, rng);
    std::vector<double> scores;
    const int label = tflw::predict_latent(bank, z, &scores);
    std::vector<double> warped(scores.size());
    std::transform(scores.begin(), scores.end(), warped.begin(),
                   [](double s) { return 3.0 * s + 11.0; });
    const auto best = std::max_element(warped.begin(), warped.end());
    CHECK(bank.classes[best - warped.begin()].label == label);
  }
}

TEST_CASE("identical predictives fall back to the lowest label") {
  tflw::ClassifierBank bank;
  for (int label : {3, 5, 9}) {
    bank.classes.push_back(entry_at(label, Eigen::VectorXd::Zero(2), 1.0));
  }
  tflw::Rng rng(43);
  for (int i = 0; i < 10; ++i) {
    CHECK(tflw::predict_latent(bank, oracles::random_vector(2, rng)) == 3);
  }
}

TEST_CASE("nearest neighbor of a support point is itself") {
  tflw::FlowModel m = identity_model(2);
  tflw::Dataset ds;
  ds.points = (Eigen::MatrixXd(3, 2) << 0.0, 0.0, 5.0, 5.0, -5.0, 5.0).finished();
  ds.labels = {4, 8, 2};
  for (int i = 0; i < 3; ++i) {
    CHECK(tflw::knn_predict(tflw::KnnSpace::Pixel, m, ds, ds.points.row(i).transpose(), 1) ==
          ds.labels[i]);
  }
}

TEST_CASE("pixel-space neighbors ignore the flow entirely") {
  tflw::FlowModel a = identity_model(2);
  tflw::FlowModel b = identity_model(2);
  oracles::perturb(b, 99);
  tflw::Dataset ds;
  ds.points = (Eigen::MatrixXd(4, 2) << 1.0, 1.0, -1.0, -1.0, 2.0, 2.0, -2.0, -2.0).finished();
  ds.labels = {0, 1, 0, 1};
  tflw::Rng rng(47);
  for (int i = 0; i < 20; ++i) {
    const Eigen::VectorXd q = oracles::random_vector(2, rng);
    CHECK(tflw::knn_predict(tflw::KnnSpace::Pixel, a, ds, q, 1) ==
          tflw::knn_predict(tflw::KnnSpace::Pixel, b, ds, q, 1));
  }
}

TEST_CASE("latent neighbors under an identity flow match pixel neighbors") {
  tflw::FlowModel m = identity_model(2);
  tflw::Dataset ds;
  ds.points = (Eigen::MatrixXd(4, 2) << 1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, -1.0).finished();
  ds.labels = {0, 1, 2, 3};
  tflw::Rng rng(53);
  for (int i = 0; i < 20; ++i) {
    const Eigen::VectorXd q = oracles::random_vector(2, rng);
    CHECK(tflw::knn_predict(tflw::KnnSpace::Latent, m, ds, q, 3) ==
          tflw::knn_predict(tflw::KnnSpace::Pixel, m, ds, q, 3));
  }
}

TEST_CASE("distance ties go to the earlier dataset row") {
  tflw::FlowModel m = identity_model(2);
  tflw::Dataset ds;
  ds.points = (Eigen::MatrixXd(2, 2) << 0.0, 1.0, 0.0, -1.0).finished();
  ds.labels = {7, 2};  // both at distance 1 from the origin
  const Eigen::VectorXd q = Eigen::VectorXd::Zero(2);
  CHECK(tflw::knn_predict(tflw::KnnSpace::Pixel, m, ds, q, 1) == 7);
}

TEST_CASE("vote ties go to the lowest label") {
  tflw::FlowModel m = identity_model(1);
  tflw::Dataset ds;
  ds.points = (Eigen::MatrixXd(2, 1) << 0.5, -0.6).finished();
  ds.labels = {5, 3};
  const Eigen::VectorXd q = Eigen::VectorXd::Zero(1);
  // k = 2: one vote each; the lower label wins even though label 5 is nearer.
  CHECK(tflw::knn_predict(tflw::KnnSpace::Pixel, m, ds, q, 2) == 3);
}

TEST_CASE("neighbor counts are validated") {
  tflw::FlowModel m = identity_model(2);
  tflw::Dataset ds;
  ds.points = Eigen::MatrixXd::Zero(3, 2);
  ds.labels = {0, 1, 2};
  const Eigen::VectorXd q = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(tflw::knn_predict(tflw::KnnSpace::Pixel, m, ds, q, 0), std::invalid_argument);
  CHECK_THROWS_AS(tflw::knn_predict(tflw::KnnSpace::Pixel, m, ds, q, 4), std::invalid_argument);
  tflw::Dataset empty;
  empty.points.resize(0, 2);
  CHECK_THROWS_AS(tflw::knn_predict(tflw::KnnSpace::Pixel, m, empty, q, 1), tflw::DataError);
}

TEST_CASE("a constant classifier scores one tenth on a balanced ten-class set") {
  tflw::FlowModel m = identity_model(2);
  tflw::ClassifierBank bank;
  for (int c = 0; c < 10; ++c) {
    bank.classes.push_back(entry_at(c, Eigen::VectorXd::Zero(2), 1.0));
  }
  tflw::Rng rng(59);
  tflw::Dataset test;
  test.points.resize(100, 2);
  test.labels.resize(100);
  for (int i = 0; i < 100; ++i) {
    test.points.row(i) = oracles::random_vector(2, rng).transpose();
    test.labels[i] = i / 10;
  }
  const tflw::EvalReport rep = tflw::evaluate(bank, m, test);
  CHECK(rep.accuracy == Approx(0.10).margin(1e-12));
  CHECK(rep.per_class_accuracy[0] == Approx(1.0));
  for (int c = 1; c < 10; ++c) CHECK(rep.per_class_accuracy[c] == 0.0);
  CHECK(rep.n_test == 100);
  // Every prediction lands in column 0 of the confusion matrix.
  for (int c = 0; c < 10; ++c) CHECK(rep.confusion(c, 0) == 10);
}

TEST_CASE("well-separated classes are classified perfectly by every method") {
  tflw::FlowModel m = identity_model(2);
  Eigen::MatrixXd centers(2, 2);
  centers << 10.0, 10.0, -10.0, -10.0;
  tflw::Dataset ds = tflw::make_blobs(40, centers, 0.1, 61);

  const tflw::ClassifierBank bank = tflw::fit(m, ds);
  const tflw::EvalReport pred = tflw::evaluate(bank, m, ds);
  CHECK(pred.accuracy == 1.0);
  CHECK(pred.method == "predictive");
  CHECK(pred.lambda == Approx(0.5 * 20.0));
  CHECK(pred.m_per_class == std::vector<int>{20, 20});

  const tflw::EvalReport px = tflw::evaluate_knn(tflw::KnnSpace::Pixel, m, ds, ds, 1);
  CHECK(px.accuracy == 1.0);
  CHECK(px.method == "knn_pixel");
  CHECK(px.k == 1);

  const tflw::EvalReport lat = tflw::evaluate_knn(tflw::KnnSpace::Latent, m, ds, ds, 1);
  CHECK(lat.accuracy == 1.0);
  CHECK(lat.method == "knn_latent");
}

TEST_CASE("fit and evaluate are deterministic") {
  tflw::FlowModel m = identity_model(2);
  oracles::perturb(m, 67);
  Eigen::MatrixXd centers(3, 2);
  centers << 4.0, 0.0, -4.0, 0.0, 0.0, 4.0;
  tflw::Dataset ds = tflw::make_blobs(30, centers, 1.5, 3);

  const tflw::EvalReport a = tflw::evaluate(tflw::fit(m, ds), m, ds);
  const tflw::EvalReport b = tflw::evaluate(tflw::fit(m, ds), m, ds);
  CHECK(a.accuracy == b.accuracy);
  CHECK(a.confusion == b.confusion);
  CHECK(a.per_class_accuracy == b.per_class_accuracy);
}

TEST_CASE("non-finite encodings are scored incorrect and reported, not dropped") {
  tflw::FlowModel bad = identity_model(2);
  bad.blocks[0].norm_log_scale.setConstant(1000.0);  // overflow on any nonzero input

  tflw::ClassifierBank bank;
  bank.classes.push_back(entry_at(0, Eigen::VectorXd::Zero(2), 1.0));
  bank.classes.push_back(entry_at(1, Eigen::VectorXd::Ones(2), 1.0));

  tflw::Dataset test;
  test.points = (Eigen::MatrixXd(4, 2) << 1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 4.0, 4.0).finished();
  test.labels = {0, 0, 1, 1};

  const tflw::EvalReport rep = tflw::evaluate(bank, bad, test);
  CHECK(rep.accuracy == 0.0);
  CHECK(rep.n_test == 4);
  CHECK(std::accumulate(rep.degenerate.begin(), rep.degenerate.end(), 0) == 4);
  CHECK(rep.confusion.sum() == 0);
}

TEST_CASE("latent neighbors with a degenerate query count it as a miss") {
  tflw::FlowModel m = identity_model(1);
  m.blocks[0].norm_log_scale.setConstant(100.0);  // finite for small x, overflow for huge x

  tflw::Dataset support;
  support.points = (Eigen::MatrixXd(2, 1) << 1.0, -1.0).finished();
  support.labels = {0, 1};
  tflw::Dataset test;
  test.points = (Eigen::MatrixXd(2, 1) << 1.0, 1e300).finished();
  test.labels = {0, 1};

  const tflw::EvalReport rep = tflw::evaluate_knn(tflw::KnnSpace::Latent, m, support, test, 1);
  CHECK(rep.n_test == 2);
  CHECK(std::accumulate(rep.degenerate.begin(), rep.degenerate.end(), 0) == 1);
}

TEST_CASE("non-finite support encodings abort latent-space evaluation") {
  tflw::FlowModel bad = identity_model(1);
  bad.blocks[0].norm_log_scale.setConstant(1000.0);
  tflw::Dataset ds;
  ds.points = (Eigen::MatrixXd(2, 1) << 1.0, -1.0).finished();
  ds.labels = {0, 1};
  CHECK_THROWS_AS(tflw::evaluate_knn(tflw::KnnSpace::Latent, bad, ds, ds, 1), tflw::NumericError);
}

TEST_CASE("predictions outside the test label set are counted separately") {
  tflw::FlowModel m = identity_model(2);
  tflw::ClassifierBank bank;
  bank.classes.push_back(entry_at(5, Eigen::VectorXd::Zero(2), 1.0));  // only knows label 5
  tflw::Dataset test;
  test.points = Eigen::MatrixXd::Random(6, 2);
  test.labels = {0, 0, 1, 1, 2, 2};
  const tflw::EvalReport rep = tflw::evaluate(bank, m, test);
  CHECK(rep.accuracy == 0.0);
  CHECK(std::accumulate(rep.foreign.begin(), rep.foreign.end(), 0) == 6);
}

TEST_CASE("report invariants hold on a mixed outcome") {
  tflw::FlowModel m = identity_model(2);
  Eigen::MatrixXd centers(2, 2);
  centers << 2.0, 0.0, -2.0, 0.0;
  tflw::Dataset ds = tflw::make_blobs(60, centers, 1.8, 13);
  const tflw::EvalReport rep = tflw::evaluate(tflw::fit(m, ds), m, ds);
  CHECK_NOTHROW(rep.validate());
  CHECK(rep.accuracy > 0.5);  // overlapping blobs: imperfect but far above chance
  long total = rep.confusion.sum();
  total += std::accumulate(rep.degenerate.begin(), rep.degenerate.end(), 0L);
  total += std::accumulate(rep.foreign.begin(), rep.foreign.end(), 0L);
  CHECK(total == rep.n_test);
}

TEST_CASE("bank validation flags duplicate labels and dimension drift") {
  tflw::ClassifierBank dup;
  dup.classes.push_back(entry_at(1, Eigen::VectorXd::Zero(2), 1.0));
  dup.classes.push_back(entry_at(1, Eigen::VectorXd::Ones(2), 1.0));
  CHECK_THROWS_AS(dup.validate(), std::invalid_argument);

  tflw::ClassifierBank drift;
  drift.classes.push_back(entry_at(0, Eigen::VectorXd::Zero(2), 1.0));
  drift.classes.push_back(entry_at(1, Eigen::VectorXd::Zero(3), 1.0));
  CHECK_THROWS_AS(drift.validate(), std::invalid_argument);

  tflw::ClassifierBank empty;
  CHECK_THROWS_AS(empty.validate(), std::invalid_argument);
}
