// tflw: train small invertible flows, then repurpose them without retraining
// by conditioning their latent prior on evidence.
//
// Subcommands: train, condition, sample, interpolate, classify, inspect.
// Exit codes: 0 success, 2 usage error, 3 data/format error, 4 numerical
// failure. Seed precedence: --seed flag > TFLW_SEED env var > 0.

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "tflw/tflw.hpp"

namespace {

std::uint64_t env_seed_default() {
  const char* env = std::getenv("TFLW_SEED");
  if (!env || !*env) return 0;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (errno != 0 || *end != '\0') {
    throw std::invalid_argument(std::string("TFLW_SEED is not an unsigned integer: '") + env +
                                "'");
  }
  return v;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// A dataset argument is either a file path (.csv / .idx / idx.gz) or a
// generator spec "synthetic:NAME" with NAME in {two-moons, blobs,
// blob-images, digits}; generator parameters come from the accompanying
// flags.
struct DataOpts {
  std::string spec;
  std::string idx_labels;     // label file for IDX image data
  bool csv_labeled = false;   // CSV rows end with an integer label
  int n = 2000;
  double noise = 0.05;
  int side = 8;
  int per_class = 50;
  std::uint64_t seed = 0;
};

tflw::Dataset resolve_dataset(const DataOpts& o, const char* role) {
  constexpr const char* kPrefix = "synthetic:";
  if (o.spec.rfind(kPrefix, 0) == 0) {
    const std::string name = o.spec.substr(std::string(kPrefix).size());
    if (name == "two-moons") return tflw::make_two_moons(o.n, o.noise, o.seed);
    if (name == "blobs") {
      Eigen::MatrixXd centers(2, 2);
      centers << -2.0, -2.0, 2.0, 2.0;
      return tflw::make_blobs(o.n, centers, o.noise, o.seed);
    }
    if (name == "blob-images") return tflw::make_blob_images(o.n, o.side, o.seed);
    if (name == "digits") return tflw::make_digit_images(o.per_class, o.seed);
    throw std::invalid_argument(std::string(role) + ": unknown synthetic dataset '" + name +
                                "' (expected two-moons, blobs, blob-images or digits)");
  }
  if (ends_with(o.spec, ".csv")) return tflw::load_csv(o.spec, o.csv_labeled);
  // Anything else is treated as IDX (possibly gzipped).
  return tflw::load_idx(o.spec, o.idx_labels);
}

void add_data_flags(CLI::App* cmd, DataOpts& o, const std::string& flag, const char* help) {
  cmd->add_option("--" + flag, o.spec, help)->required();
  cmd->add_option("--" + flag + "-idx-labels", o.idx_labels, "IDX label file for --" + flag);
  cmd->add_flag("--" + flag + "-csv-labeled", o.csv_labeled,
                "treat the last CSV column of --" + flag + " as an integer label");
  cmd->add_option("--" + flag + "-n", o.n, "points for synthetic generators");
  cmd->add_option("--" + flag + "-noise", o.noise, "noise sigma for synthetic generators");
  cmd->add_option("--" + flag + "-side", o.side, "image side for synthetic:blob-images");
  cmd->add_option("--" + flag + "-per-class", o.per_class,
                  "examples per class for synthetic:digits");
  cmd->add_option("--" + flag + "-seed", o.seed, "generator seed (default: --seed)");
}

bool looks_like_pixels(const tflw::Dataset& ds) {
  return ds.dim() >= 16 && ds.points.minCoeff() >= 0.0 && ds.points.maxCoeff() < 256.0;
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
  DataOpts data;
  bool data_seed_set = false;
  std::string out;
  std::string nll_log;
  std::string preprocess = "auto";  // auto | none | standardize | logit
  int blocks = 8;
  int hidden = 0;  // 0 = derive from d
  tflw::TrainConfig cfg;
  double dequant = -1.0;  // <0 = auto (1.0 under logit preprocessing, else 0)
  std::uint64_t seed = 0;
};

int run_train(TrainOpts& o) {
  if (!o.data_seed_set) o.data.seed = o.seed;
  tflw::Dataset ds = resolve_dataset(o.data, "train");
  ds.validate();

  std::string pre = o.preprocess;
  if (pre == "auto") pre = looks_like_pixels(ds) ? "logit" : "standardize";
  tflw::DataTransform transform;
  if (pre == "none") {
    transform = tflw::DataTransform::identity();
  } else if (pre == "standardize") {
    transform = tflw::DataTransform::standardize(ds.points);
  } else if (pre == "logit") {
    transform = tflw::DataTransform::logit_pixel();
  } else {
    throw std::invalid_argument("unknown preprocessing '" + pre +
                                "' (expected auto, none, standardize or logit)");
  }

  const int hidden = o.hidden > 0 ? o.hidden : tflw::default_hidden_width(ds.dim());
  tflw::FlowModel model = tflw::FlowModel::create(ds.dim(), o.blocks, hidden, transform, o.seed);

  o.cfg.seed = o.seed;
  if (o.dequant >= 0.0) {
    o.cfg.dequant_noise = o.dequant;
  } else {
    o.cfg.dequant_noise = pre == "logit" ? 1.0 : 0.0;
  }
  o.cfg.validate();

  std::printf("training: n=%d d=%d blocks=%d hidden=%d preprocess=%s epochs=%d seed=%" PRIu64 "\n",
              ds.n(), ds.dim(), o.blocks, hidden, pre.c_str(), o.cfg.epochs, o.seed);
  const std::vector<double> nll = tflw::train(model, ds, o.cfg);

  tflw::save_checkpoint(model, o.out);
  const std::string log_path = o.nll_log.empty() ? o.out + ".nll.csv" : o.nll_log;
  {
    std::ofstream log(log_path);
    if (!log) throw tflw::DataError("cannot write NLL log: " + log_path);
    log << "epoch,nll\n";
    char buf[64];
    for (std::size_t e = 0; e < nll.size(); ++e) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g\n", e + 1, nll[e]);
      log << buf;
    }
  }
  std::printf("final nll/point: %.6f (epoch 1: %.6f)\n", nll.back(), nll.front());
  std::printf("checkpoint: %s (hash %s)\n", o.out.c_str(),
              tflw::hash_hex(tflw::model_hash(model)).c_str());
  std::printf("nll log: %s\n", log_path.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// condition

struct ConditionOpts {
  std::string checkpoint;
  DataOpts evidence;
  bool evidence_seed_set = false;
  double lambda = 0.0;        // absolute; 0 = unset
  double lambda_frac = 0.5;   // used when --lambda not given
  std::string diag_var;       // CSV of per-dimension variances -> general form
  std::string out;
  std::uint64_t seed = 0;
};

int run_condition(ConditionOpts& o) {
  if (!o.evidence_seed_set) o.evidence.seed = o.seed;
  const tflw::FlowModel model = tflw::load_checkpoint(o.checkpoint);
  tflw::Dataset ev_data = resolve_dataset(o.evidence, "condition");
  ev_data.validate();
  if (ev_data.dim() != model.d) {
    throw tflw::DataError("evidence dimension " + std::to_string(ev_data.dim()) +
                          " does not match checkpoint dimension " + std::to_string(model.d));
  }

  const tflw::Evidence ev = tflw::encode_evidence(model, ev_data.points);
  tflw::PosteriorFile pf;
  pf.m = ev.count;
  pf.checkpoint_hash = tflw::model_hash(model);

  if (!o.diag_var.empty()) {
    const tflw::Dataset vars = tflw::load_csv(o.diag_var, false);
    if (vars.n() != 1 || vars.dim() != model.d) {
      throw tflw::DataError("--diag-var must hold exactly one row of " + std::to_string(model.d) +
                            " variances");
    }
    const tflw::Covariance noise = tflw::Covariance::diagonal(vars.points.row(0).transpose());
    pf.dist = tflw::posterior_general(tflw::standard_prior(model.d), noise, ev);
    pf.lambda = vars.points.row(0).mean();  // scalar summary of the diagonal
    std::printf("likelihood: diagonal (recorded lambda = mean variance)\n");
  } else {
    const double lambda = o.lambda > 0.0 ? o.lambda : o.lambda_frac * ev.count;
    pf.dist = tflw::posterior_isotropic(ev, tflw::LikelihoodConfig{lambda});
    pf.lambda = lambda;
  }

  tflw::save_posterior(pf, o.out);
  std::printf("m: %d\n", ev.count);
  std::printf("lambda: %.6g (lambda/m = %.6g)\n", pf.lambda, pf.lambda / ev.count);
  std::printf("|zbar|: %.6g\n", ev.latent_mean.norm());
  std::printf("kl_to_prior: %.6g\n", tflw::kl_to_prior(pf.dist));
  std::printf("posterior: %s\n", o.out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// sample

struct SampleOpts {
  std::string checkpoint;
  std::string posterior;
  int n = 64;
  int grid_rows = 0, grid_cols = 0;
  std::string out;
  std::uint64_t seed = 0;
};

void parse_grid(const std::string& s, int& rows, int& cols) {
  const auto x = s.find('x');
  if (x == std::string::npos) throw std::invalid_argument("--grid expects ROWSxCOLS, e.g. 4x4");
  rows = std::stoi(s.substr(0, x));
  cols = std::stoi(s.substr(x + 1));
}

int run_sample(SampleOpts& o) {
  const tflw::FlowModel model = tflw::load_checkpoint(o.checkpoint);
  Eigen::MatrixXd samples;
  if (o.posterior.empty()) {
    samples = model.sample(o.n, o.seed);
  } else {
    const tflw::PosteriorFile pf = tflw::load_posterior(o.posterior);
    if (pf.checkpoint_hash != tflw::model_hash(model)) {
      std::fprintf(stderr,
                   "warning: posterior was built from checkpoint %s, sampling through %s\n",
                   tflw::hash_hex(pf.checkpoint_hash).c_str(),
                   tflw::hash_hex(tflw::model_hash(model)).c_str());
    }
    samples = tflw::conditioned_sample(model, pf.dist, o.n, o.seed);
  }

  if (ends_with(o.out, ".pgm")) {
    if (o.grid_rows * o.grid_cols != o.n) {
      throw std::invalid_argument("--grid " + std::to_string(o.grid_rows) + "x" +
                                  std::to_string(o.grid_cols) + " does not cover --n " +
                                  std::to_string(o.n));
    }
    tflw::save_pgm_grid(samples, o.grid_rows, o.grid_cols, o.out);
  } else {
    tflw::Dataset ds;
    ds.points = samples;
    tflw::save_csv(ds, o.out);
  }
  std::printf("wrote %d samples to %s\n", o.n, o.out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// interpolate

struct InterpolateOpts {
  std::string a, b;
  int steps = 5;
  std::string out_prefix;
  std::string checkpoint;  // optional; enables per-step sample grids
  int n = 0;
  int grid_rows = 0, grid_cols = 0;
  std::uint64_t seed = 0;
};

int run_interpolate(InterpolateOpts& o) {
  if (o.steps < 2) throw std::invalid_argument("--steps must be >= 2");
  const tflw::PosteriorFile pa = tflw::load_posterior(o.a);
  const tflw::PosteriorFile pb = tflw::load_posterior(o.b);
  if (pa.checkpoint_hash != pb.checkpoint_hash) {
    std::fprintf(stderr, "warning: endpoints come from different checkpoints (%s vs %s)\n",
                 tflw::hash_hex(pa.checkpoint_hash).c_str(),
                 tflw::hash_hex(pb.checkpoint_hash).c_str());
  }
  std::optional<tflw::FlowModel> model;
  if (!o.checkpoint.empty()) {
    model = tflw::load_checkpoint(o.checkpoint);
    if (o.n < 1 || o.grid_rows * o.grid_cols != o.n) {
      throw std::invalid_argument("sample grids need --n and a matching --grid ROWSxCOLS");
    }
  }

  for (int i = 0; i < o.steps; ++i) {
    const double t = static_cast<double>(i) / (o.steps - 1);
    tflw::PosteriorFile step;
    step.dist = tflw::interpolate(pa.dist, pb.dist, t);
    // Provenance of intermediates is interpolated alongside the parameters.
    step.lambda = (1.0 - t) * pa.lambda + t * pb.lambda;
    step.m = static_cast<int>(std::lround((1.0 - t) * pa.m + t * pb.m));
    step.checkpoint_hash = pa.checkpoint_hash;

    char idx[16];
    std::snprintf(idx, sizeof idx, "%03d", i);
    const std::string path = o.out_prefix + "_" + idx + ".json";
    tflw::save_posterior(step, path);
    std::printf("t=%.4f -> %s\n", t, path.c_str());
    if (model) {
      const Eigen::MatrixXd samples = tflw::conditioned_sample(*model, step.dist, o.n, o.seed);
      const std::string grid_path = o.out_prefix + "_" + idx + ".pgm";
      tflw::save_pgm_grid(samples, o.grid_rows, o.grid_cols, grid_path);
      std::printf("        -> %s\n", grid_path.c_str());
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// classify

struct ClassifyOpts {
  std::string checkpoint;
  DataOpts support, test;
  bool support_seed_set = false, test_seed_set = false;
  int m = 0;  // per-class support subsample; 0 = use all
  double lambda = 0.0;
  double lambda_frac = 0.5;
  int k = 1;
  std::vector<std::string> methods = {"predictive", "knn_pixel", "knn_latent"};
  std::string out;
  std::uint64_t seed = 0;
};

int run_classify(ClassifyOpts& o) {
  if (!o.support_seed_set) o.support.seed = o.seed;
  if (!o.test_seed_set) o.test.seed = o.seed + 1;  // keep synthetic test distinct
  o.support.csv_labeled = true;
  o.test.csv_labeled = true;

  const tflw::FlowModel model = tflw::load_checkpoint(o.checkpoint);
  tflw::Dataset support = resolve_dataset(o.support, "classify support");
  tflw::Dataset test = resolve_dataset(o.test, "classify test");
  support.validate();
  test.validate();
  if (!support.has_labels() || !test.has_labels()) {
    throw tflw::DataError("classify requires labeled support and test sets");
  }
  if (o.m > 0) support = tflw::stratified_subsample(support, o.m, o.seed);

  const tflw::LambdaPolicy policy = o.lambda > 0.0
                                        ? tflw::LambdaPolicy::absolute(o.lambda)
                                        : tflw::LambdaPolicy::fraction_of_m(o.lambda_frac);

  nlohmann::json out;
  out["format"] = "tflw-report";
  out["version"] = 1;
  out["seed"] = o.seed;
  out["m"] = o.m;
  out["k"] = o.k;
  out["lambda_policy"] = policy.describe();
  out["checkpoint_hash"] = tflw::hash_hex(tflw::model_hash(model));
  out["n_support"] = support.n();
  out["n_test"] = test.n();
  nlohmann::json methods = nlohmann::json::array();

  for (const std::string& method : o.methods) {
    tflw::EvalReport rep;
    if (method == "predictive") {
      tflw::ClassifierBank bank = tflw::fit(model, support, policy);
      bank.model_hash = tflw::model_hash(model);
      rep = tflw::evaluate(bank, model, test);
    } else if (method == "knn_pixel") {
      rep = tflw::evaluate_knn(tflw::KnnSpace::Pixel, model, support, test, o.k);
    } else if (method == "knn_latent") {
      rep = tflw::evaluate_knn(tflw::KnnSpace::Latent, model, support, test, o.k);
    } else {
      throw std::invalid_argument("unknown method '" + method +
                                  "' (expected predictive, knn_pixel or knn_latent)");
    }
    rep.seed = o.seed;
    methods.push_back(tflw::report_json(rep));
    std::printf("%-11s accuracy: %.4f\n", rep.method.c_str(), rep.accuracy);
  }
  out["methods"] = methods;
  if (!o.out.empty()) {
    std::ofstream f(o.out);
    if (!f) throw tflw::DataError("cannot write report: " + o.out);
    f << out.dump(2) << "\n";
    std::printf("report: %s\n", o.out.c_str());
  }
  return 0;
}

// ---------------------------------------------------------------------------
// inspect

int run_inspect(const std::string& path) {
  const std::string bytes = tflw::detail::read_file_bytes(path, "inspect");
  if (bytes.size() >= 4 && bytes.compare(0, 4, "TFLW") == 0) {
    const tflw::FlowModel model = tflw::checkpoint_from_bytes(bytes, path);
    std::printf("type: checkpoint\n");
    std::printf("d: %d\n", model.d);
    std::printf("blocks: %zu\n", model.blocks.size());
    if (!model.blocks.empty()) {
      std::printf("hidden: %lld\n",
                  static_cast<long long>(model.blocks.front().conditioner.w1.rows()));
    }
    std::printf("preprocess: %s\n", model.preprocess.describe().c_str());
    std::printf("normalization_initialized: %s\n", model.norm_initialized ? "yes" : "no");
    std::printf("parameters: %lld\n", static_cast<long long>(model.param_count()));
    std::printf("hash: %s\n", tflw::hash_hex(tflw::fnv1a64(bytes)).c_str());
    return 0;
  }
  const nlohmann::json j = tflw::parse_json_bytes(bytes, path);
  const std::string format = j.value("format", "");
  if (format == tflw::kPosteriorFormat) {
    const tflw::PosteriorFile pf = tflw::load_posterior(path);
    std::printf("type: posterior\n");
    std::printf("d: %d\n", pf.dist.dim());
    std::printf("cov: %s\n", tflw::cov_kind_name(pf.dist.cov.kind));
    std::printf("m: %d\n", pf.m);
    std::printf("lambda: %.6g\n", pf.lambda);
    std::printf("|mean|: %.6g\n", pf.dist.mean.norm());
    std::printf("kl_to_prior: %.6g\n", tflw::kl_to_prior(pf.dist));
    std::printf("checkpoint_hash: %s\n", tflw::hash_hex(pf.checkpoint_hash).c_str());
    return 0;
  }
  if (format == tflw::kBankFormat) {
    const tflw::ClassifierBank bank = tflw::load_bank(path);
    std::printf("type: classifier bank\n");
    std::printf("d: %d\n", bank.dim());
    std::printf("classes: %zu\n", bank.classes.size());
    std::printf("lambda_policy: %s\n", bank.policy.describe().c_str());
    for (const tflw::ClassEntry& e : bank.classes) {
      std::printf("  label %d: m=%d lambda=%.6g cov=%s\n", e.label, e.count, e.lambda,
                  tflw::cov_kind_name(e.predictive.cov.kind));
    }
    std::printf("checkpoint_hash: %s\n", tflw::hash_hex(bank.model_hash).c_str());
    return 0;
  }
  throw tflw::DataError(path + ": unrecognized file (expected checkpoint, posterior or bank)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"invertible-flow toolbox: train, condition, sample, classify"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;

  TrainOpts train_opts;
  ConditionOpts cond_opts;
  SampleOpts sample_opts;
  InterpolateOpts interp_opts;
  ClassifyOpts classify_opts;
  std::string inspect_path, grid_spec, interp_grid_spec;
  std::string optimizer = "adam";
  int chosen = -1;

  try {
    seed = env_seed_default();
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
  app.add_option("--seed", seed, "global RNG seed (overrides TFLW_SEED)");

  CLI::App* t = app.add_subcommand("train", "fit a flow by maximum likelihood");
  add_data_flags(t, train_opts.data, "data", "training data: file path or synthetic:NAME");
  t->add_option("--out", train_opts.out, "checkpoint output path")->required();
  t->add_option("--nll-log", train_opts.nll_log, "per-epoch NLL CSV (default: <out>.nll.csv)");
  t->add_option("--preprocess", train_opts.preprocess, "auto | none | standardize | logit");
  t->add_option("--blocks", train_opts.blocks, "coupling blocks")->check(CLI::PositiveNumber);
  t->add_option("--hidden", train_opts.hidden, "conditioner width (0 = auto)");
  t->add_option("--epochs", train_opts.cfg.epochs, "training epochs");
  t->add_option("--batch", train_opts.cfg.batch_size, "batch size");
  t->add_option("--lr", train_opts.cfg.learning_rate, "learning rate");
  t->add_option("--grad-clip", train_opts.cfg.grad_clip, "global gradient-norm clip (0 = off)");
  t->add_option("--dequant", train_opts.dequant, "dequantization noise amplitude (-1 = auto)");
  t->add_option("--optimizer", optimizer, "adam | sgd");
  t->callback([&]() { chosen = 0; });

  CLI::App* c = app.add_subcommand("condition", "build a latent posterior from evidence");
  c->add_option("--checkpoint", cond_opts.checkpoint, "trained checkpoint")->required();
  add_data_flags(c, cond_opts.evidence, "evidence", "evidence data: file path or synthetic:NAME");
  c->add_option("--lambda", cond_opts.lambda, "absolute likelihood variance");
  c->add_option("--lambda-frac", cond_opts.lambda_frac,
                "likelihood variance as a fraction of m (default 0.5)");
  c->add_option("--diag-var", cond_opts.diag_var,
                "CSV with one row of per-dimension variances (general-form update)");
  c->add_option("--out", cond_opts.out, "posterior output path")->required();
  c->callback([&]() { chosen = 1; });

  CLI::App* s = app.add_subcommand("sample", "draw samples from a flow or a posterior");
  s->add_option("--checkpoint", sample_opts.checkpoint, "trained checkpoint")->required();
  s->add_option("--posterior", sample_opts.posterior, "posterior file (omit: prior sampling)");
  s->add_option("--n", sample_opts.n, "sample count")->check(CLI::PositiveNumber);
  s->add_option("--grid", grid_spec, "ROWSxCOLS grid for .pgm output");
  s->add_option("--out", sample_opts.out, "output path (.csv or .pgm)")->required();
  s->callback([&]() { chosen = 2; });

  CLI::App* i = app.add_subcommand("interpolate", "walk between two posteriors");
  i->add_option("--a", interp_opts.a, "posterior A")->required();
  i->add_option("--b", interp_opts.b, "posterior B")->required();
  i->add_option("--steps", interp_opts.steps, "number of steps including endpoints");
  i->add_option("--out-prefix", interp_opts.out_prefix, "output prefix")->required();
  i->add_option("--checkpoint", interp_opts.checkpoint, "checkpoint for per-step sample grids");
  i->add_option("--n", interp_opts.n, "samples per step grid");
  i->add_option("--grid", interp_grid_spec, "ROWSxCOLS grid for per-step .pgm output");
  i->callback([&]() { chosen = 3; });

  CLI::App* k = app.add_subcommand("classify", "few-shot classification and k-NN baselines");
  k->add_option("--checkpoint", classify_opts.checkpoint, "trained checkpoint")->required();
  add_data_flags(k, classify_opts.support, "support", "labeled support set");
  add_data_flags(k, classify_opts.test, "test", "labeled test set");
  k->add_option("--m", classify_opts.m, "per-class support subsample (0 = all)");
  k->add_option("--lambda", classify_opts.lambda, "absolute likelihood variance");
  k->add_option("--lambda-frac", classify_opts.lambda_frac,
                "likelihood variance as a fraction of each class's m (default 0.5)");
  k->add_option("--k", classify_opts.k, "k for the k-NN baselines")->check(CLI::PositiveNumber);
  k->add_option("--methods", classify_opts.methods,
                "subset of: predictive knn_pixel knn_latent");
  k->add_option("--out", classify_opts.out, "report JSON path");
  k->callback([&]() { chosen = 4; });

  CLI::App* n = app.add_subcommand("inspect", "print checkpoint / posterior / bank metadata");
  n->add_option("path", inspect_path, "file to inspect")->required();
  n->callback([&]() { chosen = 5; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    app.exit(e);
    return 2;
  }

  try {
    // Flags that need post-parse wiring: per-dataset seeds default to the
    // global seed, grid specs parse into rows/cols.
    train_opts.seed = seed;
    train_opts.data_seed_set = t->count("--data-seed") > 0;
    cond_opts.seed = seed;
    cond_opts.evidence_seed_set = c->count("--evidence-seed") > 0;
    sample_opts.seed = seed;
    interp_opts.seed = seed;
    classify_opts.seed = seed;
    classify_opts.support_seed_set = k->count("--support-seed") > 0;
    classify_opts.test_seed_set = k->count("--test-seed") > 0;
    if (!grid_spec.empty()) parse_grid(grid_spec, sample_opts.grid_rows, sample_opts.grid_cols);
    if (!interp_grid_spec.empty()) {
      parse_grid(interp_grid_spec, interp_opts.grid_rows, interp_opts.grid_cols);
    }
    if (optimizer == "adam") {
      train_opts.cfg.optimizer = tflw::OptimizerKind::Adam;
    } else if (optimizer == "sgd") {
      train_opts.cfg.optimizer = tflw::OptimizerKind::Sgd;
    } else {
      throw std::invalid_argument("unknown optimizer '" + optimizer + "'");
    }

    switch (chosen) {
      case 0: return run_train(train_opts);
      case 1: return run_condition(cond_opts);
      case 2: return run_sample(sample_opts);
      case 3: return run_interpolate(interp_opts);
      case 4: return run_classify(classify_opts);
      case 5: return run_inspect(inspect_path);
      default: return 2;
    }
  } catch (const tflw::DataError& e) {
    std::cerr << e.what() << "\n";
    return 3;
  } catch (const tflw::NumericError& e) {
    std::cerr << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
}
