#pragma once

// On-disk formats:
//   - Flow checkpoints: "TFLW" binary container, little-endian, bit-exact
//     round trip (layout below and in the README).
//   - Posterior / classifier-bank files: JSON with every double rendered as
//     a C99 hex-float string ("0x1.5bf0a8b145769p+1"), so text round trips
//     are value-exact without decimal-precision games.
//   - Evaluation reports: plain JSON for scripting.
//
// Checkpoint layout (all integers little-endian, all floats IEEE-754 f64):
//   bytes 0..3   magic "TFLW"
//   u32          format version (1)
//   u32          data dimension d
//   u32          block count
//   u8           preprocessing kind (0 identity, 1 affine, 2 logit-pixel)
//   u8           normalization-initialized flag
//   u16          reserved (0)
//   f64          logit alpha
//   f64          logit pixel range
//   tensor       preprocessing shift   (rank 1: [d] for affine, [0] otherwise)
//   tensor       preprocessing scale   (rank 1: [d] for affine, [0] otherwise)
//   per block:
//     tensor norm_log_scale [d], tensor norm_bias [d], tensor mask [d],
//     tensor w1 [h x p], tensor b1 [h], tensor w2 [h x h], tensor b2 [h],
//     tensor w3 [2t x h], tensor b3 [2t]
//   where a tensor is: u32 rank, rank x u32 dims, then row-major f64 payload.

#include <bit>
#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "tflw/classifier.hpp"
#include "tflw/errors.hpp"
#include "tflw/flow.hpp"
#include "tflw/gaussian.hpp"

namespace tflw {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[4] = {'T', 'F', 'L', 'W'};

// ---------------------------------------------------------------------------
// Low-level byte plumbing

namespace detail {

inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

// Cursor over an in-memory blob; every read is bounds-checked and failures
// report the byte offset.
struct ByteReader {
  std::string_view data;
  std::size_t pos = 0;
  std::string name;

  void need(std::size_t n) const {
    if (pos + n > data.size()) {
      throw DataError(name + ": truncated at byte " + std::to_string(pos) + " (wanted " +
                      std::to_string(n) + " more, " + std::to_string(data.size() - pos) +
                      " available)");
    }
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(data[pos++]);
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(static_cast<std::uint8_t>(data[pos + i])) << (8 * i);
    pos += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(data[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(data[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  void expect_end() const {
    if (pos != data.size()) {
      throw DataError(name + ": " + std::to_string(data.size() - pos) +
                      " trailing bytes after payload");
    }
  }
};

inline void put_tensor(std::string& out, const Eigen::MatrixXd& m) {
  put_u32(out, 2);
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) put_f64(out, m(i, j));
  }
}

inline void put_tensor(std::string& out, const Eigen::VectorXd& v) {
  put_u32(out, 1);
  put_u32(out, static_cast<std::uint32_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) put_f64(out, v[i]);
}

inline constexpr std::uint32_t kTensorDimMax = 1u << 24;  // size sanity bound

inline Eigen::MatrixXd get_matrix(ByteReader& r) {
  const std::uint32_t rank = r.u32();
  if (rank != 2) {
    throw DataError(r.name + ": expected rank-2 tensor at byte " + std::to_string(r.pos) +
                    ", found rank " + std::to_string(rank));
  }
  const std::uint32_t rows = r.u32(), cols = r.u32();
  if (rows > kTensorDimMax || cols > kTensorDimMax) {
    throw DataError(r.name + ": implausible tensor shape " + std::to_string(rows) + "x" +
                    std::to_string(cols));
  }
  Eigen::MatrixXd m(rows, cols);
  for (std::uint32_t i = 0; i < rows; ++i) {
    for (std::uint32_t j = 0; j < cols; ++j) m(i, j) = r.f64();
  }
  return m;
}

inline Eigen::VectorXd get_vector(ByteReader& r) {
  const std::uint32_t rank = r.u32();
  if (rank != 1) {
    throw DataError(r.name + ": expected rank-1 tensor at byte " + std::to_string(r.pos) +
                    ", found rank " + std::to_string(rank));
  }
  const std::uint32_t n = r.u32();
  if (n > kTensorDimMax) {
    throw DataError(r.name + ": implausible tensor length " + std::to_string(n));
  }
  Eigen::VectorXd v(n);
  for (std::uint32_t i = 0; i < n; ++i) v[i] = r.f64();
  return v;
}

inline std::string read_file_bytes(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(std::string(what) + ": cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw DataError(std::string(what) + ": read failure on " + path);
  return bytes;
}

inline void write_file_bytes(const std::string& path, std::string_view bytes, const char* what) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(std::string(what) + ": cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw DataError(std::string(what) + ": write failure on " + path);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Hashing

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::uint64_t parse_hash_hex(const std::string& s) {
  if (s.size() != 16 || s.find_first_not_of("0123456789abcdef") != std::string::npos) {
    throw DataError("bad hash string: '" + s + "'");
  }
  return std::strtoull(s.c_str(), nullptr, 16);
}

// ---------------------------------------------------------------------------
// Flow checkpoints

inline std::string checkpoint_bytes(const FlowModel& model) {
  std::string out;
  out.append(kCheckpointMagic, 4);
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(model.d));
  detail::put_u32(out, static_cast<std::uint32_t>(model.blocks.size()));
  out.push_back(static_cast<char>(model.preprocess.kind));
  out.push_back(static_cast<char>(model.norm_initialized ? 1 : 0));
  detail::put_u16(out, 0);
  detail::put_f64(out, model.preprocess.alpha);
  detail::put_f64(out, model.preprocess.pixel_range);
  detail::put_tensor(out, model.preprocess.shift);
  detail::put_tensor(out, model.preprocess.scale);
  for (const CouplingBlock& b : model.blocks) {
    detail::put_tensor(out, b.norm_log_scale);
    detail::put_tensor(out, b.norm_bias);
    Eigen::VectorXd mask(b.mask.size());
    for (std::size_t j = 0; j < b.mask.size(); ++j) mask[static_cast<Eigen::Index>(j)] = b.mask[j];
    detail::put_tensor(out, mask);
    detail::put_tensor(out, b.conditioner.w1);
    detail::put_tensor(out, b.conditioner.b1);
    detail::put_tensor(out, b.conditioner.w2);
    detail::put_tensor(out, b.conditioner.b2);
    detail::put_tensor(out, b.conditioner.w3);
    detail::put_tensor(out, b.conditioner.b3);
  }
  return out;
}

// FNV-1a over the serialized container; identifies a checkpoint in posterior
// and bank provenance fields.
inline std::uint64_t model_hash(const FlowModel& model) { return fnv1a64(checkpoint_bytes(model)); }

inline void save_checkpoint(const FlowModel& model, const std::string& path) {
  detail::write_file_bytes(path, checkpoint_bytes(model), "checkpoint");
}

inline FlowModel checkpoint_from_bytes(std::string_view bytes, const std::string& name) {
  detail::ByteReader r{bytes, 0, name};
  r.need(4);
  if (std::string_view(bytes.data(), 4) != std::string_view(kCheckpointMagic, 4)) {
    throw DataError(name + ": bad magic (not a TFLW checkpoint)");
  }
  r.pos = 4;
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw DataError(name + ": unsupported format version " + std::to_string(version));
  }
  const std::uint32_t d = r.u32();
  const std::uint32_t n_blocks = r.u32();
  if (d < 1) throw DataError(name + ": dimension must be >= 1");
  const std::uint8_t kind_raw = r.u8();
  if (kind_raw > 2) throw DataError(name + ": unknown preprocessing kind " + std::to_string(kind_raw));
  const std::uint8_t norm_init = r.u8();
  r.u16();  // reserved

  FlowModel model;
  model.d = static_cast<int>(d);
  model.norm_initialized = norm_init != 0;
  model.preprocess.kind = static_cast<TransformKind>(kind_raw);
  model.preprocess.alpha = r.f64();
  model.preprocess.pixel_range = r.f64();
  model.preprocess.shift = detail::get_vector(r);
  model.preprocess.scale = detail::get_vector(r);
  if (model.preprocess.kind == TransformKind::Affine &&
      (model.preprocess.shift.size() != model.d || model.preprocess.scale.size() != model.d)) {
    throw DataError(name + ": affine preprocessing tensors do not match dimension " +
                    std::to_string(model.d));
  }

  model.blocks.resize(n_blocks);
  for (std::uint32_t k = 0; k < n_blocks; ++k) {
    CouplingBlock& b = model.blocks[k];
    const std::string where = name + ": block " + std::to_string(k);
    b.norm_log_scale = detail::get_vector(r);
    b.norm_bias = detail::get_vector(r);
    const Eigen::VectorXd mask = detail::get_vector(r);
    b.conditioner.w1 = detail::get_matrix(r);
    b.conditioner.b1 = detail::get_vector(r);
    b.conditioner.w2 = detail::get_matrix(r);
    b.conditioner.b2 = detail::get_vector(r);
    b.conditioner.w3 = detail::get_matrix(r);
    b.conditioner.b3 = detail::get_vector(r);

    if (b.norm_log_scale.size() != model.d || b.norm_bias.size() != model.d ||
        mask.size() != model.d) {
      throw DataError(where + ": per-dimension tensors do not match dimension " +
                      std::to_string(model.d));
    }
    b.mask.resize(mask.size());
    for (Eigen::Index i = 0; i < mask.size(); ++i) {
      if (mask[i] != 0.0 && mask[i] != 1.0) {
        throw DataError(where + ": mask entries must be 0 or 1");
      }
      b.mask[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(mask[i]);
    }
    b.rebuild_index();
    const auto h = b.conditioner.w1.rows();
    const auto n_pass = static_cast<Eigen::Index>(b.pass_idx.size());
    const auto n_trans = static_cast<Eigen::Index>(b.trans_idx.size());
    const bool consistent = b.conditioner.w1.cols() == n_pass && b.conditioner.b1.size() == h &&
                            b.conditioner.w2.rows() == h && b.conditioner.w2.cols() == h &&
                            b.conditioner.b2.size() == h &&
                            b.conditioner.w3.rows() == 2 * n_trans &&
                            b.conditioner.w3.cols() == h &&
                            b.conditioner.b3.size() == 2 * n_trans;
    if (!consistent) throw DataError(where + ": inconsistent conditioner tensor shapes");
  }
  r.expect_end();
  return model;
}

inline FlowModel load_checkpoint(const std::string& path) {
  return checkpoint_from_bytes(detail::read_file_bytes(path, "checkpoint"), path);
}

// ---------------------------------------------------------------------------
// Hex-float JSON helpers

inline std::string hexfloat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

inline double parse_hexfloat(const std::string& s, const char* what) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || s.empty()) {
    throw DataError(std::string(what) + ": bad float literal '" + s + "'");
  }
  return v;
}

namespace detail {

using Json = nlohmann::json;

inline Json vec_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(hexfloat(v[i]));
  return a;
}

inline Eigen::VectorXd vec_from_json(const Json& a, const char* what) {
  if (!a.is_array()) throw DataError(std::string(what) + ": expected an array");
  Eigen::VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_string()) throw DataError(std::string(what) + ": expected float strings");
    v[static_cast<Eigen::Index>(i)] = parse_hexfloat(a[i].get<std::string>(), what);
  }
  return v;
}

inline Json mat_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    rows.push_back(vec_json(m.row(i).transpose()));
  }
  return rows;
}

inline Eigen::MatrixXd mat_from_json(const Json& a, const char* what) {
  if (!a.is_array() || a.empty()) throw DataError(std::string(what) + ": expected a row array");
  const Eigen::VectorXd first = vec_from_json(a[0], what);
  Eigen::MatrixXd m(a.size(), first.size());
  m.row(0) = first.transpose();
  for (std::size_t i = 1; i < a.size(); ++i) {
    const Eigen::VectorXd row = vec_from_json(a[i], what);
    if (row.size() != m.cols()) throw DataError(std::string(what) + ": ragged matrix rows");
    m.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return m;
}

// at() with DataError instead of nlohmann's exceptions, so CLI exit codes
// stay honest.
inline const Json& field(const Json& j, const char* key, const char* what) {
  const auto it = j.find(key);
  if (it == j.end()) throw DataError(std::string(what) + ": missing field '" + key + "'");
  return *it;
}

}  // namespace detail

inline nlohmann::json gaussian_json(const GaussianSpec& g) {
  using detail::Json;
  Json j;
  j["d"] = g.dim();
  j["mean"] = detail::vec_json(g.mean);
  Json cov;
  cov["kind"] = cov_kind_name(g.cov.kind);
  switch (g.cov.kind) {
    case CovKind::Isotropic: cov["variance"] = hexfloat(g.cov.iso); break;
    case CovKind::Diagonal: cov["variances"] = detail::vec_json(g.cov.diag); break;
    case CovKind::Dense: cov["matrix"] = detail::mat_json(g.cov.dense); break;
  }
  j["cov"] = cov;
  return j;
}

inline GaussianSpec gaussian_from_json(const nlohmann::json& j, const char* what) {
  GaussianSpec g;
  g.mean = detail::vec_from_json(detail::field(j, "mean", what), what);
  const auto& cov = detail::field(j, "cov", what);
  const std::string kind = detail::field(cov, "kind", what).get<std::string>();
  if (kind == "isotropic") {
    g.cov = Covariance::isotropic(
        parse_hexfloat(detail::field(cov, "variance", what).get<std::string>(), what));
  } else if (kind == "diagonal") {
    g.cov = Covariance::diagonal(detail::vec_from_json(detail::field(cov, "variances", what), what));
  } else if (kind == "dense") {
    g.cov = Covariance::dense_spd(detail::mat_from_json(detail::field(cov, "matrix", what), what));
  } else {
    throw DataError(std::string(what) + ": unknown covariance kind '" + kind + "'");
  }
  const auto d = detail::field(j, "d", what);
  if (!d.is_number_integer() || d.get<int>() != g.dim()) {
    throw DataError(std::string(what) + ": declared dimension does not match mean length");
  }
  g.validate(what);
  return g;
}

// ---------------------------------------------------------------------------
// Posterior files

// A conditioned latent distribution plus the provenance needed to reuse it:
// which checkpoint encoded the evidence, how much evidence, which lambda.
struct PosteriorFile {
  GaussianSpec dist;
  double lambda = 0.0;
  int m = 0;
  std::uint64_t checkpoint_hash = 0;
};

inline constexpr const char* kPosteriorFormat = "tflw-posterior";
inline constexpr const char* kBankFormat = "tflw-bank";

inline void save_posterior(const PosteriorFile& pf, const std::string& path) {
  using detail::Json;
  Json j;
  j["format"] = kPosteriorFormat;
  j["version"] = 1;
  j["gaussian"] = gaussian_json(pf.dist);
  j["lambda"] = hexfloat(pf.lambda);
  j["m"] = pf.m;
  j["checkpoint_hash"] = hash_hex(pf.checkpoint_hash);
  detail::write_file_bytes(path, j.dump(2) + "\n", "posterior");
}

inline nlohmann::json parse_json_bytes(const std::string& bytes, const std::string& name) {
  try {
    return nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(name + ": " + e.what());
  }
}

inline PosteriorFile load_posterior(const std::string& path) {
  const auto j = parse_json_bytes(detail::read_file_bytes(path, "posterior"), path);
  const char* what = "posterior";
  if (detail::field(j, "format", what).get<std::string>() != kPosteriorFormat) {
    throw DataError(path + ": not a posterior file");
  }
  if (detail::field(j, "version", what).get<int>() != 1) {
    throw DataError(path + ": unsupported posterior version");
  }
  PosteriorFile pf;
  pf.dist = gaussian_from_json(detail::field(j, "gaussian", what), what);
  pf.lambda = parse_hexfloat(detail::field(j, "lambda", what).get<std::string>(), what);
  pf.m = detail::field(j, "m", what).get<int>();
  pf.checkpoint_hash = parse_hash_hex(detail::field(j, "checkpoint_hash", what).get<std::string>());
  return pf;
}

// ---------------------------------------------------------------------------
// Classifier bank files

inline void save_bank(const ClassifierBank& bank, const std::string& path) {
  using detail::Json;
  bank.validate();
  Json j;
  j["format"] = kBankFormat;
  j["version"] = 1;
  j["d"] = bank.dim();
  j["checkpoint_hash"] = hash_hex(bank.model_hash);
  j["lambda_policy"] = {
      {"mode", bank.policy.mode == LambdaPolicy::Mode::Absolute ? "absolute" : "fraction_of_m"},
      {"value", hexfloat(bank.policy.value)},
  };
  Json classes = Json::array();
  for (const ClassEntry& e : bank.classes) {
    classes.push_back({
        {"label", e.label},
        {"m", e.count},
        {"lambda", hexfloat(e.lambda)},
        {"predictive", gaussian_json(e.predictive)},
    });
  }
  j["classes"] = classes;
  detail::write_file_bytes(path, j.dump(2) + "\n", "bank");
}

inline ClassifierBank load_bank(const std::string& path) {
  const auto j = parse_json_bytes(detail::read_file_bytes(path, "bank"), path);
  const char* what = "bank";
  if (detail::field(j, "format", what).get<std::string>() != kBankFormat) {
    throw DataError(path + ": not a classifier bank file");
  }
  if (detail::field(j, "version", what).get<int>() != 1) {
    throw DataError(path + ": unsupported bank version");
  }
  ClassifierBank bank;
  bank.model_hash = parse_hash_hex(detail::field(j, "checkpoint_hash", what).get<std::string>());
  const auto& pol = detail::field(j, "lambda_policy", what);
  const std::string mode = detail::field(pol, "mode", what).get<std::string>();
  if (mode == "absolute") {
    bank.policy.mode = LambdaPolicy::Mode::Absolute;
  } else if (mode == "fraction_of_m") {
    bank.policy.mode = LambdaPolicy::Mode::FractionOfM;
  } else {
    throw DataError(path + ": unknown lambda policy '" + mode + "'");
  }
  bank.policy.value = parse_hexfloat(detail::field(pol, "value", what).get<std::string>(), what);
  for (const auto& cj : detail::field(j, "classes", what)) {
    ClassEntry e;
    e.label = detail::field(cj, "label", what).get<int>();
    e.count = detail::field(cj, "m", what).get<int>();
    e.lambda = parse_hexfloat(detail::field(cj, "lambda", what).get<std::string>(), what);
    e.predictive = gaussian_from_json(detail::field(cj, "predictive", what), what);
    bank.classes.push_back(std::move(e));
  }
  bank.validate();
  const int d_declared = detail::field(j, "d", what).get<int>();
  if (d_declared != bank.dim()) {
    throw DataError(path + ": declared dimension does not match class predictives");
  }
  return bank;
}

// ---------------------------------------------------------------------------
// Evaluation reports (plain JSON; meant for scripts and eyeballs, not for
// exact numeric round trips)

inline nlohmann::json report_json(const EvalReport& rep) {
  using detail::Json;
  Json j;
  j["method"] = rep.method;
  j["labels"] = rep.labels;
  Json conf = Json::array();
  for (Eigen::Index i = 0; i < rep.confusion.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < rep.confusion.cols(); ++c) row.push_back(rep.confusion(i, c));
    conf.push_back(row);
  }
  j["confusion"] = conf;
  j["degenerate"] = rep.degenerate;
  j["foreign"] = rep.foreign;
  j["per_class_accuracy"] = rep.per_class_accuracy;
  j["accuracy"] = rep.accuracy;
  j["n_test"] = rep.n_test;
  if (rep.k > 0) j["k"] = rep.k;
  if (!rep.m_per_class.empty()) j["m_per_class"] = rep.m_per_class;
  if (rep.lambda > 0.0) j["lambda"] = rep.lambda;
  j["seed"] = rep.seed;
  return j;
}

}  // namespace tflw
