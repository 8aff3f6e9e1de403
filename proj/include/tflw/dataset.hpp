#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <zlib.h>

#include "tflw/errors.hpp"
#include "tflw/rng.hpp"

namespace tflw {

// Ordered collection of fixed-dimension real vectors, one per row, with
// optional integer labels.
struct Dataset {
  Eigen::MatrixXd points;   // n x d
  std::vector<int> labels;  // empty or length n
  std::string provenance;

  int n() const { return static_cast<int>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }
  bool has_labels() const { return !labels.empty(); }

  void validate() const {
    if (points.rows() < 1) throw DataError("dataset is empty");
    if (!labels.empty() && static_cast<int>(labels.size()) != n()) {
      throw DataError("label count " + std::to_string(labels.size()) +
                      " does not match point count " + std::to_string(n()));
    }
    if (!points.allFinite()) throw DataError("dataset contains non-finite values");
  }

  std::map<int, std::vector<int>> rows_by_label() const {
    std::map<int, std::vector<int>> groups;
    for (int i = 0; i < n(); ++i) groups[labels[i]].push_back(i);
    return groups;
  }
};

// ---------------------------------------------------------------------------
// CSV: one point per line, comma-separated decimals with '.' separator, no
// quoting; optional trailing integer label.

inline Dataset load_csv(const std::string& path, bool has_labels) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV file: " + path);

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::vector<double> fields;
    const char* p = line.c_str();
    while (true) {
      char* end = nullptr;
      const double v = std::strtod(p, &end);
      if (end == p) {
        throw DataError(path + ": parse failure at line " + std::to_string(lineno));
      }
      fields.push_back(v);
      p = end;
      while (*p == ' ') ++p;
      if (*p == '\0') break;
      if (*p != ',') {
        throw DataError(path + ": parse failure at line " + std::to_string(lineno));
      }
      ++p;
    }
    if (has_labels) {
      if (fields.size() < 2) {
        throw DataError(path + ": line " + std::to_string(lineno) +
                        " has no feature columns before the label");
      }
      const double lab = fields.back();
      if (lab != std::floor(lab)) {
        throw DataError(path + ": non-integer label at line " + std::to_string(lineno));
      }
      labels.push_back(static_cast<int>(lab));
      fields.pop_back();
    }
    if (!rows.empty() && fields.size() != rows.front().size()) {
      throw DataError(path + ": ragged row at line " + std::to_string(lineno));
    }
    rows.push_back(std::move(fields));
  }
  if (rows.empty()) throw DataError(path + ": no data rows");

  Dataset ds;
  ds.points.resize(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
  for (int i = 0; i < ds.n(); ++i) {
    for (int j = 0; j < ds.dim(); ++j) ds.points(i, j) = rows[i][j];
  }
  ds.labels = std::move(labels);
  ds.provenance = "csv:" + path;
  return ds;
}

inline void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write CSV file: " + path);
  char buf[64];
  for (int i = 0; i < ds.n(); ++i) {
    for (int j = 0; j < ds.dim(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", ds.points(i, j));
      out << (j ? "," : "") << buf;
    }
    if (ds.has_labels()) out << ',' << ds.labels[i];
    out << '\n';
  }
  if (!out) throw DataError("write failure: " + path);
}

inline void save_csv(const Eigen::MatrixXd& points, const std::string& path) {
  Dataset ds;
  ds.points = points;
  save_csv(ds, path);
}

// ---------------------------------------------------------------------------
// IDX (big-endian): magic 0x00000803 for u8 image tensors [n, rows, cols],
// 0x00000801 for u8 label vectors. Gzipped files are handled transparently.

namespace detail {

class GzReader {
 public:
  explicit GzReader(const std::string& path) : path_(path), f_(gzopen(path.c_str(), "rb")) {
    if (!f_) throw DataError("cannot open file: " + path);
  }
  ~GzReader() {
    if (f_) gzclose(f_);
  }
  GzReader(const GzReader&) = delete;
  GzReader& operator=(const GzReader&) = delete;

  void read(void* dst, std::size_t len) {
    const int got = gzread(f_, dst, static_cast<unsigned>(len));
    if (got < 0 || static_cast<std::size_t>(got) != len) {
      throw DataError(path_ + ": truncated payload (wanted " + std::to_string(len) +
                      " bytes at offset " + std::to_string(offset_) + ")");
    }
    offset_ += len;
  }

  std::uint32_t read_be_u32() {
    unsigned char b[4];
    read(b, 4);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
  }

 private:
  std::string path_;
  gzFile f_;
  std::size_t offset_ = 0;
};

}  // namespace detail

inline Dataset load_idx(const std::string& images_path, const std::string& labels_path = "") {
  detail::GzReader img(images_path);
  const std::uint32_t magic = img.read_be_u32();
  if (magic != 0x00000803u) {
    char hex[16];
    std::snprintf(hex, sizeof(hex), "0x%08x", magic);
    throw DataError(images_path + ": bad IDX image magic " + hex +
                    " (expected 0x00000803)");
  }
  const std::uint32_t n = img.read_be_u32();
  const std::uint32_t rows = img.read_be_u32();
  const std::uint32_t cols = img.read_be_u32();
  if (n == 0 || rows == 0 || cols == 0) {
    throw DataError(images_path + ": empty IDX image file");
  }
  const std::size_t d = std::size_t(rows) * cols;

  Dataset ds;
  ds.points.resize(static_cast<int>(n), static_cast<int>(d));
  std::vector<unsigned char> buf(d);
  for (std::uint32_t i = 0; i < n; ++i) {
    img.read(buf.data(), d);
    for (std::size_t j = 0; j < d; ++j) ds.points(i, static_cast<int>(j)) = buf[j];
  }

  if (!labels_path.empty()) {
    detail::GzReader lab(labels_path);
    const std::uint32_t lmagic = lab.read_be_u32();
    if (lmagic != 0x00000801u) {
      char hex[16];
      std::snprintf(hex, sizeof(hex), "0x%08x", lmagic);
      throw DataError(labels_path + ": bad IDX label magic " + hex +
                      " (expected 0x00000801)");
    }
    const std::uint32_t ln = lab.read_be_u32();
    if (ln != n) {
      throw DataError("IDX count mismatch: " + std::to_string(n) + " images vs " +
                      std::to_string(ln) + " labels");
    }
    std::vector<unsigned char> lbuf(ln);
    lab.read(lbuf.data(), ln);
    ds.labels.assign(lbuf.begin(), lbuf.end());
  }
  ds.provenance = "idx:" + images_path;
  return ds;
}

// ---------------------------------------------------------------------------
// Synthetic generators. All are deterministic functions of their seed.

inline Dataset make_two_moons(int n, double noise, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("make_two_moons: n must be >= 2");
  const int n_out = n - n / 2;
  const int n_in = n / 2;

  Dataset ds;
  ds.points.resize(n, 2);
  ds.labels.resize(n);
  Rng rng(seed);
  for (int i = 0; i < n_out; ++i) {
    const double t = std::numbers::pi * i / std::max(1, n_out - 1);
    ds.points(i, 0) = std::cos(t);
    ds.points(i, 1) = std::sin(t);
    ds.labels[i] = 0;
  }
  for (int i = 0; i < n_in; ++i) {
    const double t = std::numbers::pi * i / std::max(1, n_in - 1);
    ds.points(n_out + i, 0) = 1.0 - std::cos(t);
    ds.points(n_out + i, 1) = 0.5 - std::sin(t);
    ds.labels[n_out + i] = 1;
  }
  if (noise > 0.0) {
    for (int i = 0; i < n; ++i) {
      ds.points(i, 0) += noise * rng.normal();
      ds.points(i, 1) += noise * rng.normal();
    }
  }
  ds.provenance = "two-moons:n=" + std::to_string(n);
  return ds;
}

// Gaussian clusters around the given centers (one row per center); points are
// labeled by center index and split across centers as evenly as possible.
inline Dataset make_blobs(int n, const Eigen::MatrixXd& centers, double sigma,
                          std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("make_blobs: n must be >= 2");
  const int c = static_cast<int>(centers.rows());
  if (c < 1) throw std::invalid_argument("make_blobs: need at least one center");
  if (sigma < 0.0) throw std::invalid_argument("make_blobs: sigma must be >= 0");

  Dataset ds;
  ds.points.resize(n, centers.cols());
  ds.labels.resize(n);
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    const int k = i % c;
    for (int j = 0; j < centers.cols(); ++j) {
      ds.points(i, j) = centers(k, j) + sigma * rng.normal();
    }
    ds.labels[i] = k;
  }
  ds.provenance = "blobs:n=" + std::to_string(n);
  return ds;
}

// Grayscale side x side images, each containing two soft Gaussian bumps at
// random positions. Pixel range [0, 255]. A stand-in image corpus from a
// non-digit domain.
inline Dataset make_blob_images(int n, int side, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("make_blob_images: n must be >= 2");
  if (side < 4) throw std::invalid_argument("make_blob_images: side must be >= 4");

  Dataset ds;
  ds.points.resize(n, side * side);
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd img = Eigen::MatrixXd::Zero(side, side);
    for (int b = 0; b < 2; ++b) {
      const double cy = rng.uniform(1.0, side - 2.0);
      const double cx = rng.uniform(1.0, side - 2.0);
      const double amp = rng.uniform(120.0, 255.0);
      const double s = rng.uniform(0.6, 1.3);
      for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
          const double r2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
          img(y, x) += amp * std::exp(-r2 / (2.0 * s * s));
        }
      }
    }
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        const double v = img(y, x) + 8.0 * rng.normal();
        ds.points(i, y * side + x) = std::clamp(v, 0.0, 255.0);
      }
    }
  }
  ds.provenance = "blob-images:n=" + std::to_string(n);
  return ds;
}

namespace detail {

// 8x8 glyphs for digits 0..9; '#' marks lit pixels.
inline const char* const kDigitGlyphs[10][8] = {
    {".####...", "#....#..", "#....#..", "#....#..", "#....#..", "#....#..",
     ".####...", "........"},
    {"...#....", "..##....", "...#....", "...#....", "...#....", "...#....",
     "..###...", "........"},
    {".####...", "#....#..", ".....#..", "....#...", "..##....", ".#......",
     "######..", "........"},
    {".####...", "#....#..", "....#...", "..##....", "....#...", "#....#..",
     ".####...", "........"},
    {"...##...", "..#.#...", ".#..#...", "#...#...", "######..", "....#...",
     "....#...", "........"},
    {"######..", "#.......", "#####...", ".....#..", ".....#..", "#....#..",
     ".####...", "........"},
    {".####...", "#.......", "#.......", "#####...", "#....#..", "#....#..",
     ".####...", "........"},
    {"######..", ".....#..", "....#...", "...#....", "..#.....", "..#.....",
     "..#.....", "........"},
    {".####...", "#....#..", "#....#..", ".####...", "#....#..", "#....#..",
     ".####...", "........"},
    {".####...", "#....#..", "#....#..", ".#####..", ".....#..", "#....#..",
     ".####...", "........"}};

}  // namespace detail

// 8x8 digit images (10 classes), the desk-scale digit corpus: glyph templates
// with per-image intensity scaling, +-1 pixel shifts and additive pixel noise.
inline Dataset make_digit_images(int per_class, std::uint64_t seed,
                                 double noise_sigma = 20.0) {
  if (per_class < 1) throw std::invalid_argument("make_digit_images: per_class must be >= 1");
  constexpr int side = 8;

  Dataset ds;
  ds.points.resize(10 * per_class, side * side);
  ds.labels.resize(10 * per_class);
  Rng rng(seed);
  int row = 0;
  for (int digit = 0; digit < 10; ++digit) {
    for (int i = 0; i < per_class; ++i, ++row) {
      const double amp = rng.uniform(0.45, 1.0) * 255.0;
      const int dy = static_cast<int>(rng.below(3)) - 1;
      const int dx = static_cast<int>(rng.below(3)) - 1;
      for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
          const int sy = y - dy, sx = x - dx;
          double v = 0.0;
          if (sy >= 0 && sy < side && sx >= 0 && sx < side &&
              detail::kDigitGlyphs[digit][sy][sx] == '#') {
            v = amp;
          }
          v += noise_sigma * rng.normal();
          ds.points(row, y * side + x) = std::clamp(v, 0.0, 255.0);
        }
      }
      ds.labels[row] = digit;
    }
  }
  ds.provenance = "digit-images:per_class=" + std::to_string(per_class);
  return ds;
}

// Class-stratified subsample of `per_class` examples per label, seeded.
inline Dataset stratified_subsample(const Dataset& ds, int per_class, std::uint64_t seed) {
  if (!ds.has_labels()) throw DataError("stratified subsample requires labels");
  if (per_class < 1) throw std::invalid_argument("per_class must be >= 1");

  Rng rng(seed);
  std::vector<int> keep;
  for (auto& [label, rows] : ds.rows_by_label()) {
    if (static_cast<int>(rows.size()) < per_class) {
      throw DataError("class " + std::to_string(label) + " has only " +
                      std::to_string(rows.size()) + " examples, need " +
                      std::to_string(per_class));
    }
    std::vector<int> shuffled = rows;
    rng.shuffle(shuffled);
    keep.insert(keep.end(), shuffled.begin(), shuffled.begin() + per_class);
  }
  std::sort(keep.begin(), keep.end());

  Dataset out;
  out.points.resize(static_cast<int>(keep.size()), ds.dim());
  out.labels.resize(keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    out.points.row(static_cast<int>(i)) = ds.points.row(keep[i]);
    out.labels[i] = ds.labels[keep[i]];
  }
  out.provenance = ds.provenance + ":subsample=" + std::to_string(per_class);
  return out;
}

// ---------------------------------------------------------------------------
// PGM (P5) grid writer for visual inspection of image samples. Each sample
// row must be a side*side image; values are clamped to [0, 255].

inline void save_pgm_grid(const Eigen::MatrixXd& samples, int grid_rows, int grid_cols,
                          const std::string& path) {
  const int n = static_cast<int>(samples.rows());
  if (grid_rows < 1 || grid_cols < 1 || grid_rows * grid_cols != n) {
    throw std::invalid_argument("grid " + std::to_string(grid_rows) + "x" +
                                std::to_string(grid_cols) + " does not hold " +
                                std::to_string(n) + " samples");
  }
  const int d = static_cast<int>(samples.cols());
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(d))));
  if (side * side != d) {
    throw std::invalid_argument("samples of dimension " + std::to_string(d) +
                                " are not square images");
  }

  const int width = grid_cols * side;
  const int height = grid_rows * side;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write PGM file: " + path);
  out << "P5\n" << width << " " << height << "\n255\n";
  std::vector<unsigned char> scanline(width);
  for (int gy = 0; gy < grid_rows; ++gy) {
    for (int py = 0; py < side; ++py) {
      for (int gx = 0; gx < grid_cols; ++gx) {
        const int sample = gy * grid_cols + gx;
        for (int px = 0; px < side; ++px) {
          const double v = samples(sample, py * side + px);
          const double c = std::clamp(v, 0.0, 255.0);
          scanline[gx * side + px] = static_cast<unsigned char>(std::lround(c));
        }
      }
      out.write(reinterpret_cast<const char*>(scanline.data()), width);
    }
  }
  if (!out) throw DataError("write failure: " + path);
}

}  // namespace tflw
