#include "psn/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

#include "psn/error.hpp"
#include "psn/rng.hpp"

namespace psn {
namespace {

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t offset, const std::filesystem::path& path) {
  if (offset + 4 > b.size()) {
    throw FormatError(path.string() + ": truncated header at offset " + std::to_string(offset));
  }
  return (std::uint32_t{b[offset]} << 24) | (std::uint32_t{b[offset + 1]} << 16) |
         (std::uint32_t{b[offset + 2]} << 8) | std::uint32_t{b[offset + 3]};
}

std::string hex32(std::uint32_t v) {
  std::ostringstream s;
  s << "0x" << std::hex << std::uppercase;
  s.width(8);
  s.fill('0');
  s << v;
  return s.str();
}

void expect_magic(std::uint32_t got, std::uint32_t want, const std::filesystem::path& path) {
  if (got != want) {
    throw FormatError(path.string() + ": bad IDX magic " + hex32(got) + " at offset 0 (expected " + hex32(want) +
                      ")");
  }
}

}  // namespace

void Dataset::validate() const {
  if (labels.empty()) throw ValidationError("dataset is empty");
  if (features.rows() != labels.size()) throw ValidationError("feature/label count mismatch");
  for (int y : labels) {
    if (y < 0 || y >= num_classes) {
      throw ValidationError("label " + std::to_string(y) + " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
  for (float v : features.storage()) {
    if (!std::isfinite(v)) throw ValidationError("dataset contains a non-finite feature");
  }
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels, int num_classes) {
  const auto img = read_bytes(images);
  const auto lab = read_bytes(labels);
  expect_magic(be32(img, 0, images), 0x00000803u, images);
  expect_magic(be32(lab, 0, labels), 0x00000801u, labels);

  const std::size_t n_images = be32(img, 4, images);
  const std::size_t rows = be32(img, 8, images);
  const std::size_t cols = be32(img, 12, images);
  const std::size_t n_labels = be32(lab, 4, labels);
  const std::size_t dim = rows * cols;
  constexpr std::size_t kImageHeader = 16;
  constexpr std::size_t kLabelHeader = 8;
  if (img.size() < kImageHeader + n_images * dim) {
    throw FormatError(images.string() + ": truncated file, expected " + std::to_string(kImageHeader + n_images * dim) +
                      " bytes, found " + std::to_string(img.size()));
  }
  if (lab.size() < kLabelHeader + n_labels) {
    throw FormatError(labels.string() + ": truncated file, expected " + std::to_string(kLabelHeader + n_labels) +
                      " bytes, found " + std::to_string(lab.size()));
  }
  if (n_images != n_labels) {
    throw FormatError("IDX count mismatch: " + std::to_string(n_images) + " images vs " + std::to_string(n_labels) +
                      " labels");
  }
  if (n_images == 0) throw FormatError(images.string() + ": no samples");

  Dataset ds;
  ds.features = Matrix<float>(n_images, dim);
  ds.labels.resize(n_images);
  const unsigned char* px = img.data() + kImageHeader;
  float* out = ds.features.data();
  for (std::size_t i = 0; i < n_images * dim; ++i) out[i] = static_cast<float>(px[i]) / 255.0f;
  int max_label = 0;
  for (std::size_t i = 0; i < n_labels; ++i) {
    ds.labels[i] = lab[kLabelHeader + i];
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.num_classes = num_classes > 0 ? num_classes : max_label + 1;
  ds.normalization.method = "scale_255";
  ds.validate();
  return ds;
}

TabularSchema TabularSchema::covertype() {
  TabularSchema s;
  s.label_column = 54;
  s.num_classes = 7;
  s.label_offset = 1;
  for (int c = 0; c < 10; ++c) s.continuous.push_back(c);
  s.train_count = 464809;
  s.split_seed = 0;
  return s;
}

DatasetPair load_csv_tabular(const std::filesystem::path& path, const TabularSchema& schema) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<std::vector<float>> rows;
  std::vector<int> labels;
  std::string line;
  std::size_t lineno = 0;
  std::size_t width = 0;
  int label_col = schema.label_column;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && schema.has_header) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (width == 0) {
      width = cells.size();
      if (label_col < 0) label_col = static_cast<int>(width) - 1;
      if (label_col >= static_cast<int>(width)) {
        throw FormatError(path.string() + ": label column " + std::to_string(label_col) + " missing (row has " +
                          std::to_string(width) + " columns)");
      }
    }
    if (cells.size() != width) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(width) +
                        " columns, found " + std::to_string(cells.size()));
    }
    std::vector<float> feats;
    feats.reserve(width - 1);
    for (std::size_t c = 0; c < width; ++c) {
      char* end = nullptr;
      const double v = std::strtod(cells[c].c_str(), &end);
      if (cells[c].empty() || end == nullptr || *end != '\0' || !std::isfinite(v)) {
        throw FormatError(path.string() + ":" + std::to_string(lineno) + ": non-numeric cell '" + cells[c] +
                          "' in column " + std::to_string(c));
      }
      if (static_cast<int>(c) == label_col) {
        labels.push_back(static_cast<int>(std::lround(v)) - schema.label_offset);
      } else {
        feats.push_back(static_cast<float>(v));
      }
    }
    rows.push_back(std::move(feats));
  }
  if (rows.empty()) throw FormatError(path.string() + ": no data rows");

  int classes = schema.num_classes;
  if (classes <= 0) classes = *std::max_element(labels.begin(), labels.end()) + 1;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes) {
      throw ValidationError(path.string() + ": label " + std::to_string(labels[i] + schema.label_offset) +
                            " outside the declared " + std::to_string(classes) + " classes");
    }
  }

  const std::size_t n = rows.size();
  const std::size_t dim = width - 1;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = make_rng(schema.split_seed, Stream::kSplit);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_below(rng, i)]);

  std::size_t n_train = schema.train_count > 0 ? std::min(schema.train_count, n)
                                               : static_cast<std::size_t>(std::llround(schema.train_fraction * n));
  n_train = std::clamp<std::size_t>(n_train, 1, n);

  DatasetPair out;
  auto fill = [&](Dataset& ds, std::size_t begin, std::size_t end, Split split) {
    ds.split = split;
    ds.num_classes = classes;
    ds.features = Matrix<float>(end - begin, dim);
    ds.labels.resize(end - begin);
    for (std::size_t r = begin; r < end; ++r) {
      std::copy(rows[order[r]].begin(), rows[order[r]].end(), ds.features.row(r - begin).begin());
      ds.labels[r - begin] = labels[order[r]];
    }
  };
  fill(out.train, 0, n_train, Split::kTrain);
  fill(out.test, n_train, n, Split::kTest);

  Normalization norm;
  norm.method = schema.continuous.empty() ? "none" : "zscore";
  norm.columns = schema.continuous;
  for (int c : schema.continuous) {
    if (c < 0 || static_cast<std::size_t>(c) >= dim) throw ValidationError("continuous column out of range");
    double sum = 0.0, sq = 0.0;
    for (std::size_t r = 0; r < out.train.size(); ++r) sum += out.train.features(r, c);
    const double mean = sum / out.train.size();
    for (std::size_t r = 0; r < out.train.size(); ++r) {
      const double d = out.train.features(r, c) - mean;
      sq += d * d;
    }
    double sd = std::sqrt(sq / out.train.size());
    if (!(sd > 0.0)) sd = 1.0;
    norm.mean.push_back(static_cast<float>(mean));
    norm.stddev.push_back(static_cast<float>(sd));
    for (Dataset* ds : {&out.train, &out.test}) {
      for (std::size_t r = 0; r < ds->size(); ++r) {
        ds->features(r, c) = static_cast<float>((ds->features(r, c) - mean) / sd);
      }
    }
  }
  out.train.normalization = norm;
  out.test.normalization = norm;
  return out;
}

Dataset synth_gaussians(int n_samples, int dim, int classes, std::uint64_t seed, double separation, Split split) {
  if (n_samples < 1 || dim < 1 || classes < 1) throw ValidationError("synthetic dataset sizes must be positive");
  if (classes > n_samples) throw ValidationError("synthetic dataset needs at least one sample per class");

  Matrix<double> means(static_cast<std::size_t>(classes), static_cast<std::size_t>(dim));
  const double radius = separation / std::sqrt(2.0);
  if (classes <= dim) {
    for (int c = 0; c < classes; ++c) means(c, c) = radius;
  } else {
    Rng mrng = make_rng(seed, Stream::kSynthetic, 0);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int c = 0; c < classes; ++c) {
      double norm = 0.0;
      for (int d = 0; d < dim; ++d) {
        means(c, d) = g(mrng);
        norm += means(c, d) * means(c, d);
      }
      norm = std::sqrt(norm);
      for (int d = 0; d < dim; ++d) means(c, d) *= radius / norm;
    }
  }

  Dataset ds;
  ds.split = split;
  ds.num_classes = classes;
  ds.normalization.method = "none";
  ds.features = Matrix<float>(static_cast<std::size_t>(n_samples), static_cast<std::size_t>(dim));
  ds.labels.resize(static_cast<std::size_t>(n_samples));
  Rng rng = make_rng(seed, Stream::kSynthetic, split == Split::kTrain ? 1 : 2);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int i = 0; i < n_samples; ++i) {
    const int c = i % classes;
    ds.labels[static_cast<std::size_t>(i)] = c;
    for (int d = 0; d < dim; ++d) ds.features(i, d) = static_cast<float>(means(c, d) + noise(rng));
  }
  return ds;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                   std::uint64_t epoch) {
  if (batch_size < 1) throw ValidationError("batch size must be >= 1");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = make_rng(seed, Stream::kShuffle, epoch);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_below(rng, i)]);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t b = 0; b < n; b += batch_size) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, b + batch_size)));
  }
  return out;
}

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("PSN_DATA_DIR"); env && *env) return env;
  return "data";
}

DatasetPair load_named_dataset(const std::string& id, const std::filesystem::path& data_dir, std::uint64_t seed) {
  const std::filesystem::path dir = data_dir.empty() ? default_data_dir() : data_dir;
  auto idx_pair = [&](const std::filesystem::path& sub, const std::string& train_prefix,
                      const std::string& test_prefix, int classes) {
    DatasetPair p;
    p.train = load_idx(sub / (train_prefix + "-images-idx3-ubyte"), sub / (train_prefix + "-labels-idx1-ubyte"),
                       classes);
    p.test = load_idx(sub / (test_prefix + "-images-idx3-ubyte"), sub / (test_prefix + "-labels-idx1-ubyte"),
                      classes);
    p.train.split = Split::kTrain;
    p.test.split = Split::kTest;
    return p;
  };
  if (id == "mnist") return idx_pair(dir / "mnist", "train", "t10k", 10);
  if (id == "fashion_mnist") return idx_pair(dir / "fashion_mnist", "train", "t10k", 10);
  if (id == "emnist_balanced") {
    return idx_pair(dir / "emnist_balanced", "emnist-balanced-train", "emnist-balanced-test", 47);
  }
  if (id == "covertype") return load_csv_tabular(dir / "covertype" / "covtype.data", TabularSchema::covertype());
  if (id.rfind("synthetic", 0) == 0) {
    // synthetic:<n>:<dim>:<classes>
    int n = 1000, dim = 20, classes = 4;
    if (id.size() > 9) {
      if (std::sscanf(id.c_str(), "synthetic:%d:%d:%d", &n, &dim, &classes) != 3) {
        throw ValidationError("synthetic dataset id must look like synthetic:<n>:<dim>:<classes>");
      }
    }
    DatasetPair p;
    p.train = synth_gaussians(n, dim, classes, seed, 10.0, Split::kTrain);
    p.test = synth_gaussians(std::max(classes, n / 4), dim, classes, seed, 10.0, Split::kTest);
    return p;
  }
  throw ValidationError("unknown dataset id '" + id + "'");
}

}  // namespace psn
