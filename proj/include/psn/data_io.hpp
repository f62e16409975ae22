#pragma once

// Dataset ingestion: IDX image files, comma-separated tabular data and a
// seeded Gaussian-blob generator. Everything is memory resident.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "psn/matrix.hpp"

namespace psn {

enum class Split { kTrain, kTest };

struct Normalization {
  std::string method;  // "scale_255", "zscore", "none"
  std::vector<int> columns;
  std::vector<float> mean;
  std::vector<float> stddev;
};

struct Dataset {
  Matrix<float> features;  // N x D, sample-major
  std::vector<int> labels;
  int num_classes = 0;
  Split split = Split::kTrain;
  Normalization normalization;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols(); }
  // Throws ValidationError if labels are out of range or features non-finite.
  void validate() const;
};

struct DatasetPair {
  Dataset train;
  Dataset test;
};

// Big-endian IDX: images magic 0x00000803, labels 0x00000801. Pixels are
// scaled to [0, 1]. num_classes is 1 + the largest label seen unless given.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 int num_classes = 0);

struct TabularSchema {
  int label_column = -1;       // -1: last column
  int num_classes = 0;         // 0: infer from data
  int label_offset = 0;        // subtracted from raw labels (Covertype labels are 1-based)
  std::vector<int> continuous;  // feature columns to z-score (after removing the label)
  bool has_header = false;
  double train_fraction = 0.8;
  std::size_t train_count = 0;  // overrides train_fraction when > 0
  std::uint64_t split_seed = 0;

  // Standard 55-column Covertype layout: 54 features, label last (1..7),
  // first 10 features continuous, 464809/116203 split.
  static TabularSchema covertype();
};

// Parses, permutes rows with split_seed, splits, and z-scores the continuous
// columns of both splits with train statistics.
DatasetPair load_csv_tabular(const std::filesystem::path& path, const TabularSchema& schema);

// Isotropic unit-variance blobs. Class means depend on `seed` only and sit on
// orthogonal axes (pairwise distance `separation`) when classes <= dim; the
// split selects an independent sample stream.
Dataset synth_gaussians(int n_samples, int dim, int classes, std::uint64_t seed, double separation = 10.0,
                        Split split = Split::kTrain);

// Seeded per-epoch shuffle; the last partial batch is kept.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                   std::uint64_t epoch);

// Resolves dataset ids ("mnist", "fashion_mnist", "emnist_balanced",
// "covertype", "synthetic:<n>:<dim>:<classes>") under a data directory.
// An empty dir falls back to $PSN_DATA_DIR.
DatasetPair load_named_dataset(const std::string& id, const std::filesystem::path& data_dir = {},
                               std::uint64_t seed = 0);

std::filesystem::path default_data_dir();

}  // namespace psn
