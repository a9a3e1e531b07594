#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "sfuse/netspec.hpp"
#include "sfuse/tensor.hpp"

namespace sfuse {

inline constexpr std::size_t kNumClasses = 11;

/// Canonical class order; confusion-matrix indices follow it.
const std::array<std::string, kNumClasses>& script_names();
int class_index(std::string_view name);

struct ManifestEntry {
  std::string path;  // relative to the corpus root, '/'-separated
  int label = 0;

  auto operator<=>(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;
  std::vector<std::string> class_names;

  std::filesystem::path absolute(const ManifestEntry& e) const { return root / e.path; }
};

/// Builds a manifest from `<root>/<class_name>/*.{png,pgm,jpg,jpeg}`. Directory
/// names must be canonical class names; entries are sorted by path.
DatasetManifest discover_corpus(const std::filesystem::path& root);

/// Reads `relative_path,class_name` records (UTF-8, no header).
DatasetManifest read_manifest(const std::filesystem::path& manifest, const std::filesystem::path& root);

struct DatasetSplit {
  std::vector<ManifestEntry> train;
  std::vector<ManifestEntry> test;
  double ratio = 0.8;
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kMinSamplesPerClass = 5;

/// Stratified split: each class is sorted, shuffled with a seeded generator
/// and its first round(ratio * n) members go to train.
DatasetSplit split_dataset(const DatasetManifest& manifest, double train_fraction, std::uint64_t seed);

/// Split record file: `relative_path,class_name,train|test` per line.
void write_split(const DatasetSplit& split, const std::filesystem::path& path);
DatasetSplit read_split(const std::filesystem::path& path);

/// Index batches for one epoch: a seeded permutation of [0, count) cut into
/// consecutive runs of batch_size (the last may be shorter).
std::vector<std::vector<std::size_t>> batch_iter(std::size_t count, std::size_t batch_size, std::uint64_t seed,
                                                 std::uint64_t epoch);

struct Batch {
  Tensor images;  // [B,C,H,W] or [B,F]
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

/// Stacks the selected samples into one batch tensor.
Batch gather_batch(const std::vector<Tensor>& inputs, const std::vector<int>& labels,
                   const std::vector<std::size_t>& indices);

/// Network input for domain d and side x, as [1,x,x] with values in [0,1].
/// Spatial: direct resize. Frequency: resize to 128x128, wavelet
/// preprocessing, then resize to x.
Tensor prepare_input(const TensorD& image, Domain domain, std::size_t size);

}  // namespace sfuse
