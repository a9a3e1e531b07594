#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sfuse/pipeline.hpp"

namespace sfuse {

/// Settings shared by the CLI subcommands. Defaults follow the training
/// recipe: batch 50, Adam(1e-3, 0.9, 0.999), dropout 0.5.
struct RunConfig {
  std::filesystem::path corpus;
  std::optional<std::filesystem::path> manifest;
  std::filesystem::path out = "sfuse-out";
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  TrainConfig train;         // CNN training
  TrainConfig fusion;        // fusion MLP training
  std::string selector = "all";
  std::size_t jobs = 1;      // networks trained concurrently
};

/// Applies `key = value` settings (see README for keys); unknown keys are rejected.
void apply_settings(RunConfig& config, const std::map<std::string, std::string>& settings);

namespace layout {
std::filesystem::path split_file(const std::filesystem::path& out);
std::filesystem::path checkpoint(const std::filesystem::path& out, const NetworkSpec& spec);
std::filesystem::path history(const std::filesystem::path& out, const NetworkSpec& spec);
std::filesystem::path features(const std::filesystem::path& out, const NetworkSpec& spec);
std::filesystem::path fusion_checkpoint(const std::filesystem::path& out, const std::vector<NetworkSpec>& selector);
std::filesystem::path report(const std::filesystem::path& out);
}  // namespace layout

using Log = std::function<void(const std::string&)>;

DatasetManifest load_manifest(const RunConfig& config);

/// Splits the corpus and writes the split record file.
DatasetSplit run_split(const RunConfig& config);

/// Reads the split record file from the output directory, creating it when absent.
DatasetSplit ensure_split(const RunConfig& config);

/// Trains the given CNNs on the split's training images and writes each
/// checkpoint and history. Returns the final history entry per network.
std::map<NetworkSpec, EpochStats> run_train_cnns(const RunConfig& config, const DatasetSplit& split,
                                                 const std::vector<NetworkSpec>& specs, const Log& log = {});

/// Extracts features of every split sample (train records first) for each
/// network from its checkpoint and writes the feature stores.
void run_extract(const RunConfig& config, const DatasetSplit& split, const std::vector<NetworkSpec>& specs,
                 const Log& log = {});

/// Reads feature stores back into train/test feature sets.
std::pair<FeatureSet, FeatureSet> load_feature_sets(const RunConfig& config, const DatasetSplit& split,
                                                    const std::vector<NetworkSpec>& specs);

/// Trains and saves the fusion MLP for a selector.
Network<float> run_train_fusion(const RunConfig& config, const DatasetSplit& split,
                                const std::vector<NetworkSpec>& selector);

/// Evaluates each subset with a freshly trained fusion head and writes the report.
std::vector<SubsetResult> run_evaluate(const RunConfig& config, const DatasetSplit& split,
                                       const std::vector<std::vector<NetworkSpec>>& subsets, const Log& log = {});

}  // namespace sfuse
