#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sfuse/adam.hpp"
#include "sfuse/dataset.hpp"
#include "sfuse/metrics.hpp"
#include "sfuse/network.hpp"

namespace sfuse {

struct TrainConfig {
  std::uint32_t epochs = 30;
  std::size_t batch_size = 50;
  AdamConfig optimizer;
  std::uint64_t seed = 0;
  double dropout_p = 0.5;
};

/// Per-epoch training record: mean batch loss and the fraction of training
/// samples classified correctly in their (dropout-active) batch.
struct EpochStats {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Prepared network inputs with their class labels.
struct LabeledSet {
  std::vector<Tensor> inputs;
  std::vector<int> labels;

  std::size_t size() const { return inputs.size(); }
};

using EpochCallback = std::function<void(std::uint32_t epoch, const EpochStats&)>;

/// Mini-batch training with softmax cross-entropy and Adam. Batches follow
/// batch_iter(seed, epoch); dropout draws from a stream derived from the seed.
std::vector<EpochStats> train_network(Network<float>& net, const LabeledSet& set, const TrainConfig& config,
                                      const EpochCallback& on_epoch = {});

/// train_network for a CNN, after checking the inputs match its spec.
std::vector<EpochStats> train_cnn(Network<float>& net, const LabeledSet& set, const TrainConfig& config,
                                  const EpochCallback& on_epoch = {});

/// Eval-mode class probabilities, one row of kNumClasses per input.
std::vector<std::vector<float>> predict_proba(const Network<float>& net, const std::vector<Tensor>& inputs,
                                              std::size_t batch_size = 50);
std::vector<int> predict(const Network<float>& net, const std::vector<Tensor>& inputs, std::size_t batch_size = 50);

struct FeatureVector {
  std::vector<float> values;
  std::vector<NetworkSpec> sources;
};

/// Eval-mode activations of the 1024-unit layer for prepared inputs.
std::vector<std::vector<float>> extract_feature_rows(const Network<float>& net, const std::vector<Tensor>& inputs,
                                                     std::size_t batch_size = 50);

/// Prepares `image` for the network's (d,x) and returns its 1024 features.
FeatureVector extract_features(const Network<float>& net, const TensorD& image);

using NetworkSet = std::map<NetworkSpec, Network<float>>;

/// Concatenates the features of the selected networks in canonical order,
/// each network receiving its own prepared input.
FeatureVector fuse_features(const NetworkSet& networks, const std::vector<NetworkSpec>& selector,
                            const TensorD& image);

/// Per-network feature rows for one ordered sample list.
struct FeatureSet {
  std::vector<ManifestEntry> samples;
  std::map<NetworkSpec, std::vector<std::vector<float>>> rows;

  std::vector<int> labels() const;
};

/// Fused inputs ([F] tensors) for the selected networks, F = 1024 * |selector|.
LabeledSet fused_inputs(const FeatureSet& features, const std::vector<NetworkSpec>& selector);

/// Trains the features -> 512 -> 11 fusion MLP on equal-length feature vectors.
Network<float> train_fusion_mlp(const std::vector<FeatureVector>& features, const std::vector<int>& labels,
                                const TrainConfig& config);
Network<float> train_fusion_mlp(const LabeledSet& fused, const TrainConfig& config);

struct SubsetResult {
  std::vector<NetworkSpec> selector;
  std::string label;
  ConfusionMatrix confusion;
  MetricsReport metrics;
};

/// Fuses the selected networks' features, trains a fresh fusion MLP on the
/// train features and evaluates it on the test features.
SubsetResult evaluate_ensemble_subset(const std::vector<NetworkSpec>& selector, const FeatureSet& train,
                                      const FeatureSet& test, const TrainConfig& config);

/// Groupings reported per architecture: each single network, each (d,x)
/// depth pair, all spatial, all frequency, and the full fusion.
std::vector<std::vector<NetworkSpec>> figure_subsets();

/// Loads and decodes every image once, in order.
std::vector<TensorD> load_images(const std::filesystem::path& root, const std::vector<ManifestEntry>& entries);

/// Prepares decoded images for one network spec.
LabeledSet prepare_set(const std::vector<TensorD>& images, const std::vector<ManifestEntry>& entries,
                       const NetworkSpec& spec);

/// Seeds used by the pipeline for a network's initialisation and training.
std::uint64_t network_seed(std::uint64_t base, const NetworkSpec& spec);
std::uint64_t fusion_seed(std::uint64_t base);

}  // namespace sfuse
