#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sfuse/netspec.hpp"
#include "sfuse/random.hpp"
#include "sfuse/tape.hpp"

namespace sfuse {

enum class LayerKind { conv, maxpool, dense, relu, dropout, softmax };

std::string_view kind_name(LayerKind kind);

/// One entry of a layer stack. `softmax` is the classifier column: a linear
/// map onto `channels` classes followed by the softmax.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  int channels = 0;
  int filter_size = 0;
  int pad = 0;
  double dropout_p = 0.0;

  bool operator==(const LayerSpec&) const = default;
};

inline constexpr std::size_t kFeatureWidth = 1024;
inline constexpr std::size_t kHiddenWidth = 512;

template <class T>
struct Parameter {
  std::string name;
  BasicTensor<T> value;
};

struct TrainingMeta {
  std::uint64_t seed = 0;
  std::uint32_t epochs_completed = 0;
  double final_loss = 0.0;
  double final_accuracy = 0.0;

  bool operator==(const TrainingMeta&) const = default;
};

/// Tape handles produced by one recorded forward pass.
struct ForwardPass {
  Var logits;
  Var features;                     // post-activation output of the feature layer
  std::vector<Var> parameters;      // parallel to Network::parameters()
  std::vector<Var> layer_outputs;   // parallel to Network::layers()
};

/// A layer stack with its parameters: either one CNN_{d,x,y} or the fusion
/// head MLP (features -> 512 -> classes).
template <class T>
class Network {
 public:
  /// CL/PL pairs per depth, then FCL1(1024) + ReLU + dropout, FCL2(512) + ReLU
  /// and the 11-way softmax classifier. Weights are uniform with variance
  /// 2/fan_in; biases start at zero.
  static Network build(const NetworkSpec& spec, std::uint64_t seed, double dropout_p = 0.5);
  static Network build_fusion_head(std::size_t feature_length, std::uint64_t seed, double dropout_p = 0.5);

  bool is_fusion_head() const { return !spec_.has_value(); }
  const NetworkSpec& spec() const;
  std::size_t input_length() const;  // flattened per-sample input length
  Shape sample_shape() const;        // [1,x,x] or [F]

  const std::vector<LayerSpec>& layers() const { return layers_; }
  std::vector<Parameter<T>>& parameters() { return params_; }
  const std::vector<Parameter<T>>& parameters() const { return params_; }
  std::size_t parameter_count() const;

  /// Index into layers() of the dense layer whose activations are the features.
  std::size_t feature_tap() const { return feature_tap_; }
  std::size_t feature_width() const { return static_cast<std::size_t>(layers_[feature_tap_].channels); }

  TrainingMeta& meta() { return meta_; }
  const TrainingMeta& meta() const { return meta_; }

  /// Records a forward pass of `batch` ([N, sample_shape...]) on `tape`.
  ForwardPass record(Tape<T>& tape, BasicTensor<T> batch, Mode mode, Rng& rng) const;

  template <class U>
  Network<U> cast() const;

  /// Assembles a network from stored parts, validating every parameter
  /// shape against the layer stack implied by the spec.
  static Network assemble(std::optional<NetworkSpec> spec, std::size_t feature_length,
                          std::vector<Parameter<T>> params, TrainingMeta meta);

 private:
  template <class U>
  friend class Network;

  Network() = default;
  void init_layers(double dropout_p);
  std::vector<std::pair<std::string, Shape>> parameter_layout() const;

  std::optional<NetworkSpec> spec_;
  std::size_t fusion_input_ = 0;
  std::vector<LayerSpec> layers_;
  std::vector<Parameter<T>> params_;
  std::size_t feature_tap_ = 0;
  TrainingMeta meta_;
};

extern template class Network<float>;
extern template class Network<double>;

/// Table rows for one spec: the parametric and pooling columns only
/// (relu/dropout omitted), as (kind, channels, filter, pad).
std::vector<LayerSpec> architecture_columns(const std::vector<LayerSpec>& layers);

}  // namespace sfuse
