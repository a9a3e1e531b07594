#include "sfuse/network.hpp"

#include <cmath>

#include "sfuse/dataset.hpp"

namespace sfuse {

std::string_view kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::dense: return "dense";
    case LayerKind::relu: return "relu";
    case LayerKind::dropout: return "dropout";
    case LayerKind::softmax: return "softmax";
  }
  return "?";
}

std::vector<LayerSpec> architecture_columns(const std::vector<LayerSpec>& layers) {
  std::vector<LayerSpec> out;
  for (const auto& l : layers) {
    if (l.kind != LayerKind::relu && l.kind != LayerKind::dropout) out.push_back(l);
  }
  return out;
}

template <class T>
void Network<T>::init_layers(double dropout_p) {
  layers_.clear();
  auto conv = [&](int channels, int filter) {
    layers_.push_back({LayerKind::conv, channels, filter, filter / 2});
    layers_.push_back({LayerKind::relu});
    layers_.push_back({LayerKind::maxpool, channels, 2, 0});
  };
  if (spec_) {
    if (spec_->depth == 2) {
      conv(32, 5);
      conv(64, 5);
    } else {
      conv(32, 7);
      conv(64, 5);
      conv(128, 3);
    }
    feature_tap_ = layers_.size();
    layers_.push_back({LayerKind::dense, static_cast<int>(kFeatureWidth)});
    layers_.push_back({LayerKind::relu});
    layers_.push_back({LayerKind::dropout, 0, 0, 0, dropout_p});
    layers_.push_back({LayerKind::dense, static_cast<int>(kHiddenWidth)});
    layers_.push_back({LayerKind::relu});
  } else {
    feature_tap_ = layers_.size();
    layers_.push_back({LayerKind::dense, static_cast<int>(kHiddenWidth)});
    layers_.push_back({LayerKind::relu});
    layers_.push_back({LayerKind::dropout, 0, 0, 0, dropout_p});
  }
  layers_.push_back({LayerKind::softmax, static_cast<int>(kNumClasses)});
}

template <class T>
std::vector<std::pair<std::string, Shape>> Network<T>::parameter_layout() const {
  std::vector<std::pair<std::string, Shape>> out;
  std::size_t channels = spec_ ? 1 : 0;
  std::size_t side = spec_ ? static_cast<std::size_t>(spec_->input_size) : 0;
  std::size_t flat = spec_ ? 0 : fusion_input_;
  int conv_no = 0;
  int dense_no = 0;
  for (const auto& l : layers_) {
    const auto width = static_cast<std::size_t>(l.channels);
    switch (l.kind) {
      case LayerKind::conv: {
        const std::string name = "cl" + std::to_string(++conv_no);
        const auto k = static_cast<std::size_t>(l.filter_size);
        out.push_back({name + ".weight", {width, channels, k, k}});
        out.push_back({name + ".bias", {width}});
        channels = width;
        break;
      }
      case LayerKind::maxpool:
        side /= 2;
        break;
      case LayerKind::dense: {
        if (flat == 0) flat = channels * side * side;
        const std::string name = "fcl" + std::to_string(++dense_no);
        out.push_back({name + ".weight", {width, flat}});
        out.push_back({name + ".bias", {width}});
        flat = width;
        break;
      }
      case LayerKind::softmax:
        out.push_back({"softmax.weight", {width, flat}});
        out.push_back({"softmax.bias", {width}});
        break;
      default:
        break;
    }
  }
  return out;
}

template <class T>
Network<T> Network<T>::build(const NetworkSpec& spec, std::uint64_t seed, double dropout_p) {
  spec.validate();
  Network net;
  net.spec_ = spec;
  net.init_layers(dropout_p);
  net.meta_.seed = seed;
  Rng rng(seed);
  for (auto& [name, shape] : net.parameter_layout()) {
    BasicTensor<T> value(shape);
    if (shape.size() > 1) {
      const std::size_t fan_in = element_count(shape) / shape[0];
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      for (T& v : value.values()) v = static_cast<T>(rng.uniform(-bound, bound));
    }
    net.params_.push_back({name, std::move(value)});
  }
  return net;
}

template <class T>
Network<T> Network<T>::build_fusion_head(std::size_t feature_length, std::uint64_t seed, double dropout_p) {
  if (feature_length == 0) throw Error("fusion head: feature length must be positive");
  Network net;
  net.fusion_input_ = feature_length;
  net.init_layers(dropout_p);
  net.meta_.seed = seed;
  Rng rng(seed);
  for (auto& [name, shape] : net.parameter_layout()) {
    BasicTensor<T> value(shape);
    if (shape.size() > 1) {
      const double bound = std::sqrt(6.0 / static_cast<double>(shape[1]));
      for (T& v : value.values()) v = static_cast<T>(rng.uniform(-bound, bound));
    }
    net.params_.push_back({name, std::move(value)});
  }
  return net;
}

template <class T>
Network<T> Network<T>::assemble(std::optional<NetworkSpec> spec, std::size_t feature_length,
                                std::vector<Parameter<T>> params, TrainingMeta meta) {
  Network net;
  net.spec_ = spec;
  if (spec) {
    spec->validate();
  } else if (feature_length == 0) {
    throw Error("fusion head: feature length must be positive");
  }
  net.fusion_input_ = spec ? 0 : feature_length;
  net.init_layers(0.5);
  const auto layout = net.parameter_layout();
  if (params.size() != layout.size()) {
    throw Error("network: expected " + std::to_string(layout.size()) + " parameter blocks, got " +
                std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (params[i].name != layout[i].first || params[i].value.shape() != layout[i].second) {
      throw Error("network: parameter block " + std::to_string(i) + " is '" + params[i].name + "' " +
                  to_string(params[i].value.shape()) + ", expected '" + layout[i].first + "' " +
                  to_string(layout[i].second));
    }
  }
  net.params_ = std::move(params);
  net.meta_ = meta;
  return net;
}

template <class T>
const NetworkSpec& Network<T>::spec() const {
  if (!spec_) throw Error("network: fusion head has no CNN spec");
  return *spec_;
}

template <class T>
std::size_t Network<T>::input_length() const {
  if (!spec_) return fusion_input_;
  const auto x = static_cast<std::size_t>(spec_->input_size);
  return x * x;
}

template <class T>
Shape Network<T>::sample_shape() const {
  if (!spec_) return {fusion_input_};
  const auto x = static_cast<std::size_t>(spec_->input_size);
  return {1, x, x};
}

template <class T>
std::size_t Network<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <class T>
ForwardPass Network<T>::record(Tape<T>& tape, BasicTensor<T> batch, Mode mode, Rng& rng) const {
  const Shape sample = sample_shape();
  if (batch.rank() != sample.size() + 1 || !std::equal(sample.begin(), sample.end(), batch.shape().begin() + 1)) {
    const std::string name = spec_ ? spec_->str() : "fusion head";
    throw Error("network " + name + ": input batch " + to_string(batch.shape()) + " does not match sample shape " +
                to_string(sample));
  }
  ForwardPass pass;
  for (const auto& p : params_) pass.parameters.push_back(tape.parameter(p.value));

  Var x = tape.input(std::move(batch));
  std::size_t next_param = 0;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& l = layers_[i];
    switch (l.kind) {
      case LayerKind::conv:
        x = tape.conv2d(x, pass.parameters[next_param], pass.parameters[next_param + 1],
                        static_cast<std::size_t>(l.pad));
        next_param += 2;
        break;
      case LayerKind::maxpool:
        x = tape.maxpool2d(x);
        break;
      case LayerKind::dense:
      case LayerKind::softmax:
        x = tape.dense(x, pass.parameters[next_param], pass.parameters[next_param + 1]);
        next_param += 2;
        if (l.kind == LayerKind::softmax) pass.logits = x;
        break;
      case LayerKind::relu:
        x = tape.relu(x);
        break;
      case LayerKind::dropout:
        x = tape.dropout(x, l.dropout_p, mode, rng);
        break;
    }
    pass.layer_outputs.push_back(x);
    if (i == feature_tap_ + 1) pass.features = x;
  }
  return pass;
}

template <class T>
template <class U>
Network<U> Network<T>::cast() const {
  Network<U> out;
  out.spec_ = spec_;
  out.fusion_input_ = fusion_input_;
  out.layers_ = layers_;
  out.feature_tap_ = feature_tap_;
  out.meta_ = meta_;
  for (const auto& p : params_) out.params_.push_back({p.name, p.value.template cast<U>()});
  return out;
}

template class Network<float>;
template class Network<double>;
template Network<double> Network<float>::cast<double>() const;
template Network<float> Network<double>::cast<float>() const;

}  // namespace sfuse
