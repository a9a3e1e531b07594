#include "sfuse/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "sfuse/image.hpp"
#include "sfuse/wavelet.hpp"

namespace sfuse {
namespace {

int argmax(const float* p, std::size_t n) {
  return static_cast<int>(std::max_element(p, p + n) - p);
}

}  // namespace

std::vector<EpochStats> train_network(Network<float>& net, const LabeledSet& set, const TrainConfig& config,
                                      const EpochCallback& on_epoch) {
  if (set.inputs.size() != set.labels.size()) throw Error("train: inputs and labels differ in length");
  if (config.epochs == 0) return {};
  if (set.size() == 0) throw Error("train: empty training set");
  config.optimizer.validate();

  std::vector<std::string> names;
  std::vector<Tensor*> params;
  for (auto& p : net.parameters()) {
    names.push_back(p.name);
    params.push_back(&p.value);
  }
  AdamState<float> state;
  Rng dropout_rng(mix_seed(config.seed, 0xD809));
  std::vector<EpochStats> history;

  for (std::uint32_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto batches = batch_iter(set.size(), config.batch_size, config.seed, epoch);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      Batch batch = gather_batch(set.inputs, set.labels, batches[b]);
      Tape<float> tape;
      const ForwardPass pass = net.record(tape, std::move(batch.images), Mode::train, dropout_rng);
      const Var loss = tape.softmax_cross_entropy(pass.logits, batch.labels);
      const float loss_value = tape.value(loss)[0];
      if (!std::isfinite(loss_value)) {
        throw Error("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(b));
      }
      const Tensor& probs = tape.probabilities(loss);
      for (std::size_t i = 0; i < batch.size(); ++i) {
        if (argmax(probs.data() + i * kNumClasses, kNumClasses) == batch.labels[i]) ++correct;
      }
      loss_sum += static_cast<double>(loss_value) * static_cast<double>(batch.size());

      tape.backward(loss);
      std::vector<const Tensor*> grads;
      for (Var v : pass.parameters) grads.push_back(&tape.grad(v));
      adam_step<float>(params, grads, state, config.optimizer, names);
    }
    const EpochStats stats{loss_sum / static_cast<double>(set.size()),
                           static_cast<double>(correct) / static_cast<double>(set.size())};
    history.push_back(stats);
    if (on_epoch) on_epoch(epoch, stats);
  }
  net.meta().seed = config.seed;
  net.meta().epochs_completed += config.epochs;
  net.meta().final_loss = history.back().loss;
  net.meta().final_accuracy = history.back().accuracy;
  return history;
}

std::vector<EpochStats> train_cnn(Network<float>& net, const LabeledSet& set, const TrainConfig& config,
                                  const EpochCallback& on_epoch) {
  if (net.is_fusion_head()) throw Error("train_cnn: network is a fusion head");
  for (const auto& x : set.inputs) {
    if (x.shape() != net.sample_shape()) {
      throw Error("train_cnn: input " + to_string(x.shape()) + " does not fit network " + net.spec().str());
    }
  }
  return train_network(net, set, config, on_epoch);
}

std::vector<std::vector<float>> predict_proba(const Network<float>& net, const std::vector<Tensor>& inputs,
                                              std::size_t batch_size) {
  std::vector<std::vector<float>> out;
  if (inputs.empty()) return out;
  std::vector<int> no_labels(inputs.size(), 0);
  Rng unused(0);
  for (std::size_t start = 0; start < inputs.size(); start += batch_size) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(inputs.size(), start + batch_size); ++i) idx.push_back(i);
    Batch batch = gather_batch(inputs, no_labels, idx);
    Tape<float> tape;
    const ForwardPass pass = net.record(tape, std::move(batch.images), Mode::eval, unused);
    const Var loss = tape.softmax_cross_entropy(pass.logits, batch.labels);
    const Tensor& probs = tape.probabilities(loss);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      out.emplace_back(probs.data() + i * kNumClasses, probs.data() + (i + 1) * kNumClasses);
    }
  }
  return out;
}

std::vector<int> predict(const Network<float>& net, const std::vector<Tensor>& inputs, std::size_t batch_size) {
  std::vector<int> out;
  for (const auto& p : predict_proba(net, inputs, batch_size)) out.push_back(argmax(p.data(), p.size()));
  return out;
}

std::vector<std::vector<float>> extract_feature_rows(const Network<float>& net, const std::vector<Tensor>& inputs,
                                                     std::size_t batch_size) {
  std::vector<std::vector<float>> out;
  if (inputs.empty()) return out;
  std::vector<int> no_labels(inputs.size(), 0);
  Rng unused(0);
  const std::size_t width = net.feature_width();
  for (std::size_t start = 0; start < inputs.size(); start += batch_size) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(inputs.size(), start + batch_size); ++i) idx.push_back(i);
    Batch batch = gather_batch(inputs, no_labels, idx);
    Tape<float> tape;
    const ForwardPass pass = net.record(tape, std::move(batch.images), Mode::eval, unused);
    const Tensor& f = tape.value(pass.features);
    for (std::size_t i = 0; i < idx.size(); ++i) out.emplace_back(f.data() + i * width, f.data() + (i + 1) * width);
  }
  return out;
}

FeatureVector extract_features(const Network<float>& net, const TensorD& image) {
  const NetworkSpec& spec = net.spec();
  Tensor input = prepare_input(image, spec.domain, static_cast<std::size_t>(spec.input_size));
  auto rows = extract_feature_rows(net, {std::move(input)});
  return {std::move(rows.front()), {spec}};
}

FeatureVector fuse_features(const NetworkSet& networks, const std::vector<NetworkSpec>& selector,
                            const TensorD& image) {
  if (selector.empty()) throw Error("fuse_features: empty selector");
  FeatureVector fused;
  for (const NetworkSpec& spec : canonical_order(selector)) {
    const auto it = networks.find(spec);
    if (it == networks.end()) throw Error("fuse_features: network " + spec.str() + " is missing");
    FeatureVector f = extract_features(it->second, image);
    fused.values.insert(fused.values.end(), f.values.begin(), f.values.end());
    fused.sources.push_back(spec);
  }
  return fused;
}

std::vector<int> FeatureSet::labels() const {
  std::vector<int> out;
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

LabeledSet fused_inputs(const FeatureSet& features, const std::vector<NetworkSpec>& selector) {
  if (selector.empty()) throw Error("fused_inputs: empty selector");
  const auto ordered = canonical_order(selector);
  std::vector<const std::vector<std::vector<float>>*> tables;
  std::size_t width = 0;
  for (const auto& spec : ordered) {
    const auto it = features.rows.find(spec);
    if (it == features.rows.end()) throw Error("fused_inputs: features for network " + spec.str() + " are missing");
    if (it->second.size() != features.samples.size()) {
      throw Error("fused_inputs: network " + spec.str() + " has " + std::to_string(it->second.size()) +
                  " feature rows for " + std::to_string(features.samples.size()) + " samples");
    }
    tables.push_back(&it->second);
    width += it->second.empty() ? 0 : it->second.front().size();
  }
  LabeledSet set;
  set.labels = features.labels();
  for (std::size_t s = 0; s < features.samples.size(); ++s) {
    Tensor x({width});
    std::size_t off = 0;
    for (const auto* t : tables) {
      const auto& row = (*t)[s];
      std::copy(row.begin(), row.end(), x.data() + off);
      off += row.size();
    }
    if (off != width) throw Error("fused_inputs: inconsistent feature lengths at sample " + features.samples[s].path);
    set.inputs.push_back(std::move(x));
  }
  return set;
}

Network<float> train_fusion_mlp(const LabeledSet& fused, const TrainConfig& config) {
  if (fused.size() == 0) throw Error("train_fusion_mlp: no training features");
  const std::size_t width = fused.inputs.front().size();
  for (const auto& x : fused.inputs) {
    if (x.rank() != 1 || x.size() != width) {
      throw Error("train_fusion_mlp: inconsistent feature lengths (" + std::to_string(width) + " vs " +
                  std::to_string(x.size()) + ")");
    }
  }
  Network<float> head = Network<float>::build_fusion_head(width, fusion_seed(config.seed), config.dropout_p);
  train_network(head, fused, config);
  return head;
}

Network<float> train_fusion_mlp(const std::vector<FeatureVector>& features, const std::vector<int>& labels,
                                const TrainConfig& config) {
  if (features.size() != labels.size()) throw Error("train_fusion_mlp: features and labels differ in length");
  LabeledSet set;
  set.labels = labels;
  for (const auto& f : features) {
    if (f.values.empty()) throw Error("train_fusion_mlp: empty feature vector");
    set.inputs.emplace_back(Shape{f.values.size()}, f.values);
  }
  return train_fusion_mlp(set, config);
}

SubsetResult evaluate_ensemble_subset(const std::vector<NetworkSpec>& selector, const FeatureSet& train,
                                      const FeatureSet& test, const TrainConfig& config) {
  if (selector.empty()) throw Error("evaluate_ensemble_subset: empty selector");
  SubsetResult r;
  r.selector = canonical_order(selector);
  r.label = selector_label(r.selector);
  const Network<float> head = train_fusion_mlp(fused_inputs(train, r.selector), config);
  const LabeledSet test_set = fused_inputs(test, r.selector);
  const std::vector<int> predicted = predict(head, test_set.inputs, config.batch_size);
  std::tie(r.confusion, r.metrics) = evaluate(predicted, test_set.labels);
  return r;
}

std::vector<std::vector<NetworkSpec>> figure_subsets() {
  std::vector<std::vector<NetworkSpec>> out;
  const auto& all = canonical_networks();
  for (const auto& s : all) out.push_back({s});
  for (std::size_t i = 0; i < all.size(); i += 2) out.push_back({all[i], all[i + 1]});
  out.push_back(parse_selector("spatial"));
  out.push_back(parse_selector("frequency"));
  out.push_back(parse_selector("all"));
  return out;
}

std::vector<TensorD> load_images(const std::filesystem::path& root, const std::vector<ManifestEntry>& entries) {
  std::vector<TensorD> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(load_image(root / e.path));
  return out;
}

LabeledSet prepare_set(const std::vector<TensorD>& images, const std::vector<ManifestEntry>& entries,
                       const NetworkSpec& spec) {
  spec.validate();
  if (images.size() != entries.size()) throw Error("prepare_set: images and entries differ in length");
  LabeledSet set;
  for (std::size_t i = 0; i < images.size(); ++i) {
    set.inputs.push_back(prepare_input(images[i], spec.domain, static_cast<std::size_t>(spec.input_size)));
    set.labels.push_back(entries[i].label);
  }
  return set;
}

std::uint64_t network_seed(std::uint64_t base, const NetworkSpec& spec) {
  return mix_seed(base, 100 + canonical_index(spec));
}

std::uint64_t fusion_seed(std::uint64_t base) { return mix_seed(base, 0xF05E); }

}  // namespace sfuse
