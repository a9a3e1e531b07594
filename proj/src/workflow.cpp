#include "sfuse/workflow.hpp"

#include <atomic>
#include <charconv>
#include <exception>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "sfuse/persistence.hpp"

namespace sfuse {
namespace {

template <class U>
U parse_number(const std::string& key, const std::string& value) {
  U v{};
  const auto r = std::from_chars(value.data(), value.data() + value.size(), v);
  if (r.ec != std::errc() || r.ptr != value.data() + value.size()) {
    throw Error("config: invalid value '" + value + "' for " + key);
  }
  return v;
}

std::vector<ManifestEntry> all_samples(const DatasetSplit& split) {
  std::vector<ManifestEntry> out = split.train;
  out.insert(out.end(), split.test.begin(), split.test.end());
  return out;
}

}  // namespace

void apply_settings(RunConfig& c, const std::map<std::string, std::string>& settings) {
  for (const auto& [key, value] : settings) {
    if (key == "corpus") c.corpus = value;
    else if (key == "manifest") c.manifest = value;
    else if (key == "out") c.out = value;
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "train_fraction") c.train_fraction = parse_number<double>(key, value);
    else if (key == "epochs") c.train.epochs = parse_number<std::uint32_t>(key, value);
    else if (key == "fusion_epochs") c.fusion.epochs = parse_number<std::uint32_t>(key, value);
    else if (key == "batch_size") c.train.batch_size = c.fusion.batch_size = parse_number<std::size_t>(key, value);
    else if (key == "learning_rate") c.train.optimizer.learning_rate = c.fusion.optimizer.learning_rate = parse_number<double>(key, value);
    else if (key == "beta1") c.train.optimizer.beta1 = c.fusion.optimizer.beta1 = parse_number<double>(key, value);
    else if (key == "beta2") c.train.optimizer.beta2 = c.fusion.optimizer.beta2 = parse_number<double>(key, value);
    else if (key == "epsilon") c.train.optimizer.epsilon = c.fusion.optimizer.epsilon = parse_number<double>(key, value);
    else if (key == "dropout") c.train.dropout_p = c.fusion.dropout_p = parse_number<double>(key, value);
    else if (key == "selector") c.selector = value;
    else if (key == "jobs") c.jobs = parse_number<std::size_t>(key, value);
    else throw Error("config: unknown key '" + key + "'");
  }
}

namespace layout {
std::filesystem::path split_file(const std::filesystem::path& out) { return out / "split.csv"; }
std::filesystem::path checkpoint(const std::filesystem::path& out, const NetworkSpec& spec) {
  return out / ("cnn_" + spec.stem() + ".ckpt");
}
std::filesystem::path history(const std::filesystem::path& out, const NetworkSpec& spec) {
  return out / ("history_" + spec.stem() + ".csv");
}
std::filesystem::path features(const std::filesystem::path& out, const NetworkSpec& spec) {
  return out / ("features_" + spec.stem() + ".csv");
}
std::filesystem::path fusion_checkpoint(const std::filesystem::path& out, const std::vector<NetworkSpec>& selector) {
  std::string id = selector_label(selector);
  for (char& ch : id) {
    if (ch == ',') ch = '_';
    if (ch == ';') ch = '+';
  }
  return out / ("fusion_" + id + ".ckpt");
}
std::filesystem::path report(const std::filesystem::path& out) { return out / "report.txt"; }
}  // namespace layout

DatasetManifest load_manifest(const RunConfig& config) {
  if (config.corpus.empty()) throw Error("no corpus root given");
  if (config.manifest) return read_manifest(*config.manifest, config.corpus);
  return discover_corpus(config.corpus);
}

DatasetSplit run_split(const RunConfig& config) {
  DatasetSplit split = split_dataset(load_manifest(config), config.train_fraction, config.seed);
  std::filesystem::create_directories(config.out);
  write_split(split, layout::split_file(config.out));
  return split;
}

DatasetSplit ensure_split(const RunConfig& config) {
  const auto path = layout::split_file(config.out);
  if (std::filesystem::exists(path)) {
    DatasetSplit s = read_split(path);
    s.seed = config.seed;
    return s;
  }
  return run_split(config);
}

std::map<NetworkSpec, EpochStats> run_train_cnns(const RunConfig& config, const DatasetSplit& split,
                                                 const std::vector<NetworkSpec>& specs, const Log& log) {
  std::filesystem::create_directories(config.out);
  const std::vector<TensorD> images = load_images(config.corpus, split.train);
  std::map<NetworkSpec, EpochStats> finals;
  std::mutex lock;
  auto say = [&](const std::string& s) {
    if (!log) return;
    std::lock_guard g(lock);
    log(s);
  };

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t i = next++; i < specs.size(); i = next++) {
      try {
        const NetworkSpec& spec = specs[i];
        const LabeledSet set = prepare_set(images, split.train, spec);
        Network<float> net = Network<float>::build(spec, network_seed(config.seed, spec), config.train.dropout_p);
        TrainConfig tc = config.train;
        tc.seed = network_seed(config.seed, spec);
        const auto history = train_cnn(net, set, tc, [&](std::uint32_t e, const EpochStats& s) {
          say("train " + spec.str() + " epoch " + std::to_string(e + 1) + " loss " + std::to_string(s.loss) +
              " accuracy " + std::to_string(s.accuracy));
        });
        save_checkpoint(net, layout::checkpoint(config.out, spec));
        write_file_atomic(layout::history(config.out, spec), format_history(history));
        std::lock_guard g(lock);
        finals[spec] = history.empty() ? EpochStats{} : history.back();
      } catch (...) {
        std::lock_guard g(lock);
        if (!failure) failure = std::current_exception();
        next = specs.size();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(config.jobs, specs.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return finals;
}

void run_extract(const RunConfig& config, const DatasetSplit& split, const std::vector<NetworkSpec>& specs,
                 const Log& log) {
  const std::vector<ManifestEntry> samples = all_samples(split);
  const std::vector<TensorD> images = load_images(config.corpus, samples);
  for (const NetworkSpec& spec : specs) {
    const Network<float> net = load_checkpoint(layout::checkpoint(config.out, spec), spec);
    const LabeledSet set = prepare_set(images, samples, spec);
    write_feature_store(layout::features(config.out, spec), samples, extract_feature_rows(net, set.inputs));
    if (log) log("extract " + spec.str() + " " + std::to_string(samples.size()) + " samples");
  }
}

std::pair<FeatureSet, FeatureSet> load_feature_sets(const RunConfig& config, const DatasetSplit& split,
                                                    const std::vector<NetworkSpec>& specs) {
  std::pair<FeatureSet, FeatureSet> sets;
  sets.first.samples = split.train;
  sets.second.samples = split.test;
  for (const NetworkSpec& spec : specs) {
    const auto path = layout::features(config.out, spec);
    auto records = read_feature_store(path);
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < records.size(); ++i) index.emplace(records[i].first, i);
    for (FeatureSet* set : {&sets.first, &sets.second}) {
      auto& rows = set->rows[spec];
      for (const auto& s : set->samples) {
        const auto it = index.find(s.path);
        if (it == index.end()) throw Error(path.string() + ": no features for sample " + s.path);
        rows.push_back(records[it->second].second);
      }
    }
  }
  return sets;
}

Network<float> run_train_fusion(const RunConfig& config, const DatasetSplit& split,
                                const std::vector<NetworkSpec>& selector) {
  const auto [train, test] = load_feature_sets(config, split, selector);
  TrainConfig tc = config.fusion;
  tc.seed = fusion_seed(config.seed);
  Network<float> head = train_fusion_mlp(fused_inputs(train, selector), tc);
  save_checkpoint(head, layout::fusion_checkpoint(config.out, canonical_order(selector)));
  return head;
}

std::vector<SubsetResult> run_evaluate(const RunConfig& config, const DatasetSplit& split,
                                       const std::vector<std::vector<NetworkSpec>>& subsets, const Log& log) {
  std::vector<NetworkSpec> needed;
  for (const auto& s : subsets) {
    for (const auto& spec : s) {
      if (std::find(needed.begin(), needed.end(), spec) == needed.end()) needed.push_back(spec);
    }
  }
  const auto [train, test] = load_feature_sets(config, split, canonical_order(needed));
  TrainConfig tc = config.fusion;
  tc.seed = fusion_seed(config.seed);
  std::vector<SubsetResult> results;
  for (const auto& subset : subsets) {
    results.push_back(evaluate_ensemble_subset(subset, train, test, tc));
    if (log) log("evaluate " + results.back().label + " accuracy " + std::to_string(results.back().metrics.accuracy));
  }
  write_file_atomic(layout::report(config.out), format_report(results));
  return results;
}

}  // namespace sfuse
