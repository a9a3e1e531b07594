#include <gtest/gtest.h>

#include "sfuse/persistence.hpp"
#include "sfuse/synthetic.hpp"
#include "sfuse/workflow.hpp"

using namespace sfuse;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sfuse_pipeline_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

LabeledSet synthetic_set(const NetworkSpec& spec, std::size_t per_class, std::uint64_t seed) {
  LabeledSet set;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    Rng rng(mix_seed(seed, c));
    for (std::size_t i = 0; i < per_class; ++i) {
      const TensorD img = render_synthetic_word(static_cast<int>(c), rng, 64, 128);
      set.inputs.push_back(prepare_input(img, spec.domain, static_cast<std::size_t>(spec.input_size)));
      set.labels.push_back(static_cast<int>(c));
    }
  }
  return set;
}

double accuracy(const Network<float>& net, const LabeledSet& set) {
  const auto pred = predict(net, set.inputs);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) ok += pred[i] == set.labels[i];
  return static_cast<double>(ok) / static_cast<double>(pred.size());
}

}  // namespace

TEST(Training, ZeroEpochsLeavesNetwork) {
  const NetworkSpec spec{Domain::spatial, 32, 2};
  Network<float> net = Network<float>::build(spec, 1);
  const Network<float> before = net;
  TrainConfig c;
  c.epochs = 0;
  EXPECT_TRUE(train_cnn(net, synthetic_set(spec, 2, 1), c).empty());
  for (std::size_t i = 0; i < net.parameters().size(); ++i) {
    EXPECT_EQ(net.parameters()[i].value, before.parameters()[i].value);
  }
}

TEST(Training, SmallNetworkFitsSyntheticGlyphs) {
  const NetworkSpec spec{Domain::spatial, 32, 2};
  const LabeledSet set = synthetic_set(spec, 26, 3);
  Network<float> net = Network<float>::build(spec, 5);
  TrainConfig c;
  c.epochs = 25;
  c.seed = 5;
  const auto history = train_cnn(net, set, c);
  EXPECT_EQ(history.size(), 25u);
  EXPECT_GE(accuracy(net, set), 0.95);
  EXPECT_EQ(net.meta().epochs_completed, 25u);
  EXPECT_LT(history.back().loss, history.front().loss);
}

TEST(Training, IdenticalSeedsIdenticalParameters) {
  const NetworkSpec spec{Domain::frequency, 32, 2};
  const LabeledSet set = synthetic_set(spec, 5, 1);
  TrainConfig c;
  c.epochs = 2;
  c.seed = 8;
  Network<float> a = Network<float>::build(spec, 8);
  Network<float> b = Network<float>::build(spec, 8);
  train_cnn(a, set, c);
  train_cnn(b, set, c);
  EXPECT_EQ(encode_checkpoint(a), encode_checkpoint(b));
}

TEST(Training, HeapLayoutDoesNotChangeResult) {
  const NetworkSpec spec{Domain::spatial, 32, 2};
  TrainConfig c;
  c.epochs = 1;
  c.seed = 2;
  std::vector<std::string> runs;
  std::vector<std::vector<char>> junk;
  for (std::size_t shift : {1u, 7u, 13u}) {
    for (std::size_t k = 0; k < 64; ++k) junk.emplace_back(shift + 24 * k);
    const LabeledSet set = synthetic_set(spec, 5, 1);
    Network<float> net = Network<float>::build(spec, 2);
    train_cnn(net, set, c);
    runs.push_back(encode_checkpoint(net));
  }
  EXPECT_EQ(runs[0], runs[1]);
  EXPECT_EQ(runs[0], runs[2]);
}

TEST(Training, InputShapeChecked) {
  Network<float> net = Network<float>::build({Domain::spatial, 48, 2}, 1);
  EXPECT_THROW(train_cnn(net, synthetic_set({Domain::spatial, 32, 2}, 1, 1), {}), Error);
}

TEST(Fusion, SeparableClustersFitted) {
  Rng rng(3);
  std::vector<FeatureVector> features;
  std::vector<int> labels;
  for (int i = 0; i < 60; ++i) {
    const int label = i % 2 ? 7 : 2;
    FeatureVector f;
    f.values.resize(64);
    for (std::size_t k = 0; k < 64; ++k) {
      const double centre = (label == 7) == (k < 32) ? 1.0 : 0.0;
      f.values[k] = static_cast<float>(centre + rng.uniform(-0.2, 0.2));
    }
    features.push_back(f);
    labels.push_back(label);
  }
  TrainConfig c;
  c.epochs = 20;
  const Network<float> head = train_fusion_mlp(features, labels, c);
  LabeledSet set;
  for (std::size_t i = 0; i < features.size(); ++i) {
    set.inputs.push_back(Tensor({64}, features[i].values));
    set.labels.push_back(labels[i]);
  }
  EXPECT_EQ(accuracy(head, set), 1.0);
}

TEST(Fusion, SingleExampleMemorised) {
  FeatureVector f;
  f.values.assign(32, 0.5f);
  TrainConfig c;
  c.epochs = 20;
  const Network<float> head = train_fusion_mlp({f}, {9}, c);
  EXPECT_EQ(predict(head, {Tensor({32}, f.values)}).front(), 9);
}

TEST(Fusion, RejectsUnequalLengths) {
  FeatureVector a;
  a.values.assign(4, 0.0f);
  FeatureVector b;
  b.values.assign(5, 0.0f);
  EXPECT_THROW(train_fusion_mlp({a, b}, {0, 1}, {}), Error);
}

TEST(Subsets, FigureGroupings) {
  const auto s = figure_subsets();
  ASSERT_EQ(s.size(), 18u);
  EXPECT_EQ(s[10], parse_selector("s,32"));
  EXPECT_EQ(s[15], parse_selector("spatial"));
  EXPECT_EQ(s[16], parse_selector("frequency"));
  EXPECT_EQ(s[17].size(), 10u);
}

TEST(Workflow, SmallEndToEnd) {
  const fs::path dir = scratch("e2e");
  SyntheticOptions o;
  o.per_class = 6;
  o.seed = 2;
  write_synthetic_corpus(dir / "corpus", o);
  RunConfig config;
  config.corpus = dir / "corpus";
  config.out = dir / "out";
  config.seed = 2;
  config.train.epochs = 2;
  config.fusion.epochs = 2;
  config.jobs = 2;
  const DatasetSplit split = run_split(config);
  const auto specs = parse_selector("s,32,2;s,32,3;f,32,2;f,32,3");
  run_train_cnns(config, split, specs);
  run_extract(config, split, specs);
  const auto results = run_evaluate(config, split, {parse_selector("s,32,2"), specs});
  ASSERT_EQ(results.size(), 2u);
  EXPECT_EQ(results[1].confusion.total(), split.test.size());
  EXPECT_TRUE(fs::exists(layout::report(config.out)));
  const auto [train, test] = load_feature_sets(config, split, specs);
  EXPECT_EQ(fused_inputs(test, specs).inputs.front().size(), 4096u);

  const auto first_report = read_file(layout::report(config.out));
  run_evaluate(config, split, {parse_selector("s,32,2"), specs});
  EXPECT_EQ(read_file(layout::report(config.out)), first_report);
}

TEST(Workflow, SettingsApplied) {
  RunConfig c;
  apply_settings(c, {{"epochs", "4"}, {"learning_rate", "0.01"}, {"selector", "s"}, {"jobs", "3"}});
  EXPECT_EQ(c.train.epochs, 4u);
  EXPECT_EQ(c.train.optimizer.learning_rate, 0.01);
  EXPECT_EQ(c.selector, "s");
  EXPECT_EQ(c.jobs, 3u);
  EXPECT_THROW(apply_settings(c, {{"epochs", "four"}}), Error);
  EXPECT_THROW(apply_settings(c, {{"colour", "red"}}), Error);
  const RunConfig d;
  EXPECT_EQ(d.train.batch_size, 50u);
  EXPECT_EQ(d.train.optimizer.learning_rate, 1e-3);
  EXPECT_EQ(d.train.optimizer.beta1, 0.9);
  EXPECT_EQ(d.train.optimizer.beta2, 0.999);
  EXPECT_EQ(d.train.dropout_p, 0.5);
}
