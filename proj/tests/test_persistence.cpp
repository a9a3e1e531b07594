#include <gtest/gtest.h>

#include <fstream>

#include "sfuse/image.hpp"
#include "sfuse/persistence.hpp"

using namespace sfuse;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sfuse_persist_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void expect_rejected(const std::string& bytes, const std::string& fragment) {
  try {
    decode_checkpoint(bytes, "test");
    FAIL() << "accepted";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
  }
}

}  // namespace

TEST(Checkpoint, RoundTripBitwise) {
  const fs::path dir = scratch("rt");
  Network<float> net = Network<float>::build({Domain::spatial, 32, 2}, 42);
  net.meta() = {42, 7, 0.125, 0.75};
  save_checkpoint(net, dir / "a.ckpt");
  const Network<float> back = load_checkpoint(dir / "a.ckpt");
  EXPECT_EQ(back.spec(), net.spec());
  EXPECT_EQ(back.meta(), net.meta());
  ASSERT_EQ(back.parameters().size(), net.parameters().size());
  for (std::size_t i = 0; i < net.parameters().size(); ++i) {
    EXPECT_EQ(back.parameters()[i].name, net.parameters()[i].name);
    EXPECT_EQ(back.parameters()[i].value, net.parameters()[i].value);
  }
  save_checkpoint(back, dir / "b.ckpt");
  EXPECT_EQ(read_file(dir / "a.ckpt"), read_file(dir / "b.ckpt"));
}

TEST(Checkpoint, FusionHeadRoundTrip) {
  const Network<float> head = Network<float>::build_fusion_head(2048, 3);
  const Network<float> back = decode_checkpoint(encode_checkpoint(head));
  EXPECT_TRUE(back.is_fusion_head());
  EXPECT_EQ(back.input_length(), 2048u);
  EXPECT_EQ(encode_checkpoint(back), encode_checkpoint(head));
}

TEST(Checkpoint, LayoutHeader) {
  const std::string bytes = encode_checkpoint(Network<float>::build({Domain::frequency, 48, 3}, 1));
  EXPECT_EQ(bytes.substr(0, 8), "SFUSECKP");
  EXPECT_EQ(bytes[8], 1);  // version, little-endian
  EXPECT_EQ(bytes[12], 0);  // cnn
  EXPECT_EQ(bytes[13], 'f');
  EXPECT_EQ(static_cast<unsigned char>(bytes[14]), 48);
  EXPECT_EQ(bytes[18], 3);
}

TEST(Checkpoint, CorruptionRejected) {
  const std::string good = encode_checkpoint(Network<float>::build({Domain::spatial, 32, 2}, 1));
  std::string bad_magic = good;
  bad_magic[2] = 'X';
  expect_rejected(bad_magic, "magic");
  std::string bad_version = good;
  bad_version[8] = 9;
  expect_rejected(bad_version, "version");
  expect_rejected(good.substr(0, good.size() - 5), "truncated");
  expect_rejected(good.substr(0, 20), "offset");
  expect_rejected(good + "x", "trailing");
  expect_rejected("", "offset 0");
}

TEST(Checkpoint, SpecGuard) {
  const fs::path dir = scratch("guard");
  save_checkpoint(Network<float>::build({Domain::spatial, 32, 2}, 1), dir / "n.ckpt");
  EXPECT_EQ(load_checkpoint(dir / "n.ckpt", {Domain::spatial, 32, 2}).spec().str(), "s,32,2");
  EXPECT_THROW(load_checkpoint(dir / "n.ckpt", {Domain::frequency, 48, 3}), Error);
  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), Error);
}

TEST(FeatureStore, RoundTripNineDigits) {
  const fs::path dir = scratch("features");
  const std::vector<ManifestEntry> samples = {{"Tamil/a.png", 8}, {"Urdu/b.png", 10}};
  const std::vector<std::vector<float>> rows = {{0.1f, 1.0f / 3.0f, 0.0f}, {12345.678f, 1e-7f, 2.5f}};
  write_feature_store(dir / "f.csv", samples, rows);
  const auto back = read_feature_store(dir / "f.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].first, "Tamil/a.png");
  EXPECT_EQ(back[1].second, rows[1]);
  EXPECT_EQ(back[0].second, rows[0]);
  const std::string text = read_file(dir / "f.csv");
  EXPECT_NE(text.find("0.333333343"), std::string::npos) << text;
}

TEST(Report, ContainsMatrixAndMetrics) {
  SubsetResult r;
  r.selector = parse_selector("s,128");
  r.label = "s,128";
  for (std::size_t i = 0; i < kNumClasses; ++i) r.confusion.counts[i][i] = 2;
  r.metrics = compute_metrics(r.confusion);
  const std::string text = format_report({r});
  EXPECT_NE(text.find("```confusion"), std::string::npos);
  EXPECT_NE(text.find("accuracy,1"), std::string::npos) << text;
  EXPECT_NE(text.find("f_score,1"), std::string::npos);
  EXPECT_NE(text.find("precision.Bangla"), std::string::npos);
}

TEST(Config, KeyValueFile) {
  const fs::path dir = scratch("config");
  std::ofstream(dir / "c.conf") << "# comment\nseed = 7\n  epochs=3   # trailing\n\ncorpus = /data/x y\n";
  const auto m = read_config_file(dir / "c.conf");
  EXPECT_EQ(m.at("seed"), "7");
  EXPECT_EQ(m.at("epochs"), "3");
  EXPECT_EQ(m.at("corpus"), "/data/x y");
  std::ofstream(dir / "bad.conf") << "novalue\n";
  EXPECT_THROW(read_config_file(dir / "bad.conf"), Error);
}

TEST(Activations, MapCountFor128Deep) {
  const fs::path dir = scratch("act");
  const Network<float> net = Network<float>::build({Domain::spatial, 128, 3}, 1);
  const auto files = dump_activations(net, TensorD({64, 128}, 0.5), dir / "maps");
  EXPECT_EQ(files.size(), 448u);
  EXPECT_TRUE(fs::exists(dir / "maps" / "cl1_0.png"));
  EXPECT_TRUE(fs::exists(dir / "maps" / "pl3_127.png"));
  EXPECT_EQ(load_image(dir / "maps" / "cl2_5.png").shape(), (Shape{64, 64}));
}

TEST(Activations, CountEqualsChannelSum) {
  const fs::path dir = scratch("act2");
  for (const NetworkSpec s : {NetworkSpec{Domain::frequency, 32, 2}, NetworkSpec{Domain::spatial, 48, 3}}) {
    const Network<float> net = Network<float>::build(s, 1);
    std::size_t expect = 0;
    for (const auto& l : net.layers()) {
      if (l.kind == LayerKind::conv || l.kind == LayerKind::maxpool) expect += static_cast<std::size_t>(l.channels);
    }
    EXPECT_EQ(dump_activations(net, Tensor(net.sample_shape(), 0.3f), dir / s.stem()).size(), expect);
  }
}

TEST(Activations, ZeroInputZeroBiasUniformMaps) {
  const fs::path dir = scratch("act3");
  const Network<float> net = Network<float>::build({Domain::spatial, 32, 2}, 1);
  const auto files = dump_activations(net, Tensor({1, 32, 32}, 0.0f), dir);
  for (const auto& f : files) {
    const TensorD img = load_image(f);
    for (double v : img.values()) ASSERT_EQ(v, 0.0) << f;
  }
}

TEST(Activations, UnwritableDirectoryRejected) {
  const fs::path dir = scratch("act4");
  std::ofstream(dir / "file") << "x";
  const Network<float> net = Network<float>::build({Domain::spatial, 32, 2}, 1);
  EXPECT_THROW(dump_activations(net, Tensor({1, 32, 32}, 0.0f), dir / "file" / "sub"), Error);
}
