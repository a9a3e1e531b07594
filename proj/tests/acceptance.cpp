// Acceptance run: prints one PASS/FAIL line per criterion and exits nonzero
// when any criterion fails. Pass criterion numbers as arguments to run a
// subset. Criterion 9 runs only when SFUSE_CORPUS names a corpus directory.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include "oracles.hpp"
#include "sfuse/adam.hpp"
#include "sfuse/gradcheck.hpp"
#include "sfuse/image.hpp"
#include "sfuse/metrics.hpp"
#include "sfuse/persistence.hpp"
#include "sfuse/synthetic.hpp"
#include "sfuse/wavelet.hpp"
#include "sfuse/workflow.hpp"

using namespace sfuse;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

constexpr std::uint64_t kSeed = 20180;
constexpr std::uint32_t kCnnEpochs = 20;
constexpr std::uint32_t kFusionEpochs = 30;

enum class Verdict { pass, fail, skip };

struct Outcome {
  Verdict verdict;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v, int precision = 3) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

Outcome verdict(bool ok, const std::string& detail) { return {ok ? Verdict::pass : Verdict::fail, detail}; }

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  GradCheckOptions options;
  const auto results = run_gradient_suite(options);
  const double elapsed = seconds_since(t0);
  bool ok = elapsed < 120.0;
  std::string detail;
  for (const auto& r : results) {
    ok = ok && r.passed;
    detail += r.name + " " + num(r.max_error) + " (" + std::to_string(r.checked) + "/" +
              std::to_string(r.checked + r.skipped) + "), ";
  }
  return verdict(ok, detail + std::to_string(options.seeds) + " seeds, " + num(elapsed) + " s");
}

Outcome wavelet_oracle() {
  const auto t0 = Clock::now();
  Rng rng(kSeed);
  double round_trip = 0.0;
  double energy = 0.0;
  double mean = 0.0;
  for (int i = 0; i < 100; ++i) {
    TensorD img({128, 128});
    for (double& v : img.values()) v = rng.uniform();
    const WaveletPyramid<double> p = haar_dwt2_multi(img);
    const TensorD back = haar_idwt2_multi(p);
    double pixels = 0.0;
    for (std::size_t k = 0; k < img.size(); ++k) {
      round_trip = std::max(round_trip, std::abs(back[k] - img[k]));
      pixels += img[k] * img[k];
    }
    energy = std::max(energy, std::abs(p.energy() - pixels) / pixels);
    const TensorD hp = haar_idwt2_multi(suppress_approximation(p));
    mean = std::max(mean, std::abs(hp.sum()) / static_cast<double>(hp.size()));
  }
  const double elapsed = seconds_since(t0);
  return verdict(round_trip < 1e-9 && energy < 1e-9 && mean < 1e-9 && elapsed < 30.0,
                 "round trip " + num(round_trip) + ", energy " + num(energy) + ", suppressed mean " + num(mean) +
                     ", " + num(elapsed) + " s");
}

Outcome adam_oracle() {
  const auto ref = oracle::scalar_adam(1.0, 3.0, 100);
  TensorD w({1}, 1.0);
  TensorD g({1});
  AdamState<double> state;
  TensorD* p[] = {&w};
  const TensorD* q[] = {&g};
  double worst = 0.0;
  double first = 0.0;
  for (int t = 0; t < 100; ++t) {
    g[0] = 2.0 * (w[0] - 3.0);
    adam_step<double>(p, q, state, {});
    worst = std::max(worst, std::abs(w[0] - ref[t]));
  }
  TensorD w1({1}, 1.0);
  TensorD g1({1}, 2.0);
  AdamState<double> s1;
  TensorD* p1[] = {&w1};
  const TensorD* q1[] = {&g1};
  adam_step<double>(p1, q1, s1, {});
  first = w1[0];
  return verdict(worst < 1e-12 && std::abs(first - 0.999) < 1e-9,
                 "trajectory max diff " + num(worst) + ", first step " + num(first, 12));
}

Outcome metrics_oracle() {
  ConfusionMatrix m;
  std::array<std::array<double, 11>, 11> md{};
  m.counts[0][0] = 8;
  m.counts[0][1] = 2;
  for (std::size_t i = 1; i < kNumClasses; ++i) m.counts[i][i] = 10;
  for (std::size_t i = 0; i < 11; ++i)
    for (std::size_t j = 0; j < 11; ++j) md[i][j] = static_cast<double>(m.counts[i][j]);
  const MetricsReport r = compute_metrics(m);
  const oracle::Macro o = oracle::macro_metrics(md);
  const double hand_acc = 108.0 / 110.0;
  const double hand_p = (1.0 + 10.0 / 12.0 + 9.0) / 11.0;
  const double hand_r = (0.8 + 1.0 + 9.0) / 11.0;
  const double hand_f = (8.0 / 9.0 + 10.0 / 11.0 + 9.0) / 11.0;
  double worst = 0.0;
  for (auto [a, b, c] : {std::tuple{r.accuracy, o.accuracy, hand_acc}, {r.precision, o.precision, hand_p},
                         {r.recall, o.recall, hand_r}, {r.f_score, o.f_score, hand_f}}) {
    worst = std::max({worst, std::abs(a - b), std::abs(a - c)});
  }
  ConfusionMatrix diag;
  for (std::size_t i = 0; i < kNumClasses; ++i) diag.counts[i][i] = 5;
  const MetricsReport d = compute_metrics(diag);
  const bool ones = d.accuracy == 1.0 && d.precision == 1.0 && d.recall == 1.0 && d.f_score == 1.0;
  return verdict(worst < 1e-12 && ones, "max diff " + num(worst) + ", diagonal all ones " + (ones ? "yes" : "no"));
}

Outcome structure() {
  using K = LayerKind;
  const std::vector<LayerSpec> table[2] = {
      {{K::conv, 32, 5, 2}, {K::maxpool, 32, 2, 0}, {K::conv, 64, 5, 2}, {K::maxpool, 64, 2, 0}, {K::dense, 1024},
       {K::dense, 512}, {K::softmax, 11}},
      {{K::conv, 32, 7, 3}, {K::maxpool, 32, 2, 0}, {K::conv, 64, 5, 2}, {K::maxpool, 64, 2, 0},
       {K::conv, 128, 3, 1}, {K::maxpool, 128, 2, 0}, {K::dense, 1024}, {K::dense, 512}, {K::softmax, 11}}};
  NetworkSet nets;
  std::size_t conforming = 0;
  std::size_t features_ok = 0;
  TensorD img({60, 140}, 0.9);
  for (std::size_t i = 0; i < img.size(); i += 7) img[i] = 0.1;
  for (const auto& spec : canonical_networks()) {
    const Network<float> net = Network<float>::build(spec, kSeed);
    conforming += architecture_columns(net.layers()) == table[spec.depth - 2];
    features_ok += extract_features(net, img).values.size() == 1024;
    nets.emplace(spec, net);
  }
  const std::size_t fused = fuse_features(nets, parse_selector("all"), img).values.size();
  return verdict(conforming == 10 && features_ok == 10 && fused == 10240,
                 std::to_string(conforming) + "/10 match the layer table, " + std::to_string(features_ok) +
                     "/10 give 1024 features, fused length " + std::to_string(fused));
}

Outcome persistence() {
  const fs::path dir = fs::temp_directory_path() / "sfuse_accept_persist";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::size_t round_trips = 0;
  for (const auto& spec : canonical_networks()) {
    const Network<float> net = Network<float>::build(spec, kSeed);
    const fs::path path = dir / (spec.stem() + ".ckpt");
    save_checkpoint(net, path);
    const Network<float> back = load_checkpoint(path, spec);
    bool same = back.meta() == net.meta();
    for (std::size_t i = 0; i < net.parameters().size(); ++i) {
      const auto a = net.parameters()[i].value.values();
      const auto b = back.parameters()[i].value.values();
      same = same && std::memcmp(a.data(), b.data(), a.size_bytes()) == 0;
    }
    round_trips += same && encode_checkpoint(back) == read_file(path);
  }
  const std::string good = read_file(dir / "s_32_2.ckpt");
  std::string magic = good;
  magic[0] = 'X';
  std::string version = good;
  version[8] = 2;
  const std::vector<std::string> corrupt = {magic, version, good.substr(0, good.size() / 2), good.substr(0, 11),
                                            good + '\0'};
  std::size_t rejected = 0;
  for (const auto& bytes : corrupt) {
    try {
      decode_checkpoint(bytes);
    } catch (const Error&) {
      ++rejected;
    }
  }
  bool guard = false;
  try {
    load_checkpoint(dir / "s_32_2.ckpt", {Domain::frequency, 48, 3});
  } catch (const Error&) {
    guard = true;
  }
  fs::remove_all(dir);
  return verdict(round_trips == 10 && rejected == corrupt.size() && guard,
                 std::to_string(round_trips) + "/10 bitwise round trips, " + std::to_string(rejected) + "/" +
                     std::to_string(corrupt.size()) + " corrupted files rejected, spec guard " +
                     (guard ? "ok" : "missing"));
}

struct SyntheticRun {
  double seconds = 0.0;
  std::map<NetworkSpec, double> train_accuracy;  // eval mode, whole training split
  std::vector<SubsetResult> results;
};

SyntheticRun run_synthetic(const fs::path& root) {
  const auto t0 = Clock::now();
  fs::remove_all(root);
  SyntheticOptions options;
  options.per_class = 33;
  options.seed = kSeed;
  write_synthetic_corpus(root / "corpus", options);

  RunConfig config;
  config.corpus = root / "corpus";
  config.out = root / "out";
  config.seed = kSeed;
  config.train.epochs = kCnnEpochs;
  config.fusion.epochs = kFusionEpochs;
  config.jobs = std::max(1u, std::thread::hardware_concurrency());

  const DatasetSplit split = run_split(config);
  const std::vector<NetworkSpec> all = parse_selector("all");
  run_train_cnns(config, split, all);
  run_extract(config, split, all);

  SyntheticRun run;
  const std::vector<TensorD> images = load_images(config.corpus, split.train);
  for (const auto& spec : all) {
    const Network<float> net = load_checkpoint(layout::checkpoint(config.out, spec), spec);
    const LabeledSet set = prepare_set(images, split.train, spec);
    const auto pred = predict(net, set.inputs);
    std::size_t ok = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) ok += pred[i] == set.labels[i];
    run.train_accuracy[spec] = static_cast<double>(ok) / static_cast<double>(pred.size());
  }
  run.results = run_evaluate(config, split, figure_subsets());
  run.seconds = seconds_since(t0);
  return run;
}

std::vector<fs::path> artifacts(const fs::path& out) {
  std::vector<fs::path> files;
  for (const auto& spec : canonical_networks()) {
    files.push_back(layout::checkpoint(out, spec).filename());
    files.push_back(layout::features(out, spec).filename());
    files.push_back(layout::history(out, spec).filename());
  }
  files.push_back(layout::split_file(out).filename());
  files.push_back(layout::report(out).filename());
  return files;
}

Outcome synthetic_end_to_end(const SyntheticRun& run) {
  double lowest = 1.0;
  std::string lowest_name;
  for (const auto& [spec, acc] : run.train_accuracy) {
    if (acc < lowest) {
      lowest = acc;
      lowest_name = spec.str();
    }
  }
  double best_single = 0.0;
  double full = 0.0;
  for (const auto& r : run.results) {
    if (r.selector.size() == 1) best_single = std::max(best_single, r.metrics.accuracy);
    if (r.selector.size() == 10) full = r.metrics.accuracy;
  }
  const bool ok = lowest >= 0.95 && full >= best_single - 0.02 && run.seconds < 1800.0;
  return verdict(ok, "lowest CNN train accuracy " + num(lowest, 4) + " (" + lowest_name + ") after " +
                         std::to_string(kCnnEpochs) + " epochs, fusion test " + num(full, 4) +
                         " vs best single " + num(best_single, 4) + ", " + num(run.seconds, 4) + " s with " +
                         std::to_string(std::max(1u, std::thread::hardware_concurrency())) + " thread(s)");
}

Outcome determinism(const fs::path& first, const fs::path& second) {
  std::size_t same = 0;
  std::string differing;
  const auto files = artifacts(first);
  for (const auto& f : files) {
    const bool eq = fs::exists(first / f) && fs::exists(second / f) && read_file(first / f) == read_file(second / f);
    same += eq;
    if (!eq && differing.empty()) differing = f.string();
  }
  return verdict(same == files.size(), std::to_string(same) + "/" + std::to_string(files.size()) +
                                           " output files byte-identical" +
                                           (differing.empty() ? "" : ", first difference " + differing));
}

Outcome user_corpus() {
  const char* root = std::getenv("SFUSE_CORPUS");
  if (!root || !*root) return {Verdict::skip, "set SFUSE_CORPUS to a <root>/<Script>/*.png corpus to run"};
  const auto t0 = Clock::now();
  RunConfig config;
  config.corpus = root;
  config.out = fs::temp_directory_path() / "sfuse_accept_user";
  if (const char* out = std::getenv("SFUSE_OUT")) config.out = out;
  if (const char* e = std::getenv("SFUSE_EPOCHS")) config.train.epochs = config.fusion.epochs = std::stoul(e);
  config.seed = kSeed;
  config.jobs = std::max(1u, std::thread::hardware_concurrency());

  const DatasetManifest manifest = load_manifest(config);
  std::array<std::size_t, kNumClasses> per{};
  for (const auto& e : manifest.entries) ++per[e.label];
  const std::size_t smallest = *std::min_element(per.begin(), per.end());
  if (smallest < 500) return {Verdict::fail, "corpus has a class with only " + std::to_string(smallest) + " words"};

  const DatasetSplit split = run_split(config);
  const auto all = parse_selector("all");
  run_train_cnns(config, split, all);
  run_extract(config, split, all);
  const auto results = run_evaluate(config, split, figure_subsets());
  const std::string report = read_file(layout::report(config.out));
  bool complete = results.size() == figure_subsets().size();
  for (const char* key : {"accuracy,", "precision,", "recall,", "f_score,", "```confusion"}) {
    complete = complete && report.find(key) != std::string::npos;
  }
  return verdict(complete, "full fusion test accuracy " + num(results.back().metrics.accuracy, 4) + ", report " +
                               layout::report(config.out).string() + ", " + num(seconds_since(t0), 4) + " s");
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  auto want = [&](int n) { return wanted.empty() || wanted.count(n) > 0; };

  bool failed = false;
  auto report = [&](int n, const std::string& name, const std::function<Outcome()>& body) {
    if (!want(n)) return;
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o = {Verdict::fail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.verdict == Verdict::pass ? "PASS" : o.verdict == Verdict::fail ? "FAIL" : "SKIP";
    failed = failed || o.verdict == Verdict::fail;
    std::cout << "criterion " << n << " " << tag << " " << name << ": " << o.detail << std::endl;
  };

  report(1, "gradient suite", gradient_suite);
  report(2, "wavelet oracle", wavelet_oracle);
  report(3, "adam oracle", adam_oracle);
  report(4, "metrics oracle", metrics_oracle);
  report(5, "structural conformance", structure);

  const fs::path base = fs::temp_directory_path() / "sfuse_accept";
  if (want(6) || want(7)) {
    std::optional<SyntheticRun> first;
    std::string first_error;
    try {
      first = run_synthetic(base / "run1");
    } catch (const std::exception& e) {
      first_error = e.what();
    }
    report(6, "synthetic end-to-end", [&] {
      if (!first) throw Error(first_error);
      return synthetic_end_to_end(*first);
    });
    report(7, "determinism", [&] {
      if (!first) throw Error(first_error);
      run_synthetic(base / "run2");
      return determinism(base / "run1" / "out", base / "run2" / "out");
    });
  }
  report(8, "persistence", persistence);
  report(9, "user corpus", user_corpus);
  return failed ? 1 : 0;
}
