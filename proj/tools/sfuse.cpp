// sfuse: train, fuse and evaluate the script identification networks.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sfuse/gradcheck.hpp"
#include "sfuse/image.hpp"
#include "sfuse/persistence.hpp"
#include "sfuse/synthetic.hpp"
#include "sfuse/workflow.hpp"

namespace {

using namespace sfuse;

struct Flag {
  std::string key;
  std::string value;
  CLI::Option* option = nullptr;
};

std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << std::fixed << v;
  return os.str();
}

std::vector<std::vector<NetworkSpec>> parse_subsets(const std::string& text) {
  if (text == "fig4") return figure_subsets();
  return {parse_selector(text)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Handwritten script identification with multi-scale CNN feature fusion"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_file;
  std::optional<std::string> split_path;
  bool verbose = false;
  app.add_option("--config", config_file, "key = value settings file; flags override it");
  app.add_option("--split", split_path, "split record file (default <out>/split.csv)");
  app.add_flag("-v,--verbose", verbose, "print per-epoch progress to stderr");

  std::vector<Flag> flags = {
      {"corpus", "", nullptr},        {"manifest", "", nullptr},     {"out", "", nullptr},
      {"seed", "", nullptr},          {"epochs", "", nullptr},       {"fusion_epochs", "", nullptr},
      {"batch_size", "", nullptr},    {"learning_rate", "", nullptr}, {"beta1", "", nullptr},
      {"beta2", "", nullptr},         {"epsilon", "", nullptr},      {"dropout", "", nullptr},
      {"train_fraction", "", nullptr}, {"jobs", "", nullptr},
  };
  for (auto& f : flags) {
    std::string name = "--" + f.key;
    for (char& c : name) {
      if (c == '_') c = '-';
    }
    f.option = app.add_option(name, f.value);
  }

  auto* split_cmd = app.add_subcommand("split", "stratified train/test split of the corpus");

  std::string spec_text = "all";
  auto* train_cmd = app.add_subcommand("train-cnn", "train CNNs and write their checkpoints");
  train_cmd->add_option("--spec", spec_text, "network selector, e.g. s,128,3 or all");

  auto* extract_cmd = app.add_subcommand("extract", "write 1024-wide feature stores for every split sample");
  extract_cmd->add_option("--spec", spec_text, "network selector");

  std::string selector_text = "all";
  auto* fusion_cmd = app.add_subcommand("train-fusion", "train the fusion MLP on extracted features");
  fusion_cmd->add_option("--selector", selector_text, "networks to fuse");

  auto* eval_cmd = app.add_subcommand("evaluate", "fit fusion heads and write the metrics report");
  eval_cmd->add_option("--selector", selector_text, "networks to fuse, or fig4 for every grouping");

  std::string image_path;
  auto* predict_cmd = app.add_subcommand("predict", "classify one word image with a trained fusion head");
  predict_cmd->add_option("--selector", selector_text, "networks of the fusion head");
  predict_cmd->add_option("--image", image_path, "word image")->required();

  std::string dump_spec = "s,128,3";
  std::optional<std::string> dump_dir;
  auto* dump_cmd = app.add_subcommand("dump-activations", "write convolution and pooling maps as PNG files");
  dump_cmd->add_option("--spec", dump_spec, "network");
  dump_cmd->add_option("--image", image_path, "word image")->required();
  dump_cmd->add_option("--dir", dump_dir, "output directory (default <out>/activations_<spec>)");

  std::size_t grad_seeds = 20;
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of every layer and the s,32,2 network");
  grad_cmd->add_option("--seeds", grad_seeds, "random seeds per primitive");

  std::size_t per_class = 33;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic glyph corpus under --corpus");
  synth_cmd->add_option("--per-class", per_class, "images per class");

  auto* pipeline_cmd = app.add_subcommand("pipeline", "split, train-cnn, extract and evaluate in one run");
  pipeline_cmd->add_option("--selector", selector_text, "subsets to evaluate (default fig4)")->default_val("fig4");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help() << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    RunConfig config;
    std::map<std::string, std::string> settings;
    if (!config_file.empty()) settings = read_config_file(config_file);
    for (const auto& f : flags) {
      if (f.option->count() > 0) settings[f.key] = f.value;
    }
    apply_settings(config, settings);

    const Log log = [&](const std::string& line) {
      if (verbose) std::cerr << line << "\n";
    };
    auto load_split = [&]() {
      if (split_path) return read_split(*split_path);
      return ensure_split(config);
    };

    if (split_cmd->parsed()) {
      const DatasetSplit split = split_dataset(load_manifest(config), config.train_fraction, config.seed);
      const std::filesystem::path path = split_path ? std::filesystem::path(*split_path) : layout::split_file(config.out);
      if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
      write_split(split, path);
      std::cout << "split: " << split.train.size() << " train, " << split.test.size() << " test -> "
                << path.string() << "\n";
    } else if (train_cmd->parsed()) {
      const auto specs = parse_selector(spec_text);
      const auto finals = run_train_cnns(config, load_split(), specs, log);
      std::string worst;
      double lowest = 2.0;
      for (const auto& [spec, stats] : finals) {
        if (stats.accuracy < lowest) {
          lowest = stats.accuracy;
          worst = spec.str();
        }
      }
      std::cout << "train-cnn: " << finals.size() << " network(s), " << config.train.epochs
                << " epochs, lowest final accuracy " << fixed(lowest) << " (" << worst << ") -> "
                << config.out.string() << "\n";
    } else if (extract_cmd->parsed()) {
      const auto specs = parse_selector(spec_text);
      const DatasetSplit split = load_split();
      run_extract(config, split, specs, log);
      std::cout << "extract: " << specs.size() << " network(s), " << split.train.size() + split.test.size()
                << " samples -> " << config.out.string() << "\n";
    } else if (fusion_cmd->parsed()) {
      const auto selector = parse_selector(selector_text);
      const Network<float> head = run_train_fusion(config, load_split(), selector);
      std::cout << "train-fusion: " << selector_label(selector) << " features " << head.input_length()
                << " final accuracy " << fixed(head.meta().final_accuracy) << " -> "
                << layout::fusion_checkpoint(config.out, canonical_order(selector)).string() << "\n";
    } else if (eval_cmd->parsed() || pipeline_cmd->parsed()) {
      const auto subsets = parse_subsets(selector_text);
      DatasetSplit split;
      if (pipeline_cmd->parsed()) {
        split = split_path ? read_split(*split_path) : run_split(config);
        std::vector<NetworkSpec> needed;
        for (const auto& s : subsets) needed.insert(needed.end(), s.begin(), s.end());
        std::sort(needed.begin(), needed.end());
        needed.erase(std::unique(needed.begin(), needed.end()), needed.end());
        run_train_cnns(config, split, needed, log);
        run_extract(config, split, needed, log);
      } else {
        split = load_split();
      }
      const auto results = run_evaluate(config, split, subsets, log);
      const SubsetResult& last = results.back();
      std::cout << (pipeline_cmd->parsed() ? "pipeline: " : "evaluate: ") << results.size() << " subset(s), "
                << last.label << " accuracy " << fixed(last.metrics.accuracy) << " f-score "
                << fixed(last.metrics.f_score) << " -> " << layout::report(config.out).string() << "\n";
    } else if (predict_cmd->parsed()) {
      const auto selector = canonical_order(parse_selector(selector_text));
      NetworkSet nets;
      for (const auto& spec : selector) nets.emplace(spec, load_checkpoint(layout::checkpoint(config.out, spec), spec));
      const Network<float> head = load_checkpoint(layout::fusion_checkpoint(config.out, selector));
      if (!head.is_fusion_head() || head.input_length() != kFeatureWidth * selector.size()) {
        throw Error("fusion checkpoint does not match selector " + selector_label(selector));
      }
      const FeatureVector fused = fuse_features(nets, selector, load_image(image_path));
      const Tensor input({fused.values.size()}, fused.values);
      const auto proba = predict_proba(head, {input}).front();
      std::size_t best = 0;
      for (std::size_t c = 1; c < proba.size(); ++c) {
        if (proba[c] > proba[best]) best = c;
      }
      std::cout << "predict: " << image_path << " " << script_names()[best] << " " << fixed(proba[best]) << "\n";
    } else if (dump_cmd->parsed()) {
      const NetworkSpec spec = NetworkSpec::parse(dump_spec);
      const Network<float> net = load_checkpoint(layout::checkpoint(config.out, spec), spec);
      const std::filesystem::path dir = dump_dir ? std::filesystem::path(*dump_dir) : config.out / ("activations_" + spec.stem());
      const auto files = dump_activations(net, load_image(image_path), dir);
      std::cout << "dump-activations: " << files.size() << " maps -> " << dir.string() << "\n";
    } else if (grad_cmd->parsed()) {
      GradCheckOptions options;
      options.seeds = grad_seeds;
      const auto results = run_gradient_suite(options);
      double worst = 0.0;
      std::size_t checked = 0;
      std::size_t skipped = 0;
      for (const auto& r : results) {
        if (verbose) {
          std::cerr << r.name << " max " << r.max_error << " checked " << r.checked << " skipped " << r.skipped << "\n";
        }
        if (!r.passed) {
          throw Error("gradcheck: " + r.name + " max relative error " + std::to_string(r.max_error) +
                      " exceeds tolerance over " + std::to_string(r.checked) + " coordinates");
        }
        worst = std::max(worst, r.max_error);
        checked += r.checked;
        skipped += r.skipped;
      }
      std::cout << "gradcheck: " << results.size() << " checks passed, max relative error " << worst << ", "
                << checked << " coordinates, " << skipped << " skipped at kinks\n";
    } else if (synth_cmd->parsed()) {
      if (config.corpus.empty()) throw Error("synth needs --corpus");
      SyntheticOptions options;
      options.per_class = per_class;
      options.seed = config.seed;
      const DatasetManifest m = write_synthetic_corpus(config.corpus, options);
      std::cout << "synth: " << m.entries.size() << " images -> " << config.corpus.string() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
