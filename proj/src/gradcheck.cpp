#include "sfuse/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "sfuse/dataset.hpp"
#include "sfuse/network.hpp"
#include "sfuse/ops.hpp"

namespace sfuse {
namespace {

using Objective = std::function<double(const TensorD&)>;
using Pattern = std::function<std::uint64_t(const TensorD&)>;

TensorD random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  TensorD t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// probe objective, accumulated in extended precision
double dot(const TensorD& a, const TensorD& b) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i]) * static_cast<long double>(b[i]);
  return static_cast<double>(s);
}

std::uint64_t hash_values(std::span<const std::uint32_t> v) {
  std::uint64_t h = 1469598103934665603ULL;
  for (auto x : v) h = (h ^ x) * 1099511628211ULL;
  return h;
}

std::uint64_t sign_pattern(const TensorD& x) {
  std::uint64_t h = 1469598103934665603ULL;
  for (double v : x.values()) h = (h ^ (v > 0.0 ? 1u : 0u)) * 1099511628211ULL;
  return h;
}

// Checks d(objective)/d(x) at the listed coordinates (all when empty).
void check(GradCheckResult& r, TensorD x, const TensorD& analytic, const Objective& objective,
           const Pattern& pattern, const GradCheckOptions& opt, std::vector<std::size_t> coords = {}) {
  if (coords.empty()) {
    coords.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) coords[i] = i;
  }
  const std::uint64_t base = pattern ? pattern(x) : 0;
  for (std::size_t i : coords) {
    const double orig = x[i];
    x[i] = orig + opt.step;
    const double up = objective(x);
    const bool up_same = !pattern || pattern(x) == base;
    x[i] = orig - opt.step;
    const double down = objective(x);
    const bool down_same = !pattern || pattern(x) == base;
    x[i] = orig;
    if (!up_same || !down_same) {
      ++r.skipped;
      continue;
    }
    const double numeric = (up - down) / (2.0 * opt.step);
    r.max_error = std::max(r.max_error, relative_error(analytic[i], numeric, opt.floor));
    ++r.checked;
  }
}

void check_conv(GradCheckResult& r, Rng& rng, std::size_t seed, const GradCheckOptions& opt) {
  const std::size_t k = seed % 2 ? 5 : 3;
  const TensorD x = random_tensor({2, 3, 8, 8}, rng);
  const TensorD w = random_tensor({4, 3, k, k}, rng);
  const TensorD b = random_tensor({4}, rng);
  const TensorD up = random_tensor({2, 4, 8, 8}, rng);
  const std::size_t pad = k / 2;
  const ConvGrads<double> g = conv2d_backward(x, w, pad, up);
  check(r, x, g.input, [&](const TensorD& v) { return dot(up, conv2d(v, w, b, pad)); }, {}, opt);
  check(r, w, g.kernels, [&](const TensorD& v) { return dot(up, conv2d(x, v, b, pad)); }, {}, opt);
  check(r, b, g.bias, [&](const TensorD& v) { return dot(up, conv2d(x, w, v, pad)); }, {}, opt);
}

void check_pool(GradCheckResult& r, Rng& rng, const GradCheckOptions& opt) {
  const TensorD x = random_tensor({2, 4, 8, 8}, rng);
  const TensorD up = random_tensor({2, 4, 4, 4}, rng);
  const PoolResult<double> p = maxpool2d_indexed(x);
  const TensorD g = maxpool2d_backward(x.shape(), p.argmax, up);
  check(r, x, g, [&](const TensorD& v) { return dot(up, maxpool2d(v)); },
        [](const TensorD& v) { return hash_values(maxpool2d_indexed(v).argmax); }, opt);
}

void check_dense(GradCheckResult& r, Rng& rng, const GradCheckOptions& opt) {
  const TensorD x = random_tensor({3, 16}, rng);
  const TensorD w = random_tensor({5, 16}, rng);
  const TensorD b = random_tensor({5}, rng);
  const TensorD up = random_tensor({3, 5}, rng);
  const DenseGrads<double> g = dense_backward(x, w, up);
  check(r, x, g.input, [&](const TensorD& v) { return dot(up, dense(v, w, b)); }, {}, opt);
  check(r, w, g.weights, [&](const TensorD& v) { return dot(up, dense(x, v, b)); }, {}, opt);
  check(r, b, g.bias, [&](const TensorD& v) { return dot(up, dense(x, w, v)); }, {}, opt);
}

void check_relu(GradCheckResult& r, Rng& rng, const GradCheckOptions& opt) {
  const TensorD x = random_tensor({2, 4, 8, 8}, rng);
  const TensorD up = random_tensor({2, 4, 8, 8}, rng);
  check(r, x, relu_backward(x, up), [&](const TensorD& v) { return dot(up, relu(v)); }, sign_pattern, opt);
}

void check_dropout(GradCheckResult& r, Rng& rng, const GradCheckOptions& opt) {
  const TensorD x = random_tensor({2, 4, 8, 8}, rng);
  const TensorD up = random_tensor({2, 4, 8, 8}, rng);
  const std::uint64_t mask_seed = rng.next();
  auto run = [&](const TensorD& v) {
    Rng mask(mask_seed);
    return dropout(v, 0.5, Mode::train, mask);
  };
  const DropoutResult<double> d = run(x);
  check(r, x, dropout_backward(d.scale, up), [&](const TensorD& v) { return dot(up, run(v).output); }, {}, opt);
}

void check_softmax(GradCheckResult& r, Rng& rng, const GradCheckOptions& opt) {
  const TensorD z = random_tensor({3, kNumClasses}, rng, -3.0, 3.0);
  std::vector<int> labels;
  for (int i = 0; i < 3; ++i) labels.push_back(static_cast<int>(rng.below(kNumClasses)));
  const SoftmaxLoss<double> s = softmax_cross_entropy(z, labels);
  check(r, z, softmax_cross_entropy_backward(s.probabilities, labels),
        [&](const TensorD& v) { return softmax_cross_entropy(v, labels).loss; }, {}, opt);
}

void check_network(GradCheckResult& r, Rng& rng, std::size_t seed, const GradCheckOptions& opt) {
  Network<double> net = Network<double>::build({Domain::spatial, 32, 2}, 1000 + seed);
  const TensorD batch = random_tensor({2, 1, 32, 32}, rng, 0.0, 1.0);
  std::vector<int> labels = {static_cast<int>(rng.below(kNumClasses)), static_cast<int>(rng.below(kNumClasses))};
  const std::uint64_t dropout_seed = rng.next();

  struct Eval {
    double loss;
    std::uint64_t pattern;
  };
  auto evaluate = [&](bool differentiate) {
    Tape<double> tape;
    Rng drop(dropout_seed);
    const ForwardPass pass = net.record(tape, batch, Mode::train, drop);
    const Var loss = tape.softmax_cross_entropy(pass.logits, labels);
    Eval e{tape.value(loss)[0], tape.activation_pattern()};
    std::vector<TensorD> grads;
    if (differentiate) {
      tape.backward(loss);
      for (Var v : pass.parameters) grads.push_back(tape.grad(v));
    }
    return std::pair{e, grads};
  };
  const auto [base, grads] = evaluate(true);

  for (std::size_t p = 0; p < net.parameters().size(); ++p) {
    TensorD& param = net.parameters()[p].value;
    for (std::size_t s = 0; s < opt.network_samples_per_tensor; ++s) {
      const std::size_t i = rng.below(param.size());
      const double orig = param[i];
      param[i] = orig + opt.step;
      const Eval up = evaluate(false).first;
      param[i] = orig - opt.step;
      const Eval down = evaluate(false).first;
      param[i] = orig;
      if (up.pattern != base.pattern || down.pattern != base.pattern) {
        ++r.skipped;
        continue;
      }
      const double numeric = (up.loss - down.loss) / (2.0 * opt.step);
      r.max_error = std::max(r.max_error, relative_error(grads[p][i], numeric, opt.floor));
      ++r.checked;
    }
  }
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

std::vector<GradCheckResult> run_gradient_suite(const GradCheckOptions& options) {
  std::vector<GradCheckResult> results = {{"conv2d"}, {"maxpool2d"}, {"dense"},  {"relu"},
                                          {"dropout"}, {"softmax_cross_entropy"}, {"network s,32,2"}};
  for (std::size_t seed = 0; seed < options.seeds; ++seed) {
    Rng rng(mix_seed(0x6C4EC, seed));
    check_conv(results[0], rng, seed, options);
    check_pool(results[1], rng, options);
    check_dense(results[2], rng, options);
    check_relu(results[3], rng, options);
    check_dropout(results[4], rng, options);
    check_softmax(results[5], rng, options);
    check_network(results[6], rng, seed, options);
  }
  for (auto& r : results) r.passed = r.checked > 0 && r.max_error < options.tolerance;
  return results;
}

}  // namespace sfuse
