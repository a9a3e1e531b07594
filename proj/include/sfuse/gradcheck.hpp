#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace sfuse {

struct GradCheckOptions {
  std::size_t seeds = 20;
  double step = 1e-5;        // central-difference step
  double tolerance = 1e-6;   // on the relative error below
  double floor = 1e-3;       // denominator floor for near-zero gradients
  std::size_t network_samples_per_tensor = 3;
};

/// |analytic - numeric| / max(|analytic|, |numeric|, floor)
double relative_error(double analytic, double numeric, double floor);

struct GradCheckResult {
  std::string name;
  double max_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // coordinates whose +/- step crossed a ReLU or pooling kink
  bool passed = false;
};

/// Compares analytic gradients with central finite differences in double
/// precision for every layer primitive (conv2d, maxpool2d, dense, relu,
/// dropout, softmax cross-entropy) on random tensors of at most 4x8x8 per
/// sample, and for the composed (s,32,2) network on sampled parameters.
std::vector<GradCheckResult> run_gradient_suite(const GradCheckOptions& options = {});

}  // namespace sfuse
