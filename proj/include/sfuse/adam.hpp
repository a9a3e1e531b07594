#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sfuse/tensor.hpp"

namespace sfuse {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

/// Moment estimates for a list of parameter tensors plus the shared step count.
template <class T>
struct AdamState {
  std::vector<BasicTensor<T>> m;
  std::vector<BasicTensor<T>> v;
  std::uint64_t t = 0;

  static AdamState zeros_like(std::span<const BasicTensor<T>> params);
};

/// One bias-corrected Adam update, in place. `names` labels the parameters in
/// diagnostics and may be empty.
///
///   m <- b1 m + (1-b1) g          m_hat = m / (1 - b1^t)
///   v <- b2 v + (1-b2) g^2        v_hat = v / (1 - b2^t)
///   w <- w - lr m_hat / (sqrt(v_hat) + eps)
///
/// Non-finite gradients are rejected before any parameter is touched.
template <class T>
void adam_step(std::span<BasicTensor<T>* const> params, std::span<const BasicTensor<T>* const> grads,
               AdamState<T>& state, const AdamConfig& config, std::span<const std::string> names = {});

}  // namespace sfuse
