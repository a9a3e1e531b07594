#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sfuse/random.hpp"
#include "sfuse/tensor.hpp"

// Forward and backward kernels for the layer primitives. Every kernel accepts
// either a single sample or a batch whose leading axis is the sample index:
//   conv2d / maxpool2d : [C,H,W] or [N,C,H,W]
//   dense / softmax    : [n]     or [N,...] (trailing axes flattened)
// relu and dropout are elementwise and shape-agnostic.

namespace sfuse {

enum class Mode { train, eval };

/// "Same" cross-correlation, stride 1. pad must equal kernel/2 for odd kernels.
template <class T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernels, const BasicTensor<T>& bias,
                      std::size_t pad);

template <class T>
struct ConvGrads {
  BasicTensor<T> input;  // empty unless requested
  BasicTensor<T> kernels;
  BasicTensor<T> bias;
};

template <class T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& kernels, std::size_t pad,
                             const BasicTensor<T>& grad_output, bool want_input_grad = true);

template <class T>
struct PoolResult {
  BasicTensor<T> output;
  std::vector<std::uint32_t> argmax;  // flat input offset per output element
};

/// 2x2 max-pool, stride 2. Ties resolve to the first element in row-major
/// window order.
template <class T>
PoolResult<T> maxpool2d_indexed(const BasicTensor<T>& input);

template <class T>
BasicTensor<T> maxpool2d(const BasicTensor<T>& input) {
  return maxpool2d_indexed(input).output;
}

template <class T>
BasicTensor<T> maxpool2d_backward(const Shape& input_shape, std::span<const std::uint32_t> argmax,
                                  const BasicTensor<T>& grad_output);

template <class T>
BasicTensor<T> dense(const BasicTensor<T>& input, const BasicTensor<T>& weights, const BasicTensor<T>& bias);

template <class T>
struct DenseGrads {
  BasicTensor<T> input;
  BasicTensor<T> weights;
  BasicTensor<T> bias;
};

template <class T>
DenseGrads<T> dense_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                             const BasicTensor<T>& grad_output, bool want_input_grad = true);

template <class T>
BasicTensor<T> relu(const BasicTensor<T>& input);

template <class T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_output);

template <class T>
struct DropoutResult {
  BasicTensor<T> output;
  BasicTensor<T> scale;  // per-element multiplier (0 or 1/(1-p)); empty when identity
};

template <class T>
DropoutResult<T> dropout(const BasicTensor<T>& input, double p, Mode mode, Rng& rng);

template <class T>
BasicTensor<T> dropout_backward(const BasicTensor<T>& scale, const BasicTensor<T>& grad_output);

template <class T>
struct SoftmaxLoss {
  T loss;                        // mean over the batch
  BasicTensor<T> probabilities;  // same shape as the logits
};

/// Max-shifted softmax followed by mean negative log-likelihood of the labels.
template <class T>
SoftmaxLoss<T> softmax_cross_entropy(const BasicTensor<T>& logits, std::span<const int> labels);

/// Gradient of the mean loss w.r.t. the logits, scaled by the upstream scalar.
template <class T>
BasicTensor<T> softmax_cross_entropy_backward(const BasicTensor<T>& probabilities, std::span<const int> labels,
                                              T upstream = T{1});

}  // namespace sfuse
