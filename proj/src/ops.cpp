#include "sfuse/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace sfuse {
namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapMat = Eigen::Map<RowMat<T>>;
template <class T>
using CMapMat = Eigen::Map<const RowMat<T>>;

struct ImageDims {
  std::size_t batch;
  std::size_t channels;
  std::size_t height;
  std::size_t width;
  bool batched;
};

ImageDims image_dims(const Shape& s, const char* op) {
  if (s.size() == 3) return {1, s[0], s[1], s[2], false};
  if (s.size() == 4) return {s[0], s[1], s[2], s[3], true};
  throw Error(std::string(op) + ": expected [C,H,W] or [N,C,H,W], got " + to_string(s));
}

Shape image_shape(const ImageDims& d, std::size_t channels, std::size_t h, std::size_t w) {
  if (d.batched) return {d.batch, channels, h, w};
  return {channels, h, w};
}

// Rows of the batch: [n] is one row, [N,...] is N rows of the flattened tail.
std::pair<std::size_t, std::size_t> rows_cols(const Shape& s) {
  if (s.size() == 1) return {1, s[0]};
  return {s[0], element_count(s) / s[0]};
}

// col[(c*k + ki)*k + kj][y*W + x] = in[c][y + ki - pad][x + kj - pad], zero outside.
template <class T>
void im2col(const T* in, std::size_t channels, std::size_t h, std::size_t w, std::size_t k, std::size_t pad,
            T* col) {
  const std::ptrdiff_t H = static_cast<std::ptrdiff_t>(h);
  const std::ptrdiff_t W = static_cast<std::ptrdiff_t>(w);
  const std::ptrdiff_t P = static_cast<std::ptrdiff_t>(pad);
  for (std::size_t c = 0; c < channels; ++c) {
    const T* plane = in + c * h * w;
    for (std::size_t ki = 0; ki < k; ++ki) {
      for (std::size_t kj = 0; kj < k; ++kj) {
        T* row = col + ((c * k + ki) * k + kj) * h * w;
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ki) - P;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kj) - P;
        const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
        const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(W, W - dx);
        for (std::ptrdiff_t y = 0; y < H; ++y) {
          T* out = row + y * W;
          const std::ptrdiff_t iy = y + dy;
          if (iy < 0 || iy >= H || x1 <= x0) {
            std::fill(out, out + W, T{});
            continue;
          }
          std::fill(out, out + x0, T{});
          std::memcpy(out + x0, plane + iy * W + x0 + dx, static_cast<std::size_t>(x1 - x0) * sizeof(T));
          std::fill(out + x1, out + W, T{});
        }
      }
    }
  }
}

template <class T>
void col2im(const T* col, std::size_t channels, std::size_t h, std::size_t w, std::size_t k, std::size_t pad,
            T* out) {
  const std::ptrdiff_t H = static_cast<std::ptrdiff_t>(h);
  const std::ptrdiff_t W = static_cast<std::ptrdiff_t>(w);
  const std::ptrdiff_t P = static_cast<std::ptrdiff_t>(pad);
  std::fill(out, out + channels * h * w, T{});
  for (std::size_t c = 0; c < channels; ++c) {
    T* plane = out + c * h * w;
    for (std::size_t ki = 0; ki < k; ++ki) {
      for (std::size_t kj = 0; kj < k; ++kj) {
        const T* row = col + ((c * k + ki) * k + kj) * h * w;
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ki) - P;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kj) - P;
        const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
        const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(W, W - dx);
        for (std::ptrdiff_t y = 0; y < H; ++y) {
          const std::ptrdiff_t iy = y + dy;
          if (iy < 0 || iy >= H) continue;
          const T* src = row + y * W;
          T* dst = plane + iy * W + dx;
          for (std::ptrdiff_t x = x0; x < x1; ++x) dst[x] += src[x];
        }
      }
    }
  }
}

template <class T>
void check_conv_shapes(const ImageDims& d, const BasicTensor<T>& kernels, const BasicTensor<T>* bias,
                       std::size_t pad, const Shape& input_shape) {
  if (kernels.rank() != 4 || kernels.dim(2) != kernels.dim(3)) {
    throw Error("conv2d: kernels must be [C_out,C_in,k,k], got " + to_string(kernels.shape()));
  }
  if (kernels.dim(1) != d.channels) {
    throw Error("conv2d: input " + to_string(input_shape) + " has " + std::to_string(d.channels) +
                " channels but kernels " + to_string(kernels.shape()) + " expect " +
                std::to_string(kernels.dim(1)));
  }
  const std::size_t k = kernels.dim(2);
  if (k % 2 == 0 || pad != k / 2) {
    throw Error("conv2d: kernel size " + std::to_string(k) + " with pad " + std::to_string(pad) +
                " is not an odd same-size convolution");
  }
  if (bias && (bias->rank() != 1 || bias->dim(0) != kernels.dim(0))) {
    throw Error("conv2d: bias " + to_string(bias->shape()) + " does not match kernels " +
                to_string(kernels.shape()));
  }
}

}  // namespace

template <class T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernels, const BasicTensor<T>& bias,
                      std::size_t pad) {
  const ImageDims d = image_dims(input.shape(), "conv2d");
  check_conv_shapes(d, kernels, &bias, pad, input.shape());
  const std::size_t k = kernels.dim(2);
  const std::size_t cout = kernels.dim(0);
  const std::size_t hw = d.height * d.width;
  const std::size_t patch = d.channels * k * k;

  BasicTensor<T> output(image_shape(d, cout, d.height, d.width));
  AlignedVector<T> col(patch * hw);
  CMapMat<T> wm(kernels.data(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(patch));
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(bias.data(), static_cast<Eigen::Index>(cout));
  for (std::size_t n = 0; n < d.batch; ++n) {
    im2col(input.data() + n * d.channels * hw, d.channels, d.height, d.width, k, pad, col.data());
    CMapMat<T> cm(col.data(), static_cast<Eigen::Index>(patch), static_cast<Eigen::Index>(hw));
    MapMat<T> ym(output.data() + n * cout * hw, static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(hw));
    ym.noalias() = wm * cm;
    ym.colwise() += b;
  }
  return output;
}

template <class T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& kernels, std::size_t pad,
                             const BasicTensor<T>& grad_output, bool want_input_grad) {
  const ImageDims d = image_dims(input.shape(), "conv2d_backward");
  check_conv_shapes<T>(d, kernels, nullptr, pad, input.shape());
  const std::size_t k = kernels.dim(2);
  const std::size_t cout = kernels.dim(0);
  const std::size_t hw = d.height * d.width;
  const std::size_t patch = d.channels * k * k;
  if (grad_output.shape() != image_shape(d, cout, d.height, d.width)) {
    throw Error("conv2d_backward: upstream gradient " + to_string(grad_output.shape()) +
                " does not match output shape");
  }

  ConvGrads<T> g;
  g.kernels = BasicTensor<T>(kernels.shape());
  g.bias = BasicTensor<T>({cout});
  if (want_input_grad) g.input = BasicTensor<T>(input.shape());

  AlignedVector<T> col(patch * hw);
  AlignedVector<T> dcol(want_input_grad ? patch * hw : 0);
  CMapMat<T> wm(kernels.data(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(patch));
  MapMat<T> dw(g.kernels.data(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(patch));
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> db(g.bias.data(), static_cast<Eigen::Index>(cout));
  for (std::size_t n = 0; n < d.batch; ++n) {
    im2col(input.data() + n * d.channels * hw, d.channels, d.height, d.width, k, pad, col.data());
    CMapMat<T> cm(col.data(), static_cast<Eigen::Index>(patch), static_cast<Eigen::Index>(hw));
    CMapMat<T> dy(grad_output.data() + n * cout * hw, static_cast<Eigen::Index>(cout),
                  static_cast<Eigen::Index>(hw));
    dw.noalias() += dy * cm.transpose();
    db += dy.rowwise().sum();
    if (want_input_grad) {
      MapMat<T> dc(dcol.data(), static_cast<Eigen::Index>(patch), static_cast<Eigen::Index>(hw));
      dc.noalias() = wm.transpose() * dy;
      col2im(dcol.data(), d.channels, d.height, d.width, k, pad, g.input.data() + n * d.channels * hw);
    }
  }
  return g;
}

template <class T>
PoolResult<T> maxpool2d_indexed(const BasicTensor<T>& input) {
  const ImageDims d = image_dims(input.shape(), "maxpool2d");
  if (d.height % 2 || d.width % 2) {
    throw Error("maxpool2d: spatial size " + std::to_string(d.height) + "x" + std::to_string(d.width) +
                " is not even");
  }
  const std::size_t oh = d.height / 2;
  const std::size_t ow = d.width / 2;
  PoolResult<T> r{BasicTensor<T>(image_shape(d, d.channels, oh, ow)), {}};
  r.argmax.resize(r.output.size());
  const T* in = input.data();
  T* out = r.output.data();
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < d.batch * d.channels; ++plane) {
    const std::size_t base = plane * d.height * d.width;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x, ++o) {
        const std::size_t top = base + 2 * y * d.width + 2 * x;
        const std::size_t cand[4] = {top, top + 1, top + d.width, top + d.width + 1};
        std::size_t best = cand[0];
        for (int i = 1; i < 4; ++i) {
          if (in[cand[i]] > in[best]) best = cand[i];
        }
        out[o] = in[best];
        r.argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return r;
}

template <class T>
BasicTensor<T> maxpool2d_backward(const Shape& input_shape, std::span<const std::uint32_t> argmax,
                                  const BasicTensor<T>& grad_output) {
  if (argmax.size() != grad_output.size()) {
    throw Error("maxpool2d_backward: " + std::to_string(argmax.size()) + " routes for " +
                std::to_string(grad_output.size()) + " upstream values");
  }
  BasicTensor<T> grad(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) grad[argmax[i]] += grad_output[i];
  return grad;
}

template <class T>
BasicTensor<T> dense(const BasicTensor<T>& input, const BasicTensor<T>& weights, const BasicTensor<T>& bias) {
  if (weights.rank() != 2) throw Error("dense: weights must be [m,n], got " + to_string(weights.shape()));
  const auto [rows, n] = rows_cols(input.shape());
  const std::size_t m = weights.dim(0);
  if (n != weights.dim(1)) {
    throw Error("dense: input " + to_string(input.shape()) + " flattens to length " + std::to_string(n) +
                " but weights " + to_string(weights.shape()) + " expect " + std::to_string(weights.dim(1)));
  }
  if (bias.rank() != 1 || bias.dim(0) != m) {
    throw Error("dense: bias " + to_string(bias.shape()) + " does not match weights " +
                to_string(weights.shape()));
  }
  BasicTensor<T> output(input.rank() == 1 ? Shape{m} : Shape{rows, m});
  CMapMat<T> x(input.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n));
  CMapMat<T> w(weights.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  MapMat<T> y(output.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(m));
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias.data(), static_cast<Eigen::Index>(m));
  y.noalias() = x * w.transpose();
  y.rowwise() += b;
  return output;
}

template <class T>
DenseGrads<T> dense_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                             const BasicTensor<T>& grad_output, bool want_input_grad) {
  const auto [rows, n] = rows_cols(input.shape());
  const std::size_t m = weights.dim(0);
  if (n != weights.dim(1) || grad_output.size() != rows * m) {
    throw Error("dense_backward: shapes input " + to_string(input.shape()) + ", weights " +
                to_string(weights.shape()) + ", upstream " + to_string(grad_output.shape()) + " disagree");
  }
  DenseGrads<T> g{{}, BasicTensor<T>(weights.shape()), BasicTensor<T>({m})};
  CMapMat<T> x(input.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n));
  CMapMat<T> w(weights.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  CMapMat<T> dy(grad_output.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(m));
  MapMat<T> dw(g.weights.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  dw.noalias() = dy.transpose() * x;
  Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> db(g.bias.data(), static_cast<Eigen::Index>(m));
  db = dy.colwise().sum();
  if (want_input_grad) {
    g.input = BasicTensor<T>(input.shape());
    MapMat<T> dx(g.input.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n));
    dx.noalias() = dy * w;
  }
  return g;
}

template <class T>
BasicTensor<T> relu(const BasicTensor<T>& input) {
  BasicTensor<T> out = input;
  for (T& v : out.values()) v = v > T{} ? v : T{};
  return out;
}

template <class T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_output) {
  if (input.shape() != grad_output.shape()) {
    throw Error("relu_backward: input " + to_string(input.shape()) + " vs upstream " +
                to_string(grad_output.shape()));
  }
  BasicTensor<T> g(input.shape());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = input[i] > T{} ? grad_output[i] : T{};
  return g;
}

template <class T>
DropoutResult<T> dropout(const BasicTensor<T>& input, double p, Mode mode, Rng& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error("dropout: probability " + std::to_string(p) + " outside [0,1]");
  if (mode == Mode::eval || p == 0.0) return {input, {}};
  if (p == 1.0) throw Error("dropout: probability 1 in train mode would divide by zero");
  DropoutResult<T> r{BasicTensor<T>(input.shape()), BasicTensor<T>(input.shape())};
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  for (std::size_t i = 0; i < input.size(); ++i) {
    const T s = rng.uniform() < p ? T{} : keep_scale;
    r.scale[i] = s;
    r.output[i] = input[i] * s;
  }
  return r;
}

template <class T>
BasicTensor<T> dropout_backward(const BasicTensor<T>& scale, const BasicTensor<T>& grad_output) {
  if (scale.empty()) return grad_output;
  BasicTensor<T> g(grad_output.shape());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = grad_output[i] * scale[i];
  return g;
}

template <class T>
SoftmaxLoss<T> softmax_cross_entropy(const BasicTensor<T>& logits, std::span<const int> labels) {
  const auto [rows, classes] = rows_cols(logits.shape());
  if (labels.size() != rows) {
    throw Error("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(rows) +
                " rows of logits");
  }
  SoftmaxLoss<T> r{T{}, BasicTensor<T>(logits.shape())};
  double total = 0.0;
  for (std::size_t n = 0; n < rows; ++n) {
    const int label = labels[n];
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw Error("softmax_cross_entropy: label " + std::to_string(label) + " outside [0," +
                  std::to_string(classes) + ")");
    }
    const T* z = logits.data() + n * classes;
    T* p = r.probabilities.data() + n * classes;
    const T zmax = *std::max_element(z, z + classes);
    T sum{};
    for (std::size_t c = 0; c < classes; ++c) {
      p[c] = std::exp(z[c] - zmax);
      sum += p[c];
    }
    for (std::size_t c = 0; c < classes; ++c) p[c] /= sum;
    total += static_cast<double>(std::log(sum) - (z[label] - zmax));
  }
  r.loss = static_cast<T>(total / static_cast<double>(rows));
  return r;
}

template <class T>
BasicTensor<T> softmax_cross_entropy_backward(const BasicTensor<T>& probabilities, std::span<const int> labels,
                                              T upstream) {
  const auto [rows, classes] = rows_cols(probabilities.shape());
  BasicTensor<T> g = probabilities;
  const T scale = upstream / static_cast<T>(rows);
  for (std::size_t n = 0; n < rows; ++n) {
    T* row = g.data() + n * classes;
    row[labels[n]] -= T{1};
    for (std::size_t c = 0; c < classes; ++c) row[c] *= scale;
  }
  return g;
}

#define SFUSE_INSTANTIATE_OPS(T)                                                                          \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,       \
                                 std::size_t);                                                              \
  template ConvGrads<T> conv2d_backward(const BasicTensor<T>&, const BasicTensor<T>&, std::size_t,          \
                                        const BasicTensor<T>&, bool);                                       \
  template PoolResult<T> maxpool2d_indexed(const BasicTensor<T>&);                                          \
  template BasicTensor<T> maxpool2d_backward(const Shape&, std::span<const std::uint32_t>,                  \
                                             const BasicTensor<T>&);                                        \
  template BasicTensor<T> dense(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);       \
  template DenseGrads<T> dense_backward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&, \
                                        bool);                                                              \
  template BasicTensor<T> relu(const BasicTensor<T>&);                                                      \
  template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);                      \
  template DropoutResult<T> dropout(const BasicTensor<T>&, double, Mode, Rng&);                             \
  template BasicTensor<T> dropout_backward(const BasicTensor<T>&, const BasicTensor<T>&);                   \
  template SoftmaxLoss<T> softmax_cross_entropy(const BasicTensor<T>&, std::span<const int>);               \
  template BasicTensor<T> softmax_cross_entropy_backward(const BasicTensor<T>&, std::span<const int>, T);

SFUSE_INSTANTIATE_OPS(float)
SFUSE_INSTANTIATE_OPS(double)

}  // namespace sfuse
