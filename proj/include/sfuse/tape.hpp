#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sfuse/ops.hpp"

namespace sfuse {

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = SIZE_MAX;
};

/// Reverse-mode record of one forward pass. Each primitive appends a node
/// holding its output and a closure that maps the output gradient to input
/// gradients. backward() replays the closures in reverse recording order.
/// Parameters are referenced, not copied, and must outlive the tape.
template <class T>
class Tape {
 public:
  Var input(BasicTensor<T> value);
  Var parameter(const BasicTensor<T>& value);

  Var conv2d(Var input, Var kernels, Var bias, std::size_t pad);
  Var maxpool2d(Var input);
  Var dense(Var input, Var weights, Var bias);
  Var relu(Var input);
  Var dropout(Var input, double p, Mode mode, Rng& rng);
  /// Scalar mean loss; the softmax probabilities stay available via probabilities().
  Var softmax_cross_entropy(Var logits, std::vector<int> labels);

  const BasicTensor<T>& value(Var v) const;
  const BasicTensor<T>& probabilities(Var loss) const;

  /// Propagates d(loss)/d(.) with the given seed. Gradients of intermediate
  /// values are released as soon as they have been consumed; parameter
  /// gradients are retained and read through grad(). A tape supports one
  /// backward pass.
  void backward(Var loss, T seed = T{1});
  const BasicTensor<T>& grad(Var parameter) const;

  std::size_t size() const { return nodes_.size(); }

  /// Hash of every ReLU sign pattern and max-pool route on the tape. Two
  /// forward passes with equal patterns lie in the same linear piece of the
  /// network, which is what a finite-difference check needs.
  std::uint64_t activation_pattern() const;

 private:
  enum class Kind { input, parameter, conv, pool, dense, relu, dropout, loss };

  using Backprop = std::function<void(Tape&, const BasicTensor<T>& grad_out)>;

  struct Node {
    Kind kind;
    BasicTensor<T> owned;
    const BasicTensor<T>* external = nullptr;
    std::vector<Var> inputs;
    bool requires_grad = false;
    BasicTensor<T> grad;
    BasicTensor<T> aux;                  // dropout scale or softmax probabilities
    std::vector<std::uint32_t> routes;   // max-pool argmax
    Backprop backprop;

    const BasicTensor<T>& value() const { return external ? *external : owned; }
  };

  const Node& node(Var v, const char* op) const;
  Var push(Node n);
  void accumulate(Var target, BasicTensor<T> g);

  std::vector<Node> nodes_;
  bool differentiated_ = false;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace sfuse
