#include "sfuse/tape.hpp"

#include <bit>

namespace sfuse {

template <class T>
const typename Tape<T>::Node& Tape<T>::node(Var v, const char* op) const {
  if (v.id >= nodes_.size()) {
    throw Error(std::string(op) + ": variable " + std::to_string(v.id) + " is not recorded on this tape");
  }
  return nodes_[v.id];
}

template <class T>
Var Tape<T>::push(Node n) {
  if (differentiated_) throw Error("tape: cannot record after backward()");
  for (Var in : n.inputs) n.requires_grad = n.requires_grad || nodes_[in.id].requires_grad;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

template <class T>
void Tape<T>::accumulate(Var target, BasicTensor<T> g) {
  Node& n = nodes_[target.id];
  if (!n.requires_grad) return;
  if (n.grad.empty()) {
    n.grad = std::move(g);
    return;
  }
  for (std::size_t i = 0; i < g.size(); ++i) n.grad[i] += g[i];
}

template <class T>
Var Tape<T>::input(BasicTensor<T> value) {
  Node n{Kind::input, std::move(value)};
  return push(std::move(n));
}

template <class T>
Var Tape<T>::parameter(const BasicTensor<T>& value) {
  Node n{Kind::parameter};
  n.external = &value;
  n.requires_grad = true;
  return push(std::move(n));
}

template <class T>
Var Tape<T>::conv2d(Var input, Var kernels, Var bias, std::size_t pad) {
  Node n{Kind::conv, sfuse::conv2d(node(input, "conv2d").value(), node(kernels, "conv2d").value(),
                                   node(bias, "conv2d").value(), pad)};
  n.inputs = {input, kernels, bias};
  n.backprop = [input, kernels, bias, pad](Tape& t, const BasicTensor<T>& g) {
    const bool want_input = t.nodes_[input.id].requires_grad;
    ConvGrads<T> grads =
        conv2d_backward(t.nodes_[input.id].value(), t.nodes_[kernels.id].value(), pad, g, want_input);
    if (want_input) t.accumulate(input, std::move(grads.input));
    t.accumulate(kernels, std::move(grads.kernels));
    t.accumulate(bias, std::move(grads.bias));
  };
  return push(std::move(n));
}

template <class T>
Var Tape<T>::maxpool2d(Var input) {
  PoolResult<T> r = maxpool2d_indexed(node(input, "maxpool2d").value());
  Node n{Kind::pool, std::move(r.output)};
  n.routes = std::move(r.argmax);
  n.inputs = {input};
  const std::size_t self = nodes_.size();
  n.backprop = [input, self](Tape& t, const BasicTensor<T>& g) {
    t.accumulate(input, maxpool2d_backward(t.nodes_[input.id].value().shape(), t.nodes_[self].routes, g));
  };
  return push(std::move(n));
}

template <class T>
Var Tape<T>::dense(Var input, Var weights, Var bias) {
  Node n{Kind::dense, sfuse::dense(node(input, "dense").value(), node(weights, "dense").value(),
                                   node(bias, "dense").value())};
  n.inputs = {input, weights, bias};
  n.backprop = [input, weights, bias](Tape& t, const BasicTensor<T>& g) {
    const bool want_input = t.nodes_[input.id].requires_grad;
    DenseGrads<T> grads = dense_backward(t.nodes_[input.id].value(), t.nodes_[weights.id].value(), g, want_input);
    if (want_input) t.accumulate(input, std::move(grads.input));
    t.accumulate(weights, std::move(grads.weights));
    t.accumulate(bias, std::move(grads.bias));
  };
  return push(std::move(n));
}

template <class T>
Var Tape<T>::relu(Var input) {
  Node n{Kind::relu, sfuse::relu(node(input, "relu").value())};
  n.inputs = {input};
  n.backprop = [input](Tape& t, const BasicTensor<T>& g) {
    t.accumulate(input, relu_backward(t.nodes_[input.id].value(), g));
  };
  return push(std::move(n));
}

template <class T>
Var Tape<T>::dropout(Var input, double p, Mode mode, Rng& rng) {
  DropoutResult<T> r = sfuse::dropout(node(input, "dropout").value(), p, mode, rng);
  Node n{Kind::dropout, std::move(r.output)};
  n.aux = std::move(r.scale);
  n.inputs = {input};
  const std::size_t self = nodes_.size();
  n.backprop = [input, self](Tape& t, const BasicTensor<T>& g) {
    t.accumulate(input, dropout_backward(t.nodes_[self].aux, g));
  };
  return push(std::move(n));
}

template <class T>
Var Tape<T>::softmax_cross_entropy(Var logits, std::vector<int> labels) {
  SoftmaxLoss<T> r = sfuse::softmax_cross_entropy(node(logits, "softmax_cross_entropy").value(), labels);
  Node n{Kind::loss, BasicTensor<T>({1}, r.loss)};
  n.aux = std::move(r.probabilities);
  n.inputs = {logits};
  const std::size_t self = nodes_.size();
  n.backprop = [logits, self, labels = std::move(labels)](Tape& t, const BasicTensor<T>& g) {
    t.accumulate(logits, softmax_cross_entropy_backward(t.nodes_[self].aux, labels, g[0]));
  };
  return push(std::move(n));
}

template <class T>
const BasicTensor<T>& Tape<T>::value(Var v) const {
  return node(v, "value").value();
}

template <class T>
const BasicTensor<T>& Tape<T>::probabilities(Var loss) const {
  const Node& n = node(loss, "probabilities");
  if (n.kind != Kind::loss) throw Error("probabilities: variable " + std::to_string(loss.id) + " is not a loss");
  return n.aux;
}

template <class T>
void Tape<T>::backward(Var loss, T seed) {
  if (nodes_.empty()) throw Error("backward: no forward pass has been recorded");
  const Node& root = node(loss, "backward");
  if (root.value().size() != 1) {
    throw Error("backward: loss must be a scalar, got shape " + to_string(root.value().shape()));
  }
  if (differentiated_) throw Error("backward: tape has already been differentiated");
  differentiated_ = true;

  nodes_[loss.id].grad = BasicTensor<T>(root.value().shape(), seed);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.kind == Kind::parameter) continue;
    if (!n.grad.empty() && n.backprop) {
      BasicTensor<T> g = std::move(n.grad);
      n.grad = BasicTensor<T>();
      n.backprop(*this, g);
    }
    n.grad = BasicTensor<T>();
  }
  for (Node& n : nodes_) {
    if (n.kind == Kind::parameter && n.grad.empty()) n.grad = BasicTensor<T>(n.value().shape());
  }
}

template <class T>
const BasicTensor<T>& Tape<T>::grad(Var parameter) const {
  const Node& n = node(parameter, "grad");
  if (n.kind != Kind::parameter) {
    throw Error("grad: variable " + std::to_string(parameter.id) + " is not a parameter");
  }
  if (!differentiated_) throw Error("grad: backward() has not been run");
  return n.grad;
}

template <class T>
std::uint64_t Tape<T>::activation_pattern() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 1099511628211ULL;
  };
  for (const Node& n : nodes_) {
    if (n.kind == Kind::relu) {
      for (T v : nodes_[n.inputs[0].id].value().values()) mix(v > T{} ? 1 : 0);
    } else if (n.kind == Kind::pool) {
      for (std::uint32_t r : n.routes) mix(r);
    }
  }
  return h;
}

template class Tape<float>;
template class Tape<double>;

}  // namespace sfuse
