#include "sfuse/adam.hpp"

#include <cmath>

namespace sfuse {

void AdamConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error("adam: learning_rate must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw Error("adam: beta1 must lie in (0,1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw Error("adam: beta2 must lie in (0,1)");
  if (!(epsilon > 0.0)) throw Error("adam: epsilon must be positive");
}

template <class T>
AdamState<T> AdamState<T>::zeros_like(std::span<const BasicTensor<T>> params) {
  AdamState s;
  for (const auto& p : params) {
    s.m.emplace_back(p.shape());
    s.v.emplace_back(p.shape());
  }
  return s;
}

template <class T>
void adam_step(std::span<BasicTensor<T>* const> params, std::span<const BasicTensor<T>* const> grads,
               AdamState<T>& state, const AdamConfig& config, std::span<const std::string> names) {
  config.validate();
  auto label = [&](std::size_t i) { return i < names.size() ? names[i] : "parameter " + std::to_string(i); };
  if (params.size() != grads.size()) {
    throw Error("adam: " + std::to_string(params.size()) + " parameters but " + std::to_string(grads.size()) +
                " gradients");
  }
  if (state.m.empty() && state.t == 0) {
    for (const auto* p : params) {
      state.m.emplace_back(p->shape());
      state.v.emplace_back(p->shape());
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw Error("adam: state tracks " + std::to_string(state.m.size()) + " tensors, got " +
                std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Shape& s = params[i]->shape();
    if (grads[i]->shape() != s || state.m[i].shape() != s || state.v[i].shape() != s) {
      throw Error("adam: shape mismatch for " + label(i) + ": parameter " + to_string(s) + ", gradient " +
                  to_string(grads[i]->shape()));
    }
    if (!grads[i]->all_finite()) throw Error("adam: non-finite gradient in " + label(i));
  }

  state.t += 1;
  const double t = static_cast<double>(state.t);
  const T b1 = static_cast<T>(config.beta1);
  const T b2 = static_cast<T>(config.beta2);
  const T c1 = static_cast<T>(1.0 - config.beta1);
  const T c2 = static_cast<T>(1.0 - config.beta2);
  const T bias1 = static_cast<T>(1.0 - std::pow(config.beta1, t));
  const T bias2 = static_cast<T>(1.0 - std::pow(config.beta2, t));
  const T lr = static_cast<T>(config.learning_rate);
  const T eps = static_cast<T>(config.epsilon);

  for (std::size_t i = 0; i < params.size(); ++i) {
    T* w = params[i]->data();
    const T* g = grads[i]->data();
    T* m = state.m[i].data();
    T* v = state.v[i].data();
    const std::size_t n = params[i]->size();
    for (std::size_t j = 0; j < n; ++j) {
      m[j] = b1 * m[j] + c1 * g[j];
      v[j] = b2 * v[j] + c2 * g[j] * g[j];
      const T m_hat = m[j] / bias1;
      const T v_hat = v[j] / bias2;
      w[j] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step(std::span<BasicTensor<float>* const>, std::span<const BasicTensor<float>* const>,
                        AdamState<float>&, const AdamConfig&, std::span<const std::string>);
template void adam_step(std::span<BasicTensor<double>* const>, std::span<const BasicTensor<double>* const>,
                        AdamState<double>&, const AdamConfig&, std::span<const std::string>);

}  // namespace sfuse
