#include "dqnf/optim.hpp"

#include <cmath>

namespace dqnf {

template <typename T>
OptState<T> init_opt_state(const NetworkParams<T>& params) {
  OptState<T> s;
  s.sq_avg_w.reserve(params.weights.size());
  s.sq_avg_b.reserve(params.biases.size());
  for (const auto& w : params.weights)
    s.sq_avg_w.push_back(w.shape.empty() ? Tensor<T>() : Tensor<T>(w.shape));
  for (const auto& b : params.biases)
    s.sq_avg_b.push_back(b.shape.empty() ? Tensor<T>() : Tensor<T>(b.shape));
  return s;
}

namespace {

template <typename T>
void rmsprop_tensor(Tensor<T>& theta, const Tensor<T>& grad, Tensor<T>& sq_avg, double lr,
                    double weight_decay, double alpha, double eps) {
  if (!theta.same_shape(grad) || !theta.same_shape(sq_avg))
    throw std::invalid_argument("rmsprop_step: gradient shape does not match parameters");
  const T a = static_cast<T>(alpha);
  const T one_minus_a = static_cast<T>(1.0 - alpha);
  const T wd = static_cast<T>(weight_decay);
  const T lrT = static_cast<T>(lr);
  const T epsT = static_cast<T>(eps);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const T g0 = grad.data[i];
    if (!std::isfinite(static_cast<double>(g0)))
      throw DivergenceError("rmsprop_step: non-finite gradient entry");
    const T g = g0 + wd * theta.data[i];
    T& v = sq_avg.data[i];
    v = a * v + one_minus_a * g * g;
    theta.data[i] -= lrT * g / std::sqrt(v + epsT);
  }
}

}  // namespace

template <typename T>
void rmsprop_step(NetworkParams<T>& params, const Gradients<T>& grads, OptState<T>& opt,
                  double lr, double weight_decay) {
  if (grads.weights.size() != params.weights.size() ||
      grads.biases.size() != params.biases.size() ||
      opt.sq_avg_w.size() != params.weights.size() ||
      opt.sq_avg_b.size() != params.biases.size())
    throw std::invalid_argument("rmsprop_step: structure mismatch");
  for (std::size_t i = 0; i < params.weights.size(); ++i) {
    if (params.weights[i].size() == 0) continue;
    rmsprop_tensor(params.weights[i], grads.weights[i], opt.sq_avg_w[i], lr, weight_decay,
                   opt.alpha, opt.eps);
    rmsprop_tensor(params.biases[i], grads.biases[i], opt.sq_avg_b[i], lr, weight_decay,
                   opt.alpha, opt.eps);
  }
  ++opt.step;
}

double lr_schedule(long step, long total_steps, double lr_start, double lr_end) {
  if (lr_start < lr_end || lr_end <= 0.0)
    throw std::invalid_argument("lr_schedule: need lr_start >= lr_end > 0");
  if (total_steps <= 0) return lr_start;
  if (step < 0 || step > total_steps)
    throw std::invalid_argument("lr_schedule: step out of [0, total_steps]");
  if (step == 0) return lr_start;
  if (step == total_steps) return lr_end;
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_start * std::pow(lr_end / lr_start, frac);
}

template struct OptState<float>;
template struct OptState<double>;
template OptState<float> init_opt_state<float>(const NetworkParams<float>&);
template OptState<double> init_opt_state<double>(const NetworkParams<double>&);
template void rmsprop_step<float>(NetworkParams<float>&, const Gradients<float>&,
                                  OptState<float>&, double, double);
template void rmsprop_step<double>(NetworkParams<double>&, const Gradients<double>&,
                                   OptState<double>&, double, double);

}  // namespace dqnf
