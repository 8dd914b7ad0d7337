#pragma once

#include <stdexcept>

#include "dqnf/network.hpp"

namespace dqnf {

/// Raised when training produces non-finite numbers; the harness marks the
/// run as diverged and keeps going with the remaining seeds.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// RMSprop accumulator state, one squared-gradient running average per
/// parameter tensor.
template <typename T>
struct OptState {
  std::vector<Tensor<T>> sq_avg_w;
  std::vector<Tensor<T>> sq_avg_b;
  long step = 0;
  double alpha = 0.99;
  double eps = 1e-8;
};

template <typename T>
OptState<T> init_opt_state(const NetworkParams<T>& params);

/// One RMSprop update:
///   g' = g + weight_decay * theta
///   v  = alpha * v + (1 - alpha) * g'^2
///   theta -= lr * g' / sqrt(v + eps)
/// Throws DivergenceError on non-finite gradient entries.
template <typename T>
void rmsprop_step(NetworkParams<T>& params, const Gradients<T>& grads, OptState<T>& opt,
                  double lr, double weight_decay);

/// Exponential interpolation from lr_start at step 0 to lr_end at
/// total_steps; total_steps == 0 yields lr_start.
double lr_schedule(long step, long total_steps, double lr_start, double lr_end);

}  // namespace dqnf
