#pragma once

#include <cstdint>
#include <vector>

#include "dqnf/layers.hpp"
#include "dqnf/tensor.hpp"

namespace dqnf {

/// Learnable state of a layer chain: one weight and one bias tensor per
/// layer (empty for parameterless layers) plus the seed used to draw them.
/// Two instances built from the same chain and seed are bit-identical.
template <typename T>
struct NetworkParams {
  std::vector<Tensor<T>> weights;
  std::vector<Tensor<T>> biases;
  std::uint64_t seed = 0;

  long scalar_count() const {
    long n = 0;
    for (const auto& w : weights) n += static_cast<long>(w.size());
    for (const auto& b : biases) n += static_cast<long>(b.size());
    return n;
  }
};

/// Same tensor structure as NetworkParams; holds d(loss)/d(parameter).
template <typename T>
struct Gradients {
  std::vector<Tensor<T>> weights;
  std::vector<Tensor<T>> biases;
};

/// Fan-in-scaled uniform initialization, deterministic in `seed`.
template <typename T>
NetworkParams<T> init_params(const LayerChain& chain, std::uint64_t seed);

template <typename T>
Gradients<T> zero_gradients(const NetworkParams<T>& params);

/// Everything backward() needs from a forward pass. `acts[0]` is the batched
/// input, `acts[i+1]` the output of layer i; conv layers keep their patch
/// matrices, pool layers their argmax indices.
template <typename T>
struct ForwardTrace {
  std::vector<Tensor<T>> acts;
  std::vector<Tensor<T>> conv_cols;
  std::vector<std::vector<int>> pool_argmax;
  int batch = 1;
  bool batched_input = false;
};

/// Runs the chain on `input`, which is either one sample (rank equal to the
/// chain's per-sample input rank) or a batch with a leading N dimension.
/// The output keeps the same convention. Pass `trace` to enable backward().
template <typename T>
Tensor<T> forward(const LayerChain& chain, const NetworkParams<T>& params,
                  const Tensor<T>& input, ForwardTrace<T>* trace = nullptr);

/// Parameter gradients for the forward pass recorded in `trace`, seeded with
/// d(loss)/d(output) in `output_grad` (same shape as the traced output).
/// If `input_grad` is non-null it receives d(loss)/d(input).
template <typename T>
Gradients<T> backward(const LayerChain& chain, const NetworkParams<T>& params,
                      const ForwardTrace<T>& trace, const Tensor<T>& output_grad,
                      Tensor<T>* input_grad = nullptr);

}  // namespace dqnf
