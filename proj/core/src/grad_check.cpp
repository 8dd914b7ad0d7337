#include "dqnf/grad_check.hpp"

#include <cmath>

namespace dqnf {

namespace {

struct ProbeEval {
  double f = 0.0;
  std::vector<int> pattern;  // relu masks and pool argmax choices
};

/// Scalar under test plus the piecewise-linear region the evaluation landed
/// in. Central differences are only meaningful while the region is fixed.
ProbeEval probe_eval(const LayerChain& chain, const NetworkParams<double>& params,
                     const Tensor<double>& input, const Tensor<double>& out_weights) {
  ForwardTrace<double> trace;
  const Tensor<double> out = forward(chain, params, input, &trace);
  ProbeEval e;
  for (std::size_t i = 0; i < out.size(); ++i) e.f += out.data[i] * out_weights.data[i];
  for (std::size_t li = 0; li < chain.size(); ++li) {
    if (chain[li].kind != LayerKind::relu) continue;
    for (const double v : trace.acts[li + 1].data) e.pattern.push_back(v > 0.0 ? 1 : 0);
  }
  for (const auto& argmax : trace.pool_argmax)
    e.pattern.insert(e.pattern.end(), argmax.begin(), argmax.end());
  return e;
}

}  // namespace

double grad_check(const LayerChain& chain, const std::vector<int>& input_shape,
                  std::uint64_t seed, int n_coords, double fd_step) {
  NetworkParams<double> params = init_params<double>(chain, seed);
  Rng rng(mix_seed(seed, 0x6d0c));

  Tensor<double> input(input_shape);
  for (double& v : input.data) v = rng.uniform(-1.0, 1.0);

  ForwardTrace<double> trace;
  const Tensor<double> out = forward(chain, params, input, &trace);
  Tensor<double> out_weights(out.shape);
  for (double& v : out_weights.data) v = rng.uniform(-1.0, 1.0);

  const Gradients<double> analytic = backward(chain, params, trace, out_weights);
  const ProbeEval base = probe_eval(chain, params, input, out_weights);

  // flat index space over all parameter scalars
  struct Slot {
    bool is_weight;
    std::size_t layer;
    std::size_t offset;
  };
  std::vector<Slot> slots;
  for (std::size_t li = 0; li < params.weights.size(); ++li) {
    for (std::size_t o = 0; o < params.weights[li].size(); ++o)
      slots.push_back({true, li, o});
    for (std::size_t o = 0; o < params.biases[li].size(); ++o)
      slots.push_back({false, li, o});
  }

  double max_rel = 0.0;
  int kept = 0;
  long attempts = 0;
  const long attempt_cap = 50L * n_coords;
  while (kept < n_coords && attempts < attempt_cap) {
    ++attempts;
    const Slot& s = slots[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(slots.size())))];
    double& theta = s.is_weight ? params.weights[s.layer].data[s.offset]
                                : params.biases[s.layer].data[s.offset];
    const double saved = theta;
    theta = saved + fd_step;
    const ProbeEval plus = probe_eval(chain, params, input, out_weights);
    theta = saved - fd_step;
    const ProbeEval minus = probe_eval(chain, params, input, out_weights);
    theta = saved;

    // A relu mask or pool argmax flip inside [theta - h, theta + h] puts a
    // kink in the interval; the difference quotient no longer estimates the
    // one-sided derivative the backward pass computes. Resample.
    if (plus.pattern != base.pattern || minus.pattern != base.pattern) continue;
    ++kept;

    const double numeric = (plus.f - minus.f) / (2.0 * fd_step);
    const double exact = s.is_weight ? analytic.weights[s.layer].data[s.offset]
                                     : analytic.biases[s.layer].data[s.offset];
    const double denom = std::max({std::abs(numeric), std::abs(exact), 1e-8});
    max_rel = std::max(max_rel, std::abs(numeric - exact) / denom);
  }
  return max_rel;
}

}  // namespace dqnf
