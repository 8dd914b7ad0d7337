#pragma once

#include <cstdint>

#include "dqnf/network.hpp"

namespace dqnf {

/// Compares backward() against central finite differences on randomly chosen
/// parameter coordinates, in double precision. The scalar under test is a
/// fixed random weighting of the network outputs. Coordinates whose probe
/// interval flips a relu mask or a pool argmax are resampled: the function
/// is not differentiable across such points, so the difference quotient says
/// nothing about the gradient there. Deterministic in `seed`. Returns the
/// maximum relative error over the probed coordinates.
double grad_check(const LayerChain& chain, const std::vector<int>& input_shape,
                  std::uint64_t seed, int n_coords, double fd_step = 1e-3);

}  // namespace dqnf
