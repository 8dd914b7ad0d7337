#pragma once

#include <memory>
#include <vector>

#include "dqnf/tensor.hpp"

namespace dqnf {

struct EnvSpec {
  int action_count = 0;
  std::vector<int> observation_shape;
  int max_steps = 0;
  double gamma = 0.99;
};

/// Result of one environment step. feedback == 1 means the action was
/// rejected: the world state did not change and the reward is zero; only the
/// step counter advanced. Rewards live in [0, 1].
template <typename T>
struct FeedbackStep {
  std::shared_ptr<const Tensor<T>> observation;
  double reward = 0.0;
  bool done = false;
  int feedback = 0;
};

/// An episodic environment that flags rejected actions. Rejections follow
/// the environment's own validity rules; out-of-range action indices are a
/// caller bug and throw instead.
template <typename T>
class Environment {
 public:
  virtual ~Environment() = default;

  virtual EnvSpec spec() const = 0;
  virtual std::shared_ptr<const Tensor<T>> reset(std::uint64_t seed) = 0;
  virtual FeedbackStep<T> step(int action) = 0;

  /// Ground-truth set of currently valid actions. For tests and the tabular
  /// oracle only; learning agents must not call this.
  virtual std::vector<int> oracle_valid_set() const = 0;

  /// Rejections counted by the environment itself since construction,
  /// independently of anything the agent tracks.
  virtual long total_rejections() const = 0;

  virtual std::unique_ptr<Environment<T>> clone() const = 0;
};

}  // namespace dqnf
