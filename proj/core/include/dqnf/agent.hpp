#pragma once

#include <optional>

#include "dqnf/frontier.hpp"
#include "dqnf/replay.hpp"

namespace dqnf {

/// Linear decay from eps_start to eps_end over the first decay_steps env
/// steps, clamped afterward.
struct ExplorationSchedule {
  double eps_start = 1.0;
  double eps_end = 0.05;
  long decay_steps = 20000;

  double epsilon(long env_step) const;
  void validate() const;
  bool operator==(const ExplorationSchedule&) const = default;
};

struct AgentConfig {
  double gamma = 0.99;
  int batch_size = 32;
  long target_update_period = 2000;  // in gradient steps
  long learn_start = 1000;           // replay size before the first update
  int train_every = 1;               // env steps per gradient step
  std::size_t replay_capacity = 10000;
  double lr_start = 1e-5;
  double lr_end = 1e-7;
  double weight_decay = 1e-4;
  long total_env_steps = 200000;  // drives the lr schedule
  ExplorationSchedule exploration;

  void validate() const;
  bool operator==(const AgentConfig&) const = default;
};

/// Epsilon-greedy over the online Q-values; argmax ties break toward the
/// lowest index. Exactly one uniform draw is consumed, plus one integer draw
/// when exploring, so action streams stay aligned across configurations.
template <typename T>
int select_action(const LayerChain& chain, const NetworkParams<T>& params, const Tensor<T>& obs,
                  double epsilon, Rng& rng);

/// Q(s, .) for a single observation.
template <typename T>
std::vector<double> q_values(const LayerChain& chain, const NetworkParams<T>& params,
                             const Tensor<T>& obs);

int argmax_action(const std::vector<double>& q);

/// y_i = r_i, or r_i + gamma * Q_target(s'_i, argmax_a Q_online(s'_i, a))
/// when the transition does not end the episode.
template <typename T>
std::vector<double> double_dqn_targets(const LayerChain& chain, const NetworkParams<T>& online,
                                       const NetworkParams<T>& target,
                                       const std::vector<const Transition<T>*>& batch,
                                       double gamma);

/// Mean squared error between Q(s_i, a_i) and targets, restricted to the
/// taken actions; rows flagged in `skip` contribute nothing (the margin term
/// owns rejected transitions). Adds weight * dJ/dQ into out_grad (same shape
/// as q) and returns the unweighted loss, both averaged over the full batch.
template <typename T>
double td_output_gradient(const Tensor<T>& q, const std::vector<int>& actions,
                          const std::vector<double>& targets, double weight, Tensor<T>& out_grad,
                          const std::vector<int>* skip = nullptr);

struct TrainReport {
  double dqn_loss = 0.0;
  double frontier_loss = 0.0;
  double classifier_bce = 0.0;
  double classifier_acc = 0.0;
  double lr = 0.0;
  bool target_synced = false;
};

/// Double DQN with uniform replay, optionally extended with the validity
/// classifier and margin loss. One instance per run; the constructor seed
/// derives independent streams for weight init, action selection and replay
/// sampling, so enabling the frontier never shifts the other streams.
template <typename T>
class DqnAgent {
 public:
  DqnAgent(LayerChain q_chain, AgentConfig config, FrontierConfig frontier, std::uint64_t seed);

  /// Epsilon-greedy action at the current schedule position.
  int act(const Tensor<T>& obs);

  /// Stores the transition; runs a gradient step when due.
  std::optional<TrainReport> observe(Transition<T> t);

  double epsilon() const { return cfg_.exploration.epsilon(env_steps_); }
  double lr() const;
  long env_steps() const { return env_steps_; }
  long grad_steps() const { return grad_steps_; }

  const LayerChain& q_chain() const { return q_chain_; }
  const LayerChain& classifier_chain() const { return cls_chain_; }
  const AgentConfig& config() const { return cfg_; }
  const FrontierConfig& frontier() const { return frontier_; }
  const ReplayBuffer<T>& replay() const { return replay_; }
  const NetworkParams<T>& online() const { return online_; }
  const NetworkParams<T>& target() const { return target_; }
  const NetworkParams<T>& classifier() const { return classifier_; }

  /// Restores network state (checkpoint loading).
  void set_networks(NetworkParams<T> online, NetworkParams<T> target, NetworkParams<T> classifier);

 private:
  TrainReport train_step();

  LayerChain q_chain_;
  LayerChain cls_chain_;
  AgentConfig cfg_;
  FrontierConfig frontier_;
  NetworkParams<T> online_;
  NetworkParams<T> target_;
  NetworkParams<T> classifier_;
  OptState<T> opt_;
  OptState<T> cls_opt_;
  ReplayBuffer<T> replay_;
  Rng action_rng_;
  Rng sample_rng_;
  long env_steps_ = 0;
  long grad_steps_ = 0;
};

}  // namespace dqnf
