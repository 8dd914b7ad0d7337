#pragma once

#include "dqnf/agent.hpp"
#include "dqnf/checkpoint.hpp"
#include "dqnf/metrics.hpp"

namespace dqnf {

struct EnvConfig {
  std::string name = "grid_rooms";  // "grid_rooms" or "micro_text"
  // grid_rooms
  int width = 8;
  int height = 8;
  int room_types = 5;
  std::string map_file;  // overrides the generated layout
  int max_steps = 200;
  double gamma = 0.99;
  int view = 7;
  // micro_text
  std::string game_file;  // overrides the built-in game

  void validate() const;
  bool operator==(const EnvConfig&) const = default;
};

/// Greedy-with-exploration evaluation rounds interleaved with training plus
/// one final round; the final round feeds the manifest summary.
struct EvalConfig {
  long every_episodes = 100;  // 0 disables interleaved evaluation
  int episodes = 10;
  double epsilon = 0.05;
  int final_episodes = 20;

  void validate() const;
  bool operator==(const EvalConfig&) const = default;
};

struct RunConfig {
  EnvConfig env;
  AgentConfig agent;
  FrontierConfig frontier;
  EvalConfig eval;
  std::vector<std::uint64_t> seeds;
  std::string out_dir = "runs/out";
  std::string precision = "f32";  // "f32" or "f64"
  int hidden = 64;
  int max_workers = 0;  // 0 = hardware concurrency

  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

/// Strict parse: unknown keys are config errors, referenced files must
/// exist. The agent's gamma always follows the environment's.
RunConfig run_config_from_json(const std::string& text);
std::string run_config_to_json(const RunConfig& config);
RunConfig load_run_config(const std::string& path);

/// Rebuilds the config embedded in a run manifest.
RunConfig run_config_from_manifest(const std::string& path);

template <typename T>
std::unique_ptr<Environment<T>> make_env(const EnvConfig& config);

/// Q-network chain matching an environment's observation layout: the conv
/// chain for rank-3 observations, the dense chain for flat ones.
LayerChain q_chain_for(const EnvSpec& spec, int hidden);

struct EvalResult {
  double success_rate = 0.0;
  double mean_return = 0.0;
  double mean_length = 0.0;
  double classifier_acc = 0.0;  // taken-action validity prediction accuracy
  int episodes = 0;
};

/// Runs `episodes` epsilon-greedy episodes on a fresh clone of `env`.
/// `classifier` may be null (plain DQN); accuracy then reads 0.
template <typename T>
EvalResult evaluate_policy(const Environment<T>& env, const LayerChain& q_chain,
                           const NetworkParams<T>& params, const LayerChain& cls_chain,
                           const NetworkParams<T>* classifier, int episodes, double epsilon,
                           std::uint64_t seed);

struct SeedResult {
  std::uint64_t seed = 0;
  std::string status;  // "ok", "diverged", or "error"
  std::string message;
  long episodes = 0;
  long env_steps = 0;
  long cumulative_forbidden = 0;
  double final_success_rate = 0.0;
  double final_classifier_acc = 0.0;
  double wall_seconds = 0.0;
  std::string dir;
};

struct RunSummary {
  std::vector<SeedResult> seeds;
  bool any_diverged = false;
  bool any_error = false;
};

/// Trains every seed (parallel workers, one self-contained run each) and
/// writes per-seed metrics.csv, eval.csv, checkpoint.json and manifest.json
/// under <out_dir>/seed_<seed>/. A diverged seed keeps its partial metrics
/// and is marked in its manifest; the other seeds continue.
RunSummary run_experiment(const RunConfig& config);

struct SeparationReport {
  int n_states = 0;
  int n_scored = 0;     // states with both a valid and a forbidden action
  double fraction_separated = 0.0;
  std::string dump;     // one row per state: separated, min valid, max forbidden, Q...
};

/// Fraction of on-policy states whose forbidden Q-values all sit below every
/// valid one. States come from epsilon-greedy rollouts of the given network.
template <typename T>
SeparationReport q_separation_report(const Environment<T>& env, const LayerChain& q_chain,
                                     const NetworkParams<T>& params, int n_states, double epsilon,
                                     std::uint64_t seed);

}  // namespace dqnf
