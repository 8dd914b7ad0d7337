// Command-line front end: train/eval/inspect/compare/plot/oracle.
// Exit codes: 0 success, 1 configuration or usage error, 2 divergence.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "dqnf/compare.hpp"
#include "dqnf/grid_rooms.hpp"
#include "dqnf/micro_text.hpp"
#include "dqnf/run.hpp"
#include "dqnf/value_iteration.hpp"

namespace fs = std::filesystem;
using namespace dqnf;

namespace {

int run_train(const std::string& config_path, long seed_override) {
  RunConfig cfg = load_run_config(config_path);
  if (seed_override >= 0) cfg.seeds = {static_cast<std::uint64_t>(seed_override)};
  const RunSummary summary = run_experiment(cfg);
  for (const SeedResult& r : summary.seeds) {
    std::printf("seed %llu: %s  episodes=%ld env_steps=%ld forbidden=%ld success=%.3f  (%.1fs)\n",
                static_cast<unsigned long long>(r.seed), r.status.c_str(), r.episodes,
                r.env_steps, r.cumulative_forbidden, r.final_success_rate, r.wall_seconds);
    if (!r.message.empty()) std::printf("  %s\n", r.message.c_str());
  }
  if (summary.any_error) return 1;
  if (summary.any_diverged) return 2;
  return 0;
}

/// The env the checkpoint was trained on, via the manifest saved beside it.
EnvConfig env_config_beside(const std::string& checkpoint_path) {
  const fs::path manifest = fs::path(checkpoint_path).parent_path() / "manifest.json";
  if (!fs::exists(manifest)) {
    throw std::invalid_argument("no manifest.json beside " + checkpoint_path +
                                "; cannot infer the environment");
  }
  return run_config_from_manifest(manifest.string()).env;
}

/// Builds an env directly from a grid map or game definition (.json) file.
template <typename T>
std::unique_ptr<Environment<T>> env_from_file(const std::string& path) {
  if (!fs::exists(path)) throw std::invalid_argument("env file does not exist: " + path);
  if (fs::path(path).extension() == ".json") {
    return std::make_unique<MicroText<T>>(TextGameDef::from_file(path));
  }
  return std::make_unique<GridRooms<T>>(GridLayout::from_map_file(path));
}

template <typename T>
int run_eval_typed(const std::string& ckpt_path, const std::string& env_file, int episodes,
                   double epsilon, std::uint64_t seed) {
  const AgentCheckpoint<T> ckpt = load_agent_checkpoint<T>(ckpt_path);
  std::unique_ptr<Environment<T>> env;
  if (!env_file.empty()) {
    env = env_from_file<T>(env_file);
  } else {
    env = make_env<T>(env_config_beside(ckpt_path));
  }
  const LayerChain cls_chain = with_sigmoid_head(ckpt.q_chain);
  const EvalResult result =
      evaluate_policy(*env, ckpt.q_chain, ckpt.online, cls_chain,
                      ckpt.has_classifier ? &ckpt.classifier : nullptr, episodes, epsilon, seed);
  std::printf("episodes        %d\n", result.episodes);
  std::printf("success_rate    %.4f\n", result.success_rate);
  std::printf("mean_return     %.4f\n", result.mean_return);
  std::printf("mean_length     %.2f\n", result.mean_length);
  if (ckpt.has_classifier) std::printf("classifier_acc  %.4f\n", result.classifier_acc);
  return 0;
}

template <typename T>
int run_inspect_typed(const std::string& ckpt_path, const std::string& env_file, int states,
                      double epsilon, std::uint64_t seed, const std::string& dump_path) {
  const AgentCheckpoint<T> ckpt = load_agent_checkpoint<T>(ckpt_path);
  std::unique_ptr<Environment<T>> env = env_file.empty()
                                            ? make_env<T>(env_config_beside(ckpt_path))
                                            : env_from_file<T>(env_file);
  const SeparationReport report =
      q_separation_report(*env, ckpt.q_chain, ckpt.online, states, epsilon, seed);
  std::printf("states_visited      %d\n", report.n_states);
  std::printf("states_scored       %d\n", report.n_scored);
  std::printf("fraction_separated  %.4f\n", report.fraction_separated);
  if (!dump_path.empty()) {
    std::ofstream out(dump_path);
    if (!out) throw std::runtime_error("cannot write " + dump_path);
    out << report.dump;
    std::printf("per-state dump written to %s\n", dump_path.c_str());
  }
  return 0;
}

int run_compare(const std::string& dir_a, const std::string& dir_b) {
  const auto a = load_metric_sets(dir_a);
  const auto b = load_metric_sets(dir_b);
  const CompareSummary summary = compare_runs(a, b);
  std::printf("A = %s\nB = %s\n\n%s", dir_a.c_str(), dir_b.c_str(), summary.table.c_str());
  return 0;
}

int run_plot(const std::string& metric, const std::vector<std::string>& dirs,
             const std::string& out_dir) {
  fs::create_directories(out_dir);
  for (const std::string& dir : dirs) {
    const auto runs = load_metric_sets(dir);
    std::string base = fs::path(dir).filename().string();
    if (base.empty()) base = fs::path(dir).parent_path().filename().string();
    const fs::path out = fs::path(out_dir) / (metric + "_" + base + ".dat");
    emit_plot_data(runs, metric, out.string());
    std::printf("%s\n", out.string().c_str());
  }
  return 0;
}

int run_oracle(const std::string& env_file, double gamma, long max_states,
               const std::string& dump_path) {
  if (fs::path(env_file).extension() == ".json") {
    throw std::invalid_argument(
        "the tabular oracle only handles grid map files; game worlds are not enumerable here");
  }
  const GridLayout layout = GridLayout::from_map_file(env_file);
  const QTable table = value_iteration_oracle(layout, gamma, max_states);
  const std::vector<int> lengths = optimal_path_lengths(layout);
  int max_len = 0;
  double mean_len = 0.0;
  for (int d : lengths) {
    max_len = std::max(max_len, d);
    mean_len += d;
  }
  if (!lengths.empty()) mean_len /= static_cast<double>(lengths.size());
  std::printf("states              %zu\n", table.poses.size());
  std::printf("actions             %d\n", table.action_count);
  std::printf("mean_optimal_steps  %.3f\n", mean_len);
  std::printf("max_optimal_steps   %d\n", max_len);
  if (!dump_path.empty()) {
    std::ofstream out(dump_path);
    if (!out) throw std::runtime_error("cannot write " + dump_path);
    out << "# x y dir optimal_steps v q...\n";
    for (std::size_t s = 0; s < table.poses.size(); ++s) {
      const Pose& p = table.poses[s];
      out << p.x << ' ' << p.y << ' ' << p.dir << ' ' << lengths[s] << ' ' << table.v[s];
      for (int a = 0; a < table.action_count; ++a) out << ' ' << table.at(static_cast<int>(s), a);
      out << '\n';
    }
    std::printf("q-table written to %s\n", dump_path.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DQN with rejected-action feedback: training and analysis tools"};
  app.require_subcommand(1);

  std::string config_path;
  long seed_override = -1;
  CLI::App* train = app.add_subcommand("train", "Train every seed in a run config");
  train->add_option("--config", config_path, "Run configuration JSON")->required();
  train->add_option("--seed", seed_override, "Train only this seed");

  std::string ckpt_path, env_file, dump_path;
  int episodes = 20;
  int states = 200;
  double epsilon = 0.05;
  std::uint64_t seed = 1234;
  CLI::App* eval = app.add_subcommand("eval", "Roll out a checkpoint's policy");
  eval->add_option("--checkpoint", ckpt_path, "Agent checkpoint JSON")->required();
  eval->add_option("--episodes", episodes, "Evaluation episodes")->required();
  eval->add_option("--env", env_file, "Grid map or game definition (.json); default: the manifest");
  eval->add_option("--epsilon", epsilon, "Exploration during evaluation");
  eval->add_option("--seed", seed, "Evaluation seed");

  std::string i_ckpt, i_env, i_dump;
  int i_states = 200;
  double i_eps = 0.05;
  std::uint64_t i_seed = 1234;
  CLI::App* inspect = app.add_subcommand("inspect-q", "Valid/forbidden Q-value separation report");
  inspect->add_option("--checkpoint", i_ckpt, "Agent checkpoint JSON")->required();
  inspect->add_option("--env", i_env, "Grid map or game definition (.json); default: the manifest");
  inspect->add_option("--states", i_states, "On-policy states to score");
  inspect->add_option("--epsilon", i_eps, "Rollout exploration");
  inspect->add_option("--seed", i_seed, "Rollout seed");
  inspect->add_option("--dump", i_dump, "Write the per-state rows here");

  std::vector<std::string> compare_dirs;
  CLI::App* compare = app.add_subcommand("compare", "Mean +- std summary of two run sets");
  compare->add_option("dirs", compare_dirs, "Two run directories (each holding seed_*/)")
      ->expected(2);

  std::string metric = "success";
  std::vector<std::string> plot_dirs;
  std::string plot_out = ".";
  CLI::App* plot = app.add_subcommand("plot", "Emit mean/band series files for plotting");
  plot->add_option("--metric", metric, "One of the metrics listed on error")->required();
  plot->add_option("dirs", plot_dirs, "Run directories")->expected(-1)->required();
  plot->add_option("--out-dir", plot_out, "Where the .dat files go");

  std::string oracle_env, oracle_dump;
  double oracle_gamma = 0.99;
  long oracle_max_states = 20000;
  CLI::App* oracle = app.add_subcommand("oracle", "Exact tabular solution of a grid map");
  oracle->add_option("--env", oracle_env, "Grid map file")->required();
  oracle->add_option("--gamma", oracle_gamma, "Discount factor");
  oracle->add_option("--max-states", oracle_max_states, "Refusal bound on the pose count");
  oracle->add_option("--dump", oracle_dump, "Write the full Q-table here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return run_train(config_path, seed_override);
    if (eval->parsed()) {
      if (checkpoint_precision(ckpt_path) == "f64") {
        return run_eval_typed<double>(ckpt_path, env_file, episodes, epsilon, seed);
      }
      return run_eval_typed<float>(ckpt_path, env_file, episodes, epsilon, seed);
    }
    if (inspect->parsed()) {
      if (checkpoint_precision(i_ckpt) == "f64") {
        return run_inspect_typed<double>(i_ckpt, i_env, i_states, i_eps, i_seed, i_dump);
      }
      return run_inspect_typed<float>(i_ckpt, i_env, i_states, i_eps, i_seed, i_dump);
    }
    if (compare->parsed()) return run_compare(compare_dirs[0], compare_dirs[1]);
    if (plot->parsed()) return run_plot(metric, plot_dirs, plot_out);
    if (oracle->parsed()) return run_oracle(oracle_env, oracle_gamma, oracle_max_states, oracle_dump);
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "divergence: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
