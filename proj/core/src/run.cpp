#include "dqnf/run.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "dqnf/grid_rooms.hpp"
#include "dqnf/micro_text.hpp"

namespace dqnf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& msg) { throw std::invalid_argument(msg); }

void reject_unknown_keys(const json& j, std::initializer_list<const char*> known,
                         const char* where) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    bool ok = false;
    for (const char* k : known) ok |= key == k;
    if (!ok) config_error(std::string("unknown key '") + key + "' in " + where);
  }
}

}  // namespace

void EnvConfig::validate() const {
  if (name != "grid_rooms" && name != "micro_text") {
    config_error("env name must be grid_rooms or micro_text, got '" + name + "'");
  }
  if (name == "grid_rooms") {
    if (map_file.empty()) {
      if (width < 3 || height < 3) config_error("grid must be at least 3x3");
      if (room_types < 1 || room_types > 10) config_error("room_types must be in [1, 10]");
    }
    if (max_steps < 1) config_error("max_steps must be positive");
    if (gamma <= 0.0 || gamma >= 1.0) config_error("gamma must be in (0, 1)");
    if (view < 1 || view % 2 == 0) config_error("view must be odd");
  }
}

void EvalConfig::validate() const {
  if (every_episodes < 0) config_error("eval every_episodes must be >= 0");
  if (episodes < 1) config_error("eval episodes must be positive");
  if (epsilon < 0.0 || epsilon > 1.0) config_error("eval epsilon must be in [0, 1]");
  if (final_episodes < 1) config_error("final eval episodes must be positive");
}

void RunConfig::validate() const {
  env.validate();
  agent.validate();
  frontier.validate();
  eval.validate();
  if (seeds.empty()) config_error("seed list must be non-empty");
  if (out_dir.empty()) config_error("out_dir must be set");
  if (precision != "f32" && precision != "f64") {
    config_error("precision must be f32 or f64, got '" + precision + "'");
  }
  if (hidden < 1) config_error("hidden width must be positive");
  if (max_workers < 0) config_error("max_workers must be >= 0");
}

RunConfig run_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    config_error(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  try {
    reject_unknown_keys(j, {"env", "agent", "frontier", "eval", "seeds", "out_dir", "precision",
                            "hidden", "max_workers"},
                        "config");
    if (j.contains("env")) {
      const json& e = j["env"];
      reject_unknown_keys(e, {"name", "width", "height", "room_types", "map_file", "max_steps",
                              "gamma", "view", "game_file"},
                          "env");
      cfg.env.name = e.value("name", cfg.env.name);
      cfg.env.width = e.value("width", cfg.env.width);
      cfg.env.height = e.value("height", cfg.env.height);
      cfg.env.room_types = e.value("room_types", cfg.env.room_types);
      cfg.env.map_file = e.value("map_file", cfg.env.map_file);
      cfg.env.max_steps = e.value("max_steps", cfg.env.max_steps);
      cfg.env.gamma = e.value("gamma", cfg.env.gamma);
      cfg.env.view = e.value("view", cfg.env.view);
      cfg.env.game_file = e.value("game_file", cfg.env.game_file);
    }
    if (j.contains("agent")) {
      const json& a = j["agent"];
      reject_unknown_keys(a, {"batch_size", "target_update_period", "learn_start", "train_every",
                              "replay_capacity", "lr_start", "lr_end", "weight_decay",
                              "total_env_steps", "exploration"},
                          "agent");
      cfg.agent.batch_size = a.value("batch_size", cfg.agent.batch_size);
      cfg.agent.target_update_period =
          a.value("target_update_period", cfg.agent.target_update_period);
      cfg.agent.learn_start = a.value("learn_start", cfg.agent.learn_start);
      cfg.agent.train_every = a.value("train_every", cfg.agent.train_every);
      cfg.agent.replay_capacity = a.value("replay_capacity", cfg.agent.replay_capacity);
      cfg.agent.lr_start = a.value("lr_start", cfg.agent.lr_start);
      cfg.agent.lr_end = a.value("lr_end", cfg.agent.lr_end);
      cfg.agent.weight_decay = a.value("weight_decay", cfg.agent.weight_decay);
      cfg.agent.total_env_steps = a.value("total_env_steps", cfg.agent.total_env_steps);
      if (a.contains("exploration")) {
        const json& x = a["exploration"];
        reject_unknown_keys(x, {"eps_start", "eps_end", "decay_steps"}, "exploration");
        cfg.agent.exploration.eps_start = x.value("eps_start", cfg.agent.exploration.eps_start);
        cfg.agent.exploration.eps_end = x.value("eps_end", cfg.agent.exploration.eps_end);
        if (x.contains("decay_steps")) {
          cfg.agent.exploration.decay_steps = x["decay_steps"].get<long>();
        } else {
          cfg.agent.exploration.decay_steps = std::max(1L, cfg.agent.total_env_steps / 10);
        }
      } else {
        cfg.agent.exploration.decay_steps = std::max(1L, cfg.agent.total_env_steps / 10);
      }
    } else {
      cfg.agent.exploration.decay_steps = std::max(1L, cfg.agent.total_env_steps / 10);
    }
    if (j.contains("frontier")) {
      const json& f = j["frontier"];
      reject_unknown_keys(f, {"enabled", "margin", "lambda_dqn", "lambda_f", "tau",
                              "classifier_lr"},
                          "frontier");
      cfg.frontier.enabled = f.value("enabled", cfg.frontier.enabled);
      cfg.frontier.margin = f.value("margin", cfg.frontier.margin);
      cfg.frontier.lambda_dqn = f.value("lambda_dqn", cfg.frontier.lambda_dqn);
      cfg.frontier.lambda_f = f.value("lambda_f", cfg.frontier.lambda_f);
      cfg.frontier.tau = f.value("tau", cfg.frontier.tau);
      cfg.frontier.classifier_lr = f.value("classifier_lr", cfg.frontier.classifier_lr);
    }
    if (j.contains("eval")) {
      const json& e = j["eval"];
      reject_unknown_keys(e, {"every_episodes", "episodes", "epsilon", "final_episodes"}, "eval");
      cfg.eval.every_episodes = e.value("every_episodes", cfg.eval.every_episodes);
      cfg.eval.episodes = e.value("episodes", cfg.eval.episodes);
      cfg.eval.epsilon = e.value("epsilon", cfg.eval.epsilon);
      cfg.eval.final_episodes = e.value("final_episodes", cfg.eval.final_episodes);
    }
    if (j.contains("seeds")) cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    cfg.precision = j.value("precision", cfg.precision);
    cfg.hidden = j.value("hidden", cfg.hidden);
    cfg.max_workers = j.value("max_workers", cfg.max_workers);
  } catch (const json::exception& e) {
    config_error(std::string("config field has the wrong type: ") + e.what());
  }
  cfg.agent.gamma = cfg.env.gamma;
  cfg.validate();
  if (!cfg.env.map_file.empty() && !fs::exists(cfg.env.map_file)) {
    config_error("map_file does not exist: " + cfg.env.map_file);
  }
  if (!cfg.env.game_file.empty() && !fs::exists(cfg.env.game_file)) {
    config_error("game_file does not exist: " + cfg.env.game_file);
  }
  return cfg;
}

std::string run_config_to_json(const RunConfig& cfg) {
  json j;
  j["env"] = {{"name", cfg.env.name},       {"width", cfg.env.width},
              {"height", cfg.env.height},   {"room_types", cfg.env.room_types},
              {"map_file", cfg.env.map_file}, {"max_steps", cfg.env.max_steps},
              {"gamma", cfg.env.gamma},     {"view", cfg.env.view},
              {"game_file", cfg.env.game_file}};
  j["agent"] = {{"batch_size", cfg.agent.batch_size},
                {"target_update_period", cfg.agent.target_update_period},
                {"learn_start", cfg.agent.learn_start},
                {"train_every", cfg.agent.train_every},
                {"replay_capacity", cfg.agent.replay_capacity},
                {"lr_start", cfg.agent.lr_start},
                {"lr_end", cfg.agent.lr_end},
                {"weight_decay", cfg.agent.weight_decay},
                {"total_env_steps", cfg.agent.total_env_steps},
                {"exploration",
                 {{"eps_start", cfg.agent.exploration.eps_start},
                  {"eps_end", cfg.agent.exploration.eps_end},
                  {"decay_steps", cfg.agent.exploration.decay_steps}}}};
  j["frontier"] = {{"enabled", cfg.frontier.enabled},
                   {"margin", cfg.frontier.margin},
                   {"lambda_dqn", cfg.frontier.lambda_dqn},
                   {"lambda_f", cfg.frontier.lambda_f},
                   {"tau", cfg.frontier.tau},
                   {"classifier_lr", cfg.frontier.classifier_lr}};
  j["eval"] = {{"every_episodes", cfg.eval.every_episodes},
               {"episodes", cfg.eval.episodes},
               {"epsilon", cfg.eval.epsilon},
               {"final_episodes", cfg.eval.final_episodes}};
  j["seeds"] = cfg.seeds;
  j["out_dir"] = cfg.out_dir;
  j["precision"] = cfg.precision;
  j["hidden"] = cfg.hidden;
  j["max_workers"] = cfg.max_workers;
  return j.dump(2);
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return run_config_from_json(buf.str());
}

RunConfig run_config_from_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open manifest: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    config_error(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!j.contains("config")) config_error("manifest has no config section: " + path);
  return run_config_from_json(j["config"].dump());
}

template <typename T>
std::unique_ptr<Environment<T>> make_env(const EnvConfig& config) {
  config.validate();
  if (config.name == "grid_rooms") {
    GridLayout layout = config.map_file.empty()
                            ? GridLayout::generate(config.width, config.height, config.room_types)
                            : GridLayout::from_map_file(config.map_file);
    return std::make_unique<GridRooms<T>>(std::move(layout), config.max_steps, config.gamma,
                                          config.view);
  }
  TextGameDef def = config.game_file.empty() ? TextGameDef::default_game()
                                             : TextGameDef::from_file(config.game_file);
  return std::make_unique<MicroText<T>>(std::move(def));
}

LayerChain q_chain_for(const EnvSpec& spec, int hidden) {
  if (spec.observation_shape.size() == 3) {
    if (spec.observation_shape[1] != spec.observation_shape[2]) {
      throw std::invalid_argument("grid observations must be square");
    }
    return grid_q_chain(spec.observation_shape[0], spec.observation_shape[1], spec.action_count,
                        hidden);
  }
  if (spec.observation_shape.size() == 1) {
    return text_q_chain(spec.observation_shape[0], spec.action_count, hidden);
  }
  throw std::invalid_argument("unsupported observation rank " +
                              std::to_string(spec.observation_shape.size()));
}

template <typename T>
EvalResult evaluate_policy(const Environment<T>& env, const LayerChain& q_chain,
                           const NetworkParams<T>& params, const LayerChain& cls_chain,
                           const NetworkParams<T>* classifier, int episodes, double epsilon,
                           std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("evaluation needs at least one episode");
  EvalResult result;
  result.episodes = episodes;
  std::unique_ptr<Environment<T>> rollout = env.clone();
  Rng rng(mix_seed(seed, 17));
  long cls_total = 0;
  long cls_correct = 0;
  for (int ep = 0; ep < episodes; ++ep) {
    auto obs = rollout->reset(mix_seed(seed, 1000 + static_cast<std::uint64_t>(ep)));
    double ep_return = 0.0;
    long length = 0;
    while (true) {
      const int a = select_action(q_chain, params, *obs, epsilon, rng);
      if (classifier) {
        Tensor<T> probs = forward(cls_chain, *classifier, *obs);
        const bool predicted_valid =
            static_cast<double>(probs.data[static_cast<std::size_t>(a)]) > 0.5;
        // Compared below against the feedback bit the env actually returns.
        const FeedbackStep<T> fs = rollout->step(a);
        ++cls_total;
        if (predicted_valid == (fs.feedback == 0)) ++cls_correct;
        ep_return += fs.reward;
        ++length;
        obs = fs.observation;
        if (fs.done) break;
      } else {
        const FeedbackStep<T> fs = rollout->step(a);
        ep_return += fs.reward;
        ++length;
        obs = fs.observation;
        if (fs.done) break;
      }
    }
    result.mean_return += ep_return;
    result.mean_length += static_cast<double>(length);
    if (ep_return > 0.0) result.success_rate += 1.0;
  }
  result.success_rate /= episodes;
  result.mean_return /= episodes;
  result.mean_length /= episodes;
  result.classifier_acc =
      cls_total > 0 ? static_cast<double>(cls_correct) / static_cast<double>(cls_total) : 0.0;
  return result;
}

namespace {

struct EvalRow {
  long env_steps;
  EvalResult result;
};

void write_eval_csv(const std::string& path, const std::vector<EvalRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write eval file: " + path);
  out << "env_steps,success_rate,mean_return,mean_length,classifier_acc\n";
  for (const EvalRow& r : rows) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g,%.17g,%.17g\n", r.env_steps,
                  r.result.success_rate, r.result.mean_return, r.result.mean_length,
                  r.result.classifier_acc);
    out << buf;
  }
}

template <typename T>
SeedResult run_single_seed(const RunConfig& cfg, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  SeedResult result;
  result.seed = seed;
  result.status = "ok";
  const fs::path dir = fs::path(cfg.out_dir) / ("seed_" + std::to_string(seed));
  result.dir = dir.string();
  fs::create_directories(dir);

  std::unique_ptr<Environment<T>> env = make_env<T>(cfg.env);
  const EnvSpec spec = env->spec();
  AgentConfig agent_cfg = cfg.agent;
  agent_cfg.gamma = spec.gamma;
  const LayerChain chain = q_chain_for(spec, cfg.hidden);
  DqnAgent<T> agent(chain, agent_cfg, cfg.frontier, seed);

  std::vector<MetricsRow> rows;
  std::vector<EvalRow> evals;
  long episode = 0;
  try {
    while (agent.env_steps() < agent_cfg.total_env_steps) {
      auto obs = env->reset(mix_seed(seed, 100000 + static_cast<std::uint64_t>(episode)));
      MetricsRow row;
      row.episode = episode;
      double loss_dqn = 0.0, loss_frontier = 0.0, cls_acc = 0.0;
      long train_ticks = 0;
      while (true) {
        const int a = agent.act(*obs);
        const FeedbackStep<T> fs = env->step(a);
        const auto report = agent.observe({obs, a, fs.reward, fs.observation, fs.done, fs.feedback});
        if (report) {
          loss_dqn += report->dqn_loss;
          loss_frontier += report->frontier_loss;
          cls_acc += report->classifier_acc;
          ++train_ticks;
        }
        row.episode_return += fs.reward;
        row.forbidden_count += fs.feedback;
        obs = fs.observation;
        if (fs.done) break;
      }
      row.env_steps = agent.env_steps();
      row.success = row.episode_return > 0.0 ? 1 : 0;
      if (train_ticks > 0) {
        row.dqn_loss = loss_dqn / static_cast<double>(train_ticks);
        row.frontier_loss = loss_frontier / static_cast<double>(train_ticks);
        row.classifier_acc = cls_acc / static_cast<double>(train_ticks);
      }
      row.epsilon = agent.epsilon();
      row.lr = agent.lr();
      result.cumulative_forbidden += row.forbidden_count;
      rows.push_back(row);
      ++episode;
      if (cfg.eval.every_episodes > 0 && episode % cfg.eval.every_episodes == 0) {
        const EvalResult ev = evaluate_policy(
            *env, chain, agent.online(), agent.classifier_chain(),
            cfg.frontier.enabled ? &agent.classifier() : nullptr, cfg.eval.episodes,
            cfg.eval.epsilon, mix_seed(seed, 500000 + static_cast<std::uint64_t>(episode)));
        evals.push_back({agent.env_steps(), ev});
      }
    }
  } catch (const DivergenceError& e) {
    result.status = "diverged";
    result.message = e.what();
  }
  result.episodes = episode;
  result.env_steps = agent.env_steps();

  EvalResult final_eval;
  if (result.status == "ok") {
    final_eval =
        evaluate_policy(*env, chain, agent.online(), agent.classifier_chain(),
                        cfg.frontier.enabled ? &agent.classifier() : nullptr,
                        cfg.eval.final_episodes, cfg.eval.epsilon, mix_seed(seed, 900000));
    evals.push_back({agent.env_steps(), final_eval});
    result.final_success_rate = final_eval.success_rate;
    result.final_classifier_acc = final_eval.classifier_acc;
  }

  write_metrics_csv((dir / "metrics.csv").string(), rows);
  write_eval_csv((dir / "eval.csv").string(), evals);

  AgentCheckpoint<T> ckpt;
  ckpt.q_chain = chain;
  ckpt.seed = seed;
  ckpt.precision = cfg.precision;
  ckpt.online = agent.online();
  ckpt.target = agent.target();
  ckpt.classifier = agent.classifier();
  ckpt.has_classifier = cfg.frontier.enabled;
  save_agent_checkpoint((dir / "checkpoint.json").string(), ckpt);

  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  json manifest;
  manifest["config"] = json::parse(run_config_to_json(cfg));
  manifest["seed"] = seed;
  manifest["status"] = result.status;
  if (!result.message.empty()) manifest["message"] = result.message;
  manifest["wall_clock_seconds"] = result.wall_seconds;
  manifest["final"] = {{"episodes", result.episodes},
                       {"env_steps", result.env_steps},
                       {"cumulative_forbidden", result.cumulative_forbidden},
                       {"success_rate", result.final_success_rate},
                       {"classifier_accuracy", result.final_classifier_acc},
                       {"mean_eval_return", final_eval.mean_return},
                       {"mean_eval_length", final_eval.mean_length}};
  std::ofstream mout(dir / "manifest.json");
  if (!mout) throw std::runtime_error("cannot write manifest under " + dir.string());
  mout << manifest.dump(2) << '\n';
  return result;
}

template <typename T>
RunSummary run_experiment_impl(const RunConfig& cfg) {
  RunSummary summary;
  summary.seeds.resize(cfg.seeds.size());
  unsigned workers = cfg.max_workers > 0 ? static_cast<unsigned>(cfg.max_workers)
                                         : std::thread::hardware_concurrency();
  if (workers == 0) workers = 1;
  workers = std::min<unsigned>(workers, static_cast<unsigned>(cfg.seeds.size()));

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cfg.seeds.size()) return;
      try {
        summary.seeds[i] = run_single_seed<T>(cfg, cfg.seeds[i]);
      } catch (const std::exception& e) {
        summary.seeds[i].seed = cfg.seeds[i];
        summary.seeds[i].status = "error";
        summary.seeds[i].message = e.what();
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  for (const SeedResult& r : summary.seeds) {
    summary.any_diverged |= r.status == "diverged";
    summary.any_error |= r.status == "error";
  }
  return summary;
}

}  // namespace

RunSummary run_experiment(const RunConfig& config) {
  config.validate();
  if (config.precision == "f64") return run_experiment_impl<double>(config);
  return run_experiment_impl<float>(config);
}

template <typename T>
SeparationReport q_separation_report(const Environment<T>& env, const LayerChain& q_chain,
                                     const NetworkParams<T>& params, int n_states, double epsilon,
                                     std::uint64_t seed) {
  if (n_states < 1) throw std::invalid_argument("need at least one state to score");
  SeparationReport report;
  std::unique_ptr<Environment<T>> rollout = env.clone();
  Rng rng(mix_seed(seed, 23));
  std::ostringstream dump;
  dump << "separated min_valid max_forbidden q_values...\n";
  int separated = 0;
  std::uint64_t episode = 0;
  auto obs = rollout->reset(mix_seed(seed, 3000 + episode));
  while (report.n_states < n_states) {
    const std::vector<int> valid = rollout->oracle_valid_set();
    const std::vector<double> q = q_values(q_chain, params, *obs);
    std::vector<bool> is_valid(q.size(), false);
    for (int a : valid) is_valid[static_cast<std::size_t>(a)] = true;
    double min_valid = 0.0, max_forbidden = 0.0;
    bool has_valid = false, has_forbidden = false;
    for (std::size_t a = 0; a < q.size(); ++a) {
      if (is_valid[a]) {
        min_valid = has_valid ? std::min(min_valid, q[a]) : q[a];
        has_valid = true;
      } else {
        max_forbidden = has_forbidden ? std::max(max_forbidden, q[a]) : q[a];
        has_forbidden = true;
      }
    }
    ++report.n_states;
    if (has_valid && has_forbidden) {
      ++report.n_scored;
      const bool ok = max_forbidden < min_valid;
      separated += ok ? 1 : 0;
      dump << (ok ? 1 : 0) << ' ' << min_valid << ' ' << max_forbidden;
      for (double v : q) dump << ' ' << v;
      dump << '\n';
    }
    const int a = select_action(q_chain, params, *obs, epsilon, rng);
    const FeedbackStep<T> fs = rollout->step(a);
    obs = fs.observation;
    if (fs.done) {
      ++episode;
      obs = rollout->reset(mix_seed(seed, 3000 + episode));
    }
  }
  report.fraction_separated =
      report.n_scored > 0 ? static_cast<double>(separated) / report.n_scored : 0.0;
  report.dump = dump.str();
  return report;
}

template std::unique_ptr<Environment<float>> make_env(const EnvConfig&);
template std::unique_ptr<Environment<double>> make_env(const EnvConfig&);
template EvalResult evaluate_policy(const Environment<float>&, const LayerChain&,
                                    const NetworkParams<float>&, const LayerChain&,
                                    const NetworkParams<float>*, int, double, std::uint64_t);
template EvalResult evaluate_policy(const Environment<double>&, const LayerChain&,
                                    const NetworkParams<double>&, const LayerChain&,
                                    const NetworkParams<double>*, int, double, std::uint64_t);
template SeparationReport q_separation_report(const Environment<float>&, const LayerChain&,
                                              const NetworkParams<float>&, int, double,
                                              std::uint64_t);
template SeparationReport q_separation_report(const Environment<double>&, const LayerChain&,
                                              const NetworkParams<double>&, int, double,
                                              std::uint64_t);

}  // namespace dqnf
