#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "dqnf/compare.hpp"
#include "dqnf/run.hpp"
#include "dqnf/value_iteration.hpp"

using namespace dqnf;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("dqnf_test_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Small grid run that finishes in well under a second.
RunConfig tiny_grid_config(const std::string& out_dir, bool frontier_on) {
  RunConfig cfg;
  cfg.env.width = 5;
  cfg.env.height = 5;
  cfg.env.room_types = 2;
  cfg.env.max_steps = 40;
  cfg.agent.batch_size = 8;
  cfg.agent.learn_start = 50;
  cfg.agent.train_every = 4;
  cfg.agent.replay_capacity = 500;
  cfg.agent.target_update_period = 50;
  cfg.agent.lr_start = 1e-4;
  cfg.agent.lr_end = 1e-5;
  cfg.agent.total_env_steps = 400;
  cfg.agent.exploration.decay_steps = 200;
  cfg.frontier.enabled = frontier_on;
  cfg.eval.every_episodes = 0;
  cfg.eval.final_episodes = 2;
  cfg.eval.episodes = 2;
  cfg.seeds = {1};
  cfg.out_dir = out_dir;
  cfg.hidden = 16;
  cfg.max_workers = 1;
  return cfg;
}

}  // namespace

TEST_CASE("frontier loss squared hinge at frozen points") {
  // violation: Q(forbidden)=0.45 against min valid 0.4 with margin 0.1
  const FrontierTerm t = frontier_loss({0.45, 0.5, 0.4}, 0, {1, 2}, 0.1);
  CHECK(t.argmin_valid == 2);
  CHECK(t.violation == doctest::Approx(0.15));
  CHECK(t.loss == doctest::Approx(0.0225));

  // comfortably below the floor: inactive hinge
  const FrontierTerm ok = frontier_loss({0.1, 0.5, 0.4}, 0, {1, 2}, 0.1);
  CHECK(ok.violation == 0.0);
  CHECK(ok.loss == 0.0);
  CHECK(ok.argmin_valid == 2);

  // empty valid set: skipped sample
  const FrontierTerm skip = frontier_loss({0.45, 0.5, 0.4}, 0, {}, 0.1);
  CHECK(skip.loss == 0.0);
  CHECK(skip.argmin_valid == -1);

  CHECK_THROWS(frontier_loss({0.45, 0.5}, 0, {0}, 0.1));   // forbidden inside valid set
  CHECK_THROWS(frontier_loss({0.45, 0.5}, 2, {1}, 0.1));   // forbidden out of range
  CHECK_THROWS(frontier_loss({0.45, 0.5}, 0, {5}, 0.1));   // valid entry out of range
  CHECK_THROWS(frontier_loss({0.45, 0.5}, 0, {1}, 0.0));   // margin must be positive
}

TEST_CASE("predicted valid set thresholds and drops the rejected action") {
  CHECK(predict_valid_set({0.9, 0.4, 0.6}, 0.5, 2) == std::vector<int>{0});
  CHECK(predict_valid_set({0.9, 0.6, 0.7}, 0.5, 1) == std::vector<int>{0, 2});
  CHECK(predict_valid_set({0.1, 0.2, 0.3}, 0.5, 0).empty());
  CHECK(predict_valid_set({0.6, 0.6}, 0.5, -1) == std::vector<int>{0, 1});
}

TEST_CASE("composite objective weights the two losses") {
  CHECK(composite_loss(0.25, 0.0225, 1.0, 0.5) == doctest::Approx(0.25 + 0.5 * 0.0225));
  CHECK(composite_loss(0.25, 9.0, 1.0, 0.0) == doctest::Approx(0.25));
}

TEST_CASE("frontier config validation") {
  FrontierConfig fc;
  CHECK_NOTHROW(fc.validate());
  fc.tau = 1.0;
  CHECK_THROWS(fc.validate());
  fc = FrontierConfig{};
  fc.margin = 0.0;
  CHECK_THROWS(fc.validate());
}

TEST_CASE("classifier step hits the bce oracle and masks untaken heads") {
  // zeroed trunk: both heads output exactly 0.5
  LayerChain chain = with_sigmoid_head({LayerSpec::dense(1, 2)});
  NetworkParams<double> p = init_params<double>(chain, 1);
  p.weights[0].data = {0.0, 0.0};
  p.biases[0].data = {0.0, 0.0};
  OptState<double> opt = init_opt_state(p);

  Tensor<double> states({1, 1}, {1.0});
  Tensor<double> probs;
  const ClassifierStepReport rep =
      classifier_train_step(chain, p, opt, states, {0}, {0}, 1e-3, 0.0, &probs);
  CHECK(rep.bce == doctest::Approx(0.6931471805599453));
  CHECK(probs.data[0] == doctest::Approx(0.5));
  // taken head moved, untaken head untouched
  CHECK(p.weights[0].data[0] != 0.0);
  CHECK(p.weights[0].data[1] == 0.0);
  CHECK(p.biases[0].data[1] == 0.0);

  SUBCASE("accuracy counts thresholded agreement") {
    // target valid (f=0) but p = 0.5 is not > 0.5: counted wrong
    CHECK(rep.accuracy == 0.0);
  }

  SUBCASE("feedback flips the target") {
    NetworkParams<double> q = init_params<double>(chain, 1);
    q.weights[0].data = {0.0, 0.0};
    q.biases[0].data = {0.0, 0.0};
    OptState<double> o2 = init_opt_state(q);
    classifier_train_step(chain, q, o2, states, {0}, {1}, 1e-3, 0.0);
    // pushing toward invalid lowers the logit; toward valid raises it
    CHECK(q.biases[0].data[0] < 0.0);
    CHECK(p.biases[0].data[0] > 0.0);
  }
}

TEST_CASE("value iteration oracle on a two-band corridor") {
  const GridLayout g = GridLayout::generate(5, 5, 2);
  const QTable table = value_iteration_oracle(g, 0.99);
  CHECK(table.action_count == 6);
  // 8 floor cells (3x3 interior minus the goal), 4 headings each
  CHECK(static_cast<int>(table.poses.size()) == 32);

  const int adjacent = table.state_index({2, 3, 0});  // facing the goal
  REQUIRE(adjacent >= 0);
  CHECK(table.at(adjacent, 2) == doctest::Approx(1.0));        // forward ends the episode
  CHECK(table.v[static_cast<std::size_t>(adjacent)] == doctest::Approx(1.0));
  // forbidden group self-loops into the discounted state value
  CHECK(table.at(adjacent, 3) == doctest::Approx(0.99));
  CHECK(table.at(adjacent, 4) == doctest::Approx(0.99));
  CHECK(table.at(adjacent, 5) == doctest::Approx(0.99));

  const int turned = table.state_index({2, 3, 3});  // facing north, one turn away
  REQUIRE(turned >= 0);
  CHECK(table.v[static_cast<std::size_t>(turned)] == doctest::Approx(0.99));
  CHECK(table.at(turned, 1) == doctest::Approx(0.99));  // turn right toward the goal

  CHECK(table.state_index({0, 0, 0}) == -1);  // wall pose holds no state
  CHECK_THROWS(value_iteration_oracle(g, 0.99, 10));  // state cap enforced
}

TEST_CASE("optimal lengths agree with the discounted values everywhere") {
  const GridLayout g = GridLayout::generate(6, 6, 3);
  const QTable table = value_iteration_oracle(g, 0.99);
  const std::vector<int> lengths = optimal_path_lengths(g);
  REQUIRE(lengths.size() == table.poses.size());
  // only goal entry pays, so V(s) = gamma^(steps-1) exactly
  for (std::size_t s = 0; s < lengths.size(); ++s) {
    REQUIRE(lengths[s] > 0);
    CHECK(table.v[s] ==
          doctest::Approx(std::pow(0.99, lengths[s] - 1)).epsilon(1e-9));
  }
}

TEST_CASE("metrics csv round-trips and pins the header") {
  CHECK(std::string(kMetricsHeader) ==
        "episode,env_steps,return,success,forbidden_count,dqn_loss,frontier_loss,"
        "classifier_acc,epsilon,lr");
  std::vector<MetricsRow> rows(3);
  for (int i = 0; i < 3; ++i) {
    rows[static_cast<std::size_t>(i)].episode = i;
    rows[static_cast<std::size_t>(i)].env_steps = 10 * (i + 1);
    rows[static_cast<std::size_t>(i)].episode_return = 0.125 * i;
    rows[static_cast<std::size_t>(i)].success = i % 2;
    rows[static_cast<std::size_t>(i)].forbidden_count = 2 * i;
    rows[static_cast<std::size_t>(i)].dqn_loss = 1e-9 + i;
    rows[static_cast<std::size_t>(i)].frontier_loss = 0.5 * i;
    rows[static_cast<std::size_t>(i)].classifier_acc = 0.33;
    rows[static_cast<std::size_t>(i)].epsilon = 1.0 - 0.1 * i;
    rows[static_cast<std::size_t>(i)].lr = 1e-5;
  }
  TempDir dir("metrics");
  const std::string path = dir.str() + "/metrics.csv";
  write_metrics_csv(path, rows);
  const std::vector<MetricsRow> back = read_metrics_csv(path);
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].episode == rows[i].episode);
    CHECK(back[i].env_steps == rows[i].env_steps);
    CHECK(back[i].episode_return == rows[i].episode_return);  // %.17g is lossless
    CHECK(back[i].success == rows[i].success);
    CHECK(back[i].forbidden_count == rows[i].forbidden_count);
    CHECK(back[i].lr == rows[i].lr);
  }

  SUBCASE("env steps must increase") {
    rows[2].env_steps = rows[1].env_steps;
    CHECK_THROWS(write_metrics_csv(path, rows));
  }
  SUBCASE("foreign headers are refused") {
    std::ofstream out(path, std::ios::binary);
    out << "episode,env_steps\n0,1\n";
    out.close();
    CHECK_THROWS(read_metrics_csv(path));
  }
}

TEST_CASE("run config json round-trips") {
  RunConfig cfg = tiny_grid_config("runs/x", true);
  cfg.seeds = {3, 5, 7};
  cfg.precision = "f64";
  const RunConfig back = run_config_from_json(run_config_to_json(cfg));
  CHECK(back == cfg);
}

TEST_CASE("run config parsing is strict") {
  CHECK_THROWS(run_config_from_json("{"));
  // unknown keys anywhere are config errors
  CHECK_THROWS(run_config_from_json(R"({"bogus": 1, "seeds": [1]})"));
  CHECK_THROWS(run_config_from_json(R"({"agent": {"bogus": 1}, "seeds": [1]})"));
  CHECK_THROWS(run_config_from_json(R"({"env": {"name": "marble_maze"}, "seeds": [1]})"));
  CHECK_THROWS(run_config_from_json(R"({"seeds": []})"));
  CHECK_THROWS(run_config_from_json(
      R"({"seeds": [1], "env": {"map_file": "/nonexistent/x.map"}})"));
  CHECK_THROWS(run_config_from_json(R"({"seeds": [1], "precision": "f16"})"));

  // exploration decay defaults to a tenth of the run
  const RunConfig c = run_config_from_json(
      R"({"seeds": [1], "agent": {"total_env_steps": 5000}})");
  CHECK(c.agent.exploration.decay_steps == 500);
  // the agent discount always follows the environment
  const RunConfig g = run_config_from_json(
      R"({"seeds": [1], "env": {"gamma": 0.9}})");
  CHECK(g.agent.gamma == doctest::Approx(0.9));
}

TEST_CASE("environment factory builds both worlds") {
  EnvConfig grid;
  grid.width = 5;
  grid.height = 5;
  grid.room_types = 2;
  auto ge = make_env<float>(grid);
  CHECK(ge->spec().action_count == 6);
  CHECK(q_chain_for(ge->spec(), 16).front().kind == LayerKind::conv2d);

  EnvConfig text;
  text.name = "micro_text";
  auto te = make_env<float>(text);
  CHECK(te->spec().action_count == 46);
  CHECK(q_chain_for(te->spec(), 16).front().kind == LayerKind::dense);

  EnvConfig bad;
  bad.name = "marble_maze";
  CHECK_THROWS(bad.validate());
}

TEST_CASE("policy evaluation rolls out a cloned environment") {
  EnvConfig ec;
  ec.width = 5;
  ec.height = 5;
  ec.room_types = 1;
  ec.max_steps = 30;
  auto env = make_env<float>(ec);
  const LayerChain chain = q_chain_for(env->spec(), 8);
  const NetworkParams<float> params = init_params<float>(chain, 2);
  const EvalResult r =
      evaluate_policy<float>(*env, chain, params, with_sigmoid_head(chain), nullptr, 3, 1.0, 9);
  CHECK(r.episodes == 3);
  CHECK(r.mean_length <= 30.0);
  CHECK(r.success_rate >= 0.0);
  CHECK(r.success_rate <= 1.0);
  CHECK(r.classifier_acc == 0.0);  // no classifier supplied
  // the original environment was not disturbed
  CHECK(env->total_rejections() == 0);

  const EvalResult again =
      evaluate_policy<float>(*env, chain, params, with_sigmoid_head(chain), nullptr, 3, 1.0, 9);
  CHECK(again.success_rate == r.success_rate);
  CHECK(again.mean_return == r.mean_return);
}

TEST_CASE("experiment runner writes one self-contained directory per seed") {
  TempDir dir("run");
  RunConfig cfg = tiny_grid_config(dir.str() + "/out", true);
  const RunSummary sum = run_experiment(cfg);
  REQUIRE(sum.seeds.size() == 1);
  CHECK(sum.seeds[0].status == "ok");
  CHECK_FALSE(sum.any_diverged);
  CHECK_FALSE(sum.any_error);
  CHECK(sum.seeds[0].env_steps >= cfg.agent.total_env_steps);

  const std::string sdir = dir.str() + "/out/seed_1";
  CHECK(fs::exists(sdir + "/metrics.csv"));
  CHECK(fs::exists(sdir + "/eval.csv"));
  CHECK(fs::exists(sdir + "/checkpoint.json"));
  CHECK(fs::exists(sdir + "/manifest.json"));

  const std::vector<MetricsRow> rows = read_metrics_csv(sdir + "/metrics.csv");
  CHECK(static_cast<long>(rows.size()) == sum.seeds[0].episodes);
  long forbidden = 0;
  for (const MetricsRow& r : rows) forbidden += r.forbidden_count;
  CHECK(forbidden == sum.seeds[0].cumulative_forbidden);

  // the manifest echoes a loadable copy of the config
  const RunConfig back = run_config_from_manifest(sdir + "/manifest.json");
  CHECK(back.agent == cfg.agent);
  CHECK(back.env == cfg.env);
  CHECK(back.frontier == cfg.frontier);

  // the checkpoint restores all three networks
  const AgentCheckpoint<float> ckpt = load_agent_checkpoint<float>(sdir + "/checkpoint.json");
  CHECK(ckpt.q_chain == q_chain_for(make_env<float>(cfg.env)->spec(), cfg.hidden));
  CHECK(ckpt.has_classifier);
}

TEST_CASE("identical seeds reproduce metrics byte for byte") {
  TempDir a("det_a");
  TempDir b("det_b");
  run_experiment(tiny_grid_config(a.str() + "/out", true));
  run_experiment(tiny_grid_config(b.str() + "/out", true));
  CHECK(slurp(a.str() + "/out/seed_1/metrics.csv") == slurp(b.str() + "/out/seed_1/metrics.csv"));
  CHECK(slurp(a.str() + "/out/seed_1/checkpoint.json") ==
        slurp(b.str() + "/out/seed_1/checkpoint.json"));
}

TEST_CASE("metric aggregation holds last values on an even grid") {
  std::vector<MetricsRow> r1(4), r2(4);
  for (int i = 0; i < 4; ++i) {
    r1[static_cast<std::size_t>(i)].episode = r2[static_cast<std::size_t>(i)].episode = i;
    r1[static_cast<std::size_t>(i)].env_steps = 10 * (i + 1);       // ends at 40
    r2[static_cast<std::size_t>(i)].env_steps = 12 * (i + 1);       // ends at 48
    r1[static_cast<std::size_t>(i)].forbidden_count = 5;
    r2[static_cast<std::size_t>(i)].forbidden_count = 10;
    r1[static_cast<std::size_t>(i)].episode_return = 1.0;
    r2[static_cast<std::size_t>(i)].episode_return = 3.0;
  }
  const SeriesBand band = aggregate_metric({r1, r2}, "forbidden", 5);
  REQUIRE(band.grid.size() == 5);
  CHECK(band.grid.front() == 0);
  CHECK(band.grid.back() == 40);  // the shorter run caps the grid
  // cumulative forbidden at step 40: r1 has 4 episodes done (20), r2 has 3 (30)
  CHECK(band.mean.back() == doctest::Approx(25.0));
  CHECK(band.lower.back() <= band.mean.back());
  CHECK(band.upper.back() >= band.mean.back());
  // before any episode completes every run reads zero
  CHECK(band.mean.front() == doctest::Approx(0.0));

  const SeriesBand ret = aggregate_metric({r1, r2}, "return", 5);
  CHECK(ret.mean.back() == doctest::Approx(2.0));

  CHECK_THROWS(aggregate_metric({r1, r2}, "no_such_metric", 5));
  CHECK_THROWS(aggregate_metric({}, "return", 5));
}

TEST_CASE("comparison table needs two seeds per side") {
  std::vector<MetricsRow> rows(3);
  for (int i = 0; i < 3; ++i) {
    rows[static_cast<std::size_t>(i)].episode = i;
    rows[static_cast<std::size_t>(i)].env_steps = 10 * (i + 1);
    rows[static_cast<std::size_t>(i)].success = 1;
    rows[static_cast<std::size_t>(i)].forbidden_count = 3;
    rows[static_cast<std::size_t>(i)].episode_return = 2.0;
  }
  CHECK_THROWS(compare_runs({rows}, {rows, rows}));
  const CompareSummary sum = compare_runs({rows, rows}, {rows, rows});
  CHECK(sum.a.seeds == 2);
  CHECK(sum.a.final_success_mean == doctest::Approx(1.0));
  CHECK(sum.a.forbidden_mean == doctest::Approx(9.0));
  CHECK(sum.a.forbidden_std == doctest::Approx(0.0));
  CHECK_FALSE(sum.table.empty());
}

TEST_CASE("plot files carry a four-column band") {
  std::vector<MetricsRow> rows(3);
  for (int i = 0; i < 3; ++i) {
    rows[static_cast<std::size_t>(i)].episode = i;
    rows[static_cast<std::size_t>(i)].env_steps = 10 * (i + 1);
    rows[static_cast<std::size_t>(i)].epsilon = 0.5;
  }
  TempDir dir("plot");
  const std::string path = dir.str() + "/eps.dat";
  emit_plot_data({rows, rows}, "epsilon", path, 7);
  std::ifstream in(path);
  REQUIRE(in.good());
  std::string header;
  std::getline(in, header);
  CHECK(header.rfind("# env_steps", 0) == 0);
  long steps;
  double mean, lo, hi;
  int lines = 0;
  while (in >> steps >> mean >> lo >> hi) {
    ++lines;
    CHECK(lo <= mean + 1e-12);
    CHECK(hi >= mean - 1e-12);
  }
  CHECK(lines == 7);
  CHECK(std::find(plot_metric_names().begin(), plot_metric_names().end(), "epsilon") !=
        plot_metric_names().end());
}

TEST_CASE("separation report scores on-policy states") {
  EnvConfig ec;
  ec.width = 5;
  ec.height = 5;
  ec.room_types = 2;
  ec.max_steps = 30;
  auto env = make_env<float>(ec);
  const LayerChain chain = q_chain_for(env->spec(), 8);
  const NetworkParams<float> params = init_params<float>(chain, 4);
  const SeparationReport rep = q_separation_report(*env, chain, params, 25, 0.2, 3);
  CHECK(rep.n_states == 25);
  CHECK(rep.n_scored > 0);
  CHECK(rep.n_scored <= rep.n_states);
  CHECK(rep.fraction_separated >= 0.0);
  CHECK(rep.fraction_separated <= 1.0);
  CHECK_FALSE(rep.dump.empty());
  // a deterministic report for a deterministic seed
  const SeparationReport again = q_separation_report(*env, chain, params, 25, 0.2, 3);
  CHECK(again.fraction_separated == rep.fraction_separated);
  CHECK(again.dump == rep.dump);
}
