#include <doctest.h>

#include <cmath>
#include <memory>

#include "dqnf/agent.hpp"
#include "dqnf/grid_rooms.hpp"

using namespace dqnf;

namespace {

std::shared_ptr<const Tensor<float>> make_obs(std::vector<float> v) {
  return std::make_shared<Tensor<float>>(std::vector<int>{static_cast<int>(v.size())},
                                         std::move(v));
}

// Chi-square critical values at the 0.01 level (Wilson-Hilferty).
constexpr double kChi2Df14 = 29.166;
constexpr double kChi2Df7 = 18.504;

}  // namespace

TEST_CASE("epsilon decays linearly then clamps") {
  const ExplorationSchedule sched{1.0, 0.05, 1000};
  CHECK(sched.epsilon(0) == doctest::Approx(1.0));
  CHECK(sched.epsilon(500) == doctest::Approx(0.525));
  CHECK(sched.epsilon(1000) == doctest::Approx(0.05));
  CHECK(sched.epsilon(10000) == doctest::Approx(0.05));
  CHECK_THROWS(ExplorationSchedule{-0.1, 0.05, 100}.validate());
  CHECK_THROWS(ExplorationSchedule{0.05, 1.0, 100}.validate());  // must not grow
}

TEST_CASE("agent config rejects inconsistent settings") {
  AgentConfig ok;
  CHECK_NOTHROW(ok.validate());
  AgentConfig bad = ok;
  bad.batch_size = 0;
  CHECK_THROWS(bad.validate());
  bad = ok;
  bad.learn_start = static_cast<long>(ok.replay_capacity) + 1;
  CHECK_THROWS(bad.validate());
  bad = ok;
  bad.gamma = 1.0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("argmax breaks ties toward the lowest index") {
  CHECK(argmax_action({0.1, 0.9, 0.3}) == 1);
  CHECK(argmax_action({0.5, 0.2, 0.5}) == 0);
  CHECK(argmax_action({-1.0}) == 0);
}

TEST_CASE("greedy selection follows the network argmax") {
  LayerChain chain{LayerSpec::dense(2, 3)};
  NetworkParams<float> p = init_params<float>(chain, 1);
  p.weights[0].data = {1, 0, 0, 1, 0, 0};  // q = [x0, x1, 0]
  p.biases[0].data = {0, 0, 0};
  Rng rng(4);
  Tensor<float> obs({2}, {0.2f, 0.9f});
  CHECK(select_action(chain, p, obs, 0.0, rng) == 1);
  const std::vector<double> q = q_values(chain, p, obs);
  CHECK(q[0] == doctest::Approx(0.2));
  CHECK(q[1] == doctest::Approx(0.9));
}

TEST_CASE("action selection consumes a fixed rng budget") {
  LayerChain chain{LayerSpec::dense(2, 3)};
  NetworkParams<float> p = init_params<float>(chain, 1);
  Tensor<float> obs({2}, {0.5f, 0.5f});

  // exploit path: one uniform draw
  Rng a(9), b(9);
  select_action(chain, p, obs, 0.0, a);
  b.uniform();
  for (int i = 0; i < 5; ++i) CHECK(a.uniform() == b.uniform());

  // explore path: one uniform plus one integer draw
  Rng c(9), d(9);
  select_action(chain, p, obs, 1.0, c);
  d.uniform();
  d.uniform_int(3);
  for (int i = 0; i < 5; ++i) CHECK(c.uniform() == d.uniform());
}

TEST_CASE("full exploration is uniform over 15 actions") {
  LayerChain chain{LayerSpec::dense(2, 15)};
  NetworkParams<float> p = init_params<float>(chain, 1);
  Tensor<float> obs({2}, {0.1f, 0.2f});
  Rng rng(31);
  std::vector<int> counts(15, 0);
  const int n = 6000;
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(select_action(chain, p, obs, 1.0, rng))];
  const double expect = n / 15.0;
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - expect) * (c - expect) / expect;
  CHECK(chi2 < kChi2Df14);
}

TEST_CASE("replay ring keeps the newest transitions in order") {
  ReplayBuffer<float> buf(4);
  for (int i = 0; i < 6; ++i) {
    auto s = make_obs({static_cast<float>(i)});
    buf.push({s, i, 0.0, make_obs({static_cast<float>(i) + 0.5f}), false, 0});
  }
  CHECK(buf.size() == 4);
  CHECK(buf.total_pushed() == 6);
  for (std::size_t i = 0; i < 4; ++i) CHECK(buf.at(i).a == static_cast<int>(i) + 2);
  CHECK_THROWS(buf.at(4));
}

TEST_CASE("replay rejects malformed feedback transitions") {
  ReplayBuffer<float> buf(4);
  auto s = make_obs({1.0f});
  CHECK_NOTHROW(buf.push({s, 0, 0.0, s, false, 1}));
  // feedback steps cannot carry reward
  CHECK_THROWS(buf.push({s, 0, 0.5, s, false, 1}));
  // and must keep the identical observation object
  CHECK_THROWS(buf.push({s, 0, 0.0, make_obs({1.0f}), false, 1}));
}

TEST_CASE("replay sampling is uniform with replacement") {
  ReplayBuffer<float> buf(8);
  for (int i = 0; i < 8; ++i) {
    auto s = make_obs({static_cast<float>(i)});
    buf.push({s, i, 0.0, s, false, 1});
  }
  Rng rng(5);
  std::vector<int> counts(8, 0);
  const int n = 4000;
  for (int i = 0; i < n / 4; ++i) {
    for (const Transition<float>* t : buf.sample(4, rng)) ++counts[static_cast<std::size_t>(t->a)];
  }
  const double expect = n / 8.0;
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - expect) * (c - expect) / expect;
  CHECK(chi2 < kChi2Df7);
}

TEST_CASE("stacked batches add a leading batch dimension") {
  ReplayBuffer<float> buf(4);
  buf.push({make_obs({1, 2}), 0, 0.0, make_obs({3, 4}), false, 0});
  buf.push({make_obs({5, 6}), 1, 0.0, make_obs({7, 8}), false, 0});
  std::vector<const Transition<float>*> batch{&buf.at(0), &buf.at(1)};
  const Tensor<float> s = stack_batch(batch, false);
  CHECK(s.shape == std::vector<int>{2, 2});
  CHECK(s.data == std::vector<float>{1, 2, 5, 6});
  const Tensor<float> sn = stack_batch(batch, true);
  CHECK(sn.data == std::vector<float>{3, 4, 7, 8});
}

TEST_CASE("td error restricted to the taken action") {
  Tensor<float> q({1, 3}, {0.2f, 0.8f, -0.1f});
  Tensor<float> grad(q.shape);
  const double loss = td_output_gradient(q, {0}, {0.7}, 1.0, grad);
  CHECK(loss == doctest::Approx(0.25));  // (0.7 - 0.2)^2
  CHECK(grad.data[0] == doctest::Approx(-1.0));  // 2 * (0.2 - 0.7) / 1
  CHECK(grad.data[1] == 0.0f);
  CHECK(grad.data[2] == 0.0f);

  Tensor<float> grad_half(q.shape);
  td_output_gradient(q, {0}, {0.7}, 0.5, grad_half);
  CHECK(grad_half.data[0] == doctest::Approx(-0.5));
}

TEST_CASE("double dqn targets split selection from valuation") {
  LayerChain chain{LayerSpec::dense(2, 2)};
  NetworkParams<float> online = init_params<float>(chain, 1);
  online.weights[0].data = {1, 0, 0, 0};  // argmax from coordinate 0
  online.biases[0].data = {0, 0};
  NetworkParams<float> target = online;
  target.weights[0].data = {0, 0, 0, 1};
  target.biases[0].data = {0.5f, 0.25f};  // Q_t = [0.5, 0.25 + x1]

  auto s = make_obs({1.0f, 0.0f});
  auto s2 = make_obs({2.0f, 3.0f});
  Transition<float> step{s, 0, 0.125, s2, false, 0};
  Transition<float> fin{s, 1, 2.0, s2, true, 0};
  std::vector<const Transition<float>*> batch{&step, &fin};
  const std::vector<double> y = double_dqn_targets(chain, online, target, batch, 0.5);
  // online argmax at s2 = [2, 3] under q = [x0, 0] is action 0; target values it 0.5
  CHECK(y[0] == doctest::Approx(0.125 + 0.5 * 0.5));
  CHECK(y[1] == doctest::Approx(2.0));  // terminal keeps the bare reward

  SUBCASE("gamma zero reduces to the reward") {
    const std::vector<double> y0 = double_dqn_targets(chain, online, target, batch, 0.0);
    CHECK(y0[0] == doctest::Approx(0.125));
  }
}

TEST_CASE("rejected self-loops bootstrap toward gamma times the state value") {
  // On {s, a, r=0, s_next=s, not done} the vanilla target is gamma * max_a
  // Q(s, a): exactly the contraction that drags Q(s, forbidden) down slowly
  // instead of separating it.
  LayerChain chain{LayerSpec::dense(2, 3)};
  NetworkParams<float> net = init_params<float>(chain, 1);
  net.weights[0].data = {1, 0, 0, 1, 0, 0};
  net.biases[0].data = {0, 0, 0};
  auto s = make_obs({0.3f, 0.9f});  // Q(s) = [0.3, 0.9, 0]
  Transition<float> loop{s, 2, 0.0, s, false, 1};
  std::vector<const Transition<float>*> batch{&loop};
  const std::vector<double> y = double_dqn_targets(chain, net, net, batch, 0.99);
  CHECK(y[0] == doctest::Approx(0.99 * 0.9));
}

TEST_CASE("agent trains only after the warm-up and on its own cadence") {
  LayerChain chain{LayerSpec::dense(2, 3)};
  AgentConfig cfg;
  cfg.batch_size = 2;
  cfg.learn_start = 5;
  cfg.train_every = 2;
  cfg.replay_capacity = 50;
  cfg.total_env_steps = 100;
  cfg.exploration.decay_steps = 10;
  FrontierConfig fc;
  fc.enabled = false;
  DqnAgent<float> agent(chain, cfg, fc, 7);

  auto s = make_obs({0.1f, 0.2f});
  int reports = 0;
  for (int i = 1; i <= 10; ++i) {
    auto rep = agent.observe({s, 0, 0.0, s, false, 1});
    const bool due = i >= 5 && i % 2 == 0;
    CHECK(rep.has_value() == due);
    reports += rep.has_value();
  }
  CHECK(reports == 3);  // steps 6, 8, 10
  CHECK(agent.grad_steps() == 3);
  CHECK(agent.env_steps() == 10);
}

TEST_CASE("frontier toggle leaves init and action streams untouched") {
  LayerChain chain{LayerSpec::dense(2, 3)};
  AgentConfig cfg;
  cfg.learn_start = 100;
  cfg.replay_capacity = 200;
  FrontierConfig on;
  FrontierConfig off;
  off.enabled = false;
  DqnAgent<float> a(chain, cfg, on, 11);
  DqnAgent<float> b(chain, cfg, off, 11);
  CHECK(a.online().weights[0].data == b.online().weights[0].data);
  CHECK(a.classifier().weights[0].data == b.classifier().weights[0].data);
  Tensor<float> obs({2}, {0.4f, 0.1f});
  for (int i = 0; i < 50; ++i) CHECK(a.act(obs) == b.act(obs));
}

TEST_CASE("target network syncs on the configured period") {
  LayerChain chain{LayerSpec::dense(2, 3)};
  AgentConfig cfg;
  cfg.batch_size = 2;
  cfg.learn_start = 2;
  cfg.train_every = 1;
  cfg.replay_capacity = 50;
  cfg.target_update_period = 3;
  cfg.lr_start = 1e-2;
  cfg.lr_end = 1e-2;
  cfg.total_env_steps = 100;
  FrontierConfig fc;
  fc.enabled = false;
  DqnAgent<float> agent(chain, cfg, fc, 3);
  CHECK(agent.online().weights[0].data == agent.target().weights[0].data);

  auto s = make_obs({0.5f, -0.5f});
  auto s2 = make_obs({-0.5f, 0.5f});
  std::vector<bool> synced;
  for (int i = 0; i < 7; ++i) {
    auto rep = agent.observe({s, i % 3, 0.3, s2, false, 0});
    if (rep) {
      synced.push_back(rep->target_synced);
      if (!rep->target_synced) {
        CHECK(agent.online().weights[0].data != agent.target().weights[0].data);
      } else {
        CHECK(agent.online().weights[0].data == agent.target().weights[0].data);
      }
    }
  }
  CHECK(synced == std::vector<bool>{false, false, true, false, false, true});
}

TEST_CASE("training is bitwise repeatable for a fixed seed") {
  LayerChain chain{LayerSpec::dense(2, 3)};
  AgentConfig cfg;
  cfg.batch_size = 4;
  cfg.learn_start = 4;
  cfg.replay_capacity = 64;
  cfg.lr_start = 1e-3;
  cfg.lr_end = 1e-4;
  cfg.total_env_steps = 60;
  cfg.exploration.decay_steps = 30;
  const FrontierConfig fc;

  const auto run = [&] {
    DqnAgent<float> agent(chain, cfg, fc, 21);
    Rng rng(77);
    std::vector<double> losses;
    auto prev = make_obs({static_cast<float>(rng.uniform()), static_cast<float>(rng.uniform())});
    for (int i = 0; i < 60; ++i) {
      const int a = agent.act(*prev);
      const bool rejected = (a == 2);
      auto next = rejected
                      ? prev
                      : make_obs({static_cast<float>(rng.uniform()), static_cast<float>(rng.uniform())});
      const double r = rejected ? 0.0 : rng.uniform();
      auto rep = agent.observe({prev, a, r, next, false, rejected ? 1 : 0});
      if (rep) {
        losses.push_back(rep->dqn_loss);
        losses.push_back(rep->frontier_loss);
        losses.push_back(rep->classifier_bce);
      }
      prev = next;
    }
    return losses;
  };
  const auto first = run();
  CHECK_FALSE(first.empty());
  CHECK(first == run());
}

TEST_CASE("runaway learning rates raise DivergenceError") {
  LayerChain chain{LayerSpec::dense(2, 3)};
  AgentConfig cfg;
  cfg.batch_size = 2;
  cfg.learn_start = 2;
  cfg.replay_capacity = 16;
  cfg.lr_start = 1e30;
  cfg.lr_end = 1e30;
  cfg.total_env_steps = 100;
  FrontierConfig fc;
  fc.enabled = false;
  DqnAgent<float> agent(chain, cfg, fc, 5);
  auto s = make_obs({0.5f, 1.0f});
  auto step_all = [&] {
    for (int i = 0; i < 50; ++i) agent.observe({s, 0, 1.0, s, false, 0});
  };
  CHECK_THROWS_AS(step_all(), DivergenceError);
}

TEST_CASE("agent loss sequence reacts to the frontier switch") {
  // same seed, same data; only the margin term differs
  LayerChain chain{LayerSpec::dense(2, 3)};
  AgentConfig cfg;
  cfg.batch_size = 4;
  cfg.learn_start = 4;
  cfg.replay_capacity = 64;
  cfg.lr_start = 1e-3;
  cfg.lr_end = 1e-3;
  cfg.total_env_steps = 200;
  FrontierConfig on;
  FrontierConfig off;
  off.enabled = false;
  DqnAgent<float> a(chain, cfg, on, 9);
  DqnAgent<float> b(chain, cfg, off, 9);
  auto s = make_obs({1.0f, 0.0f});
  double fl = 0.0;
  for (int i = 0; i < 40; ++i) {
    const int act = i % 3;
    const bool rej = act == 2;
    auto ra = a.observe({s, act, 0.0, s, rej ? false : true, rej ? 1 : 0});
    auto rb = b.observe({s, act, 0.0, s, rej ? false : true, rej ? 1 : 0});
    if (ra) fl += ra->frontier_loss;
    if (rb) CHECK(rb->frontier_loss == 0.0);
  }
  CHECK(fl >= 0.0);
  // the margin gradient must push the two parameter sets apart
  CHECK(a.online().weights[0].data != b.online().weights[0].data);
}
