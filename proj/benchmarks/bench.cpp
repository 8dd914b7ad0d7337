#include <benchmark/benchmark.h>

#include "dqnf/agent.hpp"
#include "dqnf/grid_rooms.hpp"
#include "dqnf/micro_text.hpp"

namespace {

using namespace dqnf;

template <typename T>
void bench_forward(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  GridRooms<T> env(GridLayout::generate(8, 8, 5));
  const EnvSpec spec = env.spec();
  const LayerChain chain =
      grid_q_chain(spec.observation_shape[0], spec.observation_shape[1], spec.action_count);
  const NetworkParams<T> params = init_params<T>(chain, 7);
  std::vector<int> shape = spec.observation_shape;
  shape.insert(shape.begin(), batch);
  Tensor<T> input(shape);
  Rng rng(11);
  for (auto& v : input.data) v = static_cast<T>(rng.uniform(-1.0, 1.0));
  for (auto _ : state) {
    Tensor<T> out = forward(chain, params, input);
    benchmark::DoNotOptimize(out.data.data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}

template <typename T>
void bench_train_tick(benchmark::State& state) {
  GridRooms<T> env(GridLayout::generate(8, 8, 5));
  const EnvSpec spec = env.spec();
  const LayerChain chain =
      grid_q_chain(spec.observation_shape[0], spec.observation_shape[1], spec.action_count);
  AgentConfig cfg;
  cfg.batch_size = static_cast<int>(state.range(0));
  cfg.learn_start = 64;
  cfg.exploration.decay_steps = 1000;
  DqnAgent<T> agent(chain, cfg, FrontierConfig{}, 3);
  auto obs = env.reset(1);
  std::uint64_t episode = 0;
  for (auto _ : state) {
    const int a = agent.act(*obs);
    const FeedbackStep<T> fs = env.step(a);
    agent.observe({obs, a, fs.reward, fs.observation, fs.done, fs.feedback});
    obs = fs.done ? env.reset(++episode) : fs.observation;
  }
  state.SetItemsProcessed(state.iterations());
}

template <typename T>
void bench_env_step(benchmark::State& state) {
  GridRooms<T> env(GridLayout::generate(8, 8, 5));
  Rng rng(5);
  auto obs = env.reset(1);
  std::uint64_t episode = 0;
  const int actions = env.spec().action_count;
  for (auto _ : state) {
    const FeedbackStep<T> fs = env.step(rng.uniform_int(actions));
    if (fs.done) env.reset(++episode);
  }
  state.SetItemsProcessed(state.iterations());
}

void bench_text_step(benchmark::State& state) {
  MicroText<float> env(TextGameDef::default_game());
  Rng rng(5);
  env.reset(1);
  std::uint64_t episode = 0;
  const int actions = env.spec().action_count;
  for (auto _ : state) {
    const FeedbackStep<float> fs = env.step(rng.uniform_int(actions));
    if (fs.done) env.reset(++episode);
  }
  state.SetItemsProcessed(state.iterations());
}

BENCHMARK(bench_forward<float>)->Arg(1)->Arg(32);
BENCHMARK(bench_forward<double>)->Arg(32);
BENCHMARK(bench_train_tick<float>)->Arg(16)->Arg(32);
BENCHMARK(bench_env_step<float>);
BENCHMARK(bench_text_step);

}  // namespace

BENCHMARK_MAIN();
