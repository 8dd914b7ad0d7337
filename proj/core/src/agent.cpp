#include "dqnf/agent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dqnf {

double ExplorationSchedule::epsilon(long env_step) const {
  if (env_step >= decay_steps) return eps_end;
  const double frac = static_cast<double>(env_step) / static_cast<double>(decay_steps);
  return eps_start + (eps_end - eps_start) * frac;
}

void ExplorationSchedule::validate() const {
  if (eps_start < 0.0 || eps_start > 1.0 || eps_end < 0.0 || eps_end > 1.0) {
    throw std::invalid_argument("epsilon bounds must lie in [0, 1]");
  }
  if (eps_end > eps_start) throw std::invalid_argument("epsilon must not increase over time");
  if (decay_steps < 1) throw std::invalid_argument("epsilon decay horizon must be positive");
}

void AgentConfig::validate() const {
  if (gamma < 0.0 || gamma >= 1.0) throw std::invalid_argument("gamma must be in [0, 1)");
  if (batch_size < 1) throw std::invalid_argument("batch size must be positive");
  if (target_update_period < 1) throw std::invalid_argument("target update period must be >= 1");
  if (learn_start < 1) throw std::invalid_argument("learn start must be positive");
  if (train_every < 1) throw std::invalid_argument("train-every period must be positive");
  if (replay_capacity == 0) throw std::invalid_argument("replay capacity must be positive");
  if (static_cast<std::size_t>(learn_start) > replay_capacity) {
    throw std::invalid_argument("learn start cannot exceed the replay capacity");
  }
  if (lr_start <= 0.0 || lr_end <= 0.0 || lr_end > lr_start) {
    throw std::invalid_argument("learning rate must decay from lr_start to a positive lr_end");
  }
  if (weight_decay < 0.0) throw std::invalid_argument("weight decay must be >= 0");
  if (total_env_steps < 1) throw std::invalid_argument("total env steps must be positive");
  exploration.validate();
}

template <typename T>
std::vector<double> q_values(const LayerChain& chain, const NetworkParams<T>& params,
                             const Tensor<T>& obs) {
  Tensor<T> out = forward(chain, params, obs);
  std::vector<double> q(out.data.begin(), out.data.end());
  for (double v : q) {
    if (!std::isfinite(v)) throw DivergenceError("Q-network produced a non-finite value");
  }
  return q;
}

int argmax_action(const std::vector<double>& q) {
  if (q.empty()) throw std::invalid_argument("empty Q-vector");
  int best = 0;
  for (int a = 1; a < static_cast<int>(q.size()); ++a) {
    if (q[static_cast<std::size_t>(a)] > q[static_cast<std::size_t>(best)]) best = a;
  }
  return best;
}

template <typename T>
int select_action(const LayerChain& chain, const NetworkParams<T>& params, const Tensor<T>& obs,
                  double epsilon, Rng& rng) {
  if (epsilon < 0.0 || epsilon > 1.0) throw std::invalid_argument("epsilon must be in [0, 1]");
  std::vector<double> q = q_values(chain, params, obs);
  if (rng.uniform() < epsilon) return rng.uniform_int(static_cast<int>(q.size()));
  return argmax_action(q);
}

template <typename T>
std::vector<double> double_dqn_targets(const LayerChain& chain, const NetworkParams<T>& online,
                                       const NetworkParams<T>& target,
                                       const std::vector<const Transition<T>*>& batch,
                                       double gamma) {
  if (batch.empty()) throw std::invalid_argument("batch must be non-empty");
  std::vector<double> y(batch.size());
  bool any_bootstrap = false;
  for (const Transition<T>* t : batch) any_bootstrap |= !t->done;
  if (any_bootstrap) {
    Tensor<T> next = stack_batch(batch, true);
    Tensor<T> q_online = forward(chain, online, next);
    Tensor<T> q_target = forward(chain, target, next);
    const int n_actions = q_online.dim(1);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (batch[i]->done) {
        y[i] = batch[i]->r;
        continue;
      }
      const T* row = q_online.ptr() + i * static_cast<std::size_t>(n_actions);
      int best = 0;
      for (int a = 1; a < n_actions; ++a) {
        if (row[a] > row[best]) best = a;
      }
      const double boot =
          static_cast<double>(q_target.data[i * static_cast<std::size_t>(n_actions) +
                                            static_cast<std::size_t>(best)]);
      y[i] = batch[i]->r + gamma * boot;
    }
  } else {
    for (std::size_t i = 0; i < batch.size(); ++i) y[i] = batch[i]->r;
  }
  for (double v : y) {
    if (!std::isfinite(v)) throw DivergenceError("TD target is not finite");
  }
  return y;
}

template <typename T>
double td_output_gradient(const Tensor<T>& q, const std::vector<int>& actions,
                          const std::vector<double>& targets, double weight, Tensor<T>& out_grad,
                          const std::vector<int>* skip) {
  if (q.rank() != 2) throw std::invalid_argument("q must be [batch, actions]");
  const int batch = q.dim(0);
  const int n_actions = q.dim(1);
  if (static_cast<int>(actions.size()) != batch || static_cast<int>(targets.size()) != batch) {
    throw std::invalid_argument("actions and targets must match the batch size");
  }
  if (skip && static_cast<int>(skip->size()) != batch) {
    throw std::invalid_argument("skip mask must match the batch size");
  }
  if (!out_grad.same_shape(q)) throw std::invalid_argument("out_grad must match q's shape");
  double loss = 0.0;
  for (int i = 0; i < batch; ++i) {
    const int a = actions[static_cast<std::size_t>(i)];
    if (a < 0 || a >= n_actions) throw std::invalid_argument("action index out of range");
    if (skip && (*skip)[static_cast<std::size_t>(i)] != 0) continue;
    const std::size_t at = static_cast<std::size_t>(i * n_actions + a);
    const double diff = static_cast<double>(q.data[at]) - targets[static_cast<std::size_t>(i)];
    loss += diff * diff;
    out_grad.data[at] += static_cast<T>(weight * 2.0 * diff / batch);
  }
  loss /= batch;
  if (!std::isfinite(loss)) throw DivergenceError("TD loss is not finite");
  return loss;
}

template <typename T>
DqnAgent<T>::DqnAgent(LayerChain q_chain, AgentConfig config, FrontierConfig frontier,
                      std::uint64_t seed)
    : q_chain_(std::move(q_chain)),
      cls_chain_(with_sigmoid_head(q_chain_)),
      cfg_(config),
      frontier_(frontier),
      online_(init_params<T>(q_chain_, mix_seed(seed, 1))),
      target_(online_),
      classifier_(init_params<T>(cls_chain_, mix_seed(seed, 2))),
      opt_(init_opt_state(online_)),
      cls_opt_(init_opt_state(classifier_)),
      replay_(config.replay_capacity),
      action_rng_(mix_seed(seed, 3)),
      sample_rng_(mix_seed(seed, 4)) {
  cfg_.validate();
  frontier_.validate();
}

template <typename T>
int DqnAgent<T>::act(const Tensor<T>& obs) {
  return select_action(q_chain_, online_, obs, epsilon(), action_rng_);
}

template <typename T>
double DqnAgent<T>::lr() const {
  const long step = std::min(env_steps_, cfg_.total_env_steps);
  return lr_schedule(step, cfg_.total_env_steps, cfg_.lr_start, cfg_.lr_end);
}

template <typename T>
std::optional<TrainReport> DqnAgent<T>::observe(Transition<T> t) {
  replay_.push(std::move(t));
  ++env_steps_;
  if (static_cast<long>(replay_.size()) < cfg_.learn_start) return std::nullopt;
  if (env_steps_ % cfg_.train_every != 0) return std::nullopt;
  return train_step();
}

template <typename T>
TrainReport DqnAgent<T>::train_step() {
  const auto batch = replay_.sample(static_cast<std::size_t>(cfg_.batch_size), sample_rng_);
  const int batch_size = static_cast<int>(batch.size());
  std::vector<int> actions(batch.size());
  std::vector<int> feedback(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    actions[i] = batch[i]->a;
    feedback[i] = batch[i]->f;
  }

  const std::vector<double> targets =
      double_dqn_targets(q_chain_, online_, target_, batch, cfg_.gamma);

  Tensor<T> states = stack_batch(batch, false);
  ForwardTrace<T> trace;
  Tensor<T> q = forward(q_chain_, online_, states, &trace);
  Tensor<T> out_grad(q.shape);

  TrainReport report;
  report.lr = lr();
  const double td_weight = frontier_.enabled ? frontier_.lambda_dqn : 1.0;
  // With the margin term on, rejected transitions leave the Bellman loss:
  // their self-loop backup (toward gamma * V) would fight the hinge and pin
  // Q(s, a-) above the margin floor.
  report.dqn_loss = td_output_gradient(q, actions, targets, td_weight, out_grad,
                                       frontier_.enabled ? &feedback : nullptr);

  if (frontier_.enabled) {
    // Valid sets come from the classifier as it stood before this tick's
    // update; the update itself uses the same forward pass.
    Tensor<T> probs;
    const ClassifierStepReport cls =
        classifier_train_step(cls_chain_, classifier_, cls_opt_, states, actions, feedback,
                              frontier_.classifier_lr, cfg_.weight_decay, &probs);
    report.classifier_bce = cls.bce;
    report.classifier_acc = cls.accuracy;

    const int n_actions = q.dim(1);
    double j_f = 0.0;
    for (int i = 0; i < batch_size; ++i) {
      if (feedback[static_cast<std::size_t>(i)] != 1) continue;
      const T* q_row = q.ptr() + static_cast<std::size_t>(i) * static_cast<std::size_t>(n_actions);
      const T* p_row =
          probs.ptr() + static_cast<std::size_t>(i) * static_cast<std::size_t>(n_actions);
      std::vector<double> qv(q_row, q_row + n_actions);
      std::vector<double> pv(p_row, p_row + n_actions);
      const int forbidden = actions[static_cast<std::size_t>(i)];
      const std::vector<int> valid = predict_valid_set(pv, frontier_.tau, forbidden);
      const FrontierTerm term = frontier_loss(qv, forbidden, valid, frontier_.margin);
      j_f += term.loss;
      if (term.argmin_valid >= 0 && term.violation > 0.0) {
        const double scale = frontier_.lambda_f * 2.0 * term.violation / batch_size;
        T* g_row =
            out_grad.ptr() + static_cast<std::size_t>(i) * static_cast<std::size_t>(n_actions);
        g_row[forbidden] += static_cast<T>(scale);
        g_row[term.argmin_valid] -= static_cast<T>(scale);
      }
    }
    report.frontier_loss = j_f / batch_size;
  }

  Gradients<T> grads = backward(q_chain_, online_, trace, out_grad);
  rmsprop_step(online_, grads, opt_, report.lr, cfg_.weight_decay);
  ++grad_steps_;
  if (grad_steps_ % cfg_.target_update_period == 0) {
    target_ = online_;
    report.target_synced = true;
  }
  return report;
}

template <typename T>
void DqnAgent<T>::set_networks(NetworkParams<T> online, NetworkParams<T> target,
                               NetworkParams<T> classifier) {
  online_ = std::move(online);
  target_ = std::move(target);
  classifier_ = std::move(classifier);
  opt_ = init_opt_state(online_);
  cls_opt_ = init_opt_state(classifier_);
}

template std::vector<double> q_values(const LayerChain&, const NetworkParams<float>&,
                                      const Tensor<float>&);
template std::vector<double> q_values(const LayerChain&, const NetworkParams<double>&,
                                      const Tensor<double>&);
template int select_action(const LayerChain&, const NetworkParams<float>&, const Tensor<float>&,
                           double, Rng&);
template int select_action(const LayerChain&, const NetworkParams<double>&, const Tensor<double>&,
                           double, Rng&);
template std::vector<double> double_dqn_targets(const LayerChain&, const NetworkParams<float>&,
                                                const NetworkParams<float>&,
                                                const std::vector<const Transition<float>*>&,
                                                double);
template std::vector<double> double_dqn_targets(const LayerChain&, const NetworkParams<double>&,
                                                const NetworkParams<double>&,
                                                const std::vector<const Transition<double>*>&,
                                                double);
template double td_output_gradient(const Tensor<float>&, const std::vector<int>&,
                                   const std::vector<double>&, double, Tensor<float>&,
                                   const std::vector<int>*);
template double td_output_gradient(const Tensor<double>&, const std::vector<int>&,
                                   const std::vector<double>&, double, Tensor<double>&,
                                   const std::vector<int>*);
template class DqnAgent<float>;
template class DqnAgent<double>;

}  // namespace dqnf
