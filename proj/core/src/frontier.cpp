#include "dqnf/frontier.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dqnf {

void FrontierConfig::validate() const {
  if (margin <= 0.0) throw std::invalid_argument("frontier margin must be positive");
  if (lambda_dqn < 0.0 || lambda_f < 0.0) throw std::invalid_argument("loss weights must be >= 0");
  if (tau <= 0.0 || tau >= 1.0) throw std::invalid_argument("tau must be in (0, 1)");
  if (classifier_lr <= 0.0) throw std::invalid_argument("classifier learning rate must be positive");
}

FrontierTerm frontier_loss(const std::vector<double>& q, int forbidden,
                           const std::vector<int>& valid_set, double margin) {
  if (forbidden < 0 || forbidden >= static_cast<int>(q.size())) {
    throw std::invalid_argument("forbidden action index out of range");
  }
  if (margin <= 0.0) throw std::invalid_argument("frontier margin must be positive");
  FrontierTerm term;
  for (int a : valid_set) {
    if (a < 0 || a >= static_cast<int>(q.size())) {
      throw std::invalid_argument("valid set entry out of range");
    }
    if (a == forbidden) throw std::invalid_argument("forbidden action cannot be in the valid set");
    if (term.argmin_valid < 0 || q[static_cast<std::size_t>(a)] < q[static_cast<std::size_t>(term.argmin_valid)]) {
      term.argmin_valid = a;
    }
  }
  if (term.argmin_valid < 0) return term;  // empty valid set: skip
  const double floor = q[static_cast<std::size_t>(term.argmin_valid)] - margin;
  term.violation = std::max(0.0, q[static_cast<std::size_t>(forbidden)] - floor);
  term.loss = term.violation * term.violation;
  return term;
}

std::vector<int> predict_valid_set(const std::vector<double>& probs, double tau, int forbidden) {
  std::vector<int> valid;
  for (int a = 0; a < static_cast<int>(probs.size()); ++a) {
    if (a != forbidden && probs[static_cast<std::size_t>(a)] > tau) valid.push_back(a);
  }
  return valid;
}

template <typename T>
ClassifierStepReport classifier_train_step(const LayerChain& chain, NetworkParams<T>& params,
                                              OptState<T>& opt, const Tensor<T>& states,
                                              const std::vector<int>& actions,
                                              const std::vector<int>& feedback, double lr,
                                              double weight_decay, Tensor<T>* probs_out) {
  const int batch = states.dim(0);
  if (static_cast<int>(actions.size()) != batch || static_cast<int>(feedback.size()) != batch) {
    throw std::invalid_argument("actions and feedback must match the batch size");
  }
  ForwardTrace<T> trace;
  Tensor<T> probs = forward(chain, params, states, &trace);
  if (probs.rank() != 2 || probs.dim(0) != batch) {
    throw std::invalid_argument("classifier must produce one output row per sample");
  }
  const int n_actions = probs.dim(1);

  ClassifierStepReport report;
  Tensor<T> out_grad(probs.shape);
  int correct = 0;
  for (int i = 0; i < batch; ++i) {
    const int a = actions[static_cast<std::size_t>(i)];
    if (a < 0 || a >= n_actions) throw std::invalid_argument("action index out of range");
    const int f = feedback[static_cast<std::size_t>(i)];
    if (f != 0 && f != 1) throw std::invalid_argument("feedback bit must be 0 or 1");
    const double target = 1.0 - f;  // the head predicts validity
    double p = static_cast<double>(probs.data[static_cast<std::size_t>(i * n_actions + a)]);
    p = std::clamp(p, 1e-7, 1.0 - 1e-7);
    report.bce += -(target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
    if ((p > 0.5) == (target > 0.5)) ++correct;
    // d(BCE)/dp, averaged over the batch; every untaken head stays zero.
    const double dp = ((p - target) / (p * (1.0 - p))) / batch;
    out_grad.data[static_cast<std::size_t>(i * n_actions + a)] = static_cast<T>(dp);
  }
  report.bce /= batch;
  report.accuracy = static_cast<double>(correct) / batch;
  if (!std::isfinite(report.bce)) throw DivergenceError("classifier loss is not finite");

  Gradients<T> grads = backward(chain, params, trace, out_grad);
  rmsprop_step(params, grads, opt, lr, weight_decay);
  if (probs_out) *probs_out = std::move(probs);
  return report;
}

template ClassifierStepReport classifier_train_step(const LayerChain&, NetworkParams<float>&,
                                                    OptState<float>&, const Tensor<float>&,
                                                    const std::vector<int>&, const std::vector<int>&,
                                                    double, double, Tensor<float>*);
template ClassifierStepReport classifier_train_step(const LayerChain&, NetworkParams<double>&,
                                                    OptState<double>&, const Tensor<double>&,
                                                    const std::vector<int>&, const std::vector<int>&,
                                                    double, double, Tensor<double>*);

}  // namespace dqnf
