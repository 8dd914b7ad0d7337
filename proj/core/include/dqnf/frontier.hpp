#pragma once

#include "dqnf/optim.hpp"

namespace dqnf {

/// Margin-loss and validity-classifier settings. `enabled == false` turns
/// the agent into plain double DQN (no classifier updates, no margin term).
struct FrontierConfig {
  bool enabled = true;
  double margin = 0.1;
  double lambda_dqn = 1.0;
  double lambda_f = 0.5;
  double tau = 0.5;
  double classifier_lr = 1e-4;

  void validate() const;
  bool operator==(const FrontierConfig&) const = default;
};

/// One margin-loss evaluation. With violation v = max(0, q[forbidden] -
/// (min valid q - margin)), the loss is v^2; its only nonzero partials are
/// d/dq[forbidden] = 2v and d/dq[argmin_valid] = -2v. An empty valid set
/// skips the term: loss 0, argmin_valid -1.
struct FrontierTerm {
  double loss = 0.0;
  double violation = 0.0;
  int argmin_valid = -1;
};

/// Squared-hinge margin loss pushing the forbidden action's value at least
/// `margin` below the smallest valid action value.
FrontierTerm frontier_loss(const std::vector<double>& q, int forbidden,
                           const std::vector<int>& valid_set, double margin);

/// Actions whose sigmoid activation exceeds tau, minus the forbidden one.
/// `probs` is one classifier output row.
std::vector<int> predict_valid_set(const std::vector<double>& probs, double tau, int forbidden);

/// Weighted sum of the two objectives.
inline double composite_loss(double j_dqn, double j_f, double lambda_dqn, double lambda_f) {
  return lambda_dqn * j_dqn + lambda_f * j_f;
}

struct ClassifierStepReport {
  double bce = 0.0;       // mean over the batch, taken-action heads only
  double accuracy = 0.0;  // fraction of taken-action heads predicting correctly
};

/// One classifier update on a batch: binary cross-entropy against target
/// 1 - f on each sample's taken-action head, every other head masked to zero
/// gradient, then an RMSprop step. `states` carries a leading batch
/// dimension matching `actions` and `feedback`. When `probs_out` is set it
/// receives the pre-update sigmoid outputs, one row per sample.
template <typename T>
ClassifierStepReport classifier_train_step(const LayerChain& chain, NetworkParams<T>& params,
                                           OptState<T>& opt, const Tensor<T>& states,
                                           const std::vector<int>& actions,
                                           const std::vector<int>& feedback, double lr,
                                           double weight_decay, Tensor<T>* probs_out = nullptr);

}  // namespace dqnf
