#pragma once

#include <string>
#include <vector>

namespace dqnf {

/// One training episode. Losses and accuracy average the gradient steps that
/// happened during the episode (0 when none ran).
struct MetricsRow {
  long episode = 0;
  long env_steps = 0;  // cumulative, strictly increasing across rows
  double episode_return = 0.0;
  int success = 0;
  long forbidden_count = 0;
  double dqn_loss = 0.0;
  double frontier_loss = 0.0;
  double classifier_acc = 0.0;
  double epsilon = 0.0;
  double lr = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "episode,env_steps,return,success,forbidden_count,dqn_loss,frontier_loss,"
    "classifier_acc,epsilon,lr";

std::string metrics_to_csv(const std::vector<MetricsRow>& rows);
void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics_csv(const std::string& path);

}  // namespace dqnf
