#pragma once

#include "dqnf/metrics.hpp"

namespace dqnf {

/// Metrics derivable from a run's episode rows for plotting/aggregation.
/// "success" is a trailing 100-episode rate, "forbidden" the cumulative
/// rejected-action count; the rest sample the raw columns.
const std::vector<std::string>& plot_metric_names();

/// Every seed_*/metrics.csv under dir, in sorted path order.
std::vector<std::vector<MetricsRow>> load_metric_sets(const std::string& dir);

/// Mean and +-1 standard deviation over runs, sampled on an even env-step
/// grid covering [0, min over runs of final env_steps]. Values between
/// episode boundaries hold the last finished episode's value (0 before the
/// first).
struct SeriesBand {
  std::vector<long> grid;
  std::vector<double> mean;
  std::vector<double> lower;
  std::vector<double> upper;
};

SeriesBand aggregate_metric(const std::vector<std::vector<MetricsRow>>& runs,
                            const std::string& metric, int grid_points = 101);

struct SideStats {
  int seeds = 0;
  double final_success_mean = 0.0;   // trailing-window success rate
  double final_success_std = 0.0;
  double forbidden_mean = 0.0;       // cumulative rejected actions
  double forbidden_std = 0.0;
  double final_return_mean = 0.0;
  double final_return_std = 0.0;
};

struct CompareSummary {
  SideStats a;
  SideStats b;
  long grid_end = 0;
  std::string table;  // rendered text summary
};

/// Requires at least two seeds per side (the deviation is undefined
/// otherwise).
CompareSummary compare_runs(const std::vector<std::vector<MetricsRow>>& a,
                            const std::vector<std::vector<MetricsRow>>& b);

/// Writes whitespace-separated rows "env_steps mean lower upper" for one
/// metric over one run set; consumable by gnuplot and friends.
void emit_plot_data(const std::vector<std::vector<MetricsRow>>& runs, const std::string& metric,
                    const std::string& out_path, int grid_points = 101);

}  // namespace dqnf
