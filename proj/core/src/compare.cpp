#include "dqnf/compare.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dqnf {

namespace fs = std::filesystem;

namespace {

constexpr int kSuccessWindow = 100;  // trailing episodes for the success rate

struct SeriesPoint {
  long env_steps;
  double value;
};

std::vector<SeriesPoint> derive_series(const std::vector<MetricsRow>& run,
                                       const std::string& metric) {
  std::vector<SeriesPoint> series;
  series.reserve(run.size());
  double cumulative = 0.0;
  double window_sum = 0.0;
  for (std::size_t i = 0; i < run.size(); ++i) {
    const MetricsRow& r = run[i];
    double v;
    if (metric == "return") {
      v = r.episode_return;
    } else if (metric == "success") {
      window_sum += r.success;
      if (i >= kSuccessWindow) window_sum -= run[i - kSuccessWindow].success;
      v = window_sum / static_cast<double>(std::min<std::size_t>(i + 1, kSuccessWindow));
    } else if (metric == "forbidden") {
      cumulative += static_cast<double>(r.forbidden_count);
      v = cumulative;
    } else if (metric == "dqn_loss") {
      v = r.dqn_loss;
    } else if (metric == "frontier_loss") {
      v = r.frontier_loss;
    } else if (metric == "classifier_acc") {
      v = r.classifier_acc;
    } else if (metric == "epsilon") {
      v = r.epsilon;
    } else if (metric == "lr") {
      v = r.lr;
    } else {
      std::string names;
      for (const std::string& n : plot_metric_names()) names += " " + n;
      throw std::invalid_argument("unknown metric '" + metric + "'; valid metrics:" + names);
    }
    series.push_back({r.env_steps, v});
  }
  return series;
}

double value_at(const std::vector<SeriesPoint>& series, long step) {
  // Last episode finished at or before `step`; 0 before the first.
  double v = 0.0;
  for (const SeriesPoint& p : series) {
    if (p.env_steps > step) break;
    v = p.value;
  }
  return v;
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd ms;
  if (xs.empty()) return ms;
  for (double x : xs) ms.mean += x;
  ms.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - ms.mean) * (x - ms.mean);
    ms.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return ms;
}

double trailing_success(const std::vector<MetricsRow>& run) {
  const std::size_t n = std::min<std::size_t>(run.size(), kSuccessWindow);
  if (n == 0) return 0.0;
  double s = 0.0;
  for (std::size_t i = run.size() - n; i < run.size(); ++i) s += run[i].success;
  return s / static_cast<double>(n);
}

SideStats side_stats(const std::vector<std::vector<MetricsRow>>& runs) {
  SideStats stats;
  stats.seeds = static_cast<int>(runs.size());
  std::vector<double> success, forbidden, ret;
  for (const auto& run : runs) {
    success.push_back(trailing_success(run));
    double cum = 0.0;
    for (const MetricsRow& r : run) cum += static_cast<double>(r.forbidden_count);
    forbidden.push_back(cum);
    double ret_sum = 0.0;
    const std::size_t n = std::min<std::size_t>(run.size(), kSuccessWindow);
    for (std::size_t i = run.size() - n; i < run.size(); ++i) ret_sum += run[i].episode_return;
    ret.push_back(n > 0 ? ret_sum / static_cast<double>(n) : 0.0);
  }
  const MeanStd s = mean_std(success);
  const MeanStd f = mean_std(forbidden);
  const MeanStd r = mean_std(ret);
  stats.final_success_mean = s.mean;
  stats.final_success_std = s.std;
  stats.forbidden_mean = f.mean;
  stats.forbidden_std = f.std;
  stats.final_return_mean = r.mean;
  stats.final_return_std = r.std;
  return stats;
}

}  // namespace

const std::vector<std::string>& plot_metric_names() {
  static const std::vector<std::string> names = {"return",        "success",
                                                 "forbidden",     "dqn_loss",
                                                 "frontier_loss", "classifier_acc",
                                                 "epsilon",       "lr"};
  return names;
}

std::vector<std::vector<MetricsRow>> load_metric_sets(const std::string& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_directory()) continue;
    const std::string name = entry.path().filename().string();
    if (name.rfind("seed_", 0) != 0) continue;
    const fs::path csv = entry.path() / "metrics.csv";
    if (fs::exists(csv)) files.push_back(csv.string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("no seed_*/metrics.csv under " + dir);
  std::vector<std::vector<MetricsRow>> runs;
  runs.reserve(files.size());
  for (const std::string& f : files) runs.push_back(read_metrics_csv(f));
  return runs;
}

SeriesBand aggregate_metric(const std::vector<std::vector<MetricsRow>>& runs,
                            const std::string& metric, int grid_points) {
  if (runs.empty()) throw std::invalid_argument("no runs to aggregate");
  if (grid_points < 2) throw std::invalid_argument("need at least two grid points");
  long end = -1;
  std::vector<std::vector<SeriesPoint>> series;
  series.reserve(runs.size());
  for (const auto& run : runs) {
    if (run.empty()) throw std::invalid_argument("a run has no metric rows");
    series.push_back(derive_series(run, metric));
    const long last = run.back().env_steps;
    end = end < 0 ? last : std::min(end, last);
  }
  SeriesBand band;
  for (int g = 0; g < grid_points; ++g) {
    const long step =
        static_cast<long>(static_cast<double>(end) * g / static_cast<double>(grid_points - 1));
    if (!band.grid.empty() && step == band.grid.back()) continue;
    band.grid.push_back(step);
    std::vector<double> vals;
    vals.reserve(series.size());
    for (const auto& s : series) vals.push_back(value_at(s, step));
    const MeanStd ms = mean_std(vals);
    band.mean.push_back(ms.mean);
    band.lower.push_back(ms.mean - ms.std);
    band.upper.push_back(ms.mean + ms.std);
  }
  return band;
}

CompareSummary compare_runs(const std::vector<std::vector<MetricsRow>>& a,
                            const std::vector<std::vector<MetricsRow>>& b) {
  if (a.size() < 2 || b.size() < 2) {
    throw std::invalid_argument("comparison needs at least two seeds per side");
  }
  CompareSummary summary;
  summary.a = side_stats(a);
  summary.b = side_stats(b);
  long end_a = a[0].back().env_steps, end_b = b[0].back().env_steps;
  for (const auto& run : a) end_a = std::min(end_a, run.back().env_steps);
  for (const auto& run : b) end_b = std::min(end_b, run.back().env_steps);
  summary.grid_end = std::min(end_a, end_b);

  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-28s %18s %18s\n", "", "A", "B");
  out << line;
  std::snprintf(line, sizeof(line), "%-28s %18d %18d\n", "seeds", summary.a.seeds,
                summary.b.seeds);
  out << line;
  auto row = [&](const char* name, double ma, double sa, double mb, double sb) {
    std::snprintf(line, sizeof(line), "%-28s %10.4f +- %5.4f %10.4f +- %5.4f\n", name, ma, sa, mb,
                  sb);
    out << line;
  };
  row("final success rate", summary.a.final_success_mean, summary.a.final_success_std,
      summary.b.final_success_mean, summary.b.final_success_std);
  row("final episode return", summary.a.final_return_mean, summary.a.final_return_std,
      summary.b.final_return_mean, summary.b.final_return_std);
  std::snprintf(line, sizeof(line), "%-28s %10.1f +- %5.1f %10.1f +- %5.1f\n",
                "cumulative forbidden", summary.a.forbidden_mean, summary.a.forbidden_std,
                summary.b.forbidden_mean, summary.b.forbidden_std);
  out << line;
  std::snprintf(line, sizeof(line), "%-28s %18ld\n", "common env-step grid end", summary.grid_end);
  out << line;
  summary.table = out.str();
  return summary;
}

void emit_plot_data(const std::vector<std::vector<MetricsRow>>& runs, const std::string& metric,
                    const std::string& out_path, int grid_points) {
  const SeriesBand band = aggregate_metric(runs, metric, grid_points);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write plot data: " + out_path);
  out << "# env_steps mean lower upper (" << metric << ", " << runs.size() << " runs)\n";
  for (std::size_t i = 0; i < band.grid.size(); ++i) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%ld %.10g %.10g %.10g\n", band.grid[i], band.mean[i],
                  band.lower[i], band.upper[i]);
    out << buf;
  }
  if (!out) throw std::runtime_error("failed writing plot data: " + out_path);
}

}  // namespace dqnf
