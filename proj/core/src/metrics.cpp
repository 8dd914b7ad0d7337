#include "dqnf/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dqnf {

namespace {

// Shortest-exact is not needed; 17 significant digits round-trip any double.
std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string metrics_to_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream out;
  out << kMetricsHeader << '\n';
  long last_steps = -1;
  for (const MetricsRow& r : rows) {
    if (r.env_steps <= last_steps) {
      throw std::invalid_argument("env_steps must increase strictly across rows");
    }
    last_steps = r.env_steps;
    out << r.episode << ',' << r.env_steps << ',' << fmt(r.episode_return) << ',' << r.success
        << ',' << r.forbidden_count << ',' << fmt(r.dqn_loss) << ',' << fmt(r.frontier_loss)
        << ',' << fmt(r.classifier_acc) << ',' << fmt(r.epsilon) << ',' << fmt(r.lr) << '\n';
  }
  return out.str();
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write metrics file: " + path);
  out << metrics_to_csv(rows);
  if (!out) throw std::runtime_error("failed writing metrics file: " + path);
}

std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open metrics file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("metrics file is empty: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMetricsHeader) {
    throw std::runtime_error("metrics header mismatch in " + path + ": " + line);
  }
  std::vector<MetricsRow> rows;
  long last_steps = -1;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() != 10) {
      throw std::runtime_error("metrics row needs 10 fields in " + path + ": " + line);
    }
    MetricsRow r;
    try {
      r.episode = std::stol(fields[0]);
      r.env_steps = std::stol(fields[1]);
      r.episode_return = std::stod(fields[2]);
      r.success = std::stoi(fields[3]);
      r.forbidden_count = std::stol(fields[4]);
      r.dqn_loss = std::stod(fields[5]);
      r.frontier_loss = std::stod(fields[6]);
      r.classifier_acc = std::stod(fields[7]);
      r.epsilon = std::stod(fields[8]);
      r.lr = std::stod(fields[9]);
    } catch (const std::exception&) {
      throw std::runtime_error("unparsable metrics row in " + path + ": " + line);
    }
    if (r.env_steps <= last_steps) {
      throw std::runtime_error("env_steps not strictly increasing in " + path);
    }
    last_steps = r.env_steps;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace dqnf
