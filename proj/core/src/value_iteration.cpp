#include "dqnf/value_iteration.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>
#include <string>

namespace dqnf {

namespace {

QTable enumerate_states(const GridLayout& layout, long max_states) {
  QTable table;
  table.width = layout.width;
  table.height = layout.height;
  table.action_count = 3 * layout.room_types;
  table.state_of_pose.assign(static_cast<std::size_t>(layout.width) * layout.height * 4, -1);
  for (int y = 0; y < layout.height; ++y) {
    for (int x = 0; x < layout.width; ++x) {
      const int i = layout.index(x, y);
      if (layout.wall[i] || layout.goal[i]) continue;
      for (int dir = 0; dir < 4; ++dir) {
        if (static_cast<long>(table.poses.size()) >= max_states) {
          throw std::invalid_argument("state space exceeds the oracle bound of " +
                                      std::to_string(max_states) + " poses");
        }
        table.state_of_pose[static_cast<std::size_t>((y * layout.width + x) * 4 + dir)] =
            static_cast<int>(table.poses.size());
        table.poses.push_back({x, y, dir});
      }
    }
  }
  return table;
}

}  // namespace

QTable value_iteration_oracle(const GridLayout& layout, double gamma, long max_states) {
  if (gamma <= 0.0 || gamma >= 1.0) throw std::invalid_argument("gamma must be in (0, 1)");
  QTable table = enumerate_states(layout, max_states);
  const std::size_t n = table.poses.size();
  table.v.assign(n, 0.0);

  // Deterministic transitions; reaching the goal pays 1 and terminates.
  std::vector<double> next_v(n, 0.0);
  double residual = 1.0;
  while (residual > 1e-10) {
    residual = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      const Pose& pose = table.poses[s];
      double best = 0.0;
      for (int motion = 0; motion < 3; ++motion) {
        const Pose after = grid_apply_motion(layout, pose, motion);
        double value;
        if (layout.is_goal(after.x, after.y)) {
          value = 1.0;
        } else {
          value = gamma * table.v[static_cast<std::size_t>(table.state_index(after))];
        }
        best = std::max(best, value);
      }
      next_v[s] = best;
      residual = std::max(residual, std::abs(next_v[s] - table.v[s]));
    }
    table.v.swap(next_v);
  }

  table.q.assign(n * static_cast<std::size_t>(table.action_count), 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    const Pose& pose = table.poses[s];
    const int group = layout.room_type(pose.x, pose.y);
    for (int motion = 0; motion < 3; ++motion) {
      const Pose after = grid_apply_motion(layout, pose, motion);
      double value;
      if (layout.is_goal(after.x, after.y)) {
        value = 1.0;
      } else {
        value = gamma * table.v[static_cast<std::size_t>(table.state_index(after))];
      }
      table.q[s * static_cast<std::size_t>(table.action_count) +
              static_cast<std::size_t>(3 * group + motion)] = value;
    }
    // A rejected action self-loops, so its fixed point sits gamma below the
    // state's best value.
    const double loop = gamma * table.v[s];
    for (int a = 0; a < table.action_count; ++a) {
      if (a / 3 != group) {
        table.q[s * static_cast<std::size_t>(table.action_count) + static_cast<std::size_t>(a)] =
            loop;
      }
    }
  }
  return table;
}

std::vector<int> optimal_path_lengths(const GridLayout& layout) {
  QTable table = enumerate_states(layout, 1L << 22);
  const std::size_t n = table.poses.size();

  // Reverse adjacency over the three in-room motions, then BFS outward from
  // every pose that can step onto the goal.
  std::vector<std::vector<int>> reverse(n);
  std::vector<int> dist(n, -1);
  std::deque<int> queue;
  for (std::size_t s = 0; s < n; ++s) {
    for (int motion = 0; motion < 3; ++motion) {
      const Pose after = grid_apply_motion(layout, table.poses[s], motion);
      if (layout.is_goal(after.x, after.y)) {
        if (dist[s] < 0) {
          dist[s] = 1;
          queue.push_back(static_cast<int>(s));
        }
      } else {
        const int t = table.state_index(after);
        if (t >= 0 && t != static_cast<int>(s)) reverse[static_cast<std::size_t>(t)].push_back(static_cast<int>(s));
      }
    }
  }
  while (!queue.empty()) {
    const int t = queue.front();
    queue.pop_front();
    for (int s : reverse[static_cast<std::size_t>(t)]) {
      if (dist[static_cast<std::size_t>(s)] < 0) {
        dist[static_cast<std::size_t>(s)] = dist[static_cast<std::size_t>(t)] + 1;
        queue.push_back(s);
      }
    }
  }
  return dist;
}

}  // namespace dqnf
