#pragma once

#include "dqnf/grid_rooms.hpp"

namespace dqnf {

/// Exact action values over the enumerable (x, y, dir) grid states.
struct QTable {
  int width = 0;
  int height = 0;
  int action_count = 0;
  std::vector<int> state_of_pose;  // [width*height*4], -1 where no state
  std::vector<Pose> poses;         // per state index
  std::vector<double> q;           // [states x action_count]
  std::vector<double> v;           // max valid-action value per state

  int state_index(const Pose& pose) const {
    if (pose.x < 0 || pose.x >= width || pose.y < 0 || pose.y >= height) return -1;
    return state_of_pose[static_cast<std::size_t>((pose.y * width + pose.x) * 4 + pose.dir)];
  }
  double at(int state, int action) const {
    return q[static_cast<std::size_t>(state) * static_cast<std::size_t>(action_count) +
             static_cast<std::size_t>(action)];
  }
};

/// Value iteration restricted to valid actions, swept until the residual
/// drops below 1e-10. Forbidden entries are filled afterward from the
/// self-loop relation Q(s, a-) = gamma * max_a Q(s, a). Refuses layouts
/// whose pose count exceeds max_states.
QTable value_iteration_oracle(const GridLayout& layout, double gamma, long max_states = 20000);

/// Fewest valid-action steps from every pose to the goal, by breadth-first
/// search; aligned with the QTable state indexing.
std::vector<int> optimal_path_lengths(const GridLayout& layout);

}  // namespace dqnf
