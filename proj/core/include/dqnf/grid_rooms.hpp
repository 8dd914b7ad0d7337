#pragma once

#include <array>
#include <string>

#include "dqnf/env.hpp"

namespace dqnf {

/// Static grid content. Map text uses one character per cell: '#' wall,
/// 'G' goal, digits 0..k-1 floor with that room type, '.' floor with room
/// type 0.
struct GridLayout {
  int width = 0;
  int height = 0;
  int room_types = 0;

  std::vector<bool> wall;
  std::vector<bool> goal;
  std::vector<int> room;  // -1 on walls

  /// Bordered rectangle whose interior room types run in vertical bands
  /// 0..k-1 left to right, goal in the bottom-right interior cell.
  static GridLayout generate(int width, int height, int room_types);
  static GridLayout from_map_string(const std::string& text);
  static GridLayout from_map_file(const std::string& path);
  std::string to_map_string() const;

  int index(int x, int y) const { return y * width + x; }
  bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
  bool is_wall(int x, int y) const { return !in_bounds(x, y) || wall[index(x, y)]; }
  bool is_goal(int x, int y) const { return in_bounds(x, y) && goal[index(x, y)]; }
  int room_type(int x, int y) const { return in_bounds(x, y) ? room[index(x, y)] : -1; }

  /// Free cells an episode may start on (floor, not goal).
  std::vector<std::pair<int, int>> start_cells() const;
};

/// Agent placement: position plus facing direction 0=east 1=south 2=west
/// 3=north.
struct Pose {
  int x = 0;
  int y = 0;
  int dir = 0;
  bool operator==(const Pose&) const = default;
};

inline constexpr std::array<std::pair<int, int>, 4> kDirVec{{{1, 0}, {0, 1}, {-1, 0}, {0, -1}}};

/// True when `action` belongs to the action group of the agent's current
/// room: group j covers indices {3j, 3j+1, 3j+2}.
bool grid_action_allowed(const GridLayout& layout, const Pose& pose, int action);

/// Applies one in-group motion (0 turn-left, 1 turn-right, 2 forward);
/// forward into a wall keeps the position.
Pose grid_apply_motion(const GridLayout& layout, Pose pose, int motion);

/// Grid navigation with duplicated action groups: k room types, 3k actions,
/// only the 3 actions of the current room's group execute; the rest are
/// rejected with feedback=1 and leave the world untouched. Observations are
/// egocentric view x view one-hot planes with the last three frames stacked
/// along channels.
template <typename T>
class GridRooms final : public Environment<T> {
 public:
  explicit GridRooms(GridLayout layout, int max_steps = 200, double gamma = 0.99, int view = 7);

  EnvSpec spec() const override;
  std::shared_ptr<const Tensor<T>> reset(std::uint64_t seed) override;
  FeedbackStep<T> step(int action) override;
  std::vector<int> oracle_valid_set() const override;
  long total_rejections() const override { return rejections_; }
  std::unique_ptr<Environment<T>> clone() const override {
    return std::make_unique<GridRooms<T>>(*this);
  }

  /// Starts an episode at a fixed pose instead of a random one.
  std::shared_ptr<const Tensor<T>> reset_to(const Pose& pose);

  const GridLayout& layout() const { return layout_; }
  const Pose& pose() const { return pose_; }
  int steps_taken() const { return steps_; }
  bool done() const { return done_; }
  int view_size() const { return view_; }

  /// Channels per frame: wall/goal/floor one-hots + k room types + 1
  /// orientation plane.
  int frame_channels() const { return 3 + layout_.room_types + 1; }

  /// One encoded frame for an arbitrary pose (no frame stacking).
  Tensor<T> encode_frame(const Pose& pose) const;

 private:
  void push_frame();
  Tensor<T> stack_frames() const;

  GridLayout layout_;
  int max_steps_;
  double gamma_;
  int view_;
  Pose pose_{};
  int steps_ = 0;
  bool done_ = true;
  long rejections_ = 0;
  std::vector<Tensor<T>> frames_;  // most recent last, always 3 entries in-episode
  std::shared_ptr<const Tensor<T>> current_obs_;
};

}  // namespace dqnf
