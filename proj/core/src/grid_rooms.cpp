#include "dqnf/grid_rooms.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dqnf {

namespace {

void validate_layout(const GridLayout& layout) {
  if (layout.width < 3 || layout.height < 3) {
    throw std::invalid_argument("grid layout must be at least 3x3");
  }
  if (layout.room_types < 1 || layout.room_types > 10) {
    throw std::invalid_argument("grid layout needs between 1 and 10 room types");
  }
  int goals = 0;
  for (int y = 0; y < layout.height; ++y) {
    for (int x = 0; x < layout.width; ++x) {
      const int i = layout.index(x, y);
      if (layout.goal[i]) {
        ++goals;
        if (layout.wall[i]) throw std::invalid_argument("goal cell marked as wall");
      }
      if (!layout.wall[i] && !layout.goal[i]) {
        if (layout.room[i] < 0 || layout.room[i] >= layout.room_types) {
          throw std::invalid_argument("floor cell with out-of-range room type");
        }
      }
    }
  }
  if (goals == 0) throw std::invalid_argument("grid layout has no goal cell");
  if (layout.start_cells().empty()) {
    throw std::invalid_argument("grid layout has no free start cell");
  }

  // Every start cell must be able to reach a goal through non-wall cells.
  std::vector<bool> seen(static_cast<std::size_t>(layout.width) * layout.height, false);
  std::deque<std::pair<int, int>> queue;
  for (int y = 0; y < layout.height; ++y) {
    for (int x = 0; x < layout.width; ++x) {
      if (layout.goal[layout.index(x, y)]) {
        seen[layout.index(x, y)] = true;
        queue.emplace_back(x, y);
      }
    }
  }
  while (!queue.empty()) {
    auto [x, y] = queue.front();
    queue.pop_front();
    for (const auto& [dx, dy] : kDirVec) {
      const int nx = x + dx;
      const int ny = y + dy;
      if (layout.is_wall(nx, ny) || seen[layout.index(nx, ny)]) continue;
      seen[layout.index(nx, ny)] = true;
      queue.emplace_back(nx, ny);
    }
  }
  for (const auto& [x, y] : layout.start_cells()) {
    if (!seen[layout.index(x, y)]) {
      throw std::invalid_argument("grid layout has a start cell that cannot reach the goal");
    }
  }
}

}  // namespace

GridLayout GridLayout::generate(int width, int height, int room_types) {
  if (width < 3 || height < 3) {
    throw std::invalid_argument("generated grid must be at least 3x3");
  }
  const int iw = width - 2;
  if (room_types < 1 || room_types > 10 || room_types > iw) {
    throw std::invalid_argument("room type count must be in [1, min(10, interior width)]");
  }
  GridLayout layout;
  layout.width = width;
  layout.height = height;
  layout.room_types = room_types;
  const std::size_t cells = static_cast<std::size_t>(width) * height;
  layout.wall.assign(cells, false);
  layout.goal.assign(cells, false);
  layout.room.assign(cells, -1);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const bool border = x == 0 || y == 0 || x == width - 1 || y == height - 1;
      if (border) {
        layout.wall[layout.index(x, y)] = true;
      } else {
        // Vertical bands of equal-as-possible width, types left to right.
        layout.room[layout.index(x, y)] = (x - 1) * room_types / iw;
      }
    }
  }
  const int gi = layout.index(width - 2, height - 2);
  layout.goal[gi] = true;
  layout.room[gi] = -1;
  validate_layout(layout);
  return layout;
}

GridLayout GridLayout::from_map_string(const std::string& text) {
  std::vector<std::string> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && rows.empty()) continue;  // leading blank lines
    if (line.empty()) break;                     // trailing blank lines end the map
    rows.push_back(line);
  }
  if (rows.empty()) throw std::invalid_argument("map text is empty");
  const int height = static_cast<int>(rows.size());
  const int width = static_cast<int>(rows[0].size());
  GridLayout layout;
  layout.width = width;
  layout.height = height;
  const std::size_t cells = static_cast<std::size_t>(width) * height;
  layout.wall.assign(cells, false);
  layout.goal.assign(cells, false);
  layout.room.assign(cells, -1);
  int max_type = 0;
  for (int y = 0; y < height; ++y) {
    if (static_cast<int>(rows[y].size()) != width) {
      throw std::invalid_argument("map rows must all have the same length");
    }
    for (int x = 0; x < width; ++x) {
      const char c = rows[y][static_cast<std::size_t>(x)];
      const int i = layout.index(x, y);
      if (c == '#') {
        layout.wall[i] = true;
      } else if (c == 'G') {
        layout.goal[i] = true;
      } else if (c == '.') {
        layout.room[i] = 0;
      } else if (c >= '0' && c <= '9') {
        layout.room[i] = c - '0';
        max_type = std::max(max_type, c - '0');
      } else {
        throw std::invalid_argument(std::string("unexpected map character '") + c + "'");
      }
    }
  }
  layout.room_types = max_type + 1;
  validate_layout(layout);
  return layout;
}

GridLayout GridLayout::from_map_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open map file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_map_string(buf.str());
}

std::string GridLayout::to_map_string() const {
  std::string out;
  out.reserve(static_cast<std::size_t>((width + 1)) * height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const int i = index(x, y);
      if (wall[i]) {
        out.push_back('#');
      } else if (goal[i]) {
        out.push_back('G');
      } else {
        out.push_back(static_cast<char>('0' + room[i]));
      }
    }
    out.push_back('\n');
  }
  return out;
}

std::vector<std::pair<int, int>> GridLayout::start_cells() const {
  std::vector<std::pair<int, int>> cells;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const int i = index(x, y);
      if (!wall[i] && !goal[i]) cells.emplace_back(x, y);
    }
  }
  return cells;
}

bool grid_action_allowed(const GridLayout& layout, const Pose& pose, int action) {
  if (action < 0 || action >= 3 * layout.room_types) {
    throw std::invalid_argument("action index out of range");
  }
  return action / 3 == layout.room_type(pose.x, pose.y);
}

Pose grid_apply_motion(const GridLayout& layout, Pose pose, int motion) {
  switch (motion) {
    case 0:
      pose.dir = (pose.dir + 3) % 4;
      return pose;
    case 1:
      pose.dir = (pose.dir + 1) % 4;
      return pose;
    case 2: {
      const auto [dx, dy] = kDirVec[static_cast<std::size_t>(pose.dir)];
      if (!layout.is_wall(pose.x + dx, pose.y + dy)) {
        pose.x += dx;
        pose.y += dy;
      }
      return pose;
    }
    default:
      throw std::invalid_argument("motion must be 0 (left), 1 (right), or 2 (forward)");
  }
}

template <typename T>
GridRooms<T>::GridRooms(GridLayout layout, int max_steps, double gamma, int view)
    : layout_(std::move(layout)), max_steps_(max_steps), gamma_(gamma), view_(view) {
  validate_layout(layout_);
  if (max_steps_ < 1) throw std::invalid_argument("max_steps must be positive");
  if (gamma_ <= 0.0 || gamma_ >= 1.0) throw std::invalid_argument("gamma must be in (0, 1)");
  if (view_ < 1 || view_ % 2 == 0) throw std::invalid_argument("view size must be odd");
}

template <typename T>
EnvSpec GridRooms<T>::spec() const {
  EnvSpec s;
  s.action_count = 3 * layout_.room_types;
  s.observation_shape = {3 * frame_channels(), view_, view_};
  s.max_steps = max_steps_;
  s.gamma = gamma_;
  return s;
}

template <typename T>
std::shared_ptr<const Tensor<T>> GridRooms<T>::reset(std::uint64_t seed) {
  Rng rng(seed);
  const auto starts = layout_.start_cells();
  const auto& [x, y] = starts[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(starts.size())))];
  Pose pose{x, y, rng.uniform_int(4)};
  return reset_to(pose);
}

template <typename T>
std::shared_ptr<const Tensor<T>> GridRooms<T>::reset_to(const Pose& pose) {
  if (layout_.is_wall(pose.x, pose.y) || layout_.is_goal(pose.x, pose.y)) {
    throw std::invalid_argument("start pose must be on a free floor cell");
  }
  if (pose.dir < 0 || pose.dir > 3) throw std::invalid_argument("direction must be in [0, 3]");
  pose_ = pose;
  steps_ = 0;
  done_ = false;
  frames_.clear();
  // The first view fills the whole stack so the episode starts fully defined.
  Tensor<T> first = encode_frame(pose_);
  frames_.push_back(first);
  frames_.push_back(first);
  frames_.push_back(std::move(first));
  current_obs_ = std::make_shared<const Tensor<T>>(stack_frames());
  return current_obs_;
}

template <typename T>
FeedbackStep<T> GridRooms<T>::step(int action) {
  if (done_) throw std::logic_error("step called on a finished episode; call reset first");
  if (action < 0 || action >= 3 * layout_.room_types) {
    throw std::invalid_argument("action index out of range");
  }
  ++steps_;
  if (!grid_action_allowed(layout_, pose_, action)) {
    // Rejected: the world does not move, only time passes. The observation
    // object is reused so the pre and post encodings are identical.
    ++rejections_;
    done_ = steps_ >= max_steps_;
    return {current_obs_, 0.0, done_, 1};
  }
  pose_ = grid_apply_motion(layout_, pose_, action % 3);
  double reward = 0.0;
  if (layout_.is_goal(pose_.x, pose_.y)) {
    reward = 1.0;
    done_ = true;
  } else {
    done_ = steps_ >= max_steps_;
  }
  push_frame();
  current_obs_ = std::make_shared<const Tensor<T>>(stack_frames());
  return {current_obs_, reward, done_, 0};
}

template <typename T>
std::vector<int> GridRooms<T>::oracle_valid_set() const {
  if (done_) return {};
  const int t = layout_.room_type(pose_.x, pose_.y);
  return {3 * t, 3 * t + 1, 3 * t + 2};
}

template <typename T>
Tensor<T> GridRooms<T>::encode_frame(const Pose& pose) const {
  const int c = frame_channels();
  Tensor<T> frame({c, view_, view_});
  const auto [fx, fy] = kDirVec[static_cast<std::size_t>(pose.dir)];
  const auto [rx, ry] = kDirVec[static_cast<std::size_t>((pose.dir + 1) % 4)];
  const int half = view_ / 2;
  T* data = frame.ptr();
  const int plane = view_ * view_;
  for (int r = 0; r < view_; ++r) {
    // Row 0 is farthest ahead; the agent sits at the back-row center.
    const int ahead = view_ - 1 - r;
    for (int col = 0; col < view_; ++col) {
      const int lateral = col - half;
      const int wx = pose.x + ahead * fx + lateral * rx;
      const int wy = pose.y + ahead * fy + lateral * ry;
      const int cell = r * view_ + col;
      if (layout_.is_wall(wx, wy)) {
        data[cell] = T(1);
      } else if (layout_.is_goal(wx, wy)) {
        data[plane + cell] = T(1);
      } else {
        data[2 * plane + cell] = T(1);
        data[(3 + layout_.room_type(wx, wy)) * plane + cell] = T(1);
      }
    }
  }
  // Constant orientation plane in [0, 1].
  const T heading = static_cast<T>(pose.dir) / T(3);
  std::fill(data + (c - 1) * plane, data + c * plane, heading);
  return frame;
}

template <typename T>
void GridRooms<T>::push_frame() {
  frames_.erase(frames_.begin());
  frames_.push_back(encode_frame(pose_));
}

template <typename T>
Tensor<T> GridRooms<T>::stack_frames() const {
  const int c = frame_channels();
  Tensor<T> out({3 * c, view_, view_});
  T* dst = out.ptr();
  for (const Tensor<T>& frame : frames_) {
    dst = std::copy(frame.data.begin(), frame.data.end(), dst);
  }
  return out;
}

template class GridRooms<float>;
template class GridRooms<double>;

}  // namespace dqnf
