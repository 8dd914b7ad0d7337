#pragma once

#include <string>
#include <unordered_map>

#include "dqnf/env.hpp"

namespace dqnf {

/// World item. Fixed items carry `location`; portable ones list the places
/// (rooms or container items) a reset may put them.
struct TextObject {
  std::string name;
  bool portable = false;
  bool openable = false;
  bool container = false;
  bool lockable = false;
  bool locked = false;
  bool open = false;
  std::string unlocks_with;
  std::string location;
  std::vector<std::string> start;
  bool operator==(const TextObject&) const = default;
};

/// One-way passage; `door` names an item that must be open to pass.
struct TextExit {
  std::string from;
  std::string dir;
  std::string to;
  std::string door;
  bool operator==(const TextExit&) const = default;
};

/// A quest milestone: either a (verb, object) command or entering a room.
struct QuestStep {
  std::string verb;
  std::string object;
  std::string goto_room;
  bool operator==(const QuestStep&) const = default;
};

/// Declarative game definition. The action space is all `go <direction>`
/// commands followed by every verb x object pair, in listed order:
/// index d for direction d, then directions.size() + v * objects.size() + o.
struct TextGameDef {
  std::vector<std::string> vocab;
  std::vector<std::string> rooms;  // play starts in the first room
  std::vector<std::string> directions;
  std::vector<std::string> verbs;
  std::vector<TextObject> objects;
  std::vector<TextExit> exits;
  std::vector<QuestStep> quest;
  int max_steps = 200;
  double gamma = 0.99;

  int action_count() const {
    return static_cast<int>(directions.size() + verbs.size() * objects.size());
  }

  static TextGameDef default_game();
  static TextGameDef from_json_text(const std::string& text);
  static TextGameDef from_file(const std::string& path);

  bool operator==(const TextGameDef&) const = default;
};

/// Canonical JSON document for the built-in game; default_game() parses it.
const char* default_game_json();

/// Rule-driven text adventure with a rejected-command feedback bit. Commands
/// that the world rules refuse (object absent, door locked, verb not
/// applicable) return feedback=1 and change nothing; legal commands mutate
/// the world. Observations concatenate three bag-of-words count vectors over
/// the fixed vocabulary: last command result, room description, inventory.
template <typename T>
class MicroText final : public Environment<T> {
 public:
  explicit MicroText(TextGameDef def);

  EnvSpec spec() const override;
  std::shared_ptr<const Tensor<T>> reset(std::uint64_t seed) override;
  FeedbackStep<T> step(int action) override;
  std::vector<int> oracle_valid_set() const override;
  long total_rejections() const override { return rejections_; }
  std::unique_ptr<Environment<T>> clone() const override {
    return std::make_unique<MicroText<T>>(*this);
  }

  const TextGameDef& def() const { return def_; }
  int current_room() const { return room_; }
  int quest_progress() const { return progress_; }
  int steps_taken() const { return steps_; }
  bool done() const { return done_; }
  bool action_valid(int action) const;
  std::string action_name(int action) const;

 private:
  struct Placement {
    enum class Kind { room, inventory, container } kind = Kind::room;
    int index = 0;  // room index, or the container's object index
  };
  struct ResolvedExit {
    int from, dir, to, door;  // door -1 for a plain passage
  };

  bool visible(int obj) const;
  void advance_quest_on_command(int verb, int obj);
  void advance_quest_on_room(int room);
  Tensor<T> encode_observation() const;
  int token(const std::string& word) const;

  TextGameDef def_;
  std::unordered_map<std::string, int> vocab_index_;
  std::unordered_map<std::string, int> room_index_;
  std::unordered_map<std::string, int> object_index_;
  std::vector<ResolvedExit> exits_;
  std::vector<int> unlock_key_;           // per object, -1 if none
  std::vector<Placement> start_places_;   // fixed part; portables filled at reset
  std::vector<std::vector<Placement>> start_choices_;  // per portable object

  std::vector<Placement> places_;
  std::vector<bool> locked_;
  std::vector<bool> open_;
  std::vector<int> result_tokens_;
  int room_ = 0;
  int progress_ = 0;
  int steps_ = 0;
  bool done_ = true;
  long rejections_ = 0;
  std::shared_ptr<const Tensor<T>> current_obs_;
};

}  // namespace dqnf
