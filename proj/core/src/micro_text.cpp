#include "dqnf/micro_text.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

namespace dqnf {

namespace {

using nlohmann::json;

// Three rooms behind a locked door, seven items, four quest milestones.
// 4 directions + 6 verbs x 7 objects = 46 commands.
constexpr const char* kDefaultGameJson = R"({
  "vocab": ["kitchen", "corridor", "attic",
            "north", "east", "south", "west",
            "take", "drop", "open", "close", "unlock", "examine",
            "key", "door", "chest", "sword", "apple", "note", "lamp",
            "closed", "locked"],
  "rooms": ["kitchen", "corridor", "attic"],
  "directions": ["north", "east", "south", "west"],
  "verbs": ["take", "drop", "open", "close", "unlock", "examine"],
  "objects": [
    {"name": "key", "portable": true, "start": ["kitchen", "corridor"]},
    {"name": "door", "openable": true, "lockable": true, "locked": true,
     "unlocks_with": "key", "location": "corridor"},
    {"name": "chest", "openable": true, "container": true, "location": "kitchen"},
    {"name": "sword", "portable": true, "start": ["kitchen", "corridor", "chest"]},
    {"name": "apple", "portable": true, "start": ["kitchen", "chest"]},
    {"name": "note", "portable": true, "start": ["corridor", "chest"]},
    {"name": "lamp", "portable": true, "start": ["kitchen", "corridor"]}
  ],
  "exits": [
    {"from": "kitchen", "dir": "east", "to": "corridor"},
    {"from": "corridor", "dir": "west", "to": "kitchen"},
    {"from": "corridor", "dir": "north", "to": "attic", "door": "door"},
    {"from": "attic", "dir": "south", "to": "corridor", "door": "door"}
  ],
  "quest": [
    {"verb": "take", "object": "key"},
    {"verb": "unlock", "object": "door"},
    {"verb": "open", "object": "door"},
    {"goto": "attic"}
  ],
  "max_steps": 200,
  "gamma": 0.99
})";

std::string get_string(const json& j, const char* key, const std::string& fallback = "") {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_string()) throw std::invalid_argument(std::string("game field '") + key + "' must be a string");
  return j[key].get<std::string>();
}

bool get_bool(const json& j, const char* key) {
  if (!j.contains(key)) return false;
  if (!j[key].is_boolean()) throw std::invalid_argument(std::string("game field '") + key + "' must be a boolean");
  return j[key].get<bool>();
}

std::vector<std::string> get_string_list(const json& j, const char* key) {
  std::vector<std::string> out;
  if (!j.contains(key)) return out;
  if (!j[key].is_array()) throw std::invalid_argument(std::string("game field '") + key + "' must be an array");
  for (const auto& e : j[key]) {
    if (!e.is_string()) throw std::invalid_argument(std::string("game field '") + key + "' must hold strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

}  // namespace

const char* default_game_json() { return kDefaultGameJson; }

TextGameDef TextGameDef::default_game() { return from_json_text(kDefaultGameJson); }

TextGameDef TextGameDef::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("game definition is not valid JSON: ") + e.what());
  }
  TextGameDef def;
  def.vocab = get_string_list(j, "vocab");
  def.rooms = get_string_list(j, "rooms");
  def.directions = get_string_list(j, "directions");
  def.verbs = get_string_list(j, "verbs");
  if (j.contains("objects")) {
    for (const auto& o : j["objects"]) {
      TextObject obj;
      obj.name = get_string(o, "name");
      obj.portable = get_bool(o, "portable");
      obj.openable = get_bool(o, "openable");
      obj.container = get_bool(o, "container");
      obj.lockable = get_bool(o, "lockable");
      obj.locked = get_bool(o, "locked");
      obj.open = get_bool(o, "open");
      obj.unlocks_with = get_string(o, "unlocks_with");
      obj.location = get_string(o, "location");
      obj.start = get_string_list(o, "start");
      def.objects.push_back(std::move(obj));
    }
  }
  if (j.contains("exits")) {
    for (const auto& e : j["exits"]) {
      def.exits.push_back({get_string(e, "from"), get_string(e, "dir"), get_string(e, "to"),
                           get_string(e, "door")});
    }
  }
  if (j.contains("quest")) {
    for (const auto& q : j["quest"]) {
      def.quest.push_back({get_string(q, "verb"), get_string(q, "object"), get_string(q, "goto")});
    }
  }
  if (j.contains("max_steps")) def.max_steps = j["max_steps"].get<int>();
  if (j.contains("gamma")) def.gamma = j["gamma"].get<double>();
  return def;
}

TextGameDef TextGameDef::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open game file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

template <typename T>
MicroText<T>::MicroText(TextGameDef def) : def_(std::move(def)) {
  if (def_.rooms.empty()) throw std::invalid_argument("game needs at least one room");
  if (def_.objects.empty()) throw std::invalid_argument("game needs at least one object");
  if (def_.quest.empty()) throw std::invalid_argument("game needs a quest");
  if (def_.max_steps < 1) throw std::invalid_argument("max_steps must be positive");
  if (def_.gamma <= 0.0 || def_.gamma >= 1.0) throw std::invalid_argument("gamma must be in (0, 1)");
  if (def_.vocab.size() > 64) throw std::invalid_argument("vocabulary is capped at 64 tokens");

  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < def_.vocab.size(); ++i) {
    if (!seen.insert(def_.vocab[i]).second) {
      throw std::invalid_argument("vocabulary token repeated: " + def_.vocab[i]);
    }
    vocab_index_[def_.vocab[i]] = static_cast<int>(i);
  }
  auto require_token = [&](const std::string& word, const char* what) {
    if (!vocab_index_.count(word)) {
      throw std::invalid_argument(std::string(what) + " '" + word + "' missing from the vocabulary");
    }
  };
  for (std::size_t i = 0; i < def_.rooms.size(); ++i) {
    room_index_[def_.rooms[i]] = static_cast<int>(i);
    require_token(def_.rooms[i], "room");
  }
  for (std::size_t i = 0; i < def_.objects.size(); ++i) {
    object_index_[def_.objects[i].name] = static_cast<int>(i);
    require_token(def_.objects[i].name, "object");
  }
  for (const auto& d : def_.directions) require_token(d, "direction");
  for (const auto& v : def_.verbs) require_token(v, "verb");
  require_token("open", "state word");
  require_token("closed", "state word");
  require_token("locked", "state word");

  auto room_of = [&](const std::string& name, const char* what) {
    auto it = room_index_.find(name);
    if (it == room_index_.end()) {
      throw std::invalid_argument(std::string(what) + " references unknown room '" + name + "'");
    }
    return it->second;
  };
  auto object_of = [&](const std::string& name, const char* what) {
    auto it = object_index_.find(name);
    if (it == object_index_.end()) {
      throw std::invalid_argument(std::string(what) + " references unknown object '" + name + "'");
    }
    return it->second;
  };

  const int n_obj = static_cast<int>(def_.objects.size());
  start_places_.resize(static_cast<std::size_t>(n_obj));
  start_choices_.resize(static_cast<std::size_t>(n_obj));
  unlock_key_.assign(static_cast<std::size_t>(n_obj), -1);
  for (int i = 0; i < n_obj; ++i) {
    const TextObject& obj = def_.objects[static_cast<std::size_t>(i)];
    if (!obj.unlocks_with.empty()) {
      unlock_key_[static_cast<std::size_t>(i)] = object_of(obj.unlocks_with, "unlocks_with");
    }
    if (obj.portable) {
      if (obj.start.empty()) {
        throw std::invalid_argument("portable object '" + obj.name + "' has no start places");
      }
      for (const auto& place : obj.start) {
        if (room_index_.count(place)) {
          start_choices_[static_cast<std::size_t>(i)].push_back(
              {Placement::Kind::room, room_index_.at(place)});
        } else {
          const int holder = object_of(place, "start place");
          if (!def_.objects[static_cast<std::size_t>(holder)].container) {
            throw std::invalid_argument("start place '" + place + "' is not a container");
          }
          start_choices_[static_cast<std::size_t>(i)].push_back({Placement::Kind::container, holder});
        }
      }
    } else {
      if (obj.location.empty()) {
        throw std::invalid_argument("fixed object '" + obj.name + "' needs a location");
      }
      start_places_[static_cast<std::size_t>(i)] = {Placement::Kind::room,
                                                    room_of(obj.location, "object location")};
    }
  }

  std::unordered_set<std::string> dir_set(def_.directions.begin(), def_.directions.end());
  for (const auto& e : def_.exits) {
    if (!dir_set.count(e.dir)) {
      throw std::invalid_argument("exit uses unknown direction '" + e.dir + "'");
    }
    const int dir = static_cast<int>(std::find(def_.directions.begin(), def_.directions.end(), e.dir) -
                                     def_.directions.begin());
    const int door = e.door.empty() ? -1 : object_of(e.door, "exit door");
    if (door >= 0 && !def_.objects[static_cast<std::size_t>(door)].openable) {
      throw std::invalid_argument("exit door '" + e.door + "' is not openable");
    }
    exits_.push_back({room_of(e.from, "exit"), dir, room_of(e.to, "exit"), door});
  }
  for (const auto& q : def_.quest) {
    const bool command = !q.verb.empty() || !q.object.empty();
    const bool arrival = !q.goto_room.empty();
    if (command == arrival) {
      throw std::invalid_argument("each quest step is either a verb+object or a goto room");
    }
    if (command) {
      if (std::find(def_.verbs.begin(), def_.verbs.end(), q.verb) == def_.verbs.end()) {
        throw std::invalid_argument("quest step uses unknown verb '" + q.verb + "'");
      }
      object_of(q.object, "quest step");
    } else {
      room_of(q.goto_room, "quest step");
    }
  }
}

template <typename T>
EnvSpec MicroText<T>::spec() const {
  EnvSpec s;
  s.action_count = def_.action_count();
  s.observation_shape = {3 * static_cast<int>(def_.vocab.size())};
  s.max_steps = def_.max_steps;
  s.gamma = def_.gamma;
  return s;
}

template <typename T>
std::shared_ptr<const Tensor<T>> MicroText<T>::reset(std::uint64_t seed) {
  Rng rng(seed);
  places_ = start_places_;
  const std::size_t n_obj = def_.objects.size();
  locked_.resize(n_obj);
  open_.resize(n_obj);
  for (std::size_t i = 0; i < n_obj; ++i) {
    locked_[i] = def_.objects[i].locked;
    open_[i] = def_.objects[i].open;
    if (def_.objects[i].portable) {
      const auto& choices = start_choices_[i];
      places_[i] = choices[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(choices.size())))];
    }
  }
  room_ = 0;
  progress_ = 0;
  steps_ = 0;
  done_ = false;
  result_tokens_.clear();
  current_obs_ = std::make_shared<const Tensor<T>>(encode_observation());
  return current_obs_;
}

template <typename T>
bool MicroText<T>::visible(int obj) const {
  const Placement& p = places_[static_cast<std::size_t>(obj)];
  switch (p.kind) {
    case Placement::Kind::inventory:
      return true;
    case Placement::Kind::room:
      return p.index == room_;
    case Placement::Kind::container: {
      const Placement& holder = places_[static_cast<std::size_t>(p.index)];
      return open_[static_cast<std::size_t>(p.index)] &&
             holder.kind == Placement::Kind::room && holder.index == room_;
    }
  }
  return false;
}

template <typename T>
bool MicroText<T>::action_valid(int action) const {
  const int n_dirs = static_cast<int>(def_.directions.size());
  if (action < 0 || action >= def_.action_count()) {
    throw std::invalid_argument("action index out of range");
  }
  if (action < n_dirs) {
    for (const ResolvedExit& e : exits_) {
      if (e.from == room_ && e.dir == action) {
        return e.door < 0 || open_[static_cast<std::size_t>(e.door)];
      }
    }
    return false;
  }
  const int rest = action - n_dirs;
  const int n_obj = static_cast<int>(def_.objects.size());
  const int verb = rest / n_obj;
  const int obj = rest % n_obj;
  const TextObject& item = def_.objects[static_cast<std::size_t>(obj)];
  const Placement& p = places_[static_cast<std::size_t>(obj)];
  const std::string& v = def_.verbs[static_cast<std::size_t>(verb)];
  if (v == "take") {
    return item.portable && p.kind != Placement::Kind::inventory && visible(obj);
  }
  if (v == "drop") return p.kind == Placement::Kind::inventory;
  if (v == "open") {
    return item.openable && visible(obj) && !open_[static_cast<std::size_t>(obj)] &&
           !locked_[static_cast<std::size_t>(obj)];
  }
  if (v == "close") return item.openable && visible(obj) && open_[static_cast<std::size_t>(obj)];
  if (v == "unlock") {
    if (!item.lockable || !visible(obj) || !locked_[static_cast<std::size_t>(obj)]) return false;
    const int key = unlock_key_[static_cast<std::size_t>(obj)];
    return key >= 0 && places_[static_cast<std::size_t>(key)].kind == Placement::Kind::inventory;
  }
  if (v == "examine") return visible(obj);
  return false;  // verbs outside the rule set never apply
}

template <typename T>
FeedbackStep<T> MicroText<T>::step(int action) {
  if (done_) throw std::logic_error("step called on a finished episode; call reset first");
  const bool valid = action_valid(action);  // also range-checks
  ++steps_;
  if (!valid) {
    ++rejections_;
    done_ = steps_ >= def_.max_steps;
    return {current_obs_, 0.0, done_, 1};
  }

  const int n_dirs = static_cast<int>(def_.directions.size());
  if (action < n_dirs) {
    for (const ResolvedExit& e : exits_) {
      if (e.from == room_ && e.dir == action) {
        room_ = e.to;
        break;
      }
    }
    result_tokens_ = {token(def_.directions[static_cast<std::size_t>(action)]),
                      token(def_.rooms[static_cast<std::size_t>(room_)])};
    advance_quest_on_room(room_);
  } else {
    const int rest = action - n_dirs;
    const int n_obj = static_cast<int>(def_.objects.size());
    const int verb = rest / n_obj;
    const int obj = rest % n_obj;
    const std::string& v = def_.verbs[static_cast<std::size_t>(verb)];
    if (v == "take") {
      places_[static_cast<std::size_t>(obj)] = {Placement::Kind::inventory, 0};
    } else if (v == "drop") {
      places_[static_cast<std::size_t>(obj)] = {Placement::Kind::room, room_};
    } else if (v == "open") {
      open_[static_cast<std::size_t>(obj)] = true;
    } else if (v == "close") {
      open_[static_cast<std::size_t>(obj)] = false;
    } else if (v == "unlock") {
      locked_[static_cast<std::size_t>(obj)] = false;
    }
    result_tokens_ = {token(v), token(def_.objects[static_cast<std::size_t>(obj)].name)};
    advance_quest_on_command(verb, obj);
  }

  double reward = 0.0;
  if (progress_ == static_cast<int>(def_.quest.size())) {
    reward = 1.0;
    done_ = true;
  } else {
    done_ = steps_ >= def_.max_steps;
  }
  current_obs_ = std::make_shared<const Tensor<T>>(encode_observation());
  return {current_obs_, reward, done_, 0};
}

template <typename T>
void MicroText<T>::advance_quest_on_command(int verb, int obj) {
  if (progress_ >= static_cast<int>(def_.quest.size())) return;
  const QuestStep& q = def_.quest[static_cast<std::size_t>(progress_)];
  if (q.goto_room.empty() && q.verb == def_.verbs[static_cast<std::size_t>(verb)] &&
      q.object == def_.objects[static_cast<std::size_t>(obj)].name) {
    ++progress_;
  }
}

template <typename T>
void MicroText<T>::advance_quest_on_room(int room) {
  if (progress_ >= static_cast<int>(def_.quest.size())) return;
  const QuestStep& q = def_.quest[static_cast<std::size_t>(progress_)];
  if (!q.goto_room.empty() && q.goto_room == def_.rooms[static_cast<std::size_t>(room)]) {
    ++progress_;
  }
}

template <typename T>
std::vector<int> MicroText<T>::oracle_valid_set() const {
  std::vector<int> valid;
  if (done_) return valid;
  for (int a = 0; a < def_.action_count(); ++a) {
    if (action_valid(a)) valid.push_back(a);
  }
  return valid;
}

template <typename T>
int MicroText<T>::token(const std::string& word) const {
  return vocab_index_.at(word);
}

template <typename T>
Tensor<T> MicroText<T>::encode_observation() const {
  const int v = static_cast<int>(def_.vocab.size());
  Tensor<T> obs({3 * v});
  T* data = obs.ptr();
  for (int t : result_tokens_) data[t] += T(1);

  T* room_block = data + v;
  room_block[token(def_.rooms[static_cast<std::size_t>(room_)])] += T(1);
  for (std::size_t i = 0; i < def_.objects.size(); ++i) {
    if (places_[i].kind == Placement::Kind::inventory || !visible(static_cast<int>(i))) continue;
    const TextObject& item = def_.objects[i];
    room_block[token(item.name)] += T(1);
    if (item.openable) {
      room_block[token(locked_[i] ? "locked" : (open_[i] ? "open" : "closed"))] += T(1);
    }
  }

  T* inv_block = data + 2 * v;
  for (std::size_t i = 0; i < def_.objects.size(); ++i) {
    if (places_[i].kind == Placement::Kind::inventory) {
      inv_block[token(def_.objects[i].name)] += T(1);
    }
  }
  return obs;
}

template <typename T>
std::string MicroText<T>::action_name(int action) const {
  const int n_dirs = static_cast<int>(def_.directions.size());
  if (action < 0 || action >= def_.action_count()) {
    throw std::invalid_argument("action index out of range");
  }
  if (action < n_dirs) return "go " + def_.directions[static_cast<std::size_t>(action)];
  const int rest = action - n_dirs;
  const int n_obj = static_cast<int>(def_.objects.size());
  return def_.verbs[static_cast<std::size_t>(rest / n_obj)] + " " +
         def_.objects[static_cast<std::size_t>(rest % n_obj)].name;
}

template class MicroText<float>;
template class MicroText<double>;

}  // namespace dqnf
