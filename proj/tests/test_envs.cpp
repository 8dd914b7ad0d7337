#include <doctest.h>

#include <set>
#include <string>

#include "dqnf/grid_rooms.hpp"
#include "dqnf/micro_text.hpp"

using namespace dqnf;

namespace {

// Rolls random actions and cross-checks every rejection against the oracle
// valid set captured before the step.
template <typename Env>
void rejection_consistency_rollout(Env& env, int total_steps, std::uint64_t seed) {
  Rng rng(seed);
  const int n_actions = env.spec().action_count;
  auto obs = env.reset(seed);
  std::uint64_t episode = 0;
  long rejected = 0;
  for (int t = 0; t < total_steps; ++t) {
    const std::vector<int> valid = env.oracle_valid_set();
    const int a = rng.uniform_int(n_actions);
    const bool should_accept =
        std::find(valid.begin(), valid.end(), a) != valid.end();
    const int before = env.steps_taken();
    const FeedbackStep<float> fs = env.step(a);
    CHECK(env.steps_taken() == before + 1);
    CHECK(fs.feedback == (should_accept ? 0 : 1));
    if (fs.feedback == 1) {
      ++rejected;
      CHECK(fs.reward == 0.0);
      // rejected steps must hand back the identical observation object
      CHECK(fs.observation.get() == obs.get());
    }
    obs = fs.observation;
    if (fs.done) obs = env.reset(++episode);
  }
  CHECK(env.total_rejections() == rejected);
  CHECK(rejected > 0);
}

int find_action(const MicroText<float>& env, const std::string& name) {
  for (int a = 0; a < env.spec().action_count; ++a) {
    if (env.action_name(a) == name) return a;
  }
  FAIL("no action named ", name);
  return -1;
}

}  // namespace

TEST_CASE("generated grid uses vertical room bands with a corner goal") {
  const GridLayout g = GridLayout::generate(8, 8, 5);
  CHECK(g.width == 8);
  CHECK(g.height == 8);
  CHECK(g.room_types == 5);
  for (int x = 0; x < 8; ++x) {
    CHECK(g.is_wall(x, 0));
    CHECK(g.is_wall(x, 7));
  }
  CHECK(g.is_goal(6, 6));
  CHECK(g.room_type(1, 1) == 0);
  CHECK(g.room_type(6, 1) == 4);
  // every room type appears somewhere
  std::set<int> seen;
  for (int y = 1; y < 7; ++y)
    for (int x = 1; x < 7; ++x)
      if (!g.is_goal(x, y)) seen.insert(g.room_type(x, y));
  CHECK(seen == std::set<int>{0, 1, 2, 3, 4});
  CHECK_THROWS(GridLayout::generate(8, 8, 7));  // more types than interior columns
  CHECK_THROWS(GridLayout::generate(8, 8, 0));
}

TEST_CASE("map text round-trips and validates") {
  const GridLayout g = GridLayout::generate(8, 8, 5);
  const GridLayout back = GridLayout::from_map_string(g.to_map_string());
  CHECK(back.wall == g.wall);
  CHECK(back.goal == g.goal);
  CHECK(back.room == g.room);
  CHECK(back.room_types == g.room_types);

  const GridLayout custom = GridLayout::from_map_string("#####\n#.1G#\n#####\n");
  CHECK(custom.room_type(1, 1) == 0);  // '.' is room type 0
  CHECK(custom.room_type(2, 1) == 1);
  CHECK(custom.is_goal(3, 1));
  CHECK(custom.room_types == 2);

  CHECK_THROWS(GridLayout::from_map_string("####\n#.G####\n####\n"));  // ragged rows
  CHECK_THROWS(GridLayout::from_map_string("#####\n#..x#\n#####\n"));  // unknown glyph
  CHECK_THROWS(GridLayout::from_map_string("#####\n#...#\n#####\n"));  // no goal
  // start cell walled off from the goal
  CHECK_THROWS(GridLayout::from_map_string("######\n#G#..#\n######\n"));
}

TEST_CASE("asset map file matches the generator") {
  const GridLayout file = GridLayout::from_map_file(std::string(DQNF_SOURCE_DIR) +
                                                    "/assets/grid_8x8_k5.map");
  const GridLayout gen = GridLayout::generate(8, 8, 5);
  CHECK(file.to_map_string() == gen.to_map_string());
}

TEST_CASE("room grouping gates which actions are allowed") {
  const GridLayout g = GridLayout::generate(8, 8, 5);
  const Pose in_band0{1, 1, 0};
  for (int a = 0; a < 15; ++a) CHECK(grid_action_allowed(g, in_band0, a) == (a < 3));
  const Pose in_band4{6, 1, 0};
  for (int a = 0; a < 15; ++a) CHECK(grid_action_allowed(g, in_band4, a) == (a >= 12));
  CHECK_THROWS(grid_action_allowed(g, in_band0, 15));
  CHECK_THROWS(grid_action_allowed(g, in_band0, -1));
}

TEST_CASE("motions turn in place and forward stops at walls") {
  const GridLayout g = GridLayout::generate(8, 8, 5);
  Pose p{1, 1, 0};
  CHECK(grid_apply_motion(g, p, 0) == Pose{1, 1, 3});  // left from east faces north
  CHECK(grid_apply_motion(g, p, 1) == Pose{1, 1, 1});
  CHECK(grid_apply_motion(g, p, 2) == Pose{2, 1, 0});
  const Pose facing_wall{1, 1, 2};  // west into the border
  CHECK(grid_apply_motion(g, facing_wall, 2) == facing_wall);
}

TEST_CASE("grid env spec matches the stacked egocentric encoding") {
  GridRooms<float> env(GridLayout::generate(8, 8, 5));
  const EnvSpec spec = env.spec();
  CHECK(spec.action_count == 15);
  // (wall/goal/floor + 5 room types + heading) x 3 stacked frames
  CHECK(spec.observation_shape == std::vector<int>{27, 7, 7});
  CHECK(spec.max_steps == 200);
  CHECK(spec.gamma == doctest::Approx(0.99));
  CHECK(env.frame_channels() == 9);
}

TEST_CASE("grid reset is seed-deterministic and covers all starts") {
  GridRooms<float> a(GridLayout::generate(6, 6, 2));
  GridRooms<float> b(GridLayout::generate(6, 6, 2));
  auto oa = a.reset(123);
  auto ob = b.reset(123);
  CHECK(a.pose() == b.pose());
  CHECK(oa->data == ob->data);

  std::set<std::pair<int, int>> starts;
  std::set<int> dirs;
  for (std::uint64_t s = 0; s < 400; ++s) {
    a.reset(s);
    starts.insert({a.pose().x, a.pose().y});
    dirs.insert(a.pose().dir);
  }
  CHECK(starts.size() == a.layout().start_cells().size());
  CHECK(dirs == std::set<int>{0, 1, 2, 3});
}

TEST_CASE("frames stack oldest first and shift on accepted moves") {
  GridRooms<float> env(GridLayout::generate(6, 6, 1));
  env.reset_to({1, 1, 0});
  const Tensor<float> f0 = env.encode_frame({1, 1, 0});
  const std::size_t block = f0.size();
  auto obs0 = env.reset_to({1, 1, 0});
  REQUIRE(obs0->size() == 3 * block);
  for (std::size_t i = 0; i < 3 * block; ++i) {
    CHECK(obs0->data[i] == f0.data[i % block]);
  }
  const FeedbackStep<float> fs = env.step(0);  // turn left, room 0 group
  REQUIRE(fs.feedback == 0);
  const Tensor<float> f1 = env.encode_frame({1, 1, 3});
  for (std::size_t i = 0; i < block; ++i) {
    CHECK(fs.observation->data[i] == f0.data[i]);              // oldest
    CHECK(fs.observation->data[block + i] == f0.data[i]);      // middle
    CHECK(fs.observation->data[2 * block + i] == f1.data[i]);  // newest
  }
}

TEST_CASE("egocentric frame geometry") {
  GridRooms<float> env(GridLayout::generate(8, 8, 5));
  const int v = env.view_size();
  const int plane = v * v;
  const Pose p{1, 1, 0};  // facing east
  const Tensor<float> f = env.encode_frame(p);
  // agent cell sits at the back-row center and is floor
  const int self = (v - 1) * v + v / 2;
  CHECK(f.data[static_cast<std::size_t>(2 * plane + self)] == 1.0f);
  // row 0 center is 6 cells east of x=1: out of the 8-wide grid, so wall
  CHECK(f.data[static_cast<std::size_t>(v / 2)] == 1.0f);
  // heading plane is constant dir/3
  const int c = env.frame_channels();
  for (int i = 0; i < plane; ++i) {
    CHECK(f.data[static_cast<std::size_t>((c - 1) * plane + i)] == 0.0f);
  }
  const Tensor<float> fn = env.encode_frame({1, 1, 3});
  CHECK(fn.data[static_cast<std::size_t>((c - 1) * plane)] == 1.0f);
}

TEST_CASE("grid rejections freeze the world") {
  GridRooms<float> env(GridLayout::generate(8, 8, 5));
  auto obs = env.reset_to({1, 1, 0});  // room type 0, so group 0 only
  const Pose before = env.pose();
  const FeedbackStep<float> fs = env.step(7);  // group 2 action
  CHECK(fs.feedback == 1);
  CHECK(fs.reward == 0.0);
  CHECK(fs.observation.get() == obs.get());
  CHECK(env.pose() == before);
  CHECK(env.total_rejections() == 1);
  CHECK(env.steps_taken() == 1);
  const std::vector<int> valid = env.oracle_valid_set();
  CHECK(valid == std::vector<int>{0, 1, 2});
}

TEST_CASE("reaching the goal pays one point and ends the episode") {
  GridRooms<float> env(GridLayout::generate(5, 5, 1));
  // goal sits at (3, 3); start just west of it facing east
  env.reset_to({2, 3, 0});
  const FeedbackStep<float> fs = env.step(2);
  CHECK(fs.reward == 1.0);
  CHECK(fs.done);
  CHECK_THROWS_AS(env.step(0), std::logic_error);
}

TEST_CASE("grid episodes truncate at max_steps without reward") {
  GridRooms<float> env(GridLayout::generate(6, 6, 1), 5);
  env.reset_to({1, 1, 0});
  for (int t = 0; t < 4; ++t) CHECK_FALSE(env.step(0).done);
  const FeedbackStep<float> last = env.step(0);
  CHECK(last.done);
  CHECK(last.reward == 0.0);
}

TEST_CASE("grid rejection semantics hold along random rollouts") {
  GridRooms<float> env(GridLayout::generate(8, 8, 5));
  rejection_consistency_rollout(env, 3000, 99);
}

TEST_CASE("default text game wires 46 commands over 22 tokens") {
  const TextGameDef def = TextGameDef::default_game();
  CHECK(def.action_count() == 46);
  CHECK(def.vocab.size() == 22);
  CHECK(def.rooms.front() == "kitchen");
  MicroText<float> env(def);
  CHECK(env.spec().action_count == 46);
  CHECK(env.spec().observation_shape == std::vector<int>{66});
  CHECK(env.spec().max_steps == 200);
  CHECK(env.action_name(0) == "go north");
  CHECK(env.action_name(4) == "take key");
  CHECK(env.action_name(45) == "examine lamp");
  CHECK_THROWS(env.action_name(46));
}

TEST_CASE("game definition json round-trips through the asset file") {
  const TextGameDef def = TextGameDef::default_game();
  CHECK(TextGameDef::from_json_text(default_game_json()) == def);
  const TextGameDef from_asset =
      TextGameDef::from_file(std::string(DQNF_SOURCE_DIR) + "/assets/microtext_game.json");
  CHECK(from_asset == def);
}

TEST_CASE("malformed game definitions are rejected") {
  CHECK_THROWS(TextGameDef::from_json_text("{"));
  CHECK_THROWS(TextGameDef::from_json_text(R"({"vocab": 3})"));
  // vocabulary must contain every referenced word
  CHECK_THROWS(MicroText<float>(TextGameDef::from_json_text(R"({
    "vocab": ["a", "open", "closed", "locked"],
    "rooms": ["a"], "directions": [], "verbs": ["take"],
    "objects": [{"name": "ghost", "location": "a"}],
    "exits": [], "quest": [{"verb": "take", "object": "ghost"}]
  })")));
  // quest step cannot be both a command and a room visit
  TextGameDef bad = TextGameDef::default_game();
  bad.quest[0].goto_room = "attic";
  CHECK_THROWS(MicroText<float>(bad));
}

TEST_CASE("text reset is deterministic and shuffles portable items") {
  MicroText<float> a(TextGameDef::default_game());
  MicroText<float> b(TextGameDef::default_game());
  CHECK(a.reset(7)->data == b.reset(7)->data);

  const int take_key = find_action(a, "take key");
  bool key_here = false, key_away = false;
  for (std::uint64_t s = 0; s < 40; ++s) {
    a.reset(s);
    (a.action_valid(take_key) ? key_here : key_away) = true;
  }
  CHECK(key_here);
  CHECK(key_away);
}

TEST_CASE("text world rules accept and reject the right commands") {
  MicroText<float> env(TextGameDef::default_game());
  std::uint64_t seed = 0;
  const int take_key = find_action(env, "take key");
  while (true) {
    env.reset(seed);
    if (env.action_valid(take_key)) break;  // key spawned in the kitchen
    ++seed;
  }
  CHECK(env.action_valid(find_action(env, "examine chest")));
  CHECK_FALSE(env.action_valid(find_action(env, "go north")));    // no such exit here
  CHECK_FALSE(env.action_valid(find_action(env, "drop key")));    // not carried
  CHECK_FALSE(env.action_valid(find_action(env, "take door")));   // fixed item
  CHECK_FALSE(env.action_valid(find_action(env, "unlock door"))); // door not visible
  CHECK_THROWS(env.action_valid(46));

  // a rejected command freezes the world
  auto obs = env.reset(seed);
  const FeedbackStep<float> rej = env.step(find_action(env, "go north"));
  CHECK(rej.feedback == 1);
  CHECK(rej.reward == 0.0);
  CHECK(rej.observation.get() == obs.get());
  CHECK(env.total_rejections() == 1);
  CHECK(env.steps_taken() == 1);

  // an accepted command produces a fresh observation
  const FeedbackStep<float> acc = env.step(take_key);
  CHECK(acc.feedback == 0);
  CHECK(acc.observation.get() != obs.get());
}

TEST_CASE("quest walkthrough pays exactly at the last milestone") {
  MicroText<float> env(TextGameDef::default_game());
  std::uint64_t seed = 0;
  const int take_key = find_action(env, "take key");
  while (true) {
    env.reset(seed);
    if (env.action_valid(take_key)) break;
    ++seed;
  }
  CHECK(env.quest_progress() == 0);
  CHECK(env.step(take_key).reward == 0.0);
  CHECK(env.quest_progress() == 1);

  // re-taking the key cannot advance the quest twice
  env.step(find_action(env, "drop key"));
  env.step(take_key);
  CHECK(env.quest_progress() == 1);

  CHECK(env.step(find_action(env, "go east")).reward == 0.0);
  CHECK(env.current_room() == 1);
  CHECK(env.step(find_action(env, "unlock door")).reward == 0.0);
  CHECK(env.quest_progress() == 2);
  CHECK(env.step(find_action(env, "open door")).reward == 0.0);
  CHECK(env.quest_progress() == 3);
  const FeedbackStep<float> last = env.step(find_action(env, "go north"));
  CHECK(last.reward == 1.0);
  CHECK(last.done);
  CHECK(env.current_room() == 2);
  CHECK_THROWS_AS(env.step(0), std::logic_error);
}

TEST_CASE("container visibility gates take commands") {
  TextGameDef def = TextGameDef::default_game();
  // pin the sword inside the chest
  def.objects[3].start = {"chest"};
  MicroText<float> env(def);
  env.reset(1);
  const int take_sword = find_action(env, "take sword");
  CHECK_FALSE(env.action_valid(take_sword));  // chest is closed
  env.step(find_action(env, "open chest"));
  CHECK(env.action_valid(take_sword));
  env.step(find_action(env, "close chest"));
  CHECK_FALSE(env.action_valid(take_sword));
}

TEST_CASE("text observations are bag-of-words counts") {
  TextGameDef def = TextGameDef::default_game();
  def.objects[0].start = {"kitchen"};  // pin the key
  MicroText<float> env(def);
  auto obs = env.reset(3);
  const int v = static_cast<int>(def.vocab.size());
  const auto tok = [&](const std::string& w) {
    for (int i = 0; i < v; ++i)
      if (def.vocab[static_cast<std::size_t>(i)] == w) return i;
    return -1;
  };
  // room block: current room name and the visible items
  CHECK(obs->data[static_cast<std::size_t>(v + tok("kitchen"))] == 1.0f);
  CHECK(obs->data[static_cast<std::size_t>(v + tok("key"))] == 1.0f);
  CHECK(obs->data[static_cast<std::size_t>(v + tok("door"))] == 0.0f);
  // inventory block empty at reset
  for (int i = 0; i < v; ++i) CHECK(obs->data[static_cast<std::size_t>(2 * v + i)] == 0.0f);

  const FeedbackStep<float> fs = env.step(find_action(env, "take key"));
  CHECK(fs.observation->data[static_cast<std::size_t>(2 * v + tok("key"))] == 1.0f);
  CHECK(fs.observation->data[static_cast<std::size_t>(v + tok("key"))] == 0.0f);
  // result block echoes the command words
  CHECK(fs.observation->data[static_cast<std::size_t>(tok("take"))] == 1.0f);
  CHECK(fs.observation->data[static_cast<std::size_t>(tok("key"))] == 1.0f);
}

TEST_CASE("text episodes truncate at max_steps") {
  TextGameDef def = TextGameDef::default_game();
  def.max_steps = 6;
  MicroText<float> env(def);
  env.reset(1);
  const int bad = find_action(env, "take door");  // always rejected
  for (int t = 0; t < 5; ++t) CHECK_FALSE(env.step(bad).done);
  CHECK(env.step(bad).done);
}

TEST_CASE("text rejection semantics hold along random rollouts") {
  MicroText<float> env(TextGameDef::default_game());
  rejection_consistency_rollout(env, 3000, 17);
}

TEST_CASE("clones evolve independently") {
  GridRooms<float> env(GridLayout::generate(6, 6, 2));
  env.reset_to({1, 1, 0});
  auto copy = env.clone();
  env.step(0);
  CHECK(env.steps_taken() == 1);
  // the clone still sits at the pre-step state
  CHECK(dynamic_cast<GridRooms<float>*>(copy.get())->steps_taken() == 0);
}
