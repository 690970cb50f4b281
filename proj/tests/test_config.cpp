#include <doctest.h>

#include "aerialmpt/config.hpp"
#include "aerialmpt/error.hpp"
#include "test_util.hpp"

using namespace aerialmpt;

TEST_CASE("empty config gives defaults") {
  const auto c = parse_config("");
  CHECK(c.network == NetworkConfig::production());
  CHECK(c.train.batch_tracks == 150);
  CHECK(c.train.lr == doctest::Approx(1e-6));
  CHECK(c.train.decay_every == 20000);
  CHECK(c.tracker == TrackerConfig{});
  CHECK(c.synth.n_agents == SynthConfig{}.n_agents);
}

TEST_CASE("sections override presets") {
  const auto c = parse_config(R"(
[network]
preset = "reduced"
graph_neighbors = 4

[train]
lr = 1e-3
momentum = 0.9
batch_tracks = 20
ablation = "snn+lstm"

[train.lr_multipliers]
"fc." = 10.0

[tracker]
window_min_side = 30.0
gt_escape_check = false

[synth]
motion = "crossing"
n_agents = 6
train_sequences = 3
)");
  auto want = NetworkConfig::reduced();
  want.graph_neighbors = 4;
  CHECK(c.network == want);
  CHECK(c.train.lr == doctest::Approx(1e-3));
  CHECK(c.train.batch_tracks == 20);
  CHECK(c.train.ablation == Ablation::SnnLstm);
  CHECK(c.train.lr_multiplier("fc.fc1.weight") == doctest::Approx(10));
  CHECK(c.train.lr_multiplier("snn.conv1.weight") == doctest::Approx(1));
  CHECK(c.tracker.window_min_side == doctest::Approx(30));
  CHECK_FALSE(c.tracker.gt_escape_check);
  CHECK(c.synth.motion == MotionModel::Crossing);
  CHECK(c.synth_train_sequences == 3);
}

TEST_CASE("to_toml round trip") {
  RunConfig c;
  c.network = NetworkConfig::reduced();
  c.train.lr = 2.5e-4;
  c.train.seed = 42;
  c.train.lr_multipliers = {{"fc.", 2.0}, {"fc.fc4.", 3.0}};
  c.tracker.ablation = Ablation::SnnGcnn;
  c.synth.seed = 9;
  c.synth.motion = MotionModel::AdversarialFast;
  c.synth.speed_min = 40;
  c.synth.speed_max = 50;
  c.synth.width = c.synth.height = 160;
  c.synth_test_sequences = 2;
  const auto back = parse_config(to_toml(c));
  CHECK(back.network == c.network);
  CHECK(back.train.lr == c.train.lr);
  CHECK(back.train.seed == 42);
  CHECK(back.train.lr_multipliers.size() == 2);
  CHECK(back.train.lr_multiplier("fc.fc4.bias") == doctest::Approx(3.0));
  CHECK(back.tracker == c.tracker);
  CHECK(back.synth.seed == 9);
  CHECK(back.synth.motion == MotionModel::AdversarialFast);
  CHECK(back.synth_test_sequences == 2);
}

TEST_CASE("config errors name the problem") {
  CHECK_THROWS_AS(parse_config("[train]\nlearning_rate = 1.0\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[trian]\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[train]\nbatch_tracks = \"many\"\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[network]\npreset = \"huge\"\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[train]\nlr = -1.0\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("not toml = = ="), ConfigError);
  try {
    parse_config("[tracker]\nwindow_size = 3\n", "run.toml");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("window_size") != std::string::npos);
  }
  CHECK_THROWS_AS(load_config("/nonexistent/run.toml"), IoError);
}

TEST_CASE("config file loads") {
  testutil::TempDir d("cfg");
  testutil::write_text(d / "run.toml", "[train]\nmax_iters = 7\n");
  CHECK(load_config(d / "run.toml").train.max_iters == 7);
}
