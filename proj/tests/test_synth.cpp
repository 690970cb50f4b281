#include <doctest.h>

#include <cmath>
#include <map>

#include "aerialmpt/dataset_io.hpp"
#include "aerialmpt/error.hpp"
#include "aerialmpt/synth.hpp"
#include "test_util.hpp"

using namespace aerialmpt;

namespace {

std::map<int, std::vector<PointAnnotation>> by_id(const std::vector<PointAnnotation>& a) {
  std::map<int, std::vector<PointAnnotation>> m;
  for (const auto& p : a) m[p.track_id].push_back(p);
  return m;
}

}  // namespace

TEST_CASE("same seed gives byte-identical sequences") {
  testutil::TempDir d("synth");
  SynthConfig cfg;
  cfg.n_frames = 4;
  cfg.seed = 77;
  generate(cfg, d / "a");
  generate(cfg, d / "b");
  for (const char* f : {"meta.txt", "annotations.csv", "frames/000000.png", "frames/000003.png"}) {
    INFO(f);
    CHECK(testutil::read_text(d / "a" / f) == testutil::read_text(d / "b" / f));
  }
  cfg.seed = 78;
  CHECK(synth_annotations(cfg) != synth_annotations(SynthConfig{.n_frames = 4, .seed = 77}));
}

TEST_CASE("linear agents move with constant displacement") {
  SynthConfig cfg;
  cfg.n_frames = 12;
  cfg.n_agents = 10;
  cfg.seed = 3;
  for (const auto& [id, pts] : by_id(synth_annotations(cfg))) {
    for (std::size_t i = 2; i < pts.size(); ++i) {
      CHECK(pts[i].frame_index == pts[i - 1].frame_index + 1);
      CHECK(pts[i].x - pts[i - 1].x == doctest::Approx(pts[1].x - pts[0].x).epsilon(1e-3));
      CHECK(pts[i].y - pts[i - 1].y == doctest::Approx(pts[1].y - pts[0].y).epsilon(1e-3));
    }
    if (pts.size() >= 2) {
      const double s = std::hypot(pts[1].x - pts[0].x, pts[1].y - pts[0].y);
      CHECK(s >= cfg.speed_min - 1e-3);
      CHECK(s <= cfg.speed_max + 1e-3);
    }
  }
}

TEST_CASE("annotations stop when an agent leaves the image") {
  SynthConfig cfg;
  cfg.n_frames = 60;
  cfg.speed_min = cfg.speed_max = 4;
  cfg.seed = 5;
  const auto ann = synth_annotations(cfg);
  for (const auto& p : ann) {
    CHECK(p.x >= 0);
    CHECK(p.y >= 0);
    CHECK(p.x < cfg.width);
    CHECK(p.y < cfg.height);
  }
  for (const auto& [id, pts] : by_id(ann)) {
    CHECK(pts.front().frame_index == 0);
    CHECK(pts.back().frame_index - pts.front().frame_index + 1 == static_cast<int>(pts.size()));
  }
}

TEST_CASE("crossing pairs meet at one point") {
  SynthConfig cfg;
  cfg.motion = MotionModel::Crossing;
  cfg.n_agents = 5;
  cfg.n_frames = 12;
  cfg.seed = 8;
  const auto ids = by_id(synth_annotations(cfg));
  for (int pair = 1; pair + 1 <= 4; pair += 2) {
    const auto& a = ids.at(pair);
    const auto& b = ids.at(pair + 1);
    double closest = 1e9;
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
      closest = std::min(closest, std::hypot(a[i].x - b[i].x, a[i].y - b[i].y));
    }
    CHECK(closest < 1e-3);
  }
  CHECK(ids.size() == 5);
}

TEST_CASE("group agents share a velocity") {
  SynthConfig cfg;
  cfg.motion = MotionModel::Group;
  cfg.group_noise = 0;
  cfg.n_frames = 5;
  cfg.seed = 12;
  const auto ids = by_id(synth_annotations(cfg));
  const auto& first = ids.begin()->second;
  for (const auto& [id, pts] : ids) {
    if (pts.size() < 2 || first.size() < 2) continue;
    CHECK(pts[1].x - pts[0].x == doctest::Approx(first[1].x - first[0].x).epsilon(1e-3));
  }
}

TEST_CASE("adversarial jumps exceed the escape distance") {
  SynthConfig cfg;
  cfg.motion = MotionModel::AdversarialFast;
  cfg.width = cfg.height = 160;
  cfg.speed_min = 40;
  cfg.speed_max = 60;
  cfg.n_frames = 10;
  cfg.seed = 4;
  const auto ids = by_id(synth_annotations(cfg));
  for (const auto& [id, pts] : ids) {
    CHECK(pts.size() == 10);
    for (std::size_t i = 1; i < pts.size(); ++i) {
      CHECK(std::hypot(pts[i].x - pts[i - 1].x, pts[i].y - pts[i - 1].y) > cfg.escape_factor * 2 * cfg.dot_radius);
    }
  }
  cfg.speed_min = 10;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("dots are rendered at annotated positions") {
  SynthConfig cfg;
  cfg.pixel_noise = 0;
  cfg.color_jitter = 0;
  cfg.n_frames = 2;
  const auto ann = synth_annotations(cfg);
  const auto img = render_frame(cfg, ann, 0);
  for (const auto& p : ann) {
    if (p.frame_index != 0) continue;
    const int x = static_cast<int>(p.x), y = static_cast<int>(p.y);
    CHECK(img.at(x, y, 0) == 235);
    CHECK(img.at(x, y, 2) == 70);
  }
}

TEST_CASE("generated datasets load cleanly with a split manifest") {
  testutil::TempDir d("synthds");
  SynthConfig cfg;
  cfg.n_frames = 3;
  generate_dataset(cfg, 2, 1, d.path());
  const auto m = read_manifest(d / "split.toml");
  CHECK(m.train == std::vector<std::string>{"synth_train_000", "synth_train_001"});
  CHECK(m.test == std::vector<std::string>{"synth_test_000"});
  const auto all = load_dataset(d.path());
  REQUIRE(all.size() == 3);
  for (const auto& s : all) {
    CHECK(s.frame_count() == 3);
    CHECK(s.has_images());
    CHECK(s.meta().gsd_m_per_px == doctest::Approx(0.05));
  }
  CHECK(all[1].annotations() != all[2].annotations());
}

TEST_CASE("synth config validation") {
  SynthConfig cfg;
  cfg.margin = 64;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK(parse_motion_model("adversarial-fast") == MotionModel::AdversarialFast);
  CHECK_THROWS_AS(parse_motion_model("teleport"), ConfigError);
}
