#include <doctest.h>

#include <random>

#include "aerialmpt/dataset_io.hpp"
#include "aerialmpt/synth.hpp"
#include "oracles/fixture_corpus.hpp"
#include "test_util.hpp"

using namespace aerialmpt;
namespace fs = std::filesystem;

namespace {

void write_sequence(const fs::path& dir, int frames, int w, int h, const std::vector<PointAnnotation>& ann) {
  fs::create_directories(dir / kFramesDir);
  SequenceMeta m;
  m.name = dir.filename().string();
  m.frame_count = frames;
  m.gsd_m_per_px = 0.1;
  m.fps = 2;
  write_meta(dir / kMetaFile, m);
  write_annotations(dir / kAnnotationFile, ann);
  for (int i = 0; i < frames; ++i) write_png(frame_path(dir, i), Image(w, h, {10, 20, 30}));
}

}  // namespace

TEST_CASE("well-formed 3-frame sequence loads with ids preserved") {
  testutil::TempDir dir("ds");
  write_sequence(dir / "s", 3, 20, 10, {{0, 4, 1, 1}, {0, 9, 5, 5}, {1, 4, 2, 1}, {2, 9, 6, 5}});
  const auto seq = load_sequence(dir / "s");
  CHECK(seq.frame_count() == 3);
  CHECK(seq.meta().width == 20);
  CHECK(seq.meta().height == 10);
  CHECK(seq.frame(0).annotations.size() == 2);
  CHECK(seq.tracks().size() == 2);
  CHECK(seq.track(4)->birth_frame() == 0);
  CHECK(seq.track(4)->last_frame() == 1);
  CHECK(seq.track(9)->at(1) == nullptr);
  CHECK(seq.track(9)->at(2)->x == 6);
  CHECK(seq.has_images());
  CHECK(seq.frame(2).image.width == 20);
}

TEST_CASE("loading without images keeps metadata") {
  testutil::TempDir dir("ds");
  write_sequence(dir / "s", 2, 12, 8, {{0, 1, 1, 1}});
  const auto seq = load_sequence(dir / "s", {.load_images = false});
  CHECK(!seq.has_images());
  CHECK(seq.meta().width == 12);
}

TEST_CASE("annotation file round trip at 4 decimals") {
  testutil::TempDir dir("ds");
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 500);
  std::vector<PointAnnotation> pts;
  for (int i = 0; i < 300; ++i) {
    pts.push_back({i / 10, i % 10 + 1, round_to_file_precision(u(rng)), round_to_file_precision(u(rng))});
  }
  write_annotations(dir / "a.csv", pts);
  CHECK(read_annotations(dir / "a.csv") == pts);
  // A second cycle is byte-identical.
  write_annotations(dir / "b.csv", read_annotations(dir / "a.csv"));
  CHECK(testutil::read_text(dir / "a.csv") == testutil::read_text(dir / "b.csv"));
}

TEST_CASE("hypothesis file round trip at declared precision") {
  testutil::TempDir dir("ds");
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-50, 500), s(0, 30);
  std::vector<Hypothesis> hs, rounded;
  for (int i = 0; i < 400; ++i) {
    const double x = u(rng), y = u(rng);
    Hypothesis h{i / 8, i % 8 + 1, {x, y, x + s(rng), y + s(rng)}};
    hs.push_back(h);
    h.box = {round_to_file_precision(h.box.x1), round_to_file_precision(h.box.y1), round_to_file_precision(h.box.x2),
             round_to_file_precision(h.box.y2)};
    rounded.push_back(h);
  }
  write_hypotheses(dir / "h.csv", hs);
  const auto back = read_hypotheses(dir / "h.csv");
  CHECK(back == rounded);
  for (std::size_t i = 0; i < hs.size(); ++i) CHECK(std::abs(back[i].box.x1 - hs[i].box.x1) <= 5e-5 + 1e-12);
  CHECK(round_to_file_precision(-0.00001) == 0.0);
}

TEST_CASE("meta round trip") {
  testutil::TempDir dir("ds");
  SequenceMeta m{"seq_a", 12, 0.13, 2.0, 640, 480};
  write_meta(dir / "meta.txt", m);
  const auto r = read_meta(dir / "meta.txt");
  CHECK(r.name == "seq_a");
  CHECK(r.frame_count == 12);
  CHECK(r.gsd_m_per_px == doctest::Approx(0.13));
  CHECK(r.width == 640);
}

TEST_CASE("every malformed fixture is rejected with its specific error") {
  const auto outcomes = oracle::run_malformed_corpus(fs::path(AERIALMPT_FIXTURES) / "malformed");
  REQUIRE(outcomes.size() >= 15);
  for (const auto& o : outcomes) {
    INFO(o.name);
    CHECK(o.got == o.expected);
  }
}

TEST_CASE("split manifest") {
  testutil::TempDir dir("ds");
  write_manifest(dir / "split.toml", {{"a", "b"}, {"c"}});
  const auto m = read_manifest(dir / "split.toml");
  CHECK(m.train == std::vector<std::string>{"a", "b"});
  CHECK(m.test == std::vector<std::string>{"c"});
  const std::vector<std::string> names{"a", "b", "c", "d"};
  const auto r = split(names, m);
  CHECK(r.train.size() == 2);
  CHECK(r.warnings.size() == 1);  // d unlisted
  const auto empty = split(names, SplitManifest{{"a"}, {}});
  CHECK(empty.warnings.size() >= 1);
  try {
    split(names, SplitManifest{{"zzz"}, {}});
    FAIL("expected an error");
  } catch (const DatasetError& e) {
    CHECK(e.kind() == DatasetError::Kind::UnknownSequence);
  }
  CHECK_THROWS_AS(split(names, SplitManifest{{"a"}, {"a"}}), DatasetError);
}

TEST_CASE("load_dataset walks sorted sequence directories") {
  testutil::TempDir dir("ds");
  write_sequence(dir / "zeta", 1, 8, 8, {});
  write_sequence(dir / "alpha", 1, 8, 8, {});
  fs::create_directories(dir / "not_a_sequence");
  const auto all = load_dataset(dir.path());
  REQUIRE(all.size() == 2);
  CHECK(all[0].meta().name == "alpha");
  CHECK(all[1].meta().name == "zeta");
}

TEST_CASE("synthetic output survives write then read") {
  testutil::TempDir dir("ds");
  SynthConfig c;
  c.n_frames = 4;
  c.n_agents = 5;
  const auto seq = generate(c, dir / "s");
  const auto ann = synth_annotations(c);
  CHECK(seq.annotations() == ann);
  for (int t = 0; t < c.n_frames; ++t) CHECK(seq.frame(t).image == render_frame(c, ann, t));
}
