#include <doctest.h>

#include <sstream>

#include "aerialmpt/cli.hpp"
#include "aerialmpt/dataset_io.hpp"
#include "test_util.hpp"

using namespace aerialmpt;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "aerialmpt");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

const std::string kConfig = std::string(AERIALMPT_FIXTURES) + "/smoke.toml";

}  // namespace

TEST_CASE("help, version and bad usage") {
  CHECK(cli({"--help"}).code == 0);
  const auto v = cli({"--version"});
  CHECK(v.code == 0);
  CHECK(v.out.find("aerialmpt") != std::string::npos);
  const auto none = cli({});
  CHECK(none.code == 2);
  CHECK(none.err.rfind("error: ", 0) == 0);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({"train", "--data", "x"}).code == 2);
  const auto help = cli({"--help"}).out;
  for (const char* sub : {"synth", "train", "track", "evaluate", "report"}) CHECK(help.find(sub) != std::string::npos);
}

TEST_CASE("synth, train, track, evaluate and report end to end") {
  testutil::TempDir d("cli");
  const auto data = (d / "data").string();
  REQUIRE(cli({"synth", "--config", kConfig, "--out", data}).code == 0);
  CHECK(std::filesystem::exists(d / "data" / "split.toml"));
  CHECK(std::filesystem::exists(d / "data" / "synth_train_000" / "frames" / "000003.png"));

  const auto tr = cli({"train", "--data", data, "--config", kConfig, "--out", (d / "run").string()});
  INFO(tr.err);
  REQUIRE(tr.code == 0);
  CHECK(std::filesystem::exists(d / "run" / "model.amptnet"));
  CHECK(std::filesystem::exists(d / "run" / "checkpoint_000002.amptnet"));
  CHECK(std::filesystem::exists(d / "run" / "config.toml"));
  const auto curve = testutil::read_text(d / "run" / "loss_curve.csv");
  CHECK(curve.rfind("iteration,lr,loss,pixel_error\n", 0) == 0);
  CHECK(std::count(curve.begin(), curve.end(), '\n') == 4);

  const auto tk = cli({"track", "--data", data, "--weights", (d / "run" / "model.amptnet").string(), "--out",
                       (d / "hyp").string()});
  INFO(tk.err);
  REQUIRE(tk.code == 0);
  CHECK(std::filesystem::exists(d / "hyp" / "synth_test_000.csv"));
  CHECK_FALSE(std::filesystem::exists(d / "hyp" / "synth_train_000.csv"));

  const auto ev = cli({"evaluate", "--gt", data, "--hyp", (d / "hyp").string(), "--report", (d / "r.csv").string()});
  INFO(ev.err);
  REQUIRE(ev.code == 0);
  CHECK(ev.out.find("MOTA") != std::string::npos);
  CHECK(testutil::read_text(d / "r.csv").rfind("Sequence,IDF1", 0) == 0);

  // Ground truth given as a point CSV, gsd from the sibling meta.txt.
  const auto seq = (d / "data" / "synth_test_000").string();
  const auto ev2 = cli({"evaluate", "--gt", seq + "/annotations.csv", "--hyp", (d / "hyp" / "synth_test_000.csv").string()});
  CHECK(ev2.code == 0);
  CHECK(ev2.out.find("annotations") != std::string::npos);

  const auto rp = cli({"report", "--data", data, "--hyp", (d / "hyp").string(), "--out-dir", (d / "viz").string()});
  INFO(rp.err);
  REQUIRE(rp.code == 0);
  CHECK(std::filesystem::exists(d / "viz" / "synth_test_000" / "000000.png"));

  // Resume from the periodic checkpoint.
  const auto rs = cli({"train", "--data", data, "--config", kConfig, "--out", (d / "run").string(), "--resume",
                       (d / "run" / "checkpoint_000002.amptnet").string(), "--max-iters", "4"});
  INFO(rs.err);
  CHECK(rs.code == 0);
  CHECK(rs.out.find("trained 4 iterations") != std::string::npos);
}

TEST_CASE("failures become one error line") {
  testutil::TempDir d("clierr");
  const auto r = cli({"track", "--data", (d / "nothing").string(), "--weights", "x.amptnet", "--out", (d / "o").string()});
  CHECK(r.code == 1);
  CHECK(r.err.rfind("error: ", 0) == 0);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
  testutil::write_text(d / "bad.toml", "[train]\nbogus = 1\n");
  const auto b = cli({"synth", "--config", (d / "bad.toml").string(), "--out", (d / "s").string()});
  CHECK(b.code == 1);
  CHECK(b.err.find("bogus") != std::string::npos);
  const auto e = cli({"evaluate", "--gt", (d / "missing.csv").string(), "--hyp", (d / "missing.csv").string()});
  CHECK(e.code == 1);
}
