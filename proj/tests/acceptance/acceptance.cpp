// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit when any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "aerialmpt/checkpoint.hpp"
#include "aerialmpt/cli.hpp"
#include "aerialmpt/dataset_io.hpp"
#include "aerialmpt/model.hpp"
#include "aerialmpt/mot_metrics.hpp"
#include "aerialmpt/synth.hpp"
#include "aerialmpt/track_engine.hpp"
#include "aerialmpt/trainer.hpp"
#include "oracles/brute_metrics.hpp"
#include "oracles/fixture_corpus.hpp"
#include "oracles/gradcheck.hpp"

using namespace aerialmpt;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Settings {
  fs::path work;
  int overfit_iters = 5000;
  int eval_every = 250;
  bool reuse_model = false;
};

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

int cli(std::vector<std::string> args, std::string* out = nullptr) {
  args.insert(args.begin(), "aerialmpt");
  std::ostringstream o, e;
  const int code = run_cli(args, o, e);
  if (out) *out = o.str();
  if (code != 0) std::cerr << "  cli " << args[1] << " failed: " << e.str();
  return code;
}

// ---------------------------------------------------------------- 1
Outcome metric_oracle() {
  const double t0 = cpu_seconds();
  int bad = 0;
  std::string first;
  const int n = 1000;
  for (int s = 0; s < n; ++s) {
    const auto diff = oracle::compare_scenario(oracle::random_scenario(1000 + static_cast<std::uint64_t>(s)));
    if (!diff.empty() && bad++ == 0) first = "seed " + std::to_string(1000 + s) + ": " + diff;
  }
  const double dt = cpu_seconds() - t0;
  Outcome o;
  o.pass = bad == 0 && dt <= 60.0;
  o.detail = std::to_string(n - bad) + "/" + std::to_string(n) + " scenarios agree, " + fmt("%.2f", dt) + " s CPU";
  if (!first.empty()) o.detail += "; first mismatch " + first;
  return o;
}

// ---------------------------------------------------------------- 2
Outcome metric_formulas() {
  std::vector<std::string> fails;
  MetricTotals t;
  t.gt_dets = 100;
  t.fn = 20;
  t.fp = 10;
  t.id_switches = 2;
  const double m = *mota(t);
  if (std::abs(m - 68.0) > 1e-9) fails.push_back("MOTA " + fmt("%.6f", m));
  t.id_switches = 0;
  if (std::abs(*motal(t) - *mota(t)) > 1e-12) fails.push_back("MOTAL != MOTA at ID=0");
  const std::vector<double> f{0.8, 0.8000001, 0.2, 0.1999999};
  const auto c = classify_tracks(f);
  if (c.mostly_tracked != 1 || c.partially_tracked != 2 || c.mostly_lost != 1) fails.push_back("MT/PT/ML boundaries");
  Outcome o;
  o.pass = fails.empty();
  o.detail = o.pass ? "MOTA = 68.0, MOTAL = MOTA at ID = 0, 0.8 -> PT, 0.2 -> PT" : fails.front();
  return o;
}

// ---------------------------------------------------------------- 3
Outcome gradient_check() {
  const double t0 = cpu_seconds();
  Network net(NetworkConfig::reduced(), 2024);
  const auto in = oracle::make_grad_inputs(net.config(), 7);
  const auto r = oracle::run_gradcheck(net, in, 50, 11);
  const double dt = cpu_seconds() - t0;
  Outcome o;
  o.pass = r.sampled == 200 && r.passed >= 198 && dt <= 600.0;
  o.detail = std::to_string(r.passed) + "/" + std::to_string(r.sampled) + " coordinates within 1e-3 (worst " +
             fmt("%.2e", r.worst) + ", " + std::to_string(r.nonzero) + " nonzero, " + std::to_string(r.excluded) +
             " redrawn at kinks), " + fmt("%.1f", dt) + " s CPU";
  if (!r.failures.empty()) o.detail += "; e.g. " + r.failures.front();
  return o;
}

// ---------------------------------------------------------------- 4
Outcome shapes_and_fusion() {
  std::vector<std::string> fails;
  const NetworkConfig prod;
  if (prod.motion_out_dim != 128 || prod.graph_channels.back() != 128) fails.push_back("production branch widths");
  if (prod.graph_rows() != 18 || prod.history_len != 5) fails.push_back("production graph shape");
  if (prod.snn_spatial_trace() != std::vector<int>{27, 13, 13, 13, 6}) fails.push_back("production conv trace");
  if (prod.fusion_dim() != 2 * 9216 + 256) fails.push_back("production fusion width");

  Network net(NetworkConfig::reduced(), 5);
  const auto in = oracle::make_grad_inputs(net.config(), 6);
  const auto full = net.forward(in.input());
  if (full.features.out_lstm.size() != 128) fails.push_back("Out_LSTM " + std::to_string(full.features.out_lstm.size()));
  if (full.features.out_graph.size() != 128) fails.push_back("Out_Graph " + std::to_string(full.features.out_graph.size()));
  if (in.graph.rows != 18 || in.graph.cols != 5) fails.push_back("graph input shape");

  // The SNN-only head must equal the fused head with zero LSTM and graph features.
  const auto snn = net.forward(in.input(), {.ablation = Ablation::Snn});
  FeatureBundle zeroed = full.features;
  std::fill(zeroed.out_lstm.begin(), zeroed.out_lstm.end(), 0.0);
  std::fill(zeroed.out_graph.begin(), zeroed.out_graph.end(), 0.0);
  if (net.regress(zeroed) != snn.output) fails.push_back("SNN-only output differs from zeroed fusion");
  Outcome o;
  o.pass = fails.empty();
  o.detail = o.pass ? "Out_LSTM 128, Out_Graph 128, graph 18x5, SNN-only path bit-identical" : fails.front();
  return o;
}

// ---------------------------------------------------------------- 5, 6, 7
SynthConfig overfit_synth() {
  SynthConfig c;
  c.name = "overfit";
  c.width = c.height = 128;
  c.n_agents = 10;
  c.n_frames = 20;
  c.motion = MotionModel::Linear;
  c.speed_min = 1.0;
  c.speed_max = 3.0;
  c.gsd = 0.05;
  c.seed = 3;
  return c;
}

TrainConfig overfit_train(int iters) {
  TrainConfig c;
  c.batch_tracks = 20;
  c.lr = 1e-3;
  c.momentum = 0.9;
  c.decay_every = 3000;
  c.lr_decay = 0.1;
  c.max_iters = iters;
  c.seed = 17;
  c.checkpoint_every = 0;
  return c;
}

struct OverfitState {
  std::vector<Sequence> train;
  std::optional<Network> net;
  bool ok = false;
};

Outcome overfit(const Settings& s, OverfitState& st) {
  const double t0 = cpu_seconds();
  const fs::path root = s.work / "overfit";
  if (!s.reuse_model) fs::remove_all(root);
  const auto sc = overfit_synth();
  if (!fs::exists(root / kManifestFile)) generate_dataset(sc, 2, 0, root);
  st.train = load_dataset(root);
  long tracks = 0;
  for (const auto& q : st.train) tracks += static_cast<long>(q.tracks().size());

  const fs::path model = root / "run" / kFinalCheckpoint;
  const TrackerConfig tk;
  TrackingError err;
  int iters = 0;
  double train_px = 0.0;
  if (s.reuse_model && fs::exists(model)) {
    st.net.emplace(load_network(model));
    err = tracking_error(*st.net, st.train, tk);
  } else {
    st.net.emplace(NetworkConfig::reduced(), 17);
    std::vector<const Sequence*> ptrs;
    for (const auto& q : st.train) ptrs.push_back(&q);
    Trainer trainer(*st.net, ptrs, overfit_train(s.overfit_iters), tk);
    double recent = 0.0;
    int recent_n = 0;
    while (trainer.iteration() < s.overfit_iters) {
      const auto rec = trainer.step();
      recent += rec.pixel_error;
      ++recent_n;
      if (trainer.iteration() % s.eval_every == 0 || trainer.iteration() == s.overfit_iters) {
        err = tracking_error(*st.net, st.train, tk);
        train_px = recent / recent_n;
        std::cerr << "  overfit iter " << trainer.iteration() << ": train-loop px " << fmt("%.3f", train_px)
                  << ", free-running px " << fmt("%.3f", err.mean_pixel_error) << ", lost " << err.lost_tracks << "/"
                  << err.tracks << "\n";
        recent = 0.0;
        recent_n = 0;
        if (err.mean_pixel_error < 1.0 && err.lost_tracks == 0) break;
      }
    }
    iters = trainer.iteration();
    fs::create_directories(model.parent_path());
    save_network(model, *st.net);
  }
  const double dt = cpu_seconds() - t0;
  st.ok = true;
  Outcome o;
  o.pass = tracks == 20 && err.mean_pixel_error < 1.0 && err.lost_tracks == 0 && dt <= 1800.0;
  o.detail = std::to_string(tracks) + " tracks, " + std::to_string(iters) + " iterations (lr 1e-3, momentum 0.9, batch 20)" +
             ": free-running mean per-coordinate error " + fmt("%.3f", err.mean_pixel_error) + " px over " +
             std::to_string(err.steps) + " steps, " + std::to_string(err.lost_tracks) + " lost, " + fmt("%.0f", dt) +
             " s CPU";
  return o;
}

Outcome heldout(const Settings& s, const OverfitState& st) {
  if (!st.net) return {false, "no overfit model"};
  auto sc = overfit_synth();
  sc.name = "heldout";
  sc.n_frames = 10;
  sc.seed = 9001;
  const auto seq = generate(sc, s.work / "heldout");
  const auto res = track_sequence(seq, *st.net, {});
  const auto t = evaluate(ground_truth_boxes(seq), res.hypotheses, {.iou_threshold = 0.5, .frame_count = seq.frame_count()});
  const auto r = make_report(t);
  Outcome o;
  o.pass = r.mota && *r.mota >= 50.0 && r.id == 0;
  o.detail = "MOTA " + (r.mota ? fmt("%.1f", *r.mota) : std::string("-")) + ", ID " + std::to_string(r.id) + ", MOTP " +
             (r.motp ? fmt("%.1f", *r.motp) : std::string("-")) + ", FP " + std::to_string(r.fp) + ", FN " +
             std::to_string(r.fn);
  return o;
}

Outcome window_escape(const Settings& s, const OverfitState& st) {
  if (!st.net) return {false, "no overfit model"};
  SynthConfig sc;
  sc.name = "escape";
  sc.motion = MotionModel::AdversarialFast;
  sc.width = sc.height = 160;
  sc.n_agents = 10;
  sc.n_frames = 8;
  // Half the search window is 24 px; 40 px jumps leave it along either axis.
  sc.speed_min = 40.0;
  sc.speed_max = 60.0;
  sc.seed = 77;
  const auto seq = generate(sc, s.work / "escape");
  const auto res = track_sequence(seq, *st.net, {});
  long lost = 0;
  for (const auto& t : res.tracks) lost += t.status == TrackStatus::Lost ? 1 : 0;
  TrackerConfig blind;
  blind.gt_escape_check = false;
  const auto res2 = track_sequence(seq, *st.net, blind);
  long lost2 = 0;
  for (const auto& t : res2.tracks) lost2 += t.status == TrackStatus::Lost ? 1 : 0;
  Outcome o;
  o.pass = !res.tracks.empty() && lost == static_cast<long>(res.tracks.size());
  o.detail = std::to_string(lost) + "/" + std::to_string(res.tracks.size()) + " tracks lost (" + std::to_string(lost2) +
             " lost from predictions alone)";
  return o;
}

// ---------------------------------------------------------------- 8
const char* kSmallConfig = R"([network]
preset = "reduced"

[train]
batch_tracks = 6
lr = 1e-3
momentum = 0.9
max_iters = 100
checkpoint_every = 0
seed = 4

[synth]
width = 96
height = 96
n_agents = 6
n_frames = 10
seed = 12
train_sequences = 1
test_sequences = 1
)";

Outcome ablation_parity(const Settings& s) {
  const fs::path root = s.work / "ablation";
  fs::remove_all(root);
  fs::create_directories(root);
  { std::ofstream(root / "run.toml") << kSmallConfig; }
  const std::string cfg = (root / "run.toml").string(), data = (root / "data").string();
  if (cli({"synth", "--config", cfg, "--out", data}) != 0) return {false, "synth failed"};
  std::string header = "Sequence";
  for (const auto& c : report_columns()) header += "," + c;
  const std::string want_header = "Sequence,IDF1,IDP,IDR,Rcll,Prcn,FAR,GT,MT,PT,ML,FP,FN,ID,FM,MOTA,MOTP,MOTAL";
  std::vector<std::string> fails;
  if (header != want_header) fails.push_back("column order " + header);
  std::vector<std::string> summary;
  for (const auto a : kAllAblations) {
    const std::string name(to_string(a));
    const fs::path run = root / name;
    if (cli({"train", "--data", data, "--config", cfg, "--out", (run / "model").string(), "--max-iters", "5",
             "--ablation", name}) != 0 ||
        cli({"track", "--data", data, "--weights", (run / "model" / kFinalCheckpoint).string(), "--out",
             (run / "hyp").string(), "--ablation", name}) != 0 ||
        cli({"evaluate", "--gt", data, "--hyp", (run / "hyp").string(), "--report", (run / "report.csv").string()}) != 0) {
      fails.push_back(name + " pipeline failed");
      continue;
    }
    std::ifstream in(run / "report.csv");
    std::string first, row;
    std::getline(in, first);
    std::getline(in, row);
    if (first != want_header) fails.push_back(name + " header " + first);
    std::vector<std::string> cells;
    std::stringstream rs(row);
    for (std::string c; std::getline(rs, c, ',');) cells.push_back(c);
    if (cells.size() == 18) summary.push_back(name + " MOTA " + cells[15]);
  }
  Outcome o;
  o.pass = fails.empty();
  if (o.pass) {
    o.detail = "4 configs through train/track/evaluate, columns IDF1..MOTAL in table order (";
    for (std::size_t i = 0; i < summary.size(); ++i) o.detail += (i ? ", " : "") + summary[i];
    o.detail += ")";
  } else {
    o.detail = fails.front();
  }
  return o;
}

// ---------------------------------------------------------------- 9
Outcome determinism(const Settings& s) {
  std::vector<std::string> reports;
  for (int k = 0; k < 2; ++k) {
    const fs::path root = s.work / ("determinism_" + std::to_string(k));
    fs::remove_all(root);
    fs::create_directories(root);
    { std::ofstream(root / "run.toml") << kSmallConfig; }
    const std::string cfg = (root / "run.toml").string(), data = (root / "data").string();
    if (cli({"synth", "--config", cfg, "--out", data}) != 0 ||
        cli({"train", "--data", data, "--config", cfg, "--out", (root / "model").string()}) != 0 ||
        cli({"track", "--data", data, "--weights", (root / "model" / kFinalCheckpoint).string(), "--out",
             (root / "hyp").string()}) != 0 ||
        cli({"evaluate", "--gt", data, "--hyp", (root / "hyp").string(), "--report", (root / "report.csv").string()}) != 0) {
      return {false, "run " + std::to_string(k) + " failed"};
    }
    std::ifstream in(root / "report.csv");
    std::stringstream ss;
    ss << in.rdbuf();
    reports.push_back(ss.str());
  }
  Outcome o;
  o.pass = !reports[0].empty() && reports[0] == reports[1];
  o.detail = o.pass ? "two synth -> train 100 -> track -> evaluate runs gave byte-identical reports"
                    : "reports differ:\n" + reports[0] + "\n" + reports[1];
  return o;
}

// ---------------------------------------------------------------- 10
Outcome round_trip(const Settings& s, const fs::path& fixtures) {
  std::vector<std::string> fails;
  const fs::path dir = s.work / "io";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 500);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<PointAnnotation> pts;
    std::vector<Hypothesis> hyps;
    for (int f = 0; f < 10; ++f) {
      for (int id = 1; id <= 5; ++id) {
        pts.push_back({f, id, u(rng), u(rng)});
        const double x = u(rng), y = u(rng);
        hyps.push_back({f, id + 10, {x, y, x + u(rng) / 10, y + u(rng) / 10}});
      }
    }
    write_annotations(dir / "a.csv", pts);
    write_hypotheses(dir / "h.csv", hyps);
    const auto pb = read_annotations(dir / "a.csv");
    const auto hb = read_hypotheses(dir / "h.csv");
    bool same = pb.size() == pts.size() && hb.size() == hyps.size();
    for (std::size_t i = 0; same && i < pts.size(); ++i) {
      same = pb[i].frame_index == pts[i].frame_index && pb[i].track_id == pts[i].track_id &&
             pb[i].x == round_to_file_precision(pts[i].x) && pb[i].y == round_to_file_precision(pts[i].y);
    }
    for (std::size_t i = 0; same && i < hyps.size(); ++i) {
      const auto& a = hb[i].box;
      const auto& b = hyps[i].box;
      same = hb[i].frame == hyps[i].frame && hb[i].track_id == hyps[i].track_id &&
             a.x1 == round_to_file_precision(b.x1) && a.y1 == round_to_file_precision(b.y1) &&
             a.x2 == round_to_file_precision(b.x2) && a.y2 == round_to_file_precision(b.y2);
    }
    // A second cycle is exact.
    write_annotations(dir / "a2.csv", pb);
    same = same && read_annotations(dir / "a2.csv") == pb;
    if (!same) {
      fails.push_back("random file " + std::to_string(trial) + " changed");
      break;
    }
  }
  SynthConfig sc;
  sc.n_frames = 3;
  const auto seq = generate(sc, dir / "seq");
  const auto again = load_sequence(dir / "seq");
  if (again.annotations() != synth_annotations(sc) || again.frame(2).image != render_frame(sc, synth_annotations(sc), 2)) {
    fails.push_back("synthetic sequence changed on reload");
  }
  const auto corpus = oracle::run_malformed_corpus(fixtures / "malformed");
  int rejected = 0;
  for (const auto& c : corpus) {
    if (c.ok()) {
      ++rejected;
    } else {
      fails.push_back(c.name + ": expected " + c.expected + ", got " + c.got);
    }
  }
  if (corpus.size() < 10) fails.push_back("malformed corpus too small");
  Outcome o;
  o.pass = fails.empty();
  o.detail = "annotation/hypothesis/sequence files stable at 4 decimals; " + std::to_string(rejected) + "/" +
             std::to_string(corpus.size()) + " malformed fixtures rejected with the expected error";
  if (!fails.empty()) o.detail += "; " + fails.front();
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance gate"};
  Settings s;
  std::string work = "acceptance_work";
  std::string fixtures = AERIALMPT_FIXTURES;
  std::vector<int> only, expect_fail;
  app.add_option("--work-dir", work, "Scratch directory");
  app.add_option("--fixtures", fixtures, "Fixture directory");
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  app.add_option("--overfit-iters", s.overfit_iters, "Iteration budget of the overfit run");
  app.add_option("--eval-every", s.eval_every, "Free-running evaluation interval during the overfit run");
  app.add_flag("--reuse-model", s.reuse_model, "Reuse a previously trained overfit model");
  app.add_option("--expect-fail", expect_fail, "Criteria known to be unattainable; exit 0 only if exactly these fail")
      ->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  s.work = work;
  fs::create_directories(s.work);

  auto wanted = [&](int k) { return only.empty() || std::find(only.begin(), only.end(), k) != only.end(); };
  OverfitState st;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"metric oracle equivalence", [] { return metric_oracle(); }},
      {"metric formula spot checks", [] { return metric_formulas(); }},
      {"gradient correctness", [] { return gradient_check(); }},
      {"shape and fusion checks", [] { return shapes_and_fusion(); }},
      {"overfit convergence", [&] { return overfit(s, st); }},
      {"held-out synthetic tracking", [&] { return heldout(s, st); }},
      {"window-escape failure mode", [&] { return window_escape(s, st); }},
      {"ablation harness parity", [&] { return ablation_parity(s); }},
      {"determinism", [&] { return determinism(s); }},
      {"round-trip I/O", [&] { return round_trip(s, fixtures); }},
  };
  // 6 and 7 need the model from 5.
  const bool need_model = wanted(5) || wanted(6) || wanted(7);
  std::vector<int> failed;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int k = static_cast<int>(i) + 1;
    if (!wanted(k) && !(k == 5 && need_model)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!wanted(k)) continue;
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << k << "] " << criteria[i].first << ": " << o.detail << " ("
              << fmt("%.1f", wall) << " s)" << std::endl;
    if (!o.pass) failed.push_back(k);
  }
  std::vector<int> expected;
  for (int k : expect_fail) {
    if (wanted(k)) expected.push_back(k);
  }
  std::sort(expected.begin(), expected.end());
  std::string list;
  for (int k : failed) list += (list.empty() ? "" : ",") + std::to_string(k);
  if (failed.empty()) {
    std::cout << "all criteria passed" << std::endl;
  } else {
    std::cout << failed.size() << " criteria failed (" << list << ")" << std::endl;
  }
  if (failed == expected) return 0;
  if (!expected.empty()) std::cout << "failed set differs from --expect-fail" << std::endl;
  return 1;
}
