#include "aerialmpt/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>

#include "aerialmpt/checkpoint.hpp"
#include "aerialmpt/config.hpp"
#include "aerialmpt/dataset_io.hpp"
#include "aerialmpt/error.hpp"
#include "aerialmpt/mot_metrics.hpp"
#include "aerialmpt/synth.hpp"
#include "aerialmpt/track_engine.hpp"
#include "aerialmpt/trainer.hpp"

namespace aerialmpt {

namespace fs = std::filesystem;

namespace {

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

RunConfig base_config(const std::string& path) { return path.empty() ? RunConfig{} : load_config(path); }

/// Sequences of a dataset for one split. A single sequence directory is returned as is; a root
/// with a split manifest yields the named part ("all" ignores the manifest).
std::vector<Sequence> select_sequences(const fs::path& data, const std::string& part, bool images, std::ostream& err) {
  if (!fs::is_directory(data)) throw IoError("not a directory: " + data.string());
  LoadOptions opts;
  opts.load_images = images;
  auto all = load_dataset(data, opts);
  if (all.empty()) throw IoError("no sequences found under " + data.string());
  if (is_sequence_dir(data) || part == "all" || !fs::exists(data / kManifestFile)) return all;
  std::vector<std::string> names;
  for (const auto& s : all) names.push_back(s.meta().name);
  const auto res = split(names, read_manifest(data / kManifestFile));
  for (const auto& w : res.warnings) err << "warning: " << w << '\n';
  const auto& want = part == "train" ? res.train : res.test;
  std::vector<Sequence> out;
  for (auto& s : all) {
    if (std::find(want.begin(), want.end(), s.meta().name) != want.end()) out.push_back(std::move(s));
  }
  if (out.empty()) throw ConfigError("split '" + part + "' of " + data.string() + " is empty");
  return out;
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open " + p.string());
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

struct EvalUnit {
  std::string name;
  std::vector<Hypothesis> gt;
  std::vector<Hypothesis> hyp;
  int frame_count = -1;
};

fs::path hyp_file_for(const fs::path& hyp, const std::string& name) {
  if (fs::is_directory(hyp)) return hyp / (name + ".csv");
  return hyp;
}

int cmd_synth(const std::string& config, const std::string& out_dir, std::optional<std::uint64_t> seed,
              std::ostream& out) {
  RunConfig cfg = base_config(config);
  if (seed) cfg.synth.seed = *seed;
  cfg.synth.validate();
  generate_dataset(cfg.synth, cfg.synth_train_sequences, cfg.synth_test_sequences, out_dir);
  out << "wrote " << cfg.synth_train_sequences << " train and " << cfg.synth_test_sequences
      << " test sequences to " << out_dir << '\n';
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-pedestrian regression tracking for aerial image sequences"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "aerialmpt 0.1.0");

  std::string config, data, out_dir, resume, weights, gt, hyp, report, ablation, split_part = "test", motp_mode = "iou",
                                                                                  init;
  std::optional<int> max_iters, batch_tracks;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr, gsd;
  double iou_thr = kDefaultIouThreshold;
  int trail = 10;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset from the [synth] config table");
  synth->add_option("--config", config, "TOML config file");
  synth->add_option("--out", out_dir, "Output dataset root")->required();
  synth->add_option("--seed", seed, "Override [synth] seed");

  auto* train_cmd = app.add_subcommand("train", "Train the network on the train split");
  train_cmd->add_option("--data", data, "Dataset root or sequence directory")->required();
  train_cmd->add_option("--config", config, "TOML config file");
  train_cmd->add_option("--out", out_dir, "Output directory for checkpoints and the loss curve")->required();
  train_cmd->add_option("--resume", resume, "Checkpoint to continue from");
  train_cmd->add_option("--init", init, "Checkpoint whose weights initialize the network");
  train_cmd->add_option("--max-iters", max_iters, "Override [train] max_iters");
  train_cmd->add_option("--seed", seed, "Override [train] seed");
  train_cmd->add_option("--lr", lr, "Override [train] lr");
  train_cmd->add_option("--batch-tracks", batch_tracks, "Override [train] batch_tracks");
  train_cmd->add_option("--ablation", ablation, "snn, snn+lstm, snn+gcnn or full");

  auto* track_cmd = app.add_subcommand("track", "Track the test split and write hypothesis files");
  track_cmd->add_option("--data", data, "Dataset root or sequence directory")->required();
  track_cmd->add_option("--weights", weights, "Checkpoint")->required();
  track_cmd->add_option("--out", out_dir, "Output directory (one <sequence>.csv each)")->required();
  track_cmd->add_option("--ablation", ablation, "snn, snn+lstm, snn+gcnn or full");
  track_cmd->add_option("--config", config, "TOML config file ([tracker] table)");
  track_cmd->add_option("--split", split_part, "train, test or all")->check(CLI::IsMember({"train", "test", "all"}));

  auto* eval_cmd = app.add_subcommand("evaluate", "Compute CLEAR-MOT and identity metrics");
  eval_cmd->add_option("--gt", gt, "Sequence directory, dataset root, point CSV or box CSV")->required();
  eval_cmd->add_option("--hyp", hyp, "Hypothesis CSV or directory of <sequence>.csv")->required();
  eval_cmd->add_option("--report", report, "Write the table here (.csv for CSV)");
  eval_cmd->add_option("--iou", iou_thr, "IoU matching threshold")->check(CLI::Range(0.0, 1.0));
  eval_cmd->add_option("--motp", motp_mode, "iou or pixel")->check(CLI::IsMember({"iou", "pixel"}));
  eval_cmd->add_option("--gsd", gsd, "GSD for a bare point CSV");
  eval_cmd->add_option("--config", config, "TOML config file ([tracker] box extent)");
  eval_cmd->add_option("--split", split_part, "train, test or all (dataset roots)")
      ->check(CLI::IsMember({"train", "test", "all"}));

  auto* report_cmd = app.add_subcommand("report", "Render overlay images with hypothesis boxes and trails");
  report_cmd->add_option("--data", data, "Dataset root or sequence directory")->required();
  report_cmd->add_option("--hyp", hyp, "Hypothesis CSV or directory of <sequence>.csv")->required();
  report_cmd->add_option("--out-dir", out_dir, "Output directory")->required();
  report_cmd->add_option("--trail", trail, "Trail length in frames")->check(CLI::NonNegativeNumber);
  report_cmd->add_option("--split", split_part, "train, test or all")->check(CLI::IsMember({"train", "test", "all"}));

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << one_line(e.what()) << '\n';
    return 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(config, out_dir, seed, out);

    if (train_cmd->parsed()) {
      RunConfig cfg = base_config(config);
      if (max_iters) cfg.train.max_iters = *max_iters;
      if (seed) cfg.train.seed = *seed;
      if (lr) cfg.train.lr = *lr;
      if (batch_tracks) cfg.train.batch_tracks = *batch_tracks;
      if (!ablation.empty()) cfg.train.ablation = parse_ablation(ablation);
      cfg.train.validate();
      auto seqs = select_sequences(data, "train", true, err);
      Network net(cfg.network, cfg.train.seed);
      if (!init.empty()) load_weights(net, load_checkpoint(init));
      TrainOptions opts;
      opts.out_dir = out_dir;
      if (!resume.empty()) opts.resume = fs::path(resume);
      fs::create_directories(out_dir);
      {
        std::ofstream c(fs::path(out_dir) / "config.toml");
        c << to_toml(cfg);
      }
      const auto res = train(net, seqs, cfg.train, cfg.tracker, opts);
      out << "trained " << res.iterations << " iterations";
      if (!res.curve.empty()) out << "; last loss " << res.curve.back().loss;
      out << "; checkpoint " << res.final_checkpoint.string() << '\n';
      return 0;
    }

    if (track_cmd->parsed()) {
      RunConfig cfg = base_config(config);
      if (!ablation.empty()) cfg.tracker.ablation = parse_ablation(ablation);
      const Network net = load_network(weights);
      auto seqs = select_sequences(data, split_part, true, err);
      fs::create_directories(out_dir);
      for (const auto& seq : seqs) {
        const auto res = track_sequence(seq, net, cfg.tracker);
        write_hypotheses(fs::path(out_dir) / (seq.meta().name + ".csv"), res.hypotheses);
        const auto lost = std::count_if(res.tracks.begin(), res.tracks.end(),
                                        [](const Track& t) { return t.status == TrackStatus::Lost; });
        out << seq.meta().name << ": " << res.tracks.size() << " tracks, " << lost << " lost, "
            << res.hypotheses.size() << " hypotheses (" << to_string(cfg.tracker.ablation) << ")\n";
      }
      return 0;
    }

    if (eval_cmd->parsed()) {
      RunConfig cfg = base_config(config);
      std::vector<EvalUnit> units;
      const fs::path gtp(gt), hypp(hyp);
      if (fs::is_directory(gtp)) {
        for (const auto& seq : select_sequences(gtp, split_part, false, err)) {
          EvalUnit u;
          u.name = seq.meta().name;
          u.gt = ground_truth_boxes(seq, cfg.tracker.person_extent_m, cfg.tracker.min_box_side);
          const auto hf = hyp_file_for(hypp, u.name);
          if (!fs::exists(hf)) throw IoError("no hypotheses for sequence " + u.name + " (" + hf.string() + ")");
          u.hyp = read_hypotheses(hf);
          u.frame_count = seq.frame_count();
          units.push_back(std::move(u));
        }
      } else {
        EvalUnit u;
        u.name = gtp.stem().string();
        if (first_line(gtp) == "frame,id,x,y") {
          double g = 0.0;
          if (gsd) {
            g = *gsd;
          } else if (fs::exists(gtp.parent_path() / kMetaFile)) {
            g = read_meta(gtp.parent_path() / kMetaFile).gsd_m_per_px;
          } else {
            throw ConfigError("point ground truth needs --gsd (no meta.txt next to it)");
          }
          for (const auto& a : read_annotations(gtp)) {
            u.gt.push_back({a.frame_index, a.track_id, point_to_box(a, g, cfg.tracker.person_extent_m, cfg.tracker.min_box_side)});
          }
        } else {
          u.gt = read_hypotheses(gtp);
        }
        u.hyp = read_hypotheses(hypp);
        units.push_back(std::move(u));
      }
      const MotpMode mode = motp_mode == "pixel" ? MotpMode::PixelDistance : MotpMode::IouDistance;
      std::vector<std::pair<std::string, MetricReport>> rows;
      MetricTotals overall;
      for (const auto& u : units) {
        const auto t = evaluate(u.gt, u.hyp, {.iou_threshold = iou_thr, .frame_count = u.frame_count});
        overall += t;
        rows.emplace_back(u.name, make_report(t, mode));
      }
      if (units.size() > 1) rows.emplace_back("OVERALL", make_report(overall, mode));
      const std::string table = format_table(rows);
      out << table;
      if (!report.empty()) {
        const fs::path rp(report);
        if (rp.has_parent_path()) fs::create_directories(rp.parent_path());
        std::ofstream r(rp, std::ios::trunc);
        if (!r) throw IoError("cannot write " + report);
        r << (rp.extension() == ".csv" ? format_csv(rows) : table);
        if (!r) throw IoError("write failed: " + report);
      }
      return 0;
    }

    if (report_cmd->parsed()) {
      auto seqs = select_sequences(data, split_part, true, err);
      for (const auto& seq : seqs) {
        const auto hf = hyp_file_for(hyp, seq.meta().name);
        const auto hyps = read_hypotheses(hf);
        std::map<int, std::vector<const Hypothesis*>> by_frame;
        std::map<int, std::map<int, Point2>> centers;  // id -> frame -> center
        for (const auto& h : hyps) {
          by_frame[h.frame].push_back(&h);
          centers[h.track_id][h.frame] = {h.box.center_x(), h.box.center_y()};
        }
        const fs::path dir = seqs.size() > 1 || fs::is_directory(hyp) ? fs::path(out_dir) / seq.meta().name : fs::path(out_dir);
        fs::create_directories(dir);
        for (const auto& f : seq.frames()) {
          Image img = f.image;
          for (const auto& a : f.annotations) draw_disc(img, a.x, a.y, 1.0, {255, 255, 255});
          for (const auto* h : by_frame[f.index]) {
            const auto col = id_color(h->track_id);
            const auto& c = centers[h->track_id];
            for (auto it = c.lower_bound(f.index - trail); it != c.end() && it->first < f.index; ++it) {
              auto nx = std::next(it);
              if (nx == c.end() || nx->first > f.index) break;
              draw_line(img, it->second.x, it->second.y, nx->second.x, nx->second.y, col);
            }
            draw_rect(img, h->box.x1, h->box.y1, h->box.x2, h->box.y2, col);
          }
          write_png(dir / frame_path(dir, f.index).filename(), img);
        }
        out << seq.meta().name << ": " << seq.frame_count() << " overlays in " << dir.string() << '\n';
      }
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << one_line(e.what()) << '\n';
    return 1;
  }
  return 0;
}

}  // namespace aerialmpt
