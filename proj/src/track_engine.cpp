#include "aerialmpt/track_engine.hpp"

#include <algorithm>
#include <cmath>

#include "aerialmpt/error.hpp"

namespace aerialmpt {

void TrackerConfig::validate() const {
  if (!(context_factor > 0.0)) throw ConfigError("tracker: context_factor must be positive");
  if (!(window_min_side > 0.0)) throw ConfigError("tracker: window_min_side must be positive");
  if (!(person_extent_m > 0.0)) throw ConfigError("tracker: person_extent_m must be positive");
  if (!(min_box_side >= 0.0)) throw ConfigError("tracker: min_box_side must be non-negative");
}

std::string_view to_string(TrackStatus s) {
  switch (s) {
    case TrackStatus::Active: return "active";
    case TrackStatus::Lost: return "lost";
    case TrackStatus::Finished: return "finished";
  }
  return "active";
}

Track Track::start(int id, int frame, const PixelBox& box) {
  Track t;
  t.track_id = id;
  t.birth_frame = frame;
  t.box_history.push_back(box);
  return t;
}

bool SearchWindow::contains(Point2 p) const {
  const double h = 0.5 * side;
  return p.x >= center.x - h && p.x <= center.x + h && p.y >= center.y - h && p.y <= center.y + h;
}

SearchWindow make_window(const PixelBox& prev, const TrackerConfig& cfg) {
  const double box_side = std::max(prev.width(), prev.height());
  return {{prev.center_x(), prev.center_y()}, cfg.context_factor,
          cfg.context_factor * std::max(box_side, cfg.window_min_side)};
}

std::optional<CropPair> make_crop_pair(const Image& prev_frame, const Image& cur_frame, const SearchWindow& window,
                                       const NetworkConfig& net) {
  if (prev_frame.empty() || cur_frame.empty()) throw ConfigError("make_crop_pair: frame images not loaded");
  if (!(window.side > 0.0)) return std::nullopt;
  const PixelBox b = window.bounds();
  if (b.x2 <= 0.0 || b.y2 <= 0.0 || b.x1 >= cur_frame.width || b.y1 >= cur_frame.height) return std::nullopt;
  const std::array<std::uint8_t, 3> fill{
      static_cast<std::uint8_t>(std::clamp(std::lround(net.pixel_mean[0]), 0L, 255L)),
      static_cast<std::uint8_t>(std::clamp(std::lround(net.pixel_mean[1]), 0L, 255L)),
      static_cast<std::uint8_t>(std::clamp(std::lround(net.pixel_mean[2]), 0L, 255L))};
  CropPair out;
  out.target = resample_region(prev_frame, b.x1, b.y1, window.side, window.side, net.crop_size, net.crop_size, fill);
  out.search = resample_region(cur_frame, b.x1, b.y1, window.side, window.side, net.crop_size, net.crop_size, fill);
  const double s = window.side / net.crop_size;
  out.transform = {b.x1, b.y1, s, s};
  return out;
}

bool detect_lost(const PixelBox& box, const SearchWindow& window) {
  if (!box.valid()) return true;
  if (box.width() < 1.0 || box.height() < 1.0) return true;
  return !window.contains({box.center_x(), box.center_y()});
}

MotionHistory motion_history(const Track& track, const SearchWindow& window, const NetworkConfig& net) {
  MotionHistory h;
  const std::size_t n = std::min<std::size_t>(track.motion_px.size(), static_cast<std::size_t>(net.history_len));
  const double unit = kOutputRange / window.side;
  for (std::size_t i = track.motion_px.size() - n; i < track.motion_px.size(); ++i) {
    h.vectors.push_back({track.motion_px[i].x * unit, track.motion_px[i].y * unit});
  }
  return h;
}

std::optional<PreparedStep> prepare_step(const Track& track, const Image& prev_frame, const Image& cur_frame,
                                         const Network& net, const PositionBook& others, double gsd,
                                         const TrackerConfig& cfg) {
  if (!track.active()) throw ConfigError("prepare_step: track is not active");
  const auto& ncfg = net.config();
  PreparedStep step;
  step.window = make_window(track.current_box(), cfg);
  auto crops = make_crop_pair(prev_frame, cur_frame, step.window, ncfg);
  if (!crops) return std::nullopt;
  step.transform = crops->transform;
  step.target = net.prepare_crop(crops->target);
  step.search = net.prepare_crop(crops->search);
  step.history = motion_history(track, step.window, ncfg);

  const int now = track.current_frame();
  const int first = std::max(track.birth_frame, now - ncfg.history_len + 1);
  std::vector<Point2> positions;
  std::vector<std::span<const ObjectPosition>> neighbors;
  for (int f = first; f <= now; ++f) {
    const auto& b = track.box_history[static_cast<std::size_t>(f - track.birth_frame)];
    positions.push_back({b.center_x(), b.center_y()});
    neighbors.push_back(others.at(f));
  }
  step.graph = build_neighbor_graph(track.track_id, positions, neighbors, gsd, step.transform, ncfg);
  return step;
}

void mark_lost(Track& track) {
  track.status = TrackStatus::Lost;
  track.death_frame = track.current_frame();
}

void finish_step(Track& track, const std::array<double, 4>& output, const PreparedStep& step, const Network& net,
                 const TrackerConfig& cfg, int image_width, int image_height, std::optional<Point2> gt_center) {
  const PixelBox box = apply_transform(net.output_to_crop_box(output), step.transform);
  bool lost = detect_lost(box, step.window);
  if (!lost) {
    const double cx = box.center_x(), cy = box.center_y();
    lost = !(cx >= 0.0 && cy >= 0.0 && cx < image_width && cy < image_height);
  }
  if (!lost && cfg.gt_escape_check && gt_center) lost = !step.window.contains(*gt_center);
  if (lost) {
    mark_lost(track);
    return;
  }
  const PixelBox& prev = track.current_box();
  track.motion_px.push_back({box.center_x() - prev.center_x(), box.center_y() - prev.center_y()});
  const auto cap = static_cast<std::size_t>(net.config().history_len);
  if (track.motion_px.size() > cap) track.motion_px.erase(track.motion_px.begin());
  track.box_history.push_back(box);
}

void step_track(Track& track, const Image& prev_frame, const Image& cur_frame, const Network& net,
                const PositionBook& others, double gsd, const TrackerConfig& cfg, std::optional<Point2> gt_center) {
  auto step = prepare_step(track, prev_frame, cur_frame, net, others, gsd, cfg);
  if (!step) {
    mark_lost(track);
    return;
  }
  const auto pass = net.forward(step->input(), {.train = false, .dropout_seed = 0, .ablation = cfg.ablation});
  finish_step(track, pass.output, *step, net, cfg, cur_frame.width, cur_frame.height, gt_center);
}

StepAllResult step_all(std::vector<Track>& tracks, const Frame& prev_frame, const Frame& cur_frame,
                       const Network& net, const PositionBook& others, double gsd, const TrackerConfig& cfg,
                       const ReplacementSampler* sampler, const Sequence* gt) {
  StepAllResult out;
  for (auto& track : tracks) {
    if (!track.active()) continue;
    if (track.current_frame() != prev_frame.index) throw ConfigError("step_all: track is not aligned to the previous frame");
    const GroundTruthTrack* truth = gt ? gt->track(track.track_id) : nullptr;
    if (cfg.end_at_gt_death && truth && truth->last_frame() < cur_frame.index) {
      track.status = TrackStatus::Finished;
      track.death_frame = track.current_frame();
      out.events.push_back({LifecycleEvent::Kind::Finished, track.track_id, 0});
    } else {
      std::optional<Point2> gt_center;
      if (truth) {
        if (const auto* p = truth->at(cur_frame.index)) gt_center = Point2{p->x, p->y};
      }
      step_track(track, prev_frame.image, cur_frame.image, net, others, gsd, cfg, gt_center);
      if (track.active()) {
        out.hypotheses.push_back({cur_frame.index, track.track_id, track.current_box()});
        continue;
      }
      out.events.push_back({LifecycleEvent::Kind::Lost, track.track_id, 0});
    }
    if (sampler) {
      const int old_id = track.track_id;
      track = (*sampler)();
      out.events.push_back({LifecycleEvent::Kind::Replaced, old_id, track.track_id});
    }
  }
  return out;
}

SequenceTrackingResult track_sequence(const Sequence& seq, const Network& net, const TrackerConfig& cfg) {
  cfg.validate();
  if (!seq.has_images()) throw ConfigError("track_sequence: sequence loaded without images");
  const double gsd = seq.meta().gsd_m_per_px;
  SequenceTrackingResult res;
  PositionBook book;
  for (int t = 0; t < seq.frame_count(); ++t) {
    if (t > 0) {
      auto step = step_all(res.tracks, seq.frame(t - 1), seq.frame(t), net, book, gsd, cfg, nullptr, &seq);
      res.hypotheses.insert(res.hypotheses.end(), step.hypotheses.begin(), step.hypotheses.end());
    }
    for (const auto& a : seq.frame(t).annotations) {
      if (seq.track(a.track_id)->birth_frame() != t) continue;
      res.tracks.push_back(Track::start(a.track_id, t, point_to_box(a, gsd, cfg.person_extent_m, cfg.min_box_side)));
      res.hypotheses.push_back({t, a.track_id, res.tracks.back().current_box()});
    }
    std::vector<ObjectPosition> here;
    for (const auto& tr : res.tracks) {
      if (tr.active() && tr.current_frame() == t) {
        here.push_back({tr.track_id, {tr.current_box().center_x(), tr.current_box().center_y()}});
      }
    }
    book.set_frame(t, std::move(here));
  }
  for (auto& tr : res.tracks) {
    if (tr.active()) {
      tr.status = TrackStatus::Finished;
      tr.death_frame = tr.current_frame();
    }
  }
  std::sort(res.hypotheses.begin(), res.hypotheses.end(), [](const Hypothesis& a, const Hypothesis& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.track_id < b.track_id;
  });
  return res;
}

}  // namespace aerialmpt
