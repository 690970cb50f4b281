#include "aerialmpt/mot_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "aerialmpt/assignment.hpp"
#include "aerialmpt/error.hpp"

namespace aerialmpt {

namespace {

void check_unique(std::span<const FrameObject> objs, const char* side) {
  std::set<int> ids;
  for (const auto& o : objs) {
    if (!ids.insert(o.id).second) throw ConfigError(std::string("match_frame: duplicate ") + side + " id " + std::to_string(o.id));
  }
}

double center_distance(const PixelBox& a, const PixelBox& b) {
  return std::hypot(a.center_x() - b.center_x(), a.center_y() - b.center_y());
}

// Larger than any achievable sum of real costs (each <= 1).
constexpr double kInfeasibleCost = 1e9;

}  // namespace

FrameMatch match_frame(std::span<const FrameObject> gt, std::span<const FrameObject> hyp, MatchMemory& memory,
                       double thr) {
  check_unique(gt, "ground-truth");
  check_unique(hyp, "hypothesis");
  FrameMatch out;
  auto& c = out.counts;
  c.gt = static_cast<int>(gt.size());

  std::vector<char> gt_used(gt.size(), 0), hyp_used(hyp.size(), 0);
  auto add_match = [&](std::size_t gi, std::size_t hi, double ov, bool carried) {
    gt_used[gi] = 1;
    hyp_used[hi] = 1;
    MatchPair m{gt[gi].id, hyp[hi].id, ov, center_distance(gt[gi].box, hyp[hi].box), carried, false};
    if (!carried) {
      auto it = memory.last.find(m.gt_id);
      m.switched = it != memory.last.end() && it->second != m.hyp_id;
    }
    out.matches.push_back(m);
  };

  for (std::size_t gi = 0; gi < gt.size(); ++gi) {
    auto it = memory.previous.find(gt[gi].id);
    if (it == memory.previous.end()) continue;
    for (std::size_t hi = 0; hi < hyp.size(); ++hi) {
      if (hyp_used[hi] || hyp[hi].id != it->second) continue;
      const double ov = iou(gt[gi].box, hyp[hi].box);
      if (ov > thr) add_match(gi, hi, ov, true);
      break;
    }
  }

  std::vector<std::size_t> rows, cols;
  for (std::size_t gi = 0; gi < gt.size(); ++gi) {
    if (!gt_used[gi]) rows.push_back(gi);
  }
  for (std::size_t hi = 0; hi < hyp.size(); ++hi) {
    if (!hyp_used[hi]) cols.push_back(hi);
  }
  if (!rows.empty() && !cols.empty()) {
    std::vector<double> cost(rows.size() * cols.size());
    std::vector<double> overlap(cost.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t k = 0; k < cols.size(); ++k) {
        const double ov = iou(gt[rows[r]].box, hyp[cols[k]].box);
        overlap[r * cols.size() + k] = ov;
        cost[r * cols.size() + k] = ov > thr ? 1.0 - ov : kInfeasibleCost;
      }
    }
    const auto assign = solve_assignment(cost, static_cast<int>(rows.size()), static_cast<int>(cols.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (assign[r] < 0) continue;
      const double ov = overlap[r * cols.size() + static_cast<std::size_t>(assign[r])];
      if (ov > thr) add_match(rows[r], cols[static_cast<std::size_t>(assign[r])], ov, false);
    }
  }

  std::sort(out.matches.begin(), out.matches.end(), [](const MatchPair& a, const MatchPair& b) { return a.gt_id < b.gt_id; });
  memory.previous.clear();
  for (const auto& m : out.matches) {
    memory.previous[m.gt_id] = m.hyp_id;
    memory.last[m.gt_id] = m.hyp_id;
    c.distances.push_back(1.0 - m.iou);
    c.pixel_distances.push_back(m.pixel_distance);
    if (m.switched) ++c.id_switches;
  }
  c.matches = static_cast<int>(out.matches.size());
  c.fn = c.gt - c.matches;
  c.fp = static_cast<int>(hyp.size()) - c.matches;
  return out;
}

TrackClasses classify_tracks(std::span<const double> fractions) {
  TrackClasses tc;
  for (double f : fractions) {
    if (f > 0.8) {
      ++tc.mostly_tracked;
    } else if (f < 0.2) {
      ++tc.mostly_lost;
    } else {
      ++tc.partially_tracked;
    }
  }
  return tc;
}

MetricTotals& MetricTotals::operator+=(const MetricTotals& o) {
  frames += o.frames;
  gt_dets += o.gt_dets;
  hyp_dets += o.hyp_dets;
  fp += o.fp;
  fn += o.fn;
  id_switches += o.id_switches;
  matches += o.matches;
  fragmentations += o.fragmentations;
  gt_tracks += o.gt_tracks;
  mostly_tracked += o.mostly_tracked;
  partially_tracked += o.partially_tracked;
  mostly_lost += o.mostly_lost;
  idtp += o.idtp;
  idfp += o.idfp;
  idfn += o.idfn;
  distance_sum += o.distance_sum;
  pixel_distance_sum += o.pixel_distance_sum;
  return *this;
}

IdentityCounts id_metrics(const std::vector<std::vector<FrameObject>>& gt_frames,
                          const std::vector<std::vector<FrameObject>>& hyp_frames, double thr) {
  if (gt_frames.size() != hyp_frames.size()) throw ConfigError("id_metrics: frame count mismatch");
  std::map<int, int> gt_index, hyp_index;
  long gt_total = 0, hyp_total = 0;
  for (std::size_t t = 0; t < gt_frames.size(); ++t) {
    for (const auto& g : gt_frames[t]) gt_index.emplace(g.id, static_cast<int>(gt_index.size()));
    for (const auto& h : hyp_frames[t]) hyp_index.emplace(h.id, static_cast<int>(hyp_index.size()));
    gt_total += static_cast<long>(gt_frames[t].size());
    hyp_total += static_cast<long>(hyp_frames[t].size());
  }
  const int G = static_cast<int>(gt_index.size()), H = static_cast<int>(hyp_index.size());
  IdentityCounts out;
  if (G == 0 || H == 0) {
    out.idfn = gt_total;
    out.idfp = hyp_total;
    return out;
  }
  std::vector<long> overlap(static_cast<std::size_t>(G) * H, 0);
  for (std::size_t t = 0; t < gt_frames.size(); ++t) {
    for (const auto& g : gt_frames[t]) {
      for (const auto& h : hyp_frames[t]) {
        if (iou(g.box, h.box) > thr) ++overlap[static_cast<std::size_t>(gt_index[g.id]) * H + hyp_index[h.id]];
      }
    }
  }
  std::vector<double> cost(overlap.size());
  for (std::size_t i = 0; i < overlap.size(); ++i) cost[i] = -static_cast<double>(overlap[i]);
  const auto assign = solve_assignment(cost, G, H);
  for (int g = 0; g < G; ++g) {
    if (assign[g] >= 0) out.idtp += overlap[static_cast<std::size_t>(g) * H + assign[g]];
  }
  out.idfn = gt_total - out.idtp;
  out.idfp = hyp_total - out.idtp;
  return out;
}

const FrameMatch& MetricAccumulator::update(std::span<const FrameObject> gt, std::span<const FrameObject> hyp) {
  frames_.push_back(match_frame(gt, hyp, memory_, threshold_));
  gt_frames_.emplace_back(gt.begin(), gt.end());
  hyp_frames_.emplace_back(hyp.begin(), hyp.end());
  return frames_.back();
}

MetricTotals MetricAccumulator::totals() const {
  MetricTotals t;
  t.frames = static_cast<long>(frames_.size());
  // Per ground-truth id: matched flag for each frame it is present in, in frame order.
  std::map<int, std::vector<char>> timeline;
  for (std::size_t f = 0; f < frames_.size(); ++f) {
    const auto& fm = frames_[f];
    t.gt_dets += fm.counts.gt;
    t.hyp_dets += static_cast<long>(hyp_frames_[f].size());
    t.fp += fm.counts.fp;
    t.fn += fm.counts.fn;
    t.id_switches += fm.counts.id_switches;
    t.matches += fm.counts.matches;
    for (double d : fm.counts.distances) t.distance_sum += d;
    for (double d : fm.counts.pixel_distances) t.pixel_distance_sum += d;
    std::set<int> matched;
    for (const auto& m : fm.matches) matched.insert(m.gt_id);
    for (const auto& g : gt_frames_[f]) timeline[g.id].push_back(matched.count(g.id) ? 1 : 0);
  }
  std::vector<double> fractions;
  for (const auto& [id, tl] : timeline) {
    const auto hits = std::count(tl.begin(), tl.end(), 1);
    fractions.push_back(static_cast<double>(hits) / static_cast<double>(tl.size()));
    const auto first = std::find(tl.begin(), tl.end(), 1);
    if (first == tl.end()) continue;
    const auto last = std::find(tl.rbegin(), tl.rend(), 1).base();
    for (auto it = first + 1; it < last; ++it) {
      if (*it == 0 && *(it - 1) == 1) ++t.fragmentations;
    }
  }
  const auto classes = classify_tracks(fractions);
  t.gt_tracks = static_cast<long>(timeline.size());
  t.mostly_tracked = classes.mostly_tracked;
  t.partially_tracked = classes.partially_tracked;
  t.mostly_lost = classes.mostly_lost;
  const auto ids = id_metrics(gt_frames_, hyp_frames_, threshold_);
  t.idtp = ids.idtp;
  t.idfp = ids.idfp;
  t.idfn = ids.idfn;
  return t;
}

std::optional<double> mota(const MetricTotals& t) {
  if (t.gt_dets <= 0) return std::nullopt;
  return 100.0 * (1.0 - static_cast<double>(t.fn + t.fp + t.id_switches) / static_cast<double>(t.gt_dets));
}

std::optional<double> motp(const MetricTotals& t, MotpMode mode) {
  if (t.matches <= 0) return std::nullopt;
  if (mode == MotpMode::PixelDistance) return t.pixel_distance_sum / static_cast<double>(t.matches);
  return 100.0 * (1.0 - t.distance_sum / static_cast<double>(t.matches));
}

std::optional<double> motal(const MetricTotals& t) {
  if (t.gt_dets <= 0) return std::nullopt;
  return 100.0 * (1.0 - (static_cast<double>(t.fn + t.fp) + std::log10(static_cast<double>(t.id_switches) + 1.0)) /
                            static_cast<double>(t.gt_dets));
}

MetricReport make_report(const MetricTotals& t, MotpMode mode) {
  MetricReport r;
  auto ratio = [](double num, double den) -> std::optional<double> {
    if (den <= 0.0) return std::nullopt;
    return 100.0 * num / den;
  };
  r.idp = ratio(static_cast<double>(t.idtp), static_cast<double>(t.idtp + t.idfp));
  r.idr = ratio(static_cast<double>(t.idtp), static_cast<double>(t.idtp + t.idfn));
  r.idf1 = ratio(2.0 * t.idtp, static_cast<double>(2 * t.idtp + t.idfp + t.idfn));
  r.rcll = ratio(static_cast<double>(t.matches), static_cast<double>(t.gt_dets));
  r.prcn = ratio(static_cast<double>(t.matches), static_cast<double>(t.matches + t.fp));
  if (t.frames > 0) r.far = static_cast<double>(t.fp) / static_cast<double>(t.frames);
  r.gt = t.gt_tracks;
  r.mt = t.mostly_tracked;
  r.pt = t.partially_tracked;
  r.ml = t.mostly_lost;
  r.fp = t.fp;
  r.fn = t.fn;
  r.id = t.id_switches;
  r.fm = t.fragmentations;
  r.mota = mota(t);
  r.motp = motp(t, mode);
  r.motal = motal(t);
  if (t.matches > 0) {
    r.motp_raw = (mode == MotpMode::PixelDistance ? t.pixel_distance_sum : t.distance_sum) / static_cast<double>(t.matches);
  }
  return r;
}

const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> cols{"IDF1", "IDP", "IDR", "Rcll", "Prcn", "FAR", "GT", "MT", "PT",
                                             "ML",   "FP",  "FN",  "ID",   "FM",   "MOTA", "MOTP", "MOTAL"};
  return cols;
}

std::string format_value(const MetricReport& r, const std::string& col, bool csv) {
  auto num = [&](const std::optional<double>& v, int decimals) -> std::string {
    if (!v) return csv ? "nan" : "-";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, *v);
    return buf;
  };
  const int pct = csv ? 6 : 1;
  if (col == "IDF1") return num(r.idf1, pct);
  if (col == "IDP") return num(r.idp, pct);
  if (col == "IDR") return num(r.idr, pct);
  if (col == "Rcll") return num(r.rcll, pct);
  if (col == "Prcn") return num(r.prcn, pct);
  if (col == "FAR") return num(r.far, csv ? 6 : 2);
  if (col == "GT") return std::to_string(r.gt);
  if (col == "MT") return std::to_string(r.mt);
  if (col == "PT") return std::to_string(r.pt);
  if (col == "ML") return std::to_string(r.ml);
  if (col == "FP") return std::to_string(r.fp);
  if (col == "FN") return std::to_string(r.fn);
  if (col == "ID") return std::to_string(r.id);
  if (col == "FM") return std::to_string(r.fm);
  if (col == "MOTA") return num(r.mota, pct);
  if (col == "MOTP") return num(r.motp, pct);
  if (col == "MOTAL") return num(r.motal, pct);
  throw ConfigError("unknown report column " + col);
}

std::string format_table(std::span<const std::pair<std::string, MetricReport>> rows) {
  const auto& cols = report_columns();
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"Sequence"};
  header.insert(header.end(), cols.begin(), cols.end());
  cells.push_back(header);
  for (const auto& [name, r] : rows) {
    std::vector<std::string> row{name};
    for (const auto& c : cols) row.push_back(format_value(r, c, false));
    cells.push_back(std::move(row));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : cells) {
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  std::ostringstream out;
  for (const auto& row : cells) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i == 0) {
        out << row[i] << std::string(width[i] - row[i].size(), ' ');
      } else {
        out << "  " << std::string(width[i] - row[i].size(), ' ') << row[i];
      }
    }
    out << '\n';
  }
  return out.str();
}

std::string format_csv(std::span<const std::pair<std::string, MetricReport>> rows) {
  std::ostringstream out;
  out << "Sequence";
  for (const auto& c : report_columns()) out << ',' << c;
  out << '\n';
  for (const auto& [name, r] : rows) {
    out << name;
    for (const auto& c : report_columns()) out << ',' << format_value(r, c, true);
    out << '\n';
  }
  return out.str();
}

MetricTotals evaluate(std::span<const Hypothesis> gt, std::span<const Hypothesis> hyp, const EvalOptions& opts) {
  int n = opts.frame_count;
  if (n < 0) {
    n = 0;
    for (const auto& g : gt) n = std::max(n, g.frame + 1);
    for (const auto& h : hyp) n = std::max(n, h.frame + 1);
  }
  std::vector<std::vector<FrameObject>> gf(static_cast<std::size_t>(n)), hf(static_cast<std::size_t>(n));
  for (const auto& g : gt) {
    if (g.frame < 0 || g.frame >= n) throw ConfigError("evaluate: ground-truth frame out of range");
    gf[g.frame].push_back({g.track_id, g.box});
  }
  for (const auto& h : hyp) {
    if (h.frame < 0 || h.frame >= n) throw ConfigError("evaluate: hypothesis frame out of range");
    hf[h.frame].push_back({h.track_id, h.box});
  }
  MetricAccumulator acc(opts.iou_threshold);
  for (int t = 0; t < n; ++t) acc.update(gf[t], hf[t]);
  return acc.totals();
}

std::vector<Hypothesis> ground_truth_boxes(const Sequence& seq, double extent, double min_side) {
  std::vector<Hypothesis> out;
  for (const auto& a : seq.annotations()) {
    out.push_back({a.frame_index, a.track_id, point_to_box(a, seq.meta().gsd_m_per_px, extent, min_side)});
  }
  return out;
}

}  // namespace aerialmpt
