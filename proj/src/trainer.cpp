#include "aerialmpt/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "aerialmpt/checkpoint.hpp"
#include "aerialmpt/error.hpp"

namespace aerialmpt {

using nlohmann::json;

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr const char* kVelocityPrefix = "optim.velocity.";

struct CorpusTrack {
  int sequence;
  int track_id;
  long starts;  // number of valid start indices (len - 1)
};

struct Corpus {
  std::vector<CorpusTrack> tracks;
  std::vector<long> cumulative;  // inclusive prefix sums of starts
  long total = 0;

  explicit Corpus(std::span<const Sequence* const> seqs) {
    for (std::size_t s = 0; s < seqs.size(); ++s) {
      for (const auto& [id, tr] : seqs[s]->tracks()) {
        const long n = static_cast<long>(tr.points.size()) - 1;
        if (n < 1) continue;
        tracks.push_back({static_cast<int>(s), id, n});
        total += n;
        cumulative.push_back(total);
      }
    }
    if (tracks.empty()) throw ConfigError("training data has no track spanning two frames");
  }

  // Rejection of tracks in `exclude` keeps the draw uniform over the remaining triples.
  TrackSample draw(std::span<const Sequence* const> seqs, TrainRng& rng, const std::set<std::pair<int, int>>& exclude,
                   const TrackerConfig& tracker) const {
    const bool distinct = exclude.size() < tracks.size();
    std::uniform_int_distribution<long> pick(0, total - 1);
    for (;;) {
      const long u = pick(rng);
      const auto k = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
      const auto& ct = tracks[k];
      if (distinct && exclude.count({ct.sequence, ct.track_id})) continue;
      const long index = u - (k == 0 ? 0 : cumulative[k - 1]);
      const Sequence& seq = *seqs[static_cast<std::size_t>(ct.sequence)];
      const auto& p = seq.track(ct.track_id)->points[static_cast<std::size_t>(index)];
      TrackSample s;
      s.sequence = ct.sequence;
      s.track_id = ct.track_id;
      s.start_frame = p.frame_index;
      s.track = Track::start(ct.track_id, p.frame_index,
                             point_to_box(p, seq.meta().gsd_m_per_px, tracker.person_extent_m, tracker.min_box_side));
      return s;
    }
  }
};

json box_json(const PixelBox& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

std::string describe(const TrackSample& s, const Sequence& seq) {
  std::ostringstream os;
  os << "{sequence: " << seq.meta().name << ", track: " << s.track_id << ", start: " << s.start_frame
     << ", cursor: " << s.cursor() << ", box: [" << s.track.current_box().x1 << ", " << s.track.current_box().y1 << ", "
     << s.track.current_box().x2 << ", " << s.track.current_box().y2 << "]}";
  return os.str();
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_tracks < 1) throw ConfigError("train: batch_tracks must be >= 1");
  // lr = 0 is accepted: a frozen run leaves the weights untouched.
  if (!(lr >= 0.0)) throw ConfigError("train: lr must be >= 0");
  if (!(lr_decay > 0.0)) throw ConfigError("train: lr_decay must be positive");
  if (decay_every <= 0) throw ConfigError("train: decay_every must be positive");
  if (max_iters < 0) throw ConfigError("train: max_iters must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train: momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("train: weight_decay must be >= 0");
  if (checkpoint_every < 0) throw ConfigError("train: checkpoint_every must be >= 0");
  for (const auto& [prefix, f] : lr_multipliers) {
    if (!(f >= 0.0)) throw ConfigError("train: lr multiplier for '" + prefix + "' must be >= 0");
  }
}

double TrainConfig::lr_multiplier(const std::string& name) const {
  double f = 1.0;
  long best = -1;
  for (const auto& [prefix, m] : lr_multipliers) {
    if (name.compare(0, prefix.size(), prefix) == 0 && static_cast<long>(prefix.size()) > best) {
      best = static_cast<long>(prefix.size());
      f = m;
    }
  }
  return f;
}

double lr_at(int iteration, const TrainConfig& cfg) {
  if (iteration < 0) throw ConfigError("lr_at: iteration must be >= 0");
  return cfg.lr * std::pow(cfg.lr_decay, iteration / cfg.decay_every);
}

std::vector<TrackSample> sample_batch(std::span<const Sequence* const> sequences, int count, TrainRng& rng,
                                      const TrackerConfig& tracker) {
  if (sequences.empty()) throw ConfigError("sample_batch: training split is empty");
  const Corpus corpus(sequences);
  std::vector<TrackSample> out;
  std::set<std::pair<int, int>> used;
  for (int i = 0; i < count; ++i) {
    if (used.size() >= corpus.tracks.size()) used.clear();
    out.push_back(corpus.draw(sequences, rng, used, tracker));
    used.insert({out.back().sequence, out.back().track_id});
  }
  return out;
}

Trainer::Trainer(Network& net, std::vector<const Sequence*> sequences, TrainConfig cfg, TrackerConfig tracker)
    : net_(net), seqs_(std::move(sequences)), cfg_(std::move(cfg)), tracker_(tracker), rng_(cfg_.seed) {
  cfg_.validate();
  tracker_.validate();
  tracker_.ablation = cfg_.ablation;
  if (seqs_.empty()) throw ConfigError("trainer: training split is empty");
  for (const auto* s : seqs_) {
    if (!s->has_images()) throw ConfigError("trainer: sequence " + s->meta().name + " loaded without images");
    PositionBook book;
    for (const auto& f : s->frames()) {
      std::vector<ObjectPosition> here;
      for (const auto& a : f.annotations) here.push_back({a.track_id, {a.x, a.y}});
      book.set_frame(f.index, std::move(here));
    }
    books_.push_back(std::move(book));
  }
  grads_ = net_.make_gradients();
  velocity_ = net_.make_gradients();
  for (const auto& p : net_.params().params()) multipliers_.push_back(cfg_.lr_multiplier(p.name));
  batch_ = sample_batch(seqs_, cfg_.batch_tracks, rng_, tracker_);
  for (auto& s : batch_) {
    if (!can_continue(s)) {
      std::set<std::pair<int, int>> in_use;
      for (const auto& o : batch_) in_use.insert({o.sequence, o.track_id});
      s = draw_replacement(in_use);
    }
  }
}

bool Trainer::can_continue(const TrackSample& s) const {
  if (!s.track.active()) return false;
  const Sequence& seq = *seqs_[static_cast<std::size_t>(s.sequence)];
  const int next = s.cursor() + 1;
  if (next >= seq.frame_count()) return false;
  return seq.track(s.track_id)->at(next) != nullptr;
}

TrackSample Trainer::draw_replacement(const std::set<std::pair<int, int>>& in_use) {
  const Corpus corpus(seqs_);
  for (int tries = 0; tries < 1000; ++tries) {
    auto s = corpus.draw(seqs_, rng_, in_use, tracker_);
    if (can_continue(s)) return s;
  }
  throw TrainingError("trainer: cannot draw a replacement track with a next annotated frame");
}

LossRecord Trainer::step() {
  const double lr = lr_at(iteration_, cfg_);
  const int B = static_cast<int>(batch_.size());
  grads_.set_zero();

  struct Pending {
    PreparedStep step;
    std::array<double, 4> output;
    Point2 gt_center;
  };
  std::vector<std::optional<Pending>> pending(static_cast<std::size_t>(B));
  double loss_sum = 0.0, pixel_sum = 0.0;

  for (int i = 0; i < B; ++i) {
    auto& s = batch_[static_cast<std::size_t>(i)];
    const Sequence& seq = *seqs_[static_cast<std::size_t>(s.sequence)];
    const int f = s.cursor();
    const auto* gt = seq.track(s.track_id)->at(f + 1);
    auto prepared = prepare_step(s.track, seq.frame(f).image, seq.frame(f + 1).image, net_,
                                 books_[static_cast<std::size_t>(s.sequence)], seq.meta().gsd_m_per_px, tracker_);
    if (!prepared) continue;  // window off-image: replaced below without contributing
    const PixelBox gt_box = point_to_box(*gt, seq.meta().gsd_m_per_px, tracker_.person_extent_m, tracker_.min_box_side);
    const auto target = net_.crop_box_to_output(apply_transform(gt_box, invert(prepared->transform)));
    const std::uint64_t dseed = splitmix(cfg_.seed ^ splitmix(static_cast<std::uint64_t>(iteration_) * 1315423911ULL +
                                                              static_cast<std::uint64_t>(i)));
    auto pass = net_.forward(prepared->input(), {.train = true, .dropout_seed = dseed, .ablation = cfg_.ablation});
    const double loss = l1_loss(pass.output, target);
    if (!std::isfinite(loss)) {
      std::ostringstream os;
      os << "non-finite loss at iteration " << iteration_ << ", batch slot " << i << " " << describe(s, seq)
         << ", output [" << pass.output[0] << ", " << pass.output[1] << ", " << pass.output[2] << ", " << pass.output[3]
         << "]; batch state: " << state_json();
      throw TrainingError(os.str());
    }
    auto g = l1_loss_grad(pass.output, target);
    std::array<double, 4> go{};
    for (int k = 0; k < 4; ++k) go[k] = g[k] / B;
    net_.backward(pass, go, grads_);
    loss_sum += loss;
    pixel_sum += 0.25 * loss * prepared->window.side / kOutputRange;
    pending[static_cast<std::size_t>(i)] = Pending{std::move(*prepared), pass.output, {gt->x, gt->y}};
  }

  // SGD with optional momentum and weight decay.
  auto& params = net_.params().params();
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double step_lr = lr * multipliers_[k];
    auto& w = params[k].value;
    const auto& g = grads_.params()[k].value;
    auto& v = velocity_.params()[k].value;
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g[j] + cfg_.weight_decay * w[j];
      v[j] = cfg_.momentum > 0.0 ? cfg_.momentum * v[j] + gj : gj;
      if (step_lr != 0.0) w[j] -= step_lr * v[j];
    }
  }

  // Advance every track with its own estimate; replace the ones that cannot continue.
  for (int i = 0; i < B; ++i) {
    auto& s = batch_[static_cast<std::size_t>(i)];
    const Sequence& seq = *seqs_[static_cast<std::size_t>(s.sequence)];
    auto& p = pending[static_cast<std::size_t>(i)];
    if (p) {
      const auto& img = seq.frame(s.cursor() + 1).image;
      finish_step(s.track, p->output, p->step, net_, tracker_, img.width, img.height, p->gt_center);
    } else {
      mark_lost(s.track);
    }
  }
  for (int i = 0; i < B; ++i) {
    auto& s = batch_[static_cast<std::size_t>(i)];
    if (can_continue(s)) continue;
    std::set<std::pair<int, int>> in_use;
    for (int j = 0; j < B; ++j) {
      if (j != i) in_use.insert({batch_[static_cast<std::size_t>(j)].sequence, batch_[static_cast<std::size_t>(j)].track_id});
    }
    s = draw_replacement(in_use);
  }

  LossRecord rec;
  rec.iteration = iteration_;
  rec.lr = lr;
  rec.loss = B > 0 ? loss_sum / B : 0.0;
  rec.pixel_error = B > 0 ? pixel_sum / B : 0.0;
  ++iteration_;
  return rec;
}

std::string Trainer::state_json() const {
  std::ostringstream rng;
  rng << rng_;
  json batch = json::array();
  for (const auto& s : batch_) {
    json boxes = json::array();
    for (const auto& b : s.track.box_history) boxes.push_back(box_json(b));
    json motion = json::array();
    for (const auto& m : s.track.motion_px) motion.push_back(json::array({m.x, m.y}));
    batch.push_back({{"sequence", seqs_[static_cast<std::size_t>(s.sequence)]->meta().name},
                     {"track_id", s.track_id},
                     {"start_frame", s.start_frame},
                     {"status", std::string(to_string(s.track.status))},
                     {"birth_frame", s.track.birth_frame},
                     {"boxes", boxes},
                     {"motion", motion}});
  }
  return json{{"iteration", iteration_}, {"rng", rng.str()}, {"batch", batch}}.dump();
}

void Trainer::restore_state(const std::string& text, const nn::ParameterSet* velocity) {
  try {
    const auto j = json::parse(text);
    iteration_ = j.at("iteration").get<int>();
    std::istringstream rs(j.at("rng").get<std::string>());
    rs >> rng_;
    if (!rs) throw FormatError("trainer state: bad rng state");
    std::vector<TrackSample> batch;
    for (const auto& e : j.at("batch")) {
      TrackSample s;
      const auto name = e.at("sequence").get<std::string>();
      auto it = std::find_if(seqs_.begin(), seqs_.end(), [&](const Sequence* q) { return q->meta().name == name; });
      if (it == seqs_.end()) throw FormatError("trainer state refers to unknown sequence " + name);
      s.sequence = static_cast<int>(it - seqs_.begin());
      s.track_id = e.at("track_id").get<int>();
      s.start_frame = e.at("start_frame").get<int>();
      s.track.track_id = s.track_id;
      s.track.birth_frame = e.at("birth_frame").get<int>();
      const auto st = e.at("status").get<std::string>();
      s.track.status = st == "active" ? TrackStatus::Active : st == "lost" ? TrackStatus::Lost : TrackStatus::Finished;
      for (const auto& b : e.at("boxes")) s.track.box_history.push_back({b[0], b[1], b[2], b[3]});
      for (const auto& m : e.at("motion")) s.track.motion_px.push_back({m[0], m[1]});
      if (s.track.box_history.empty()) throw FormatError("trainer state: empty box history");
      batch.push_back(std::move(s));
    }
    if (static_cast<int>(batch.size()) != cfg_.batch_tracks) throw FormatError("trainer state: batch size differs from config");
    batch_ = std::move(batch);
  } catch (const json::exception& e) {
    throw FormatError(std::string("trainer state: ") + e.what());
  }
  if (velocity) {
    if (!velocity->same_layout(velocity_)) throw FormatError("trainer state: optimizer buffers do not match the network");
    velocity_ = *velocity;
  }
}

std::filesystem::path checkpoint_path(const std::filesystem::path& out_dir, int iteration) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "checkpoint_%06d.amptnet", iteration);
  return out_dir / buf;
}

namespace {

void save_trainer(const std::filesystem::path& path, const Network& net, const Trainer& t) {
  Checkpoint ck = make_checkpoint(net, t.state_json());
  for (const auto& p : t.velocity().params()) {
    nn::Param v = p;
    v.name = kVelocityPrefix + p.name;
    ck.tensors.push_back(std::move(v));
  }
  save_checkpoint(path, ck);
}

std::string csv_row(const LossRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g\n", r.iteration, r.lr, r.loss, r.pixel_error);
  return buf;
}

std::vector<LossRecord> read_curve(const std::filesystem::path& path) {
  std::vector<LossRecord> out;
  std::ifstream is(path);
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    LossRecord r;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf", &r.iteration, &r.lr, &r.loss, &r.pixel_error) == 4) out.push_back(r);
  }
  return out;
}

}  // namespace

TrainResult train(Network& net, std::span<const Sequence> data, const TrainConfig& cfg, const TrackerConfig& tracker,
                  const TrainOptions& opts) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(opts.out_dir, ec);
  if (ec) throw IoError("cannot create " + opts.out_dir.string() + ": " + ec.message());

  std::optional<Checkpoint> resume;
  if (opts.resume) {
    resume = load_checkpoint(*opts.resume);
    net = network_from_checkpoint(*resume);
  }
  std::vector<const Sequence*> seqs;
  for (const auto& s : data) seqs.push_back(&s);
  Trainer trainer(net, seqs, cfg, tracker);

  TrainResult res;
  if (resume) {
    nn::ParameterSet vel = net.make_gradients();
    bool have = true;
    for (auto& p : vel.params()) {
      const auto* t = resume->find(kVelocityPrefix + p.name);
      if (!t || t->shape != p.shape) {
        have = false;
        break;
      }
      p.value = t->value;
    }
    trainer.restore_state(resume->state_json, have ? &vel : nullptr);
    for (const auto& r : read_curve(opts.out_dir / kLossCurveFile)) {
      if (r.iteration < trainer.iteration()) res.curve.push_back(r);
    }
  }

  const auto curve_path = opts.out_dir / kLossCurveFile;
  std::ofstream curve(curve_path, std::ios::trunc);
  if (!curve) throw IoError("cannot write " + curve_path.string());
  curve << "iteration,lr,loss,pixel_error\n";
  for (const auto& r : res.curve) curve << csv_row(r);
  curve.flush();

  while (trainer.iteration() < cfg.max_iters) {
    LossRecord rec;
    try {
      rec = trainer.step();
    } catch (const TrainingError& e) {
      std::ofstream dump(opts.out_dir / "diverged_batch.txt", std::ios::trunc);
      dump << e.what() << '\n';
      throw;
    }
    res.curve.push_back(rec);
    curve << csv_row(rec);
    curve.flush();
    if (!curve) throw IoError("write failed: " + curve_path.string());
    if (opts.on_iteration) opts.on_iteration(rec);
    if (cfg.checkpoint_every > 0 && trainer.iteration() % cfg.checkpoint_every == 0 && trainer.iteration() < cfg.max_iters) {
      save_trainer(checkpoint_path(opts.out_dir, trainer.iteration()), net, trainer);
    }
  }
  res.iterations = trainer.iteration();
  res.final_checkpoint = opts.out_dir / kFinalCheckpoint;
  save_trainer(res.final_checkpoint, net, trainer);
  return res;
}

TrackingError tracking_error(const Network& net, std::span<const Sequence> data, const TrackerConfig& tracker) {
  TrackingError out;
  double sum = 0.0;
  for (const auto& seq : data) {
    const auto res = track_sequence(seq, net, tracker);
    for (const auto& tr : res.tracks) {
      ++out.tracks;
      if (tr.status == TrackStatus::Lost) ++out.lost_tracks;
      const auto* truth = seq.track(tr.track_id);
      for (std::size_t k = 1; k < tr.box_history.size(); ++k) {
        const auto* p = truth->at(tr.birth_frame + static_cast<int>(k));
        if (!p) continue;
        const PixelBox g = point_to_box(*p, seq.meta().gsd_m_per_px, tracker.person_extent_m, tracker.min_box_side);
        const PixelBox& e = tr.box_history[k];
        sum += std::abs(e.x1 - g.x1) + std::abs(e.y1 - g.y1) + std::abs(e.x2 - g.x2) + std::abs(e.y2 - g.y2);
        ++out.steps;
      }
    }
  }
  out.mean_pixel_error = out.steps > 0 ? sum / (4.0 * static_cast<double>(out.steps)) : 0.0;
  return out;
}

}  // namespace aerialmpt
