#include "aerialmpt/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "aerialmpt/dataset_io.hpp"
#include "aerialmpt/error.hpp"

namespace aerialmpt {

namespace {

using Rng = std::mt19937_64;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Independent streams for trajectories, colors, background and per-frame noise.
enum Stream : std::uint64_t { kTrajectory = 1, kColor = 2, kBackground = 3, kNoise = 4 };

Rng stream(const SynthConfig& cfg, std::uint64_t kind, std::uint64_t index = 0) {
  return Rng(splitmix(splitmix(cfg.seed ^ (kind << 56)) + index));
}

double uniform(Rng& rng, double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }

struct Agent {
  std::vector<Point2> path;  // one per frame, possibly leaving the image
};

bool inside_image(const SynthConfig& c, Point2 p) { return p.x >= 0.0 && p.y >= 0.0 && p.x < c.width && p.y < c.height; }

bool inside_margin(const SynthConfig& c, Point2 p) {
  return p.x >= c.margin && p.y >= c.margin && p.x <= c.width - c.margin && p.y <= c.height - c.margin;
}

Point2 random_birth(const SynthConfig& c, Rng& rng) {
  return {uniform(rng, c.margin, c.width - c.margin), uniform(rng, c.margin, c.height - c.margin)};
}

Point2 random_velocity(const SynthConfig& c, Rng& rng) {
  const double a = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double s = c.speed_max > c.speed_min ? uniform(rng, c.speed_min, c.speed_max) : c.speed_min;
  return {s * std::cos(a), s * std::sin(a)};
}

std::vector<Agent> linear_agents(const SynthConfig& c, Rng& rng) {
  std::vector<Agent> out(static_cast<std::size_t>(c.n_agents));
  for (auto& a : out) {
    const Point2 p0 = random_birth(c, rng);
    const Point2 v = random_velocity(c, rng);
    for (int t = 0; t < c.n_frames; ++t) a.path.push_back({p0.x + t * v.x, p0.y + t * v.y});
  }
  return out;
}

std::vector<Agent> group_agents(const SynthConfig& c, Rng& rng) {
  std::normal_distribution<double> noise(0.0, c.group_noise);
  const Point2 center = random_birth(c, rng);
  const Point2 v = random_velocity(c, rng);
  std::vector<Agent> out(static_cast<std::size_t>(c.n_agents));
  for (auto& a : out) {
    Point2 p;
    int tries = 0;
    do {
      const double r = c.group_spread * std::sqrt(uniform(rng, 0.0, 1.0));
      const double ang = uniform(rng, 0.0, 2.0 * std::numbers::pi);
      p = {center.x + r * std::cos(ang), center.y + r * std::sin(ang)};
    } while (!inside_margin(c, p) && ++tries < 1000);
    if (!inside_margin(c, p)) p = center;
    for (int t = 0; t < c.n_frames; ++t) {
      a.path.push_back(p);
      const double nx = c.group_noise > 0.0 ? noise(rng) : 0.0;
      const double ny = c.group_noise > 0.0 ? noise(rng) : 0.0;
      p = {p.x + v.x + nx, p.y + v.y + ny};
    }
  }
  return out;
}

// Pairs pass through a shared meeting point at the same frame; an odd agent out moves linearly.
std::vector<Agent> crossing_agents(const SynthConfig& c, Rng& rng) {
  std::vector<Agent> out;
  const int lo = std::max(1, c.n_frames / 4);
  const int hi = std::max(lo, (3 * c.n_frames) / 4);
  for (int pair = 0; pair + 1 < c.n_agents; pair += 2) {
    bool placed = false;
    for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
      const int tm = std::uniform_int_distribution<int>(lo, std::min(hi, c.n_frames - 1))(rng);
      const Point2 m{uniform(rng, 0.25 * c.width, 0.75 * c.width), uniform(rng, 0.25 * c.height, 0.75 * c.height)};
      const Point2 va = random_velocity(c, rng);
      const double turn = uniform(rng, 0.25 * std::numbers::pi, 1.75 * std::numbers::pi);
      const double sb = c.speed_max > c.speed_min ? uniform(rng, c.speed_min, c.speed_max) : c.speed_min;
      const double aa = std::atan2(va.y, va.x) + turn;
      const Point2 vb{sb * std::cos(aa), sb * std::sin(aa)};
      const Point2 pa{m.x - tm * va.x, m.y - tm * va.y};
      const Point2 pb{m.x - tm * vb.x, m.y - tm * vb.y};
      if (!inside_margin(c, pa) || !inside_margin(c, pb)) continue;
      Agent a, b;
      for (int t = 0; t < c.n_frames; ++t) {
        a.path.push_back({pa.x + t * va.x, pa.y + t * va.y});
        b.path.push_back({pb.x + t * vb.x, pb.y + t * vb.y});
      }
      out.push_back(std::move(a));
      out.push_back(std::move(b));
      placed = true;
    }
    if (!placed) throw ConfigError("synth: cannot place a crossing pair; enlarge the image or lower the speed");
  }
  if (c.n_agents % 2 == 1) {
    SynthConfig one = c;
    one.n_agents = 1;
    out.push_back(linear_agents(one, rng).front());
  }
  return out;
}

// Random jumps whose length always exceeds the escape distance.
std::vector<Agent> adversarial_agents(const SynthConfig& c, Rng& rng) {
  std::vector<Agent> out(static_cast<std::size_t>(c.n_agents));
  for (auto& a : out) {
    Point2 p = random_birth(c, rng);
    a.path.push_back(p);
    for (int t = 1; t < c.n_frames; ++t) {
      Point2 q = p;
      for (int tries = 0; tries < 100000; ++tries) {
        const Point2 v = random_velocity(c, rng);
        q = {p.x + v.x, p.y + v.y};
        if (inside_margin(c, q)) break;
      }
      if (!inside_margin(c, q)) throw ConfigError("synth: adversarial jump cannot stay inside the image");
      a.path.push_back(q);
      p = q;
    }
  }
  return out;
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

}  // namespace

MotionModel parse_motion_model(std::string_view s) {
  if (s == "linear") return MotionModel::Linear;
  if (s == "group") return MotionModel::Group;
  if (s == "crossing") return MotionModel::Crossing;
  if (s == "adversarial-fast" || s == "adversarial_fast") return MotionModel::AdversarialFast;
  throw ConfigError("unknown motion model '" + std::string(s) + "' (expected linear, group, crossing, adversarial-fast)");
}

std::string_view to_string(MotionModel m) {
  switch (m) {
    case MotionModel::Linear: return "linear";
    case MotionModel::Group: return "group";
    case MotionModel::Crossing: return "crossing";
    case MotionModel::AdversarialFast: return "adversarial-fast";
  }
  return "linear";
}

void SynthConfig::validate() const {
  if (name.empty()) throw ConfigError("synth: name must not be empty");
  if (width <= 0 || height <= 0) throw ConfigError("synth: image size must be positive");
  if (n_agents < 0) throw ConfigError("synth: n_agents must be >= 0");
  if (n_frames < 1) throw ConfigError("synth: n_frames must be >= 1");
  if (!(speed_min >= 0.0) || !(speed_max >= speed_min)) throw ConfigError("synth: need 0 <= speed_min <= speed_max");
  if (!(dot_radius > 0.0)) throw ConfigError("synth: dot_radius must be positive");
  if (!(margin >= 0.0) || 2.0 * margin >= std::min(width, height)) throw ConfigError("synth: margin leaves no room for agents");
  if (!(gsd > 0.0)) throw ConfigError("synth: gsd must be positive");
  if (!(fps > 0.0)) throw ConfigError("synth: fps must be positive");
  if (!(group_noise >= 0.0) || !(group_spread >= 0.0)) throw ConfigError("synth: group noise/spread must be >= 0");
  if (!(color_jitter >= 0.0) || !(pixel_noise >= 0.0)) throw ConfigError("synth: jitter and noise must be >= 0");
  if (!(background_cell > 0.0)) throw ConfigError("synth: background_cell must be positive");
  if (motion == MotionModel::Crossing && n_frames < 2) throw ConfigError("synth: crossing needs n_frames >= 2");
  if (motion == MotionModel::AdversarialFast) {
    const double need = escape_factor * 2.0 * dot_radius;
    if (!(speed_min > need)) {
      throw ConfigError("synth: adversarial-fast needs speed_min > escape_factor * dot diameter (" + std::to_string(need) + ")");
    }
    const double room = std::min(width, height) - 2.0 * margin;
    if (speed_max > 0.7 * room) throw ConfigError("synth: adversarial-fast speed_max too large for the image");
  }
}

std::vector<PointAnnotation> synth_annotations(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng = stream(cfg, kTrajectory);
  std::vector<Agent> agents;
  switch (cfg.motion) {
    case MotionModel::Linear: agents = linear_agents(cfg, rng); break;
    case MotionModel::Group: agents = group_agents(cfg, rng); break;
    case MotionModel::Crossing: agents = crossing_agents(cfg, rng); break;
    case MotionModel::AdversarialFast: agents = adversarial_agents(cfg, rng); break;
  }
  std::vector<PointAnnotation> out;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    for (int t = 0; t < cfg.n_frames; ++t) {
      const Point2 p{round_to_file_precision(agents[i].path[t].x), round_to_file_precision(agents[i].path[t].y)};
      if (!inside_image(cfg, p)) break;
      out.push_back({t, static_cast<int>(i) + 1, p.x, p.y});
    }
  }
  std::sort(out.begin(), out.end(), [](const PointAnnotation& a, const PointAnnotation& b) {
    return a.frame_index != b.frame_index ? a.frame_index < b.frame_index : a.track_id < b.track_id;
  });
  return out;
}

Image render_frame(const SynthConfig& cfg, std::span<const PointAnnotation> annotations, int index) {
  const int W = cfg.width, H = cfg.height;
  std::vector<double> buf(static_cast<std::size_t>(W) * H * 3);

  // Static value-noise background.
  Rng bg = stream(cfg, kBackground);
  const int gw = static_cast<int>(std::ceil(W / cfg.background_cell)) + 2;
  const int gh = static_cast<int>(std::ceil(H / cfg.background_cell)) + 2;
  std::vector<double> lattice(static_cast<std::size_t>(gw) * gh);
  for (auto& v : lattice) v = uniform(bg, -1.0, 1.0);
  static constexpr std::array<double, 3> kTint{1.0, 1.0, 0.92};
  for (int y = 0; y < H; ++y) {
    const double fy = (y + 0.5) / cfg.background_cell;
    const int iy = static_cast<int>(fy);
    const double ty = smooth(fy - iy);
    for (int x = 0; x < W; ++x) {
      const double fx = (x + 0.5) / cfg.background_cell;
      const int ix = static_cast<int>(fx);
      const double tx = smooth(fx - ix);
      auto L = [&](int gx, int gy) { return lattice[static_cast<std::size_t>(gy) * gw + gx]; };
      const double top = L(ix, iy) * (1 - tx) + L(ix + 1, iy) * tx;
      const double bot = L(ix, iy + 1) * (1 - tx) + L(ix + 1, iy + 1) * tx;
      const double v = cfg.background_level + cfg.background_contrast * (top * (1 - ty) + bot * ty);
      for (int c = 0; c < 3; ++c) buf[(static_cast<std::size_t>(y) * W + x) * 3 + c] = v * kTint[c];
    }
  }

  // Dots, 4x4 supersampled coverage.
  constexpr int kSub = 4;
  const double r = cfg.dot_radius, r2 = r * r;
  for (const auto& a : annotations) {
    if (a.frame_index != index) continue;
    Rng col = stream(cfg, kColor, static_cast<std::uint64_t>(a.track_id));
    std::array<double, 3> color{};
    for (int c = 0; c < 3; ++c) color[c] = std::clamp(cfg.dot_color[c] + uniform(col, -1.0, 1.0) * cfg.color_jitter, 0.0, 255.0);
    const int x0 = std::max(0, static_cast<int>(std::floor(a.x - r - 1))), x1 = std::min(W - 1, static_cast<int>(std::ceil(a.x + r + 1)));
    const int y0 = std::max(0, static_cast<int>(std::floor(a.y - r - 1))), y1 = std::min(H - 1, static_cast<int>(std::ceil(a.y + r + 1)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        int hits = 0;
        for (int sy = 0; sy < kSub; ++sy) {
          for (int sx = 0; sx < kSub; ++sx) {
            const double px = x + (sx + 0.5) / kSub - a.x, py = y + (sy + 0.5) / kSub - a.y;
            if (px * px + py * py <= r2) ++hits;
          }
        }
        if (hits == 0) continue;
        const double alpha = static_cast<double>(hits) / (kSub * kSub);
        for (int c = 0; c < 3; ++c) {
          auto& v = buf[(static_cast<std::size_t>(y) * W + x) * 3 + c];
          v = (1 - alpha) * v + alpha * color[c];
        }
      }
    }
  }

  Image img(W, H);
  Rng nz = stream(cfg, kNoise, static_cast<std::uint64_t>(index));
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t i = 0; i < buf.size(); ++i) {
    const double n = cfg.pixel_noise > 0.0 ? cfg.pixel_noise * noise(nz) : 0.0;
    img.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(buf[i] + n), 0L, 255L));
  }
  return img;
}

Sequence generate(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
  const auto ann = synth_annotations(cfg);
  std::error_code ec;
  std::filesystem::create_directories(out_dir / kFramesDir, ec);
  if (ec) throw IoError("cannot create " + (out_dir / kFramesDir).string() + ": " + ec.message());
  SequenceMeta meta;
  meta.name = cfg.name;
  meta.frame_count = cfg.n_frames;
  meta.gsd_m_per_px = cfg.gsd;
  meta.fps = cfg.fps;
  meta.width = cfg.width;
  meta.height = cfg.height;
  write_meta(out_dir / kMetaFile, meta);
  write_annotations(out_dir / kAnnotationFile, ann);
  for (int t = 0; t < cfg.n_frames; ++t) write_png(frame_path(out_dir, t), render_frame(cfg, ann, t));
  return load_sequence(out_dir);
}

void generate_dataset(const SynthConfig& cfg, int train_count, int test_count, const std::filesystem::path& root) {
  if (train_count < 0 || test_count < 0) throw ConfigError("synth: sequence counts must be >= 0");
  SplitManifest manifest;
  auto one = [&](const char* part, int i, std::vector<std::string>& names) {
    SynthConfig c = cfg;
    char buf[32];
    std::snprintf(buf, sizeof buf, "_%s_%03d", part, i);
    c.name = cfg.name + buf;
    c.seed = splitmix(cfg.seed + (part[1] == 'r' ? 0 : 0x100000) + static_cast<std::uint64_t>(i));
    generate(c, root / c.name);
    names.push_back(c.name);
  };
  for (int i = 0; i < train_count; ++i) one("train", i, manifest.train);
  for (int i = 0; i < test_count; ++i) one("test", i, manifest.test);
  write_manifest(root / kManifestFile, manifest);
}

}  // namespace aerialmpt
