#include "aerialmpt/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "aerialmpt/error.hpp"

namespace aerialmpt {

namespace {

class Section {
 public:
  Section(const toml::table* t, std::string name, std::string source)
      : t_(t), name_(std::move(name)), source_(std::move(source)) {}

  bool present() const { return t_ != nullptr; }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!t_) return;
    const auto* node = t_->get(key);
    if (!node) return;
    if constexpr (std::is_same_v<T, bool>) {
      if (auto v = node->value<bool>()) {
        out = *v;
        return;
      }
    } else if constexpr (std::is_integral_v<T>) {
      if (auto v = node->as_integer()) {
        out = static_cast<T>(v->get());
        return;
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (auto v = node->value<double>()) {
        out = *v;
        return;
      }
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (auto v = node->value<std::string>()) {
        out = *v;
        return;
      }
    }
    fail(key, "has the wrong type");
  }

  template <typename T, std::size_t N>
  void get_array(const char* key, std::array<T, N>& out) {
    std::vector<T> v(out.begin(), out.end());
    get_vector(key, v);
    if (v.size() != N) fail(key, "must have " + std::to_string(N) + " entries");
    std::copy(v.begin(), v.end(), out.begin());
  }

  template <typename T>
  void get_vector(const char* key, std::vector<T>& out) {
    seen_.insert(key);
    if (!t_) return;
    const auto* node = t_->get(key);
    if (!node) return;
    const auto* arr = node->as_array();
    if (!arr) fail(key, "must be an array");
    std::vector<T> v;
    for (const auto& e : *arr) {
      if constexpr (std::is_integral_v<T>) {
        auto x = e.as_integer();
        if (!x) fail(key, "must hold integers");
        v.push_back(static_cast<T>(x->get()));
      } else {
        auto x = e.value<double>();
        if (!x) fail(key, "must hold numbers");
        v.push_back(*x);
      }
    }
    out = std::move(v);
  }

  const toml::table* subtable(const char* key) {
    seen_.insert(key);
    if (!t_) return nullptr;
    const auto* node = t_->get(key);
    if (!node) return nullptr;
    if (!node->as_table()) fail(key, "must be a table");
    return node->as_table();
  }

  void finish() const {
    if (!t_) return;
    for (const auto& [k, v] : *t_) {
      if (!seen_.count(std::string(k.str()))) {
        throw ConfigError(source_ + ": unknown key [" + name_ + "] " + std::string(k.str()));
      }
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& why) const {
    throw ConfigError(source_ + ": [" + name_ + "] " + key + " " + why);
  }

 private:
  const toml::table* t_;
  std::string name_;
  std::string source_;
  std::set<std::string> seen_;
};

const toml::table* table_or_null(const toml::table& root, const char* key, const std::string& source) {
  const auto* n = root.get(key);
  if (!n) return nullptr;
  if (!n->as_table()) throw ConfigError(source + ": [" + key + "] must be a table");
  return n->as_table();
}

void read_network(Section s, NetworkConfig& n) {
  std::string preset = n.reduced_scale ? "reduced" : "production";
  s.get("preset", preset);
  if (preset == "reduced") {
    n = NetworkConfig::reduced();
  } else if (preset == "production") {
    n = NetworkConfig::production();
  } else {
    s.fail("preset", "must be \"production\" or \"reduced\"");
  }
  s.get("crop_size", n.crop_size);
  s.get("history_len", n.history_len);
  s.get("graph_neighbors", n.graph_neighbors);
  s.get("graph_radius_m", n.graph_radius_m);
  s.get("lstm_hidden", n.lstm_hidden);
  s.get("lstm_layers", n.lstm_layers);
  s.get("lstm_dropout", n.lstm_dropout);
  s.get("motion_out_dim", n.motion_out_dim);
  s.get_vector("graph_channels", n.graph_channels);
  s.get_vector("fc_plan", n.fc_plan);
  s.get_array("pixel_mean", n.pixel_mean);
  s.get("pixel_scale", n.pixel_scale);
  std::vector<int> conv_channels;
  for (const auto& c : n.snn_channel_plan) conv_channels.push_back(c.out_channels);
  s.get_vector("conv_channels", conv_channels);
  if (conv_channels.size() != n.snn_channel_plan.size()) s.fail("conv_channels", "must list one width per conv layer");
  for (std::size_t i = 0; i < conv_channels.size(); ++i) n.snn_channel_plan[i].out_channels = conv_channels[i];
  s.finish();
  n.validate();
}

void read_train(Section s, TrainConfig& t) {
  s.get("batch_tracks", t.batch_tracks);
  s.get("lr", t.lr);
  s.get("lr_decay", t.lr_decay);
  s.get("decay_every", t.decay_every);
  s.get("max_iters", t.max_iters);
  std::int64_t seed = static_cast<std::int64_t>(t.seed);
  s.get("seed", seed);
  t.seed = static_cast<std::uint64_t>(seed);
  s.get("momentum", t.momentum);
  s.get("weight_decay", t.weight_decay);
  s.get("checkpoint_every", t.checkpoint_every);
  std::string ablation(to_string(t.ablation));
  s.get("ablation", ablation);
  t.ablation = parse_ablation(ablation);
  if (const auto* m = s.subtable("lr_multipliers")) {
    t.lr_multipliers.clear();
    for (const auto& [k, v] : *m) {
      auto f = v.value<double>();
      if (!f) s.fail("lr_multipliers." + std::string(k.str()), "must be a number");
      t.lr_multipliers.emplace_back(std::string(k.str()), *f);
    }
  }
  s.finish();
  t.validate();
}

void read_tracker(Section s, TrackerConfig& t) {
  s.get("context_factor", t.context_factor);
  s.get("window_min_side", t.window_min_side);
  s.get("person_extent_m", t.person_extent_m);
  s.get("min_box_side", t.min_box_side);
  s.get("gt_escape_check", t.gt_escape_check);
  s.get("end_at_gt_death", t.end_at_gt_death);
  std::string ablation(to_string(t.ablation));
  s.get("ablation", ablation);
  t.ablation = parse_ablation(ablation);
  s.finish();
  t.validate();
}

void read_synth(Section s, RunConfig& r) {
  auto& c = r.synth;
  s.get("name", c.name);
  s.get("width", c.width);
  s.get("height", c.height);
  s.get("n_agents", c.n_agents);
  std::string motion(to_string(c.motion));
  s.get("motion", motion);
  c.motion = parse_motion_model(motion);
  s.get("speed_min", c.speed_min);
  s.get("speed_max", c.speed_max);
  s.get("group_noise", c.group_noise);
  s.get("group_spread", c.group_spread);
  s.get("dot_radius", c.dot_radius);
  s.get_array("dot_color", c.dot_color);
  s.get("color_jitter", c.color_jitter);
  s.get("background_level", c.background_level);
  s.get("background_contrast", c.background_contrast);
  s.get("background_cell", c.background_cell);
  s.get("pixel_noise", c.pixel_noise);
  s.get("margin", c.margin);
  s.get("escape_factor", c.escape_factor);
  s.get("gsd", c.gsd);
  s.get("fps", c.fps);
  s.get("n_frames", c.n_frames);
  std::int64_t seed = static_cast<std::int64_t>(c.seed);
  s.get("seed", seed);
  c.seed = static_cast<std::uint64_t>(seed);
  s.get("train_sequences", r.synth_train_sequences);
  s.get("test_sequences", r.synth_test_sequences);
  s.finish();
  c.validate();
  if (r.synth_train_sequences < 0 || r.synth_test_sequences < 0) throw ConfigError("synth: sequence counts must be >= 0");
}

toml::array int_array(const std::vector<int>& v) {
  toml::array a;
  for (int x : v) a.push_back(x);
  return a;
}

template <std::size_t N>
toml::array real_array(const std::array<double, N>& v) {
  toml::array a;
  for (double x : v) a.push_back(x);
  return a;
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& source) {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << source << ":" << e.source().begin.line << ": " << e.description();
    throw ConfigError(os.str());
  }
  for (const auto& [k, v] : root) {
    const std::string key(k.str());
    if (key != "network" && key != "train" && key != "tracker" && key != "synth") {
      throw ConfigError(source + ": unknown section [" + key + "]");
    }
  }
  RunConfig r;
  read_network(Section(table_or_null(root, "network", source), "network", source), r.network);
  read_train(Section(table_or_null(root, "train", source), "train", source), r.train);
  read_tracker(Section(table_or_null(root, "tracker", source), "tracker", source), r.tracker);
  read_synth(Section(table_or_null(root, "synth", source), "synth", source), r);
  return r;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read config " + path.string());
  std::ostringstream os;
  os << is.rdbuf();
  return parse_config(os.str(), path.string());
}

std::string to_toml(const RunConfig& c) {
  const auto& n = c.network;
  std::vector<int> conv;
  for (const auto& s : n.snn_channel_plan) conv.push_back(s.out_channels);
  toml::table network{{"preset", n.reduced_scale ? "reduced" : "production"},
                      {"crop_size", n.crop_size},
                      {"conv_channels", int_array(conv)},
                      {"history_len", n.history_len},
                      {"graph_neighbors", n.graph_neighbors},
                      {"graph_radius_m", n.graph_radius_m},
                      {"lstm_hidden", n.lstm_hidden},
                      {"lstm_layers", n.lstm_layers},
                      {"lstm_dropout", n.lstm_dropout},
                      {"motion_out_dim", n.motion_out_dim},
                      {"graph_channels", int_array(n.graph_channels)},
                      {"fc_plan", int_array(n.fc_plan)},
                      {"pixel_mean", real_array(n.pixel_mean)},
                      {"pixel_scale", n.pixel_scale}};
  const auto& t = c.train;
  toml::table mult;
  for (const auto& [k, v] : t.lr_multipliers) mult.insert(k, v);
  toml::table train{{"batch_tracks", t.batch_tracks},
                    {"lr", t.lr},
                    {"lr_decay", t.lr_decay},
                    {"decay_every", t.decay_every},
                    {"max_iters", t.max_iters},
                    {"seed", static_cast<std::int64_t>(t.seed)},
                    {"momentum", t.momentum},
                    {"weight_decay", t.weight_decay},
                    {"checkpoint_every", t.checkpoint_every},
                    {"ablation", std::string(to_string(t.ablation))},
                    {"lr_multipliers", mult}};
  const auto& k = c.tracker;
  toml::table tracker{{"context_factor", k.context_factor},
                      {"window_min_side", k.window_min_side},
                      {"person_extent_m", k.person_extent_m},
                      {"min_box_side", k.min_box_side},
                      {"gt_escape_check", k.gt_escape_check},
                      {"end_at_gt_death", k.end_at_gt_death},
                      {"ablation", std::string(to_string(k.ablation))}};
  const auto& s = c.synth;
  toml::table synth{{"name", s.name},
                    {"width", s.width},
                    {"height", s.height},
                    {"n_agents", s.n_agents},
                    {"motion", std::string(to_string(s.motion))},
                    {"speed_min", s.speed_min},
                    {"speed_max", s.speed_max},
                    {"group_noise", s.group_noise},
                    {"group_spread", s.group_spread},
                    {"dot_radius", s.dot_radius},
                    {"dot_color", real_array(s.dot_color)},
                    {"color_jitter", s.color_jitter},
                    {"background_level", s.background_level},
                    {"background_contrast", s.background_contrast},
                    {"background_cell", s.background_cell},
                    {"pixel_noise", s.pixel_noise},
                    {"margin", s.margin},
                    {"escape_factor", s.escape_factor},
                    {"gsd", s.gsd},
                    {"fps", s.fps},
                    {"n_frames", s.n_frames},
                    {"seed", static_cast<std::int64_t>(s.seed)},
                    {"train_sequences", c.synth_train_sequences},
                    {"test_sequences", c.synth_test_sequences}};
  toml::table root{{"network", network}, {"train", train}, {"tracker", tracker}, {"synth", synth}};
  std::ostringstream os;
  os << root << '\n';
  return os.str();
}

}  // namespace aerialmpt
