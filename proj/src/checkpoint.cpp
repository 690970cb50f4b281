#include "aerialmpt/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "aerialmpt/error.hpp"

namespace aerialmpt {

using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

json to_json(const NetworkConfig& c) {
  json plan = json::array();
  for (const auto& s : c.snn_channel_plan) {
    plan.push_back({{"out_channels", s.out_channels}, {"kernel", s.kernel}, {"stride", s.stride},
                    {"pad", s.pad}, {"lrn", s.lrn}, {"pool", s.pool}});
  }
  return {{"crop_size", c.crop_size},
          {"snn_channel_plan", plan},
          {"pool_kernel", c.pool_kernel},
          {"pool_stride", c.pool_stride},
          {"lrn", {{"size", c.lrn.size}, {"alpha", c.lrn.alpha}, {"beta", c.lrn.beta}, {"k", c.lrn.k}}},
          {"lstm_hidden", c.lstm_hidden},
          {"lstm_layers", c.lstm_layers},
          {"lstm_dropout", c.lstm_dropout},
          {"motion_out_dim", c.motion_out_dim},
          {"graph_channels", c.graph_channels},
          {"graph_neighbors", c.graph_neighbors},
          {"graph_radius_m", c.graph_radius_m},
          {"history_len", c.history_len},
          {"fc_plan", c.fc_plan},
          {"pixel_mean", c.pixel_mean},
          {"pixel_scale", c.pixel_scale},
          {"reduced_scale", c.reduced_scale}};
}

NetworkConfig from_json(const json& j) {
  NetworkConfig c;
  c.crop_size = j.at("crop_size").get<int>();
  c.snn_channel_plan.clear();
  for (const auto& s : j.at("snn_channel_plan")) {
    c.snn_channel_plan.push_back({s.at("out_channels").get<int>(), s.at("kernel").get<int>(),
                                  s.at("stride").get<int>(), s.at("pad").get<int>(), s.at("lrn").get<bool>(),
                                  s.at("pool").get<bool>()});
  }
  c.pool_kernel = j.at("pool_kernel").get<int>();
  c.pool_stride = j.at("pool_stride").get<int>();
  const auto& l = j.at("lrn");
  c.lrn = {l.at("size").get<int>(), l.at("alpha").get<double>(), l.at("beta").get<double>(), l.at("k").get<double>()};
  c.lstm_hidden = j.at("lstm_hidden").get<int>();
  c.lstm_layers = j.at("lstm_layers").get<int>();
  c.lstm_dropout = j.at("lstm_dropout").get<double>();
  c.motion_out_dim = j.at("motion_out_dim").get<int>();
  c.graph_channels = j.at("graph_channels").get<std::vector<int>>();
  c.graph_neighbors = j.at("graph_neighbors").get<int>();
  c.graph_radius_m = j.at("graph_radius_m").get<double>();
  c.history_len = j.at("history_len").get<int>();
  c.fc_plan = j.at("fc_plan").get<std::vector<int>>();
  c.pixel_mean = j.at("pixel_mean").get<std::array<double, 3>>();
  c.pixel_scale = j.at("pixel_scale").get<double>();
  c.reduced_scale = j.at("reduced_scale").get<bool>();
  c.validate();
  return c;
}

void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }

class Reader {
 public:
  Reader(std::istream& is, const std::filesystem::path& p) : is_(is), path_(p) {}

  void bytes(void* dst, std::size_t n) {
    is_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) throw FormatError(path_.string() + ": truncated checkpoint");
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, 4);
    return v;
  }
  std::string str(std::uint32_t n) {
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }

 private:
  std::istream& is_;
  const std::filesystem::path& path_;
};

// Sanity bound on any single length field; guards against allocating on garbage.
constexpr std::uint32_t kMaxField = 1u << 30;

}  // namespace

const nn::Param* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

std::string network_config_to_json(const NetworkConfig& cfg) { return to_json(cfg).dump(); }

NetworkConfig network_config_from_json(const std::string& text) {
  try {
    return from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw FormatError(std::string("network config: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  json state;
  try {
    state = json::parse(ckpt.state_json);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("checkpoint state is not valid JSON: ") + e.what());
  }
  const std::string header = json{{"network", to_json(ckpt.network)}, {"state", state}}.dump();
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  // Write to a sibling file and rename so an interrupted save never leaves a torn checkpoint.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + tmp.string());
    os.write(kCheckpointMagic, 8);
    put_u32(os, kCheckpointVersion);
    put_u32(os, static_cast<std::uint32_t>(header.size()));
    os.write(header.data(), static_cast<std::streamsize>(header.size()));
    put_u32(os, static_cast<std::uint32_t>(ckpt.tensors.size()));
    std::vector<float> buf;
    for (const auto& t : ckpt.tensors) {
      put_u32(os, static_cast<std::uint32_t>(t.name.size()));
      os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
      put_u32(os, static_cast<std::uint32_t>(t.shape.size()));
      std::size_t n = 1;
      for (int d : t.shape) {
        put_u32(os, static_cast<std::uint32_t>(d));
        n *= static_cast<std::size_t>(d);
      }
      if (n != t.value.size()) throw ConfigError("checkpoint tensor " + t.name + ": shape does not match data");
      buf.assign(t.value.begin(), t.value.end());
      os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }
    if (!os) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place: " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  Reader r(is, path);
  char magic[8];
  r.bytes(magic, 8);
  if (std::memcmp(magic, kCheckpointMagic, 8) != 0) throw FormatError(path.string() + ": not a checkpoint (bad magic)");
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = r.u32();
  if (header_len > kMaxField) throw FormatError(path.string() + ": header too large");
  Checkpoint ck;
  try {
    const auto header = json::parse(r.str(header_len));
    ck.network = from_json(header.at("network"));
    ck.state_json = header.contains("state") ? header.at("state").dump() : "{}";
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": malformed header: " + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(path.string() + ": invalid network config: " + e.what());
  }
  const auto count = r.u32();
  if (count > kMaxField) throw FormatError(path.string() + ": tensor count too large");
  std::vector<float> buf;
  for (std::uint32_t i = 0; i < count; ++i) {
    nn::Param p;
    const auto name_len = r.u32();
    if (name_len > 4096) throw FormatError(path.string() + ": tensor name too long");
    p.name = r.str(name_len);
    const auto ndim = r.u32();
    if (ndim > 8) throw FormatError(path.string() + ": tensor " + p.name + " has too many dimensions");
    std::size_t n = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      const auto dim = r.u32();
      if (dim > kMaxField) throw FormatError(path.string() + ": tensor " + p.name + " dimension too large");
      p.shape.push_back(static_cast<int>(dim));
      n *= dim;
      if (n > kMaxField) throw FormatError(path.string() + ": tensor " + p.name + " too large");
    }
    buf.resize(n);
    r.bytes(buf.data(), n * sizeof(float));
    p.value.assign(buf.begin(), buf.end());
    ck.tensors.push_back(std::move(p));
  }
  return ck;
}

Checkpoint make_checkpoint(const Network& net, const std::string& state_json) {
  Checkpoint ck;
  ck.network = net.config();
  ck.state_json = state_json;
  ck.tensors = net.params().params();
  return ck;
}

void load_weights(Network& net, const Checkpoint& ckpt) {
  for (auto& p : net.params().params()) {
    const auto* t = ckpt.find(p.name);
    if (!t) throw FormatError("checkpoint is missing parameter " + p.name);
    if (t->shape != p.shape) throw FormatError("checkpoint parameter " + p.name + " has the wrong shape");
    p.value = t->value;
  }
}

Network network_from_checkpoint(const Checkpoint& ckpt) {
  Network net(ckpt.network, 0);
  load_weights(net, ckpt);
  return net;
}

void save_network(const std::filesystem::path& path, const Network& net) { save_checkpoint(path, make_checkpoint(net)); }

Network load_network(const std::filesystem::path& path) { return network_from_checkpoint(load_checkpoint(path)); }

}  // namespace aerialmpt
