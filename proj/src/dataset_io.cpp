#include "aerialmpt/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <toml.hpp>

namespace aerialmpt {

namespace fs = std::filesystem;
using Kind = DatasetError::Kind;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(trim(cur));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <typename T>
T parse_number(const std::string& s, const std::string& where) {
  T v{};
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || s.empty()) {
    throw DatasetError(Kind::BadValue, where + ": cannot parse '" + s + "'");
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(v)) throw DatasetError(Kind::BadValue, where + ": non-finite value '" + s + "'");
  }
  return v;
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open " + p.string());
  return in;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  return out;
}

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  std::string s = buf;
  if (s == "-0.0000") s = "0.0000";
  return s;
}

void check_header(std::istream& in, const std::string& expected, const fs::path& p) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != expected) {
    throw DatasetError(Kind::BadHeader, p.string() + ": expected header '" + expected + "'");
  }
}

}  // namespace

fs::path frame_path(const fs::path& dir, int index) {
  char name[32];
  std::snprintf(name, sizeof name, "%06d.png", index);
  return dir / kFramesDir / name;
}

SequenceMeta read_meta(const fs::path& path) {
  if (!fs::exists(path)) throw DatasetError(Kind::MissingMeta, "missing sequence sidecar " + path.string());
  auto in = open_in(path);
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw DatasetError(Kind::BadValue, path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    }
    kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  auto need = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw DatasetError(Kind::MissingField, path.string() + ": missing field '" + key + "'");
    return it->second;
  };
  SequenceMeta m;
  m.name = need("name");
  m.frame_count = parse_number<int>(need("frame_count"), path.string() + " field 'frame_count'");
  m.gsd_m_per_px = parse_number<double>(need("gsd"), path.string() + " field 'gsd'");
  m.fps = parse_number<double>(need("fps"), path.string() + " field 'fps'");
  if (kv.count("width")) m.width = parse_number<int>(kv["width"], path.string() + " field 'width'");
  if (kv.count("height")) m.height = parse_number<int>(kv["height"], path.string() + " field 'height'");
  try {
    m.validate();
  } catch (const ConfigError& e) {
    throw DatasetError(Kind::BadValue, path.string() + ": " + e.what());
  }
  return m;
}

void write_meta(const fs::path& path, const SequenceMeta& meta) {
  auto out = open_out(path);
  char buf[64];
  out << "name = " << meta.name << "\n";
  out << "frame_count = " << meta.frame_count << "\n";
  std::snprintf(buf, sizeof buf, "%.6g", meta.gsd_m_per_px);
  out << "gsd = " << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.6g", meta.fps);
  out << "fps = " << buf << "\n";
  if (meta.width > 0) out << "width = " << meta.width << "\n";
  if (meta.height > 0) out << "height = " << meta.height << "\n";
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<PointAnnotation> read_annotations(const fs::path& path) {
  auto in = open_in(path);
  check_header(in, "frame,id,x,y", path);
  std::vector<PointAnnotation> out;
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cols = split_csv(line);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (cols.size() != 4) throw DatasetError(Kind::BadValue, where + ": expected 4 columns");
    PointAnnotation a;
    a.frame_index = parse_number<int>(cols[0], where + " frame");
    a.track_id = parse_number<int>(cols[1], where + " id");
    a.x = parse_number<double>(cols[2], where + " x");
    a.y = parse_number<double>(cols[3], where + " y");
    out.push_back(a);
  }
  return out;
}

void write_annotations(const fs::path& path, std::span<const PointAnnotation> points) {
  auto out = open_out(path);
  out << "frame,id,x,y\n";
  for (const auto& p : points) {
    out << p.frame_index << ',' << p.track_id << ',' << fixed4(p.x) << ',' << fixed4(p.y) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

bool is_sequence_dir(const fs::path& dir) { return fs::is_regular_file(dir / kMetaFile); }

Sequence load_sequence(const fs::path& dir, const LoadOptions& opts) {
  SequenceMeta meta = read_meta(dir / kMetaFile);

  for (int i = 0; i < meta.frame_count; ++i) {
    if (!fs::exists(frame_path(dir, i))) {
      throw DatasetError(Kind::MissingFrame, dir.string() + ": missing frame image " + frame_path(dir, i).filename().string());
    }
  }

  std::vector<Frame> frames(static_cast<std::size_t>(meta.frame_count));
  int width = meta.width;
  int height = meta.height;
  for (int i = 0; i < meta.frame_count; ++i) {
    frames[i].index = i;
    if (opts.load_images) {
      frames[i].image = read_image(frame_path(dir, i));
      if (width == 0) {
        width = frames[i].image.width;
        height = frames[i].image.height;
      }
      if (frames[i].image.width != width || frames[i].image.height != height) {
        throw DatasetError(Kind::FrameSize, dir.string() + ": frame " + std::to_string(i) + " has inconsistent size");
      }
    }
  }
  if (width == 0) {
    const auto dims = png_dimensions(frame_path(dir, 0));
    width = dims[0];
    height = dims[1];
  }
  meta.width = width;
  meta.height = height;

  const auto points = read_annotations(dir / kAnnotationFile);
  std::set<std::pair<int, int>> seen;
  std::map<int, std::vector<int>> frames_of_id;
  for (const auto& p : points) {
    const std::string tag = "frame " + std::to_string(p.frame_index) + " id " + std::to_string(p.track_id);
    if (p.track_id <= 0) throw DatasetError(Kind::InvalidId, dir.string() + ": non-positive track id at " + tag);
    if (p.frame_index < 0 || p.frame_index >= meta.frame_count) {
      throw DatasetError(Kind::FrameOutOfRange, dir.string() + ": annotation references " + tag + " but sequence has " +
                                                    std::to_string(meta.frame_count) + " frames");
    }
    if (!seen.insert({p.frame_index, p.track_id}).second) {
      throw DatasetError(Kind::DuplicateId, dir.string() + ": duplicate annotation at " + tag);
    }
    if (!(p.x >= 0.0 && p.x < width && p.y >= 0.0 && p.y < height)) {
      throw DatasetError(Kind::OutOfBounds, dir.string() + ": annotation out of image bounds at " + tag);
    }
    frames_of_id[p.track_id].push_back(p.frame_index);
    frames[p.frame_index].annotations.push_back(p);
  }
  for (auto& [id, fr] : frames_of_id) {
    std::sort(fr.begin(), fr.end());
    for (std::size_t i = 1; i < fr.size(); ++i) {
      if (fr[i] - fr[i - 1] - 1 > opts.max_id_gap) {
        throw DatasetError(Kind::IdReuse, dir.string() + ": id " + std::to_string(id) + " reappears at frame " +
                                              std::to_string(fr[i]) + " after a gap of " +
                                              std::to_string(fr[i] - fr[i - 1] - 1) + " frames");
      }
    }
  }
  return Sequence(std::move(meta), std::move(frames), dir);
}

std::vector<Sequence> load_dataset(const fs::path& root, const LoadOptions& opts) {
  if (is_sequence_dir(root)) return {load_sequence(root, opts)};
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory() && is_sequence_dir(e.path())) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  std::vector<Sequence> out;
  out.reserve(dirs.size());
  for (const auto& d : dirs) out.push_back(load_sequence(d, opts));
  return out;
}

double round_to_file_precision(double v) {
  const std::string s = fixed4(v);
  return std::strtod(s.c_str(), nullptr);
}

void write_hypotheses(const fs::path& path, std::span<const Hypothesis> hyps) {
  auto out = open_out(path);
  out << "frame,id,x1,y1,x2,y2\n";
  for (const auto& h : hyps) {
    out << h.frame << ',' << h.track_id << ',' << fixed4(h.box.x1) << ',' << fixed4(h.box.y1) << ','
        << fixed4(h.box.x2) << ',' << fixed4(h.box.y2) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<Hypothesis> read_hypotheses(const fs::path& path) {
  auto in = open_in(path);
  check_header(in, "frame,id,x1,y1,x2,y2", path);
  std::vector<Hypothesis> out;
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cols = split_csv(line);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (cols.size() != 6) throw DatasetError(Kind::BadValue, where + ": expected 6 columns");
    Hypothesis h;
    h.frame = parse_number<int>(cols[0], where + " frame");
    h.track_id = parse_number<int>(cols[1], where + " id");
    h.box = {parse_number<double>(cols[2], where + " x1"), parse_number<double>(cols[3], where + " y1"),
             parse_number<double>(cols[4], where + " x2"), parse_number<double>(cols[5], where + " y2")};
    if (!h.box.valid()) throw DatasetError(Kind::BadValue, where + ": box corners out of order");
    out.push_back(h);
  }
  return out;
}

SplitManifest read_manifest(const fs::path& path) {
  toml::table tbl;
  try {
    tbl = toml::parse_file(path.string());
  } catch (const toml::parse_error& e) {
    throw DatasetError(Kind::BadValue, path.string() + ": " + std::string(e.description()));
  }
  auto names = [&](const char* key) {
    std::vector<std::string> out;
    const auto* arr = tbl[key].as_array();
    if (!arr) throw DatasetError(Kind::MissingField, path.string() + ": missing array '" + key + "'");
    for (const auto& v : *arr) {
      const auto s = v.value<std::string>();
      if (!s) throw DatasetError(Kind::BadValue, path.string() + ": '" + key + "' must hold strings");
      out.push_back(*s);
    }
    return out;
  };
  return {names("train"), names("test")};
}

void write_manifest(const fs::path& path, const SplitManifest& m) {
  auto arr = [](const std::vector<std::string>& v) {
    toml::array a;
    for (const auto& s : v) a.push_back(s);
    return a;
  };
  toml::table tbl{{"train", arr(m.train)}, {"test", arr(m.test)}};
  auto out = open_out(path);
  out << tbl << "\n";
}

SplitResult split(std::span<const std::string> names, const SplitManifest& manifest) {
  const std::set<std::string> known(names.begin(), names.end());
  SplitResult r;
  std::set<std::string> assigned;
  auto take = [&](const std::vector<std::string>& src, std::vector<std::string>& dst) {
    for (const auto& n : src) {
      if (!known.count(n)) throw DatasetError(Kind::UnknownSequence, "split manifest names unknown sequence '" + n + "'");
      if (!assigned.insert(n).second) throw DatasetError(Kind::BadValue, "split manifest lists '" + n + "' twice");
      dst.push_back(n);
    }
  };
  take(manifest.train, r.train);
  take(manifest.test, r.test);
  if (r.test.empty()) r.warnings.push_back("split manifest has an empty test list");
  for (const auto& n : names) {
    if (!assigned.count(n)) r.warnings.push_back("sequence '" + n + "' not listed in split manifest; ignored");
  }
  return r;
}

}  // namespace aerialmpt
