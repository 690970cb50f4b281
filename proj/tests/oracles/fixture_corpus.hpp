#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "aerialmpt/dataset_io.hpp"

namespace oracle {

inline const char* kind_name(aerialmpt::DatasetError::Kind k) {
  using K = aerialmpt::DatasetError::Kind;
  switch (k) {
    case K::MissingMeta: return "MissingMeta";
    case K::MissingField: return "MissingField";
    case K::BadValue: return "BadValue";
    case K::BadHeader: return "BadHeader";
    case K::MissingFrame: return "MissingFrame";
    case K::FrameSize: return "FrameSize";
    case K::FrameOutOfRange: return "FrameOutOfRange";
    case K::DuplicateId: return "DuplicateId";
    case K::OutOfBounds: return "OutOfBounds";
    case K::InvalidId: return "InvalidId";
    case K::IdReuse: return "IdReuse";
    case K::UnknownSequence: return "UnknownSequence";
  }
  return "?";
}

struct FixtureOutcome {
  std::string name;
  std::string expected;
  std::string got;  // error kind, "accepted" or "other: <what>"
  bool ok() const { return expected == got; }
};

/// Loads every fixture listed in EXPECTED.txt and records which error kind it raised.
inline std::vector<FixtureOutcome> run_malformed_corpus(const std::filesystem::path& dir) {
  std::vector<FixtureOutcome> out;
  std::ifstream in(dir / "EXPECTED.txt");
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    FixtureOutcome o;
    ss >> o.name >> o.expected;
    try {
      aerialmpt::load_sequence(dir / o.name);
      o.got = "accepted";
    } catch (const aerialmpt::DatasetError& e) {
      o.got = kind_name(e.kind());
    } catch (const std::exception& e) {
      o.got = std::string("other: ") + e.what();
    }
    out.push_back(o);
  }
  return out;
}

}  // namespace oracle
