#pragma once

// On-disk dataset layout:
//   <root>/list.txt                 sequence ids, one per line (optional)
//   <root>/<id>/groundtruth.txt     VOT annotations
//   <root>/<id>/00000001.ppm ...    frames (binary PPM), 1-based

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cltrack/synth.hpp"
#include "cltrack/vot_io.hpp"

namespace cltrack {

namespace fs = std::filesystem;

inline std::string frame_filename(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%08zu.ppm", index + 1);
  return buf;
}

inline std::string read_text(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw ConfigError("cannot read " + p.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + p.string());
  os << text;
}

inline void save_sequence(const fs::path& dir, const Sequence& seq) {
  fs::create_directories(dir);
  write_text(dir / "groundtruth.txt", serialize_groundtruth(seq.groundtruth));
  for (std::size_t i = 0; i < seq.frames.size(); ++i) write_ppm((dir / frame_filename(i)).string(), seq.frames[i]);
}

inline Sequence load_sequence(const fs::path& dir, bool with_frames = true) {
  Sequence seq;
  seq.id = dir.filename().string();
  const auto gt = dir / "groundtruth.txt";
  if (!fs::exists(gt)) throw MissingAnnotation("sequence '" + seq.id + "' has no groundtruth.txt");
  seq.groundtruth = parse_vot_groundtruth(read_text(gt));
  if (with_frames) {
    for (std::size_t i = 0;; ++i) {
      const auto p = dir / frame_filename(i);
      if (!fs::exists(p)) break;
      seq.frames.push_back(read_ppm(p.string()));
    }
    if (seq.frames.size() > seq.groundtruth.size())
      throw MissingAnnotation("sequence '" + seq.id + "': " + std::to_string(seq.frames.size()) + " frames but " +
                              std::to_string(seq.groundtruth.size()) + " annotations");
    if (seq.frames.size() < seq.groundtruth.size())
      throw ConfigError("sequence '" + seq.id + "': missing frame " + frame_filename(seq.frames.size()));
  }
  if (seq.groundtruth.empty()) throw EmptySequence("sequence '" + seq.id + "' is empty");
  return seq;
}

inline std::vector<std::string> list_sequences(const fs::path& root) {
  if (!fs::is_directory(root)) throw ConfigError("dataset directory not found: " + root.string());
  std::vector<std::string> ids;
  const auto list = root / "list.txt";
  if (fs::exists(list)) {
    std::istringstream in(read_text(list));
    std::string line;
    while (std::getline(in, line)) {
      const auto t = detail::trim(line);
      if (!t.empty()) ids.emplace_back(t);
    }
  } else {
    for (const auto& e : fs::directory_iterator(root))
      if (e.is_directory()) ids.push_back(e.path().filename().string());
    std::sort(ids.begin(), ids.end());
  }
  return ids;
}

inline std::vector<Sequence> load_dataset(const fs::path& root, bool with_frames = true) {
  std::vector<Sequence> out;
  for (const auto& id : list_sequences(root)) {
    if (!fs::is_directory(root / id)) throw DatasetMismatch("sequence '" + id + "' listed but missing");
    out.push_back(load_sequence(root / id, with_frames));
  }
  return out;
}

inline void save_dataset(const fs::path& root, const std::vector<Sequence>& seqs) {
  fs::create_directories(root);
  std::string list;
  for (const auto& s : seqs) {
    save_sequence(root / s.id, s);
    list += s.id + "\n";
  }
  write_text(root / "list.txt", list);
}

}  // namespace cltrack
