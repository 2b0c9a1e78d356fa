#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "aanim/audio.hpp"
#include "aanim/codec.hpp"
#include "aanim/sampler.hpp"

namespace aanim {

// OpenFace-style column names for the 23 animation attributes, in the frame
// layout order (17 AU intensities, then rotation and translation).
inline const std::vector<std::string>& anim_columns() {
  static const std::vector<std::string> cols = {
      "AU01_r", "AU02_r", "AU04_r", "AU05_r", "AU06_r", "AU07_r", "AU09_r", "AU10_r",
      "AU12_r", "AU14_r", "AU15_r", "AU17_r", "AU20_r", "AU23_r", "AU25_r", "AU26_r",
      "AU45_r", "pose_Rx", "pose_Ry", "pose_Rz", "pose_Tx", "pose_Ty", "pose_Tz"};
  return cols;
}

// Shortest decimal string that round-trips the double exactly.
inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  return out;
}

}  // namespace detail

inline void write_animation_csv(const std::string& path, const AnimSequence& seq) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_animation_csv: cannot open " + path);
  os << "frame";
  for (const std::string& c : anim_columns()) os << "," << c;
  os << "\n";
  for (std::size_t t = 0; t < seq.size(); ++t) {
    os << t;
    for (int a = 0; a < kAnimDims; ++a) os << "," << format_double(seq.frames[t][a]);
    os << "\n";
  }
}

struct LoadedAnim {
  AnimSequence seq;
  int dropped_rows = 0;  // rows removed because of non-finite values
};

// Reads an animation export. Columns are located by header name so extra
// columns (OpenFace writes many) are ignored; all 23 required columns must be
// present. Rows containing non-finite values are dropped and counted.
inline LoadedAnim load_animation_csv(const std::string& path, double fps = 25.0) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_animation_csv: cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("load_animation_csv: empty file " + path);
  const std::vector<std::string> header = detail::split_csv_line(line);
  std::vector<int> col_of(kAnimDims, -1);
  for (int a = 0; a < kAnimDims; ++a) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == anim_columns()[static_cast<std::size_t>(a)]) {
        col_of[static_cast<std::size_t>(a)] = static_cast<int>(c);
        break;
      }
    }
  }
  std::string missing;
  for (int a = 0; a < kAnimDims; ++a)
    if (col_of[static_cast<std::size_t>(a)] < 0)
      missing += (missing.empty() ? "" : ", ") + anim_columns()[static_cast<std::size_t>(a)];
  if (!missing.empty())
    throw std::runtime_error("load_animation_csv: missing columns: " + missing);

  LoadedAnim out;
  out.seq.fps = fps;
  while (std::getline(is, line)) {
    if (detail::trim(line).empty()) continue;
    const std::vector<std::string> cells = detail::split_csv_line(line);
    AnimVector v;
    bool ok = true;
    for (int a = 0; a < kAnimDims; ++a) {
      const int c = col_of[static_cast<std::size_t>(a)];
      if (c >= static_cast<int>(cells.size())) {
        ok = false;
        break;
      }
      try {
        v[a] = std::stod(cells[static_cast<std::size_t>(c)]);
      } catch (const std::exception&) {
        ok = false;
        break;
      }
      if (!std::isfinite(v[a])) ok = false;
    }
    if (ok)
      out.seq.frames.push_back(v);
    else
      ++out.dropped_rows;
  }
  if (out.seq.frames.empty())
    throw std::runtime_error("load_animation_csv: no valid rows in " + path);
  return out;
}

// Generated-sequence record: '#' header lines carrying the sampling setup,
// then one line per frame.
inline void write_generation_csv(const std::string& path, const GenerationResult& gen,
                                 const SamplerConfig& cfg, std::uint64_t model_hash) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_generation_csv: cannot open " + path);
  char hash[17];
  std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(model_hash));
  os << "# fps=" << format_double(gen.anim.fps) << " seed=" << cfg.seed << " k=" << cfg.k
     << " temperature=" << format_double(cfg.temperature) << " model_hash=" << hash << "\n";
  os << "frame";
  for (const std::string& c : anim_columns()) os << "," << c;
  os << "\n";
  for (std::size_t t = 0; t < gen.anim.size(); ++t) {
    os << t;
    for (int a = 0; a < kAnimDims; ++a) os << "," << format_double(gen.anim.frames[t][a]);
    os << "\n";
  }
}

// Line-delimited mel records for golden-file comparisons: "t v0 .. v19".
inline void write_mel_records(std::ostream& os, const Tensor& mel) {
  for (int t = 0; t < mel.rows(); ++t) {
    os << t;
    for (int b = 0; b < mel.cols(); ++b) os << " " << format_double(mel.at(t, b));
    os << "\n";
  }
}

}  // namespace aanim
