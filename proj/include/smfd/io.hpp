#pragma once

// Raster files (CSV and 16-bit binary PGM), locale-independent number
// formatting and the flat key=value configuration format.

#include "smfd/baselines.hpp"
#include "smfd/model.hpp"
#include "smfd/raster.hpp"
#include "smfd/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace smfd {

/// Unreadable or unwritable file.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration value or unknown key; key() names the offender.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::invalid_argument("config key '" + key + "': " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

// ---------------------------------------------------------------------------
// Numbers

/// Shortest round-trip representation; "inf" / "-inf" / "nan" otherwise.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, end);
}

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s == "inf") return out = std::numeric_limits<double>::infinity(), true;
  if (s == "-inf") return out = -std::numeric_limits<double>::infinity(), true;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size() && !s.empty();
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
  s = trim(s);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size() && !s.empty();
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Files

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

inline std::string raster_to_csv(const Raster& r) {
  std::string s;
  for (std::size_t i = 0; i < r.rows(); ++i) {
    for (std::size_t j = 0; j < r.cols(); ++j) {
      if (j) s += ',';
      s += format_double(r(i, j));
    }
    s += '\n';
  }
  return s;
}

inline std::string mask_to_csv(const SpotMask& m) {
  std::string s;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) s += ',';
      s += m(i, j) ? '1' : '0';
    }
    s += '\n';
  }
  return s;
}

/// One lattice row per line; blank lines and '#' lines are ignored.
inline Raster raster_from_csv(std::string_view text, const std::string& source = "<csv>") {
  std::vector<double> data;
  std::size_t rows = 0, cols = 0;
  for (auto line : split(text, '\n')) {
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split(line, ',');
    if (rows == 0) cols = fields.size();
    if (fields.size() != cols)
      throw IoError(source + ": row " + std::to_string(rows + 1) + " has " +
                    std::to_string(fields.size()) + " fields, expected " + std::to_string(cols));
    for (auto f : fields) {
      double v;
      if (!parse_double(f, v) || !std::isfinite(v))
        throw IoError(source + ": bad number '" + std::string(f) + "' in row " + std::to_string(rows + 1));
      data.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw IoError(source + ": no data rows");
  return Raster(rows, cols, std::move(data));
}

/// Binary PGM, 16-bit big-endian, maxval 65535. Intensities are mapped
/// linearly from [min, max] of the raster; a constant raster maps to 0.
inline std::string raster_to_pgm(const Raster& r) {
  std::string s = "P5\n" + std::to_string(r.cols()) + " " + std::to_string(r.rows()) + "\n65535\n";
  const double lo = r.min(), hi = r.max();
  for (double v : r.values()) {
    const double t = hi > lo ? (v - lo) / (hi - lo) : 0.0;
    const auto q = static_cast<std::uint16_t>(std::lround(std::clamp(t, 0.0, 1.0) * 65535.0));
    s += static_cast<char>(q >> 8);
    s += static_cast<char>(q & 0xff);
  }
  return s;
}

inline std::string mask_to_pgm(const SpotMask& m) {
  std::vector<double> v(m.values().begin(), m.values().end());
  std::string s = "P5\n" + std::to_string(m.cols()) + " " + std::to_string(m.rows()) + "\n65535\n";
  for (double x : v) {
    const std::uint16_t q = x > 0 ? 65535 : 0;
    s += static_cast<char>(q >> 8);
    s += static_cast<char>(q & 0xff);
  }
  return s;
}

/// Reads binary (P5) or plain (P2) graymaps with maxval up to 65535. Values are
/// returned as raw gray levels.
inline Raster raster_from_pgm(std::string_view bytes, const std::string& source = "<pgm>") {
  std::size_t pos = 0;
  auto next_token = [&]() -> std::string {
    for (;;) {
      while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return std::string(bytes.substr(start, pos - start));
  };
  const std::string magic = next_token();
  if (magic != "P5" && magic != "P2") throw IoError(source + ": not a PGM file");
  std::size_t w = 0, h = 0;
  unsigned maxval = 0;
  if (!parse_int(next_token(), w) || !parse_int(next_token(), h) || !parse_int(next_token(), maxval) ||
      w == 0 || h == 0 || maxval == 0 || maxval > 65535)
    throw IoError(source + ": bad PGM header");
  std::vector<double> data;
  data.reserve(w * h);
  if (magic == "P2") {
    for (std::size_t k = 0; k < w * h; ++k) {
      unsigned v = 0;
      if (!parse_int(next_token(), v)) throw IoError(source + ": truncated PGM data");
      data.push_back(v);
    }
  } else {
    ++pos;  // single whitespace after maxval
    const std::size_t bpp = maxval > 255 ? 2 : 1;
    if (bytes.size() < pos + w * h * bpp) throw IoError(source + ": truncated PGM data");
    for (std::size_t k = 0; k < w * h; ++k) {
      const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos + k * bpp);
      data.push_back(bpp == 2 ? (p[0] << 8) | p[1] : p[0]);
    }
  }
  return Raster(h, w, std::move(data));
}

inline bool has_extension(const std::filesystem::path& p, std::string_view ext) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e == ext;
}

inline Raster read_raster(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (has_extension(path, ".pgm")) return raster_from_pgm(bytes, path.string());
  return raster_from_csv(bytes, path.string());
}

inline void write_raster(const std::filesystem::path& path, const Raster& r) {
  write_file(path, has_extension(path, ".pgm") ? raster_to_pgm(r) : raster_to_csv(r));
}

inline void write_mask(const std::filesystem::path& path, const SpotMask& m) {
  write_file(path, has_extension(path, ".pgm") ? mask_to_pgm(m) : mask_to_csv(m));
}

// ---------------------------------------------------------------------------
// key=value configuration

/// Ordered key=value pairs. '#' starts a comment; blank lines are ignored.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text) {
    KeyValueConfig cfg;
    std::size_t lineno = 0;
    for (auto line : split(text, '\n')) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos)
        throw ConfigError(std::string(line), "line " + std::to_string(lineno) + " is not key=value");
      cfg.set(std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))));
    }
    return cfg;
  }

  static KeyValueConfig load(const std::filesystem::path& path) { return parse(read_file(path)); }

  void set(const std::string& key, const std::string& value) {
    if (key.empty()) throw ConfigError(key, "empty key");
    values_[key] = value;
  }

  /// Parses "key=value".
  void set_assignment(std::string_view kv) {
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos) throw ConfigError(std::string(kv), "expected key=value");
    set(std::string(trim(kv.substr(0, eq))), std::string(trim(kv.substr(eq + 1))));
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

namespace detail {

inline double config_double(const std::string& key, const std::string& v) {
  double out;
  if (!parse_double(v, out) || !std::isfinite(out)) throw ConfigError(key, "'" + v + "' is not a finite number");
  return out;
}

template <typename Int>
Int config_int(const std::string& key, const std::string& v) {
  Int out;
  if (!parse_int(v, out)) throw ConfigError(key, "'" + v + "' is not an integer");
  return out;
}

}  // namespace detail

/// Applies the recognised keys of `cfg` to `hp`. Returns false for a key that
/// is not a hyper-parameter.
inline bool apply_key(HyperParams& hp, const std::string& key, const std::string& v) {
  using detail::config_double;
  using detail::config_int;
  if (key == "alpha_l") hp.alpha_l = config_double(key, v);
  else if (key == "beta_l") hp.beta_l = config_double(key, v);
  else if (key == "alpha_f") hp.alpha_f = config_double(key, v);
  else if (key == "beta_f") hp.beta_f = config_double(key, v);
  else if (key == "gamma_precision") hp.gamma_precision = config_double(key, v);
  else if (key == "lambda") hp.lambda = config_double(key, v);
  else if (key == "h") hp.h = config_double(key, v);
  else if (key == "T") hp.iterations = config_int<int>(key, v);
  else if (key == "window") hp.window = config_int<int>(key, v);
  else if (key == "burn_in") hp.burn_in = config_int<int>(key, v);
  else if (key == "seed") hp.seed = config_int<std::uint64_t>(key, v);
  else return false;
  return true;
}

inline bool apply_key(FilterConfig& fc, const std::string& key, const std::string& v) {
  using detail::config_double;
  using detail::config_int;
  if (key == "gaussian_sigma") fc.gaussian_sigma = config_double(key, v);
  else if (key == "gaussian_size") fc.gaussian_size = config_int<int>(key, v);
  else if (key == "average_size") fc.average_size = config_int<int>(key, v);
  else if (key == "wiener_size") fc.wiener_size = config_int<int>(key, v);
  else if (key == "nlm_patch") fc.nlm_patch = config_int<int>(key, v);
  else if (key == "nlm_search") fc.nlm_search = config_int<int>(key, v);
  else if (key == "nlm_h") fc.nlm_h = config_double(key, v);
  else return false;
  return true;
}

inline bool apply_key(SynthConfig& sc, const std::string& key, const std::string& v) {
  using detail::config_double;
  using detail::config_int;
  if (key == "n1") sc.n1 = config_int<std::size_t>(key, v);
  else if (key == "n2") sc.n2 = config_int<std::size_t>(key, v);
  else if (key == "n_images") sc.n_images = config_int<std::size_t>(key, v);
  else if (key == "spots_min") sc.spots_min = config_int<int>(key, v);
  else if (key == "spots_max") sc.spots_max = config_int<int>(key, v);
  else if (key == "amplitude_min") sc.amplitude_min = config_double(key, v);
  else if (key == "amplitude_max") sc.amplitude_max = config_double(key, v);
  else if (key == "psf_sigma") sc.psf_sigma = config_double(key, v);
  else if (key == "snr_db_min") sc.snr_db_min = config_double(key, v);
  else if (key == "snr_db_max") sc.snr_db_max = config_double(key, v);
  else if (key == "seed") sc.seed = config_int<std::uint64_t>(key, v);
  else return false;
  return true;
}

/// Applies every key of `cfg` to the first target that recognises it; an
/// unrecognised key is a ConfigError.
template <typename... Targets>
void apply_config(const KeyValueConfig& cfg, Targets&... targets) {
  for (const auto& [key, value] : cfg.values()) {
    const bool used = (apply_key(targets, key, value) || ...);
    if (!used) throw ConfigError(key, "unknown key");
  }
}

using ConfigEcho = std::vector<std::pair<std::string, std::string>>;

inline ConfigEcho echo(const HyperParams& hp) {
  return {{"alpha_l", format_double(hp.alpha_l)},
          {"beta_l", format_double(hp.beta_l)},
          {"alpha_f", format_double(hp.alpha_f)},
          {"beta_f", format_double(hp.beta_f)},
          {"gamma_precision", format_double(hp.gamma_precision)},
          {"lambda", format_double(hp.lambda)},
          {"h", format_double(hp.h)},
          {"T", std::to_string(hp.iterations)},
          {"window", std::to_string(hp.window)},
          {"burn_in", std::to_string(hp.effective_burn_in())},
          {"seed", std::to_string(hp.seed)}};
}

inline ConfigEcho echo(const FilterConfig& fc) {
  return {{"gaussian_sigma", format_double(fc.gaussian_sigma)},
          {"gaussian_size", std::to_string(fc.gaussian_size)},
          {"average_size", std::to_string(fc.average_size)},
          {"wiener_size", std::to_string(fc.wiener_size)},
          {"nlm_patch", std::to_string(fc.nlm_patch)},
          {"nlm_search", std::to_string(fc.nlm_search)},
          {"nlm_h", format_double(fc.nlm_h)}};
}

inline ConfigEcho echo(const SynthConfig& sc) {
  return {{"n1", std::to_string(sc.n1)},
          {"n2", std::to_string(sc.n2)},
          {"n_images", std::to_string(sc.n_images)},
          {"spots_min", std::to_string(sc.spots_min)},
          {"spots_max", std::to_string(sc.spots_max)},
          {"amplitude_min", format_double(sc.amplitude_min)},
          {"amplitude_max", format_double(sc.amplitude_max)},
          {"psf_sigma", format_double(sc.psf_sigma)},
          {"snr_db_min", format_double(sc.snr_db_min)},
          {"snr_db_max", format_double(sc.snr_db_max)},
          {"seed", std::to_string(sc.seed)},
          {"snr_definition", "10*log10(var(signal)/var(noise))"}};
}

/// "# [section] key=value" comment lines.
inline std::string echo_lines(std::string_view section, const ConfigEcho& e) {
  std::string s;
  for (const auto& [k, v] : e) s += "# " + std::string(section) + "." + k + "=" + v + "\n";
  return s;
}

}  // namespace smfd
