#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dotrecon/errors.hpp"
#include "dotrecon/field_io.hpp"
#include "dotrecon/specfun.hpp"

namespace dotrecon {

struct TraceSample {
  Vec2 position;  // on the sampling boundary, mm
  double intensity = 0.0;
};

struct SourceTrace {
  int source_id = 0;
  SourcePoint source;
  std::vector<TraceSample> samples;  // boundary loop order
};

/// Boundary intensity traces, one per source, plus synthesis metadata.
struct MeasurementSet {
  std::vector<SourceTrace> traces;  // ascending source_id
  double k2 = 0.0;
  double noise = 0.0;
  std::uint64_t seed = 0;
  double amplitude = 1.0;
  bool smoothed = false;
  int clipped_samples = 0;

  const SourceTrace* find_trace(int source_id) const {
    for (const auto& t : traces)
      if (t.source_id == source_id) return &t;
    return nullptr;
  }

  /// Trace whose source sits at distance s (1e-9 mm tolerance), or null.
  const SourceTrace* find_trace_by_distance(double s) const {
    for (const auto& t : traces)
      if (std::abs(t.source.s - s) <= 1e-9) return &t;
    return nullptr;
  }

  void validate() const {
    int last_id = 0;
    for (const auto& t : traces) {
      if (t.source_id <= last_id)
        throw ValidationError("MeasurementSet: source ids must be strictly increasing");
      last_id = t.source_id;
      t.source.validate();
      if (t.samples.empty()) throw ValidationError("MeasurementSet: empty trace");
      for (const auto& s : t.samples)
        if (!(s.intensity > 0.0) || !std::isfinite(s.intensity))
          throw ValidationError("MeasurementSet: intensities must be positive and finite");
    }
  }

  /// Multiplies every intensity (and the recorded amplitudes) by c.
  void scale(double c) {
    if (!(c > 0.0)) throw ValidationError("MeasurementSet::scale: factor must be positive");
    for (auto& t : traces) {
      for (auto& s : t.samples) s.intensity *= c;
      t.source.amplitude *= c;
    }
    amplitude *= c;
  }
};

/// CSV layout: header `source_id,s,x,z,intensity`, rows ordered by
/// (source ascending, boundary loop order). A sidecar `<path>.meta` carries
/// key=value metadata including the source positions.
inline void write_measurements(const MeasurementSet& ms, const std::string& path) {
  ms.validate();
  std::ofstream out(path);
  if (!out) throw IoError("write_measurements: cannot open " + path);
  out << "source_id,s,x,z,intensity\n";
  for (const auto& t : ms.traces)
    for (const auto& s : t.samples)
      out << t.source_id << ',' << detail::format_double(t.source.s) << ','
          << detail::format_double(s.position.x) << ',' << detail::format_double(s.position.z) << ','
          << detail::format_double(s.intensity) << '\n';
  if (!out) throw IoError("write_measurements: write failed for " + path);

  std::ofstream meta(path + ".meta");
  if (!meta) throw IoError("write_measurements: cannot open " + path + ".meta");
  meta << "k2=" << detail::format_double(ms.k2) << "\nnoise=" << detail::format_double(ms.noise)
       << "\nseed=" << ms.seed << "\namplitude=" << detail::format_double(ms.amplitude)
       << "\nsmoothed=" << (ms.smoothed ? "true" : "false")
       << "\nclipped_samples=" << ms.clipped_samples << '\n';
  for (const auto& t : ms.traces)
    meta << "source" << t.source_id << "_x=" << detail::format_double(t.source.position.x)
         << "\nsource" << t.source_id << "_z=" << detail::format_double(t.source.position.z)
         << "\nsource" << t.source_id << "_amplitude=" << detail::format_double(t.source.amplitude)
         << '\n';
}

inline std::map<std::string, std::string> read_meta_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_meta_file: cannot open " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw IoError("read_meta_file: missing `=` in " + path + " at line " + std::to_string(row));
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

inline MeasurementSet read_measurements(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_measurements: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("source_id,s,x,z,intensity", 0) != 0)
    throw IoError("read_measurements: missing header in " + path);

  const auto meta = read_meta_file(path + ".meta");
  auto meta_num = [&](const std::string& key, double fallback, bool required = false) {
    auto it = meta.find(key);
    if (it == meta.end()) {
      if (required) throw IoError("read_measurements: missing meta key " + key);
      return fallback;
    }
    try {
      return std::stod(it->second);
    } catch (const std::exception&) {
      throw IoError("read_measurements: bad numeric meta value for " + key);
    }
  };

  MeasurementSet ms;
  ms.k2 = meta_num("k2", 0.0, true);
  ms.noise = meta_num("noise", 0.0);
  ms.seed = static_cast<std::uint64_t>(meta_num("seed", 0.0));
  ms.amplitude = meta_num("amplitude", 1.0);
  ms.clipped_samples = static_cast<int>(meta_num("clipped_samples", 0.0));
  auto sm = meta.find("smoothed");
  ms.smoothed = sm != meta.end() && sm->second == "true";

  std::map<int, SourceTrace> traces;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::istringstream ls(line);
    int id;
    double s, x, z, intensity;
    char c1, c2, c3, c4;
    if (!(ls >> id >> c1 >> s >> c2 >> x >> c3 >> z >> c4 >> intensity) || c1 != ',' || c2 != ',' ||
        c3 != ',' || c4 != ',')
      throw IoError("read_measurements: parse error in " + path + " at row " + std::to_string(row));
    auto& t = traces[id];
    if (t.samples.empty()) {
      t.source_id = id;
      const double sx = meta_num("source" + std::to_string(id) + "_x", 0.0, true);
      const double sz = meta_num("source" + std::to_string(id) + "_z", 0.0, true);
      const double amp = meta_num("source" + std::to_string(id) + "_amplitude", 1.0);
      t.source = SourcePoint::at({sx, sz}, amp);
      if (std::abs(t.source.s - s) > 1e-9 * std::max(1.0, s))
        throw IoError("read_measurements: source distance mismatch at row " + std::to_string(row));
    }
    t.samples.push_back({{x, z}, intensity});
  }
  for (auto& [id, t] : traces) ms.traces.push_back(std::move(t));
  ms.validate();
  return ms;
}

}  // namespace dotrecon
