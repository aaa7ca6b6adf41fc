#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dotrecon/errors.hpp"
#include "dotrecon/mesh.hpp"

namespace dotrecon {

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

/// Writes a nodal field as CSV with header `x,z,value`, one row per node.
inline void field_to_csv(const ScalarField& f, const std::string& path) {
  f.validate();
  std::ofstream out(path);
  if (!out) throw IoError("field_to_csv: cannot open " + path);
  out << "x,z,value\n";
  for (std::size_t i = 0; i < f.values.size(); ++i)
    out << detail::format_double(f.mesh->nodes[i].x) << ',' << detail::format_double(f.mesh->nodes[i].z)
        << ',' << detail::format_double(f.values[i]) << '\n';
  if (!out) throw IoError("field_to_csv: write failed for " + path);
}

/// Reads a field CSV back as (x, z, value) rows.
struct FieldSamples {
  std::vector<Vec2> points;
  std::vector<double> values;
};

inline FieldSamples read_field_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_field_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("x,z,value", 0) != 0)
    throw IoError("read_field_csv: missing `x,z,value` header in " + path);
  FieldSamples s;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::istringstream ls(line);
    double x, z, v;
    char c1, c2;
    if (!(ls >> x >> c1 >> z >> c2 >> v) || c1 != ',' || c2 != ',')
      throw IoError("read_field_csv: parse error in " + path + " at row " + std::to_string(row));
    s.points.push_back({x, z});
    s.values.push_back(v);
  }
  return s;
}

/// Rasterizes a field onto a regular grid and writes an 8-bit PGM plus a
/// sidecar `<path>.meta` recording the min/max normalization and the raster
/// placement. Pixels outside the domain are written as 0.
inline void field_to_pgm(const ScalarField& f, const std::string& path, int width = 256) {
  f.validate();
  const Mesh& mesh = *f.mesh;
  Vec2 lo = mesh.nodes.at(0), hi = lo;
  for (const Vec2& p : mesh.nodes) {
    lo.x = std::min(lo.x, p.x);
    lo.z = std::min(lo.z, p.z);
    hi.x = std::max(hi.x, p.x);
    hi.z = std::max(hi.z, p.z);
  }
  const double aspect = (hi.z - lo.z) / (hi.x - lo.x);
  const int height = std::max(2, static_cast<int>(width * aspect));
  double vmin = f.values.at(0), vmax = vmin;
  for (double v : f.values) {
    vmin = std::min(vmin, v);
    vmax = std::max(vmax, v);
  }
  const double scale = (vmax > vmin) ? 255.0 / (vmax - vmin) : 0.0;

  const PointLocator loc(mesh);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("field_to_pgm: cannot open " + path);
  out << "P5\n" << width << ' ' << height << "\n255\n";
  std::vector<unsigned char> rowbuf(width);
  for (int j = 0; j < height; ++j) {
    // Row 0 is the top of the image (largest z).
    const double z = hi.z - (j + 0.5) * (hi.z - lo.z) / height;
    for (int i = 0; i < width; ++i) {
      const double x = lo.x + (i + 0.5) * (hi.x - lo.x) / width;
      std::array<double, 3> bary{};
      const int t = loc.locate({x, z}, bary);
      if (t < 0) {
        rowbuf[i] = 0;
        continue;
      }
      const auto& tri = mesh.triangles[t];
      const double v =
          bary[0] * f.values[tri[0]] + bary[1] * f.values[tri[1]] + bary[2] * f.values[tri[2]];
      rowbuf[i] = static_cast<unsigned char>(std::clamp(scale * (v - vmin), 0.0, 255.0) + 0.5);
    }
    out.write(reinterpret_cast<const char*>(rowbuf.data()), width);
  }
  if (!out) throw IoError("field_to_pgm: write failed for " + path);

  std::ofstream meta(path + ".meta");
  if (!meta) throw IoError("field_to_pgm: cannot open " + path + ".meta");
  meta << "min=" << detail::format_double(vmin) << "\nmax=" << detail::format_double(vmax)
       << "\nwidth=" << width << "\nheight=" << height << "\nx_min=" << detail::format_double(lo.x)
       << "\nx_max=" << detail::format_double(hi.x) << "\nz_min=" << detail::format_double(lo.z)
       << "\nz_max=" << detail::format_double(hi.z)
       << "\nnote=pixel value = round(255*(v-min)/(max-min)); outside-domain pixels are 0\n";
}

}  // namespace dotrecon
