#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dotrecon/errors.hpp"
#include "dotrecon/vec2.hpp"

namespace dotrecon {

enum class DomainKind { disk, square, square_minus_disk };

enum class BoundaryTag : std::uint8_t { interior = 0, outer = 1, inner = 2 };

/// Geometric description of one of the computational domains.
struct DomainSpec {
  DomainKind kind = DomainKind::square;
  double radius = 0.0;      // disk radius, mm
  double half_width = 0.0;  // square half-width, mm
  Vec2 center{};

  static DomainSpec disk(double radius, Vec2 center = {}) {
    DomainSpec s{DomainKind::disk, radius, 0.0, center};
    s.validate();
    return s;
  }
  static DomainSpec square(double half_width, Vec2 center = {}) {
    DomainSpec s{DomainKind::square, 0.0, half_width, center};
    s.validate();
    return s;
  }
  static DomainSpec square_minus_disk(double half_width, double radius, Vec2 center = {}) {
    DomainSpec s{DomainKind::square_minus_disk, radius, half_width, center};
    s.validate();
    return s;
  }

  void validate() const {
    switch (kind) {
      case DomainKind::disk:
        if (!(radius > 0.0)) throw ValidationError("DomainSpec: disk radius must be positive");
        break;
      case DomainKind::square:
        if (!(half_width > 0.0)) throw ValidationError("DomainSpec: half-width must be positive");
        break;
      case DomainKind::square_minus_disk:
        if (!(radius > 0.0) || !(half_width > 0.0))
          throw ValidationError("DomainSpec: radius and half-width must be positive");
        if (!(radius < half_width))
          throw ValidationError("DomainSpec: disk must lie strictly inside the square");
        break;
    }
  }

  double diameter() const {
    return kind == DomainKind::disk ? 2.0 * radius : 2.0 * std::sqrt(2.0) * half_width;
  }
};

/// Conforming triangulation with per-node boundary tags. Immutable once built.
struct Mesh {
  DomainSpec spec;
  double h_mesh = 0.0;
  std::vector<Vec2> nodes;
  std::vector<std::array<int, 3>> triangles;
  std::vector<BoundaryTag> boundary_tags;

  // Cached per-triangle geometry (filled by finalize()).
  std::vector<double> tri_area;
  std::vector<std::array<Vec2, 3>> tri_grad;  // gradients of the three P1 hat functions

  int node_count() const { return static_cast<int>(nodes.size()); }
  int triangle_count() const { return static_cast<int>(triangles.size()); }

  /// Triangle-constant gradient of a nodal field on triangle t.
  Vec2 gradient(int t, const std::vector<double>& v) const {
    const auto& tri = triangles[t];
    const auto& g = tri_grad[t];
    return v[tri[0]] * g[0] + v[tri[1]] * g[1] + v[tri[2]] * g[2];
  }

  /// Lumped nodal areas (one third of each incident triangle).
  std::vector<double> lumped_areas() const {
    std::vector<double> a(nodes.size(), 0.0);
    for (int t = 0; t < triangle_count(); ++t)
      for (int v : triangles[t]) a[v] += tri_area[t] / 3.0;
    return a;
  }

  /// Computes areas and basis gradients; checks orientation and conformity.
  void finalize() {
    const int nn = node_count();
    tri_area.resize(triangles.size());
    tri_grad.resize(triangles.size());
    for (std::size_t t = 0; t < triangles.size(); ++t) {
      const auto& tri = triangles[t];
      for (int v : tri)
        if (v < 0 || v >= nn) throw ValidationError("Mesh: node index out of range");
      const Vec2 a = nodes[tri[0]], b = nodes[tri[1]], c = nodes[tri[2]];
      const double twice_area = cross(b - a, c - a);
      if (!(twice_area > 0.0))
        throw ValidationError("Mesh: non-positive triangle area at triangle " + std::to_string(t));
      tri_area[t] = 0.5 * twice_area;
      // grad of hat at vertex i is (perpendicular of opposite edge)/(2A)
      tri_grad[t][0] = {(b.z - c.z) / twice_area, (c.x - b.x) / twice_area};
      tri_grad[t][1] = {(c.z - a.z) / twice_area, (a.x - c.x) / twice_area};
      tri_grad[t][2] = {(a.z - b.z) / twice_area, (b.x - a.x) / twice_area};
    }
    if (boundary_tags.size() != nodes.size())
      throw ValidationError("Mesh: boundary tag count mismatch");
    check_edge_conformity();
  }

  /// Each undirected edge must belong to one triangle (boundary) or two
  /// (interior), with opposite orientations.
  void check_edge_conformity() const {
    std::map<std::pair<int, int>, int> count;
    for (const auto& tri : triangles) {
      for (int e = 0; e < 3; ++e) {
        int u = tri[e], v = tri[(e + 1) % 3];
        if (u > v) std::swap(u, v);
        ++count[{u, v}];
      }
    }
    for (const auto& [edge, c] : count)
      if (c > 2) throw ValidationError("Mesh: edge shared by more than two triangles");
  }

  /// Undirected edges appearing in exactly one triangle, directed as in that
  /// triangle (domain on the left).
  std::vector<std::pair<int, int>> boundary_edges() const {
    std::map<std::pair<int, int>, std::pair<int, int>> first_seen;  // sorted -> directed
    std::map<std::pair<int, int>, int> count;
    for (const auto& tri : triangles) {
      for (int e = 0; e < 3; ++e) {
        const int u = tri[e], v = tri[(e + 1) % 3];
        const auto key = std::minmax(u, v);
        ++count[key];
        first_seen.emplace(key, std::make_pair(u, v));
      }
    }
    std::vector<std::pair<int, int>> out;
    for (const auto& [key, c] : count)
      if (c == 1) out.push_back(first_seen.at(key));
    return out;
  }
};

enum class FieldUnits { intensity, log_intensity, coefficient, dimensionless };

/// Nodal values of a function on a mesh. The mesh must outlive the field.
struct ScalarField {
  const Mesh* mesh = nullptr;
  std::vector<double> values;
  FieldUnits units = FieldUnits::dimensionless;

  ScalarField() = default;
  ScalarField(const Mesh& m, FieldUnits u, double fill = 0.0)
      : mesh(&m), values(m.nodes.size(), fill), units(u) {}

  double& operator[](int i) { return values[i]; }
  double operator[](int i) const { return values[i]; }

  void validate() const {
    if (!mesh || values.size() != mesh->nodes.size())
      throw ValidationError("ScalarField: value count does not match mesh");
    for (double v : values)
      if (!std::isfinite(v)) throw ValidationError("ScalarField: non-finite value");
  }
};

namespace detail {

inline int grid_size_for(double extent, double target_h) { return static_cast<int>(std::ceil(extent / target_h)); }

inline void build_square_grid(Mesh& m, double half_width, Vec2 center, double target_h) {
  const int n = grid_size_for(2.0 * half_width, target_h);
  const double step = 2.0 * half_width / n;
  m.nodes.reserve(static_cast<std::size_t>(n + 1) * (n + 1));
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
      m.nodes.push_back({center.x - half_width + i * step, center.z - half_width + j * step});
  auto id = [n](int i, int j) { return j * (n + 1) + i; };
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      m.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      m.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  m.boundary_tags.assign(m.nodes.size(), BoundaryTag::interior);
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
      if (i == 0 || i == n || j == 0 || j == n) m.boundary_tags[id(i, j)] = BoundaryTag::outer;
}

inline void build_disk_rings(Mesh& m, double radius, Vec2 center, double target_h) {
  // Ring-to-ring zipper diagonals reach ~1.7x the ring spacing, so rings are
  // spaced at 0.7 * target_h to keep every edge within 1.5 * target_h.
  const int rings = std::max(2, grid_size_for(radius, 0.7 * target_h));
  // Node layout: center node, then ring r (1-based) with 6r nodes.
  std::vector<std::vector<int>> ring_nodes(rings + 1);
  m.nodes.push_back(center);
  ring_nodes[0] = {0};
  for (int r = 1; r <= rings; ++r) {
    const int cnt = 6 * r;
    const double rad = radius * r / rings;
    ring_nodes[r].resize(cnt);
    for (int j = 0; j < cnt; ++j) {
      const double th = 2.0 * M_PI * j / cnt;
      ring_nodes[r][j] = static_cast<int>(m.nodes.size());
      m.nodes.push_back({center.x + rad * std::cos(th), center.z + rad * std::sin(th)});
    }
  }
  // Inner fan.
  for (int j = 0; j < 6; ++j)
    m.triangles.push_back({0, ring_nodes[1][j], ring_nodes[1][(j + 1) % 6]});
  // Zipper between consecutive rings, advancing the pointer with the smaller
  // next angle.
  for (int r = 2; r <= rings; ++r) {
    const auto& in = ring_nodes[r - 1];
    const auto& out = ring_nodes[r];
    const int ni = static_cast<int>(in.size()), no = static_cast<int>(out.size());
    int i = 0, j = 0;
    auto in_angle = [&](int idx) { return 2.0 * M_PI * idx / ni; };
    auto out_angle = [&](int idx) { return 2.0 * M_PI * idx / no; };
    while (i < ni || j < no) {
      const bool advance_outer = (j < no) && (i == ni || out_angle(j + 1) <= in_angle(i + 1));
      if (advance_outer) {
        m.triangles.push_back({in[i % ni], out[j % no], out[(j + 1) % no]});
        ++j;
      } else {
        m.triangles.push_back({in[i % ni], out[j % no], in[(i + 1) % ni]});
        ++i;
      }
    }
  }
  m.boundary_tags.assign(m.nodes.size(), BoundaryTag::interior);
  for (int v : ring_nodes[rings]) m.boundary_tags[v] = BoundaryTag::outer;
}

inline void build_square_minus_disk(Mesh& m, const DomainSpec& spec, double target_h) {
  Mesh full;
  build_square_grid(full, spec.half_width, spec.center, target_h);
  const double R = spec.radius;
  auto radius_of = [&](Vec2 p) { return dist(p, spec.center); };

  // Remove every triangle touching a node strictly inside the disk. The
  // remaining staircase nodes are all at radius >= R, so the radial snap onto
  // the circle below cannot flip a triangle (angles are preserved and only
  // boundary nodes move, inward to radius exactly R).
  std::vector<std::array<int, 3>> kept;
  for (const auto& tri : full.triangles) {
    bool inside = false;
    for (int v : tri)
      if (radius_of(full.nodes[v]) < R - 1e-12) inside = true;
    if (!inside) kept.push_back(tri);
  }

  // Hole boundary: edges used once among kept triangles, away from the square border.
  std::map<std::pair<int, int>, int> edge_count;
  for (const auto& tri : kept)
    for (int e = 0; e < 3; ++e) {
      const auto key = std::minmax(tri[e], tri[(e + 1) % 3]);
      ++edge_count[key];
    }
  const double W = spec.half_width;
  auto on_square_border = [&](Vec2 p) {
    return std::abs(std::abs(p.x - spec.center.x) - W) < 1e-9 ||
           std::abs(std::abs(p.z - spec.center.z) - W) < 1e-9;
  };
  std::vector<bool> snap(full.nodes.size(), false);
  for (const auto& [key, c] : edge_count) {
    if (c != 1) continue;
    if (on_square_border(full.nodes[key.first]) && on_square_border(full.nodes[key.second])) continue;
    snap[key.first] = true;
    snap[key.second] = true;
  }

  for (std::size_t v = 0; v < full.nodes.size(); ++v) {
    if (!snap[v]) continue;
    const Vec2 d = full.nodes[v] - spec.center;
    const double r = norm(d);
    if (r <= 0.0) throw ValidationError("square_minus_disk: node coincides with the disk center");
    full.nodes[v] = spec.center + (R / r) * d;
  }

  // Compact node numbering.
  std::vector<int> remap(full.nodes.size(), -1);
  for (const auto& tri : kept)
    for (int v : tri)
      if (remap[v] < 0) {
        remap[v] = static_cast<int>(m.nodes.size());
        m.nodes.push_back(full.nodes[v]);
        BoundaryTag tag = BoundaryTag::interior;
        if (snap[v])
          tag = BoundaryTag::inner;
        else if (on_square_border(full.nodes[v]))
          tag = BoundaryTag::outer;
        m.boundary_tags.push_back(tag);
      }
  for (const auto& tri : kept) m.triangles.push_back({remap[tri[0]], remap[tri[1]], remap[tri[2]]});
}

}  // namespace detail

/// Builds a conforming triangulation of the given domain. Squares become
/// structured n x n grids with cells split into two triangles; disks are
/// meshed by mapped concentric rings; the square-minus-disk domain removes
/// disk cells from the square grid and snaps the staircase onto the circle
/// (snap displacement is below one cell diagonal).
inline Mesh build_mesh(const DomainSpec& spec, double target_h) {
  spec.validate();
  if (!(target_h > 0.0)) throw ValidationError("build_mesh: target_h must be positive");
  if (target_h * 8.0 > spec.diameter())
    throw ValidationError("build_mesh: target_h must be at least 8x smaller than the domain diameter");
  Mesh m;
  m.spec = spec;
  m.h_mesh = target_h;
  switch (spec.kind) {
    case DomainKind::square:
      detail::build_square_grid(m, spec.half_width, spec.center, target_h);
      break;
    case DomainKind::disk:
      detail::build_disk_rings(m, spec.radius, spec.center, target_h);
      break;
    case DomainKind::square_minus_disk:
      detail::build_square_minus_disk(m, spec, target_h);
      break;
  }
  m.finalize();
  return m;
}

/// Boundary nodes carrying `tag`, ordered counterclockwise along the closed
/// boundary curve (consecutive entries share a mesh edge).
inline std::vector<int> boundary_nodes(const Mesh& mesh, BoundaryTag tag) {
  if (tag == BoundaryTag::interior) throw ValidationError("boundary_nodes: interior is not a boundary tag");
  std::map<int, int> succ;
  for (const auto& [u, v] : mesh.boundary_edges()) {
    if (mesh.boundary_tags[u] != tag || mesh.boundary_tags[v] != tag) continue;
    succ[u] = v;
  }
  if (succ.empty()) throw ValidationError("boundary_nodes: tag not present in mesh");
  std::vector<int> loop;
  const int start = succ.begin()->first;
  int cur = start;
  do {
    loop.push_back(cur);
    auto it = succ.find(cur);
    if (it == succ.end()) throw ValidationError("boundary_nodes: boundary is not a closed loop");
    cur = it->second;
    if (loop.size() > succ.size()) throw ValidationError("boundary_nodes: boundary loop does not close");
  } while (cur != start);
  // Normalize to counterclockwise traversal of the curve.
  double twice_area = 0.0;
  for (std::size_t i = 0; i < loop.size(); ++i) {
    const Vec2 a = mesh.nodes[loop[i]], b = mesh.nodes[loop[(i + 1) % loop.size()]];
    twice_area += cross(a, b);
  }
  if (twice_area < 0.0) std::reverse(loop.begin() + 1, loop.end());
  return loop;
}

/// Uniform-bucket point locator over a mesh.
class PointLocator {
 public:
  explicit PointLocator(const Mesh& mesh) : mesh_(&mesh) {
    lo_ = hi_ = mesh.nodes.at(0);
    for (const Vec2& p : mesh.nodes) {
      lo_.x = std::min(lo_.x, p.x);
      lo_.z = std::min(lo_.z, p.z);
      hi_.x = std::max(hi_.x, p.x);
      hi_.z = std::max(hi_.z, p.z);
    }
    n_ = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(mesh.triangle_count()))));
    buckets_.resize(static_cast<std::size_t>(n_) * n_);
    for (int t = 0; t < mesh.triangle_count(); ++t) {
      Vec2 tlo = mesh.nodes[mesh.triangles[t][0]], thi = tlo;
      for (int v : mesh.triangles[t]) {
        tlo.x = std::min(tlo.x, mesh.nodes[v].x);
        tlo.z = std::min(tlo.z, mesh.nodes[v].z);
        thi.x = std::max(thi.x, mesh.nodes[v].x);
        thi.z = std::max(thi.z, mesh.nodes[v].z);
      }
      for (int bj = cell(tlo.z, lo_.z, hi_.z); bj <= cell(thi.z, lo_.z, hi_.z); ++bj)
        for (int bi = cell(tlo.x, lo_.x, hi_.x); bi <= cell(thi.x, lo_.x, hi_.x); ++bi)
          buckets_[static_cast<std::size_t>(bj) * n_ + bi].push_back(t);
    }
  }

  /// Finds the triangle containing p (within `tol` mm of it). Returns triangle
  /// index and barycentric coordinates, or -1 if outside.
  int locate(Vec2 p, std::array<double, 3>& bary, double tol = 1e-9) const {
    const int bi = cell(p.x, lo_.x, hi_.x), bj = cell(p.z, lo_.z, hi_.z);
    int best_tri = -1;
    double best_min = -1e300;
    std::array<double, 3> best_bary{};
    for (int dj = -1; dj <= 1; ++dj) {
      for (int di = -1; di <= 1; ++di) {
        const int ci = bi + di, cj = bj + dj;
        if (ci < 0 || ci >= n_ || cj < 0 || cj >= n_) continue;
        for (int t : buckets_[static_cast<std::size_t>(cj) * n_ + ci]) {
          const auto& tri = mesh_->triangles[t];
          const Vec2 a = mesh_->nodes[tri[0]], b = mesh_->nodes[tri[1]], c = mesh_->nodes[tri[2]];
          const double den = cross(b - a, c - a);
          std::array<double, 3> l{cross(b - p, c - p) / den, cross(c - p, a - p) / den,
                                  cross(a - p, b - p) / den};
          const double mn = std::min({l[0], l[1], l[2]});
          if (mn > best_min) {
            best_min = mn;
            best_tri = t;
            best_bary = l;
          }
        }
      }
    }
    if (best_tri < 0) return -1;
    // Convert the barycentric deficit into a distance scale.
    const double diam = std::sqrt(mesh_->tri_area[best_tri]);
    if (best_min < -tol / std::max(diam, 1e-30)) return -1;
    for (double& l : best_bary) l = std::max(l, 0.0);
    const double s = best_bary[0] + best_bary[1] + best_bary[2];
    for (double& l : best_bary) l /= s;
    bary = best_bary;
    return best_tri;
  }

 private:
  int cell(double v, double lo, double hi) const {
    const double w = hi - lo;
    int c = w > 0 ? static_cast<int>((v - lo) / w * n_) : 0;
    return std::clamp(c, 0, n_ - 1);
  }

  const Mesh* mesh_;
  Vec2 lo_{}, hi_{};
  int n_ = 1;
  std::vector<std::vector<int>> buckets_;
};

/// Evaluates a nodal field at an arbitrary point by P1 interpolation.
inline double evaluate_field(const ScalarField& f, const PointLocator& loc, Vec2 p) {
  std::array<double, 3> bary{};
  const int t = loc.locate(p, bary);
  if (t < 0)
    throw OutOfDomainError("evaluate_field: point (" + std::to_string(p.x) + ", " +
                           std::to_string(p.z) + ") lies outside the mesh");
  const auto& tri = f.mesh->triangles[t];
  return bary[0] * f.values[tri[0]] + bary[1] * f.values[tri[1]] + bary[2] * f.values[tri[2]];
}

/// Piecewise-linear transfer of a nodal field onto another mesh. Exact at
/// shared node coordinates; destination nodes must lie inside the source
/// domain (1e-9 mm tolerance).
inline ScalarField transfer_field(const ScalarField& src, const Mesh& dst_mesh) {
  src.validate();
  const PointLocator loc(*src.mesh);
  ScalarField out(dst_mesh, src.units);
  for (int i = 0; i < dst_mesh.node_count(); ++i) {
    std::array<double, 3> bary{};
    const int t = loc.locate(dst_mesh.nodes[i], bary);
    if (t < 0)
      throw OutOfDomainError("transfer_field: destination node " + std::to_string(i) + " at (" +
                             std::to_string(dst_mesh.nodes[i].x) + ", " +
                             std::to_string(dst_mesh.nodes[i].z) + ") is outside the source domain");
    const auto& tri = src.mesh->triangles[t];
    out.values[i] =
        bary[0] * src.values[tri[0]] + bary[1] * src.values[tri[1]] + bary[2] * src.values[tri[2]];
  }
  return out;
}

}  // namespace dotrecon
