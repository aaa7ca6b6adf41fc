#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "dotrecon/errors.hpp"
#include "dotrecon/mesh.hpp"
#include "dotrecon/specfun.hpp"

namespace dotrecon {

// Paper-experiment geometry (mm): imaged disk, inner computational square,
// truncated-plane square.
inline constexpr double kOmegaRadius = 4.63;
inline constexpr double kOmega1HalfWidth = 5.83;
inline constexpr double kOmega0HalfWidth = 23.32;

/// Infinite-contrast inclusions (a black absorber) are rendered with this
/// saturation surrogate times the background.
inline constexpr double kInfContrastSurrogate = 20.0;

struct Inclusion {
  Vec2 center;
  double radius = 0.0;
  double contrast = 1.0;  // >= 1, or +inf for a black absorber
};

/// Phantom description: constant background plus circular inclusions.
struct PhantomScene {
  double background_k2 = 2.403;
  std::vector<Inclusion> inclusions;
  double omega_radius = kOmegaRadius;
  double omega0_half_width = kOmega0HalfWidth;

  void validate() const {
    if (!(background_k2 > 0.0)) throw ValidationError("PhantomScene: background_k2 must be positive");
    if (!(omega_radius > 0.0) || !(omega0_half_width > omega_radius))
      throw ValidationError("PhantomScene: inconsistent domain sizes");
    for (const auto& inc : inclusions) {
      if (!(inc.radius > 0.0)) throw ValidationError("PhantomScene: inclusion radius must be positive");
      if (!(inc.contrast >= 1.0))
        throw ValidationError("PhantomScene: contrast must be >= 1 (or inf)");
      if (norm(inc.center) + inc.radius > omega_radius + 1e-12)
        throw ValidationError("PhantomScene: inclusion must lie inside the imaged disk");
    }
    for (std::size_t i = 0; i < inclusions.size(); ++i)
      for (std::size_t j = i + 1; j < inclusions.size(); ++j)
        if (dist(inclusions[i].center, inclusions[j].center) <
            inclusions[i].radius + inclusions[j].radius - 1e-12)
          throw ValidationError("PhantomScene: inclusions overlap");
  }

  /// Largest true contrast (inf contrast reported as inf).
  double true_contrast() const {
    double c = 1.0;
    for (const auto& inc : inclusions) c = std::max(c, inc.contrast);
    return c;
  }
};

/// Renders the scene as a nodal absorption field: background k2 outside the
/// inclusions, contrast * k2 inside (nodes on an inclusion circle take the
/// inclusion value). Infinite contrast renders as the saturation surrogate.
inline ScalarField build_scene(const PhantomScene& scene, const Mesh& mesh) {
  scene.validate();
  ScalarField a(mesh, FieldUnits::coefficient, scene.background_k2);
  for (const auto& inc : scene.inclusions) {
    const double value = std::isinf(inc.contrast) ? kInfContrastSurrogate * scene.background_k2
                                                  : inc.contrast * scene.background_k2;
    for (int i = 0; i < mesh.node_count(); ++i)
      if (dist(mesh.nodes[i], inc.center) <= inc.radius + 1e-12) a.values[i] = value;
  }
  return a;
}

/// Source geometry: three collinear line sources (ids 1..3, nearest-last) and
/// three tail sources on the remaining sides (ids 4..6). The largest line
/// distance is the stripping upper limit s_bar.
struct SourceLayout {
  std::vector<SourcePoint> sources;  // index i holds source id i+1

  double s_bar() const { return sources.at(0).s; }
  double s_under() const { return sources.at(2).s; }
  double spacing() const { return sources.at(0).s - sources.at(1).s; }

  /// Line sources at (20,0), (14,0), (8,0); tail sources at (0,20), (-20,0),
  /// (0,-20). All amplitudes 1.
  static SourceLayout default_layout() { return custom(20.0, 6.0, 1.0); }

  static SourceLayout custom(double far_distance, double spacing, double amplitude) {
    if (!(far_distance > 0.0) || !(spacing > 0.0))
      throw ValidationError("SourceLayout: distances must be positive");
    SourceLayout layout;
    for (int i = 0; i < 3; ++i)
      layout.sources.push_back(SourcePoint::at({far_distance - i * spacing, 0.0}, amplitude));
    layout.sources.push_back(SourcePoint::at({0.0, far_distance}, amplitude));
    layout.sources.push_back(SourcePoint::at({-far_distance, 0.0}, amplitude));
    layout.sources.push_back(SourcePoint::at({0.0, -far_distance}, amplitude));
    layout.validate();
    return layout;
  }

  /// Source ids used for the asymptotic tail guess: the far line source plus
  /// the three tail-side sources.
  static const std::vector<int>& tail_source_ids() {
    static const std::vector<int> ids{1, 4, 5, 6};
    return ids;
  }

  void validate(double omega1_half_width = kOmega1HalfWidth,
                double omega0_half_width = kOmega0HalfWidth) const {
    if (sources.size() != 6) throw ValidationError("SourceLayout: expected six sources");
    for (const auto& s : sources) {
      s.validate();
      const bool outside_omega1 = std::abs(s.position.x) > omega1_half_width + 1e-12 ||
                                  std::abs(s.position.z) > omega1_half_width + 1e-12;
      const bool inside_omega0 = std::abs(s.position.x) < omega0_half_width - 1e-12 &&
                                 std::abs(s.position.z) < omega0_half_width - 1e-12;
      if (!outside_omega1)
        throw ValidationError("SourceLayout: source must lie outside the inner square");
      if (!inside_omega0)
        throw ValidationError("SourceLayout: source must lie inside the outer square");
    }
    if (!(sources[0].s > sources[1].s && sources[1].s > sources[2].s))
      throw ValidationError("SourceLayout: line sources must have decreasing distances");
    const double h = spacing();
    if (std::abs((sources[1].s - sources[2].s) - h) > 1e-9)
      throw ValidationError("SourceLayout: line sources must be equally spaced");
  }
};

}  // namespace dotrecon
