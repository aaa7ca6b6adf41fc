#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "dotrecon/errors.hpp"
#include "dotrecon/fem.hpp"
#include "dotrecon/measurement.hpp"
#include "dotrecon/mesh.hpp"
#include "dotrecon/scenes.hpp"
#include "dotrecon/specfun.hpp"

namespace dotrecon {

// Near-machine tolerance: traces are read many decades below their peak, and
// downstream coefficient recovery amplifies any leftover residual.
inline constexpr double kForwardSolveTol = 1e-13;

/// Safety margin on the comparison-principle floor below.
inline constexpr double kShadowFloorFraction = 0.5;

/// Point-source solve on the truncated plane via singularity splitting:
/// u = A u0 + uhat, where u0 is the fundamental solution and uhat solves
///   div(grad uhat) - a uhat = (a - k2) A u0   in Omega0,
///   uhat = -A u0                              on the outer boundary,
/// so u vanishes there. The right-hand side is smooth wherever it is nonzero
/// because a = k2 away from the imaged disk.
///
/// In deep inclusion shadows the true field drops below the discretization
/// error of the correction and the split solution can cross zero, which the
/// intensity model (and its logarithm) cannot tolerate. The comparison
/// principle gives a strict lower bound: a(x) <= max(a) pointwise implies
/// u >= the constant-coefficient solution A K0(sqrt(max a) r)/2pi, up to the
/// domain-truncation correction absorbed in the margin. Values below half
/// that bound are lifted onto it.
inline ScalarField solve_point_source(const ScalarField& a, const SourcePoint& src, double k2,
                                      double omega_radius = kOmegaRadius) {
  a.validate();
  src.validate();
  if (!(k2 > 0.0)) throw ValidationError("solve_point_source: k2 must be positive");
  const Mesh& mesh = *a.mesh;
  const double k = std::sqrt(k2);
  const double A = src.amplitude;

  if (norm(src.position) <= omega_radius)
    throw ValidationError("solve_point_source: source must lie outside the imaged disk");
  for (int i = 0; i < mesh.node_count(); ++i)
    if (dist(mesh.nodes[i], src.position) < 1e-9)
      throw SingularityError("solve_point_source: mesh node coincides with the source");

  std::vector<double> load(mesh.nodes.size(), 0.0);
  for (int i = 0; i < mesh.node_count(); ++i) {
    const double ai = a.values[i];
    if (ai < k2 - 1e-12 * k2)
      throw ValidationError("solve_point_source: coefficient below background at node " +
                            std::to_string(i));
    if (ai > k2)  // u0 is evaluated only away from the source (a = k2 near it)
      load[i] = (ai - k2) * A * fundamental_solution(mesh.nodes[i], src.position, k);
  }

  // Unknowns span many decades; scale them by the local free-space magnitude
  // so rounding stays relative.
  std::vector<double> scale(mesh.nodes.size());
  for (int i = 0; i < mesh.node_count(); ++i)
    scale[i] = std::max(w0_asymptotic(std::max(dist(mesh.nodes[i], src.position), 0.5), k), 1e-280);

  EllipticProblem p;
  p.mesh = &mesh;
  p.reaction = &a.values;
  p.load = &load;
  for (int i = 0; i < mesh.node_count(); ++i)
    if (mesh.boundary_tags[i] != BoundaryTag::interior)
      p.dirichlet[i] = -A * fundamental_solution(mesh.nodes[i], src.position, k);
  const ScalarField uhat = solve_elliptic(p, kForwardSolveTol, FieldUnits::intensity, nullptr, &scale);

  double a_max = k2;
  for (double v : a.values) a_max = std::max(a_max, v);
  const double k_max = std::sqrt(a_max);

  ScalarField u(mesh, FieldUnits::intensity);
  for (int i = 0; i < mesh.node_count(); ++i) {
    const double split = A * fundamental_solution(mesh.nodes[i], src.position, k) + uhat.values[i];
    const double floor =
        kShadowFloorFraction * A * fundamental_solution(mesh.nodes[i], src.position, k_max);
    u.values[i] = std::max(split, floor);
  }
  for (int i = 0; i < mesh.node_count(); ++i)
    if (norm(mesh.nodes[i]) <= omega_radius && !(u.values[i] > 0.0))
      throw PositivityError("solve_point_source: non-positive intensity inside the imaged disk at (" +
                            std::to_string(mesh.nodes[i].x) + ", " + std::to_string(mesh.nodes[i].z) +
                            ")");
  return u;
}

/// Synthesizes boundary traces for a list of sources: one forward solve per
/// source, sampled at the given boundary positions, with multiplicative
/// Gaussian noise `intensity * (1 + noise * N(0,1))`. Non-positive noisy
/// samples are clipped to half the trace's smallest positive sample and
/// counted in the metadata.
inline MeasurementSet synthesize_measurements(const ScalarField& a,
                                              const std::vector<SourcePoint>& sources,
                                              const std::vector<Vec2>& sample_positions,
                                              double noise, std::uint64_t seed, double k2,
                                              double omega_radius = kOmegaRadius) {
  if (noise < 0.0) throw ValidationError("synthesize_measurements: noise must be nonnegative");
  if (sample_positions.empty())
    throw ValidationError("synthesize_measurements: no sample positions");

  MeasurementSet ms;
  ms.k2 = k2;
  ms.noise = noise;
  ms.seed = seed;
  ms.amplitude = sources.empty() ? 1.0 : sources.front().amplitude;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const PointLocator locator(*a.mesh);
  const double k = std::sqrt(k2);
  for (std::size_t si = 0; si < sources.size(); ++si) {
    SourceTrace trace;
    trace.source_id = static_cast<int>(si) + 1;
    trace.source = sources[si];
    const ScalarField u = solve_point_source(a, sources[si], k2, omega_radius);
    // Sample the smooth ratio u / u0 rather than u itself: interpolating the
    // sharply decaying intensity between nodes would lose a few percent.
    ScalarField ratio(*a.mesh, FieldUnits::dimensionless);
    for (int i = 0; i < a.mesh->node_count(); ++i)
      ratio.values[i] =
          u.values[i] / fundamental_solution(a.mesh->nodes[i], sources[si].position, k);
    for (const Vec2& pos : sample_positions) {
      double value = evaluate_field(ratio, locator, pos) *
                     fundamental_solution(pos, sources[si].position, k);
      if (noise > 0.0) value *= 1.0 + noise * gauss(rng);
      trace.samples.push_back({pos, value});
    }
    // Clip non-positive noisy samples to half the smallest positive one.
    double smallest_positive = 0.0;
    for (const auto& s : trace.samples)
      if (s.intensity > 0.0)
        smallest_positive =
            smallest_positive == 0.0 ? s.intensity : std::min(smallest_positive, s.intensity);
    if (smallest_positive == 0.0)
      throw NumericError("synthesize_measurements: entire trace non-positive after noise");
    for (auto& s : trace.samples)
      if (!(s.intensity > 0.0)) {
        s.intensity = 0.5 * smallest_positive;
        ++ms.clipped_samples;
      }
    ms.traces.push_back(std::move(trace));
  }
  ms.validate();
  return ms;
}

}  // namespace dotrecon
