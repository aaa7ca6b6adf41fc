#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dotrecon/errors.hpp"
#include "dotrecon/fem.hpp"
#include "dotrecon/forward.hpp"
#include "dotrecon/measurement.hpp"
#include "dotrecon/mesh.hpp"
#include "dotrecon/specfun.hpp"

namespace dotrecon {

namespace detail {

/// Maps a measured trace onto the boundary nodes of `mesh` carrying `tag`.
/// Exact sample positions are used directly; otherwise the value is
/// interpolated between the two nearest samples along the trace loop.
inline std::vector<double> trace_on_boundary(const SourceTrace& trace, const Mesh& mesh,
                                             BoundaryTag tag, const std::vector<int>& loop) {
  std::vector<double> values(loop.size());
  const auto& samples = trace.samples;
  const int ns = static_cast<int>(samples.size());
  for (std::size_t li = 0; li < loop.size(); ++li) {
    const Vec2 p = mesh.nodes[loop[li]];
    int best = 0;
    double best_d = dist(p, samples[0].position);
    for (int s = 1; s < ns; ++s) {
      const double d = dist(p, samples[s].position);
      if (d < best_d) {
        best_d = d;
        best = s;
      }
    }
    if (best_d <= 1e-9) {
      values[li] = samples[best].intensity;
      continue;
    }
    // project onto the two adjacent loop segments around the nearest sample
    double value = samples[best].intensity;
    double best_seg = 1e300;
    for (int off = -1; off <= 0; ++off) {
      const int i0 = (best + off + ns) % ns, i1 = (i0 + 1) % ns;
      const Vec2 a = samples[i0].position, b = samples[i1].position;
      const Vec2 ab = b - a;
      const double len2 = dot(ab, ab);
      if (len2 <= 0.0) continue;
      const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
      const Vec2 foot = a + t * ab;
      const double d = dist(p, foot);
      if (d < best_seg) {
        best_seg = d;
        value = (1.0 - t) * samples[i0].intensity + t * samples[i1].intensity;
      }
    }
    values[li] = value;
  }
  (void)tag;
  return values;
}

}  // namespace detail

/// Smooths measured disk-boundary traces by solving the background equation
/// in the annulus between the disk and the outer square (measured data on the
/// inner circle, zero on the outer square, the point source handled by the
/// same singularity splitting as the forward solver), then reading the trace
/// on the inner-square boundary.
inline MeasurementSet smooth_to_omega1(const MeasurementSet& measurements, double k2,
                                       const Mesh& annulus, const Mesh& omega1) {
  measurements.validate();
  if (!(k2 > 0.0)) throw ValidationError("smooth_to_omega1: k2 must be positive");
  const double k = std::sqrt(k2);

  const auto inner_loop = boundary_nodes(annulus, BoundaryTag::inner);
  const auto omega1_loop = boundary_nodes(omega1, BoundaryTag::outer);
  const PointLocator locator(annulus);

  std::vector<double> k2_field(annulus.nodes.size(), k2);

  MeasurementSet out;
  out.k2 = measurements.k2;
  out.noise = measurements.noise;
  out.seed = measurements.seed;
  out.amplitude = measurements.amplitude;
  out.smoothed = true;
  out.clipped_samples = measurements.clipped_samples;

  for (const auto& trace : measurements.traces) {
    const double A = trace.source.amplitude;
    const Vec2 src = trace.source.position;
    auto u0 = [&](Vec2 x) { return A * fundamental_solution(x, src, k); };

    EllipticProblem p;
    p.mesh = &annulus;
    p.reaction = &k2_field;
    const auto inner_values = detail::trace_on_boundary(trace, annulus, BoundaryTag::inner, inner_loop);
    for (std::size_t li = 0; li < inner_loop.size(); ++li)
      p.dirichlet[inner_loop[li]] = inner_values[li] - u0(annulus.nodes[inner_loop[li]]);
    for (int i = 0; i < annulus.node_count(); ++i)
      if (annulus.boundary_tags[i] == BoundaryTag::outer) p.dirichlet[i] = -u0(annulus.nodes[i]);

    std::vector<double> scale(annulus.nodes.size());
    for (int i = 0; i < annulus.node_count(); ++i)
      scale[i] = std::max(w0_asymptotic(std::max(dist(annulus.nodes[i], src), 0.5), k), 1e-280);
    const ScalarField uhat = solve_elliptic(p, kForwardSolveTol, FieldUnits::intensity, nullptr, &scale);

    // Smooth ratio (u0 + uhat)/u0 is interpolated; u0 is evaluated exactly.
    ScalarField ratio(annulus, FieldUnits::dimensionless);
    for (int i = 0; i < annulus.node_count(); ++i)
      ratio.values[i] = 1.0 + uhat.values[i] / u0(annulus.nodes[i]);

    SourceTrace smoothed;
    smoothed.source_id = trace.source_id;
    smoothed.source = trace.source;
    for (int node : omega1_loop) {
      const Vec2 pos = omega1.nodes[node];
      const double value = evaluate_field(ratio, locator, pos) * u0(pos);
      if (!(value > 0.0))
        throw PositivityError("smooth_to_omega1: non-positive smoothed trace at (" +
                              std::to_string(pos.x) + ", " + std::to_string(pos.z) + ")");
      smoothed.samples.push_back({pos, value});
    }
    out.traces.push_back(std::move(smoothed));
  }
  out.validate();
  return out;
}

/// Calibration output: light amplitude, background k2, the residual of the
/// bright/dim ratio match, and the sampling points used.
struct CalibrationResult {
  double amplitude = 1.0;
  double k2 = 0.0;
  double residual = 0.0;
  Vec2 x_max{};
  Vec2 x_min{};

  void validate() const {
    if (!(amplitude > 0.0) || !(k2 > 0.0) || !std::isfinite(residual))
      throw ValidationError("CalibrationResult: invalid values");
  }
};

namespace detail {

/// Brightest and dimmest samples of the source-1 trace.
inline std::pair<const TraceSample*, const TraceSample*> bright_dim(const MeasurementSet& ms) {
  const SourceTrace* t = ms.find_trace(1);
  if (!t) throw ValidationError("calibration: source-1 trace is required");
  const TraceSample* hi = &t->samples[0];
  const TraceSample* lo = &t->samples[0];
  for (const auto& s : t->samples) {
    if (s.intensity > hi->intensity) hi = &s;
    if (s.intensity < lo->intensity) lo = &s;
  }
  return {hi, lo};
}

/// Computed homogeneous-background intensity at one boundary point for a
/// unit-amplitude source (forward solve on the outer domain).
inline double computed_intensity(const Mesh& omega0, const SourcePoint& source, double k2,
                                 Vec2 at, double omega_radius) {
  ScalarField a(omega0, FieldUnits::coefficient, k2);
  SourcePoint unit = source;
  unit.amplitude = 1.0;
  const ScalarField u = solve_point_source(a, unit, k2, omega_radius);
  const PointLocator locator(omega0);
  ScalarField ratio(omega0, FieldUnits::dimensionless);
  const double k = std::sqrt(k2);
  for (int i = 0; i < omega0.node_count(); ++i)
    ratio.values[i] = u.values[i] / fundamental_solution(omega0.nodes[i], source.position, k);
  return evaluate_field(ratio, locator, at) * fundamental_solution(at, source.position, k);
}

}  // namespace detail

/// Amplitude calibration: the model amplitude that matches the measured
/// intensity at the brightest source-1 boundary point.
inline double calibrate_amplitude(const MeasurementSet& measured, double k2, const Mesh& omega0,
                                  double omega_radius = kOmegaRadius) {
  measured.validate();
  const auto [hi, lo] = detail::bright_dim(measured);
  (void)lo;
  if (!(hi->intensity > 0.0)) throw ValidationError("calibrate_amplitude: empty trace");
  const SourceTrace* t = measured.find_trace(1);
  const double comp = detail::computed_intensity(omega0, t->source, k2, hi->position, omega_radius);
  return hi->intensity / comp;
}

/// Background calibration: bisection on k2 so that the computed bright/dim
/// intensity ratio matches the measured one. The ratio is independent of the
/// amplitude by construction.
inline CalibrationResult calibrate_k2(const MeasurementSet& measured, double k2_lo, double k2_hi,
                                      const Mesh& omega0, double omega_radius = kOmegaRadius) {
  measured.validate();
  if (!(k2_lo > 0.0) || !(k2_hi > k2_lo)) throw ValidationError("calibrate_k2: bad search interval");
  const auto [hi, lo] = detail::bright_dim(measured);
  const double r_meas = hi->intensity / lo->intensity;
  const SourceTrace* t = measured.find_trace(1);

  auto mismatch = [&](double k2) {
    const double bright = detail::computed_intensity(omega0, t->source, k2, hi->position, omega_radius);
    const double dim = detail::computed_intensity(omega0, t->source, k2, lo->position, omega_radius);
    return bright / dim - r_meas;
  };

  double flo = mismatch(k2_lo), fhi = mismatch(k2_hi);
  if (flo * fhi > 0.0)
    throw NumericError("calibrate_k2: interval does not bracket the ratio match (mismatch at " +
                       std::to_string(k2_lo) + " is " + std::to_string(flo) + ", at " +
                       std::to_string(k2_hi) + " is " + std::to_string(fhi) + ")");
  double a = k2_lo, b = k2_hi;
  double fa = flo;
  while ((b - a) > 1e-4 * 0.5 * (a + b)) {
    const double mid = 0.5 * (a + b);
    const double fm = mismatch(mid);
    if (fa * fm <= 0.0) {
      b = mid;
    } else {
      a = mid;
      fa = fm;
    }
  }
  CalibrationResult result;
  result.k2 = 0.5 * (a + b);
  result.residual = mismatch(result.k2);
  result.x_max = hi->position;
  result.x_min = lo->position;
  result.amplitude = hi->intensity / detail::computed_intensity(omega0, t->source, result.k2,
                                                                hi->position, omega_radius);
  result.validate();
  return result;
}

}  // namespace dotrecon
