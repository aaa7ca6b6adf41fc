#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dotrecon/errors.hpp"
#include "dotrecon/fem.hpp"
#include "dotrecon/measurement.hpp"
#include "dotrecon/mesh.hpp"
#include "dotrecon/preprocess.hpp"
#include "dotrecon/recover.hpp"
#include "dotrecon/scenes.hpp"
#include "dotrecon/specfun.hpp"

namespace dotrecon {

/// Far-field base profile used to split the measured intensity into
/// amplitude times (1 + p_infinity). `consistent` uses the asymptotic form
/// exp(-kS) / (2 sqrt(2 pi S)); `paper` keeps the sign of the half-log term
/// as printed in the source formula, which shifts the base by a factor 4S
/// (the two disagree; see README). The split is multiplicative, so
/// 1 + p_infinity stays positive for any positive data.
enum class TailFormula { consistent, paper };

struct Stage1Result {
  ScalarField T1;  // first tail guess on the inner square, dimensionless
  ScalarField a1;  // averaged and clamped coefficient, background outside the disk
};

struct TailResult {
  ScalarField T;         // refined tail on the inner square
  ScalarField a_stage1;  // the coefficient the refinement started from
  int iterations = 0;    // stopping index m1
  std::vector<double> history;  // successive-change ratios, first entry for m = 2
};

namespace detail {

/// Which side of the inner square faces the source.
enum class Side { right, top, left, bottom };

inline Side nearest_side(Vec2 source) {
  if (std::abs(source.x) >= std::abs(source.z)) return source.x > 0 ? Side::right : Side::left;
  return source.z > 0 ? Side::top : Side::bottom;
}

inline Side opposite_side(Side s) {
  switch (s) {
    case Side::right:
      return Side::left;
    case Side::left:
      return Side::right;
    case Side::top:
      return Side::bottom;
    case Side::bottom:
      return Side::top;
  }
  return Side::right;
}

/// Along-edge coordinate of a point for the given side.
inline double edge_coord(Side side, Vec2 p) {
  return (side == Side::right || side == Side::left) ? p.z : p.x;
}

inline bool on_side(Side side, Vec2 p, double half_width) {
  switch (side) {
    case Side::right:
      return std::abs(p.x - half_width) < 1e-9;
    case Side::left:
      return std::abs(p.x + half_width) < 1e-9;
    case Side::top:
      return std::abs(p.z - half_width) < 1e-9;
    case Side::bottom:
      return std::abs(p.z + half_width) < 1e-9;
  }
  return false;
}

/// p_infinity from the measured log-intensity at one edge point.
inline double invert_asymptotics(double log_intensity, double k, double S, TailFormula formula) {
  if (formula == TailFormula::consistent)
    return log_intensity + k * S + std::log(2.0 * std::sqrt(2.0 * M_PI)) + 0.5 * std::log(S);
  return log_intensity + k * S + 0.5 * std::log(M_PI / (2.0 * S));
}

/// Piecewise-linear interpolation over (coordinate, value) samples.
struct EdgeInterpolant {
  std::vector<double> coords;  // ascending
  std::vector<double> values;

  double operator()(double c) const {
    if (c <= coords.front()) return values.front();
    if (c >= coords.back()) return values.back();
    const auto it = std::upper_bound(coords.begin(), coords.end(), c);
    const std::size_t hi = static_cast<std::size_t>(it - coords.begin());
    const double t = (c - coords[hi - 1]) / (coords[hi] - coords[hi - 1]);
    return (1.0 - t) * values[hi - 1] + t * values[hi];
  }
};

/// Pointwise restriction to the imaged disk: background outside.
inline void restrict_to_disk(ScalarField& a, double k2, double omega_radius) {
  for (int i = 0; i < a.mesh->node_count(); ++i)
    if (norm(a.mesh->nodes[i]) > omega_radius) a.values[i] = k2;
}

/// Transfers the inner-square coefficient onto the outer mesh, extending by
/// the background outside the imaged disk.
inline ScalarField extend_coefficient(const ScalarField& a1, const Mesh& omega0, double k2,
                                      double omega_radius) {
  ScalarField out(omega0, FieldUnits::coefficient, k2);
  const PointLocator locator(*a1.mesh);
  for (int i = 0; i < omega0.node_count(); ++i)
    if (norm(omega0.nodes[i]) <= omega_radius)
      out.values[i] = std::max(evaluate_field(a1, locator, omega0.nodes[i]), k2);
  return out;
}

}  // namespace detail

/// First tail stage: for each far source, the far-field asymptotics of the
/// log-intensity on the facing edge of the inner square give p_infinity,
/// which is extended across the square perpendicular to that edge; the
/// resulting intensity yields one coefficient estimate. The four estimates
/// are averaged, clamped at the background, and the forward problem for the
/// farthest line source turns them into the first tail guess.
inline Stage1Result stage1_tail(const MeasurementSet& smoothed, const SourceLayout& layout,
                                double k2, const Mesh& omega1, const Mesh& omega0,
                                double omega_radius = kOmegaRadius,
                                TailFormula formula = TailFormula::consistent,
                                double omega1_half_width = kOmega1HalfWidth) {
  smoothed.validate();
  const double k = std::sqrt(k2);
  const auto loop = boundary_nodes(omega1, BoundaryTag::outer);

  ScalarField a_sum(omega1, FieldUnits::coefficient, 0.0);
  for (int source_id : SourceLayout::tail_source_ids()) {
    const SourceTrace* trace = smoothed.find_trace(source_id);
    if (!trace)
      throw ValidationError("stage1_tail: missing smoothed trace for source " +
                            std::to_string(source_id));
    const Vec2 src = trace->source.position;
    const detail::Side side = detail::nearest_side(src);

    // p_infinity samples along the facing edge.
    const auto data = detail::trace_on_boundary(*trace, omega1, BoundaryTag::outer, loop);
    std::vector<std::pair<double, double>> samples;
    for (std::size_t li = 0; li < loop.size(); ++li) {
      const Vec2 p = omega1.nodes[loop[li]];
      if (!detail::on_side(side, p, omega1_half_width)) continue;
      if (!(data[li] > 0.0))
        throw PositivityError("stage1_tail: non-positive trace sample for source " +
                              std::to_string(source_id));
      const double S = dist(p, src);
      const double p_inf = detail::invert_asymptotics(std::log(data[li]), k, S, formula);
      if (!(1.0 + p_inf > 0.0))
        throw NumericError("stage1_tail: asymptotic validity violated (1 + p_infinity <= 0) for "
                           "source " +
                           std::to_string(source_id) + " at edge coordinate " +
                           std::to_string(detail::edge_coord(side, p)));
      samples.emplace_back(detail::edge_coord(side, p), p_inf);
    }
    if (samples.size() < 2)
      throw ValidationError("stage1_tail: too few edge samples for source " +
                            std::to_string(source_id));
    std::sort(samples.begin(), samples.end());
    detail::EdgeInterpolant p_inf_edge;
    for (const auto& [c, v] : samples) {
      p_inf_edge.coords.push_back(c);
      p_inf_edge.values.push_back(v);
    }

    // Rebuild the intensity across the square and recover one estimate.
    ScalarField u(omega1, FieldUnits::intensity);
    for (int i = 0; i < omega1.node_count(); ++i) {
      const Vec2 p = omega1.nodes[i];
      const double S = dist(p, src);
      const double w = -k * S - std::log(2.0 * std::sqrt(2.0 * M_PI)) - 0.5 * std::log(S) +
                       p_inf_edge(detail::edge_coord(side, p));
      if (w > 700.0) throw NumericError("stage1_tail: log-intensity out of range");
      u.values[i] = std::exp(w);
    }
    const ScalarField a_j = recover_coefficient(u, k2);
    for (int i = 0; i < omega1.node_count(); ++i) a_sum.values[i] += a_j.values[i];
  }

  Stage1Result result{ScalarField(omega1, FieldUnits::dimensionless),
                      ScalarField(omega1, FieldUnits::coefficient)};
  const double n_sources = static_cast<double>(SourceLayout::tail_source_ids().size());
  for (int i = 0; i < omega1.node_count(); ++i)
    result.a1.values[i] = std::max(a_sum.values[i] / n_sources, k2);
  detail::restrict_to_disk(result.a1, k2, omega_radius);

  // Forward solve with the farthest line source to form the tail guess.
  const ScalarField a_ext = detail::extend_coefficient(result.a1, omega0, k2, omega_radius);
  const SourcePoint& far_source = layout.sources.at(0);
  const ScalarField u0_field = solve_point_source(a_ext, far_source, k2, omega_radius);
  const double s_bar = layout.s_bar();
  const PointLocator locator(omega0);
  ScalarField ratio(omega0, FieldUnits::dimensionless);
  for (int i = 0; i < omega0.node_count(); ++i)
    ratio.values[i] =
        u0_field.values[i] / fundamental_solution(omega0.nodes[i], far_source.position, k);
  for (int i = 0; i < omega1.node_count(); ++i) {
    const Vec2 p = omega1.nodes[i];
    const double u = evaluate_field(ratio, locator, p) *
                     fundamental_solution(p, far_source.position, k);
    if (!(u > 0.0)) throw PositivityError("stage1_tail: non-positive tail intensity");
    result.T1.values[i] = std::log(u) / (s_bar * s_bar);
  }
  return result;
}

/// Second tail stage: refine by alternating boundary-matched intensity
/// solves on the inner square with coefficient recovery until the relative
/// change of the coefficient drops below eps (discrete L2). The refined tail
/// is the log-intensity of the final iterate scaled by 1/s_bar^2.
inline TailResult stage2_refine(const ScalarField& T1, const ScalarField& a1,
                                const SourceTrace& far_trace, double eps, double k2,
                                double s_bar, double omega_radius = kOmegaRadius,
                                int iteration_cap = 100) {
  (void)T1;  // the refinement restarts from a1; T1 is kept for comparison by callers
  if (!(eps > 0.0) || eps > 1e-2) throw ValidationError("stage2_refine: eps must lie in (0, 1e-2]");
  const Mesh& omega1 = *a1.mesh;
  for (double v : a1.values)
    if (v < k2 - 1e-12 * k2)
      throw ValidationError("stage2_refine: coefficient below background");

  const auto loop = boundary_nodes(omega1, BoundaryTag::outer);
  const auto boundary_values = detail::trace_on_boundary(far_trace, omega1, BoundaryTag::outer, loop);

  const auto areas = omega1.lumped_areas();
  auto change_ratio = [&](const std::vector<double>& now, const std::vector<double>& before) {
    double diff = 0.0, base = 0.0;
    for (std::size_t i = 0; i < now.size(); ++i) {
      diff += areas[i] * (now[i] - before[i]) * (now[i] - before[i]);
      base += areas[i] * before[i] * before[i];
    }
    return std::sqrt(diff / base);
  };

  // u1: boundary-matched intensity for the starting coefficient. The
  // consistent-mass solution matches the recovery identity exactly; the
  // row-sum lumped companion is an M-matrix solve, strictly positive for
  // positive data, and provides a floor against shadow sign losses.
  EllipticProblem first;
  first.mesh = &omega1;
  first.reaction = &a1.values;
  for (std::size_t li = 0; li < loop.size(); ++li) {
    if (!(boundary_values[li] > 0.0))
      throw PositivityError("stage2_refine: non-positive boundary data");
    first.dirichlet[loop[li]] = boundary_values[li];
  }
  ScalarField u = solve_elliptic(first, kForwardSolveTol, FieldUnits::intensity);
  EllipticProblem monotone = first;
  monotone.lump_reaction = true;
  const ScalarField u_floor = solve_elliptic(monotone, kForwardSolveTol, FieldUnits::intensity);
  for (int i = 0; i < omega1.node_count(); ++i)
    u.values[i] = std::max(u.values[i], 0.1 * u_floor.values[i]);

  ScalarField a_prev = a1;
  ScalarField a_cur = recover_coefficient(u, k2);
  detail::restrict_to_disk(a_cur, k2, omega_radius);

  TailResult result{ScalarField(omega1, FieldUnits::dimensionless), a1, 0, {}};
  for (int m = 2; m <= iteration_cap; ++m) {
    // correction step: solve for the update with homogeneous boundary data
    std::vector<double> load(omega1.nodes.size());
    for (int i = 0; i < omega1.node_count(); ++i)
      load[i] = (a_cur.values[i] - a_prev.values[i]) * u.values[i];
    EllipticProblem step;
    step.mesh = &omega1;
    step.reaction = &a_cur.values;
    step.lump_reaction = true;
    step.load = &load;
    for (int node : loop) step.dirichlet[node] = 0.0;
    const ScalarField w = solve_elliptic(step, kForwardSolveTol, FieldUnits::intensity);
    for (int i = 0; i < omega1.node_count(); ++i) u.values[i] += w.values[i];

    const double ratio = change_ratio(a_cur.values, a_prev.values);
    result.history.push_back(ratio);
    if (ratio <= eps) {
      result.iterations = m;
      for (int i = 0; i < omega1.node_count(); ++i) {
        if (!(u.values[i] > 0.0))
          throw PositivityError("stage2_refine: refined intensity non-positive at node " +
                                std::to_string(i));
        result.T.values[i] = std::log(u.values[i]) / (s_bar * s_bar);
      }
      return result;
    }
    a_prev = a_cur;
    a_cur = recover_coefficient(u, k2);
    detail::restrict_to_disk(a_cur, k2, omega_radius);
  }
  std::string hist;
  for (double r : result.history) hist += " " + std::to_string(r);
  throw NonConvergenceError("stage2_refine: no convergence within " +
                                std::to_string(iteration_cap) + " iterations; ratios:" + hist,
                            result.history.empty() ? 0.0 : result.history.back(), iteration_cap);
}

}  // namespace dotrecon
