#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "dotrecon/errors.hpp"
#include "dotrecon/mesh.hpp"

namespace dotrecon {

/// Compressed-row sparse linear system restricted to unconstrained nodes.
struct SparseSystem {
  int dimension = 0;
  std::vector<int> row_ptr;
  std::vector<int> col_idx;
  std::vector<double> values;
  std::vector<double> rhs;
  bool symmetric = true;

  // Mapping back to mesh nodes: free index -> node, and the full nodal vector
  // pre-filled with Dirichlet values.
  std::vector<int> free_nodes;
  std::vector<double> constrained_values;

  void multiply(const std::vector<double>& x, std::vector<double>& y) const {
    for (int i = 0; i < dimension; ++i) {
      double s = 0.0;
      for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k) s += values[k] * x[col_idx[k]];
      y[i] = s;
    }
  }

  /// Expands a free-node solution into a full nodal vector (Dirichlet values
  /// restored exactly).
  std::vector<double> expand(const std::vector<double>& x) const {
    std::vector<double> full = constrained_values;
    for (int i = 0; i < dimension; ++i) full[free_nodes[i]] = x[i];
    return full;
  }
};

/// Data for  div(grad v) - c(x) v - b(x).grad v = f  with Dirichlet boundary
/// values. Optional extra right-hand-side functionals extend the weak form:
///   rhs(eta) += integral( flux_extra . grad eta ) + integral( tri_extra * eta ).
struct EllipticProblem {
  const Mesh* mesh = nullptr;
  const std::vector<double>* reaction = nullptr;    // nodal c, 1/mm^2
  const std::vector<Vec2>* convection = nullptr;    // per-triangle b, 1/mm
  const std::vector<double>* load = nullptr;        // nodal f (strong-form sign)
  const std::vector<double>* tri_extra = nullptr;   // per-triangle weak load
  const std::vector<Vec2>* flux_extra = nullptr;    // per-triangle weak flux load
  const std::map<int, double>* point_masses = nullptr;  // point-source descriptor: rhs_i += mass_i
  // Row-sum lumping of the reaction mass keeps the matrix an M-matrix on
  // non-obtuse meshes, so solutions with nonnegative data stay positive.
  bool lump_reaction = false;
  std::map<int, double> dirichlet;                  // node -> value

  void validate() const {
    if (!mesh) throw ValidationError("EllipticProblem: missing mesh");
    const std::size_t nn = mesh->nodes.size(), nt = mesh->triangles.size();
    auto check_nodal = [&](const std::vector<double>* v, const char* name) {
      if (!v) return;
      if (v->size() != nn) throw ValidationError(std::string("EllipticProblem: ") + name + " size mismatch");
      for (double x : *v)
        if (!std::isfinite(x)) throw ValidationError(std::string("EllipticProblem: non-finite ") + name);
    };
    check_nodal(reaction, "reaction");
    check_nodal(load, "load");
    if (convection && convection->size() != nt)
      throw ValidationError("EllipticProblem: convection size mismatch");
    if (tri_extra && tri_extra->size() != nt)
      throw ValidationError("EllipticProblem: tri_extra size mismatch");
    if (flux_extra && flux_extra->size() != nt)
      throw ValidationError("EllipticProblem: flux_extra size mismatch");
    for (std::size_t i = 0; i < nn; ++i)
      if (mesh->boundary_tags[i] != BoundaryTag::interior && !dirichlet.count(static_cast<int>(i)))
        throw ValidationError("EllipticProblem: boundary node " + std::to_string(i) +
                              " lacks Dirichlet data");
    for (const auto& [node, val] : dirichlet) {
      if (node < 0 || node >= static_cast<int>(nn))
        throw ValidationError("EllipticProblem: Dirichlet node out of range");
      if (!std::isfinite(val)) throw ValidationError("EllipticProblem: non-finite Dirichlet value");
    }
  }
};

/// Galerkin P1 assembly. Stiffness and mass terms use exact P1 quadrature;
/// the convection term uses the centroid rule, which is exact because P1
/// gradients are triangle-constant. Dirichlet rows are eliminated by
/// substitution into the right-hand side.
inline SparseSystem assemble(const EllipticProblem& p) {
  p.validate();
  const Mesh& mesh = *p.mesh;
  const int nn = mesh.node_count();

  std::vector<int> node_to_free(nn, -1);
  SparseSystem sys;
  sys.constrained_values.assign(nn, 0.0);
  for (int i = 0; i < nn; ++i) {
    auto it = p.dirichlet.find(i);
    if (it == p.dirichlet.end()) {
      node_to_free[i] = static_cast<int>(sys.free_nodes.size());
      sys.free_nodes.push_back(i);
    } else {
      sys.constrained_values[i] = it->second;
    }
  }
  sys.dimension = static_cast<int>(sys.free_nodes.size());
  sys.rhs.assign(sys.dimension, 0.0);

  bool has_convection = false;
  if (p.convection)
    for (const Vec2& b : *p.convection)
      if (b.x != 0.0 || b.z != 0.0) has_convection = true;
  sys.symmetric = !has_convection;

  std::vector<std::map<int, double>> rows(sys.dimension);
  auto add = [&](int node_i, int node_j, double v) {
    const int fi = node_to_free[node_i];
    if (fi < 0) return;  // constrained row dropped
    const int fj = node_to_free[node_j];
    if (fj >= 0)
      rows[fi][fj] += v;
    else
      sys.rhs[fi] -= v * sys.constrained_values[node_j];
  };

  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles[t];
    const double area = mesh.tri_area[t];
    const auto& g = mesh.tri_grad[t];
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        double v = area * dot(g[i], g[j]);  // stiffness
        if (p.reaction) {
          // integral( c * lambda_i * lambda_j ) with nodal P1 c, exact.
          const double ci = (*p.reaction)[tri[i]], cj = (*p.reaction)[tri[j]];
          const double c1 = (*p.reaction)[tri[(i + 1) % 3]];
          const double c2 = (*p.reaction)[tri[(i + 2) % 3]];
          if (p.lump_reaction) {
            if (i == j) v += area * (2.0 * ci + c1 + c2) / 12.0;  // row-sum lumping
          } else if (i == j) {
            v += area * (ci / 10.0 + (c1 + c2) / 30.0);
          } else {
            const double ck = (*p.reaction)[tri[3 - i - j]];
            v += area * ((ci + cj) / 30.0 + ck / 60.0);
          }
        }
        if (p.convection) {
          const Vec2 b = (*p.convection)[t];
          if (b.x != 0.0 || b.z != 0.0) v += dot(b, g[j]) * area / 3.0;
        }
        add(tri[i], tri[j], v);
      }
      const int fi = node_to_free[tri[i]];
      if (fi < 0) continue;
      if (p.load) {
        const double f0 = (*p.load)[tri[i]], f1 = (*p.load)[tri[(i + 1) % 3]],
                     f2 = (*p.load)[tri[(i + 2) % 3]];
        sys.rhs[fi] -= area * (2.0 * f0 + f1 + f2) / 12.0;
      }
      if (p.tri_extra) sys.rhs[fi] += (*p.tri_extra)[t] * area / 3.0;
      if (p.flux_extra) sys.rhs[fi] += dot((*p.flux_extra)[t], g[i]) * area;
    }
  }
  if (p.point_masses) {
    for (const auto& [node, mass] : *p.point_masses) {
      const int fi = node_to_free[node];
      if (fi >= 0) sys.rhs[fi] += mass;
    }
  }

  sys.row_ptr.assign(sys.dimension + 1, 0);
  for (int i = 0; i < sys.dimension; ++i) sys.row_ptr[i + 1] = sys.row_ptr[i] + static_cast<int>(rows[i].size());
  sys.col_idx.reserve(sys.row_ptr.back());
  sys.values.reserve(sys.row_ptr.back());
  for (int i = 0; i < sys.dimension; ++i) {
    for (const auto& [j, v] : rows[i]) {
      sys.col_idx.push_back(j);
      sys.values.push_back(v);
    }
  }
  return sys;
}

struct SolveInfo {
  int iterations = 0;
  double residual = 0.0;
};

/// Symmetric change of unknowns x = D y with D = diag(node_scale): the system
/// becomes (D A D) y = D b. Used when the solution spans many decades (point
/// sources), so that rounding stays relative to each node's magnitude.
inline void apply_symmetric_scaling(SparseSystem& sys, const std::vector<double>& node_scale) {
  for (int i = 0; i < sys.dimension; ++i) {
    const double di = node_scale[sys.free_nodes[i]];
    if (!(di > 0.0) || !std::isfinite(di))
      throw ValidationError("apply_symmetric_scaling: scales must be positive and finite");
    sys.rhs[i] *= di;
    for (int k = sys.row_ptr[i]; k < sys.row_ptr[i + 1]; ++k)
      sys.values[k] *= di * node_scale[sys.free_nodes[sys.col_idx[k]]];
  }
}

inline void unscale_solution(std::vector<double>& x, const SparseSystem& sys,
                             const std::vector<double>& node_scale) {
  for (int i = 0; i < sys.dimension; ++i) x[i] *= node_scale[sys.free_nodes[i]];
}

namespace detail {

inline std::vector<double> jacobi_diagonal(const SparseSystem& s) {
  std::vector<double> d(s.dimension, 1.0);
  for (int i = 0; i < s.dimension; ++i)
    for (int k = s.row_ptr[i]; k < s.row_ptr[i + 1]; ++k)
      if (s.col_idx[k] == i && s.values[k] != 0.0) d[i] = s.values[k];
  return d;
}

inline double dot_v(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm_v(const std::vector<double>& a) { return std::sqrt(dot_v(a, a)); }

inline std::vector<double> cg(const SparseSystem& s, double tol, SolveInfo* info) {
  const int n = s.dimension;
  const double bnorm = norm_v(s.rhs);
  std::vector<double> x(n, 0.0);
  if (bnorm == 0.0) {
    if (info) *info = {0, 0.0};
    return x;
  }
  const auto diag = jacobi_diagonal(s);
  std::vector<double> r = s.rhs, z(n), q(n);
  for (int i = 0; i < n; ++i) z[i] = r[i] / diag[i];
  std::vector<double> p = z;
  double rz = dot_v(r, z);
  const int cap = 10 * n;
  for (int it = 1; it <= cap; ++it) {
    s.multiply(p, q);
    const double pq = dot_v(p, q);
    if (pq == 0.0) throw NonConvergenceError("cg: breakdown (p'Ap = 0)", norm_v(r) / bnorm, it);
    const double alpha = rz / pq;
    for (int i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    const double res = norm_v(r) / bnorm;
    if (res <= tol) {
      if (info) *info = {it, res};
      return x;
    }
    for (int i = 0; i < n; ++i) z[i] = r[i] / diag[i];
    const double rz_new = dot_v(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  throw NonConvergenceError("cg: iteration cap reached", norm_v(r) / bnorm, cap);
}

inline std::vector<double> bicgstab(const SparseSystem& s, double tol, SolveInfo* info) {
  const int n = s.dimension;
  const double bnorm = norm_v(s.rhs);
  std::vector<double> x(n, 0.0);
  if (bnorm == 0.0) {
    if (info) *info = {0, 0.0};
    return x;
  }
  const auto diag = jacobi_diagonal(s);
  std::vector<double> r = s.rhs;
  const std::vector<double> r0 = r;
  std::vector<double> p(n, 0.0), v(n, 0.0), phat(n), shat(n), t(n), sv(n);
  double rho = 1.0, alpha = 1.0, omega = 1.0;
  const int cap = 10 * n;
  for (int it = 1; it <= cap; ++it) {
    const double rho_new = dot_v(r0, r);
    if (rho_new == 0.0) throw NonConvergenceError("bicgstab: rho breakdown", norm_v(r) / bnorm, it);
    if (it == 1) {
      p = r;
    } else {
      const double beta = (rho_new / rho) * (alpha / omega);
      for (int i = 0; i < n; ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
    }
    rho = rho_new;
    for (int i = 0; i < n; ++i) phat[i] = p[i] / diag[i];
    s.multiply(phat, v);
    const double r0v = dot_v(r0, v);
    if (r0v == 0.0) throw NonConvergenceError("bicgstab: alpha breakdown", norm_v(r) / bnorm, it);
    alpha = rho / r0v;
    for (int i = 0; i < n; ++i) sv[i] = r[i] - alpha * v[i];
    if (norm_v(sv) / bnorm <= tol) {
      for (int i = 0; i < n; ++i) x[i] += alpha * phat[i];
      if (info) *info = {it, norm_v(sv) / bnorm};
      return x;
    }
    for (int i = 0; i < n; ++i) shat[i] = sv[i] / diag[i];
    s.multiply(shat, t);
    const double tt = dot_v(t, t);
    if (tt == 0.0) throw NonConvergenceError("bicgstab: omega breakdown", norm_v(sv) / bnorm, it);
    omega = dot_v(t, sv) / tt;
    if (omega == 0.0) throw NonConvergenceError("bicgstab: omega = 0", norm_v(sv) / bnorm, it);
    for (int i = 0; i < n; ++i) {
      x[i] += alpha * phat[i] + omega * shat[i];
      r[i] = sv[i] - omega * t[i];
    }
    const double res = norm_v(r) / bnorm;
    if (res <= tol) {
      if (info) *info = {it, res};
      return x;
    }
  }
  throw NonConvergenceError("bicgstab: iteration cap reached", norm_v(r) / bnorm, cap);
}

}  // namespace detail

/// Solves the assembled system to the requested relative residual. Symmetric
/// systems use diagonally preconditioned conjugate gradients, non-symmetric
/// ones BiCGStab. Deterministic for fixed inputs.
inline std::vector<double> solve(const SparseSystem& sys, double tol, SolveInfo* info = nullptr) {
  if (!(tol > 0.0) || tol > 1e-4) throw ValidationError("solve: tol must lie in (0, 1e-4]");
  return sys.symmetric ? detail::cg(sys, tol, info) : detail::bicgstab(sys, tol, info);
}

/// Assembles, solves, and expands back to a full nodal field. An optional
/// per-node magnitude estimate turns on the symmetric scaling.
inline ScalarField solve_elliptic(const EllipticProblem& p, double tol, FieldUnits units,
                                  SolveInfo* info = nullptr,
                                  const std::vector<double>* node_scale = nullptr) {
  SparseSystem sys = assemble(p);
  std::vector<double> x;
  if (node_scale) {
    apply_symmetric_scaling(sys, *node_scale);
    x = solve(sys, tol, info);
    unscale_solution(x, sys, *node_scale);
  } else {
    x = solve(sys, tol, info);
  }
  ScalarField out(*p.mesh, units);
  out.values = sys.expand(x);
  return out;
}

}  // namespace dotrecon
