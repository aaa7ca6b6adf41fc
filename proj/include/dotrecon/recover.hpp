#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dotrecon/errors.hpp"
#include "dotrecon/mesh.hpp"

namespace dotrecon {

namespace detail {

/// integral over a triangle of lambda_1^a lambda_2^b lambda_3^c
/// = 2 Area a! b! c! / (a+b+c+2)!
inline double bary_monomial(double area, int a, int b, int c) {
  auto fact = [](int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
  };
  return 2.0 * area * fact(a) * fact(b) * fact(c) / fact(a + b + c + 2);
}

/// Symmetric positive definite PCG used for the recovery normal equations.
inline std::vector<double> spd_pcg(const std::vector<int>& row_ptr, const std::vector<int>& col_idx,
                                   const std::vector<double>& vals, const std::vector<double>& rhs,
                                   const std::vector<double>& diag, double tol, int cap) {
  const int n = static_cast<int>(rhs.size());
  std::vector<double> x(n, 0.0), r = rhs, z(n), p(n), q(n);
  double bnorm = 0.0;
  for (double v : rhs) bnorm += v * v;
  bnorm = std::sqrt(bnorm);
  if (bnorm == 0.0) return x;
  for (int i = 0; i < n; ++i) z[i] = r[i] / diag[i];
  p = z;
  double rz = 0.0;
  for (int i = 0; i < n; ++i) rz += r[i] * z[i];
  for (int it = 0; it < cap; ++it) {
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k) s += vals[k] * p[col_idx[k]];
      q[i] = s;
    }
    double pq = 0.0;
    for (int i = 0; i < n; ++i) pq += p[i] * q[i];
    if (!(pq > 0.0))
      throw NumericError("recover_coefficient: normal equations are numerically singular");
    const double alpha = rz / pq;
    double rn = 0.0;
    for (int i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
      rn += r[i] * r[i];
    }
    if (std::sqrt(rn) <= tol * bnorm) return x;
    for (int i = 0; i < n; ++i) z[i] = r[i] / diag[i];
    double rz_new = 0.0;
    for (int i = 0; i < n; ++i) rz_new += r[i] * z[i];
    const double beta = rz_new / rz;
    rz = rz_new;
    for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  throw NumericError("recover_coefficient: least-squares solve did not converge");
}

}  // namespace detail

/// Recovers the nodal coefficient a(x) from a positive field u through the
/// weak identity  -integral(grad u . grad eta) = integral(a u eta), tested
/// with the interior hat functions of the same P1 space that carries u. (A
/// higher-order test space would probe second derivatives the piecewise
/// linear data does not resolve.) Boundary nodes are pinned to the background
/// k2 — the imaged region lies strictly inside the recovery domain — which
/// removes the otherwise unconstrained boundary ring. The equations are
/// solved in regularized least squares (ridge weight 1e-8 relative to each
/// column's own scale, since u spans many decades) and the result is clamped
/// from below at k2.
inline ScalarField recover_coefficient(const ScalarField& u, double k2) {
  u.validate();
  const Mesh& mesh = *u.mesh;
  const int nn = mesh.node_count();
  for (int i = 0; i < nn; ++i)
    if (!(u.values[i] > 0.0))
      throw PositivityError("recover_coefficient: u must be positive (node " + std::to_string(i) +
                            ")");

  // Test rows and unknowns: interior vertices in node order.
  std::vector<int> vertex_row(nn, -1);
  int rows = 0;
  for (int i = 0; i < nn; ++i)
    if (mesh.boundary_tags[i] == BoundaryTag::interior) vertex_row[i] = rows++;

  // Sparse matrix M (rows = test hats, cols = interior vertices) and the
  // left-hand side L_p = -integral(grad u . grad eta_p) minus the pinned
  // boundary contribution.
  std::vector<std::map<int, double>> mat(rows);
  std::vector<double> lhs(rows, 0.0);

  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles[t];
    const double area = mesh.tri_area[t];
    const auto& g = mesh.tri_grad[t];
    const Vec2 grad_u = mesh.gradient(t, u.values);
    for (int li = 0; li < 3; ++li) {
      const int row = vertex_row[tri[li]];
      if (row < 0) continue;
      lhs[row] -= area * dot(grad_u, g[li]);
      // integral( lambda_v * u * lambda_li ), exact for P1 u.
      for (int lv = 0; lv < 3; ++lv) {
        double coeff = 0.0;
        for (int lw = 0; lw < 3; ++lw) {
          int e[3] = {0, 0, 0};
          e[lv]++;
          e[lw]++;
          e[li]++;
          coeff += u.values[tri[lw]] * detail::bary_monomial(area, e[0], e[1], e[2]);
        }
        const int col = vertex_row[tri[lv]];
        if (col >= 0)
          mat[row][col] += coeff;
        else
          lhs[row] -= coeff * k2;  // boundary value pinned to the background
      }
    }
  }

  // Normal equations with a per-column ridge: u (and with it the column
  // norms) spans many decades, and a single global weight would wipe out the
  // dim regions entirely.
  std::vector<std::map<int, double>> normal(rows);
  std::vector<double> nrhs(rows, 0.0);
  for (int r = 0; r < rows; ++r) {
    for (const auto& [cj, vj] : mat[r]) {
      nrhs[cj] += vj * lhs[r];
      for (const auto& [ck, vk] : mat[r]) normal[cj][ck] += vj * vk;
    }
  }
  std::vector<int> row_ptr(rows + 1, 0);
  for (int i = 0; i < rows; ++i) {
    double& d = normal[i][i];
    if (!(d > 0.0)) throw NumericError("recover_coefficient: degenerate system");
    d *= 1.0 + 1e-8;
    row_ptr[i + 1] = row_ptr[i] + static_cast<int>(normal[i].size());
  }
  std::vector<int> col_idx;
  std::vector<double> vals, diag(rows);
  col_idx.reserve(row_ptr[rows]);
  vals.reserve(row_ptr[rows]);
  for (int i = 0; i < rows; ++i) {
    for (const auto& [j, v] : normal[i]) {
      col_idx.push_back(j);
      vals.push_back(v);
      if (j == i) diag[i] = v;
    }
  }

  const std::vector<double> abar =
      detail::spd_pcg(row_ptr, col_idx, vals, nrhs, diag, 1e-12, 40 * rows + 1000);

  ScalarField a(mesh, FieldUnits::coefficient);
  for (int i = 0; i < nn; ++i) {
    const int col = vertex_row[i];
    a.values[i] = col >= 0 ? std::max(abar[col], k2) : k2;
  }
  return a;
}

}  // namespace dotrecon
