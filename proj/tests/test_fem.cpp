#include "dotrecon/fem.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "dotrecon/mesh.hpp"
#include "support/oracles.hpp"

using namespace dotrecon;

namespace {

std::map<int, double> dirichlet_from(const Mesh& mesh, const std::function<double(Vec2)>& g) {
  std::map<int, double> d;
  for (int i = 0; i < mesh.node_count(); ++i)
    if (mesh.boundary_tags[i] != BoundaryTag::interior) d[i] = g(mesh.nodes[i]);
  return d;
}

double l2_error(const Mesh& mesh, const std::vector<double>& v,
                const std::function<double(Vec2)>& exact) {
  double err = 0.0, norm = 0.0;
  const auto areas = mesh.lumped_areas();
  for (int i = 0; i < mesh.node_count(); ++i) {
    const double e = v[i] - exact(mesh.nodes[i]);
    err += areas[i] * e * e;
    norm += areas[i] * exact(mesh.nodes[i]) * exact(mesh.nodes[i]);
  }
  return std::sqrt(err / norm);
}

}  // namespace

TEST(Assemble, PatchTestAffineExact) {
  const Mesh mesh = build_mesh(DomainSpec::square(5.83), 0.6);
  auto g = [](Vec2 p) { return 3.0 * p.x - 2.0 * p.z + 1.0; };
  EllipticProblem p;
  p.mesh = &mesh;
  p.dirichlet = dirichlet_from(mesh, g);
  const ScalarField u = solve_elliptic(p, 1e-13, FieldUnits::dimensionless);
  for (int i = 0; i < mesh.node_count(); ++i) EXPECT_NEAR(u.values[i], g(mesh.nodes[i]), 1e-10);
}

TEST(Assemble, ManufacturedSolutionSecondOrder) {
  // c = 1, u* = sin(pi x / 10) sin(pi z / 10), f = laplacian(u*) - u*
  auto exact = [](Vec2 p) { return std::sin(M_PI * p.x / 10.0) * std::sin(M_PI * p.z / 10.0); };
  auto run = [&](double h) {
    const Mesh mesh = build_mesh(DomainSpec::square(5.83), h);
    std::vector<double> c(mesh.nodes.size(), 1.0), f(mesh.nodes.size());
    const double factor = -(2.0 * M_PI * M_PI / 100.0 + 1.0);
    for (int i = 0; i < mesh.node_count(); ++i) f[i] = factor * exact(mesh.nodes[i]);
    EllipticProblem p;
    p.mesh = &mesh;
    p.reaction = &c;
    p.load = &f;
    p.dirichlet = dirichlet_from(mesh, exact);
    const ScalarField u = solve_elliptic(p, 1e-10, FieldUnits::dimensionless);
    return l2_error(mesh, u.values, exact);
  };
  const double e1 = run(0.5), e2 = run(0.25);
  EXPECT_LT(e2, e1 / 3.0);  // O(h^2)
  EXPECT_LT(e1, 0.01);
}

TEST(Assemble, SymmetryFlagAndEntrywiseSymmetry) {
  const Mesh mesh = build_mesh(DomainSpec::square(2.0), 0.25);
  std::vector<double> c(mesh.nodes.size(), 0.7);
  EllipticProblem p;
  p.mesh = &mesh;
  p.reaction = &c;
  p.dirichlet = dirichlet_from(mesh, [](Vec2) { return 0.0; });
  SparseSystem sys = assemble(p);
  EXPECT_TRUE(sys.symmetric);

  // entrywise symmetry check via coordinate lookup
  std::map<std::pair<int, int>, double> entries;
  for (int i = 0; i < sys.dimension; ++i)
    for (int k = sys.row_ptr[i]; k < sys.row_ptr[i + 1]; ++k) entries[{i, sys.col_idx[k]}] = sys.values[k];
  for (const auto& [ij, v] : entries) {
    const auto it = entries.find({ij.second, ij.first});
    ASSERT_NE(it, entries.end());
    EXPECT_NEAR(v, it->second, 1e-14 * std::max(1.0, std::abs(v)));
  }

  std::vector<Vec2> b(mesh.triangles.size(), Vec2{0.4, -0.3});
  p.convection = &b;
  EXPECT_FALSE(assemble(p).symmetric);
}

TEST(Solve, IdentityReturnsRhs) {
  SparseSystem sys;
  sys.dimension = 4;
  sys.row_ptr = {0, 1, 2, 3, 4};
  sys.col_idx = {0, 1, 2, 3};
  sys.values = {1.0, 1.0, 1.0, 1.0};
  sys.rhs = {2.0, -1.0, 0.5, 3.25};
  sys.symmetric = true;
  sys.free_nodes = {0, 1, 2, 3};
  sys.constrained_values.assign(4, 0.0);
  const auto x = solve(sys, 1e-10);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(x[i], sys.rhs[i], 1e-12);
}

TEST(Solve, MatchesDenseFactorizationOnTinyPoisson) {
  const Mesh mesh = build_mesh(DomainSpec::square(1.0), 2.0 / 6.0);  // small structured grid
  std::vector<double> f(mesh.nodes.size(), -1.0);
  EllipticProblem p;
  p.mesh = &mesh;
  p.load = &f;
  p.dirichlet = dirichlet_from(mesh, [](Vec2) { return 0.0; });
  const SparseSystem sys = assemble(p);
  const auto x = solve(sys, 1e-12);

  std::vector<std::vector<double>> dense(sys.dimension, std::vector<double>(sys.dimension, 0.0));
  for (int i = 0; i < sys.dimension; ++i)
    for (int k = sys.row_ptr[i]; k < sys.row_ptr[i + 1]; ++k) dense[i][sys.col_idx[k]] = sys.values[k];
  const auto ref = oracles::dense_solve(dense, sys.rhs);
  for (int i = 0; i < sys.dimension; ++i) EXPECT_NEAR(x[i], ref[i], 1e-8);
}

TEST(Solve, DiscreteMaximumPrinciple) {
  // c >= 0, b = 0, f <= 0, boundary >= 0  =>  solution >= 0
  const Mesh mesh = build_mesh(DomainSpec::square(2.0), 0.2);
  std::vector<double> c(mesh.nodes.size(), 1.0), f(mesh.nodes.size(), -1.0);
  EllipticProblem p;
  p.mesh = &mesh;
  p.reaction = &c;
  p.load = &f;
  p.dirichlet = dirichlet_from(mesh, [](Vec2 q) { return q.x > 0 ? 0.3 : 0.0; });
  const ScalarField u = solve_elliptic(p, 1e-10, FieldUnits::dimensionless);
  for (double v : u.values) EXPECT_GE(v, -1e-12);
}

TEST(Solve, ToleranceValidationAndReporting) {
  const Mesh mesh = build_mesh(DomainSpec::square(1.0), 0.1);
  std::vector<double> f(mesh.nodes.size(), 1.0);
  EllipticProblem p;
  p.mesh = &mesh;
  p.load = &f;
  p.dirichlet = dirichlet_from(mesh, [](Vec2) { return 0.0; });
  const SparseSystem sys = assemble(p);
  EXPECT_THROW(solve(sys, 1e-3), ValidationError);
  EXPECT_THROW(solve(sys, 0.0), ValidationError);
  SolveInfo info;
  solve(sys, 1e-8, &info);
  EXPECT_LE(info.residual, 1e-8);
  EXPECT_GT(info.iterations, 0);
}

TEST(Assemble, LinearInLoadAndDirichlet) {
  const Mesh mesh = build_mesh(DomainSpec::square(1.0), 0.2);
  std::vector<double> f1(mesh.nodes.size()), f2(mesh.nodes.size()), fsum(mesh.nodes.size());
  for (int i = 0; i < mesh.node_count(); ++i) {
    f1[i] = std::sin(2.0 * mesh.nodes[i].x);
    f2[i] = mesh.nodes[i].z;
    fsum[i] = f1[i] + 2.0 * f2[i];
  }
  auto rhs_for = [&](const std::vector<double>& f, double gscale) {
    EllipticProblem p;
    p.mesh = &mesh;
    p.load = &f;
    p.dirichlet = dirichlet_from(mesh, [&](Vec2 q) { return gscale * q.x; });
    return assemble(p).rhs;
  };
  const auto r1 = rhs_for(f1, 1.0);
  const auto r2 = rhs_for(f2, 0.0);
  const auto rs = rhs_for(fsum, 1.0);
  for (std::size_t i = 0; i < rs.size(); ++i) EXPECT_NEAR(rs[i], r1[i] + 2.0 * r2[i], 1e-13);
}

TEST(Assemble, RejectsBadInput) {
  const Mesh mesh = build_mesh(DomainSpec::square(1.0), 0.2);
  std::vector<double> short_c(3, 1.0);
  EllipticProblem p;
  p.mesh = &mesh;
  p.reaction = &short_c;
  p.dirichlet = dirichlet_from(mesh, [](Vec2) { return 0.0; });
  EXPECT_THROW(assemble(p), ValidationError);

  std::vector<double> bad_c(mesh.nodes.size(), 1.0);
  bad_c[5] = std::nan("");
  p.reaction = &bad_c;
  EXPECT_THROW(assemble(p), ValidationError);

  std::vector<double> ok(mesh.nodes.size(), 1.0);
  p.reaction = &ok;
  p.dirichlet.clear();  // boundary uncovered
  EXPECT_THROW(assemble(p), ValidationError);
}

TEST(Scaling, SymmetricScalingRoundTrip) {
  const Mesh mesh = build_mesh(DomainSpec::square(1.0), 0.2);
  std::vector<double> f(mesh.nodes.size(), 1.0);
  EllipticProblem p;
  p.mesh = &mesh;
  p.load = &f;
  p.dirichlet = dirichlet_from(mesh, [](Vec2 q) { return 0.1 * q.x; });
  const SparseSystem plain = assemble(p);
  const auto x_plain = solve(plain, 1e-10);

  SparseSystem scaled = assemble(p);
  std::vector<double> d(mesh.nodes.size());
  for (int i = 0; i < mesh.node_count(); ++i) d[i] = std::exp(-0.8 * mesh.nodes[i].x);
  apply_symmetric_scaling(scaled, d);
  auto y = solve(scaled, 1e-10);
  unscale_solution(y, scaled, d);
  for (int i = 0; i < plain.dimension; ++i) EXPECT_NEAR(y[i], x_plain[i], 1e-8 * std::max(1.0, std::abs(x_plain[i])));
}
