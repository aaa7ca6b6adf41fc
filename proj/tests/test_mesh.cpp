#include "dotrecon/mesh.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "dotrecon/field_io.hpp"

using namespace dotrecon;

TEST(BuildMesh, StructuredSquareCounts) {
  // half-width 5.83 with target_h = 0.583 gives a 20 x 20 grid
  const Mesh m = build_mesh(DomainSpec::square(5.83), 0.583);
  EXPECT_EQ(m.node_count(), 441);
  EXPECT_EQ(m.triangle_count(), 800);
  for (double a : m.tri_area) EXPECT_GT(a, 0.0);
}

TEST(BuildMesh, DiskAreaSum) {
  const Mesh m = build_mesh(DomainSpec::disk(4.63), 0.5);
  double area = 0.0;
  for (double a : m.tri_area) {
    EXPECT_GT(a, 0.0);
    area += a;
  }
  const double exact = M_PI * 4.63 * 4.63;
  EXPECT_NEAR(area, exact, 0.02 * exact);
}

TEST(BuildMesh, MaxEdgeLengthBound) {
  for (const Mesh& m : {build_mesh(DomainSpec::square(5.83), 0.3), build_mesh(DomainSpec::disk(4.63), 0.4)}) {
    double max_edge = 0.0;
    for (const auto& tri : m.triangles)
      for (int e = 0; e < 3; ++e)
        max_edge = std::max(max_edge, dist(m.nodes[tri[e]], m.nodes[tri[(e + 1) % 3]]));
    EXPECT_LE(max_edge, 1.5 * m.h_mesh);
  }
}

TEST(BuildMesh, RefinementGrowsNodeCount) {
  for (double w : {5.83, 23.32}) {
    const Mesh coarse = build_mesh(DomainSpec::square(w), w / 10.0);
    const Mesh fine = build_mesh(DomainSpec::square(w), w / 20.0);
    EXPECT_GE(fine.node_count(), 3 * coarse.node_count());
  }
}

TEST(BuildMesh, Errors) {
  EXPECT_THROW(build_mesh(DomainSpec::square(5.83), 2.5), ValidationError);  // too coarse
  EXPECT_THROW(build_mesh(DomainSpec::square(5.83), -1.0), ValidationError);
  EXPECT_THROW(DomainSpec::disk(0.0), ValidationError);
  EXPECT_THROW(DomainSpec::square_minus_disk(4.0, 5.0), ValidationError);
}

TEST(BuildMesh, AnnulusGeometry) {
  const Mesh m = build_mesh(DomainSpec::square_minus_disk(23.32, 4.63), 0.6);
  int inner = 0, outer = 0;
  for (int i = 0; i < m.node_count(); ++i) {
    // no node may lie strictly inside the disk
    EXPECT_GE(norm(m.nodes[i]), 4.63 - 1e-9);
    if (m.boundary_tags[i] == BoundaryTag::inner) {
      EXPECT_NEAR(norm(m.nodes[i]), 4.63, 1e-12);
      ++inner;
    }
    if (m.boundary_tags[i] == BoundaryTag::outer) ++outer;
  }
  EXPECT_GT(inner, 8);
  EXPECT_GT(outer, 8);
  for (double a : m.tri_area) EXPECT_GT(a, 0.0);
}

TEST(BoundaryNodes, SquareLoop) {
  const Mesh m = build_mesh(DomainSpec::square(5.83), 0.583);  // n = 20
  const auto loop = boundary_nodes(m, BoundaryTag::outer);
  EXPECT_EQ(loop.size(), 80u);  // 4n
  // simple loop: no repeated nodes
  const std::set<int> unique(loop.begin(), loop.end());
  EXPECT_EQ(unique.size(), loop.size());
  // counterclockwise: positive enclosed area
  double twice_area = 0.0;
  for (std::size_t i = 0; i < loop.size(); ++i)
    twice_area += cross(m.nodes[loop[i]], m.nodes[loop[(i + 1) % loop.size()]]);
  EXPECT_GT(twice_area, 0.0);
}

TEST(BoundaryNodes, DiskLoopClosedAndEdgeConnected) {
  const Mesh m = build_mesh(DomainSpec::disk(4.63), 0.5);
  const auto loop = boundary_nodes(m, BoundaryTag::outer);
  ASSERT_GT(loop.size(), 3u);
  std::set<std::pair<int, int>> edges;
  for (const auto& tri : m.triangles)
    for (int e = 0; e < 3; ++e) {
      const auto key = std::minmax(tri[e], tri[(e + 1) % 3]);
      edges.insert(key);
    }
  for (std::size_t i = 0; i < loop.size(); ++i) {
    const auto key = std::minmax(loop[i], loop[(i + 1) % loop.size()]);
    EXPECT_TRUE(edges.count(key)) << "consecutive loop nodes must share a mesh edge";
  }
}

TEST(BoundaryNodes, AnnulusHasBothLoops) {
  const Mesh m = build_mesh(DomainSpec::square_minus_disk(23.32, 4.63), 0.6);
  EXPECT_FALSE(boundary_nodes(m, BoundaryTag::outer).empty());
  EXPECT_FALSE(boundary_nodes(m, BoundaryTag::inner).empty());
  EXPECT_THROW(boundary_nodes(build_mesh(DomainSpec::square(5.83), 0.5), BoundaryTag::inner),
               ValidationError);
}

TEST(TransferField, ConstantAndLinearExact) {
  const Mesh src = build_mesh(DomainSpec::square(5.83), 0.5);
  const Mesh dst = build_mesh(DomainSpec::square(5.0), 0.37);
  ScalarField c(src, FieldUnits::coefficient, 2.403);
  const ScalarField ct = transfer_field(c, dst);
  for (double v : ct.values) EXPECT_DOUBLE_EQ(v, 2.403);

  ScalarField lin(src, FieldUnits::dimensionless);
  for (int i = 0; i < src.node_count(); ++i) lin.values[i] = src.nodes[i].x + src.nodes[i].z;
  const ScalarField lt = transfer_field(lin, dst);
  for (int i = 0; i < dst.node_count(); ++i)
    EXPECT_NEAR(lt.values[i], dst.nodes[i].x + dst.nodes[i].z, 1e-12);
}

TEST(TransferField, SmoothFieldSecondOrder) {
  const Mesh dst = build_mesh(DomainSpec::square(5.0), 0.31);
  auto run = [&](double h) {
    const Mesh src = build_mesh(DomainSpec::square(5.83), h);
    ScalarField f(src, FieldUnits::dimensionless);
    for (int i = 0; i < src.node_count(); ++i)
      f.values[i] = std::sin(src.nodes[i].x) * std::cos(src.nodes[i].z);
    const ScalarField t = transfer_field(f, dst);
    double err = 0.0;
    for (int i = 0; i < dst.node_count(); ++i)
      err = std::max(err, std::abs(t.values[i] - std::sin(dst.nodes[i].x) * std::cos(dst.nodes[i].z)));
    return err;
  };
  const double e1 = run(0.25), e2 = run(0.125);
  EXPECT_LT(e1, 0.02);  // P1 bound ~ h^2/8 * |D2 f|
  EXPECT_LT(e2, e1 / 2.5);  // close to the h^2 factor of 4
}

TEST(TransferField, IsLinearOperator) {
  const Mesh src = build_mesh(DomainSpec::square(5.83), 0.5);
  const Mesh dst = build_mesh(DomainSpec::square(5.0), 0.43);
  ScalarField f(src, FieldUnits::dimensionless), g(src, FieldUnits::dimensionless);
  for (int i = 0; i < src.node_count(); ++i) {
    f.values[i] = std::sin(0.7 * src.nodes[i].x);
    g.values[i] = std::cos(1.1 * src.nodes[i].z);
  }
  const double alpha = 2.25, beta = -0.75;
  ScalarField comb(src, FieldUnits::dimensionless);
  for (int i = 0; i < src.node_count(); ++i)
    comb.values[i] = alpha * f.values[i] + beta * g.values[i];
  const ScalarField tf = transfer_field(f, dst), tg = transfer_field(g, dst),
                    tc = transfer_field(comb, dst);
  for (int i = 0; i < dst.node_count(); ++i)
    EXPECT_NEAR(tc.values[i], alpha * tf.values[i] + beta * tg.values[i], 1e-13);
}

TEST(TransferField, OutOfDomainListsNode) {
  const Mesh src = build_mesh(DomainSpec::square(5.0), 0.5);
  const Mesh dst = build_mesh(DomainSpec::square(5.83), 0.5);
  ScalarField f(src, FieldUnits::dimensionless, 1.0);
  try {
    transfer_field(f, dst);
    FAIL() << "expected OutOfDomainError";
  } catch (const OutOfDomainError& e) {
    EXPECT_NE(std::string(e.what()).find("node"), std::string::npos);
  }
}

TEST(FieldIo, CsvRoundTrip) {
  const Mesh m = build_mesh(DomainSpec::square(2.0), 0.25);
  ScalarField f(m, FieldUnits::coefficient);
  for (int i = 0; i < m.node_count(); ++i) f.values[i] = 2.403 + 0.1 * std::sin(3.0 * m.nodes[i].x);
  const std::string path = "test_field_io.csv";
  field_to_csv(f, path);
  const FieldSamples s = read_field_csv(path);
  ASSERT_EQ(static_cast<int>(s.values.size()), m.node_count());
  for (int i = 0; i < m.node_count(); ++i) {
    EXPECT_EQ(s.points[i].x, m.nodes[i].x);
    EXPECT_EQ(s.values[i], f.values[i]);
  }
  std::remove(path.c_str());
}

TEST(FieldIo, PgmWritesSidecar) {
  const Mesh m = build_mesh(DomainSpec::disk(4.63), 0.5);
  ScalarField f(m, FieldUnits::coefficient);
  for (int i = 0; i < m.node_count(); ++i) f.values[i] = norm(m.nodes[i]);
  field_to_pgm(f, "test_field.pgm", 64);
  std::ifstream pgm("test_field.pgm", std::ios::binary);
  std::string magic;
  pgm >> magic;
  EXPECT_EQ(magic, "P5");
  std::ifstream side("test_field.pgm.meta");
  std::string line;
  bool has_min = false;
  while (std::getline(side, line))
    if (line.rfind("min=", 0) == 0) has_min = true;
  EXPECT_TRUE(has_min);
  std::remove("test_field.pgm");
  std::remove("test_field.pgm.meta");
}
