#include "dotrecon/tail.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "dotrecon/forward.hpp"
#include "dotrecon/scenes.hpp"

using namespace dotrecon;

namespace {

constexpr double kK2 = 2.403;
const double kK = std::sqrt(kK2);

struct Fixture {
  Mesh omega0 = build_mesh(DomainSpec::square(23.32), 0.6);
  Mesh annulus = build_mesh(DomainSpec::square_minus_disk(23.32, 4.63), 0.6);
  Mesh omega1 = build_mesh(DomainSpec::square(5.83), 0.23);
  Mesh disk = build_mesh(DomainSpec::disk(4.63), 0.23);
  std::vector<Vec2> sample_positions;
  SourceLayout layout = SourceLayout::default_layout();

  Fixture() {
    for (int i : boundary_nodes(disk, BoundaryTag::outer)) sample_positions.push_back(disk.nodes[i]);
  }

  MeasurementSet smoothed(const PhantomScene& scene, double noise, std::uint64_t seed) const {
    const MeasurementSet raw = synthesize_measurements(build_scene(scene, omega0), layout.sources,
                                                       sample_positions, noise, seed, kK2);
    return smooth_to_omega1(raw, kK2, annulus, omega1);
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

TEST(Stage1Tail, HomogeneousSceneRecoversBackgroundAndTail) {
  auto& f = fixture();
  const MeasurementSet sm = f.smoothed(PhantomScene{}, 0.0, 7);
  const Stage1Result r = stage1_tail(sm, f.layout, kK2, f.omega1, f.omega0);

  double max_rel = 0.0;
  for (int i = 0; i < f.omega1.node_count(); ++i)
    max_rel = std::max(max_rel, std::abs(r.a1.values[i] - kK2) / kK2);
  EXPECT_LE(max_rel, 0.01);

  // T1 vs the analytic tail s_bar^-2 ln u0
  const double s_bar = f.layout.s_bar();
  double max_tail_rel = 0.0;
  for (int i = 0; i < f.omega1.node_count(); ++i) {
    const double exact =
        std::log(fundamental_solution(f.omega1.nodes[i], {20.0, 0.0}, kK)) / (s_bar * s_bar);
    max_tail_rel = std::max(max_tail_rel, std::abs(r.T1.values[i] - exact) / std::abs(exact));
  }
  EXPECT_LE(max_tail_rel, 0.02);
}

TEST(Stage1Tail, LocalizesAnInclusion) {
  auto& f = fixture();
  PhantomScene scene;
  scene.inclusions.push_back({{0.0, 1.5}, 2.5, 3.0});
  const MeasurementSet sm = f.smoothed(scene, 0.0, 7);
  const Stage1Result r = stage1_tail(sm, f.layout, kK2, f.omega1, f.omega0);

  Vec2 argmax{};
  double best = -1.0;
  for (int i = 0; i < f.omega1.node_count(); ++i)
    if (r.a1.values[i] > best) {
      best = r.a1.values[i];
      argmax = f.omega1.nodes[i];
    }
  EXPECT_GT(best, kK2 * 1.2) << "stage 1 must see the inclusion";
  EXPECT_LE(dist(argmax, {0.0, 1.5}), 2.0);
}

TEST(Stage1Tail, ScaledDataGiveSameCoefficient) {
  auto& f = fixture();
  PhantomScene scene;
  scene.inclusions.push_back({{0.0, 1.5}, 2.5, 2.0});
  MeasurementSet sm = f.smoothed(scene, 0.0, 7);
  const Stage1Result r1 = stage1_tail(sm, f.layout, kK2, f.omega1, f.omega0);
  sm.scale(37.0);
  const Stage1Result r2 = stage1_tail(sm, f.layout, kK2, f.omega1, f.omega0);
  for (int i = 0; i < f.omega1.node_count(); ++i)
    EXPECT_NEAR(r2.a1.values[i], r1.a1.values[i], 1e-6 * r1.a1.values[i]);
}

TEST(Stage1Tail, SourcePermutationInvariance) {
  // Averaging over the tail sources is symmetric: feeding the traces in a
  // different order (ids fixed, set identical) changes nothing.
  auto& f = fixture();
  const MeasurementSet sm = f.smoothed(PhantomScene{}, 0.02, 11);
  MeasurementSet reordered = sm;
  std::swap(reordered.traces[0], reordered.traces[5]);
  std::sort(reordered.traces.begin(), reordered.traces.end(),
            [](const SourceTrace& a, const SourceTrace& b) { return a.source_id < b.source_id; });
  const Stage1Result r1 = stage1_tail(sm, f.layout, kK2, f.omega1, f.omega0);
  const Stage1Result r2 = stage1_tail(reordered, f.layout, kK2, f.omega1, f.omega0);
  for (int i = 0; i < f.omega1.node_count(); ++i)
    EXPECT_EQ(r1.a1.values[i], r2.a1.values[i]);
}

TEST(Stage1Tail, PaperFormulaVariantTripsValidityCheck) {
  // The printed inversion formula shifts p_infinity by -ln(4S), violating
  // 1 + p_infinity > 0 for the experiment geometry.
  auto& f = fixture();
  const MeasurementSet sm = f.smoothed(PhantomScene{}, 0.0, 7);
  EXPECT_THROW(stage1_tail(sm, f.layout, kK2, f.omega1, f.omega0, kOmegaRadius, TailFormula::paper),
               NumericError);
}

TEST(Stage2Refine, HomogeneousStopsImmediately) {
  auto& f = fixture();
  const MeasurementSet sm = f.smoothed(PhantomScene{}, 0.0, 7);
  const Stage1Result s1 = stage1_tail(sm, f.layout, kK2, f.omega1, f.omega0);
  const SourceTrace* far_trace = sm.find_trace_by_distance(f.layout.s_bar());
  ASSERT_NE(far_trace, nullptr);

  ScalarField a1(f.omega1, FieldUnits::coefficient, kK2);  // exact background start
  const TailResult r = stage2_refine(s1.T1, a1, *far_trace, 1e-5, kK2, f.layout.s_bar());
  EXPECT_LE(r.iterations, 2);
  ASSERT_FALSE(r.history.empty());
  EXPECT_LE(r.history.back(), 1e-5);

  double max_rel = 0.0;
  for (int i = 0; i < f.omega1.node_count(); ++i)
    max_rel = std::max(max_rel, std::abs(r.T.values[i] - s1.T1.values[i]) /
                                    std::abs(s1.T1.values[i]));
  EXPECT_LE(max_rel, 0.01);
}

TEST(Stage2Refine, ConvergesOnInclusionScene) {
  auto& f = fixture();
  PhantomScene scene;
  scene.inclusions.push_back({{0.0, 1.5}, 2.5, 3.0});
  const MeasurementSet sm = f.smoothed(scene, 0.0, 7);
  const Stage1Result s1 = stage1_tail(sm, f.layout, kK2, f.omega1, f.omega0);
  const SourceTrace* far_trace = sm.find_trace_by_distance(f.layout.s_bar());
  const TailResult r = stage2_refine(s1.T1, s1.a1, *far_trace, 1e-5, kK2, f.layout.s_bar());
  EXPECT_GE(r.iterations, 2);
  EXPECT_LE(r.history.back(), 1e-5);
  for (double ratio : r.history) EXPECT_TRUE(std::isfinite(ratio));
  for (double t : r.T.values) EXPECT_TRUE(std::isfinite(t));
}

TEST(Stage2Refine, ValidatesEps) {
  auto& f = fixture();
  ScalarField a1(f.omega1, FieldUnits::coefficient, kK2);
  ScalarField t1(f.omega1, FieldUnits::dimensionless);
  SourceTrace dummy;
  EXPECT_THROW(stage2_refine(t1, a1, dummy, 0.0, kK2, 20.0), ValidationError);
  EXPECT_THROW(stage2_refine(t1, a1, dummy, 0.5, kK2, 20.0), ValidationError);
}
