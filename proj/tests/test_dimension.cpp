#include <catch2/catch_amalgamated.hpp>

#include "annulab/dimension.hpp"
#include "annulab/rng.hpp"
#include "support.hpp"

using namespace annulab;
using annulab::testing::theorem2_params;
using annulab::testing::theorem3_params;
using annulab::testing::toy_tree;

TEST_CASE("mass envelope holds on built trees, zero violations") {
  MeasureTree t2 = build_measure(theorem2_params());
  auto r2 = mass_envelope_check(t2);
  CHECK(r2.checked > 0);
  CHECK(r2.ok());
  MeasureTree t3 = build_measure(theorem3_params());
  auto r3 = mass_envelope_check(t3);
  CHECK(r3.ok());
}

TEST_CASE("a corrupted mass is flagged exactly once") {
  MeasureTree tree = build_measure(theorem2_params(60));
  // push one stored mass below the lower envelope at one generation
  Segment& victim = tree.segments.at(2);
  long idx = 3;
  long gen = victim.birth + idx;
  Rat low_bound = victim.masses.at(idx);
  // replace by something far below c_d^{-2} 2^{-n du}
  victim.masses.at(idx) = low_bound * pow2(-200);
  auto report = mass_envelope_check(tree);
  REQUIRE(report.violations.size() == 1);
  CHECK(report.violations[0].segment == 2);
  CHECK(report.violations[0].gen == gen);
  CHECK(report.violations[0].side == "lower");
  // and the refinement checker notices the inconsistency too
  CHECK(!check_refinement(tree).empty());
}

TEST_CASE("subsequence witnesses on the theorem-2 tree") {
  MeasureTree tree = build_measure(theorem2_params());
  SplitMix64 rng(5);
  auto steps = tree.b_steps();
  long psi1 = steps[0]->psi;  // 38
  for (int trial = 0; trial < 4; ++trial) {
    CentralSample s = sample_central_point(tree, 1, rng);
    auto w = subsequence_witnesses(tree, s.x, 45);
    CHECK(!w.upper.empty());
    CHECK(!w.lower.empty());
    // a d_lower witness at the B-step scale psi(m) for central lineages
    CHECK(std::find(w.lower.begin(), w.lower.end(), psi1) != w.lower.end());
    // an upper witness during the first A phase
    bool early_upper = false;
    for (long g : w.upper) early_upper = early_upper || g <= 14;
    CHECK(early_upper);
  }
  // border lineage: d_lower witness at psi(m) too (eqm' band)
  int border_seg = -1;
  for (const auto& s : tree.segments)
    if (s.tag == SegmentTag::BORDER && s.b_step == tree.b_steps()[0]->index) border_seg = s.id;
  REQUIRE(border_seg >= 0);
  CubeIndex fc = sample_segment_cube(tree, border_seg, psi1, rng);
  Point x = smallest_vertex(fc);
  auto w = subsequence_witnesses(tree, x, psi1);
  CHECK(std::find(w.lower.begin(), w.lower.end(), psi1) != w.lower.end());
}

TEST_CASE("trace ratios for a uniform refinement are exactly 2") {
  // Lebesgue-like tree in d=2: masses 4^{-n}
  MeasureTree t = toy_tree(2, {ConstraintKind::FULL, ConstraintKind::FULL, ConstraintKind::FULL,
                               ConstraintKind::FULL});
  DimTrace tr = trace_point(t, {make_rat(1, 3), make_rat(2, 3)}, 4);
  for (const auto& tp : tr.points) {
    CHECK(tp.ratio_lo <= 2);
    CHECK(tp.ratio_hi >= 2);
    CHECK(tp.mass == rat_pow(make_rat(1, 4), static_cast<unsigned long>(tp.gen)));
  }
  // the bracket has width 1/n
  CHECK(tr.points.back().ratio_hi - tr.points.back().ratio_lo == make_rat(1, 4));
}

TEST_CASE("trace of a point outside the support errors") {
  MeasureTree t = toy_tree(2, {ConstraintKind::SV, ConstraintKind::SV});
  CHECK_THROWS_AS(trace_point(t, {make_rat(3, 4), make_rat(3, 4)}, 2), DomainError);
}

TEST_CASE("central event products") {
  MeasureTree tree = build_measure(theorem2_params(104));
  Rat eta_star = tree.params.eta_star;
  SECTION("empty set gives 1") { CHECK(central_event_product(tree, {}) == 1); }
  SECTION("single step gives 1-eta*") {
    CHECK(central_event_product(tree, {1}) == 1 - eta_star);
    CHECK(central_event_product(tree, {2}) == 1 - eta_star);
  }
  SECTION("pairs give (1-eta*)^2 = 1/16 for eta*=3/4") {
    CHECK(central_event_product(tree, {1, 2}) == make_rat(1, 16));
  }
  SECTION("complement analog gives (eta*)^p") {
    CHECK(border_event_product(tree, {1}) == eta_star);
    CHECK(border_event_product(tree, {1, 2}) == eta_star * eta_star);
  }
  SECTION("incomplete step index errors") {
    CHECK_THROWS_AS(central_event_product(tree, {3}), DomainError);
  }
}

TEST_CASE("dim_estimate sees both dimension bands") {
  MeasureTree tree = build_measure(theorem2_params());
  SplitMix64 rng(9);
  std::vector<Point> sample;
  for (int i = 0; i < 10; ++i) sample.push_back(sample_central_point(tree, 1, rng).x);
  // at the first B-step scale the central points sit in the d_lower band
  auto s38 = dim_estimate(tree, sample, 38);
  double cd_slack = 2.0 * std::log2(tree.params.c_d.get_d()) / 38.0;
  CHECK(s38.ratio_min > tree.params.d_lower.get_d() - cd_slack - 0.05);
  CHECK(s38.ratio_max < tree.params.d_lower.get_d() + cd_slack + 0.05);
  // mid-A-phase the ratios drift toward d_upper
  auto s30 = dim_estimate(tree, sample, 30);
  CHECK(s30.ratio_median > s38.ratio_median - 0.3);
  CHECK_THROWS_AS(dim_estimate(tree, {}, 10), DomainError);
}

TEST_CASE("uniform binary refinement ratios equal 2 via dim_estimate") {
  MeasureTree t = toy_tree(2, {ConstraintKind::FULL, ConstraintKind::FULL, ConstraintKind::FULL,
                               ConstraintKind::FULL, ConstraintKind::FULL});
  std::vector<Point> sample{{make_rat(1, 5), make_rat(2, 5)}, {make_rat(3, 7), make_rat(6, 7)}};
  auto s = dim_estimate(t, sample, 5);
  CHECK(s.ratio_min > 1.8);
  CHECK(s.ratio_max < 2.2);
}
