#include <cmath>

#include "doctest.h"
#include "pfam/fixtures.hpp"
#include "pfam/foliation.hpp"
#include "test_support.hpp"

using namespace pfam;
using pfam::testing::forms_equal;

namespace {

Expr P(const char* text) { return parse(text); }

/// B = (0, 3) covered by two overlapping intervals, fiber R^2: coordinates
/// (y1 | y2, y3).
ProductBundle interval_bundle(std::vector<Sample> centres = {}) {
  ProductBundle b;
  b.base = box_cover({{0.0, 3.0}}, {{{-1.0, 2.0}}, {{1.0, 4.0}}}, 0.95, 1, 3);
  b.fiber_dim = 2;
  b.fiber_centres = std::move(centres);
  b.fiber_box = {{-1.0, 1.0}, {-1.0, 1.0}};
  return b;
}

ProductBundle single_bundle() {
  ProductBundle b;
  b.base = box_cover({{0.0, 3.0}}, {{{-1.0, 4.0}}}, 0.95, 0, 3);
  b.fiber_dim = 2;
  return b;
}

Form fiber_area(const Expr& c) { return Form::from_terms(3, 2, {{{2, 3}, c}}); }

}  // namespace

TEST_SUITE("foliation.leafwise_d") {
  TEST_CASE("fiber part of the differential") {
    const ProductBundle b = interval_bundle();
    const Form w = Form::from_terms(3, 1, {{{3}, P("y2")}});
    CHECK(forms_equal(leafwise_d(w, b), fiber_area(Expr(1.0))));
  }

  TEST_CASE("base dependence is invisible") {
    const ProductBundle b = interval_bundle();
    const Form w = Form::from_terms(3, 1, {{{2}, P("exp(y1)*sin(y1)")}});
    CHECK(forms_equal(leafwise_d(w, b), Form(3, 2)));
  }

  TEST_CASE("base differentials are rejected") {
    const ProductBundle b = interval_bundle();
    CHECK_THROWS_AS(leafwise_d(Form::from_terms(3, 1, {{{1}, P("y2")}}), b), PreconditionError);
  }

  TEST_CASE("d_F squared vanishes on random leafwise forms") {
    Random rng(19);
    ProductBundle b;
    b.base = box_cover({{0.0, 3.0}}, {{{-1.0, 4.0}}}, 0.95, 0, 3);
    b.fiber_dim = 3;
    for (int trial = 0; trial < 30; ++trial) {
      const int r = rng.integer(0, 2);
      Form w(4, r);
      for (IndexSet I = 0; I < 16; ++I) {
        if (degree_of(I) == r && (I & 1) == 0) w.add(I, pfam::testing::random_polynomial(rng, 4, 1, 3));
      }
      CHECK(forms_equal(leafwise_d(leafwise_d(w, b), b), Form(4, r + 2)));
    }
  }
}

TEST_SUITE("foliation.primitives") {
  TEST_CASE("area form of the fiber") {
    const auto tau = fiber_primitives(fiber_area(Expr(1.0)), interval_bundle());
    const Form expected = Form::from_terms(3, 1, {{{3}, P("0.5*y2")}, {{2}, P("-0.5*y3")}});
    REQUIRE(tau.size() == 2);
    for (const auto& t : tau) {
      CHECK(forms_equal(t, expected));
      CHECK(forms_equal(leafwise_d(t, interval_bundle()), fiber_area(Expr(1.0))));
    }
  }

  TEST_CASE("linear fiber coefficient") {
    ProductBundle b = interval_bundle();
    b.fiber_dim = 1;
    b.fiber_box.resize(1);
    const Form w = Form::from_terms(2, 1, {{{2}, P("sin(y1)")}});
    for (const auto& t : fiber_primitives(w, b)) CHECK(forms_equal(t, Form::scalar(2, P("sin(y1)*y2"))));
  }

  TEST_CASE("zero form") {
    for (const auto& t : fiber_primitives(Form(3, 2), interval_bundle())) CHECK(forms_equal(t, Form(3, 1)));
  }

  TEST_CASE("leafwise non-closed input is rejected") {
    const Form w = Form::from_terms(3, 1, {{{3}, P("y2")}});
    CHECK_THROWS_AS(fiber_primitives(w, interval_bundle()), PreconditionError);
  }
}

TEST_SUITE("foliation.assemble") {
  TEST_CASE("single base set reproduces the fiber primitive") {
    const ProductBundle b = single_bundle();
    const Form w = fiber_area(P("exp(y1)"));
    const auto tau = fiber_primitives(w, b);
    const auto grid = bundle_grid(b, 6);
    const FoliationReport rep = assemble_global(tau, w, b, grid);
    CHECK(rep.leafwise_defect < 1e-10);
    for (const auto& p : grid) CHECK(max_abs(rep.tau - tau[0], Point(p)) < 1e-12);
  }

  TEST_CASE("two base sets on a 10 x 10 x 10 grid") {
    // Different fiber centres make the per-set primitives genuinely differ.
    const ProductBundle b = interval_bundle({{0.3, -0.2}, {-0.5, 0.4}});
    const Form w = fiber_area(P("exp(y1)"));
    const auto grid = bundle_grid(b, 10);
    REQUIRE(grid.size() == 1000);
    const FoliationReport rep = assemble_global(fiber_primitives(w, b), w, b, grid);
    CHECK(rep.points == 1000);
    CHECK(rep.leafwise_defect < 1e-8);
    CHECK(rep.primitive_defect < 1e-8);
    CHECK(rep.consistency < 1e-8);
    CHECK(rep.ok());
    // Oracle exp(y1) (y2 dy3 - y3 dy2) / 2 has the same leafwise differential.
    const Form oracle = Form::from_terms(3, 1, {{{3}, P("0.5*exp(y1)*y2")}, {{2}, P("-0.5*exp(y1)*y3")}});
    const Form diff = leafwise_d(rep.tau, b) - leafwise_d(oracle, b);
    for (const auto& p : grid) CHECK(max_abs(diff, Point(p)) < 1e-8);
    // Base differentials survive in d tau, so the full residual is not small.
    CHECK(rep.full_residual > 0.1);
  }
}
