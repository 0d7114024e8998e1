#include <cmath>
#include <numbers>

#include "doctest.h"
#include "pfam/exterior.hpp"
#include "test_support.hpp"

using namespace pfam;
using pfam::testing::forms_equal;
using pfam::testing::random_form;
using pfam::testing::random_point;

namespace {

Form dy(int dim, std::vector<int> idx, const Expr& c = Expr(1.0)) { return Form::monomial(dim, index_set(idx), c); }

Expr P(const char* text) { return parse(text); }

// Largest coefficient gap between two forms over random points in [lo, hi]^dim.
double max_gap(const Form& a, const Form& b, Random& rng, int count, double lo, double hi, int params = 0) {
  const Form diff = a - b;
  double worst = 0.0;
  for (int k = 0; k < count; ++k) worst = std::max(worst, max_abs(diff, random_point(rng, a.dim(), params, lo, hi)));
  return worst;
}

}  // namespace

TEST_SUITE("exterior.wedge") {
  TEST_CASE("repeated index vanishes") { CHECK(wedge(dy(2, {1}), dy(2, {1})).is_zero()); }

  TEST_CASE("transposition flips the sign") { CHECK(forms_equal(wedge(dy(2, {2}), dy(2, {1})), dy(2, {1, 2}, -1.0))); }

  TEST_CASE("coefficients multiply") {
    CHECK(forms_equal(wedge(dy(2, {1}, P("y1")), dy(2, {2}, P("y2"))), dy(2, {1, 2}, P("y1*y2"))));
  }

  TEST_CASE("degree overflow gives the zero form") {
    const Form w = wedge(dy(2, {1, 2}), dy(2, {1}));
    CHECK(w.is_zero());
    CHECK(w.degree() == 3);
  }

  TEST_CASE("mismatched dimensions and domains are rejected") {
    CHECK_THROWS_AS(wedge(dy(2, {1}), dy(3, {1})), PreconditionError);
    CHECK_THROWS_AS(wedge(dy(2, {1}).with_domain("a"), dy(2, {2}).with_domain("b")), PreconditionError);
    CHECK_NOTHROW(wedge(dy(2, {1}).with_domain("a"), dy(2, {2})));
  }

  TEST_CASE("graded antisymmetry on random forms") {
    Random rng(17);
    for (int trial = 0; trial < 40; ++trial) {
      const int p = rng.integer(0, 2), q = rng.integer(0, 2);
      const Form a = random_form(rng, 4, p, 1, 2);
      const Form b = random_form(rng, 4, q, 1, 2);
      const Form ab = wedge(a, b);
      const Form ba = wedge(b, a);
      CHECK(forms_equal(ab, (p * q) % 2 ? -ba : ba));
    }
  }

  TEST_CASE("sign helper against a permutation count") {
    for (IndexSet a = 0; a < 32; ++a) {
      for (IndexSet b = 0; b < 32; ++b) {
        if (a & b) {
          CHECK(wedge_sign(a, b) == 0);
          continue;
        }
        std::vector<int> seq = indices(a);
        for (int k : indices(b)) seq.push_back(k);
        int inversions = 0;
        for (std::size_t i = 0; i < seq.size(); ++i)
          for (std::size_t j = i + 1; j < seq.size(); ++j) inversions += seq[i] > seq[j];
        CHECK(wedge_sign(a, b) == (inversions % 2 ? -1 : 1));
      }
    }
  }
}

TEST_SUITE("exterior.d") {
  TEST_CASE("coordinate formula") { CHECK(forms_equal(ext_d(dy(2, {1}, P("y1*y2"))), dy(2, {1, 2}, P("-y1")))); }

  TEST_CASE("d of an exact form vanishes") {
    const Form f = Form::scalar(2, P("y1^2*y2 + sin(y2)"));
    CHECK(ext_d(ext_d(f)).is_zero());
  }

  TEST_CASE("parameters behave as constants") {
    CHECK(forms_equal(ext_d(dy(2, {2}, P("x1*y1"))), dy(2, {1, 2}, P("x1"))));
  }

  TEST_CASE("top degree maps to the zero form of degree d+1") {
    const Form w = ext_d(dy(2, {1, 2}, P("y1")));
    CHECK(w.is_zero());
    CHECK(w.degree() == 3);
  }

  TEST_CASE("step coefficients cannot be differentiated") {
    CHECK_THROWS_AS(ext_d(dy(2, {1}, P("step(y2)"))), DifferentiationError);
  }

  TEST_CASE("d squared is zero on random polynomial forms") {
    Random rng(29);
    for (int dim = 1; dim <= 3; ++dim) {
      for (int p = 0; p <= dim - 2; ++p) {
        for (int trial = 0; trial < 25; ++trial) CHECK(ext_d(ext_d(random_form(rng, dim, p, 2, 4))).is_zero());
      }
    }
  }

  TEST_CASE("Leibniz rule for wedge") {
    Random rng(31);
    for (int trial = 0; trial < 30; ++trial) {
      const int p = rng.integer(0, 1);
      const Form a = random_form(rng, 3, p, 1, 3);
      const Form b = random_form(rng, 3, 1, 1, 3);
      const Form lhs = ext_d(wedge(a, b));
      const Form rhs = wedge(ext_d(a), b) + (p % 2 ? -wedge(a, ext_d(b)) : wedge(a, ext_d(b)));
      CHECK(forms_equal(lhs, rhs));
    }
  }

  TEST_CASE("partial differential only sees selected directions") {
    const Form f = Form::scalar(3, P("y1*y2*y3"));
    const Form along = ext_d_along(f, index_set({2, 3}));
    CHECK(forms_equal(along, dy(3, {2}, P("y1*y3")) + dy(3, {3}, P("y1*y2"))));
  }
}

TEST_SUITE("exterior.pullback") {
  TEST_CASE("chain rule in one variable") {
    const SmoothMap square(1, {P("y1^2")});
    CHECK(forms_equal(pullback(square, dy(1, {1})), dy(1, {1}, P("2*y1"))));
  }

  TEST_CASE("identity leaves the form unchanged") {
    const Form w = dy(2, {1}, P("sin(y2)")) + dy(2, {2}, P("y1"));
    CHECK(forms_equal(pullback(SmoothMap::identity(2), w), w));
    // A non-flagged identity goes through the general path.
    CHECK(forms_equal(pullback(SmoothMap(2, {P("y1"), P("y2")}), w), w));
  }

  TEST_CASE("naturality for the polynomial example") {
    const SmoothMap phi(2, {P("y1 + y2"), P("y1*y2")});
    const Form w = dy(2, {2}, P("y1"));
    const Form lhs = pullback(phi, ext_d(w));
    const Form rhs = ext_d(pullback(phi, w));
    Random rng(37);
    CHECK(max_gap(lhs, rhs, rng, 100, -2.0, 2.0) < 1e-12);
    CHECK(forms_equal(lhs, rhs));
  }

  TEST_CASE("naturality and wedge compatibility on random maps") {
    Random rng(41);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<Expr> comps;
      for (int i = 0; i < 3; ++i) comps.push_back(pfam::testing::random_polynomial(rng, 2, 0, 2, 3));
      const SmoothMap phi(2, comps);
      const Form a = random_form(rng, 3, 1, 0, 2);
      const Form b = random_form(rng, 3, 1, 0, 2);
      CHECK(forms_equal(pullback(phi, ext_d(a)), ext_d(pullback(phi, a))));
      CHECK(forms_equal(pullback(phi, wedge(a, b)), wedge(pullback(phi, a), pullback(phi, b))));
    }
  }

  TEST_CASE("polar coordinates pull the area form back to r dr dtheta") {
    const SmoothMap polar(2, {P("y1*cos(y2)"), P("y1*sin(y2)")});
    const Form area = pullback(polar, dy(2, {1, 2}));
    Random rng(43);
    CHECK(max_gap(area, dy(2, {1, 2}, P("y1")), rng, 50, 0.1, 3.0) < 1e-13);
  }

  TEST_CASE("dimension mismatch") { CHECK_THROWS_AS(pullback(SmoothMap(1, {P("y1")}), dy(2, {1})), PreconditionError); }
}

TEST_SUITE("exterior.interior") {
  TEST_CASE("radial insertion examples") {
    CHECK(forms_equal(interior_radial(dy(1, {1})), Form::scalar(1, P("y1"))));
    const Form once = interior_radial(dy(2, {1, 2}));
    CHECK(forms_equal(once, dy(2, {2}, P("y1")) - dy(2, {1}, P("y2"))));
    CHECK(interior_radial(once).is_zero());
  }

  TEST_CASE("0-forms are rejected") { CHECK_THROWS_AS(interior_radial(Form::scalar(2, P("y1"))), PreconditionError); }

  TEST_CASE("insertion is nilpotent on random forms") {
    Random rng(47);
    for (int trial = 0; trial < 30; ++trial) {
      const Form w = random_form(rng, 3, rng.integer(2, 3), 1, 2);
      CHECK(forms_equal(interior_radial(interior_radial(w)), Form(3, w.degree() - 2)));
    }
  }
}

TEST_SUITE("exterior.homotopy") {
  TEST_CASE("constant 1-form on the line") {
    const Form h = homotopy(dy(1, {1}));
    CHECK(forms_equal(h, Form::scalar(1, P("y1"))));
    CHECK(forms_equal(ext_d(h), dy(1, {1})));
  }

  TEST_CASE("area form on the plane") {
    const Form h = homotopy(dy(2, {1, 2}));
    CHECK(forms_equal(h, dy(2, {2}, P("y1/2")) - dy(2, {1}, P("y2/2"))));
    CHECK(forms_equal(ext_d(h), dy(2, {1, 2})));
  }

  TEST_CASE("non-closed form satisfies the homotopy identity") {
    const Form w = dy(2, {1}, P("y2"));
    const Form h = homotopy(w);
    CHECK(forms_equal(h, Form::scalar(2, P("y1*y2/2"))));
    CHECK(forms_equal(ext_d(h) + homotopy(ext_d(w)), w));
  }

  TEST_CASE("0-forms are rejected") { CHECK_THROWS_AS(homotopy(Form::scalar(2, P("y1"))), PreconditionError); }

  TEST_CASE("dH + Hd = id symbolically on polynomial forms") {
    Random rng(53);
    for (int dim = 1; dim <= 3; ++dim) {
      for (int p = 1; p <= dim; ++p) {
        for (int trial = 0; trial < 15; ++trial) {
          const Form w = random_form(rng, dim, p, 1, 3);
          CHECK(forms_equal(ext_d(homotopy(w)) + homotopy(ext_d(w)), w));
        }
      }
    }
  }

  TEST_CASE("dH + Hd = id at random points for transcendental coefficients") {
    const char* coeffs[] = {"exp(y1*y2)", "sin(y1 + x1*y3)", "1/(2 + y2^2)", "atan(y3)*cos(y1)"};
    Random rng(59);
    for (int p = 1; p <= 3; ++p) {
      Form w(3, p);
      int k = 0;
      for (IndexSet i = 0; i < 8; ++i) {
        if (degree_of(i) == p) w.add(i, P(coeffs[k++ % 4]));
      }
      const Form lhs = ext_d(homotopy(w)) + homotopy(ext_d(w));
      CHECK(max_gap(lhs, w, rng, 100, -1.0, 1.0, 1) < 1e-9);
    }
  }

  TEST_CASE("closed form through a bounded chart") {
    // u: (-1, 1)^2 -> R^2 by tan(pi y / 2); inverse (2/pi) atan(z).
    const SmoothMap chart(2, {P("tan(1.5707963267948966*y1)"), P("tan(1.5707963267948966*y2)")},
                          std::vector<Expr>{P("0.6366197723675814*atan(y1)"), P("0.6366197723675814*atan(y2)")});
    const Form w = ext_d(dy(2, {1}, P("exp(y1)*y2")) + dy(2, {2}, P("sin(y1*y2)")));
    const Form eta = homotopy(w, chart);
    Random rng(61);
    CHECK(max_gap(ext_d(eta), w, rng, 60, -0.95, 0.95) < 1e-8);

    const Form closed1 = ext_d(Form::scalar(2, P("y1^2*cos(y2)")));
    CHECK(max_gap(ext_d(homotopy(closed1, chart)), closed1, rng, 60, -0.95, 0.95) < 1e-8);
  }

  TEST_CASE("chart homotopy needs an inverse") {
    CHECK_THROWS_AS(homotopy(dy(1, {1}), SmoothMap(1, {P("2*y1")})), PreconditionError);
  }

  TEST_CASE("round trip of a declared inverse") {
    const SmoothMap chart(1, {P("tan(1.5707963267948966*y1)")}, std::vector<Expr>{P("0.6366197723675814*atan(y1)")});
    for (double y : {-0.9, -0.3, 0.0, 0.5, 0.99}) CHECK(chart.roundtrip_error(std::vector<double>{y}) < 1e-12);
  }

  TEST_CASE("partial homotopy contracts only the selected directions") {
    // Fibre directions y2, y3 over base y1; centre (., 1, -1).
    const Form w = ext_d_along(dy(3, {2}, P("exp(y1)*y3^2")) + dy(3, {3}, P("y1*y2")), index_set({2, 3}));
    const double center[] = {0.0, 1.0, -1.0};
    const Form h = homotopy_along(w, index_set({2, 3}), center);
    Random rng(67);
    CHECK(max_gap(ext_d_along(h, index_set({2, 3})), w, rng, 50, -1.0, 1.0) < 1e-12);
    // Base differentials pass through untouched: a pure dy1 term contributes nothing.
    CHECK(homotopy_along(dy(3, {1}, P("y2")), index_set({2, 3}), center).is_zero());
  }
}
