#include <cmath>
#include <numbers>

#include "doctest.h"
#include "pfam/expr.hpp"
#include "test_support.hpp"

using namespace pfam;
using pfam::testing::central_difference;

namespace {

double at(const Expr& e, std::vector<double> y, std::vector<double> x = {}) { return eval(e, Point(y, x)); }

}  // namespace

TEST_SUITE("expr.parse") {
  TEST_CASE("product node with its free symbols") {
    const Expr e = parse("x1*y1^2", {1, 1});
    CHECK(e.kind() == NodeKind::Mul);
    CHECK(e.y_mask() == 0b1);
    CHECK(e.x_mask() == 0b1);
    CHECK(at(e, {3.0}, {2.0}) == doctest::Approx(18.0));
  }

  TEST_CASE("bump at the centre of its support") {
    const Expr e = parse("bump((y1-1)/2)", {1, 0});
    CHECK(e.kind() == NodeKind::Apply);
    CHECK(at(e, {1.0}) == doctest::Approx(0.3678794412).epsilon(1e-10));
  }

  TEST_CASE("syntax error carries the offset") {
    try {
      parse("y1+*2");
      FAIL("expected a parse error");
    } catch (const ParseError& err) {
      CHECK(err.offset() == 3);
    }
    CHECK_THROWS_AS(parse("sin(y1"), ParseError);
    CHECK_THROWS_AS(parse("y1 y2"), ParseError);
    CHECK_THROWS_AS(parse("2^y1"), ParseError);
  }

  TEST_CASE("unknown symbols are rejected against the declaration") {
    CHECK_THROWS_AS(parse("y3", {2, 1}), ParseError);
    CHECK_THROWS_AS(parse("x2", {2, 1}), ParseError);
    CHECK_THROWS_AS(parse("z1"), ParseError);
    CHECK_THROWS_AS(parse("foo(y1)"), ParseError);
    CHECK_NOTHROW(parse("t*y2 + x1", {2, 1}));
  }

  TEST_CASE("literals with exponents") {
    CHECK(*parse("1.5e-3").constant_value() == doctest::Approx(1.5e-3));
    CHECK(*parse(".25").constant_value() == doctest::Approx(0.25));
    CHECK(*parse("2E+2").constant_value() == doctest::Approx(200.0));
  }

  TEST_CASE("printing round-trips through the parser") {
    const char* samples[] = {
        "x1*y1^2", "-y1^2 + 3", "(y1 + 1)^2*(y2 - 2)", "sin(y1)/(1 + y2^2)", "-2*exp(-y1)*sqrt(y2)",
        "bump((y1-1)/2) - step(x1)", "atan(y1/y2) + tan(x1)^3 - log(y1^2 + 1)", "1/y1 - 1/y1^2", "-(-(y1))",
    };
    for (const char* text : samples) {
      const Expr e = parse(text);
      CAPTURE(text);
      CAPTURE(e.str());
      CHECK(parse(e.str()) == e);
    }
    Random rng(11);
    for (int i = 0; i < 200; ++i) {
      const Expr e = pfam::testing::random_tree(rng, 3, 2, 4);
      CAPTURE(e.str());
      CHECK(parse(e.str()) == e);
    }
  }
}

TEST_SUITE("expr.canonical") {
  TEST_CASE("like terms combine and constants fold") {
    CHECK(parse("y1 + y1 - 2*y1").is_zero());
    CHECK(parse("y1*y2 - y2*y1").is_zero());
    CHECK(parse("y1*y1/y1") == Expr::y(1));
    CHECK(parse("2*(y1 + y2)") == parse("2*y1 + 2*y2"));
    CHECK(*parse("sin(0) + 3*2").constant_value() == 6.0);
  }

  TEST_CASE("expansion decides polynomial identities") {
    CHECK(symbolically_equal(parse("(y1 + y2)^2"), parse("y1^2 + 2*y1*y2 + y2^2")));
    CHECK_FALSE(symbolically_equal(parse("(y1 + y2)^2"), parse("y1^2 + y2^2")));
  }

  TEST_CASE("squared cosine and sine with a common cofactor fold") {
    CHECK(*parse("cos(y1)^2 + sin(y1)^2").constant_value() == 1.0);
    CHECK(parse("3*y2*cos(t*y1 + 1)^2 + 3*y2*sin(t*y1 + 1)^2") == parse("3*y2"));
    CHECK(parse("cos(y1)^3 + cos(y1)*sin(y1)^2") == parse("cos(y1)"));
    // Different coefficients or arguments stay as they are.
    CHECK(parse("2*cos(y1)^2 + sin(y1)^2").kind() == NodeKind::Add);
    CHECK(parse("cos(y1)^2 + sin(y2)^2").kind() == NodeKind::Add);
  }
}

TEST_SUITE("expr.diff") {
  TEST_CASE("polynomial derivative") {
    CHECK(symbolically_equal(diff(parse("y1^2*x1"), Symbol::y(1)), parse("2*y1*x1")));
    CHECK(diff(parse("x1*y2"), Symbol::y(1)).is_zero());
  }

  TEST_CASE("bump is even, so its derivative vanishes at 0") {
    CHECK(at(diff(parse("bump(y1)"), Symbol::y(1)), {0.0}) == 0.0);
  }

  TEST_CASE("bump derivatives are continuous across the support boundary") {
    Expr e = parse("bump(y1)");
    for (int order = 0; order < 4; ++order) {
      for (double s : {-1.0, 1.0, 1.5, -3.0}) CHECK(at(e, {s}) == 0.0);
      for (double s : {0.999, -0.999}) CHECK(std::abs(at(e, {s})) < 1e-100);
      CHECK(std::isfinite(at(e, {0.9999999})));
      e = diff(e, Symbol::y(1));
    }
  }

  TEST_CASE("Leibniz rule through a non-polynomial integral") {
    const Expr inner = integrate_t(parse("exp(t*y1)"));
    REQUIRE(inner.kind() == NodeKind::Integral);
    const Expr d = diff(inner, Symbol::y(1));
    // Oracle: finite differences of the closed form (e^y - 1)/y at y = 1.
    const double h = 1e-5;
    auto closed = [](double y) { return (std::exp(y) - 1.0) / y; };
    const double expected = (closed(1.0 + h) - closed(1.0 - h)) / (2.0 * h);
    CHECK(at(d, {1.0}) == doctest::Approx(expected).epsilon(1e-8));
    CHECK(at(d, {1.0}) == doctest::Approx(1.0).epsilon(1e-10));
  }

  TEST_CASE("Leibniz rule for t-polynomial bodies holds symbolically") {
    Random rng(5);
    for (int i = 0; i < 50; ++i) {
      const Expr body = pfam::testing::random_polynomial(rng, 2, 1, 3) * parse("t^2 + y1*t - 1");
      for (Symbol s : {Symbol::y(1), Symbol::y(2), Symbol::x(1)}) {
        CHECK(symbolically_equal(diff(integrate_t(body), s), integrate_t(diff(body, s))));
      }
    }
  }

  TEST_CASE("step blocks differentiation only when it depends on the variable") {
    CHECK_THROWS_AS(diff(parse("step(y1)*y1"), Symbol::y(1)), DifferentiationError);
    CHECK(symbolically_equal(diff(parse("step(x1 - 0.5)*y1^2"), Symbol::y(1)), parse("2*step(x1 - 0.5)*y1")));
  }

  TEST_CASE("derivatives agree with central differences on random polynomial trees") {
    Random rng(2024);
    int checked = 0;
    for (int i = 0; i < 1000; ++i) {
      const Expr e = pfam::testing::random_tree(rng, 3, 2, 4);
      const Point p = pfam::testing::random_point(rng, 3, 2);
      const Symbol s = rng.integer(0, 1) ? Symbol::y(rng.integer(1, 3)) : Symbol::x(rng.integer(1, 2));
      const double exact = eval(diff(e, s), p);
      const double fd = central_difference(e, s, p, 1e-5);
      CHECK(std::abs(exact - fd) <= 1e-6 * std::max(1.0, std::abs(exact)));
      ++checked;
    }
    CHECK(checked == 1000);
  }

  TEST_CASE("transcendental derivatives against central differences") {
    const char* samples[] = {"exp(y1*y2)", "log(1 + y1^2)", "sin(y1)*cos(y2)", "tan(y1/2)",
                             "atan(y1/(2 + y2))", "sqrt(2 + y1*y2)", "bump(y1/2)*y2", "1/(3 + y1 + y2)^2"};
    Random rng(3);
    for (const char* text : samples) {
      const Expr e = parse(text);
      for (int i = 0; i < 20; ++i) {
        const Point p = pfam::testing::random_point(rng, 2, 0, -0.9, 0.9);
        for (Symbol s : {Symbol::y(1), Symbol::y(2)}) {
          CAPTURE(text);
          CHECK(eval(diff(e, s), p) == doctest::Approx(central_difference(e, s, p, 1e-5)).epsilon(1e-6));
        }
      }
    }
  }
}

TEST_SUITE("expr.eval") {
  TEST_CASE("polynomial integrals use the exact path") {
    const Expr e = integrate_t(parse("t^2"));
    REQUIRE(e.is_constant());
    CHECK(*e.constant_value() == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }

  TEST_CASE("non-polynomial integrals use quadrature") {
    const Expr e = integrate_t(parse("exp(t*y1)"));
    CHECK(std::abs(at(e, {1.0}) - (std::numbers::e - 1.0)) < 1e-12);
  }

  TEST_CASE("step at and below zero") {
    CHECK(at(parse("step(y1)"), {-0.5}) == 0.0);
    CHECK(at(parse("step(y1)"), {0.0}) == 1.0);
  }

  TEST_CASE("domain errors") {
    CHECK_THROWS_AS(at(parse("log(y1)"), {-1.0}), DomainError);
    CHECK_THROWS_AS(at(parse("1/y1"), {0.0}), DomainError);
    CHECK_THROWS_AS(at(parse("sqrt(y1)"), {-1.0}), DomainError);
    CHECK_THROWS_AS(parse("1/(y1 - y1)"), ParseError);
    CHECK_THROWS_AS(Expr::y(1) / (Expr::y(1) - Expr::y(1)), DomainError);
  }

  TEST_CASE("unassigned symbols are a precondition failure") {
    CHECK_THROWS_AS(eval(parse("y1 + x1"), Point(std::vector<double>{1.0})), PreconditionError);
  }

  TEST_CASE("quadrature reports non-convergence") {
    const Expr e = integrate_t(parse("1000000*step(t - 0.3)*y1"));
    REQUIRE(e.kind() == NodeKind::Integral);
    CHECK_THROWS_AS(at(e, {1.0}), QuadratureError);
  }

  TEST_CASE("guards short-circuit their body") {
    const Expr g = Expr::guard({parse("y1")}, parse("log(y1)"));
    CHECK(at(g, {-1.0}) == 0.0);
    CHECK(at(g, {std::numbers::e}) == doctest::Approx(1.0));
  }
}

TEST_SUITE("expr.integrate_t") {
  TEST_CASE("closed forms and fallback") {
    CHECK(integrate_t(parse("t*y1")) == parse("y1/2"));
    CHECK(integrate_t(parse("x1 + y1")) == parse("x1 + y1"));
    const Expr e = integrate_t(parse("exp(t)"));
    CHECK(e.kind() == NodeKind::Integral);
    CHECK(eval(e, Point()) == doctest::Approx(1.7182818285).epsilon(1e-10));
  }

  TEST_CASE("t-polynomial coefficients") {
    const auto p = t_polynomial(parse("(1 + t*y1)^2"), 0);
    REQUIRE(p);
    REQUIRE(p->size() == 3);
    CHECK((*p)[0] == Expr(1.0));
    CHECK(symbolically_equal((*p)[1], parse("2*y1")));
    CHECK(symbolically_equal((*p)[2], parse("y1^2")));
    CHECK_FALSE(t_polynomial(parse("1/(1 + t)"), 0));
  }

  TEST_CASE("nested levels stay independent") {
    // integral over t1 of t1 * integral over t0 of exp(t0 * t1 * y1)
    const Expr inner = integrate_t(substitute(parse("exp(t*y1)"), {{Symbol::y(1), Expr::t(1) * Expr::y(1)}}), 0);
    const Expr outer = integrate_t(Expr::t(1) * inner, 1);
    // closed form: int_0^1 (e^{s y} - 1)/y ds = ((e^y - 1)/y - 1)/y
    const double y = 0.7;
    const double expected = ((std::exp(y) - 1.0) / y - 1.0) / y;
    CHECK(at(outer, {y}) == doctest::Approx(expected).epsilon(1e-12));
    CHECK_THROWS_AS(substitute(inner, {{Symbol::y(1), Expr::t(0)}}), PreconditionError);
  }
}
