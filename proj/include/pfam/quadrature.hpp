#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "pfam/errors.hpp"

namespace pfam {

namespace detail {

struct GaussLegendre15 {
  std::array<double, 15> nodes{};
  std::array<double, 15> weights{};
};

/// Nodes and weights on [-1, 1], computed once by Newton iteration on P_15.
const GaussLegendre15& gauss_legendre_15();

struct PanelEstimate {
  double value = 0.0;
  double abs_value = 0.0;
};

template <class F>
PanelEstimate gl15_panel(F& f, double a, double b) {
  const auto& rule = gauss_legendre_15();
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  PanelEstimate out;
  for (int i = 0; i < 15; ++i) {
    const double v = f(mid + half * rule.nodes[i]);
    out.value += rule.weights[i] * v;
    out.abs_value += rule.weights[i] * std::abs(v);
  }
  out.value *= half;
  out.abs_value *= half;
  return out;
}

}  // namespace detail

template <class F>
double integrate_adaptive(F&& f, double a, double b, QuadratureOptions options) {
  struct Panel {
    double a, b;
    double whole, left, right;
    double abs_value;
    double error() const { return std::abs(left + right - whole); }
  };
  auto make_panel = [&](double lo, double hi, double whole) {
    const double mid = 0.5 * (lo + hi);
    const auto l = detail::gl15_panel(f, lo, mid);
    const auto r = detail::gl15_panel(f, mid, hi);
    return Panel{lo, hi, whole, l.value, r.value, l.abs_value + r.abs_value};
  };

  std::vector<Panel> panels;
  panels.push_back(make_panel(a, b, detail::gl15_panel(f, a, b).value));
  int subdivisions = 0;
  for (;;) {
    double error = 0.0;
    double magnitude = 0.0;
    std::size_t worst = 0;
    for (std::size_t i = 0; i < panels.size(); ++i) {
      error += panels[i].error();
      magnitude += panels[i].abs_value;
      if (panels[i].error() > panels[worst].error()) worst = i;
    }
    // Rounding in the panel sums bounds the attainable absolute accuracy.
    const double floor = 128.0 * std::numeric_limits<double>::epsilon() * magnitude;
    if (!std::isfinite(error)) throw QuadratureError("non-finite integrand");
    if (error <= std::max(options.tolerance, floor)) {
      double total = 0.0;
      for (const auto& p : panels) total += p.left + p.right;
      return total;
    }
    if (subdivisions >= options.max_subdivisions) {
      throw QuadratureError("adaptive quadrature did not converge (error estimate " +
                            std::to_string(error) + ")");
    }
    const Panel split = panels[worst];
    const double mid = 0.5 * (split.a + split.b);
    panels[worst] = make_panel(split.a, mid, split.left);
    panels.push_back(make_panel(mid, split.b, split.right));
    ++subdivisions;
  }
}

}  // namespace pfam
