#pragma once

#include <cmath>
#include <vector>

#include "pfam/cech.hpp"
#include "pfam/exterior.hpp"
#include "pfam/expr.hpp"
#include "pfam/random.hpp"
#include "pfam/random_forms.hpp"

namespace pfam::testing {

using pfam::random_cochain;
using pfam::random_form;
using pfam::random_polynomial;

/// Random unexpanded arithmetic tree over polynomial leaves.
inline Expr random_tree(Random& rng, int coords, int params, int depth) {
  if (depth == 0 || rng.integer(0, 3) == 0) {
    const int pick = rng.integer(0, coords + params);
    if (pick == coords + params) return Expr(rng.uniform(-2.0, 2.0));
    return pick < coords ? Expr::y(pick + 1) : Expr::x(pick - coords + 1);
  }
  switch (rng.integer(0, 3)) {
    case 0: return random_tree(rng, coords, params, depth - 1) + random_tree(rng, coords, params, depth - 1);
    case 1: return random_tree(rng, coords, params, depth - 1) - random_tree(rng, coords, params, depth - 1);
    case 2: return random_tree(rng, coords, params, depth - 1) * random_tree(rng, coords, params, depth - 1);
    default: return pow(random_tree(rng, coords, params, depth - 1), rng.integer(2, 3));
  }
}

inline Point random_point(Random& rng, int coords, int params, double lo = -1.0, double hi = 1.0) {
  std::vector<double> y(coords), x(params);
  for (auto& v : y) v = rng.uniform(lo, hi);
  for (auto& v : x) v = rng.uniform(lo, hi);
  return Point(y, x);
}

/// Central difference of e in symbol s at p.
inline double central_difference(const Expr& e, Symbol s, const Point& p, double h) {
  Point plus = p, minus = p;
  auto shift = [&](Point& q, double d) {
    if (s.kind == SymbolKind::Y) q.set_y(s.index, p.y(s.index) + d);
    if (s.kind == SymbolKind::X) q.set_x(s.index, p.x(s.index) + d);
  };
  shift(plus, h);
  shift(minus, -h);
  return (eval(e, plus) - eval(e, minus)) / (2.0 * h);
}

/// Symbolic equality of two forms, coefficient by coefficient.
inline bool forms_equal(const Form& a, const Form& b) {
  if (a.dim() != b.dim() || a.degree() != b.degree()) return false;
  const Form diff = a - b;
  for (const auto& [i, c] : diff.terms()) {
    if (!symbolically_equal(c, Expr())) return false;
  }
  return true;
}

inline bool cochains_equal(const Cochain& a, const Cochain& b) {
  const Cochain d = a - b;
  for (const auto& [s, w] : d.components()) {
    if (!forms_equal(w, Form(w.dim(), w.degree()))) return false;
  }
  return true;
}

}  // namespace pfam::testing
