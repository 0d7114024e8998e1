#pragma once

#include "pfam/cech.hpp"
#include "pfam/exterior.hpp"
#include "pfam/expr.hpp"
#include "pfam/random.hpp"

namespace pfam {

/// Random polynomial: sum of monomials in y1..y<coords>, x1..x<params> with
/// total degree <= max_degree and small integer coefficients.
inline Expr random_polynomial(Random& rng, int coords, int params, int max_degree, int terms = 4) {
  Expr out(static_cast<double>(rng.integer(-3, 3)));
  for (int i = 0; i < terms; ++i) {
    Expr mono(static_cast<double>(rng.integer(-4, 4)));
    const int degree = rng.integer(1, max_degree);
    for (int k = 0; k < degree; ++k) {
      const int pick = rng.integer(0, coords + params - 1);
      mono = mono * (pick < coords ? Expr::y(pick + 1) : Expr::x(pick - coords + 1));
    }
    out = out + mono;
  }
  return out;
}

/// Random p-form on R^dim with polynomial coefficients.
inline Form random_form(Random& rng, int dim, int degree, int params, int max_degree) {
  Form w(dim, degree);
  for (IndexSet i = 0; i < (IndexSet{1} << dim); ++i) {
    if (degree_of(i) == degree && rng.integer(0, 3) != 0) w.add(i, random_polynomial(rng, dim, params, max_degree, 3));
  }
  return w;
}

/// Random Cech p-cochain of q-forms with polynomial coefficients.
inline Cochain random_cochain(Random& rng, const GoodCover& cover, int p, int q, int params, int max_degree) {
  Cochain c(cover, p, q);
  for (const NerveSimplex* n : cover.simplices(p)) c.set(n->vertices, random_form(rng, cover.dim, q, params, max_degree));
  return c;
}

}  // namespace pfam
