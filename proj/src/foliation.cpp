#include "pfam/foliation.hpp"

#include <algorithm>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "pfam/glue.hpp"

namespace pfam {

IndexSet ProductBundle::fiber_mask() const {
  IndexSet m = 0;
  for (int i = 0; i < fiber_dim; ++i) m |= IndexSet{1} << (base.dim + i);
  return m;
}

Sample ProductBundle::centre(int alpha) const {
  Sample c(dim(), 0.0);
  if (alpha < static_cast<int>(fiber_centres.size())) {
    const Sample& f = fiber_centres[alpha];
    if (static_cast<int>(f.size()) != fiber_dim) throw ConfigError("fiber centre has the wrong dimension");
    std::copy(f.begin(), f.end(), c.begin() + base.dim);
  }
  return c;
}

bool is_leafwise(const Form& w, const ProductBundle& bundle) {
  const IndexSet fiber = bundle.fiber_mask();
  return std::all_of(w.terms().begin(), w.terms().end(), [&](const auto& t) { return (t.first & ~fiber) == 0; });
}

Form leafwise_d(const Form& w, const ProductBundle& bundle) {
  if (w.dim() != bundle.dim()) throw PreconditionError("form dimension does not match the bundle");
  if (!is_leafwise(w, bundle)) throw PreconditionError("form has base differentials");
  return ext_d_along(w, bundle.fiber_mask());
}

std::vector<Sample> bundle_grid(const ProductBundle& bundle, int per_axis) {
  std::vector<Sample> fibers{Sample{}};
  for (int i = 0; i < bundle.fiber_dim; ++i) {
    const auto [lo, hi] = i < static_cast<int>(bundle.fiber_box.size()) ? bundle.fiber_box[i]
                                                                         : std::pair<double, double>{-1.0, 1.0};
    std::vector<Sample> next;
    for (const auto& s : fibers) {
      for (int k = 0; k < per_axis; ++k) {
        Sample t = s;
        t.push_back(per_axis == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * k / (per_axis - 1));
        next.push_back(std::move(t));
      }
    }
    fibers = std::move(next);
  }
  std::vector<Sample> out;
  for (const auto& b : region_grid(bundle.base, per_axis)) {
    for (const auto& f : fibers) {
      Sample p = b;
      p.insert(p.end(), f.begin(), f.end());
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::vector<Form> fiber_primitives(const Form& w, const ProductBundle& bundle, double closed_tolerance) {
  if (w.degree() < 1) throw PreconditionError("fiber primitives need a form of degree >= 1");
  const Form dw = leafwise_d(w, bundle);
  for (const auto& p : bundle_grid(bundle, 4)) {
    const double v = max_abs(dw, Point(p));
    if (!(v <= closed_tolerance)) {
      throw PreconditionError(
          fmt::format("form is not leafwise closed: |d_F w| = {:g} at ({})", v, fmt::join(p, ", ")));
    }
  }
  std::vector<Form> out;
  for (int a = 0; a < bundle.base.size(); ++a) {
    out.push_back(homotopy_along(w, bundle.fiber_mask(), bundle.centre(a)));
  }
  return out;
}

FoliationReport assemble_global(const std::vector<Form>& primitives, const Form& w, const ProductBundle& bundle,
                                std::span<const Sample> grid, double tolerance) {
  const GoodCover& base = bundle.base;
  if (static_cast<int>(primitives.size()) != base.size()) throw PreconditionError("one primitive per base set expected");
  const std::vector<Expr> rho = partition_of_unity(base);

  FoliationReport rep;
  rep.tolerance = tolerance;
  rep.tau = Form(bundle.dim(), w.degree() - 1);
  for (int a = 0; a < base.size(); ++a) {
    std::vector<Expr> where = base.sets[a].predicates;
    where.push_back(base.sets[a].bump);
    rep.tau += primitives[a].map_coefficients([&](const Expr& c) { return Expr::guard(where, rho[a] * c); });
  }

  const Form leafwise = leafwise_d(rep.tau, bundle) - w;
  const Form full = ext_d(rep.tau) - w;
  std::vector<Form> local;
  for (const auto& p : primitives) local.push_back(leafwise_d(p, bundle));
  for (const auto& p : grid) {
    const std::span<const double> b(p.data(), static_cast<std::size_t>(base.dim));
    if (!base.in_region(b)) continue;
    ++rep.points;
    const Point at(p);
    const double v = max_abs(leafwise, at);
    if (!(v <= rep.leafwise_defect)) {
      rep.leafwise_defect = v;
      rep.defect_where = fmt::format("({})", fmt::join(p, ", "));
    }
    rep.full_residual = std::max(rep.full_residual, max_abs(full, at));
    std::vector<int> containing;
    for (int a = 0; a < base.size(); ++a) {
      if (base.contains(a, b)) containing.push_back(a);
    }
    for (std::size_t i = 0; i < containing.size(); ++i) {
      rep.primitive_defect = std::max(rep.primitive_defect, max_abs(local[containing[i]] - w, at));
      for (std::size_t j = i + 1; j < containing.size(); ++j) {
        rep.consistency = std::max(rep.consistency, max_abs(local[containing[i]] - local[containing[j]], at));
      }
    }
  }
  return rep;
}

}  // namespace pfam
