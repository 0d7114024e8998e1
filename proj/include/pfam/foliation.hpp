#pragma once

#include <string>
#include <vector>

#include "pfam/cech.hpp"
#include "pfam/exterior.hpp"

namespace pfam {

/// M = B x R^f with coordinates (y_base1..y_base_b, y_fib1..y_fib_f) stored as
/// y1..y_b, y_{b+1}..y_{b+f}.
struct ProductBundle {
  GoodCover base;
  int fiber_dim = 0;
  /// Fiber point each base set contracts to; zero when empty.
  std::vector<Sample> fiber_centres;
  /// Box the fiber grid and samples are drawn from.
  std::vector<std::pair<double, double>> fiber_box;

  int base_dim() const { return base.dim; }
  int dim() const { return base.dim + fiber_dim; }
  IndexSet fiber_mask() const;
  Sample centre(int alpha) const;
};

/// True when no base differential occurs in any stored index.
bool is_leafwise(const Form& w, const ProductBundle& bundle);

/// Exterior derivative along the fibers only.
Form leafwise_d(const Form& w, const ProductBundle& bundle);

/// Fiber homotopy of w for each base set, contracting the fiber to that set's
/// centre with the base coordinates as parameters. Throws PreconditionError
/// unless w is leafwise, of degree >= 1 and leafwise closed within
/// `closed_tolerance` at the bundle samples.
std::vector<Form> fiber_primitives(const Form& w, const ProductBundle& bundle, double closed_tolerance = 1e-9);

/// Points (b, f) with b on the base region grid and f on a tensor grid of
/// the fiber box, `per_axis` points per coordinate.
std::vector<Sample> bundle_grid(const ProductBundle& bundle, int per_axis);

struct FoliationReport {
  Form tau;
  double leafwise_defect = 0.0;   // max |i_b^*(d tau - w)|
  std::string defect_where;
  double full_residual = 0.0;     // max |d tau - w|, informational
  double primitive_defect = 0.0;  // max over sets of |d_F tau_alpha - w|
  double consistency = 0.0;       // max |d_F tau_alpha - d_F tau_beta| on base overlaps
  std::size_t points = 0;
  double tolerance = 1e-8;
  bool ok() const { return leafwise_defect <= tolerance; }
};

/// tau = sum_alpha rho_alpha(y_base) tau_alpha, each term restricted to
/// U_alpha x R^f, with the defects measured on `grid`.
FoliationReport assemble_global(const std::vector<Form>& primitives, const Form& w, const ProductBundle& bundle,
                                std::span<const Sample> grid, double tolerance = 1e-8);

}  // namespace pfam
