#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pfam/expr.hpp"

namespace pfam {

/// Strictly increasing multi-index stored as a bit set: bit i stands for dy_{i+1}.
using IndexSet = std::uint32_t;

/// Builds an index set from one-based, strictly increasing indices.
IndexSet index_set(const std::vector<int>& one_based);
/// One-based indices in increasing order.
std::vector<int> indices(IndexSet s);
int degree_of(IndexSet s);
/// Sign of dy_A ^ dy_B relative to dy_{A|B}; 0 when A and B share an index.
int wedge_sign(IndexSet a, IndexSet b);

/// Differential form with expression coefficients on an open region of R^dim.
///
/// Coefficients may depend on coordinates y1..y<dim> and on parameters; a
/// missing multi-index is a zero coefficient. `domain` tags the region (the
/// empty tag means the whole ambient region) and only affects compatibility
/// checks: all forms share the ambient coordinates.
class Form {
 public:
  Form() = default;
  Form(int dim, int degree, std::string domain = {});

  static Form scalar(int dim, const Expr& f, std::string domain = {});
  static Form monomial(int dim, IndexSet index, const Expr& coefficient, std::string domain = {});
  /// Literal from (one-based indices, coefficient) pairs; degree taken from
  /// the first entry or `degree` when the list is empty.
  static Form from_terms(int dim, int degree, const std::vector<std::pair<std::vector<int>, Expr>>& terms,
                         std::string domain = {});

  int dim() const { return dim_; }
  int degree() const { return degree_; }
  const std::string& domain() const { return domain_; }
  const std::map<IndexSet, Expr>& terms() const { return terms_; }
  Expr coefficient(IndexSet index) const;
  bool is_zero() const { return terms_.empty(); }

  /// Adds `c` to the coefficient of dy_index.
  void add(IndexSet index, const Expr& c);
  Form with_domain(std::string domain) const;

  template <class F>
  Form map_coefficients(F&& f) const {
    Form out(dim_, degree_, domain_);
    for (const auto& [i, c] : terms_) out.add(i, f(c));
    return out;
  }

  Form& operator+=(const Form& o);
  Form& operator-=(const Form& o);
  friend Form operator+(Form a, const Form& b) { return a += b; }
  friend Form operator-(Form a, const Form& b) { return a -= b; }
  friend Form operator-(const Form& a);
  friend Form operator*(const Expr& f, const Form& w);

  std::string str() const;

 private:
  void check_compatible(const Form& o) const;

  int dim_ = 0;
  int degree_ = 0;
  std::string domain_;
  std::map<IndexSet, Expr> terms_;
};

/// Coefficient values at a point, keyed like Form::terms().
std::map<IndexSet, double> evaluate(const Form& w, const Point& p);
/// Largest absolute coefficient value at p (0 for the zero form).
double max_abs(const Form& w, const Point& p);

Form wedge(const Form& a, const Form& b);

/// Exterior derivative in the coordinates y1..y<dim>; parameters are constants.
Form ext_d(const Form& w);
/// Exterior derivative that only differentiates along the coordinates in
/// `directions` (used for differentials along the fibres of a product).
Form ext_d_along(const Form& w, IndexSet directions);

/// Smooth map R^source -> R^target given by component expressions in
/// y1..y<source>, optionally with a declared inverse.
class SmoothMap {
 public:
  SmoothMap() = default;
  SmoothMap(int source_dim, std::vector<Expr> components, std::optional<std::vector<Expr>> inverse = std::nullopt);

  static SmoothMap identity(int dim);

  int source_dim() const { return source_dim_; }
  int target_dim() const { return static_cast<int>(components_.size()); }
  const std::vector<Expr>& components() const { return components_; }
  bool has_inverse() const { return inverse_.has_value(); }
  bool is_identity() const { return identity_; }
  SmoothMap inverse() const;

  std::vector<double> apply(std::span<const double> y) const;
  /// max_i |u^{-1}(u(y))_i - y_i|.
  double roundtrip_error(std::span<const double> y) const;

 private:
  int source_dim_ = 0;
  std::vector<Expr> components_;
  std::optional<std::vector<Expr>> inverse_;
  bool identity_ = false;
};

Form pullback(const SmoothMap& phi, const Form& w);

/// Insertion of the vector field sum_i field[i] d/dy_{i+1}.
Form interior(const Form& w, const std::vector<Expr>& field);
/// Insertion of the radial field sum_i y_i d/dy_i.
Form interior_radial(const Form& w);

/// Homotopy operator of the Poincare lemma for the identity chart on R^dim:
/// the integral over t in [0, 1] of (1/t) times the pullback of the radial
/// insertion along y -> t y. The 1/t is cancelled analytically, so the
/// integrand carries t^(p-1). Satisfies d H + H d = id in degree >= 1.
Form homotopy(const Form& w);
/// Chart-relative version u^*(H((u^{-1})^* w)); requires a declared inverse.
Form homotopy(const Form& w, const SmoothMap& chart);
/// Homotopy along the coordinates in `directions` only, contracting them to
/// `center` (one value per coordinate, unused entries ignored). Other
/// coordinates are treated as parameters.
Form homotopy_along(const Form& w, IndexSet directions, std::span<const double> center);

}  // namespace pfam
