#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pfam/cech.hpp"
#include "pfam/exterior.hpp"

namespace pfam {

/// Parameter box with a tensor grid of `points` values per axis (endpoints
/// included).
struct ParameterBox {
  std::vector<std::pair<double, double>> ranges;
  int points = 20;

  int count() const { return static_cast<int>(ranges.size()); }
  std::vector<Sample> grid() const;
  Sample centre() const;
};

/// A family of closed p-forms omega_x on M.
struct FamilySpec {
  Form omega;
  ParameterBox parameters;

  int degree() const { return omega.degree(); }
};

/// Max of |d omega_x| over the cover's region samples and the given parameters.
double closedness_defect(const FamilySpec& f, const GoodCover& cover, std::span<const Sample> params);

/// Reference primitives eta_x of omega_x, as the paper assumes them to exist.
class ReferencePrimitiveProvider {
 public:
  static ReferencePrimitiveProvider symbolic(Form eta);
  /// eta + step(x_{parameter} - threshold) * term, with `term` closed.
  static ReferencePrimitiveProvider jittered(Form eta, int parameter, double threshold, Form term);
  static ReferencePrimitiveProvider callback(int dim, int degree, std::function<Form(std::span<const double>)> f);

  const std::string& mode() const { return mode_; }
  int degree() const { return degree_; }
  /// The provider's form with the parameter values substituted.
  Form at(std::span<const double> x) const;
  /// Jitter location (parameter index, threshold) when jittered.
  std::optional<std::pair<int, double>> jitter() const { return jitter_; }

 private:
  std::string mode_;
  int degree_ = 0;
  std::optional<Form> symbolic_;
  std::optional<std::pair<int, double>> jitter_;
  std::function<Form(std::span<const double>)> callback_;
};

/// Substitutes numeric parameter values into every coefficient.
Form at_parameters(const Form& w, std::span<const double> x);
Cochain at_parameters(const Cochain& c, std::span<const double> x);

/// Named numeric identity check. `asserted` checks decide success; the rest
/// are informational.
struct Check {
  Check() = default;
  Check(std::string name, double value, double tolerance, bool asserted = true, std::string where = {})
      : name(std::move(name)), value(value), tolerance(tolerance), asserted(asserted), where(std::move(where)) {}

  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool asserted = true;
  std::string where;
  bool pass() const { return value <= tolerance; }
};

struct Tolerances {
  double residual = 1e-7;
  double gluing = 1e-8;
  double cocycle = 1e-8;
  double constancy = 1e-9;
  double cycle = 1e-8;
  double solve = 1e-8;
  double intermediate = 1e-7;
  double delta_g = 1e-9;
  double delta_G = 1e-8;
  double closed = 1e-9;
  double provider = 1e-9;
  double oracle = 1e-8;
  double local = 1e-8;
  double agreement = 1e-7;
  double leafwise = 1e-8;
};

/// tau^alpha = homotopy(omega restricted to U_alpha, u_alpha).
Cochain local_primitives(const Form& omega, const GoodCover& cover);

struct OverlapConstants {
  std::map<Simplex, Expr> values;  // C^{a0 a1} as expressions in x
  double spread = 0.0;             // largest deviation from the witness value
  std::string where;
};

/// C^{a0 a1}(x) = (tau^{a1} - tau^{a0}) at the edge witness; constancy over
/// the edge samples is checked for each parameter sample.
OverlapConstants overlap_constants(const Cochain& tau, std::span<const Sample> params, double tolerance = 1e-9);

struct ExtendedConstants {
  std::vector<Expr> to_base;  // C^{base(a) a}
  std::vector<int> base;      // smallest index of a's connected component
  double defect = 0.0;        // largest cycle inconsistency over parameters
  std::string defect_edge;
};

/// BFS from the smallest index of each connected component of the overlap
/// graph, summing edge constants along tree paths; non-tree edges are checked
/// for cycle consistency. Throws NotExactError when the defect exceeds
/// `tolerance`.
ExtendedConstants extend_constants(const OverlapConstants& c, const GoodCover& cover, std::span<const Sample> params,
                                   double tolerance = 1e-8);

/// Output of a reconstruction: per-set primitives tau~^alpha, for any
/// parameter value, plus the identity checks made along the way.
struct ReconstructionResult {
  std::string mode;
  int primitive_degree = 0;
  /// Set when the primitives are expressions in x (smooth by construction).
  std::optional<Cochain> symbolic;
  std::vector<Check> checks;
  std::map<std::string, double> info;

  Cochain at(std::span<const double> x) const;
  bool ok() const;
  void add(Check c) { checks.push_back(std::move(c)); }

  std::function<Cochain(std::span<const double>)> per_parameter;
};

ReconstructionResult reconstruct_deg1_chain(const FamilySpec& f, const GoodCover& cover, const Tolerances& tol = {});
ReconstructionResult reconstruct_deg1_paper(const FamilySpec& f, const GoodCover& cover,
                                            const ReferencePrimitiveProvider& provider, const Tolerances& tol = {});
ReconstructionResult reconstruct_paper_direct(const FamilySpec& f, const GoodCover& cover,
                                              const ReferencePrimitiveProvider& provider, const Tolerances& tol = {});
ReconstructionResult reconstruct_zigzag(const FamilySpec& f, const GoodCover& cover, const Tolerances& tol = {});

/// Region points on a tensor grid of `per_axis` cell centres over the box.
std::vector<Sample> region_grid(const GoodCover& cover, int per_axis);

/// Evaluates max |d tau_x - omega_x| over m_grid x x_grid, the gluing
/// mismatch between branches at simplex points, delta tau~ at simplex
/// points and, with an oracle primitive, the spread of tau_x - oracle_x in
/// m. Appends the checks to the result.
void verify_reconstruction(ReconstructionResult& r, const FamilySpec& f, const GoodCover& cover,
                           std::span<const Sample> m_grid, std::span<const Sample> x_grid, const Tolerances& tol,
                           const std::optional<Form>& oracle = std::nullopt);

struct Probe {
  Sample m;
  Sample x;
  int axis = 0;
  double h = 0.0;
};

struct SmoothnessEntry {
  Probe probe;
  IndexSet coefficient = 0;
  double value = 0.0;
  std::vector<double> first;   // central first differences at h, h/2, ..., h/16
  std::vector<double> second;  // second differences at h and h/2
  double growth = 0.0;         // |first(h/16)| / |first(h)|
  bool flagged = false;
};

struct SmoothnessReport {
  std::vector<SmoothnessEntry> entries;
  bool flagged() const;
};

/// First and second difference quotients of x -> f(x)_I along each probe
/// axis; a discontinuity is flagged when the first-difference quotient grows
/// 10-fold or more over four step halvings.
SmoothnessReport smoothness_report(const std::function<std::map<IndexSet, double>(std::span<const double>)>& f,
                                   const std::vector<Probe>& probes, const ParameterBox& box);

/// Probes at the grid centre along every axis, plus the jitter threshold
/// when the provider has one; m is the witness of the first set.
std::vector<Probe> default_probes(const GoodCover& cover, const ParameterBox& box,
                                  const ReferencePrimitiveProvider* provider = nullptr);

}  // namespace pfam
