#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pfam/exterior.hpp"

namespace pfam {

/// Sorted tuple of zero-based cover indices.
using Simplex = std::vector<int>;
using Sample = std::vector<double>;

/// Sorts `s` in place and returns the sign of the sorting permutation, or 0
/// when an index repeats.
int sort_with_sign(Simplex& s);

struct CoverSet {
  std::string name;
  /// U = { y : every predicate > 0 }, checked in order.
  std::vector<Expr> predicates;
  SmoothMap chart;
  Expr bump;
};

struct NerveSimplex {
  Simplex vertices;
  Sample witness;
  std::vector<Sample> samples;
  /// Chart on the intersection; required by the zig-zag reconstruction.
  std::optional<SmoothMap> chart;
};

/// Finite cover of an open region M of R^dim with a declared nerve.
class GoodCover {
 public:
  int dim = 0;
  std::vector<CoverSet> sets;
  std::vector<NerveSimplex> nerve;
  /// M = { y : every predicate > 0 } intersected with the bounding box.
  std::vector<Expr> region;
  std::vector<std::pair<double, double>> box;
  std::vector<Sample> region_samples;

  int size() const { return static_cast<int>(sets.size()); }
  /// Declared simplex, or nullptr.
  const NerveSimplex* find(const Simplex& sorted) const;
  bool declared(const Simplex& sorted) const { return find(sorted) != nullptr; }
  /// Declared simplices with p+1 vertices, in declaration order.
  std::vector<const NerveSimplex*> simplices(int p) const;
  int max_simplex_degree() const;

  bool contains(int alpha, std::span<const double> y) const;
  bool in_region(std::span<const double> y) const;
  /// Smallest index whose set contains y, or -1.
  int first_containing(std::span<const double> y) const;

  std::string name(const Simplex& s) const;
  /// Chart of a 0-simplex is the set chart; higher simplices use their own.
  const SmoothMap& chart(const Simplex& s) const;
  /// `body` where y lies in U_alpha, 0 elsewhere.
  Expr restrict_to(int alpha, const Expr& body) const;

  /// Witness followed by samples.
  std::vector<Sample> points(const Simplex& s) const;

  /// Fresh random samples of the intersection by rejection in the box.
  std::vector<Sample> sample_intersection(const Simplex& s, int count, std::uint64_t seed) const;
  /// Fills region_samples (when empty) and any simplex with fewer than
  /// `min_samples` samples, deterministically from `seed`.
  void ensure_samples(int region_count, int min_samples, std::uint64_t seed);
};

struct ValidationIssue {
  std::string kind;  // nerve, support, partition, chart, coverage
  std::string location;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  std::size_t points_checked = 0;
  bool ok() const { return issues.empty(); }
};

/// Sampling check of every GoodCover invariant; never throws on violations.
ValidationReport validate_cover(const GoodCover& cover);

/// Cech p-cochain of q-forms: one form per declared p-simplex.
class Cochain {
 public:
  Cochain(const GoodCover& cover, int cech_degree, int form_degree);

  const GoodCover& cover() const { return *cover_; }
  int degree() const { return degree_; }
  int form_degree() const { return form_degree_; }
  const std::map<Simplex, Form>& components() const { return components_; }

  void set(Simplex s, Form w);
  /// Component on any ordering of the vertices, with the permutation sign;
  /// zero on repeated vertices and on simplices absent from the nerve.
  Form get(Simplex s) const;
  Form zero_form(const Simplex& s) const;

  template <class F>
  Cochain map_forms(int form_degree, F&& f) const {
    Cochain out(*cover_, degree_, form_degree);
    for (const auto& [s, w] : components_) out.set(s, f(w));
    return out;
  }

  Cochain& operator+=(const Cochain& o);
  Cochain& operator-=(const Cochain& o);
  friend Cochain operator+(Cochain a, const Cochain& b) { return a += b; }
  friend Cochain operator-(Cochain a, const Cochain& b) { return a -= b; }

 private:
  const GoodCover* cover_;
  int degree_;
  int form_degree_;
  std::map<Simplex, Form> components_;
};

Cochain coboundary(const Cochain& c);
Cochain ext_d(const Cochain& c);

/// rho_alpha = psi_alpha / sum_beta psi_beta. Throws PreconditionError if the
/// sum vanishes at a region sample.
std::vector<Expr> partition_of_unity(const GoodCover& cover);

/// (K xi)_sigma = sum_beta rho_beta xi_{beta sigma}, each term restricted to
/// U_beta. Satisfies delta K + K delta = id in Cech degree >= 1.
Cochain mv_homotopy_K(const Cochain& c, const std::vector<Expr>& rho);

/// Largest coefficient magnitude of each component over its simplex points,
/// for every parameter sample (empty list means no parameters).
struct SampleMax {
  double value = 0.0;
  std::string where;
};
SampleMax cochain_max(const Cochain& c, std::span<const Sample> params);

/// Global form assembled from a Cech 0-cocycle: at y it uses the smallest
/// index whose set contains y.
class GluedForm {
 public:
  explicit GluedForm(Cochain c);

  const Cochain& cochain() const { return c_; }
  int branch(std::span<const double> y) const;
  std::map<IndexSet, double> evaluate(std::span<const double> y, std::span<const double> x = {}) const;
  /// Largest disagreement between all branches containing y.
  double mismatch(std::span<const double> y, std::span<const double> x = {}) const;

 private:
  Cochain c_;
};

/// Checks that delta c vanishes within `tolerance` at the simplex points for
/// every parameter sample, then glues. Throws PreconditionError otherwise.
GluedForm glue_cochain0(const Cochain& c, std::span<const Sample> params, double tolerance = 1e-9);

}  // namespace pfam
