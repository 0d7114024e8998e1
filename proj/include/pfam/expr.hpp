#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pfam/errors.hpp"

namespace pfam {

inline constexpr int kMaxCoords = 9;
inline constexpr int kMaxParams = 9;
/// Integration variables are t (level 0, the only one the parser accepts)
/// plus internal levels introduced by nested homotopy operators.
inline constexpr int kMaxLevels = 8;

enum class SymbolKind : std::uint8_t { Y, X, T };

/// A coordinate y_i, a parameter x_i or an integration variable t_level.
/// `index` is zero-based: y1 is {Y, 0}.
struct Symbol {
  SymbolKind kind = SymbolKind::Y;
  int index = 0;

  static constexpr Symbol y(int one_based) { return {SymbolKind::Y, one_based - 1}; }
  static constexpr Symbol x(int one_based) { return {SymbolKind::X, one_based - 1}; }
  static constexpr Symbol t(int level = 0) { return {SymbolKind::T, level}; }

  std::string name() const;
  auto operator<=>(const Symbol&) const = default;
};

enum class Func : std::uint8_t { Exp, Log, Sin, Cos, Tan, Atan, Sqrt, Bump, Step };

std::string_view func_name(Func f);

enum class NodeKind : std::uint8_t { Const, Sym, Add, Mul, Apply, Integral, Guard };

struct Node;

/// Immutable smooth scalar expression in canonical form.
///
/// Sums are stored as a numeric constant plus (coefficient, term) pairs,
/// products as (base, integer exponent) pairs. Construction flattens nested
/// sums and products, combines like terms, folds constants and sorts operands
/// by a fixed total order, so structurally equal inputs build identical trees.
class Expr {
 public:
  Expr();
  Expr(double value);  // NOLINT(google-explicit-constructor)

  static Expr constant(double value);
  static Expr symbol(Symbol s);
  static Expr y(int one_based) { return symbol(Symbol::y(one_based)); }
  static Expr x(int one_based) { return symbol(Symbol::x(one_based)); }
  static Expr t(int level = 0) { return symbol(Symbol::t(level)); }

  static Expr apply(Func f, const Expr& arg);
  /// bump(s) * (1 - s^2)^(-weight) on |s| < 1 and 0 elsewhere. Weight 0 is
  /// the plain bump; higher weights appear only through differentiation.
  static Expr bump(const Expr& arg, int weight = 0);
  /// Integral over t_level from 0 to 1, without attempting the polynomial
  /// closed form (see integrate_t for that).
  static Expr integral(int level, const Expr& body);
  /// Evaluates `body` where every predicate is strictly positive, else 0.
  /// Differentiation passes through the guard, which is only sound when the
  /// body vanishes to all orders near the guarded boundary.
  static Expr guard(std::vector<Expr> predicates, const Expr& body);

  const Node& node() const { return *node_; }
  NodeKind kind() const;
  bool is_constant() const { return kind() == NodeKind::Const; }
  bool is_zero() const;
  bool is_one() const;
  std::optional<double> constant_value() const;

  std::uint32_t y_mask() const;
  std::uint32_t x_mask() const;
  /// Free integration variables (bound ones excluded).
  std::uint32_t t_mask() const;
  /// Highest integration level used anywhere, free or bound; -1 if none.
  int max_level() const;
  bool depends_on(Symbol s) const;
  bool has_step() const;
  std::size_t size() const;
  std::size_t hash() const;

  std::string str() const;

  friend Expr operator+(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a, const Expr& b);
  friend Expr operator*(const Expr& a, const Expr& b);
  friend Expr operator/(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a);
  Expr& operator+=(const Expr& o) { return *this = *this + o; }
  Expr& operator-=(const Expr& o) { return *this = *this - o; }
  Expr& operator*=(const Expr& o) { return *this = *this * o; }

  /// Structural equality of canonical forms.
  friend bool operator==(const Expr& a, const Expr& b);

 private:
  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  friend struct ExprBuilder;
  std::shared_ptr<const Node> node_;
};

Expr pow(const Expr& base, int exponent);
inline Expr exp(const Expr& e) { return Expr::apply(Func::Exp, e); }
inline Expr log(const Expr& e) { return Expr::apply(Func::Log, e); }
inline Expr sin(const Expr& e) { return Expr::apply(Func::Sin, e); }
inline Expr cos(const Expr& e) { return Expr::apply(Func::Cos, e); }
inline Expr tan(const Expr& e) { return Expr::apply(Func::Tan, e); }
inline Expr atan(const Expr& e) { return Expr::apply(Func::Atan, e); }
inline Expr sqrt(const Expr& e) { return Expr::apply(Func::Sqrt, e); }
inline Expr step(const Expr& e) { return Expr::apply(Func::Step, e); }

/// Fixed total order used for canonical sorting. Negative, zero or positive.
int compare(const Expr& a, const Expr& b);

struct Node {
  NodeKind kind = NodeKind::Const;
  double value = 0.0;                              // Const value, Add constant term
  Symbol symbol{};                                 // Sym
  std::vector<std::pair<double, Expr>> terms;      // Add
  std::vector<std::pair<Expr, int>> factors;       // Mul
  Func func = Func::Exp;                           // Apply
  int weight = 0;                                  // Apply(Bump)
  int level = 0;                                   // Integral
  std::vector<Expr> children;                      // Apply arg / Integral body / Guard body + predicates

  std::size_t hash = 0;
  std::uint32_t y_mask = 0, x_mask = 0, t_mask = 0;
  int max_level = -1;
  bool has_step = false;
  std::size_t size = 1;
};

/// Assignment of values to coordinates, parameters and integration variables.
class Point {
 public:
  Point() = default;
  Point(std::span<const double> y, std::span<const double> x = {});

  void set_y(int zero_based, double v);
  void set_x(int zero_based, double v);
  void set_t(int level, double v);
  double y(int zero_based) const { return y_[zero_based]; }
  double x(int zero_based) const { return x_[zero_based]; }
  double t(int level) const { return t_[level]; }
  double get(Symbol s) const;
  std::uint32_t y_mask() const { return y_mask_; }
  std::uint32_t x_mask() const { return x_mask_; }
  std::uint32_t t_mask() const { return t_mask_; }

 private:
  std::array<double, kMaxCoords> y_{};
  std::array<double, kMaxParams> x_{};
  std::array<double, kMaxLevels> t_{};
  std::uint32_t y_mask_ = 0, x_mask_ = 0, t_mask_ = 0;
};

/// Symbols the parser accepts: y1..y<coords>, x1..x<params>, t.
struct SymbolContext {
  int coords = kMaxCoords;
  int params = kMaxParams;
};

Expr parse(std::string_view text, SymbolContext context = {});

/// Symbolic partial derivative. Throws DifferentiationError if a step node
/// depends on `s`.
Expr diff(const Expr& e, Symbol s);

/// Numeric evaluation. Throws PreconditionError for unassigned symbols,
/// DomainError outside function domains and QuadratureError when an
/// integral does not converge.
double eval(const Expr& e, const Point& p);
/// Evaluates several expressions at one point, sharing common subexpressions.
std::vector<double> eval(std::span<const Expr> es, const Point& p);

/// Integral over t_level from 0 to 1: exact when the integrand is polynomial
/// in t_level, an Integral node otherwise.
Expr integrate_t(const Expr& e, int level = 0);

/// Coefficients c_k of e = sum_k c_k t_level^k, or nullopt when e is not a
/// polynomial in t_level.
std::optional<std::vector<Expr>> t_polynomial(const Expr& e, int level);

/// Simultaneous substitution of symbols by expressions.
Expr substitute(const Expr& e, const std::map<Symbol, Expr>& replacement);

/// Distributes products and positive integer powers over sums, recursively.
Expr expand(const Expr& e);

/// expand(a - b) reduces to zero, ignoring coefficients below `chop`.
bool symbolically_equal(const Expr& a, const Expr& b, double chop = 1e-12);

/// Adaptive Gauss-Legendre on [a, b] with 15-point panels and bisection,
/// stopping at `tolerance` absolute error or failing after `max_subdivisions`.
struct QuadratureOptions {
  double tolerance = 1e-12;
  int max_subdivisions = 40;
};
template <class F>
double integrate_adaptive(F&& f, double a, double b, QuadratureOptions options = {});

}  // namespace pfam

#include "pfam/quadrature.hpp"
