#include "pfam/expr.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>
#include <unordered_map>

#include <fmt/format.h>

namespace pfam {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  // splitmix64 finalizer applied to the running state
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ULL;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebULL;
  h ^= h >> 31;
  return h;
}

std::uint64_t double_bits(double v) {
  if (v == 0.0) v = 0.0;  // fold -0
  return std::bit_cast<std::uint64_t>(v);
}

std::uint32_t bit(int i) { return std::uint32_t{1} << i; }

}  // namespace

std::string Symbol::name() const {
  switch (kind) {
    case SymbolKind::Y: return "y" + std::to_string(index + 1);
    case SymbolKind::X: return "x" + std::to_string(index + 1);
    case SymbolKind::T: return index == 0 ? std::string("t") : "t" + std::to_string(index);
  }
  return "?";
}

std::string_view func_name(Func f) {
  switch (f) {
    case Func::Exp: return "exp";
    case Func::Log: return "log";
    case Func::Sin: return "sin";
    case Func::Cos: return "cos";
    case Func::Tan: return "tan";
    case Func::Atan: return "atan";
    case Func::Sqrt: return "sqrt";
    case Func::Bump: return "bump";
    case Func::Step: return "step";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Node construction

struct ExprBuilder {
  static Expr wrap(Node&& n) {
    finalize(n);
    return Expr(std::make_shared<const Node>(std::move(n)));
  }

  static void finalize(Node& n) {
    std::uint64_t h = mix(0x51ed27u, static_cast<std::uint64_t>(n.kind));
    n.size = 1;
    auto absorb = [&](const Expr& c) {
      const Node& cn = c.node();
      h = mix(h, cn.hash);
      n.y_mask |= cn.y_mask;
      n.x_mask |= cn.x_mask;
      n.t_mask |= cn.t_mask;
      n.max_level = std::max(n.max_level, cn.max_level);
      n.has_step = n.has_step || cn.has_step;
      n.size += cn.size;
    };
    switch (n.kind) {
      case NodeKind::Const:
        h = mix(h, double_bits(n.value));
        break;
      case NodeKind::Sym:
        h = mix(h, static_cast<std::uint64_t>(n.symbol.kind) * 64 + n.symbol.index);
        if (n.symbol.kind == SymbolKind::Y) n.y_mask = bit(n.symbol.index);
        if (n.symbol.kind == SymbolKind::X) n.x_mask = bit(n.symbol.index);
        if (n.symbol.kind == SymbolKind::T) {
          n.t_mask = bit(n.symbol.index);
          n.max_level = n.symbol.index;
        }
        break;
      case NodeKind::Add:
        h = mix(h, double_bits(n.value));
        for (const auto& [c, t] : n.terms) {
          h = mix(h, double_bits(c));
          absorb(t);
        }
        break;
      case NodeKind::Mul:
        for (const auto& [b, k] : n.factors) {
          h = mix(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(k)));
          absorb(b);
        }
        break;
      case NodeKind::Apply:
        h = mix(h, static_cast<std::uint64_t>(n.func) * 131 + n.weight);
        absorb(n.children[0]);
        if (n.func == Func::Step) n.has_step = true;
        break;
      case NodeKind::Integral:
        h = mix(h, static_cast<std::uint64_t>(n.level));
        absorb(n.children[0]);
        n.t_mask &= ~bit(n.level);
        n.max_level = std::max(n.max_level, n.level);
        break;
      case NodeKind::Guard:
        for (const auto& c : n.children) absorb(c);
        break;
    }
    n.hash = static_cast<std::size_t>(h);
  }

  static Expr constant(double v) {
    Node n;
    n.kind = NodeKind::Const;
    n.value = (v == 0.0) ? 0.0 : v;
    return wrap(std::move(n));
  }

  // Sum: constant + sum c_i * e_i. Nested sums are flattened, like terms
  // merged, and coefficients that cancel to rounding level dropped.
  static Expr sum(double constant, std::vector<std::pair<double, Expr>> in) {
    std::vector<std::pair<double, Expr>> flat;
    flat.reserve(in.size());
    for (auto& [c, e] : in) {
      if (c == 0.0) continue;
      const Node& en = e.node();
      if (en.kind == NodeKind::Const) {
        constant += c * en.value;
      } else if (en.kind == NodeKind::Add) {
        constant += c * en.value;
        for (const auto& [ci, ti] : en.terms) flat.emplace_back(c * ci, ti);
      } else {
        flat.emplace_back(c, std::move(e));
      }
    }
    std::stable_sort(flat.begin(), flat.end(), [](const auto& a, const auto& b) {
      return compare(a.second, b.second) < 0;
    });
    std::vector<std::pair<double, Expr>> merged;
    for (std::size_t i = 0; i < flat.size();) {
      double total = flat[i].first;
      double scale = std::abs(flat[i].first);
      std::size_t j = i + 1;
      while (j < flat.size() && compare(flat[j].second, flat[i].second) == 0) {
        total += flat[j].first;
        scale = std::max(scale, std::abs(flat[j].first));
        ++j;
      }
      if (j - i > 1 && std::abs(total) <= 8.0 * kEps * scale) total = 0.0;
      if (total != 0.0) merged.emplace_back(total, flat[i].second);
      i = j;
    }
    if (pythagoras(merged)) return sum(constant, std::move(merged));
    if (merged.empty()) return constant_expr(constant);
    if (merged.size() == 1 && constant == 0.0 && merged[0].first == 1.0) return merged[0].second;
    Node n;
    n.kind = NodeKind::Add;
    n.value = constant == 0.0 ? 0.0 : constant;
    n.terms = std::move(merged);
    return wrap(std::move(n));
  }

  static Expr constant_expr(double v) { return constant(v); }

  static std::vector<std::pair<Expr, int>> factors_of(const Expr& e) {
    if (e.kind() == NodeKind::Mul) return e.node().factors;
    return {{e, 1}};
  }

  // Rewrites one pair c*M*cos(u)^k + c*M*cos(u)^(k-2)*sin(u)^2 into
  // c*M*cos(u)^(k-2). Returns false when no such pair exists.
  static bool pythagoras(std::vector<std::pair<double, Expr>>& terms) {
    for (std::size_t i = 0; i < terms.size(); ++i) {
      const auto factors = factors_of(terms[i].second);
      for (std::size_t f = 0; f < factors.size(); ++f) {
        const Node& b = factors[f].first.node();
        if (b.kind != NodeKind::Apply || b.func != Func::Cos || factors[f].second < 2) continue;
        auto reduced = factors;
        reduced[f].second -= 2;
        auto partner = reduced;
        partner.emplace_back(Expr::apply(Func::Sin, b.children[0]), 2);
        const Expr target = product(1.0, partner);
        for (std::size_t j = 0; j < terms.size(); ++j) {
          if (j == i || compare(terms[j].second, target) != 0) continue;
          const double ci = terms[i].first, cj = terms[j].first;
          if (std::abs(ci - cj) > 8.0 * kEps * std::max(std::abs(ci), std::abs(cj))) continue;
          const Expr rest = product(1.0, reduced);
          terms[i] = {ci, rest};
          terms.erase(terms.begin() + static_cast<std::ptrdiff_t>(j));
          return true;
        }
      }
    }
    return false;
  }

  // Product: coef * prod b_i^k_i.
  static Expr product(double coef, std::vector<std::pair<Expr, int>> in) {
    std::vector<std::pair<Expr, int>> flat;
    std::vector<std::pair<Expr, int>> work = std::move(in);
    while (!work.empty()) {
      auto [b, k] = std::move(work.back());
      work.pop_back();
      if (k == 0) continue;
      const Node& bn = b.node();
      if (bn.kind == NodeKind::Const) {
        if (bn.value == 0.0 && k < 0) throw DomainError("division by zero");
        coef *= std::pow(bn.value, k);
      } else if (bn.kind == NodeKind::Mul) {
        for (const auto& [bi, ki] : bn.factors) work.emplace_back(bi, ki * k);
      } else if (bn.kind == NodeKind::Add && bn.value == 0.0 && bn.terms.size() == 1) {
        coef *= std::pow(bn.terms[0].first, k);
        work.emplace_back(bn.terms[0].second, k);
      } else {
        flat.emplace_back(std::move(b), k);
      }
    }
    if (coef == 0.0) return constant(0.0);
    std::stable_sort(flat.begin(), flat.end(), [](const auto& a, const auto& b) {
      return compare(a.first, b.first) < 0;
    });
    std::vector<std::pair<Expr, int>> merged;
    for (std::size_t i = 0; i < flat.size();) {
      int total = flat[i].second;
      std::size_t j = i + 1;
      while (j < flat.size() && compare(flat[j].first, flat[i].first) == 0) {
        total += flat[j].second;
        ++j;
      }
      if (total != 0) merged.emplace_back(flat[i].first, total);
      i = j;
    }
    if (merged.empty()) return constant(coef);
    Expr prod;
    if (merged.size() == 1 && merged[0].second == 1) {
      prod = merged[0].first;
    } else {
      Node n;
      n.kind = NodeKind::Mul;
      n.factors = std::move(merged);
      prod = wrap(std::move(n));
    }
    if (coef == 1.0) return prod;
    if (prod.kind() == NodeKind::Add) {
      std::vector<std::pair<double, Expr>> scaled;
      for (const auto& [c, t] : prod.node().terms) scaled.emplace_back(coef * c, t);
      return sum(coef * prod.node().value, std::move(scaled));
    }
    return sum(0.0, {{coef, prod}});
  }
};

// ---------------------------------------------------------------------------
// Expr basics

namespace {
const Expr& zero_expr() {
  static const Expr z = ExprBuilder::constant(0.0);
  return z;
}
}  // namespace

Expr::Expr() : node_(zero_expr().node_) {}
Expr::Expr(double value) : node_(ExprBuilder::constant(value).node_) {}

Expr Expr::constant(double value) { return ExprBuilder::constant(value); }

Expr Expr::symbol(Symbol s) {
  const int limit = s.kind == SymbolKind::T ? kMaxLevels : kMaxCoords;
  if (s.index < 0 || s.index >= limit) throw PreconditionError("symbol index out of range");
  Node n;
  n.kind = NodeKind::Sym;
  n.symbol = s;
  return ExprBuilder::wrap(std::move(n));
}

namespace {

double apply_numeric(Func f, int weight, double a) {
  switch (f) {
    case Func::Exp: return std::exp(a);
    case Func::Log:
      if (!(a > 0.0)) throw DomainError("log of nonpositive value " + std::to_string(a));
      return std::log(a);
    case Func::Sin: return std::sin(a);
    case Func::Cos: return std::cos(a);
    case Func::Tan: return std::tan(a);
    case Func::Atan: return std::atan(a);
    case Func::Sqrt:
      if (a < 0.0) throw DomainError("sqrt of negative value " + std::to_string(a));
      return std::sqrt(a);
    case Func::Bump: {
      if (!(std::abs(a) < 1.0)) return 0.0;
      const double u = 1.0 - a * a;
      // exp(-1/u) * u^-weight, combined in the exponent so it stays finite
      return std::exp(-1.0 / u - weight * std::log(u));
    }
    case Func::Step: return a >= 0.0 ? 1.0 : 0.0;
  }
  return 0.0;
}

}  // namespace

Expr Expr::apply(Func f, const Expr& arg) {
  if (f == Func::Bump) return bump(arg, 0);
  if (auto v = arg.constant_value()) return constant(apply_numeric(f, 0, *v));
  Node n;
  n.kind = NodeKind::Apply;
  n.func = f;
  n.children = {arg};
  return ExprBuilder::wrap(std::move(n));
}

Expr Expr::bump(const Expr& arg, int weight) {
  if (auto v = arg.constant_value()) return constant(apply_numeric(Func::Bump, weight, *v));
  Node n;
  n.kind = NodeKind::Apply;
  n.func = Func::Bump;
  n.weight = weight;
  n.children = {arg};
  return ExprBuilder::wrap(std::move(n));
}

Expr Expr::integral(int level, const Expr& body) {
  if (level < 0 || level >= kMaxLevels) throw PreconditionError("integration level out of range");
  if (!(body.t_mask() & bit(level))) return body;
  Node n;
  n.kind = NodeKind::Integral;
  n.level = level;
  n.children = {body};
  return ExprBuilder::wrap(std::move(n));
}

Expr Expr::guard(std::vector<Expr> predicates, const Expr& body) {
  if (body.is_zero()) return body;
  if (predicates.empty()) return body;
  Node n;
  n.kind = NodeKind::Guard;
  n.children.reserve(predicates.size() + 1);
  n.children.push_back(body);
  for (auto& p : predicates) n.children.push_back(std::move(p));
  return ExprBuilder::wrap(std::move(n));
}

NodeKind Expr::kind() const { return node_->kind; }
bool Expr::is_zero() const { return node_->kind == NodeKind::Const && node_->value == 0.0; }
bool Expr::is_one() const { return node_->kind == NodeKind::Const && node_->value == 1.0; }
std::optional<double> Expr::constant_value() const {
  if (node_->kind == NodeKind::Const) return node_->value;
  return std::nullopt;
}
std::uint32_t Expr::y_mask() const { return node_->y_mask; }
std::uint32_t Expr::x_mask() const { return node_->x_mask; }
std::uint32_t Expr::t_mask() const { return node_->t_mask; }
int Expr::max_level() const { return node_->max_level; }
bool Expr::has_step() const { return node_->has_step; }
std::size_t Expr::size() const { return node_->size; }
std::size_t Expr::hash() const { return node_->hash; }

bool Expr::depends_on(Symbol s) const {
  switch (s.kind) {
    case SymbolKind::Y: return node_->y_mask & bit(s.index);
    case SymbolKind::X: return node_->x_mask & bit(s.index);
    case SymbolKind::T: return node_->t_mask & bit(s.index);
  }
  return false;
}

Expr operator+(const Expr& a, const Expr& b) {
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  return ExprBuilder::sum(0.0, {{1.0, a}, {1.0, b}});
}
Expr operator-(const Expr& a, const Expr& b) {
  if (b.is_zero()) return a;
  return ExprBuilder::sum(0.0, {{1.0, a}, {-1.0, b}});
}
Expr operator-(const Expr& a) { return ExprBuilder::sum(0.0, {{-1.0, a}}); }
Expr operator*(const Expr& a, const Expr& b) {
  if (a.is_zero() || b.is_zero()) return Expr();
  if (a.is_one()) return b;
  if (b.is_one()) return a;
  return ExprBuilder::product(1.0, {{a, 1}, {b, 1}});
}
Expr operator/(const Expr& a, const Expr& b) {
  if (b.is_zero()) throw DomainError("division by zero");
  if (a.is_zero()) return Expr();
  return ExprBuilder::product(1.0, {{a, 1}, {b, -1}});
}
Expr pow(const Expr& base, int exponent) {
  if (exponent == 0) return Expr(1.0);
  if (exponent == 1) return base;
  return ExprBuilder::product(1.0, {{base, exponent}});
}

int compare(const Expr& a, const Expr& b) {
  const Node& x = a.node();
  const Node& y = b.node();
  if (&x == &y) return 0;
  if (x.kind != y.kind) return x.kind < y.kind ? -1 : 1;
  switch (x.kind) {
    case NodeKind::Const:
      if (x.value == y.value) return 0;
      return x.value < y.value ? -1 : 1;
    case NodeKind::Sym:
      if (x.symbol == y.symbol) return 0;
      return x.symbol < y.symbol ? -1 : 1;
    default: break;
  }
  if (x.hash != y.hash) return x.hash < y.hash ? -1 : 1;
  switch (x.kind) {
    case NodeKind::Add: {
      if (x.value != y.value) return x.value < y.value ? -1 : 1;
      if (x.terms.size() != y.terms.size()) return x.terms.size() < y.terms.size() ? -1 : 1;
      for (std::size_t i = 0; i < x.terms.size(); ++i) {
        if (x.terms[i].first != y.terms[i].first) return x.terms[i].first < y.terms[i].first ? -1 : 1;
        if (int c = compare(x.terms[i].second, y.terms[i].second)) return c;
      }
      return 0;
    }
    case NodeKind::Mul: {
      if (x.factors.size() != y.factors.size()) return x.factors.size() < y.factors.size() ? -1 : 1;
      for (std::size_t i = 0; i < x.factors.size(); ++i) {
        if (x.factors[i].second != y.factors[i].second) return x.factors[i].second < y.factors[i].second ? -1 : 1;
        if (int c = compare(x.factors[i].first, y.factors[i].first)) return c;
      }
      return 0;
    }
    case NodeKind::Apply:
      if (x.func != y.func) return x.func < y.func ? -1 : 1;
      if (x.weight != y.weight) return x.weight < y.weight ? -1 : 1;
      return compare(x.children[0], y.children[0]);
    case NodeKind::Integral:
      if (x.level != y.level) return x.level < y.level ? -1 : 1;
      return compare(x.children[0], y.children[0]);
    case NodeKind::Guard:
      if (x.children.size() != y.children.size()) return x.children.size() < y.children.size() ? -1 : 1;
      for (std::size_t i = 0; i < x.children.size(); ++i) {
        if (int c = compare(x.children[i], y.children[i])) return c;
      }
      return 0;
    default: return 0;
  }
}

bool operator==(const Expr& a, const Expr& b) { return compare(a, b) == 0; }

// ---------------------------------------------------------------------------
// Printing

namespace {

std::string number(double v) { return fmt::format("{}", v); }

// Precedence: 1 sum, 2 product, 3 power base.
std::string print(const Expr& e, int context);

std::string print_mul(const Node& n) {
  std::string num, den;
  for (const auto& [b, k] : n.factors) {
    std::string s = print(b, 3);
    const int a = std::abs(k);
    if (a != 1) s += "^" + std::to_string(a);
    std::string& target = k > 0 ? num : den;
    if (k > 0 && !target.empty()) target += "*";
    if (k < 0) target += "/";
    target += s;
  }
  if (num.empty()) num = "1";
  return num + den;
}

std::string print_term(double c, const Expr& t, bool first) {
  const std::string body = print(t, 2);
  std::string out;
  if (first) {
    if (c == 1.0) return body;
    return number(c) + "*" + body;
  }
  if (c < 0) {
    out = " - ";
    c = -c;
  } else {
    out = " + ";
  }
  if (c != 1.0) out += number(c) + "*";
  return out + body;
}

std::string print(const Expr& e, int context) {
  const Node& n = e.node();
  switch (n.kind) {
    case NodeKind::Const: {
      std::string s = number(n.value);
      if (n.value < 0 && context >= 2) return "(" + s + ")";
      return s;
    }
    case NodeKind::Sym: return n.symbol.name();
    case NodeKind::Add: {
      std::string s;
      bool first = true;
      for (const auto& [c, t] : n.terms) {
        s += print_term(c, t, first);
        first = false;
      }
      if (n.value != 0.0) s += (n.value < 0 ? " - " : " + ") + number(std::abs(n.value));
      return context >= 2 ? "(" + s + ")" : s;
    }
    case NodeKind::Mul: {
      std::string s = print_mul(n);
      return context >= 3 ? "(" + s + ")" : s;
    }
    case NodeKind::Apply: {
      std::string name(func_name(n.func));
      if (n.func == Func::Bump && n.weight != 0) name += "w" + std::to_string(n.weight);
      return name + "(" + print(n.children[0], 0) + ")";
    }
    case NodeKind::Integral:
      return "integral[" + Symbol::t(n.level).name() + "](" + print(n.children[0], 0) + ")";
    case NodeKind::Guard: {
      std::string s = "guard(";
      for (std::size_t i = 1; i < n.children.size(); ++i) {
        if (i > 1) s += ", ";
        s += print(n.children[i], 0);
      }
      return s + "; " + print(n.children[0], 0) + ")";
    }
  }
  return "?";
}

}  // namespace

std::string Expr::str() const { return print(*this, 0); }

// ---------------------------------------------------------------------------
// Parsing

namespace {

class Parser {
 public:
  Parser(std::string_view text, SymbolContext ctx) : text_(text), ctx_(ctx) {}

  Expr run() {
    Expr e = parse_expr();
    skip();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError("syntax error: " + msg, pos_); }

  void skip() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool peek(char c) {
    skip();
    return pos_ < text_.size() && text_[pos_] == c;
  }
  bool accept(char c) {
    if (peek(c)) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr parse_expr() {
    Expr e = parse_term();
    for (;;) {
      if (accept('+')) {
        e = e + parse_term();
      } else if (accept('-')) {
        e = e - parse_term();
      } else {
        return e;
      }
    }
  }

  Expr parse_term() {
    Expr e = parse_factor();
    for (;;) {
      if (accept('*')) {
        e = e * parse_factor();
      } else if (peek('/')) {
        const std::size_t at = pos_;
        ++pos_;
        Expr d = parse_factor();
        if (d.is_zero()) throw ParseError("division by zero", at);
        e = e / d;
      } else {
        return e;
      }
    }
  }

  Expr parse_factor() {
    Expr b = parse_base();
    if (accept('^')) {
      skip();
      const std::size_t start = pos_;
      bool negative = false;
      if (pos_ < text_.size() && text_[pos_] == '-') {
        negative = true;
        ++pos_;
      }
      std::size_t digits = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      if (digits == pos_) {
        pos_ = start;
        fail("expected integer exponent");
      }
      const int k = std::stoi(std::string(text_.substr(digits, pos_ - digits)));
      if (negative && b.is_zero()) throw ParseError("division by zero", start);
      b = pow(b, negative ? -k : k);
    }
    return b;
  }

  Expr parse_base() {
    skip();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const char c = text_[pos_];
    if (c == '-') {
      ++pos_;
      return -parse_base();
    }
    if (c == '(') {
      ++pos_;
      Expr e = parse_expr();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c))) return parse_identifier();
    fail("unexpected '" + std::string(1, c) + "'");
  }

  Expr parse_number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t n = 0;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        ++pos_;
        ++n;
      }
      return n;
    };
    std::size_t n = digits();
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      n += digits();
    }
    if (n == 0) {
      pos_ = start;
      fail("malformed number");
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      const std::size_t save = pos_;
      ++pos_;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (digits() == 0) {
        pos_ = save;
        fail("malformed exponent");
      }
    }
    return Expr::constant(std::stod(std::string(text_.substr(start, pos_ - start))));
  }

  Expr parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    const std::size_t letters_end = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    const std::string_view word = text_.substr(start, pos_ - start);
    const std::string_view letters = text_.substr(start, letters_end - start);

    static constexpr std::pair<std::string_view, Func> kFuncs[] = {
        {"exp", Func::Exp}, {"log", Func::Log},   {"sin", Func::Sin},   {"cos", Func::Cos},   {"tan", Func::Tan},
        {"atan", Func::Atan}, {"sqrt", Func::Sqrt}, {"bump", Func::Bump}, {"step", Func::Step},
    };
    if (letters_end == pos_) {
      for (const auto& [name, f] : kFuncs) {
        if (word == name) {
          if (!accept('(')) fail("expected '(' after " + std::string(name));
          Expr arg = parse_expr();
          if (!accept(')')) fail("expected ')'");
          return Expr::apply(f, arg);
        }
      }
    }
    if (word == "t") return Expr::t(0);
    if (letters.size() == 1 && pos_ - letters_end == 1) {
      const int idx = text_[letters_end] - '0';
      if (letters == "y" && idx >= 1 && idx <= ctx_.coords) return Expr::y(idx);
      if (letters == "x" && idx >= 1 && idx <= ctx_.params) return Expr::x(idx);
    }
    throw ParseError("unknown symbol '" + std::string(word) + "'", start);
  }

  std::string_view text_;
  SymbolContext ctx_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse(std::string_view text, SymbolContext context) { return Parser(text, context).run(); }

// ---------------------------------------------------------------------------
// Differentiation

namespace {

class Differentiator {
 public:
  explicit Differentiator(Symbol s) : s_(s) {}

  Expr operator()(const Expr& e) {
    if (!e.depends_on(s_)) return Expr();
    const Node& n = e.node();
    if (auto it = memo_.find(&n); it != memo_.end()) return it->second;
    Expr out = compute(e);
    memo_.emplace(&n, out);
    return out;
  }

 private:
  Expr compute(const Expr& e) {
    const Node& n = e.node();
    switch (n.kind) {
      case NodeKind::Const: return Expr();
      case NodeKind::Sym: return Expr(1.0);
      case NodeKind::Add: {
        std::vector<std::pair<double, Expr>> parts;
        for (const auto& [c, t] : n.terms) {
          Expr dt = (*this)(t);
          if (!dt.is_zero()) parts.emplace_back(c, std::move(dt));
        }
        return ExprBuilder::sum(0.0, std::move(parts));
      }
      case NodeKind::Mul: {
        std::vector<std::pair<double, Expr>> parts;
        for (const auto& [b, k] : n.factors) {
          Expr db = (*this)(b);
          if (db.is_zero()) continue;
          std::vector<std::pair<Expr, int>> f = n.factors;
          f.emplace_back(b, -1);
          f.emplace_back(db, 1);
          parts.emplace_back(static_cast<double>(k), ExprBuilder::product(1.0, std::move(f)));
        }
        return ExprBuilder::sum(0.0, std::move(parts));
      }
      case NodeKind::Apply: {
        const Expr& u = n.children[0];
        const Expr du = (*this)(u);
        Expr outer;
        switch (n.func) {
          case Func::Exp: outer = e; break;
          case Func::Log: outer = pow(u, -1); break;
          case Func::Sin: outer = cos(u); break;
          case Func::Cos: outer = -sin(u); break;
          case Func::Tan: outer = Expr(1.0) + pow(e, 2); break;
          case Func::Atan: outer = pow(Expr(1.0) + pow(u, 2), -1); break;
          case Func::Sqrt: outer = Expr(0.5) * pow(e, -1); break;
          case Func::Bump: {
            // d/ds [bump(s) (1-s^2)^-k] = -2s bump_{k+2}(s) + 2ks bump_{k+1}(s)
            const int k = n.weight;
            outer = Expr(-2.0) * u * Expr::bump(u, k + 2);
            if (k != 0) outer = outer + Expr(2.0 * k) * u * Expr::bump(u, k + 1);
            break;
          }
          case Func::Step:
            throw DifferentiationError("cannot differentiate step(" + u.str() + ") with respect to " +
                                       s_.name());
        }
        return outer * du;
      }
      case NodeKind::Integral:
        if (s_.kind == SymbolKind::T && s_.index == n.level) return Expr();
        return integrate_t((*this)(n.children[0]), n.level);
      case NodeKind::Guard: {
        std::vector<Expr> preds(n.children.begin() + 1, n.children.end());
        return Expr::guard(std::move(preds), (*this)(n.children[0]));
      }
    }
    return Expr();
  }

  Symbol s_;
  std::unordered_map<const Node*, Expr> memo_;
};

}  // namespace

Expr diff(const Expr& e, Symbol s) { return Differentiator(s)(e); }

// ---------------------------------------------------------------------------
// Evaluation

namespace {

class Evaluator {
 public:
  explicit Evaluator(const Point& p) : point_(p) {}

  double operator()(const Expr& e) {
    const Node& n = e.node();
    if (n.kind == NodeKind::Const) return n.value;
    if (n.kind == NodeKind::Sym) return point_.get(n.symbol);
    if (auto it = memo_.find(&n); it != memo_.end() && valid(n, it->second.second)) return it->second.first;
    const double v = compute(n);
    memo_[&n] = {v, clock_};
    return v;
  }

 private:
  bool valid(const Node& n, std::uint64_t stamp) const {
    for (std::uint32_t m = n.t_mask; m; m &= m - 1) {
      if (changed_[std::countr_zero(m)] > stamp) return false;
    }
    return true;
  }

  double compute(const Node& n) {
    switch (n.kind) {
      case NodeKind::Add: {
        double s = n.value;
        for (const auto& [c, t] : n.terms) s += c * (*this)(t);
        return s;
      }
      case NodeKind::Mul: {
        double p = 1.0;
        for (const auto& [b, k] : n.factors) {
          const double v = (*this)(b);
          if (k < 0 && v == 0.0) throw DomainError("division by zero");
          p *= k == 1 ? v : std::pow(v, k);
        }
        return p;
      }
      case NodeKind::Apply: return apply_numeric(n.func, n.weight, (*this)(n.children[0]));
      case NodeKind::Integral: {
        const int level = n.level;
        const Expr& body = n.children[0];
        return integrate_adaptive(
            [&](double tv) {
              point_.set_t(level, tv);
              changed_[level] = ++clock_;
              return (*this)(body);
            },
            0.0, 1.0);
      }
      case NodeKind::Guard: {
        for (std::size_t i = 1; i < n.children.size(); ++i) {
          if (!((*this)(n.children[i]) > 0.0)) return 0.0;
        }
        return (*this)(n.children[0]);
      }
      default: return 0.0;
    }
  }

  Point point_;
  std::uint64_t clock_ = 1;
  std::array<std::uint64_t, kMaxLevels> changed_{};
  std::unordered_map<const Node*, std::pair<double, std::uint64_t>> memo_;
};

}  // namespace

double eval(const Expr& e, const Point& p) {
  auto missing = [](std::uint32_t need, std::uint32_t have) { return (need & ~have) != 0; };
  if (missing(e.y_mask(), p.y_mask()) || missing(e.x_mask(), p.x_mask()) || missing(e.t_mask(), p.t_mask())) {
    throw PreconditionError("unassigned symbol while evaluating " + e.str());
  }
  return Evaluator(p)(e);
}

std::vector<double> eval(std::span<const Expr> es, const Point& p) {
  std::uint32_t ym = 0, xm = 0, tm = 0;
  for (const auto& e : es) ym |= e.y_mask(), xm |= e.x_mask(), tm |= e.t_mask();
  if ((ym & ~p.y_mask()) || (xm & ~p.x_mask()) || (tm & ~p.t_mask())) {
    throw PreconditionError("unassigned symbol while evaluating a batch");
  }
  Evaluator ev(p);
  std::vector<double> out;
  out.reserve(es.size());
  for (const auto& e : es) out.push_back(ev(e));
  return out;
}

// ---------------------------------------------------------------------------
// Polynomials in t, integration, substitution, expansion

namespace {

using Poly = std::vector<Expr>;

Poly poly_mul(const Poly& a, const Poly& b) {
  std::vector<std::vector<std::pair<double, Expr>>> acc(a.size() + b.size() - 1);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].is_zero()) continue;
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (b[j].is_zero()) continue;
      acc[i + j].emplace_back(1.0, a[i] * b[j]);
    }
  }
  Poly out;
  out.reserve(acc.size());
  for (auto& terms : acc) out.push_back(ExprBuilder::sum(0.0, std::move(terms)));
  return out;
}

class TPoly {
 public:
  explicit TPoly(int level) : level_(level) {}

  std::optional<Poly> operator()(const Expr& e) {
    if (!(e.t_mask() & bit(level_))) return Poly{e};
    const Node& n = e.node();
    if (auto it = memo_.find(&n); it != memo_.end()) return it->second;
    auto out = compute(e);
    memo_.emplace(&n, out);
    return out;
  }

 private:
  std::optional<Poly> compute(const Expr& e) {
    const Node& n = e.node();
    switch (n.kind) {
      case NodeKind::Sym: return Poly{Expr(), Expr(1.0)};
      case NodeKind::Add: {
        std::vector<std::vector<std::pair<double, Expr>>> acc(1);
        for (const auto& [c, t] : n.terms) {
          auto p = (*this)(t);
          if (!p) return std::nullopt;
          if (acc.size() < p->size()) acc.resize(p->size());
          for (std::size_t k = 0; k < p->size(); ++k) acc[k].emplace_back(c, (*p)[k]);
        }
        acc[0].emplace_back(n.value, Expr(1.0));
        Poly out;
        for (auto& terms : acc) out.push_back(ExprBuilder::sum(0.0, std::move(terms)));
        return out;
      }
      case NodeKind::Mul: {
        Poly out{Expr(1.0)};
        for (const auto& [b, k] : n.factors) {
          auto p = (*this)(b);
          if (!p) return std::nullopt;
          if (k < 0) {
            if (p->size() > 1) return std::nullopt;
            out = poly_mul(out, Poly{pow((*p)[0], k)});
          } else {
            for (int i = 0; i < k; ++i) out = poly_mul(out, *p);
          }
        }
        return out;
      }
      default: return std::nullopt;
    }
  }

  int level_;
  std::unordered_map<const Node*, std::optional<Poly>> memo_;
};

}  // namespace

std::optional<std::vector<Expr>> t_polynomial(const Expr& e, int level) { return TPoly(level)(e); }

Expr integrate_t(const Expr& e, int level) {
  if (!(e.t_mask() & bit(level))) return e;
  if (auto p = t_polynomial(e, level)) {
    std::vector<std::pair<double, Expr>> terms;
    for (std::size_t k = 0; k < p->size(); ++k) terms.emplace_back(1.0 / static_cast<double>(k + 1), (*p)[k]);
    return ExprBuilder::sum(0.0, std::move(terms));
  }
  return Expr::integral(level, e);
}

namespace {

class Substituter {
 public:
  explicit Substituter(const std::map<Symbol, Expr>& r) : repl_(r) {
    for (const auto& [s, _] : r) {
      if (s.kind == SymbolKind::Y) y_ |= bit(s.index);
      if (s.kind == SymbolKind::X) x_ |= bit(s.index);
      if (s.kind == SymbolKind::T) t_ |= bit(s.index);
    }
  }

  Expr operator()(const Expr& e) {
    const Node& n = e.node();
    if (!(n.y_mask & y_) && !(n.x_mask & x_) && !(n.t_mask & t_)) return e;
    if (auto it = memo_.find(&n); it != memo_.end()) return it->second;
    Expr out = compute(e);
    memo_.emplace(&n, out);
    return out;
  }

 private:
  Expr compute(const Expr& e) {
    const Node& n = e.node();
    switch (n.kind) {
      case NodeKind::Sym: {
        auto it = repl_.find(n.symbol);
        return it == repl_.end() ? e : it->second;
      }
      case NodeKind::Add: {
        std::vector<std::pair<double, Expr>> terms;
        for (const auto& [c, t] : n.terms) terms.emplace_back(c, (*this)(t));
        return ExprBuilder::sum(n.value, std::move(terms));
      }
      case NodeKind::Mul: {
        std::vector<std::pair<Expr, int>> f;
        for (const auto& [b, k] : n.factors) f.emplace_back((*this)(b), k);
        return ExprBuilder::product(1.0, std::move(f));
      }
      case NodeKind::Apply: {
        Expr a = (*this)(n.children[0]);
        return n.func == Func::Bump ? Expr::bump(a, n.weight) : Expr::apply(n.func, a);
      }
      case NodeKind::Integral: {
        const std::uint32_t b = bit(n.level);
        for (const auto& [s, r] : repl_) {
          if (r.t_mask() & b) throw PreconditionError("substitution would capture bound " + Symbol::t(n.level).name());
        }
        if (t_ & b) {
          std::map<Symbol, Expr> inner = repl_;
          inner.erase(Symbol::t(n.level));
          return integrate_t(Substituter(inner)(n.children[0]), n.level);
        }
        return integrate_t((*this)(n.children[0]), n.level);
      }
      case NodeKind::Guard: {
        std::vector<Expr> preds;
        for (std::size_t i = 1; i < n.children.size(); ++i) preds.push_back((*this)(n.children[i]));
        return Expr::guard(std::move(preds), (*this)(n.children[0]));
      }
      default: return e;
    }
  }

  const std::map<Symbol, Expr>& repl_;
  std::uint32_t y_ = 0, x_ = 0, t_ = 0;
  std::unordered_map<const Node*, Expr> memo_;
};

std::vector<std::pair<double, Expr>> as_terms(const Expr& e, double& constant) {
  const Node& n = e.node();
  if (n.kind == NodeKind::Const) {
    constant = n.value;
    return {};
  }
  if (n.kind == NodeKind::Add) {
    constant = n.value;
    return n.terms;
  }
  constant = 0.0;
  return {{1.0, e}};
}

Expr distribute(const Expr& a, const Expr& b) {
  if (a.kind() != NodeKind::Add && b.kind() != NodeKind::Add) return a * b;
  double ca = 0, cb = 0;
  auto ta = as_terms(a, ca);
  auto tb = as_terms(b, cb);
  std::vector<std::pair<double, Expr>> out;
  for (const auto& [c1, e1] : ta) {
    for (const auto& [c2, e2] : tb) out.emplace_back(c1 * c2, e1 * e2);
    if (cb != 0.0) out.emplace_back(c1 * cb, e1);
  }
  if (ca != 0.0) {
    for (const auto& [c2, e2] : tb) out.emplace_back(ca * c2, e2);
  }
  return ExprBuilder::sum(ca * cb, std::move(out));
}

class Expander {
 public:
  Expr operator()(const Expr& e) {
    const Node& n = e.node();
    if (n.kind == NodeKind::Const || n.kind == NodeKind::Sym) return e;
    if (auto it = memo_.find(&n); it != memo_.end()) return it->second;
    Expr out = compute(e);
    memo_.emplace(&n, out);
    return out;
  }

 private:
  Expr compute(const Expr& e) {
    const Node& n = e.node();
    switch (n.kind) {
      case NodeKind::Add: {
        std::vector<std::pair<double, Expr>> terms;
        for (const auto& [c, t] : n.terms) terms.emplace_back(c, (*this)(t));
        return ExprBuilder::sum(n.value, std::move(terms));
      }
      case NodeKind::Mul: {
        Expr acc(1.0);
        for (const auto& [b, k] : n.factors) {
          Expr eb = (*this)(b);
          if (k > 0 && eb.kind() == NodeKind::Add) {
            for (int i = 0; i < k; ++i) acc = distribute(acc, eb);
          } else {
            acc = distribute(acc, pow(eb, k));
          }
        }
        return acc;
      }
      case NodeKind::Apply: {
        Expr a = (*this)(n.children[0]);
        return n.func == Func::Bump ? Expr::bump(a, n.weight) : Expr::apply(n.func, a);
      }
      case NodeKind::Integral: return integrate_t((*this)(n.children[0]), n.level);
      case NodeKind::Guard: {
        std::vector<Expr> preds;
        for (std::size_t i = 1; i < n.children.size(); ++i) preds.push_back((*this)(n.children[i]));
        return Expr::guard(std::move(preds), (*this)(n.children[0]));
      }
      default: return e;
    }
  }

  std::unordered_map<const Node*, Expr> memo_;
};

}  // namespace

Expr substitute(const Expr& e, const std::map<Symbol, Expr>& replacement) {
  return Substituter(replacement)(e);
}

Expr expand(const Expr& e) { return Expander()(e); }

bool symbolically_equal(const Expr& a, const Expr& b, double chop) {
  const Expr d = expand(a - b);
  const Node& n = d.node();
  if (n.kind == NodeKind::Const) return std::abs(n.value) <= chop;
  if (n.kind != NodeKind::Add || std::abs(n.value) > chop) return false;
  return std::all_of(n.terms.begin(), n.terms.end(), [&](const auto& t) { return std::abs(t.first) <= chop; });
}

// ---------------------------------------------------------------------------
// Point

Point::Point(std::span<const double> y, std::span<const double> x) {
  if (y.size() > static_cast<std::size_t>(kMaxCoords) || x.size() > static_cast<std::size_t>(kMaxParams)) {
    throw PreconditionError("too many coordinates");
  }
  for (std::size_t i = 0; i < y.size(); ++i) set_y(static_cast<int>(i), y[i]);
  for (std::size_t i = 0; i < x.size(); ++i) set_x(static_cast<int>(i), x[i]);
}

void Point::set_y(int i, double v) {
  y_[i] = v;
  y_mask_ |= bit(i);
}
void Point::set_x(int i, double v) {
  x_[i] = v;
  x_mask_ |= bit(i);
}
void Point::set_t(int level, double v) {
  t_[level] = v;
  t_mask_ |= bit(level);
}

double Point::get(Symbol s) const {
  switch (s.kind) {
    case SymbolKind::Y: return y_[s.index];
    case SymbolKind::X: return x_[s.index];
    case SymbolKind::T: return t_[s.index];
  }
  return 0.0;
}

// ---------------------------------------------------------------------------

namespace detail {

const GaussLegendre15& gauss_legendre_15() {
  static const GaussLegendre15 rule = [] {
    GaussLegendre15 r;
    constexpr int n = 15;
    for (int i = 1; i <= (n + 1) / 2; ++i) {
      double z = std::cos(std::numbers::pi * (i - 0.25) / (n + 0.5));
      double z1 = 0.0;
      double pp = 0.0;
      do {
        double p1 = 1.0, p2 = 0.0;
        for (int j = 1; j <= n; ++j) {
          const double p3 = p2;
          p2 = p1;
          p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
        }
        pp = n * (z * p1 - p2) / (z * z - 1.0);
        z1 = z;
        z = z1 - p1 / pp;
      } while (std::abs(z - z1) > 1e-15);
      r.nodes[i - 1] = -z;
      r.nodes[n - i] = z;
      r.weights[i - 1] = 2.0 / ((1.0 - z * z) * pp * pp);
      r.weights[n - i] = r.weights[i - 1];
    }
    return r;
  }();
  return rule;
}

}  // namespace detail

}  // namespace pfam
