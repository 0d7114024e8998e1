#include "pfam/exterior.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace pfam {

namespace {

IndexSet full_set(int dim) { return dim >= 32 ? ~IndexSet{0} : (IndexSet{1} << dim) - 1; }

int fresh_level(const Form& w) {
  int level = -1;
  for (const auto& [i, c] : w.terms()) level = std::max(level, c.max_level());
  if (level + 1 >= kMaxLevels) throw PreconditionError("too many nested homotopy integrals");
  return level + 1;
}

}  // namespace

IndexSet index_set(const std::vector<int>& one_based) {
  IndexSet s = 0;
  int last = 0;
  for (int i : one_based) {
    if (i <= last || i > kMaxCoords) throw PreconditionError("multi-index must be strictly increasing within 1..9");
    s |= IndexSet{1} << (i - 1);
    last = i;
  }
  return s;
}

std::vector<int> indices(IndexSet s) {
  std::vector<int> out;
  for (; s; s &= s - 1) out.push_back(std::countr_zero(s) + 1);
  return out;
}

int degree_of(IndexSet s) { return std::popcount(s); }

int wedge_sign(IndexSet a, IndexSet b) {
  if (a & b) return 0;
  int inversions = 0;
  for (IndexSet m = b; m; m &= m - 1) {
    const IndexSet lower = (m & -m) - 1;
    inversions += std::popcount(a & ~lower & ~(m & -m));
  }
  return inversions % 2 ? -1 : 1;
}

// ---------------------------------------------------------------------------

Form::Form(int dim, int degree, std::string domain) : dim_(dim), degree_(degree), domain_(std::move(domain)) {
  if (dim < 0 || dim > kMaxCoords) throw PreconditionError("form dimension out of range");
  if (degree < 0 || degree > dim + 1) throw PreconditionError("form degree out of range");
}

Form Form::scalar(int dim, const Expr& f, std::string domain) {
  Form w(dim, 0, std::move(domain));
  w.add(0, f);
  return w;
}

Form Form::monomial(int dim, IndexSet index, const Expr& coefficient, std::string domain) {
  Form w(dim, degree_of(index), std::move(domain));
  w.add(index, coefficient);
  return w;
}

Form Form::from_terms(int dim, int degree, const std::vector<std::pair<std::vector<int>, Expr>>& terms,
                      std::string domain) {
  if (!terms.empty()) degree = static_cast<int>(terms.front().first.size());
  Form w(dim, degree, std::move(domain));
  for (const auto& [idx, c] : terms) {
    if (static_cast<int>(idx.size()) != degree) throw PreconditionError("mixed degrees in form literal");
    for (int i : idx) {
      if (i > dim) throw PreconditionError("form index exceeds dimension");
    }
    w.add(index_set(idx), c);
  }
  return w;
}

Expr Form::coefficient(IndexSet index) const {
  auto it = terms_.find(index);
  return it == terms_.end() ? Expr() : it->second;
}

void Form::add(IndexSet index, const Expr& c) {
  if (degree_of(index) != degree_) throw PreconditionError("index degree does not match form degree");
  if (index & ~full_set(dim_)) throw PreconditionError("index outside form dimension");
  if (c.is_zero()) return;
  auto [it, inserted] = terms_.try_emplace(index, c);
  if (!inserted) {
    it->second = it->second + c;
    if (it->second.is_zero()) terms_.erase(it);
  }
}

Form Form::with_domain(std::string domain) const {
  Form out = *this;
  out.domain_ = std::move(domain);
  return out;
}

void Form::check_compatible(const Form& o) const {
  if (dim_ != o.dim_ || degree_ != o.degree_) throw PreconditionError("form dimension or degree mismatch");
  if (!domain_.empty() && !o.domain_.empty() && domain_ != o.domain_) {
    throw PreconditionError("incompatible domains '" + domain_ + "' and '" + o.domain_ + "'");
  }
}

Form& Form::operator+=(const Form& o) {
  check_compatible(o);
  if (domain_.empty()) domain_ = o.domain_;
  for (const auto& [i, c] : o.terms_) add(i, c);
  return *this;
}

Form& Form::operator-=(const Form& o) {
  check_compatible(o);
  if (domain_.empty()) domain_ = o.domain_;
  for (const auto& [i, c] : o.terms_) add(i, -c);
  return *this;
}

Form operator-(const Form& a) {
  return a.map_coefficients([](const Expr& c) { return -c; });
}

Form operator*(const Expr& f, const Form& w) {
  return w.map_coefficients([&](const Expr& c) { return f * c; });
}

std::string Form::str() const {
  if (terms_.empty()) return "0";
  std::string s;
  for (const auto& [i, c] : terms_) {
    if (!s.empty()) s += " + ";
    s += "(" + c.str() + ")";
    for (int k : indices(i)) s += " dy" + std::to_string(k);
  }
  return s;
}

std::map<IndexSet, double> evaluate(const Form& w, const Point& p) {
  std::vector<Expr> coeffs;
  for (const auto& [i, c] : w.terms()) coeffs.push_back(c);
  const auto values = eval(coeffs, p);
  std::map<IndexSet, double> out;
  std::size_t k = 0;
  for (const auto& [i, c] : w.terms()) out[i] = values[k++];
  return out;
}

double max_abs(const Form& w, const Point& p) {
  double m = 0.0;
  for (const auto& [i, v] : evaluate(w, p)) m = std::max(m, std::abs(v));
  return m;
}

// ---------------------------------------------------------------------------

Form wedge(const Form& a, const Form& b) {
  if (a.dim() != b.dim()) throw PreconditionError("wedge of forms with different dimensions");
  if (!a.domain().empty() && !b.domain().empty() && a.domain() != b.domain()) {
    throw PreconditionError("wedge of forms on incompatible domains");
  }
  const int degree = a.degree() + b.degree();
  Form out(a.dim(), std::min(degree, a.dim() + 1), a.domain().empty() ? b.domain() : a.domain());
  if (degree > a.dim()) return out;
  for (const auto& [ia, ca] : a.terms()) {
    for (const auto& [ib, cb] : b.terms()) {
      const int s = wedge_sign(ia, ib);
      if (s != 0) out.add(ia | ib, Expr(static_cast<double>(s)) * ca * cb);
    }
  }
  return out;
}

Form ext_d_along(const Form& w, IndexSet directions) {
  Form out(w.dim(), std::min(w.degree() + 1, w.dim() + 1), w.domain());
  if (w.degree() >= w.dim()) return out;
  for (const auto& [i, c] : w.terms()) {
    for (int j = 0; j < w.dim(); ++j) {
      const IndexSet dj = IndexSet{1} << j;
      if (!(directions & dj) || (i & dj) || !c.depends_on(Symbol{SymbolKind::Y, j})) continue;
      out.add(i | dj, Expr(static_cast<double>(wedge_sign(dj, i))) * diff(c, Symbol{SymbolKind::Y, j}));
    }
  }
  return out;
}

Form ext_d(const Form& w) { return ext_d_along(w, full_set(w.dim())); }

// ---------------------------------------------------------------------------

SmoothMap::SmoothMap(int source_dim, std::vector<Expr> components, std::optional<std::vector<Expr>> inverse)
    : source_dim_(source_dim), components_(std::move(components)), inverse_(std::move(inverse)) {
  const IndexSet allowed = full_set(source_dim_);
  for (const auto& c : components_) {
    if (c.y_mask() & ~allowed) throw PreconditionError("map component uses coordinates beyond its source");
  }
  if (inverse_) {
    if (static_cast<int>(inverse_->size()) != source_dim_) throw PreconditionError("inverse has wrong arity");
    const IndexSet target = full_set(target_dim());
    for (const auto& c : *inverse_) {
      if (c.y_mask() & ~target) throw PreconditionError("inverse component uses coordinates beyond its source");
    }
  }
}

SmoothMap SmoothMap::identity(int dim) {
  std::vector<Expr> ys;
  for (int i = 1; i <= dim; ++i) ys.push_back(Expr::y(i));
  SmoothMap m(dim, ys, ys);
  m.identity_ = true;
  return m;
}

SmoothMap SmoothMap::inverse() const {
  if (!inverse_) throw PreconditionError("chart has no declared inverse");
  SmoothMap m(target_dim(), *inverse_, components_);
  m.identity_ = identity_;
  return m;
}

std::vector<double> SmoothMap::apply(std::span<const double> y) const {
  const Point p(y);
  std::vector<double> out;
  out.reserve(components_.size());
  for (const auto& c : components_) out.push_back(eval(c, p));
  return out;
}

double SmoothMap::roundtrip_error(std::span<const double> y) const {
  const auto z = apply(y);
  const auto back = inverse().apply(z);
  double err = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) err = std::max(err, std::abs(back[i] - y[i]));
  return err;
}

Form pullback(const SmoothMap& phi, const Form& w) {
  if (phi.target_dim() != w.dim()) throw PreconditionError("pullback dimension mismatch");
  if (phi.is_identity()) return w;
  const int n = phi.source_dim();
  std::map<Symbol, Expr> repl;
  for (int i = 0; i < w.dim(); ++i) repl.emplace(Symbol{SymbolKind::Y, i}, phi.components()[i]);

  std::vector<Form> differentials;  // d(phi_i) as 1-forms on the source
  for (const auto& comp : phi.components()) {
    Form d(n, 1, w.domain());
    for (int j = 0; j < n; ++j) d.add(IndexSet{1} << j, diff(comp, Symbol{SymbolKind::Y, j}));
    differentials.push_back(std::move(d));
  }

  Form out(n, std::min(w.degree(), n + 1), w.domain());
  for (const auto& [i, c] : w.terms()) {
    Form piece = Form::scalar(n, substitute(c, repl), w.domain());
    for (int k : indices(i)) piece = wedge(piece, differentials[k - 1]);
    if (piece.degree() == out.degree()) out += piece;
  }
  return out;
}

// ---------------------------------------------------------------------------

Form interior(const Form& w, const std::vector<Expr>& field) {
  if (w.degree() == 0) throw PreconditionError("interior product of a 0-form");
  if (static_cast<int>(field.size()) != w.dim()) throw PreconditionError("vector field has wrong dimension");
  Form out(w.dim(), w.degree() - 1, w.domain());
  for (const auto& [i, c] : w.terms()) {
    int pos = 0;
    for (int k : indices(i)) {
      const double sign = pos % 2 ? -1.0 : 1.0;
      out.add(i & ~(IndexSet{1} << (k - 1)), Expr(sign) * field[k - 1] * c);
      ++pos;
    }
  }
  return out;
}

Form interior_radial(const Form& w) {
  std::vector<Expr> field;
  for (int i = 1; i <= w.dim(); ++i) field.push_back(Expr::y(i));
  return interior(w, field);
}

Form homotopy_along(const Form& w, IndexSet directions, std::span<const double> center) {
  if (w.degree() == 0) throw PreconditionError("homotopy operator applied to a 0-form");
  Form out(w.dim(), w.degree() - 1, w.domain());
  if (w.degree() > w.dim()) return out;
  const int level = fresh_level(w);
  const Expr t = Expr::t(level);

  std::map<Symbol, Expr> shrink;  // y_i -> c_i + t (y_i - c_i)
  std::vector<Expr> radial(w.dim());
  for (int i = 0; i < w.dim(); ++i) {
    if (!(directions & (IndexSet{1} << i))) continue;
    const double c = i < static_cast<int>(center.size()) ? center[i] : 0.0;
    radial[i] = Expr::symbol(Symbol{SymbolKind::Y, i}) - Expr(c);
    shrink.emplace(Symbol{SymbolKind::Y, i}, Expr(c) + t * radial[i]);
  }

  for (const auto& [i, c] : w.terms()) {
    const int q = degree_of(i & directions);
    if (q == 0) continue;
    const Expr integral = integrate_t(pow(t, q - 1) * substitute(c, shrink), level);
    int pos = 0;
    for (int k : indices(i)) {
      const IndexSet dk = IndexSet{1} << (k - 1);
      if (directions & dk) {
        const double sign = pos % 2 ? -1.0 : 1.0;
        out.add(i & ~dk, Expr(sign) * radial[k - 1] * integral);
      }
      ++pos;
    }
  }
  return out;
}

Form homotopy(const Form& w) { return homotopy_along(w, full_set(w.dim()), {}); }

Form homotopy(const Form& w, const SmoothMap& chart) {
  if (w.degree() == 0) throw PreconditionError("homotopy operator applied to a 0-form");
  if (chart.is_identity()) return homotopy(w);
  if (!chart.has_inverse()) throw PreconditionError("chart has no declared inverse");
  if (chart.source_dim() != w.dim() || chart.target_dim() != w.dim()) {
    throw PreconditionError("chart dimension does not match form");
  }
  const Form in_chart = pullback(chart.inverse(), w);
  return pullback(chart, homotopy(in_chart)).with_domain(w.domain());
}

}  // namespace pfam
