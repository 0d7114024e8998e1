#include "pfam/cech.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include "pfam/random.hpp"

namespace pfam {

namespace {

bool all_positive(const std::vector<Expr>& predicates, std::span<const double> y) {
  const Point p(y);
  try {
    for (const auto& pred : predicates) {
      if (!(eval(pred, p) > 0.0)) return false;
    }
  } catch (const DomainError&) {
    return false;
  }
  return true;
}

std::string point_str(std::span<const double> y) { return fmt::format("({})", fmt::join(y, ", ")); }

const std::vector<Sample>& no_params() {
  static const std::vector<Sample> one{Sample{}};
  return one;
}

}  // namespace

int sort_with_sign(Simplex& s) {
  int sign = 1;
  for (std::size_t i = 1; i < s.size(); ++i) {
    for (std::size_t j = i; j > 0 && s[j - 1] > s[j]; --j) {
      std::swap(s[j - 1], s[j]);
      sign = -sign;
    }
  }
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (s[i] == s[i - 1]) return 0;
  }
  return sign;
}

// ---------------------------------------------------------------------------
// GoodCover

const NerveSimplex* GoodCover::find(const Simplex& sorted) const {
  for (const auto& n : nerve) {
    if (n.vertices == sorted) return &n;
  }
  return nullptr;
}

std::vector<const NerveSimplex*> GoodCover::simplices(int p) const {
  std::vector<const NerveSimplex*> out;
  for (const auto& n : nerve) {
    if (static_cast<int>(n.vertices.size()) == p + 1) out.push_back(&n);
  }
  return out;
}

int GoodCover::max_simplex_degree() const {
  int p = -1;
  for (const auto& n : nerve) p = std::max(p, static_cast<int>(n.vertices.size()) - 1);
  return p;
}

bool GoodCover::contains(int alpha, std::span<const double> y) const { return all_positive(sets.at(alpha).predicates, y); }

bool GoodCover::in_region(std::span<const double> y) const {
  for (std::size_t i = 0; i < box.size() && i < y.size(); ++i) {
    if (!(y[i] > box[i].first && y[i] < box[i].second)) return false;
  }
  return all_positive(region, y);
}

int GoodCover::first_containing(std::span<const double> y) const {
  for (int a = 0; a < size(); ++a) {
    if (contains(a, y)) return a;
  }
  return -1;
}

std::string GoodCover::name(const Simplex& s) const {
  std::string out;
  for (int v : s) {
    if (!out.empty()) out += "&";
    out += v >= 0 && v < size() ? sets[v].name : fmt::format("#{}", v);
  }
  return out;
}

const SmoothMap& GoodCover::chart(const Simplex& s) const {
  if (s.size() == 1) return sets.at(s[0]).chart;
  const NerveSimplex* n = find(s);
  if (!n || !n->chart) throw PreconditionError("no chart declared on simplex " + name(s));
  return *n->chart;
}

Expr GoodCover::restrict_to(int alpha, const Expr& body) const {
  const auto& preds = sets.at(alpha).predicates;
  if (preds.empty() || body.is_zero()) return body;
  return Expr::guard(preds, body);
}

std::vector<Sample> GoodCover::points(const Simplex& s) const {
  const NerveSimplex* n = find(s);
  if (!n) throw PreconditionError("simplex " + name(s) + " is not in the nerve");
  std::vector<Sample> out;
  out.push_back(n->witness);
  out.insert(out.end(), n->samples.begin(), n->samples.end());
  return out;
}

std::vector<Sample> GoodCover::sample_intersection(const Simplex& s, int count, std::uint64_t seed) const {
  if (box.size() != static_cast<std::size_t>(dim)) throw ConfigError("sampling needs a bounding box for every coordinate");
  Random rng(seed);
  std::vector<Sample> out;
  Sample y(dim);
  for (long attempt = 0; attempt < 400000 && static_cast<int>(out.size()) < count; ++attempt) {
    for (int i = 0; i < dim; ++i) y[i] = rng.uniform(box[i].first, box[i].second);
    if (!in_region(y)) continue;
    if (std::all_of(s.begin(), s.end(), [&](int a) { return contains(a, y); })) out.push_back(y);
  }
  return out;
}

void GoodCover::ensure_samples(int region_count, int min_samples, std::uint64_t seed) {
  if (region_samples.empty() && region_count > 0) region_samples = sample_intersection({}, region_count, seed);
  for (std::size_t k = 0; k < nerve.size(); ++k) {
    auto& n = nerve[k];
    const int missing = min_samples - static_cast<int>(n.samples.size());
    if (missing <= 0) continue;
    auto extra = sample_intersection(n.vertices, missing, seed + 7919 * (k + 1));
    n.samples.insert(n.samples.end(), extra.begin(), extra.end());
  }
}

// ---------------------------------------------------------------------------
// Validation

ValidationReport validate_cover(const GoodCover& cover) {
  ValidationReport rep;
  auto issue = [&](std::string kind, std::string where, std::string detail) {
    rep.issues.push_back({std::move(kind), std::move(where), std::move(detail)});
  };

  for (int a = 0; a < cover.size(); ++a) {
    if (!cover.declared({a})) issue("nerve", cover.sets[a].name, "set has no declared 0-simplex");
  }

  std::vector<Sample> all_points = cover.region_samples;
  for (const auto& n : cover.nerve) {
    const std::string where = cover.name(n.vertices);
    Simplex sorted = n.vertices;
    if (sort_with_sign(sorted) != 1 || sorted.empty() || sorted.front() < 0 || sorted.back() >= cover.size()) {
      issue("nerve", where, "vertices must be distinct, increasing and valid set indices");
      continue;
    }
    if (n.samples.size() < 8) issue("nerve", where, fmt::format("only {} samples (at least 8 required)", n.samples.size()));
    for (std::size_t drop = 0; n.vertices.size() > 1 && drop < n.vertices.size(); ++drop) {
      Simplex face = n.vertices;
      face.erase(face.begin() + static_cast<long>(drop));
      if (!cover.declared(face)) issue("nerve", where, "face " + cover.name(face) + " is not declared");
    }
    std::vector<Sample> pts{n.witness};
    pts.insert(pts.end(), n.samples.begin(), n.samples.end());
    for (std::size_t k = 0; k < pts.size(); ++k) {
      const auto& y = pts[k];
      const std::string label = k == 0 ? "witness" : fmt::format("sample {}", k - 1);
      if (static_cast<int>(y.size()) != cover.dim) {
        issue("nerve", where, label + " has the wrong dimension");
        continue;
      }
      for (int a : n.vertices) {
        if (!cover.contains(a, y)) {
          issue("nerve", where, fmt::format("{} {} lies outside {}", label, point_str(y), cover.sets[a].name));
        }
      }
      if (!cover.in_region(y)) issue("nerve", where, fmt::format("{} {} lies outside M", label, point_str(y)));
      ++rep.points_checked;
    }
    all_points.insert(all_points.end(), pts.begin(), pts.end());

    // Chart round trips on the sets' own points and on intersections.
    if (n.vertices.size() == 1 || n.chart) {
      const SmoothMap& chart = n.vertices.size() == 1 ? cover.sets[n.vertices[0]].chart : *n.chart;
      if (!chart.has_inverse()) {
        issue("chart", where, "chart has no declared inverse");
      } else {
        for (const auto& y : pts) {
          try {
            const double err = chart.roundtrip_error(y);
            if (!(err <= 1e-9)) issue("chart", where, fmt::format("round trip error {:g} at {}", err, point_str(y)));
          } catch (const Error& e) {
            issue("chart", where, fmt::format("chart fails at {}: {}", point_str(y), e.what()));
          }
        }
      }
    }
  }

  for (const auto& y : all_points) {
    if (static_cast<int>(y.size()) != cover.dim) continue;
    double total = 0.0;
    bool covered = false;
    for (int a = 0; a < cover.size(); ++a) {
      double psi = 0.0;
      try {
        psi = eval(cover.sets[a].bump, Point(y));
      } catch (const Error& e) {
        issue("support", cover.sets[a].name, fmt::format("bump fails at {}: {}", point_str(y), e.what()));
        continue;
      }
      const bool inside = cover.contains(a, y);
      covered = covered || inside;
      if (psi < 0.0) issue("support", cover.sets[a].name, fmt::format("bump negative ({:g}) at {}", psi, point_str(y)));
      if (!inside && std::abs(psi) > 1e-12) {
        issue("support", cover.sets[a].name, fmt::format("bump is {:g} at {} outside the set", psi, point_str(y)));
      }
      total += psi;
    }
    if (!cover.in_region(y)) continue;
    if (!covered) issue("coverage", "M", fmt::format("point {} lies in no cover set", point_str(y)));
    if (!(total > 0.0)) issue("partition", "M", fmt::format("bumps sum to {:g} at {}", total, point_str(y)));
  }
  rep.points_checked += cover.region_samples.size();
  return rep;
}

// ---------------------------------------------------------------------------
// Cochains

Cochain::Cochain(const GoodCover& cover, int cech_degree, int form_degree)
    : cover_(&cover), degree_(cech_degree), form_degree_(form_degree) {
  if (cech_degree < 0) throw PreconditionError("negative Cech degree");
}

void Cochain::set(Simplex s, Form w) {
  if (static_cast<int>(s.size()) != degree_ + 1) throw PreconditionError("simplex size does not match Cech degree");
  Simplex sorted = s;
  const int sign = sort_with_sign(sorted);
  if (sign == 0 || !cover_->declared(sorted)) throw PreconditionError("simplex " + cover_->name(s) + " is not in the nerve");
  if (w.dim() != cover_->dim || w.degree() != form_degree_) throw PreconditionError("component has the wrong shape");
  Form stored = (sign < 0 ? -w : w).with_domain(cover_->name(sorted));
  if (stored.is_zero()) {
    components_.erase(sorted);
  } else {
    components_.insert_or_assign(sorted, std::move(stored));
  }
}

Form Cochain::zero_form(const Simplex& s) const {
  Simplex sorted = s;
  sort_with_sign(sorted);
  return Form(cover_->dim, form_degree_, cover_->name(sorted));
}

Form Cochain::get(Simplex s) const {
  const int sign = sort_with_sign(s);
  if (sign == 0) return Form(cover_->dim, form_degree_);
  auto it = components_.find(s);
  if (it == components_.end()) return Form(cover_->dim, form_degree_, cover_->name(s));
  return sign < 0 ? -it->second : it->second;
}

Cochain& Cochain::operator+=(const Cochain& o) {
  if (o.cover_ != cover_ || o.degree_ != degree_ || o.form_degree_ != form_degree_) {
    throw PreconditionError("cochain shape mismatch");
  }
  for (const auto& [s, w] : o.components_) set(s, get(s) + w);
  return *this;
}

Cochain& Cochain::operator-=(const Cochain& o) {
  if (o.cover_ != cover_ || o.degree_ != degree_ || o.form_degree_ != form_degree_) {
    throw PreconditionError("cochain shape mismatch");
  }
  for (const auto& [s, w] : o.components_) set(s, get(s) - w);
  return *this;
}

Cochain coboundary(const Cochain& c) {
  const GoodCover& cover = c.cover();
  Cochain out(cover, c.degree() + 1, c.form_degree());
  for (const NerveSimplex* n : cover.simplices(c.degree() + 1)) {
    const std::string tag = cover.name(n->vertices);
    Form sum(cover.dim, c.form_degree(), tag);
    for (std::size_t i = 0; i < n->vertices.size(); ++i) {
      Simplex face = n->vertices;
      face.erase(face.begin() + static_cast<long>(i));
      if (!cover.declared(face)) throw PreconditionError("face " + cover.name(face) + " missing from the nerve");
      const Form restricted = c.get(face).with_domain(tag);
      if (i % 2) {
        sum -= restricted;
      } else {
        sum += restricted;
      }
    }
    out.set(n->vertices, sum);
  }
  return out;
}

Cochain ext_d(const Cochain& c) {
  return c.map_forms(std::min(c.form_degree() + 1, c.cover().dim + 1), [](const Form& w) { return ext_d(w); });
}

std::vector<Expr> partition_of_unity(const GoodCover& cover) {
  Expr total;
  for (const auto& s : cover.sets) total += s.bump;
  for (const auto& y : cover.region_samples) {
    if (!(eval(total, Point(y)) > 0.0)) {
      throw PreconditionError("bump functions sum to zero at " + point_str(y));
    }
  }
  std::vector<Expr> rho;
  for (const auto& s : cover.sets) rho.push_back(s.bump / total);
  return rho;
}

Cochain mv_homotopy_K(const Cochain& c, const std::vector<Expr>& rho) {
  if (c.degree() < 1) throw PreconditionError("K needs Cech degree >= 1");
  const GoodCover& cover = c.cover();
  Cochain out(cover, c.degree() - 1, c.form_degree());
  for (const NerveSimplex* n : cover.simplices(c.degree() - 1)) {
    const std::string tag = cover.name(n->vertices);
    Form sum(cover.dim, c.form_degree(), tag);
    for (int beta = 0; beta < cover.size(); ++beta) {
      Simplex s{beta};
      s.insert(s.end(), n->vertices.begin(), n->vertices.end());
      const Form xi = c.get(s);
      if (xi.is_zero()) continue;
      // Guarding by the bump as well skips the body wherever rho_beta vanishes;
      // this is sound because the bump is flat at the edge of its support.
      std::vector<Expr> where = cover.sets[beta].predicates;
      where.push_back(cover.sets[beta].bump);
      sum += xi.map_coefficients([&](const Expr& f) { return Expr::guard(where, rho[beta] * f); }).with_domain(tag);
    }
    out.set(n->vertices, sum);
  }
  return out;
}

SampleMax cochain_max(const Cochain& c, std::span<const Sample> params) {
  const auto& xs = params.empty() ? no_params() : params;
  SampleMax out;
  for (const auto& [s, w] : c.components()) {
    for (const auto& y : c.cover().points(s)) {
      for (const auto& x : xs) {
        const double v = max_abs(w, Point(y, x));
        if (!(v <= out.value)) {
          out.value = v;
          out.where = fmt::format("{} at y={} x={}", c.cover().name(s), point_str(y), point_str(x));
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gluing

GluedForm::GluedForm(Cochain c) : c_(std::move(c)) {
  if (c_.degree() != 0) throw PreconditionError("only Cech 0-cochains glue to global forms");
}

int GluedForm::branch(std::span<const double> y) const {
  const int a = c_.cover().first_containing(y);
  if (a < 0) throw PreconditionError("point " + point_str(y) + " lies outside every cover set");
  return a;
}

std::map<IndexSet, double> GluedForm::evaluate(std::span<const double> y, std::span<const double> x) const {
  return pfam::evaluate(c_.get({branch(y)}), Point(y, x));
}

double GluedForm::mismatch(std::span<const double> y, std::span<const double> x) const {
  const Point p(y, x);
  std::optional<std::map<IndexSet, double>> first;
  double worst = 0.0;
  for (int a = 0; a < c_.cover().size(); ++a) {
    if (!c_.cover().contains(a, y)) continue;
    auto v = pfam::evaluate(c_.get({a}), p);
    if (!first) {
      first = std::move(v);
      continue;
    }
    for (const auto& [i, val] : v) worst = std::max(worst, std::abs(val - (first->count(i) ? first->at(i) : 0.0)));
    for (const auto& [i, val] : *first) {
      if (!v.count(i)) worst = std::max(worst, std::abs(val));
    }
  }
  return worst;
}

GluedForm glue_cochain0(const Cochain& c, std::span<const Sample> params, double tolerance) {
  if (c.degree() != 0) throw PreconditionError("only Cech 0-cochains glue to global forms");
  const SampleMax defect = cochain_max(coboundary(c), params);
  if (defect.value > tolerance) {
    throw PreconditionError(fmt::format("delta of the cochain is {:g} at {} (tolerance {:g})", defect.value,
                                        defect.where, tolerance));
  }
  return GluedForm(c);
}

}  // namespace pfam
