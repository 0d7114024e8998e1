#include "pfam/glue.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include <Eigen/Dense>
#include <fmt/format.h>
#include <fmt/ranges.h>

namespace pfam {

namespace {

const std::vector<Sample>& no_params() {
  static const std::vector<Sample> one{Sample{}};
  return one;
}

std::span<const Sample> or_single(std::span<const Sample> params) {
  return params.empty() ? std::span<const Sample>(no_params()) : params;
}

Expr at_point(const Expr& e, std::span<const double> y) {
  std::map<Symbol, Expr> repl;
  for (std::size_t i = 0; i < y.size(); ++i) repl.emplace(Symbol::y(static_cast<int>(i) + 1), Expr(y[i]));
  return substitute(e, repl);
}

std::string where_str(std::span<const double> y, std::span<const double> x) {
  return fmt::format("y=({}) x=({})", fmt::join(y, ", "), fmt::join(x, ", "));
}

void require_degree(const FamilySpec& f, bool ok, const char* what) {
  if (!ok) throw PreconditionError(fmt::format("{} does not accept forms of degree {}", what, f.degree()));
  if (f.degree() > f.omega.dim()) throw PreconditionError("form degree exceeds the dimension");
}

/// Connected components of the overlap graph: base (smallest index) per set.
std::vector<int> component_bases(const GoodCover& cover) {
  std::vector<int> base(cover.size(), -1);
  for (int start = 0; start < cover.size(); ++start) {
    if (base[start] >= 0) continue;
    std::deque<int> queue{start};
    base[start] = start;
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      for (const NerveSimplex* e : cover.simplices(1)) {
        const int a = e->vertices[0], b = e->vertices[1];
        const int v = a == u ? b : (b == u ? a : -1);
        if (v >= 0 && base[v] < 0) {
          base[v] = start;
          queue.push_back(v);
        }
      }
    }
  }
  return base;
}

/// Sub-grid used for the intermediate identity checks.
std::vector<Sample> check_grid(const ParameterBox& box) {
  ParameterBox coarse = box;
  coarse.points = std::min(box.points, 5);
  return coarse.grid();
}

/// Per-parameter computations are cached, keyed by the exact parameter vector.
template <class F>
std::function<Cochain(std::span<const double>)> cached(F make) {
  auto cache = std::make_shared<std::map<Sample, Cochain>>();
  return [cache, make = std::move(make)](std::span<const double> x) {
    Sample key(x.begin(), x.end());
    auto it = cache->find(key);
    if (it == cache->end()) it = cache->emplace(key, make(x)).first;
    return it->second;
  };
}

Check provider_check(const ReferencePrimitiveProvider& provider, const FamilySpec& f, const GoodCover& cover,
                     std::span<const Sample> params, double tolerance) {
  Check c{"provider.residual", 0.0, tolerance};
  for (const auto& x : or_single(params)) {
    const Form diff = ext_d(provider.at(x)) - at_parameters(f.omega, x);
    for (const auto& y : cover.region_samples) {
      const double v = max_abs(diff, Point(y, x));
      if (!(v <= c.value)) c.value = v, c.where = where_str(y, x);
    }
  }
  if (!c.pass()) {
    throw PreconditionError(fmt::format("reference primitive violates d eta = omega by {:g} at {}", c.value, c.where));
  }
  return c;
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<Sample> ParameterBox::grid() const {
  std::vector<Sample> out{Sample{}};
  for (const auto& [lo, hi] : ranges) {
    std::vector<Sample> next;
    for (const auto& s : out) {
      for (int i = 0; i < points; ++i) {
        Sample t = s;
        t.push_back(points == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * i / (points - 1));
        next.push_back(std::move(t));
      }
    }
    out = std::move(next);
  }
  return out;
}

Sample ParameterBox::centre() const {
  Sample c;
  for (const auto& [lo, hi] : ranges) c.push_back(0.5 * (lo + hi));
  return c;
}

double closedness_defect(const FamilySpec& f, const GoodCover& cover, std::span<const Sample> params) {
  const Form d = ext_d(f.omega);
  double worst = 0.0;
  for (const auto& x : or_single(params)) {
    for (const auto& y : cover.region_samples) worst = std::max(worst, max_abs(d, Point(y, x)));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Providers

ReferencePrimitiveProvider ReferencePrimitiveProvider::symbolic(Form eta) {
  ReferencePrimitiveProvider p;
  p.mode_ = "symbolic";
  p.degree_ = eta.degree();
  p.symbolic_ = std::move(eta);
  return p;
}

ReferencePrimitiveProvider ReferencePrimitiveProvider::jittered(Form eta, int parameter, double threshold, Form term) {
  if (term.degree() != eta.degree()) throw ConfigError("jitter term degree differs from the primitive");
  if (parameter < 0 || parameter >= kMaxParams) throw ConfigError("jitter parameter index out of range");
  const Expr s = step(Expr::x(parameter + 1) - threshold);
  ReferencePrimitiveProvider p;
  p.mode_ = "jittered";
  p.degree_ = eta.degree();
  p.symbolic_ = eta + s * term;
  p.jitter_ = std::make_pair(parameter, threshold);
  return p;
}

ReferencePrimitiveProvider ReferencePrimitiveProvider::callback(int dim, int degree,
                                                                std::function<Form(std::span<const double>)> f) {
  ReferencePrimitiveProvider p;
  p.mode_ = "callback";
  p.degree_ = degree;
  p.callback_ = [dim, degree, f = std::move(f)](std::span<const double> x) {
    Form w = f(x);
    if (w.dim() != dim || w.degree() != degree) throw PreconditionError("callback primitive has the wrong shape");
    return w;
  };
  return p;
}

Form ReferencePrimitiveProvider::at(std::span<const double> x) const {
  if (callback_) return callback_(x);
  return at_parameters(*symbolic_, x);
}

Form at_parameters(const Form& w, std::span<const double> x) {
  if (x.empty()) return w;
  std::map<Symbol, Expr> repl;
  for (std::size_t i = 0; i < x.size(); ++i) repl.emplace(Symbol::x(static_cast<int>(i) + 1), Expr(x[i]));
  return w.map_coefficients([&](const Expr& c) { return substitute(c, repl); });
}

Cochain at_parameters(const Cochain& c, std::span<const double> x) {
  return c.map_forms(c.form_degree(), [&](const Form& w) { return at_parameters(w, x); });
}

// ---------------------------------------------------------------------------
// Local primitives and constants

Cochain local_primitives(const Form& omega, const GoodCover& cover) {
  if (omega.degree() < 1) throw PreconditionError("local primitives need a form of degree >= 1");
  Cochain tau(cover, 0, omega.degree() - 1);
  for (int a = 0; a < cover.size(); ++a) {
    const Form restricted = omega.with_domain(cover.name({a}));
    tau.set({a}, homotopy(restricted, cover.sets[a].chart));
  }
  return tau;
}

OverlapConstants overlap_constants(const Cochain& tau, std::span<const Sample> params, double tolerance) {
  if (tau.degree() != 0 || tau.form_degree() != 0) throw PreconditionError("overlap constants need a 0-cochain of functions");
  const GoodCover& cover = tau.cover();
  OverlapConstants out;
  for (const NerveSimplex* e : cover.simplices(1)) {
    const Expr diff = tau.get({e->vertices[1]}).coefficient(0) - tau.get({e->vertices[0]}).coefficient(0);
    const Expr value = at_point(diff, e->witness);
    out.values.emplace(e->vertices, value);
    for (const auto& x : or_single(params)) {
      const double c = eval(value, Point(std::span<const double>{}, x));
      for (const auto& y : e->samples) {
        const double dev = std::abs(eval(diff, Point(y, x)) - c);
        if (!(dev <= out.spread)) out.spread = dev, out.where = cover.name(e->vertices) + " " + where_str(y, x);
      }
    }
  }
  if (!(out.spread <= tolerance)) {
    throw PreconditionError(fmt::format("overlap difference is not constant: spread {:g} at {} (tolerance {:g})",
                                        out.spread, out.where, tolerance));
  }
  return out;
}

ExtendedConstants extend_constants(const OverlapConstants& c, const GoodCover& cover, std::span<const Sample> params,
                                   double tolerance) {
  const int n = cover.size();
  ExtendedConstants out;
  out.to_base.assign(n, Expr());
  out.base.assign(n, -1);
  std::vector<std::vector<std::pair<int, Expr>>> adj(n);  // (neighbour, C^{u v})
  for (const auto& [s, value] : c.values) {
    adj[s[0]].emplace_back(s[1], value);
    adj[s[1]].emplace_back(s[0], -value);
  }
  for (auto& list : adj) std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<std::pair<int, int>> tree;
  for (int start = 0; start < n; ++start) {
    if (out.base[start] >= 0) continue;
    out.base[start] = start;
    std::deque<int> queue{start};
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      for (const auto& [v, cuv] : adj[u]) {
        if (out.base[v] >= 0) continue;
        out.base[v] = start;
        out.to_base[v] = out.to_base[u] + cuv;
        tree.emplace_back(std::min(u, v), std::max(u, v));
        queue.push_back(v);
      }
    }
  }

  for (const auto& [s, value] : c.values) {
    if (std::find(tree.begin(), tree.end(), std::make_pair(s[0], s[1])) != tree.end()) continue;
    const Expr cycle = out.to_base[s[0]] + value - out.to_base[s[1]];
    for (const auto& x : or_single(params)) {
      const double d = std::abs(eval(cycle, Point(std::span<const double>{}, x)));
      if (!(d <= out.defect)) out.defect = d, out.defect_edge = cover.name(s);
    }
  }
  if (!(out.defect <= tolerance)) {
    throw NotExactError(fmt::format("cycle through {} fails to close by {:.10g}", out.defect_edge, out.defect),
                        out.defect);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Results

Cochain ReconstructionResult::at(std::span<const double> x) const {
  if (symbolic) return *symbolic;
  return per_parameter(x);
}

bool ReconstructionResult::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return !c.asserted || c.pass(); });
}

// ---------------------------------------------------------------------------
// Degree-1 pipelines

ReconstructionResult reconstruct_deg1_chain(const FamilySpec& f, const GoodCover& cover, const Tolerances& tol) {
  require_degree(f, f.degree() == 1, "the degree-1 chain reconstruction");
  const auto xs = check_grid(f.parameters);
  const Cochain tau = local_primitives(f.omega, cover);
  const OverlapConstants c = overlap_constants(tau, xs, tol.constancy);
  const ExtendedConstants ext = extend_constants(c, cover, xs, tol.cycle);

  ReconstructionResult r;
  r.mode = "deg1-chain";
  r.primitive_degree = 0;
  Cochain out(cover, 0, 0);
  bool has_step = false;
  for (int a = 0; a < cover.size(); ++a) {
    const Expr v = tau.get({a}).coefficient(0) - ext.to_base[a];
    has_step = has_step || v.has_step();
    out.set({a}, Form::scalar(cover.dim, v));
  }
  r.symbolic = out;
  r.add({"overlap.constancy", c.spread, tol.constancy, true, c.where});
  r.add({"monodromy.defect", ext.defect, tol.cycle, true, ext.defect_edge});
  r.add({"output.step_free", has_step ? 1.0 : 0.0, 0.0});
  r.info["components"] = static_cast<double>(std::count_if(ext.base.begin(), ext.base.end(), [i = 0](int b) mutable {
    return b == i++;
  }));
  return r;
}

ReconstructionResult reconstruct_deg1_paper(const FamilySpec& f, const GoodCover& cover,
                                            const ReferencePrimitiveProvider& provider, const Tolerances& tol) {
  require_degree(f, f.degree() == 1, "the degree-1 paper reconstruction");
  if (provider.degree() != 0) throw ConfigError("the reference primitive of a 1-form must be a 0-form");
  const auto xs = check_grid(f.parameters);

  ReconstructionResult r;
  r.mode = "deg1-paper";
  r.primitive_degree = 0;
  r.add(provider_check(provider, f, cover, xs, tol.provider));

  const Cochain tau = local_primitives(f.omega, cover);
  const std::vector<int> base = component_bases(cover);
  const GoodCover* cov = &cover;
  r.per_parameter = cached([tau, base, provider, cov](std::span<const double> x) {
    const Cochain tau_x = at_parameters(tau, x);
    const Form eta = provider.at(x);
    // C~^a = tau^a - eta at the witness of U_a; only differences are used.
    std::vector<double> tilde(cov->size());
    for (int a = 0; a < cov->size(); ++a) {
      const auto& w = cov->find({a})->witness;
      tilde[a] = eval(tau_x.get({a}).coefficient(0) - eta.coefficient(0), Point(w, x));
    }
    Cochain out(*cov, 0, 0);
    for (int a = 0; a < cov->size(); ++a) {
      out.set({a}, Form::scalar(cov->dim, tau_x.get({a}).coefficient(0) - (tilde[a] - tilde[base[a]])));
    }
    return out;
  });
  return r;
}

// ---------------------------------------------------------------------------
// Higher-degree pipelines

ReconstructionResult reconstruct_paper_direct(const FamilySpec& f, const GoodCover& cover,
                                              const ReferencePrimitiveProvider& provider, const Tolerances& tol) {
  require_degree(f, f.degree() >= 2, "the paper-direct reconstruction");
  if (provider.degree() != f.degree() - 1) throw ConfigError("reference primitive has the wrong degree");
  const auto xs = check_grid(f.parameters);

  ReconstructionResult r;
  r.mode = "paper-direct";
  r.primitive_degree = f.degree() - 1;
  r.add(provider_check(provider, f, cover, xs, tol.provider));

  const Cochain tau = local_primitives(f.omega, cover);
  const std::vector<Expr> rho = partition_of_unity(cover);
  const GoodCover* cov = &cover;

  struct Stages {
    Cochain tau, diff, a, g, G, out;
  };
  auto stages = [tau, rho, provider, cov](std::span<const double> x) {
    const Cochain tau_x = at_parameters(tau, x);
    const Form eta = provider.at(x);
    Cochain diff(*cov, 0, tau.form_degree());  // tau^a - eta on U_a
    Cochain a(*cov, 0, tau.form_degree() - 1);
    for (int s = 0; s < cov->size(); ++s) {
      const Form d = tau_x.get({s}) - eta.with_domain(cov->name({s}));
      diff.set({s}, d);
      a.set({s}, homotopy(d, cov->sets[s].chart));
    }
    Cochain g = coboundary(a);
    Cochain G = mv_homotopy_K(g, rho);
    Cochain out = tau_x - ext_d(G);
    return Stages{tau_x, diff, a, g, G, out};
  };
  r.per_parameter = cached([stages](std::span<const double> x) { return stages(x).out; });

  Check da{"paper.da_equals_tau_minus_eta", 0.0, tol.intermediate};
  Check dg{"paper.delta_g", 0.0, tol.delta_g};
  Check dG{"paper.delta_G_equals_g", 0.0, tol.delta_G};
  auto keep = [](Check& c, const SampleMax& m) {
    if (!(m.value <= c.value)) c.value = m.value, c.where = m.where;
  };
  for (const auto& x : xs) {
    const Stages s = stages(x);
    const std::vector<Sample> one{x};
    keep(da, cochain_max(ext_d(s.a) - s.diff, one));
    if (cover.max_simplex_degree() >= 2) keep(dg, cochain_max(coboundary(s.g), one));
    keep(dG, cochain_max(coboundary(s.G) - s.g, one));
  }
  r.add(da);
  r.add(dg);
  r.add(dG);
  return r;
}

ReconstructionResult reconstruct_zigzag(const FamilySpec& f, const GoodCover& cover, const Tolerances& tol) {
  require_degree(f, f.degree() >= 2, "the zig-zag reconstruction");
  const int k = f.degree() - 1;
  for (int j = 1; j <= k; ++j) {
    for (const NerveSimplex* n : cover.simplices(j)) {
      if (!n->chart) throw PreconditionError("zig-zag needs a chart on simplex " + cover.name(n->vertices));
    }
  }
  const auto xs = check_grid(f.parameters);
  ReconstructionResult r;
  r.mode = "zigzag";
  r.primitive_degree = k;

  // Descend: xi^j = H(delta xi^{j-1}) simplex by simplex.
  std::vector<Cochain> xi{local_primitives(f.omega, cover)};
  for (int j = 1; j <= k; ++j) {
    const Cochain d = coboundary(xi.back());
    Cochain next(cover, j, f.degree() - 1 - j);
    for (const auto& [s, w] : d.components()) next.set(s, homotopy(w, cover.chart(s)));
    Check c{fmt::format("zigzag.d_xi{}_equals_delta_xi{}", j, j - 1), 0.0, tol.intermediate};
    const SampleMax m = cochain_max(ext_d(next) - d, xs);
    c.value = m.value, c.where = m.where;
    r.add(c);
    xi.push_back(std::move(next));
  }

  // z = delta xi^k is locally constant; freeze it at the witnesses.
  const Cochain z = coboundary(xi.back());
  const auto rows = cover.simplices(k + 1);
  const auto cols = cover.simplices(k);
  std::vector<Expr> zval;
  Check spread{"zigzag.z_constancy", 0.0, tol.constancy};
  for (const NerveSimplex* n : rows) {
    const Expr e = z.get(n->vertices).coefficient(0);
    zval.push_back(at_point(e, n->witness));
    for (const auto& x : or_single(xs)) {
      const double c = eval(zval.back(), Point(std::span<const double>{}, x));
      for (const auto& y : n->samples) {
        const double dev = std::abs(eval(e, Point(y, x)) - c);
        if (!(dev <= spread.value)) spread.value = dev, spread.where = cover.name(n->vertices) + " " + where_str(y, x);
      }
    }
  }
  r.add(spread);
  if (!spread.pass()) {
    throw PreconditionError(fmt::format("top zig-zag cochain is not constant: spread {:g} at {}", spread.value, spread.where));
  }

  // Minimal-norm solution of delta c = z through a fixed pseudo-inverse.
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Simplex& s = rows[i]->vertices;
    for (std::size_t drop = 0; drop < s.size(); ++drop) {
      Simplex face = s;
      face.erase(face.begin() + static_cast<long>(drop));
      const auto it = std::find_if(cols.begin(), cols.end(), [&](const NerveSimplex* n) { return n->vertices == face; });
      if (it == cols.end()) throw PreconditionError("face " + cover.name(face) + " missing from the nerve");
      D(static_cast<Eigen::Index>(i), it - cols.begin()) = drop % 2 ? -1.0 : 1.0;
    }
  }
  Eigen::MatrixXd pinv = Eigen::MatrixXd::Zero(D.cols(), D.rows());
  if (D.size() > 0) pinv = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(D).pseudoInverse();
  std::vector<Expr> cval(cols.size());
  for (Eigen::Index c = 0; c < pinv.rows(); ++c) {
    for (Eigen::Index i = 0; i < pinv.cols(); ++i) {
      if (std::abs(pinv(c, i)) > 1e-14) cval[c] += pinv(c, i) * zval[i];
    }
  }
  Check solve{"zigzag.solve_residual", 0.0, tol.solve};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Expr res = -zval[i];
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (D(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) != 0.0) {
        res += D(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) * cval[c];
      }
    }
    for (const auto& x : or_single(xs)) {
      const double v = std::abs(eval(res, Point(std::span<const double>{}, x)));
      if (!(v <= solve.value)) solve.value = v, solve.where = cover.name(rows[i]->vertices) + " " + where_str({}, x);
    }
  }
  r.add(solve);
  r.info["zigzag.unknowns"] = static_cast<double>(cols.size());
  r.info["zigzag.equations"] = static_cast<double>(rows.size());
  if (!solve.pass()) {
    throw NotExactError(fmt::format("delta c = z has no solution: residual {:.10g} at {}", solve.value, solve.where),
                        solve.value);
  }

  // Ascend: mu^{j-1} = xi^{j-1} - d K mu^j.
  const std::vector<Expr> rho = partition_of_unity(cover);
  Cochain constants(cover, k, 0);
  for (std::size_t c = 0; c < cols.size(); ++c) constants.set(cols[c]->vertices, Form::scalar(cover.dim, cval[c]));
  Cochain mu = xi[k] - constants;
  for (int j = k; j >= 0; --j) {
    if (j < cover.max_simplex_degree()) {
      Check c{fmt::format("zigzag.delta_mu{}", j), 0.0, tol.cocycle};
      const SampleMax m = cochain_max(coboundary(mu), xs);
      c.value = m.value, c.where = m.where;
      r.add(c);
    }
    if (j == 0) break;
    mu = xi[j - 1] - ext_d(mv_homotopy_K(mu, rho));
  }
  r.symbolic = mu;
  return r;
}

// ---------------------------------------------------------------------------
// Verification

std::vector<Sample> region_grid(const GoodCover& cover, int per_axis) {
  std::vector<Sample> out{Sample{}};
  for (const auto& [lo, hi] : cover.box) {
    std::vector<Sample> next;
    for (const auto& s : out) {
      for (int i = 0; i < per_axis; ++i) {
        Sample t = s;
        t.push_back(lo + (hi - lo) * (i + 0.5) / per_axis);
        next.push_back(std::move(t));
      }
    }
    out = std::move(next);
  }
  std::erase_if(out, [&](const Sample& y) { return !cover.in_region(y) || cover.first_containing(y) < 0; });
  return out;
}

void verify_reconstruction(ReconstructionResult& r, const FamilySpec& f, const GoodCover& cover,
                           std::span<const Sample> m_grid, std::span<const Sample> x_grid, const Tolerances& tol,
                           const std::optional<Form>& oracle) {
  Check residual{"residual.d_tau_minus_omega", 0.0, tol.residual};
  Check gluing{"gluing.mismatch", 0.0, tol.gluing};
  Check cocycle{"cocycle.delta_tau", 0.0, tol.cocycle};
  Check spread{"oracle.spread", 0.0, tol.oracle};
  double residual_sum = 0.0;
  std::size_t residual_count = 0;

  std::vector<int> branch;
  for (const auto& y : m_grid) branch.push_back(cover.first_containing(y));

  std::optional<std::vector<Form>> fixed_defect;
  auto defects = [&](const Cochain& c) {
    std::vector<Form> d;
    for (int a = 0; a < cover.size(); ++a) d.push_back(ext_d(c.get({a})) - f.omega.with_domain(cover.name({a})));
    return d;
  };
  if (r.symbolic) fixed_defect = defects(*r.symbolic);

  for (const auto& x : or_single(x_grid)) {
    const Cochain c = r.at(x);
    const std::vector<Form> defect = fixed_defect ? *fixed_defect : defects(c);
    const GluedForm glued(c);
    std::map<IndexSet, std::pair<double, double>> range;  // oracle difference min/max per coefficient
    const Form oracle_x = oracle ? *oracle : Form(cover.dim, r.primitive_degree);
    for (std::size_t i = 0; i < m_grid.size(); ++i) {
      const Point p(m_grid[i], x);
      const double v = max_abs(defect[branch[i]], p);
      residual_sum += v;
      ++residual_count;
      if (!(v <= residual.value)) residual.value = v, residual.where = where_str(m_grid[i], x);
      const double mm = glued.mismatch(m_grid[i], x);
      if (!(mm <= gluing.value)) gluing.value = mm, gluing.where = where_str(m_grid[i], x);
      if (oracle) {
        const auto diff = evaluate(c.get({branch[i]}) - oracle_x.with_domain(cover.name({branch[i]})), p);
        for (IndexSet I = 0; I < (IndexSet{1} << cover.dim); ++I) {
          if (degree_of(I) != r.primitive_degree) continue;
          const double d = diff.count(I) ? diff.at(I) : 0.0;
          auto [it, fresh] = range.try_emplace(I, d, d);
          if (!fresh) it->second = {std::min(it->second.first, d), std::max(it->second.second, d)};
        }
      }
    }
    for (const auto& [I, mm] : range) {
      const double s = mm.second - mm.first;
      if (!(s <= spread.value)) spread.value = s, spread.where = fmt::format("x=({})", fmt::join(x, ", "));
    }
    const std::vector<Sample> one{x};
    const SampleMax dc = cochain_max(coboundary(c), one);
    if (!(dc.value <= cocycle.value)) cocycle.value = dc.value, cocycle.where = dc.where;
  }
  r.add(residual);
  r.add(gluing);
  r.add(cocycle);
  if (oracle) r.add(spread);
  r.info["residual.mean"] = residual_count ? residual_sum / static_cast<double>(residual_count) : 0.0;
  r.info["residual.points"] = static_cast<double>(residual_count);
}

// ---------------------------------------------------------------------------
// Smoothness

bool SmoothnessReport::flagged() const {
  return std::any_of(entries.begin(), entries.end(), [](const SmoothnessEntry& e) { return e.flagged; });
}

SmoothnessReport smoothness_report(const std::function<std::map<IndexSet, double>(std::span<const double>)>& f,
                                   const std::vector<Probe>& probes, const ParameterBox& box) {
  if (box.points < 3) throw PreconditionError("parameter grid too coarse: fewer than 3 points per axis");
  constexpr int kHalvings = 4;
  SmoothnessReport rep;
  for (const Probe& probe : probes) {
    auto shifted = [&](double dx) {
      Sample x = probe.x;
      x[probe.axis] += dx;
      return f(x);
    };
    const auto centre = f(probe.x);
    std::vector<std::map<IndexSet, double>> plus, minus;
    for (int k = 0; k <= kHalvings; ++k) {
      const double h = std::ldexp(probe.h, -k);
      plus.push_back(shifted(h));
      minus.push_back(shifted(-h));
    }
    std::vector<IndexSet> keys;
    for (const auto& m : {centre, plus[0], minus[0], plus[kHalvings], minus[kHalvings]}) {
      for (const auto& [I, v] : m) keys.push_back(I);
    }
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    auto get = [](const std::map<IndexSet, double>& m, IndexSet I) { return m.count(I) ? m.at(I) : 0.0; };
    for (IndexSet I : keys) {
      SmoothnessEntry e;
      e.probe = probe;
      e.coefficient = I;
      e.value = get(centre, I);
      for (int k = 0; k <= kHalvings; ++k) {
        const double h = std::ldexp(probe.h, -k);
        e.first.push_back((get(plus[k], I) - get(minus[k], I)) / (2 * h));
        if (k <= 1) e.second.push_back((get(plus[k], I) - 2 * e.value + get(minus[k], I)) / (h * h));
      }
      const double coarse = std::abs(e.first.front()), fine = std::abs(e.first.back());
      e.growth = fine / std::max(coarse, std::numeric_limits<double>::min());
      e.flagged = fine >= 10.0 * std::max(coarse, 1e-6);
      rep.entries.push_back(std::move(e));
    }
  }
  return rep;
}

std::vector<Probe> default_probes(const GoodCover& cover, const ParameterBox& box,
                                  const ReferencePrimitiveProvider* provider) {
  if (box.points < 3) throw PreconditionError("parameter grid too coarse: fewer than 3 points per axis");
  std::vector<Probe> probes;
  const Sample m = cover.find({0})->witness;
  const Sample centre = box.centre();
  for (int j = 0; j < box.count(); ++j) {
    const double h = 0.5 * (box.ranges[j].second - box.ranges[j].first) / (box.points - 1);
    probes.push_back({m, centre, j, h});
    if (provider && provider->jitter() && provider->jitter()->first == j && centre[j] != provider->jitter()->second) {
      Sample x = centre;
      x[j] = provider->jitter()->second;
      probes.push_back({m, x, j, h});
    }
  }
  return probes;
}

}  // namespace pfam
