#include "pfam/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "pfam/fixtures.hpp"
#include "pfam/random_forms.hpp"

namespace pfam {

namespace {

// ---------------------------------------------------------------------------
// Parsing helpers

[[noreturn]] void bad(const std::string& what) { throw ConfigError(what); }

const Json& require(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) bad(fmt::format("{}: missing \"{}\"", where, key));
  return j.at(key);
}

Expr parse_expr(const Json& j, SymbolContext ctx, const std::string& where) {
  if (j.is_number()) return Expr(j.get<double>());
  if (!j.is_string()) bad(where + ": expected an expression string");
  try {
    return parse(j.get<std::string>(), ctx);
  } catch (const ParseError& e) {
    bad(fmt::format("{}: {}", where, e.what()));
  }
}

std::vector<Expr> parse_exprs(const Json& j, SymbolContext ctx, const std::string& where) {
  if (!j.is_array()) bad(where + ": expected an array of expressions");
  std::vector<Expr> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(parse_expr(j[i], ctx, fmt::format("{}[{}]", where, i)));
  return out;
}

Sample parse_point(const Json& j, std::size_t dim, const std::string& where) {
  if (!j.is_array() || j.size() != dim) bad(fmt::format("{}: expected {} numbers", where, dim));
  Sample s;
  for (const auto& v : j) s.push_back(v.get<double>());
  return s;
}

std::vector<std::pair<double, double>> parse_box(const Json& j, const std::string& where) {
  if (!j.is_array()) bad(where + ": expected a list of [lo, hi] pairs");
  std::vector<std::pair<double, double>> out;
  for (const auto& iv : j) {
    if (!iv.is_array() || iv.size() != 2 || !(iv[0].get<double>() < iv[1].get<double>())) {
      bad(where + ": every interval must be [lo, hi] with lo < hi");
    }
    out.emplace_back(iv[0].get<double>(), iv[1].get<double>());
  }
  return out;
}

SmoothMap parse_chart(const Json& j, int dim, const std::string& where) {
  if (j.is_string() && j.get<std::string>() == "identity") return SmoothMap::identity(dim);
  const SymbolContext ctx{dim, 0};
  auto fwd = parse_exprs(require(j, "forward", where), ctx, where + ".forward");
  auto inv = parse_exprs(require(j, "inverse", where), ctx, where + ".inverse");
  if (static_cast<int>(fwd.size()) != dim || static_cast<int>(inv.size()) != dim) {
    bad(where + ": chart components must match the dimension");
  }
  return SmoothMap(dim, std::move(fwd), std::move(inv));
}

std::string index_label(IndexSet I) {
  if (I == 0) return "1";
  std::string s;
  for (int k : indices(I)) s += (s.empty() ? "dy" : "^dy") + std::to_string(k);
  return s;
}

// ---------------------------------------------------------------------------
// Report helpers

OrderedJson check_json(const Check& c) {
  OrderedJson j;
  j["name"] = c.name;
  j["value"] = c.value;
  j["tolerance"] = c.tolerance;
  j["asserted"] = c.asserted;
  j["pass"] = c.pass();
  if (!c.where.empty()) j["where"] = c.where;
  return j;
}

OrderedJson smoothness_json(const SmoothnessReport& rep, bool asserted) {
  OrderedJson j;
  j["asserted"] = asserted;
  j["flagged"] = rep.flagged();
  double growth = 0.0, second = 0.0;
  OrderedJson entries = OrderedJson::array();
  for (const auto& e : rep.entries) {
    growth = std::max(growth, e.growth);
    for (double s : e.second) second = std::max(second, std::abs(s));
    OrderedJson ej;
    ej["axis"] = e.probe.axis + 1;
    ej["x"] = e.probe.x;
    ej["m"] = e.probe.m;
    ej["h"] = e.probe.h;
    ej["coefficient"] = index_label(e.coefficient);
    ej["value"] = e.value;
    ej["first_differences"] = e.first;
    ej["second_differences"] = e.second;
    ej["growth"] = e.growth;
    ej["flagged"] = e.flagged;
    entries.push_back(std::move(ej));
  }
  j["max_growth"] = growth;
  j["max_second_difference"] = second;
  j["entries"] = std::move(entries);
  return j;
}

OrderedJson values_json(const std::map<IndexSet, double>& v) {
  OrderedJson j = OrderedJson::object();
  for (const auto& [I, x] : v) j[index_label(I)] = x;
  return j;
}

class Stopwatch {
 public:
  void lap(const std::string& stage) {
    const auto now = std::chrono::steady_clock::now();
    laps_.emplace_back(stage, std::chrono::duration<double>(now - last_).count());
    last_ = now;
  }
  OrderedJson json() const {
    OrderedJson j;
    for (const auto& [k, v] : laps_) j[k] = v;
    return j;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
  std::vector<std::pair<std::string, double>> laps_;
};

std::map<std::string, double*> tolerance_slots(Tolerances& t) {
  return {{"residual", &t.residual},         {"gluing", &t.gluing},     {"cocycle", &t.cocycle},
          {"constancy", &t.constancy},       {"cycle", &t.cycle},       {"solve", &t.solve},
          {"intermediate", &t.intermediate}, {"delta_g", &t.delta_g},   {"delta_G", &t.delta_G},
          {"closed", &t.closed},             {"provider", &t.provider}, {"oracle", &t.oracle},
          {"local", &t.local},               {"agreement", &t.agreement}, {"leafwise", &t.leafwise}};
}

const std::vector<std::string>& known_modes() {
  static const std::vector<std::string> modes{"deg1-chain", "deg1-paper", "paper-direct", "zigzag", "foliation"};
  return modes;
}

}  // namespace

// ---------------------------------------------------------------------------

Form parse_form(const Json& j, int dim, int params) {
  const SymbolContext ctx{dim, params};
  if (j.is_string() || j.is_number()) return Form::scalar(dim, parse_expr(j, ctx, "form"));
  const int degree = require(j, "degree", "form").get<int>();
  if (degree < 0 || degree > dim + 1) bad("form: degree out of range");
  Form w(dim, degree);
  if (!j.contains("terms")) return w;
  for (const auto& [key, value] : j.at("terms").items()) {
    std::vector<int> idx;
    std::stringstream ss(key);
    std::string part;
    while (std::getline(ss, part, ',')) {
      try {
        idx.push_back(std::stoi(part));
      } catch (const std::exception&) {
        bad("form: bad index key \"" + key + "\"");
      }
    }
    if (static_cast<int>(idx.size()) != degree) bad("form: index \"" + key + "\" does not match the degree");
    for (int i : idx) {
      if (i < 1 || i > dim) bad("form: index \"" + key + "\" outside 1.." + std::to_string(dim));
    }
    const IndexSet I = index_set(idx);
    if (degree_of(I) != degree) bad("form: repeated index in \"" + key + "\"");
    Expr c = parse_expr(value, ctx, "form.terms." + key);
    // Keys may list indices in any order; the stored coefficient is for the sorted one.
    std::vector<int> sorted = idx;
    int sign = sort_with_sign(sorted);
    w.add(I, Expr(static_cast<double>(sign)) * c);
  }
  return w;
}

GoodCover parse_cover(const Json& cover, const Json& manifold, std::uint64_t seed) {
  const int samples = cover.value("samples", 8);
  const int region_samples = cover.value("region_samples", 200);
  const std::string preset = cover.value("preset", "");
  if (preset == "annulus") {
    if (manifold.is_object() && manifold.value("dim", 2) != 2) bad("annulus preset needs dim 2");
    return annulus_cover(seed, samples, region_samples);
  }
  const int dim = require(manifold, "dim", "manifold").get<int>();
  if (dim < 1 || dim > kMaxCoords) bad("manifold: dim out of range");
  const auto box = parse_box(require(manifold, "box", "manifold"), "manifold.box");
  if (static_cast<int>(box.size()) != dim) bad("manifold.box: wrong number of intervals");

  if (preset == "boxes") {
    std::vector<Box> sets;
    for (const auto& s : require(cover, "sets", "cover")) {
      sets.push_back(parse_box(s, "cover.sets"));
      if (static_cast<int>(sets.back().size()) != dim) bad("cover.sets: box of the wrong dimension");
    }
    const std::string chart = cover.value("chart", "tan");
    if (chart != "tan" && chart != "affine") bad("cover.chart must be \"tan\" or \"affine\"");
    GoodCover c = box_cover(box, sets, cover.value("shrink", 0.95), cover.value("max_degree", dim), seed, samples,
                            region_samples, chart == "tan" ? BoxChart::Tan : BoxChart::Affine);
    if (manifold.contains("region")) {
      c.region = parse_exprs(manifold.at("region"), SymbolContext{dim, 0}, "manifold.region");
      c.region_samples.clear();
      c.ensure_samples(region_samples, samples, seed);
    }
    return c;
  }
  if (!preset.empty()) bad("cover: unknown preset \"" + preset + "\"");

  GoodCover c;
  c.dim = dim;
  c.box = box;
  const SymbolContext ctx{dim, 0};
  if (manifold.contains("region")) c.region = parse_exprs(manifold.at("region"), ctx, "manifold.region");
  const Json& sets = require(cover, "sets", "cover");
  for (std::size_t a = 0; a < sets.size(); ++a) {
    const std::string where = fmt::format("cover.sets[{}]", a);
    CoverSet s;
    s.name = sets[a].value("name", fmt::format("U{}", a + 1));
    s.predicates = parse_exprs(require(sets[a], "predicates", where), ctx, where + ".predicates");
    s.chart = parse_chart(require(sets[a], "chart", where), dim, where + ".chart");
    s.bump = parse_expr(require(sets[a], "bump", where), ctx, where + ".bump");
    c.sets.push_back(std::move(s));
  }
  const Json& nerve = require(cover, "nerve", "cover");
  for (std::size_t i = 0; i < nerve.size(); ++i) {
    const std::string where = fmt::format("cover.nerve[{}]", i);
    NerveSimplex n;
    n.vertices = require(nerve[i], "vertices", where).get<Simplex>();
    Simplex sorted = n.vertices;
    if (sort_with_sign(sorted) == 0 || sorted != n.vertices) bad(where + ": vertices must be strictly increasing");
    for (int v : n.vertices) {
      if (v < 0 || v >= c.size()) bad(where + ": vertex index out of range");
    }
    n.witness = parse_point(require(nerve[i], "witness", where), dim, where + ".witness");
    if (nerve[i].contains("samples")) {
      for (const auto& p : nerve[i].at("samples")) n.samples.push_back(parse_point(p, dim, where + ".samples"));
    }
    if (nerve[i].contains("chart")) n.chart = parse_chart(nerve[i].at("chart"), dim, where + ".chart");
    c.nerve.push_back(std::move(n));
  }
  c.ensure_samples(region_samples, samples, seed);
  return c;
}

Scenario load_scenario(const Json& j) {
  if (!j.is_object()) bad("scenario must be a JSON object");
  Scenario s;
  s.name = j.value("name", "scenario");
  s.seed = j.value("seed", std::uint64_t{0});
  s.output = j.value("output", "");

  const Json& mode = require(j, "mode", "scenario");
  if (mode.is_string()) {
    s.modes.push_back(mode.get<std::string>());
  } else if (mode.is_array() && !mode.empty()) {
    for (const auto& m : mode) s.modes.push_back(m.get<std::string>());
  } else {
    bad("mode must be a string or a non-empty array");
  }
  for (const auto& m : s.modes) {
    if (std::find(known_modes().begin(), known_modes().end(), m) == known_modes().end()) bad("unknown mode \"" + m + "\"");
  }

  if (j.contains("tolerances")) {
    auto slots = tolerance_slots(s.tolerances);
    for (const auto& [k, v] : j.at("tolerances").items()) {
      auto it = slots.find(k);
      if (it == slots.end()) bad("unknown tolerance \"" + k + "\"");
      *it->second = v.get<double>();
    }
  }

  const bool foliation_only =
      std::all_of(s.modes.begin(), s.modes.end(), [](const std::string& m) { return m == "foliation"; });
  const bool wants_foliation = std::find(s.modes.begin(), s.modes.end(), "foliation") != s.modes.end();

  if (!foliation_only) {
    const Json manifold = j.value("manifold", Json::object());
    s.cover = parse_cover(require(j, "cover", "scenario"), manifold, s.seed);
    const Json& fam = require(j, "family", "scenario");
    const Json params = fam.value("parameters", Json::object());
    ParameterBox box;
    if (params.contains("box")) box.ranges = parse_box(params.at("box"), "family.parameters.box");
    box.points = params.value("points", 20);
    if (box.count() > kMaxParams) bad("too many parameters");
    const int n = box.count();
    s.family = FamilySpec{parse_form(require(fam, "form", "family"), s.cover->dim, n), box};
    if (j.contains("grid")) s.m_per_axis = j.at("grid").value("m_per_axis", 20);
    if (j.contains("oracle")) s.oracle = parse_form(j.at("oracle"), s.cover->dim, n);
    if (j.contains("provider")) {
      const Json& p = j.at("provider");
      const std::string kind = require(p, "mode", "provider").get<std::string>();
      const Form eta = parse_form(require(p, "eta", "provider"), s.cover->dim, n);
      if (kind == "symbolic") {
        s.provider = ReferencePrimitiveProvider::symbolic(eta);
      } else if (kind == "jittered") {
        const Json& jit = require(p, "jitter", "provider");
        const int at = require(jit, "parameter", "provider.jitter").get<int>();
        if (at < 1 || at > n) bad("provider.jitter.parameter outside 1.." + std::to_string(n));
        const Form term = parse_form(require(jit, "term", "provider.jitter"), s.cover->dim, n);
        s.provider = ReferencePrimitiveProvider::jittered(eta, at - 1, jit.value("threshold", 0.0), term);
      } else {
        bad("provider.mode must be \"symbolic\" or \"jittered\"");
      }
    }
    for (const auto& m : s.modes) {
      if ((m == "deg1-paper" || m == "paper-direct") && !s.provider) bad("mode \"" + m + "\" needs a provider block");
    }
  }

  if (wants_foliation) {
    const Json& b = require(j, "bundle", "scenario");
    ProductBundle bundle;
    bundle.base = parse_cover(require(b, "cover", "bundle"), require(b, "manifold", "bundle"), s.seed);
    bundle.fiber_dim = require(b, "fiber_dim", "bundle").get<int>();
    if (bundle.fiber_dim < 1 || bundle.dim() > kMaxCoords) bad("bundle.fiber_dim out of range");
    if (b.contains("fiber_centres")) {
      for (const auto& c : b.at("fiber_centres")) {
        bundle.fiber_centres.push_back(parse_point(c, bundle.fiber_dim, "bundle.fiber_centres"));
      }
    }
    if (b.contains("fiber_box")) bundle.fiber_box = parse_box(b.at("fiber_box"), "bundle.fiber_box");
    s.bundle_form = parse_form(require(b, "form", "bundle"), bundle.dim(), 0);
    s.bundle_per_axis = b.value("grid", 10);
    s.bundle = std::move(bundle);
  }
  return s;
}

Json apply_overrides(Json scenario, const Overrides& o) {
  if (o.seed) scenario["seed"] = *o.seed;
  for (const auto& [k, v] : o.tolerances) scenario["tolerances"][k] = v;
  return scenario;
}

std::string digest(const Json& scenario) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : scenario.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

// ---------------------------------------------------------------------------
// Running

namespace {

struct Runner {
  explicit Runner(const Scenario& sc) : s(sc) {}
  const Scenario& s;
  Stopwatch clock;
  OrderedJson runs = OrderedJson::array();
  std::vector<std::string> failed;
  std::optional<OrderedJson> monodromy;
  double residual_max = 0.0, residual_mean_sum = 0.0;
  int residual_runs = 0;
  bool not_exact = false;
  std::map<std::string, ReconstructionResult> results;

  void record(const std::string& prefix, const std::vector<Check>& checks, OrderedJson& out) {
    OrderedJson list = OrderedJson::array();
    for (const auto& c : checks) {
      list.push_back(check_json(c));
      if (c.asserted && !c.pass()) failed.push_back(prefix + c.name);
    }
    out["checks"] = std::move(list);
  }

  OrderedJson primitive_json(const ReconstructionResult& r, const std::vector<Sample>& xs) {
    const GoodCover& cover = *s.cover;
    OrderedJson j;
    if (r.symbolic) {
      std::size_t nodes = 0;
      for (const auto& [sx, w] : r.symbolic->components()) {
        for (const auto& [I, c] : w.terms()) nodes += c.size();
      }
      j["kind"] = "symbolic";
      j["nodes"] = nodes;
      // Large trees are summarized by their size only.
      if (nodes <= 4000) {
        OrderedJson sets;
        for (const auto& [sx, w] : r.symbolic->components()) {
          OrderedJson coeffs = OrderedJson::object();
          for (const auto& [I, c] : w.terms()) coeffs[index_label(I)] = c.str();
          sets[cover.name(sx)] = std::move(coeffs);
        }
        j["coefficients"] = std::move(sets);
      }
    } else {
      j["kind"] = "per-parameter";
    }
    const Sample m = cover.find({0})->witness;
    OrderedJson table = OrderedJson::array();
    for (const auto& x : xs) {
      OrderedJson row;
      row["x"] = x;
      row["m"] = m;
      row["values"] = values_json(GluedForm(r.at(x)).evaluate(m, x));
      table.push_back(std::move(row));
    }
    j["table"] = std::move(table);
    return j;
  }

  void run_mode(const std::string& mode) {
    const GoodCover& cover = *s.cover;
    const FamilySpec& f = *s.family;
    const Tolerances& tol = s.tolerances;
    OrderedJson run;
    run["mode"] = mode;
    try {
      ReconstructionResult r;
      if (mode == "deg1-chain") r = reconstruct_deg1_chain(f, cover, tol);
      if (mode == "deg1-paper") r = reconstruct_deg1_paper(f, cover, *s.provider, tol);
      if (mode == "paper-direct") r = reconstruct_paper_direct(f, cover, *s.provider, tol);
      if (mode == "zigzag") r = reconstruct_zigzag(f, cover, tol);
      clock.lap(mode + ".reconstruct");

      const auto m_grid = region_grid(cover, s.m_per_axis);
      const auto x_grid = f.parameters.grid();
      verify_reconstruction(r, f, cover, m_grid, x_grid, tol, s.oracle);
      clock.lap(mode + ".verify");

      if (f.parameters.count() > 0) {
        const auto probes = default_probes(cover, f.parameters, s.provider ? &*s.provider : nullptr);
        const Sample m = probes.front().m;
        const auto rep = smoothness_report(
            [&](std::span<const double> x) { return GluedForm(r.at(x)).evaluate(m, x); }, probes, f.parameters);
        // Smooth by construction in these modes; measured only for the paper modes.
        const bool asserted = mode == "deg1-chain" || mode == "zigzag";
        r.add({"smoothness.flagged", rep.flagged() ? 1.0 : 0.0, 0.0, asserted});
        run["smoothness"] = smoothness_json(rep, asserted);
        clock.lap(mode + ".smoothness");
      }

      for (const auto& c : r.checks) {
        if (c.name == "residual.d_tau_minus_omega") residual_max = std::max(residual_max, c.value);
        if (c.name == "monodromy.defect") {
          OrderedJson md;
          md["defect"] = c.value;
          md["tolerance"] = c.tolerance;
          md["source"] = mode;
          monodromy = md;
        }
      }
      if (r.info.count("residual.mean")) {
        residual_mean_sum += r.info.at("residual.mean");
        ++residual_runs;
      }
      run["status"] = r.ok() ? "ok" : "failed";
      run["primitive_degree"] = r.primitive_degree;
      record(mode + ":", r.checks, run);
      OrderedJson info = OrderedJson::object();
      for (const auto& [k, v] : r.info) info[k] = v;
      run["info"] = std::move(info);
      ParameterBox coarse = f.parameters;
      coarse.points = std::min(coarse.points, 3);
      run["primitive"] = primitive_json(r, coarse.grid());
      results.emplace(mode, std::move(r));
    } catch (const NotExactError& e) {
      not_exact = true;
      run["status"] = "not_exact";
      run["defect"] = e.defect();
      run["message"] = e.what();
      OrderedJson md;
      md["defect"] = e.defect();
      md["tolerance"] = mode == "zigzag" ? tol.solve : tol.cycle;
      md["source"] = mode;
      monodromy = md;
    }
    runs.push_back(std::move(run));
  }

  std::optional<OrderedJson> provider_smoothness() {
    if (!s.provider || !s.family || s.family->parameters.count() == 0) return std::nullopt;
    const auto probes = default_probes(*s.cover, s.family->parameters, &*s.provider);
    const Sample m = probes.front().m;
    const auto rep = smoothness_report(
        [&](std::span<const double> x) { return evaluate(s.provider->at(x), Point(m, x)); }, probes, s.family->parameters);
    clock.lap("provider.smoothness");
    return smoothness_json(rep, false);
  }

  std::optional<OrderedJson> agreement() {
    auto pa = results.find("paper-direct"), zz = results.find("zigzag");
    if (pa == results.end() || zz == results.end()) return std::nullopt;
    const GoodCover& cover = *s.cover;
    const auto m_grid = region_grid(cover, s.m_per_axis);
    Check c{"agreement.d_paper_minus_d_zigzag", 0.0, s.tolerances.agreement};
    for (const auto& x : s.family->parameters.grid()) {
      const Cochain a = ext_d(pa->second.at(x)), b = ext_d(zz->second.at(x));
      for (const auto& m : m_grid) {
        const int alpha = cover.first_containing(m);
        const double v = max_abs(a.get({alpha}) - b.get({alpha}), Point(m, x));
        if (!(v <= c.value)) c.value = v, c.where = fmt::format("m=({}) x=({})", fmt::join(m, ", "), fmt::join(x, ", "));
      }
    }
    if (!c.pass()) failed.push_back(c.name);
    clock.lap("agreement");
    return check_json(c);
  }

  OrderedJson foliation() {
    const ProductBundle& b = *s.bundle;
    const Form& w = *s.bundle_form;
    OrderedJson j;
    const ValidationReport v = validate_cover(b.base);
    j["base_validation"] = v.ok();
    if (!v.ok()) {
      failed.push_back("foliation.base_validation");
      return j;
    }
    if (!is_leafwise(w, b)) throw ConfigError("bundle.form has base differentials");
    const auto primitives = fiber_primitives(w, b, s.tolerances.closed);
    const auto grid = bundle_grid(b, s.bundle_per_axis);
    const FoliationReport rep = assemble_global(primitives, w, b, grid, s.tolerances.leafwise);
    clock.lap("foliation");
    std::vector<Check> checks{
        {"foliation.leafwise_defect", rep.leafwise_defect, s.tolerances.leafwise, true, rep.defect_where},
        {"foliation.primitive_defect", rep.primitive_defect, s.tolerances.leafwise},
        {"foliation.consistency", rep.consistency, s.tolerances.leafwise},
        {"foliation.full_residual", rep.full_residual, 0.0, false},
    };
    j["points"] = rep.points;
    j["leafwise_defect"] = rep.leafwise_defect;
    j["full_residual"] = rep.full_residual;
    record("foliation:", checks, j);
    return j;
  }
};

OrderedJson validation_json(const ValidationReport& v) {
  OrderedJson j;
  j["ok"] = v.ok();
  j["points_checked"] = v.points_checked;
  OrderedJson issues = OrderedJson::array();
  for (const auto& i : v.issues) {
    OrderedJson ij;
    ij["kind"] = i.kind;
    ij["location"] = i.location;
    ij["detail"] = i.detail;
    issues.push_back(std::move(ij));
  }
  j["issues"] = std::move(issues);
  return j;
}

OrderedJson error_json(const char* type, const std::exception& e) {
  OrderedJson j;
  j["type"] = type;
  j["message"] = e.what();
  return j;
}

/// Parameter samples used for the cheap family-level checks.
std::vector<Sample> check_params(const FamilySpec& f) {
  ParameterBox coarse = f.parameters;
  coarse.points = std::min(coarse.points, 5);
  return coarse.grid();
}

}  // namespace

Outcome run_scenario(const Json& scenario, bool timings) {
  OrderedJson report;
  report["scenario"] = scenario.is_object() ? scenario.value("name", "scenario") : "scenario";
  report["digest"] = digest(scenario);
  Outcome out;
  std::optional<Scenario> s;
  try {
    s = load_scenario(scenario);
  } catch (const Error& e) {
    report["status"] = "error";
    report["exit_code"] = 1;
    report["error"] = error_json("configuration", e);
    return {report, 1};
  } catch (const Json::exception& e) {
    report["status"] = "error";
    report["exit_code"] = 1;
    report["error"] = error_json("configuration", e);
    return {report, 1};
  }
  report["seed"] = s->seed;
  report["modes"] = s->modes;

  Runner run{*s};
  OrderedJson body;
  std::optional<OrderedJson> error;
  try {
    if (s->cover) {
      const ValidationReport v = validate_cover(*s->cover);
      body["validation"] = validation_json(v);
      run.clock.lap("validate");
      if (!v.ok()) run.failed.push_back("validation");

      const FamilySpec& f = *s->family;
      const auto xs = check_params(f);
      OrderedJson fam;
      fam["degree"] = f.degree();
      fam["parameters"] = f.parameters.count();
      fam["dimension"] = f.omega.dim();
      Check closed{"family.closedness", closedness_defect(f, *s->cover, xs), s->tolerances.closed};
      if (!closed.pass()) run.failed.push_back(closed.name);
      fam["closedness"] = check_json(closed);
      body["family"] = std::move(fam);

      if (v.ok() && closed.pass() && f.degree() >= 1) {
        const Cochain tau = local_primitives(f.omega, *s->cover);
        Check local{"local_primitives.residual", 0.0, s->tolerances.local};
        const SampleMax m = cochain_max(ext_d(tau).map_forms(f.degree(), [&](const Form& w) {
          return w - f.omega.with_domain(w.domain());
        }), xs);
        local.value = m.value;
        local.where = m.where;
        if (!local.pass()) run.failed.push_back(local.name);
        body["local_primitives"] = check_json(local);
        run.clock.lap("local_primitives");

        if (local.pass()) {
          for (const auto& mode : s->modes) {
            if (mode != "foliation") run.run_mode(mode);
          }
        }
      }
    }
    body["runs"] = run.runs;
    if (s->cover && body.contains("local_primitives")) {
      if (auto p = run.provider_smoothness()) body["provider_smoothness"] = *p;
    }
    if (auto a = run.agreement()) body["agreement"] = *a;
    if (s->bundle) body["foliation"] = run.foliation();
  } catch (const NotExactError& e) {
    run.not_exact = true;
    error = error_json("not_exact", e);
  } catch (const ConfigError& e) {
    run.failed.push_back("configuration");
    error = error_json("configuration", e);
  } catch (const PreconditionError& e) {
    run.failed.push_back("precondition");
    error = error_json("precondition", e);
  } catch (const Error& e) {
    run.failed.push_back("numeric");
    error = error_json("numeric", e);
  }
  if (!body.contains("runs")) body["runs"] = run.runs;

  out.exit_code = run.not_exact ? 2 : (run.failed.empty() ? 0 : 1);
  report["status"] = out.exit_code == 0 ? "ok" : (out.exit_code == 2 ? "not_exact" : "failed");
  report["exit_code"] = out.exit_code;
  for (auto& [k, v] : body.items()) report[k] = v;
  if (s->cover) {
    OrderedJson res;
    res["max"] = run.residual_max;
    res["mean"] = run.residual_runs ? run.residual_mean_sum / run.residual_runs : 0.0;
    res["tolerance"] = s->tolerances.residual;
    report["residual"] = std::move(res);
  }
  if (run.monodromy) report["monodromy"] = *run.monodromy;
  report["failed_checks"] = run.failed;
  if (error) report["error"] = *error;
  if (timings) report["timings"] = run.clock.json();
  out.report = std::move(report);
  return out;
}

Outcome validate_scenario(const Json& scenario) {
  OrderedJson report;
  report["scenario"] = scenario.is_object() ? scenario.value("name", "scenario") : "scenario";
  report["digest"] = digest(scenario);
  try {
    const Scenario s = load_scenario(scenario);
    bool ok = true;
    if (s.cover) {
      const ValidationReport v = validate_cover(*s.cover);
      report["validation"] = validation_json(v);
      ok = ok && v.ok();
      Check closed{"family.closedness", closedness_defect(*s.family, *s.cover, check_params(*s.family)),
                   s.tolerances.closed};
      report["closedness"] = check_json(closed);
      ok = ok && closed.pass();
    }
    if (s.bundle) {
      const ValidationReport v = validate_cover(s.bundle->base);
      report["bundle_validation"] = validation_json(v);
      ok = ok && v.ok() && is_leafwise(*s.bundle_form, *s.bundle);
    }
    report["status"] = ok ? "ok" : "failed";
    report["exit_code"] = ok ? 0 : 1;
    return {report, ok ? 0 : 1};
  } catch (const std::exception& e) {
    report["status"] = "error";
    report["exit_code"] = 1;
    report["error"] = error_json("configuration", e);
    return {report, 1};
  }
}

// ---------------------------------------------------------------------------
// Self-check

namespace {

std::vector<Point> random_points(Random& rng, int dim, int count, double lo = -1.0, double hi = 1.0) {
  std::vector<Point> out;
  for (int i = 0; i < count; ++i) {
    Sample y(dim);
    for (auto& v : y) v = rng.uniform(lo, hi);
    out.emplace_back(y);
  }
  return out;
}

double max_over(const Form& w, const std::vector<Point>& pts) {
  double m = 0.0;
  for (const auto& p : pts) m = std::max(m, max_abs(w, p));
  return m;
}

double cochain_residual(const Cochain& c) { return cochain_max(c, {}).value; }

GoodCover four_boxes() {
  std::vector<Box> sets;
  for (double cx : {-0.5, 0.5}) {
    for (double cy : {-0.5, 0.5}) sets.push_back({{cx - 1.0, cx + 1.0}, {cy - 1.0, cy + 1.0}});
  }
  return box_cover({{-1.4, 1.4}, {-1.4, 1.4}}, sets, 0.95, 3, 3);
}

GoodCover three_intervals() {
  return box_cover({{-2.0, 2.0}}, {{{-3.0, 0.6}}, {{-0.8, 0.8}}, {{-0.6, 3.0}}}, 0.95, 2, 2);
}

GoodCover one_box() { return box_cover({{-1.0, 1.0}, {-1.0, 1.0}}, {{{-1.5, 1.5}, {-1.5, 1.5}}}, 0.95, 0, 4); }

}  // namespace

Outcome self_check(const std::string& fault) {
  if (!fault.empty() && fault != "corrupted-bump") throw ConfigError("unknown fault \"" + fault + "\"");
  Random rng(2024);
  std::vector<Check> suites;

  Check d2{"d_squared", 0.0, 1e-10};
  Check hd{"homotopy_identity", 0.0, 1e-10};
  for (int trial = 0; trial < 40; ++trial) {
    const int dim = rng.integer(1, 3);
    const auto pts = random_points(rng, dim, 10);
    const Form w0 = random_form(rng, dim, rng.integer(0, dim), 0, 3);
    d2.value = std::max(d2.value, max_over(ext_d(ext_d(w0)), pts));
    const Form w = random_form(rng, dim, rng.integer(1, dim), 0, 3);
    const Form lhs = ext_d(homotopy(w)) + homotopy(ext_d(w)) - w;
    hd.value = std::max(hd.value, max_over(lhs, pts));
  }
  suites.push_back(d2);
  suites.push_back(hd);

  Check single{"single_set_homotopy", 0.0, 1e-8};
  {
    const GoodCover c = one_box();
    for (int trial = 0; trial < 4; ++trial) {
      const Form w = ext_d(random_form(rng, 2, 1, 0, 2));
      const Form r = ext_d(homotopy(w, c.sets[0].chart)) - w;
      for (const auto& y : c.points({0})) single.value = std::max(single.value, max_abs(r, Point(y)));
    }
  }
  suites.push_back(single);

  const GoodCover boxes = four_boxes();
  Check delta2{"delta_squared", 0.0, 1e-10};
  Check commute{"d_delta_commute", 0.0, 1e-10};
  for (int p = 0; p <= 1; ++p) {
    for (int q = 0; q <= 1; ++q) {
      const Cochain c = random_cochain(rng, boxes, p, q, 0, 2);
      delta2.value = std::max(delta2.value, cochain_residual(coboundary(coboundary(c))));
      commute.value = std::max(commute.value, cochain_residual(ext_d(coboundary(c)) - coboundary(ext_d(c))));
    }
  }
  suites.push_back(delta2);
  suites.push_back(commute);

  Check mv{"mv_homotopy", 0.0, 1e-9};
  for (const GoodCover* cover : {&boxes}) {
    const auto rho = partition_of_unity(*cover);
    for (int p = 1; p <= std::min(3, cover->max_simplex_degree()); ++p) {
      const Cochain c = random_cochain(rng, *cover, p, 0, 0, 2);
      Cochain lhs = coboundary(mv_homotopy_K(c, rho)) - c;
      if (p < cover->max_simplex_degree()) lhs += mv_homotopy_K(coboundary(c), rho);
      mv.value = std::max(mv.value, cochain_residual(lhs));
    }
  }
  {
    const GoodCover chain = three_intervals();
    const auto rho = partition_of_unity(chain);
    const Cochain c = random_cochain(rng, chain, 1, 0, 0, 2);
    mv.value = std::max(mv.value, cochain_residual(coboundary(mv_homotopy_K(c, rho)) +
                                                       mv_homotopy_K(coboundary(c), rho) - c));
  }
  suites.push_back(mv);

  std::vector<std::pair<std::string, GoodCover>> fixtures;
  fixtures.emplace_back("three_intervals", three_intervals());
  fixtures.emplace_back("four_boxes", boxes);
  fixtures.emplace_back("annulus", annulus_cover(0));
  if (fault == "corrupted-bump") {
    // Support reaches past the right end of U1 = (-3, 0.6).
    fixtures.front().second.sets[0].bump = Expr::bump((Expr::y(1) + 1.2) / 2.4);
  }
  OrderedJson validation;
  for (const auto& [name, cover] : fixtures) {
    const ValidationReport v = validate_cover(cover);
    validation[name] = validation_json(v);
    Check partition{"partition." + name, 0.0, 1e-12};
    if (v.ok()) {
      const auto rho = partition_of_unity(cover);
      for (const auto& y : cover.region_samples) {
        const double sum = [&] {
          double t = 0.0;
          for (const auto& r : rho) t += eval(r, Point(y));
          return t;
        }();
        partition.value = std::max(partition.value, std::abs(sum - 1.0));
      }
    } else {
      partition.value = 1.0;
      partition.where = "cover validation failed";
    }
    suites.push_back(partition);
  }

  OrderedJson report;
  report["command"] = "self-check";
  if (!fault.empty()) report["fault"] = fault;
  OrderedJson list = OrderedJson::array();
  bool ok = true;
  for (const auto& c : suites) {
    list.push_back(check_json(c));
    ok = ok && c.pass();
  }
  report["suites"] = std::move(list);
  report["fixtures"] = std::move(validation);
  report["status"] = ok ? "ok" : "failed";
  report["exit_code"] = ok ? 0 : 1;
  return {report, ok ? 0 : 1};
}

}  // namespace pfam
