// Acceptance run: one PASS/FAIL line per criterion. Scenario files come from
// PFAM_SCENARIO_DIR; every numeric limit below is the one the criterion states.

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <string>

#include <fmt/format.h>

#include "pfam/fixtures.hpp"
#include "pfam/random_forms.hpp"
#include "pfam/scenario.hpp"

using namespace pfam;

namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += (ok ? "" : "FAILED ") + what;
  }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Json read_scenario(const std::string& name) {
  std::ifstream f(std::string(PFAM_SCENARIO_DIR) + "/" + name + ".json");
  if (!f) throw std::runtime_error("missing scenario " + name);
  return Json::parse(f);
}

struct Run {
  Outcome outcome;
  std::string text;
  double seconds = 0.0;
};

std::map<std::string, Run>& runs() {
  static std::map<std::string, Run> cache;
  return cache;
}

const Run& run(const std::string& name) {
  auto it = runs().find(name);
  if (it != runs().end()) return it->second;
  const auto t0 = Clock::now();
  Run r;
  r.outcome = run_scenario(read_scenario(name));
  r.seconds = seconds_since(t0);
  r.text = r.outcome.report.dump(2);
  return runs().emplace(name, std::move(r)).first->second;
}

const OrderedJson* find_run(const OrderedJson& report, const std::string& mode) {
  for (const auto& r : report.at("runs")) {
    if (r.at("mode") == mode) return &r;
  }
  return nullptr;
}

double check_value(const OrderedJson& run, const std::string& name) {
  for (const auto& c : run.at("checks")) {
    if (c.at("name") == name) return c.at("value").get<double>();
  }
  return std::nan("");
}

std::vector<Point> random_points(Random& rng, int dim, int count) {
  std::vector<Point> out;
  for (int i = 0; i < count; ++i) {
    Sample y(dim);
    for (auto& v : y) v = rng.uniform(-1.0, 1.0);
    out.emplace_back(y);
  }
  return out;
}

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

// ---------------------------------------------------------------------------

Verdict homotopy_identity() {
  const auto t0 = Clock::now();
  Random rng(1);
  double worst = 0.0;
  int forms = 0;
  for (; forms < 200; ++forms) {
    const int dim = rng.integer(1, 3);
    const Form w = random_form(rng, dim, rng.integer(1, dim), 0, 3);
    const Form lhs = ext_d(homotopy(w)) + homotopy(ext_d(w)) - w;
    if (lhs.is_zero()) continue;
    for (const auto& p : random_points(rng, dim, 100)) worst = std::max(worst, max_abs(lhs, p));
  }
  const double t = seconds_since(t0);
  Verdict v;
  v.require(worst < 1e-10, fmt::format("max |dH + Hd - id| = {:.3g} over {} forms (< 1e-10)", worst, forms));
  v.require(t < 30.0, fmt::format("{:.2f} s (< 30 s)", t));
  return v;
}

Verdict double_complex() {
  const auto t0 = Clock::now();
  const GoodCover cover = four_boxes();
  Random rng(2);
  double d2 = 0.0, delta2 = 0.0, commute = 0.0;
  for (int trial = 0; trial < 4; ++trial) {
    for (int p = 0; p <= 2; ++p) {
      for (int q = 0; q <= 2; ++q) {
        const Cochain c = random_cochain(rng, cover, p, q, 0, 3);
        d2 = std::max(d2, cochain_max(ext_d(ext_d(c)), {}).value);
        delta2 = std::max(delta2, cochain_max(coboundary(coboundary(c)), {}).value);
        commute = std::max(commute, cochain_max(ext_d(coboundary(c)) - coboundary(ext_d(c)), {}).value);
      }
    }
  }
  const double t = seconds_since(t0);
  Verdict v;
  v.require(delta2 < 1e-10, fmt::format("delta^2 {:.3g}", delta2));
  v.require(d2 < 1e-10, fmt::format("d^2 {:.3g}", d2));
  v.require(commute < 1e-10, fmt::format("d delta - delta d {:.3g}", commute));
  v.require(t < 30.0, fmt::format("{:.2f} s (< 30 s)", t));
  return v;
}

Verdict mayer_vietoris() {
  Random rng(3);
  double worst = 0.0;
  int cases = 0;
  const std::vector<GoodCover> covers{three_intervals(), four_boxes()};
  for (const auto& cover : covers) {
    const auto rho = partition_of_unity(cover);
    const int top = cover.max_simplex_degree();
    for (int p = 1; p <= std::min(3, top); ++p) {
      for (int q = 0; q <= cover.dim; ++q) {
        const Cochain c = random_cochain(rng, cover, p, q, 0, 2);
        Cochain lhs = coboundary(mv_homotopy_K(c, rho)) - c;
        if (p < top) lhs += mv_homotopy_K(coboundary(c), rho);
        worst = std::max(worst, cochain_max(lhs, {}).value);
        ++cases;
      }
    }
  }
  Verdict v;
  v.require(worst < 1e-9, fmt::format("max |delta K + K delta - id| = {:.3g} over {} cochains, Cech degrees 1..3 (< 1e-9)",
                                      worst, cases));
  return v;
}

Verdict degree_one() {
  Verdict v;
  double total = 0.0;
  for (const char* name : {"interval-deg1-chain", "annulus-deg1-chain"}) {
    const Run& r = run(name);
    total += r.seconds;
    const OrderedJson& rep = r.outcome.report;
    v.require(r.outcome.exit_code == 0, fmt::format("{} exit {}", name, r.outcome.exit_code));
    const OrderedJson* chain = find_run(rep, "deg1-chain");
    if (!chain) {
      v.require(false, fmt::format("{} has no deg1-chain run", name));
      continue;
    }
    const double residual = check_value(*chain, "residual.d_tau_minus_omega");
    const double spread = check_value(*chain, "oracle.spread");
    const double steps = check_value(*chain, "output.step_free");
    const auto points = chain->at("info").value("residual.points", 0.0);
    v.require(residual < 1e-8, fmt::format("{} residual {:.3g} at {:.0f} (m,x) points", name, residual, points));
    v.require(spread < 1e-8, fmt::format("oracle spread {:.3g}", spread));
    v.require(steps == 0.0, "step free");
  }
  v.require(total < 120.0, fmt::format("{:.1f} s (< 120 s)", total));
  return v;
}

Verdict monodromy() {
  const Run& r = run("annulus-angular");
  Verdict v;
  v.require(r.outcome.exit_code == 2, fmt::format("exit {}", r.outcome.exit_code));
  const double defect = r.outcome.report.at("monodromy").at("defect").get<double>();
  v.require(std::abs(defect - 6.283185307) < 1e-6, fmt::format("cycle defect {:.10f} (2 pi within 1e-6)", defect));
  return v;
}

Verdict paper_pipeline() {
  const Run& r = run("annulus-2form-paper");
  Verdict v;
  v.require(r.outcome.exit_code == 0, fmt::format("exit {}", r.outcome.exit_code));
  const OrderedJson* paper = find_run(r.outcome.report, "paper-direct");
  if (!paper) {
    v.require(false, "no paper-direct run");
    return v;
  }
  for (const char* name : {"paper.da_equals_tau_minus_eta", "paper.delta_g", "paper.delta_G_equals_g",
                           "residual.d_tau_minus_omega"}) {
    const double value = check_value(*paper, name);
    v.require(value < 1e-7, fmt::format("{} {:.3g}", name, value));
  }
  v.require(r.seconds < 300.0, fmt::format("{:.1f} s (< 300 s)", r.seconds));
  return v;
}

Verdict smoothness_contrast() {
  Verdict v;
  const auto flagged = [](const OrderedJson& j) { return j.at("flagged").get<bool>(); };
  {
    const OrderedJson& rep = run("annulus-deg1-paper-jitter").outcome.report;
    v.require(rep.contains("provider_smoothness") && flagged(rep.at("provider_smoothness")),
              "degree-1 jittered provider flagged");
    const OrderedJson* chain = find_run(rep, "deg1-chain");
    v.require(chain && !flagged(chain->at("smoothness")), "deg1-chain not flagged");
  }
  {
    const OrderedJson& rep = run("annulus-2form-jitter").outcome.report;
    v.require(rep.contains("provider_smoothness") && flagged(rep.at("provider_smoothness")),
              "2-form jittered provider flagged");
    const OrderedJson* zz = find_run(rep, "zigzag");
    v.require(zz && !flagged(zz->at("smoothness")), "zigzag not flagged");
    if (zz) {
      v.require(zz->at("smoothness").at("max_second_difference").get<double>() < 1e3,
                fmt::format("zigzag max second difference {:.3g}",
                            zz->at("smoothness").at("max_second_difference").get<double>()));
    }
    const OrderedJson* paper = find_run(rep, "paper-direct");
    const bool recorded = paper && paper->contains("smoothness") && !paper->at("smoothness").at("asserted").get<bool>();
    v.require(recorded, recorded ? fmt::format("paper-direct recorded, flagged={}", flagged(paper->at("smoothness")))
                                 : std::string("paper-direct smoothness recorded"));
  }
  return v;
}

Verdict agreement() {
  Verdict v;
  for (const char* name : {"annulus-2form-zigzag", "annulus-2form-jitter"}) {
    const OrderedJson& rep = run(name).outcome.report;
    if (!rep.contains("agreement")) {
      v.require(false, fmt::format("{} has no agreement check", name));
      continue;
    }
    const double value = rep.at("agreement").at("value").get<double>();
    v.require(value < 1e-7, fmt::format("{} |d zigzag - d paper| = {:.3g}", name, value));
  }
  return v;
}

Verdict foliation() {
  const Run& r = run("foliation");
  Verdict v;
  v.require(r.outcome.exit_code == 0, fmt::format("exit {}", r.outcome.exit_code));
  const OrderedJson& f = r.outcome.report.at("foliation");
  const double defect = f.at("leafwise_defect").get<double>();
  const auto points = f.at("points").get<int>();
  v.require(defect < 1e-8, fmt::format("leafwise defect {:.3g}", defect));
  v.require(points >= 1000, fmt::format("{} grid points", points));
  v.require(r.seconds < 120.0, fmt::format("{:.1f} s (< 120 s)", r.seconds));
  return v;
}

Verdict determinism() {
  Verdict v;
  const std::vector<std::string> names{"interval-deg1-chain", "annulus-deg1-chain",  "annulus-angular",
                                       "annulus-deg1-paper-jitter", "annulus-2form-paper", "annulus-2form-zigzag",
                                       "annulus-2form-jitter", "foliation", "paper-missing-provider"};
  int same = 0;
  for (const auto& name : names) {
    const std::string first = run(name).text;
    const std::string second = run_scenario(read_scenario(name)).report.dump(2);
    if (first == second) {
      ++same;
    } else {
      v.require(false, name + " differs");
    }
  }
  v.require(same == static_cast<int>(names.size()), fmt::format("{}/{} scenarios byte-identical", same, names.size()));
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"homotopy identity", homotopy_identity},
      {"double complex identities", double_complex},
      {"Mayer-Vietoris homotopy", mayer_vietoris},
      {"degree-1 reconstruction", degree_one},
      {"monodromy detection", monodromy},
      {"higher-degree paper pipeline", paper_pipeline},
      {"smoothness contrast", smoothness_contrast},
      {"zigzag/paper agreement", agreement},
      {"foliation leafwise defect", foliation},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.require(false, std::string("exception: ") + e.what());
    }
    if (!v.pass) ++failures;
    std::cout << fmt::format("criterion {:>2}: {} {}: {}", i + 1, v.pass ? "PASS" : "FAIL", criteria[i].first, v.detail)
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
