#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "pfam/scenario.hpp"

namespace {

int emit(const pfam::Outcome& outcome, const std::string& out_path) {
  const std::string text = outcome.report.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(out_path, std::ios::binary);
    if (!f) {
      std::cerr << "cannot write " << out_path << "\n";
      return 1;
    }
    f << text;
    std::cerr << "status " << outcome.report.value("status", "?") << ", report written to " << out_path << "\n";
  }
  return outcome.exit_code;
}

pfam::Outcome config_failure(const std::string& path, const std::string& message) {
  pfam::OrderedJson report;
  report["scenario"] = path;
  report["status"] = "error";
  report["exit_code"] = 1;
  report["error"] = {{"type", "configuration"}, {"message", message}};
  return {report, 1};
}

/// Reads a scenario file; parse failures are reported as configuration errors.
bool load(const std::string& path, pfam::Json& out, pfam::Outcome& failure) {
  std::ifstream f(path);
  if (!f) {
    failure = config_failure(path, "cannot open " + path);
    return false;
  }
  try {
    out = pfam::Json::parse(f);
  } catch (const pfam::Json::exception& e) {
    failure = config_failure(path, e.what());
    return false;
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Smooth primitives for families of exact forms"};
  app.require_subcommand(1);

  std::string scenario_path, out_path, fault;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> tol_overrides;
  bool timings = false;

  auto* run = app.add_subcommand("run", "Reconstruct and verify primitives for a scenario");
  run->add_option("scenario", scenario_path, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--tol", tol_overrides, "Tolerance override KEY=VAL (repeatable)");
  run->add_option("--out", out_path, "Write the report here instead of stdout");
  run->add_flag("--timings", timings, "Include wall-clock time per stage");

  auto* validate = app.add_subcommand("validate", "Parse a scenario and validate its cover");
  validate->add_option("scenario", scenario_path, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  validate->add_option("--out", out_path, "Write the report here instead of stdout");

  auto* self = app.add_subcommand("self-check", "Run the invariant suites on built-in fixtures");
  self->add_option("--fault", fault, "Inject a fault into the fixtures")->check(CLI::IsMember({"corrupted-bump"}));
  self->add_option("--out", out_path, "Write the report here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (*self) return emit(pfam::self_check(fault), out_path);

  pfam::Json scenario;
  pfam::Outcome failure;
  if (!load(scenario_path, scenario, failure)) return emit(failure, out_path);

  if (*validate) return emit(pfam::validate_scenario(scenario), out_path);

  pfam::Overrides overrides;
  overrides.seed = seed;
  for (const auto& kv : tol_overrides) {
    const auto eq = kv.find('=');
    try {
      if (eq == std::string::npos) throw std::invalid_argument("missing '='");
      overrides.tolerances[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
    } catch (const std::exception&) {
      return emit(config_failure(scenario_path, "bad --tol value \"" + kv + "\", expected KEY=VAL"), out_path);
    }
  }
  return emit(pfam::run_scenario(pfam::apply_overrides(std::move(scenario), overrides), timings), out_path);
}
