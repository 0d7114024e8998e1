#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pfam/cech.hpp"
#include "pfam/foliation.hpp"
#include "pfam/glue.hpp"

namespace pfam {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

/// Form literal: {"degree": p, "terms": {"1,2": "coefficient", ...}} with
/// one-based indices, or a bare string for a 0-form.
Form parse_form(const Json& j, int dim, int params);

/// Cover block: {"preset": "annulus"}, {"preset": "boxes", ...} or an
/// explicit list of sets and nerve simplices over the manifold block.
GoodCover parse_cover(const Json& cover, const Json& manifold, std::uint64_t seed);

struct Scenario {
  std::string name;
  std::uint64_t seed = 0;
  std::vector<std::string> modes;
  Tolerances tolerances;
  std::optional<GoodCover> cover;
  std::optional<FamilySpec> family;
  std::optional<ReferencePrimitiveProvider> provider;
  std::optional<Form> oracle;
  int m_per_axis = 20;
  std::optional<ProductBundle> bundle;
  std::optional<Form> bundle_form;
  int bundle_per_axis = 10;
  std::string output;
};

/// Throws ConfigError (or ParseError) on malformed input.
Scenario load_scenario(const Json& j);

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::map<std::string, double> tolerances;
};

/// Scenario with command-line overrides merged in; the digest is taken of
/// this effective scenario.
Json apply_overrides(Json scenario, const Overrides& o);

/// FNV-1a 64-bit hash of the canonical dump, as 16 hex digits.
std::string digest(const Json& scenario);

struct Outcome {
  OrderedJson report;
  int exit_code = 0;  // 0 all asserted checks pass, 1 failure or bad input, 2 not exact
};

Outcome run_scenario(const Json& scenario, bool timings = false);
Outcome validate_scenario(const Json& scenario);

/// Invariant suites on built-in fixtures. `fault` may be "corrupted-bump".
Outcome self_check(const std::string& fault = {});

}  // namespace pfam
