#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace geomavg::scenario {

using json = nlohmann::ordered_json;

/// Exit codes of the pipeline runner.
enum ExitCode : int {
  kOk = 0,
  kFail = 1,        // a checked bound failed
  kConfig = 2,      // malformed scenario / options
  kNumeric = 3,     // Degenerate / LeftTube abort; the violated guard is named
};

/// Parse a scenario file (schema 1). Throws GeomError(ConfigError) with the
/// parse location on malformed JSON.
json load_scenario(const std::string& path);

/// Apply one "--override key=value" (dot-path into the document; value parsed
/// as JSON when possible, else kept as string).
void apply_override(json& scn, const std::string& keyval);

/// Run the pipeline described by the scenario document: measure epsilon,
/// gentle checks, center-of-mass average, primitive, deformation flow, then
/// any requested estimate suites. Writes report.json and CSV point clouds
/// into out_dir. Returns an ExitCode.
int run_scenario(const json& scn, const std::string& out_dir);

/// Constants table + containment verdict for one epsilon.
json constants_report(double eps);

/// CSV sweep of (eps, 842 eps, R(eps, L_eps)) over [lo, hi].
std::string constants_sweep_csv(double lo, double hi, int n);

/// Render a table/verdict for stdout.
std::string format_constants(const json& rep);

}  // namespace geomavg::scenario
