// Declarative scenario runner: one JSON document names an instance and a
// pipeline (simulate / verify-ito / scan-L / solve-os / check-monotone /
// compare / dynkin), the runner executes it, writes CSV and JSON artifacts,
// and answers with an exit code reflecting the scenario's assertions.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

namespace itokit {

struct RunOptions {
  std::filesystem::path out_dir;               // where artifacts are written
  std::optional<std::uint64_t> seed;           // overrides the config seed
  int threads = 1;
};

// Exit codes: 0 all assertions pass; 1 an assertion failed; 2 the config is
// invalid (including malformed instances detected mid-run); 3 a numeric
// failure (blow-up, non-convergence).
struct ScenarioResult {
  int exit_code = 0;
  bool pass = false;
  std::string message;
  nlohmann::json report;
};

nlohmann::json load_scenario(const std::filesystem::path& path);

// Validates `raw`, applies the seed override, and fills every default so the
// result is a complete, self-contained description. Resolving is idempotent:
// resolve(resolve(x)) == resolve(x), which is what makes the persisted echo
// rerunnable bit-for-bit.
nlohmann::json resolve_scenario(const nlohmann::json& raw,
                                std::optional<std::uint64_t> seed_override);

// Runs a resolved config. Writes resolved-config.json and report.json into
// out_dir (report.json also on failure), plus per-pipeline CSVs.
ScenarioResult run_scenario(const nlohmann::json& resolved, const RunOptions& opts);

// load + resolve + run; config errors still produce a report.json when the
// output directory is usable.
ScenarioResult run_scenario_file(const std::filesystem::path& path,
                                 const RunOptions& opts);

}  // namespace itokit
