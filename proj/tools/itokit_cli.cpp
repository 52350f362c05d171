// Command-line front end: run scenario files and list the built-in instances.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "itokit/builtins.hpp"
#include "itokit/common.hpp"
#include "itokit/scenario.hpp"

namespace fs = std::filesystem;

namespace {

int cmd_run(const std::string& config, const std::string& out_flag,
            std::optional<std::uint64_t> seed, int threads) {
  itokit::RunOptions opts;
  if (!out_flag.empty()) {
    opts.out_dir = out_flag;
  } else if (const char* env = std::getenv("ITOKIT_OUT"); env && *env) {
    opts.out_dir = fs::path(env) / fs::path(config).stem();
  } else {
    opts.out_dir = fs::path("out") / fs::path(config).stem();
  }
  opts.seed = seed;
  opts.threads = threads;

  const itokit::ScenarioResult res = itokit::run_scenario_file(config, opts);
  if (!res.message.empty()) std::fprintf(stderr, "%s\n", res.message.c_str());
  std::printf("%s: %s (artifacts in %s)\n",
              res.pass ? "pass" : "fail",
              res.report.contains("name")
                  ? res.report["name"].get<std::string>().c_str()
                  : config.c_str(),
              opts.out_dir.string().c_str());
  return res.exit_code;
}

int cmd_list() {
  const auto all = itokit::list_builtins();
  std::string kind;
  for (const auto& e : all) {
    if (e.kind != kind) {
      kind = e.kind;
      std::printf("%s:\n", kind.c_str());
    }
    std::printf("  %-22s %s\n", e.name.c_str(), e.summary.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pathwise calculus and optimal-stopping toolkit"};
  app.require_subcommand(1);

  std::string config;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  int threads = 1;

  CLI::App* run = app.add_subcommand("run", "Execute a scenario file");
  run->add_option("config", config, "Scenario JSON file")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--out", out_dir,
                  "Output directory (default: $ITOKIT_OUT/<name> or out/<name>)");
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--threads", threads, "Worker threads")
      ->check(CLI::Range(1, 256));

  CLI::App* list = app.add_subcommand("list-builtins", "List named instances");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config, out_dir, seed, threads);
    if (list->parsed()) return cmd_list();
  } catch (const itokit::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const itokit::NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
