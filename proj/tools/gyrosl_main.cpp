// gyrosl: run, validate, precompute-feet.
//
// Exit codes: 0 ok, 2 configuration, 3 runtime, 4 I/O.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gyrosl/config.hpp"
#include "gyrosl/io.hpp"
#include "gyrosl/scenarios.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fs = std::filesystem;
using namespace gyrosl;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitIo = 4;

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out;
  int threads = 0;
};

void add_common(CLI::App* cmd, Common& c, bool with_out) {
  cmd->add_option("config", c.config_path, "Run configuration file")->required();
  cmd->add_option("--override", c.overrides, "key=value applied after the file (repeatable)");
  if (with_out) cmd->add_option("--out", c.out, "Output root directory");
  cmd->add_option("--threads", c.threads, "Worker threads (default: all cores)")->check(CLI::NonNegativeNumber);
}

RunConfig load(const Common& c) {
  std::string text;
  try {
    text = read_text_file(c.config_path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, c.overrides, c.config_path);
}

fs::path output_root(const Common& c, const RunConfig& cfg) {
  if (!c.out.empty()) return c.out;
  if (cfg.output.dir_set) return cfg.output.dir;
  if (const char* env = std::getenv("GYROSL_OUT"); env && *env) return env;
  return cfg.output.dir;
}

void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-Lagrangian drift-kinetic Vlasov solver"};
  app.require_subcommand(1);

  Common run_opts, validate_opts, feet_opts;
  bool resume = false, progress = false;
  auto* run_cmd = app.add_subcommand("run", "Run a configured scenario");
  add_common(run_cmd, run_opts, true);
  run_cmd->add_flag("--resume", resume, "Continue from the run directory's checkpoint");
  run_cmd->add_flag("--progress", progress, "Print each diagnostics row to stderr");

  auto* validate_cmd = app.add_subcommand("validate", "Check a configuration and print it fully resolved");
  add_common(validate_cmd, validate_opts, false);

  auto* feet_cmd = app.add_subcommand("precompute-feet", "Build and cache the linear foot table");
  add_common(feet_cmd, feet_opts, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (validate_cmd->parsed()) {
      const RunConfig cfg = load(validate_opts);
      std::cout << to_text(cfg);
      return 0;
    }
    if (feet_cmd->parsed()) {
      set_threads(feet_opts.threads);
      const RunConfig cfg = load(feet_opts);
      const fs::path dir = !cfg.output.foot_cache.empty() && feet_opts.out.empty()
                               ? fs::path(cfg.output.foot_cache)
                               : output_root(feet_opts, cfg) / "feet";
      std::cout << precompute_feet(cfg, dir).string() << "\n";
      return 0;
    }
    set_threads(run_opts.threads);
    const RunConfig cfg = load(run_opts);
    RunOptions opt;
    opt.resume = resume;
    if (progress)
      opt.progress = [](const DiagnosticsRecord& r) {
        std::fprintf(stderr, "t=%-10g mass=%.12e u1=%.6e uinf=%.6e Etotdev=%.6e\n", r.t, r.mass, r.u1, r.uinf,
                     r.E_tot_dev);
      };
    const auto summary = run(cfg, output_root(run_opts, cfg), opt);
    std::cout << summary.run_dir.string() << "\n";
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
