#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "filmlab/reports.hpp"

namespace {

int run_command(const std::string& command, const std::string& config_path,
                const std::string& out_dir, std::uint64_t seed, int threads, bool verbose) {
  using filmlab::Json;
  Json doc = Json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "error: cannot open config " << config_path << "\n";
      return 2;
    }
    try {
      in >> doc;
    } catch (const std::exception& e) {
      std::cerr << "error: invalid JSON: " << e.what() << "\n";
      return 2;
    }
  }
  doc["command"] = command;
  if (!out_dir.empty()) doc["out"] = out_dir;
  if (seed != 0) doc["seed"] = seed;
  if (threads != 1) doc["threads"] = threads;
  if (verbose) doc["verbose"] = true;

  try {
    const filmlab::RunConfig config = filmlab::parse_config(doc);
    const filmlab::RunReport report = filmlab::run(config);
    if (verbose || report.exit_code != 0) {
      for (const auto& [name, pass] : report.invariants)
        std::cout << (pass ? "[PASS] " : "[FAIL] ") << name << "\n";
    }
    for (const auto& path : report.written_files)
      if (verbose) std::cout << "wrote " << path << "\n";
    std::cout << report.summary.dump(2) << "\n";
    return report.exit_code;
  } catch (const filmlab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const filmlab::ConvergenceError& e) {
    std::cerr << "convergence error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spectral homogenization lab for thin-film differential constraints"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  int threads = 1;
  bool verbose = false;
  app.add_option("--config", config_path, "JSON config file")->envname("FILMLAB_CONFIG");
  app.add_option("--out", out_dir, "output directory")->envname("FILMLAB_OUT");
  app.add_option("--seed", seed, "deterministic seed")->envname("FILMLAB_SEED");
  app.add_option("--threads", threads, "worker threads")->envname("FILMLAB_THREADS");
  app.add_flag("--verbose", verbose, "verbose output")->envname("FILMLAB_VERBOSE");

  bool sweep_flag = false;
  for (const std::string name : {"operator-check", "homogenize", "counterexample", "localize",
                                 "recovery", "sweep"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->fallthrough();
    if (name == "homogenize")
      sub->add_flag("--sweep", sweep_flag, "emit a CSV sweep over the configured xi list");
  }

  CLI11_PARSE(app, argc, argv);
  std::string command = app.get_subcommands().front()->get_name();
  if (command == "homogenize" && sweep_flag) command = "sweep";
  return run_command(command, config_path, out_dir, seed, threads, verbose);
}
