#include <CLI11.hpp>

#include <iostream>

#include "oedkit/experiments.hpp"

namespace {

int report_diagnostics(const std::vector<oedkit::Diagnostic>& diags) {
  for (const auto& d : diags) std::cerr << "config: " << (d.path.empty() ? "<root>" : d.path) << ": " << d.message << '\n';
  return oedkit::kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sensor placement and data assimilation experiments for linear-Gaussian inverse problems"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output;
  std::optional<unsigned> workers;
  bool quiet = false;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"twin-data", "generate truth, trajectory and synthetic observations"},
      {"assimilate", "solve the 4DVar inverse problem and compare with the closed form"},
      {"oed-solve", "solve the sensor placement problem with the configured solver"},
      {"brute-force", "enumerate every binary design"},
      {"validate", "check a config file and list every problem found"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "experiment config (JSON)")->required();
    sub->add_flag("--quiet", quiet, "suppress the summary line");
    if (name == "validate") continue;
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_option("--output", output, "output directory (overrides the config)");
    sub->add_option("--workers", workers, "worker threads for design evaluation")->check(CLI::Range(1U, 256U));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : oedkit::kExitValidation;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  oedkit::ConfigParse parsed;
  try {
    parsed = oedkit::load_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return oedkit::kExitIo;
  }

  if (command == "validate") {
    if (!parsed.diagnostics.empty()) return report_diagnostics(parsed.diagnostics);
    if (!quiet) std::cout << "config is valid\n";
    return oedkit::kExitOk;
  }
  if (!parsed.diagnostics.empty()) return report_diagnostics(parsed.diagnostics);

  oedkit::ExperimentConfig cfg = std::move(*parsed.config);
  const oedkit::ExperimentKind wanted = command == "twin-data"    ? oedkit::ExperimentKind::TwinData
                                        : command == "assimilate" ? oedkit::ExperimentKind::Assimilate
                                        : command == "oed-solve"  ? oedkit::ExperimentKind::OedSolve
                                                                  : oedkit::ExperimentKind::BruteForce;
  if (wanted != cfg.kind) {
    // The subcommand decides what runs; the config's experiment field is
    // only a default. Blocks the subcommand needs are checked again.
    nlohmann::json doc = cfg.source;
    doc["experiment"] = command;
    auto again = oedkit::parse_config(doc, std::filesystem::path(config_path).parent_path());
    if (!again.diagnostics.empty()) return report_diagnostics(again.diagnostics);
    cfg = std::move(*again.config);
  }
  if (seed) cfg.seed = *seed;
  if (output) cfg.output_dir = *output;
  if (workers) cfg.workers = *workers;

  try {
    const oedkit::RunReport report = oedkit::run_experiment(cfg);
    if (!quiet) std::cout << report.summary << '\n';
    if (report.exit_code == oedkit::kExitNonConvergence)
      std::cerr << "warning: solver did not converge; best results so far were written to " << cfg.output_dir.string()
                << '\n';
    return report.exit_code;
  } catch (const oedkit::IoFailure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return oedkit::kExitIo;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return oedkit::kExitIo;
  } catch (const oedkit::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == oedkit::ErrorCode::NonConvergence ? oedkit::kExitNonConvergence : oedkit::kExitValidation;
  }
}
