#pragma once

#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "oedkit/config.hpp"

namespace oedkit {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kResultSchemaVersion = 1;

enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 2,
  kExitNonConvergence = 3,
  kExitIo = 4,
};

/// Raised when an output cannot be written or an input cannot be read.
class IoFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything a run needs except data: the assembled inverse problem, the
/// synthetic truth and the sensor descriptions.
struct ExperimentSetup {
  std::shared_ptr<const SimulationModel> model;
  std::shared_ptr<const PointObservationOperator> obs_op;
  InverseProblem ip;
  Vector truth;
  std::vector<double> obs_times;
  std::vector<std::size_t> obs_indices;  // lattice indices of obs_times, ascending
  /// One row per sensor: (x, y) for point sensors, (state index, 0) otherwise.
  std::vector<std::pair<double, double>> sensor_locations;
  bool point_sensors = false;
};

/// Random streams are split from cfg.seed by name ("model", "truth",
/// "prior", "noise", "solver"), so each component's randomness is
/// independent of the others.
ExperimentSetup build_experiment(const ExperimentConfig& cfg);

struct RunReport {
  int exit_code = kExitOk;
  std::string summary;
  nlohmann::json bundle;
};

/// Writes the experiment outputs under cfg.output_dir. result.json holds the
/// deterministic bundle; wall-clock timings go to timings.json.
RunReport run_experiment(const ExperimentConfig& cfg);

RunReport run_twin_data(const ExperimentConfig& cfg);
RunReport run_assimilate(const ExperimentConfig& cfg);
/// Handles both oed-solve and brute-force experiments.
RunReport run_oed(const ExperimentConfig& cfg);

/// Reads a time,y0,y1,... CSV as written by twin-data.
std::vector<ObservationVector> read_observations_csv(const std::filesystem::path& path);

/// Shortest text that reads back as the same double.
std::string format_double(double v);

}  // namespace oedkit
