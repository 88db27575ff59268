#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "oedkit/models.hpp"
#include "oedkit/oed.hpp"

namespace oedkit {

inline constexpr int kConfigSchemaVersion = 1;

enum class ExperimentKind { TwinData, Assimilate, OedSolve, BruteForce };

struct ToyLinearSpec {
  Eigen::Index nx = 5;
  double dt = 0.1;
  std::optional<std::uint64_t> seed;  // drawn from the master seed when absent
};

struct AdvectionDiffusionSpec {
  Eigen::Index nx = 20;
  Eigen::Index ny = 20;
  double kappa = 0.01;
  double dt = 0.01;
  VelocitySpec velocity = VelocitySpec::Recirculating;
  double velocity_scale = 1.0;
};

using ModelSpec = std::variant<ToyLinearSpec, AdvectionDiffusionSpec>;

struct PriorSpec {
  enum class Kind { Diagonal, Bilaplacian };
  enum class Mean { Perturbed, Zero, Explicit };
  Kind kind = Kind::Diagonal;
  double variance = 1.0;  // diagonal
  double delta = 0.5;     // bilaplacian
  double scale = 1.0;     // bilaplacian
  Mean mean = Mean::Perturbed;
  std::vector<double> mean_values;
};

struct ObservationSpec {
  enum class Kind { Identity, Points, Indices };
  Kind kind = Kind::Identity;
  std::vector<std::pair<double, double>> coordinates;
  std::vector<Eigen::Index> indices;
};

struct NoiseSpec {
  std::optional<double> variance;
  std::optional<std::filesystem::path> file;
};

struct WindowSpec {
  double t0 = 0.0;
  double dt = 0.1;
  std::size_t n_steps = 10;
  std::vector<double> obs_times;
};

struct TwinSpec {
  bool add_noise = true;
  std::optional<std::filesystem::path> observations_file;
};

struct AssimilationSpec {
  int max_iter = 200;
  double grad_tol = 1e-8;
  bool posterior_covariance = true;
  bool closed_form_check = true;
};

struct SolverSpec {
  SolverKind kind = SolverKind::Stochastic;
  RelaxedOptions relaxed;
  StochasticOptions stochastic;
};

struct OedSpec {
  Criterion criterion;
  Penalty penalty;
  SolverSpec solver;
  bool brute_force_compare = false;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Assimilate;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "output";
  unsigned workers = 1;
  ModelSpec model;
  std::optional<PriorSpec> prior;
  ObservationSpec observation;
  NoiseSpec noise;
  WindowSpec window;
  TwinSpec twin;
  AssimilationSpec assimilation;
  std::optional<OedSpec> oed;
  /// The document as read, for echoing into result bundles.
  nlohmann::json source;
};

struct Diagnostic {
  std::string path;  // JSON-pointer-like field path, e.g. "window.obs_times[2]"
  std::string message;
};

struct ConfigParse {
  std::optional<ExperimentConfig> config;  // set iff diagnostics is empty
  std::vector<Diagnostic> diagnostics;
};

/// Schema and cross-field checks, collecting every violation. Relative file
/// references resolve against base_dir.
ConfigParse parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});

/// Reads and parses a config file. Throws std::ios_base::failure when the
/// file cannot be read; JSON syntax errors come back as a diagnostic.
ConfigParse load_config(const std::filesystem::path& path);

std::string to_string(ExperimentKind kind);
std::string to_string(CriterionKind kind);
std::string to_string(PenaltyKind kind);
std::string to_string(SolverKind kind);

/// Whitespace-separated dense matrix, one row per line.
Matrix read_matrix_file(const std::filesystem::path& path);

/// The candidate layout used when a points observation gives no
/// coordinates: x in {0.1, 0.3, 0.5, 0.7, 0.9} by y in {0.1, 0.5}.
std::vector<std::pair<double, double>> default_sensor_layout();

}  // namespace oedkit
