#include "oedkit/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace oedkit {

using nlohmann::json;

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::TwinData: return "twin-data";
    case ExperimentKind::Assimilate: return "assimilate";
    case ExperimentKind::OedSolve: return "oed-solve";
    case ExperimentKind::BruteForce: return "brute-force";
  }
  return "?";
}

std::string to_string(CriterionKind kind) {
  switch (kind) {
    case CriterionKind::AFim: return "A-fim";
    case CriterionKind::DFim: return "D-fim";
    case CriterionKind::APosteriorGoal: return "A-posterior-goal";
    case CriterionKind::DPosteriorGoal: return "D-posterior-goal";
  }
  return "?";
}

std::string to_string(PenaltyKind kind) {
  switch (kind) {
    case PenaltyKind::L0: return "l0";
    case PenaltyKind::L1: return "l1";
    case PenaltyKind::SmoothedL0: return "smoothed-l0";
    case PenaltyKind::BudgetEquality: return "budget-equality";
  }
  return "?";
}

std::string to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::Relaxed: return "relaxed";
    case SolverKind::Stochastic: return "stochastic";
    case SolverKind::BruteForce: return "brute-force";
  }
  return "?";
}

std::vector<std::pair<double, double>> default_sensor_layout() {
  std::vector<std::pair<double, double>> out;
  for (double y : {0.1, 0.5})
    for (double x : {0.1, 0.3, 0.5, 0.7, 0.9}) out.emplace_back(x, y);
  return out;
}

Matrix read_matrix_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open matrix file " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    if (!ls.eof()) throw Error(ErrorCode::InvalidArgument, "non-numeric entry in " + path.string());
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorCode::InvalidArgument, "empty matrix file " + path.string());
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size())
      throw Error(ErrorCode::DimensionMismatch, "ragged rows in " + path.string());
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

namespace {

std::string join(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

std::string at(const std::string& base, std::size_t i) { return base + "[" + std::to_string(i) + "]"; }

class Reader {
 public:
  explicit Reader(std::vector<Diagnostic>& out) : out_(out) {}

  void fail(const std::string& path, const std::string& message) { out_.push_back({path, message}); }

  /// Flags keys outside the allowed set.
  void allowed(const json& obj, const std::string& base, std::initializer_list<const char*> keys) {
    if (!obj.is_object()) return;
    std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& [k, v] : obj.items())
      if (!ok.count(k)) fail(join(base, k), "unknown field");
  }

  const json* object(const json& parent, const std::string& base, const char* key, bool required) {
    if (!parent.is_object() || !parent.contains(key)) {
      if (required) fail(join(base, key), "missing required block '" + std::string(key) + "'");
      return nullptr;
    }
    const json& v = parent.at(key);
    if (!v.is_object()) {
      fail(join(base, key), "must be an object");
      return nullptr;
    }
    return &v;
  }

  std::optional<double> number(const json& obj, const std::string& base, const char* key, bool required) {
    const std::string path = join(base, key);
    if (!obj.contains(key)) {
      if (required) fail(path, "missing required field");
      return std::nullopt;
    }
    const json& v = obj.at(key);
    if (!v.is_number()) {
      fail(path, "must be a number");
      return std::nullopt;
    }
    const double d = v.get<double>();
    if (!std::isfinite(d)) {
      fail(path, "must be finite");
      return std::nullopt;
    }
    return d;
  }

  double positive(const json& obj, const std::string& base, const char* key, double def,
                  bool required = false) {
    auto v = number(obj, base, key, required);
    if (!v) return def;
    if (*v <= 0.0) {
      fail(join(base, key), "must be positive (got " + fmt(*v) + ")");
      return def;
    }
    return *v;
  }

  double nonnegative(const json& obj, const std::string& base, const char* key, double def,
                     bool required = false) {
    auto v = number(obj, base, key, required);
    if (!v) return def;
    if (*v < 0.0) {
      fail(join(base, key), "must be non-negative (got " + fmt(*v) + ")");
      return def;
    }
    return *v;
  }

  std::optional<std::int64_t> integer(const json& obj, const std::string& base, const char* key,
                                      std::int64_t lo, std::int64_t hi, bool required) {
    const std::string path = join(base, key);
    if (!obj.contains(key)) {
      if (required) fail(path, "missing required field");
      return std::nullopt;
    }
    const json& v = obj.at(key);
    if (!v.is_number_integer()) {
      fail(path, "must be an integer");
      return std::nullopt;
    }
    if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(hi)) {
      fail(path, "must be at most " + std::to_string(hi));
      return std::nullopt;
    }
    const auto i = v.get<std::int64_t>();
    if (i < lo || i > hi) {
      fail(path, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
      return std::nullopt;
    }
    return i;
  }

  std::optional<std::uint64_t> seed(const json& obj, const std::string& base, const char* key) {
    const std::string path = join(base, key);
    if (!obj.contains(key)) return std::nullopt;
    const json& v = obj.at(key);
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      fail(path, "must be a non-negative integer");
      return std::nullopt;
    }
    return v.get<std::uint64_t>();
  }

  std::optional<bool> boolean(const json& obj, const std::string& base, const char* key) {
    if (!obj.contains(key)) return std::nullopt;
    if (!obj.at(key).is_boolean()) {
      fail(join(base, key), "must be true or false");
      return std::nullopt;
    }
    return obj.at(key).get<bool>();
  }

  std::optional<std::string> string(const json& obj, const std::string& base, const char* key,
                                    bool required) {
    if (!obj.contains(key)) {
      if (required) fail(join(base, key), "missing required field");
      return std::nullopt;
    }
    if (!obj.at(key).is_string()) {
      fail(join(base, key), "must be a string");
      return std::nullopt;
    }
    return obj.at(key).get<std::string>();
  }

  std::optional<std::vector<double>> numbers(const json& obj, const std::string& base, const char* key,
                                             bool required) {
    const std::string path = join(base, key);
    if (!obj.contains(key)) {
      if (required) fail(path, "missing required field");
      return std::nullopt;
    }
    const json& v = obj.at(key);
    if (!v.is_array()) {
      fail(path, "must be an array of numbers");
      return std::nullopt;
    }
    std::vector<double> out;
    bool ok = true;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number() || !std::isfinite(v[i].get<double>())) {
        fail(at(path, i), "must be a finite number");
        ok = false;
      } else {
        out.push_back(v[i].get<double>());
      }
    }
    if (!ok) return std::nullopt;
    return out;
  }

  std::optional<std::filesystem::path> file(const json& obj, const std::string& base, const char* key,
                                            const std::filesystem::path& base_dir) {
    auto s = string(obj, base, key, false);
    if (!s) return std::nullopt;
    std::filesystem::path p(*s);
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    std::error_code ec;
    if (!std::filesystem::is_regular_file(p, ec)) {
      fail(join(base, key), "referenced file does not exist: " + p.string());
      return std::nullopt;
    }
    return p;
  }

  static std::string fmt(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
  }

 private:
  std::vector<Diagnostic>& out_;
};

template <typename E>
std::optional<E> choice(Reader& r, const json& obj, const std::string& base, const char* key,
                        std::initializer_list<std::pair<const char*, E>> options, bool required,
                        std::optional<E> def = std::nullopt) {
  auto s = r.string(obj, base, key, required);
  if (!s) return def;
  std::string allowed;
  for (const auto& [name, value] : options) {
    if (*s == name) return value;
    allowed += allowed.empty() ? name : std::string(", ") + name;
  }
  r.fail(join(base, key), "unknown value '" + *s + "' (expected one of: " + allowed + ")");
  return std::nullopt;
}

ModelSpec parse_model(Reader& r, const json& m, bool& ok) {
  const auto kind = r.string(m, "model", "kind", true);
  if (kind == "toy-linear") {
    r.allowed(m, "model", {"kind", "nx", "dt", "seed"});
    ToyLinearSpec spec;
    if (auto nx = r.integer(m, "model", "nx", 1, 4000, true)) spec.nx = *nx;
    spec.dt = r.positive(m, "model", "dt", spec.dt, true);
    spec.seed = r.seed(m, "model", "seed");
    return spec;
  }
  if (kind == "advection-diffusion") {
    r.allowed(m, "model", {"kind", "nx", "ny", "kappa", "dt", "velocity", "velocity_scale"});
    AdvectionDiffusionSpec spec;
    if (auto nx = r.integer(m, "model", "nx", 4, 64, false)) spec.nx = *nx;
    if (auto ny = r.integer(m, "model", "ny", 4, 64, false)) spec.ny = *ny;
    spec.kappa = r.positive(m, "model", "kappa", spec.kappa);
    spec.dt = r.positive(m, "model", "dt", spec.dt);
    if (auto v = choice<VelocitySpec>(r, m, "model", "velocity",
                                      {{"zero", VelocitySpec::Zero},
                                       {"recirculating", VelocitySpec::Recirculating}},
                                      false))
      spec.velocity = *v;
    spec.velocity_scale = r.nonnegative(m, "model", "velocity_scale", spec.velocity_scale);
    for (const auto& rect : default_obstacles()) {
      bool covered = false;
      for (Eigen::Index j = 0; j < spec.ny && !covered; ++j)
        for (Eigen::Index i = 0; i < spec.nx && !covered; ++i)
          covered = rect.contains((i + 0.5) / spec.nx, (j + 0.5) / spec.ny);
      if (!covered) {
        r.fail("model.nx", "grid too coarse: an obstacle covers no cell center");
        break;
      }
    }
    return spec;
  }
  if (kind) r.fail("model.kind", "unknown value '" + *kind + "' (expected toy-linear or advection-diffusion)");
  ok = false;
  return ToyLinearSpec{};
}

}  // namespace

ConfigParse parse_config(const json& doc, const std::filesystem::path& base_dir) {
  ConfigParse result;
  Reader r(result.diagnostics);
  if (!doc.is_object()) {
    r.fail("", "config must be a JSON object");
    return result;
  }
  r.allowed(doc, "", {"schema_version", "description", "experiment", "seed", "output_dir", "workers",
                      "model", "prior", "observation", "noise", "window", "twin", "assimilation", "oed"});

  ExperimentConfig cfg;
  cfg.source = doc;
  if (auto v = r.integer(doc, "", "schema_version", 0, 1000, false); v && *v != kConfigSchemaVersion)
    r.fail("schema_version", "unsupported schema version " + std::to_string(*v) + " (this build reads " +
                                 std::to_string(kConfigSchemaVersion) + ")");
  r.string(doc, "", "description", false);
  const auto kind = choice<ExperimentKind>(r, doc, "", "experiment",
                                           {{"twin-data", ExperimentKind::TwinData},
                                            {"assimilate", ExperimentKind::Assimilate},
                                            {"oed-solve", ExperimentKind::OedSolve},
                                            {"brute-force", ExperimentKind::BruteForce}},
                                           true);
  if (kind) cfg.kind = *kind;
  if (auto s = r.seed(doc, "", "seed")) cfg.seed = *s;
  if (auto o = r.string(doc, "", "output_dir", false)) cfg.output_dir = *o;
  if (auto w = r.integer(doc, "", "workers", 1, 256, false)) cfg.workers = static_cast<unsigned>(*w);

  // Model and the sizes everything else is checked against.
  std::optional<Eigen::Index> n_state;
  bool is_ad = false;
  if (const json* m = r.object(doc, "", "model", true)) {
    bool ok = true;
    cfg.model = parse_model(r, *m, ok);
    if (ok) {
      if (const auto* toy = std::get_if<ToyLinearSpec>(&cfg.model)) {
        n_state = toy->nx;
      } else {
        const auto& ad = std::get<AdvectionDiffusionSpec>(cfg.model);
        n_state = ad.nx * ad.ny;
        is_ad = true;
      }
    }
  }
  const double model_dt = std::visit([](const auto& s) { return s.dt; }, cfg.model);

  const bool needs_prior = !kind || *kind != ExperimentKind::TwinData;
  if (const json* p = r.object(doc, "", "prior", needs_prior)) {
    r.allowed(*p, "prior", {"kind", "variance", "delta", "scale", "mean"});
    PriorSpec spec;
    if (auto k = choice<PriorSpec::Kind>(r, *p, "prior", "kind",
                                         {{"diagonal", PriorSpec::Kind::Diagonal},
                                          {"bilaplacian", PriorSpec::Kind::Bilaplacian}},
                                         false))
      spec.kind = *k;
    spec.variance = r.positive(*p, "prior", "variance", spec.variance);
    spec.delta = r.positive(*p, "prior", "delta", spec.delta);
    spec.scale = r.positive(*p, "prior", "scale", spec.scale);
    if (p->contains("mean")) {
      const json& mean = p->at("mean");
      if (mean.is_string()) {
        if (auto mk = choice<PriorSpec::Mean>(r, *p, "prior", "mean",
                                              {{"perturbed", PriorSpec::Mean::Perturbed},
                                               {"zero", PriorSpec::Mean::Zero}},
                                              false))
          spec.mean = *mk;
      } else if (auto values = r.numbers(*p, "prior", "mean", false)) {
        spec.mean = PriorSpec::Mean::Explicit;
        spec.mean_values = *values;
        if (n_state && static_cast<Eigen::Index>(values->size()) != *n_state)
          r.fail("prior.mean", "explicit mean needs " + std::to_string(*n_state) + " entries, got " +
                                   std::to_string(values->size()));
      }
    }
    cfg.prior = spec;
  }

  std::optional<Eigen::Index> n_obs;
  if (const json* o = r.object(doc, "", "observation", true)) {
    r.allowed(*o, "observation", {"kind", "coordinates", "indices"});
    ObservationSpec spec;
    if (auto k = choice<ObservationSpec::Kind>(r, *o, "observation", "kind",
                                               {{"identity", ObservationSpec::Kind::Identity},
                                                {"points", ObservationSpec::Kind::Points},
                                                {"indices", ObservationSpec::Kind::Indices}},
                                               true)) {
      spec.kind = *k;
      if (spec.kind == ObservationSpec::Kind::Identity) {
        n_obs = n_state;
      } else if (spec.kind == ObservationSpec::Kind::Points) {
        if (!is_ad && n_state) r.fail("observation.kind", "points observations need the advection-diffusion model");
        if (o->contains("coordinates")) {
          const json& c = o->at("coordinates");
          if (!c.is_array() || c.empty()) {
            r.fail("observation.coordinates", "must be a non-empty array of [x, y] pairs");
          } else {
            for (std::size_t i = 0; i < c.size(); ++i) {
              const std::string path = at("observation.coordinates", i);
              if (!c[i].is_array() || c[i].size() != 2 || !c[i][0].is_number() || !c[i][1].is_number()) {
                r.fail(path, "must be an [x, y] pair of numbers");
                continue;
              }
              const double x = c[i][0].get<double>(), y = c[i][1].get<double>();
              if (!(x > 0.0 && x < 1.0 && y > 0.0 && y < 1.0)) {
                r.fail(path, "point must lie inside the open unit square");
                continue;
              }
              for (const auto& rect : default_obstacles())
                if (rect.contains(x, y)) r.fail(path, "point lies inside an obstacle");
              spec.coordinates.emplace_back(x, y);
            }
          }
        } else {
          spec.coordinates = default_sensor_layout();
        }
        n_obs = static_cast<Eigen::Index>(spec.coordinates.size());
      } else {
        if (auto idx = r.numbers(*o, "observation", "indices", true)) {
          std::set<Eigen::Index> seen;
          for (std::size_t i = 0; i < idx->size(); ++i) {
            const double v = (*idx)[i];
            if (v != std::floor(v) || v < 0 || (n_state && v >= static_cast<double>(*n_state))) {
              r.fail(at("observation.indices", i), "must be a state index in [0, n_state)");
              continue;
            }
            if (!seen.insert(static_cast<Eigen::Index>(v)).second)
              r.fail(at("observation.indices", i), "duplicate index");
            spec.indices.push_back(static_cast<Eigen::Index>(v));
          }
          if (idx->empty()) r.fail("observation.indices", "must not be empty");
          n_obs = static_cast<Eigen::Index>(idx->size());
        }
      }
    }
    cfg.observation = spec;
  }

  if (const json* n = r.object(doc, "", "noise", true)) {
    r.allowed(*n, "noise", {"variance", "file"});
    const bool has_var = n->contains("variance"), has_file = n->contains("file");
    if (has_var == has_file) r.fail("noise", "give exactly one of 'variance' or 'file'");
    if (has_var) {
      auto v = r.number(*n, "noise", "variance", true);
      if (v && *v < 0.0) r.fail("noise.variance", "must be non-negative");
      else if (v && *v == 0.0 && kind && *kind != ExperimentKind::TwinData)
        r.fail("noise.variance", "must be positive (zero is allowed for twin-data only)");
      else if (v) cfg.noise.variance = *v;
    }
    if (has_file) {
      cfg.noise.file = r.file(*n, "noise", "file", base_dir);
      if (cfg.noise.file) {
        try {
          const Matrix m = read_matrix_file(*cfg.noise.file);
          if (m.rows() != m.cols()) r.fail("noise.file", "noise covariance must be square");
          else if (n_obs && m.rows() != *n_obs)
            r.fail("noise.file", "noise covariance must be " + std::to_string(*n_obs) + " x " +
                                     std::to_string(*n_obs));
        } catch (const std::exception& e) {
          r.fail("noise.file", e.what());
        }
      }
    }
  }

  if (const json* w = r.object(doc, "", "window", true)) {
    r.allowed(*w, "window", {"t0", "dt", "n_steps", "obs_times"});
    WindowSpec spec;
    if (auto t0 = r.number(*w, "window", "t0", false)) spec.t0 = *t0;
    spec.dt = r.positive(*w, "window", "dt", model_dt);
    if (w->contains("dt") && std::abs(spec.dt - model_dt) > 1e-12 * std::max(1.0, model_dt))
      r.fail("window.dt", "must equal the model time step " + Reader::fmt(model_dt));
    if (auto ns = r.integer(*w, "window", "n_steps", 1, 100000, true)) spec.n_steps = static_cast<std::size_t>(*ns);
    if (auto times = r.numbers(*w, "window", "obs_times", true)) {
      if (times->empty()) r.fail("window.obs_times", "must not be empty");
      const TimeGrid grid(spec.t0, spec.dt, spec.n_steps);
      std::set<std::size_t> seen;
      for (std::size_t i = 0; i < times->size(); ++i) {
        const double t = (*times)[i];
        const auto k = grid.lattice_index(t);
        if (!k) {
          r.fail(at("window.obs_times", i), "observation time " + Reader::fmt(t) +
                                                " is not on the window lattice t0 + k*dt, k = 0.." +
                                                std::to_string(spec.n_steps));
        } else if (!seen.insert(*k).second) {
          r.fail(at("window.obs_times", i), "duplicate observation time " + Reader::fmt(t));
        }
      }
      spec.obs_times = *times;
    }
    cfg.window = spec;
  }

  if (const json* t = r.object(doc, "", "twin", false)) {
    r.allowed(*t, "twin", {"add_noise", "observations_file"});
    if (auto b = r.boolean(*t, "twin", "add_noise")) cfg.twin.add_noise = *b;
    if (t->contains("observations_file"))
      cfg.twin.observations_file = r.file(*t, "twin", "observations_file", base_dir);
  }

  if (const json* a = r.object(doc, "", "assimilation", false)) {
    r.allowed(*a, "assimilation", {"max_iter", "grad_tol", "posterior_covariance", "closed_form_check"});
    if (auto v = r.integer(*a, "assimilation", "max_iter", 1, 100000, false)) cfg.assimilation.max_iter = static_cast<int>(*v);
    cfg.assimilation.grad_tol = r.positive(*a, "assimilation", "grad_tol", cfg.assimilation.grad_tol);
    if (auto b = r.boolean(*a, "assimilation", "posterior_covariance")) cfg.assimilation.posterior_covariance = *b;
    if (auto b = r.boolean(*a, "assimilation", "closed_form_check")) cfg.assimilation.closed_form_check = *b;
  }

  const bool needs_oed = kind && (*kind == ExperimentKind::OedSolve || *kind == ExperimentKind::BruteForce);
  if (const json* o = r.object(doc, "", "oed", needs_oed)) {
    r.allowed(*o, "oed", {"criterion", "penalty", "solver", "brute_force_compare"});
    OedSpec spec;
    if (const json* c = r.object(*o, "oed", "criterion", true)) {
      r.allowed(*c, "oed.criterion", {"kind", "goal_operator"});
      if (auto k = choice<CriterionKind>(r, *c, "oed.criterion", "kind",
                                         {{"A-fim", CriterionKind::AFim},
                                          {"D-fim", CriterionKind::DFim},
                                          {"A-posterior-goal", CriterionKind::APosteriorGoal},
                                          {"D-posterior-goal", CriterionKind::DPosteriorGoal}},
                                         true))
        spec.criterion.kind = *k;
      if (c->contains("goal_operator")) {
        const json& g = c->at("goal_operator");
        std::optional<Matrix> p;
        if (g.is_object()) {
          r.allowed(g, "oed.criterion.goal_operator", {"file"});
          if (auto f = r.file(g, "oed.criterion.goal_operator", "file", base_dir)) {
            try {
              p = read_matrix_file(*f);
            } catch (const std::exception& e) {
              r.fail("oed.criterion.goal_operator.file", e.what());
            }
          }
        } else if (g.is_array() && !g.empty() && g[0].is_array()) {
          Matrix m(static_cast<Eigen::Index>(g.size()), static_cast<Eigen::Index>(g[0].size()));
          bool ok = true;
          for (std::size_t i = 0; i < g.size() && ok; ++i) {
            if (!g[i].is_array() || g[i].size() != g[0].size()) {
              r.fail(at("oed.criterion.goal_operator", i), "rows must be arrays of equal length");
              ok = false;
              break;
            }
            for (std::size_t j = 0; j < g[i].size(); ++j) {
              if (!g[i][j].is_number()) {
                r.fail(at(at("oed.criterion.goal_operator", i), j), "must be a number");
                ok = false;
                break;
              }
              m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = g[i][j].get<double>();
            }
          }
          if (ok) p = m;
        } else {
          r.fail("oed.criterion.goal_operator", "must be a matrix (array of rows) or {\"file\": path}");
        }
        if (p) {
          if (spec.criterion.kind == CriterionKind::AFim || spec.criterion.kind == CriterionKind::DFim)
            r.fail("oed.criterion.goal_operator", "a goal operator applies only to posterior-goal criteria");
          if (n_state && p->cols() != *n_state)
            r.fail("oed.criterion.goal_operator", "goal operator needs " + std::to_string(*n_state) +
                                                      " columns, got " + std::to_string(p->cols()));
          spec.criterion.goal_operator = std::move(p);
        }
      }
    }
    if (const json* p = r.object(*o, "oed", "penalty", false)) {
      r.allowed(*p, "oed.penalty", {"kind", "alpha", "budget", "epsilon"});
      if (auto k = choice<PenaltyKind>(r, *p, "oed.penalty", "kind",
                                       {{"l0", PenaltyKind::L0},
                                        {"l1", PenaltyKind::L1},
                                        {"smoothed-l0", PenaltyKind::SmoothedL0},
                                        {"budget-equality", PenaltyKind::BudgetEquality}},
                                       true))
        spec.penalty.kind = *k;
      spec.penalty.alpha = r.nonnegative(*p, "oed.penalty", "alpha", 0.0);
      spec.penalty.smoothing = r.positive(*p, "oed.penalty", "epsilon", spec.penalty.smoothing);
      if (auto b = r.integer(*p, "oed.penalty", "budget", 0, n_obs.value_or(1 << 20), false)) {
        spec.penalty.budget = static_cast<int>(*b);
        if (spec.penalty.kind != PenaltyKind::L0 && spec.penalty.kind != PenaltyKind::BudgetEquality)
          r.fail("oed.penalty.budget", "a budget applies only to l0 and budget-equality penalties");
      }
      if (spec.penalty.kind == PenaltyKind::BudgetEquality && !p->contains("budget"))
        r.fail("oed.penalty.budget", "budget-equality penalty needs a budget");
    }
    if (const json* s = r.object(*o, "oed", "solver", true)) {
      if (auto k = choice<SolverKind>(r, *s, "oed.solver", "kind",
                                      {{"relaxed", SolverKind::Relaxed},
                                       {"stochastic", SolverKind::Stochastic},
                                       {"brute-force", SolverKind::BruteForce}},
                                      true))
        spec.solver.kind = *k;
      const std::string b = "oed.solver";
      if (spec.solver.kind == SolverKind::Relaxed) {
        r.allowed(*s, b, {"kind", "eta0", "tau", "max_iter", "tol", "init", "rounding", "round_k"});
        auto& ro = spec.solver.relaxed;
        ro.step.eta0 = r.nonnegative(*s, b, "eta0", ro.step.eta0);
        ro.step.tau = r.positive(*s, b, "tau", ro.step.tau);
        if (auto v = r.integer(*s, b, "max_iter", 0, 1000000, false)) ro.max_iter = static_cast<int>(*v);
        ro.tol = r.positive(*s, b, "tol", ro.tol);
        if (auto v = r.number(*s, b, "init", false)) {
          if (*v < 0.0 || *v > 1.0) r.fail(b + ".init", "must lie in [0, 1]");
          else if (n_obs) ro.init = Vector::Constant(*n_obs, *v);
        }
        if (auto rule = choice<RoundingRule>(r, *s, b, "rounding",
                                             {{"threshold-half", RoundingRule::ThresholdHalf},
                                              {"top-k", RoundingRule::TopK}},
                                             false))
          ro.rounding = *rule;
        if (auto k = r.integer(*s, b, "round_k", 0, n_obs.value_or(1 << 20), false)) ro.round_k = static_cast<int>(*k);
        if (ro.rounding == RoundingRule::TopK && !ro.round_k && !spec.penalty.budget)
          r.fail(b + ".round_k", "top-k rounding needs round_k or a penalty budget");
        if (spec.penalty.kind == PenaltyKind::L0)
          r.fail("oed.penalty.kind",
                 "the relaxation approach requires the OED objective function to be differentiable; "
                 "the l0 penalty is not (use smoothed-l0, or the stochastic solver)");
      } else if (spec.solver.kind == SolverKind::Stochastic) {
        r.allowed(*s, b, {"kind", "eta0", "tau", "max_iter", "tol", "theta0", "ensemble_size",
                          "final_samples", "baseline_batches", "bound", "center_utility"});
        auto& so = spec.solver.stochastic;
        so.step.eta0 = r.nonnegative(*s, b, "eta0", so.step.eta0);
        so.step.tau = r.positive(*s, b, "tau", so.step.tau);
        if (auto v = r.integer(*s, b, "max_iter", 0, 1000000, false)) so.max_iter = static_cast<int>(*v);
        so.tol = r.nonnegative(*s, b, "tol", so.tol);
        if (auto v = r.integer(*s, b, "ensemble_size", 1, 1000000, false)) so.ensemble_size = static_cast<int>(*v);
        if (auto v = r.integer(*s, b, "final_samples", 1, 1000000, false)) so.final_samples = static_cast<int>(*v);
        if (auto v = r.integer(*s, b, "baseline_batches", 1, 100000, false)) so.baseline_batches = static_cast<int>(*v);
        if (auto v = r.number(*s, b, "bound", false)) {
          if (!(*v > 0.0 && *v < 0.5)) r.fail(b + ".bound", "must lie in (0, 0.5)");
          else so.bound = *v;
        }
        if (auto v = r.number(*s, b, "theta0", false)) {
          if (!(*v > 0.0 && *v < 1.0)) r.fail(b + ".theta0", "must lie strictly inside (0, 1)");
          else if (n_obs) so.theta0 = Vector::Constant(*n_obs, *v);
        }
        if (auto v = r.boolean(*s, b, "center_utility")) so.center_utility = *v;
        if (n_obs && *n_obs > 63) r.fail("observation", "the stochastic solver supports at most 63 sensors");
      } else {
        r.allowed(*s, b, {"kind"});
      }
    }
    if (auto bf = r.boolean(*o, "oed", "brute_force_compare")) spec.brute_force_compare = *bf;
    const bool enumerate = spec.brute_force_compare || spec.solver.kind == SolverKind::BruteForce ||
                           (kind && *kind == ExperimentKind::BruteForce);
    if (enumerate && n_obs && *n_obs > 22)
      r.fail("observation", "brute-force enumeration is limited to 22 sensors (got " + std::to_string(*n_obs) + ")");
    cfg.oed = spec;
  }

  if (result.diagnostics.empty()) result.config = std::move(cfg);
  return result;
}

ConfigParse load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot read config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    ConfigParse out;
    out.diagnostics.push_back({"", std::string("malformed JSON: ") + e.what()});
    return out;
  }
  return parse_config(doc, path.parent_path());
}

}  // namespace oedkit
