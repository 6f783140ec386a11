#include "crackmc/campaign.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "crackmc/parallel.hpp"

namespace crackmc {

using json = nlohmann::ordered_json;

std::string format_full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::uint64_t config_hash(const std::string& text) {
  // FNV-1a, 64 bit
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

namespace {

void check_keys(const json& obj, const char* where,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object())
    throw ConfigError(std::string("config: '") + where +
                      "' must be an object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    bool known = false;
    for (const char* a : allowed)
      if (key == a) {
        known = true;
        break;
      }
    if (!known)
      throw ConfigError(std::string("config: unknown key '") + key +
                        "' in '" + where + "'");
  }
}

double get_number(const json& obj, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number())
    throw ConfigError(std::string("config: '") + key + "' must be a number");
  return obj[key].get<double>();
}

std::int64_t get_integer(const json& obj, const char* key,
                         std::int64_t fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_integer())
    throw ConfigError(std::string("config: '") + key +
                      "' must be an integer");
  return obj[key].get<std::int64_t>();
}

bool get_bool(const json& obj, const char* key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_boolean())
    throw ConfigError(std::string("config: '") + key + "' must be a boolean");
  return obj[key].get<bool>();
}

std::string get_string(const json& obj, const char* key,
                       const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_string())
    throw ConfigError(std::string("config: '") + key + "' must be a string");
  return obj[key].get<std::string>();
}

MaterialParams parse_material(const json& obj, const char* where,
                              AtModel model) {
  check_keys(obj, where,
             {"E", "nu", "K", "mu", "sigma_Y", "H", "l_p", "l_f", "psi_c",
              "eta_f", "eta_p", "zeta"});
  const bool has_youngs = obj.contains("E") || obj.contains("nu");
  const bool has_moduli = obj.contains("K") || obj.contains("mu");
  if (has_youngs && has_moduli)
    throw ConfigError(std::string("config: '") + where +
                      "' must use either (E, nu) or (K, mu), not both");

  MaterialParams p;
  if (has_youngs) {
    if (!obj.contains("E") || !obj.contains("nu"))
      throw ConfigError(std::string("config: '") + where +
                        "' needs both E and nu");
    p = MaterialParams::from_youngs(get_number(obj, "E", 0.0),
                                    get_number(obj, "nu", 0.0));
  } else if (!has_moduli) {
    throw ConfigError(std::string("config: '") + where +
                      "' needs a stiffness pair, (E, nu) or (K, mu)");
  } else {
    p.K = get_number(obj, "K", p.K);
    p.mu = get_number(obj, "mu", p.mu);
  }
  p.sigma_Y = get_number(obj, "sigma_Y", p.sigma_Y);
  p.H = get_number(obj, "H", p.H);
  p.l_p = get_number(obj, "l_p", p.l_p);
  p.l_f = get_number(obj, "l_f", p.l_f);
  p.psi_c = get_number(obj, "psi_c", p.psi_c);
  p.eta_f = get_number(obj, "eta_f", p.eta_f);
  p.eta_p = get_number(obj, "eta_p", p.eta_p);
  p.zeta = get_number(obj, "zeta", p.zeta);
  p.model = model;
  p.validate();
  return p;
}

double baseline_of(const MaterialParams& mat, const std::string& name) {
  if (name == "E") return mat.youngs();
  if (name == "mu") return mat.mu;
  if (name == "K") return mat.K;
  if (name == "G_c") return mat.g_f();
  if (name == "psi_c") return mat.psi_c;
  if (name == "H") return mat.H;
  if (name == "sigma_Y") return mat.sigma_Y;
  throw ConfigError("unknown parameter '" + name + "'");
}

void apply_parameter(MaterialParams& mat, const std::string& name,
                     double value) {
  if (name == "E") {
    const double nu = mat.poisson();
    mat.K = value / (3.0 * (1.0 - 2.0 * nu));
    mat.mu = value / (2.0 * (1.0 + nu));
  } else if (name == "mu") {
    mat.mu = value;
  } else if (name == "K") {
    mat.K = value;
  } else if (name == "G_c") {
    mat.psi_c = value / (2.0 * mat.l_f * cf_constant(mat.model));
  } else if (name == "psi_c") {
    mat.psi_c = value;
  } else if (name == "H") {
    mat.H = value;
  } else if (name == "sigma_Y") {
    mat.sigma_Y = value;
  } else {
    throw ConfigError("unknown parameter '" + name + "'");
  }
}

}  // namespace

void CampaignConfig::validate() const {
  if (model.dimension != 1 && model.dimension != 2)
    throw ConfigError("config: model.dimension must be 1 or 2");
  model.material.validate();
  if (model.inclusion_material) model.inclusion_material->validate();
  if (!(model.void_scaling > 0.0) || model.void_scaling > 1.0)
    throw ConfigError("config: void_scaling must lie in (0, 1]");
  if (loading.steps < 1) throw ConfigError("config: loading.steps must be >= 1");
  if (!(loading.t_end > 0.0))
    throw ConfigError("config: loading.t_end must be > 0");
  if (loading.u_end == 0.0 || !std::isfinite(loading.u_end))
    throw ConfigError("config: loading.u_end must be nonzero");
  if (loading.bc != "uniaxial_x")
    throw ConfigError("config: unknown boundary preset '" + loading.bc + "'");
  solver.validate();

  PerturbedParameterSet pset = perturbation;
  pset.baseline.clear();
  for (const auto& [name, eta] : perturbation.eta) {
    (void)eta;
    pset.baseline[name] = baseline_of(model.material, name);
  }
  pset.validate();

  if (microstructure) {
    if (model.dimension != 2)
      throw ConfigError("config: microstructure sampling needs a 2D model");
    AllocationSpec spec;
    spec.box = model.box;
    spec.box.dim = 2;
    spec.void_radius = microstructure->void_radius;
    spec.inclusion_radius = microstructure->inclusion_radius;
    spec.target_voids = microstructure->target_voids;
    spec.target_inclusions = microstructure->target_inclusions;
    spec.gamma = microstructure->gamma;
    spec.max_attempts = microstructure->max_attempts;
    spec.pair_rule = microstructure->pair_rule;
    spec.validate();
  }
  if (sampling.samples == 0)
    throw ConfigError("config: sampling.samples must be >= 1");
  if (sampling.threads < 0)
    throw ConfigError("config: sampling.threads must be >= 0");
  if (rate_study.replicates < 1)
    throw ConfigError("config: rate_study.replicates must be >= 1");
}

CampaignConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& err) {
    throw ConfigError(std::string("config: invalid JSON: ") + err.what());
  }
  check_keys(root, "<top>",
             {"schema_version", "title", "model", "loading", "solver",
              "perturbation", "microstructure", "sampling", "output",
              "rate_study"});
  if (!root.contains("schema_version"))
    throw ConfigError("config: schema_version is required");
  if (get_integer(root, "schema_version", 0) != 1)
    throw ConfigError("config: unsupported schema_version");

  CampaignConfig config;

  const json model = root.value("model", json::object());
  check_keys(model, "model",
             {"dimension", "box", "divisions", "at_model", "plasticity",
              "material", "inclusion_material", "void_scaling"});
  config.model.dimension =
      static_cast<int>(get_integer(model, "dimension", 1));
  const int dim = config.model.dimension;
  if (dim != 1 && dim != 2)
    throw ConfigError("config: model.dimension must be 1 or 2");

  config.model.box.dim = dim;
  if (model.contains("box")) {
    const json& box = model["box"];
    check_keys(box, "model.box", {"lo", "hi"});
    const json lo = box.value("lo", json::array());
    const json hi = box.value("hi", json::array());
    if (!lo.is_array() || !hi.is_array() ||
        lo.size() != static_cast<std::size_t>(dim) ||
        hi.size() != static_cast<std::size_t>(dim))
      throw ConfigError("config: model.box lo/hi must be arrays of length "
                        "model.dimension");
    for (int k = 0; k < dim; ++k) {
      config.model.box.lo[k] = lo[k].get<double>();
      config.model.box.hi[k] = hi[k].get<double>();
    }
  }
  config.model.box.validate();

  if (model.contains("divisions")) {
    const json& div = model["divisions"];
    if (!div.is_array() || div.size() != static_cast<std::size_t>(dim))
      throw ConfigError("config: model.divisions must be an array of length "
                        "model.dimension");
    config.model.divisions[0] = div[0].get<int>();
    config.model.divisions[1] = dim == 2 ? div[1].get<int>() : 1;
  } else {
    config.model.divisions = {32, dim == 2 ? 32 : 1};
  }

  const std::string at_name = get_string(model, "at_model", "at2");
  AtModel at_model;
  if (at_name == "at1")
    at_model = AtModel::at1;
  else if (at_name == "at2")
    at_model = AtModel::at2;
  else
    throw ConfigError("config: at_model must be 'at1' or 'at2'");

  config.model.plasticity = get_bool(model, "plasticity", false);
  config.model.material = parse_material(
      model.value("material", json::object()), "model.material", at_model);
  if (model.contains("inclusion_material"))
    config.model.inclusion_material = parse_material(
        model["inclusion_material"], "model.inclusion_material", at_model);
  config.model.void_scaling = get_number(model, "void_scaling", 1e-6);

  const json loading = root.value("loading", json::object());
  check_keys(loading, "loading", {"steps", "t_end", "u_end", "bc"});
  config.loading.steps = static_cast<int>(get_integer(loading, "steps", 20));
  config.loading.t_end = get_number(loading, "t_end", 1.0);
  config.loading.u_end = get_number(loading, "u_end", 0.05);
  config.loading.bc = get_string(loading, "bc", "uniaxial_x");

  const json solver = root.value("solver", json::object());
  check_keys(solver, "solver",
             {"staggered_tol", "max_staggered", "newton_tol", "max_newton",
              "norm", "early_stop"});
  config.solver.staggered_tol =
      get_number(solver, "staggered_tol", config.solver.staggered_tol);
  config.solver.max_staggered = static_cast<int>(
      get_integer(solver, "max_staggered", config.solver.max_staggered));
  config.solver.newton_tol =
      get_number(solver, "newton_tol", config.solver.newton_tol);
  config.solver.max_newton = static_cast<int>(
      get_integer(solver, "max_newton", config.solver.max_newton));
  const std::string norm = get_string(solver, "norm", "combined_rel");
  if (norm != "combined_rel")
    throw ConfigError("config: solver.norm must be 'combined_rel'");
  if (solver.contains("early_stop")) {
    const json& early = solver["early_stop"];
    check_keys(early, "solver.early_stop",
               {"enabled", "fraction", "patience"});
    config.solver.early_stop.enabled = get_bool(early, "enabled", true);
    config.solver.early_stop.fraction =
        get_number(early, "fraction", config.solver.early_stop.fraction);
    config.solver.early_stop.patience = static_cast<int>(
        get_integer(early, "patience", config.solver.early_stop.patience));
  }

  const json pert = root.value("perturbation", json::object());
  check_keys(pert, "perturbation", {"mode", "eta"});
  const std::string mode = get_string(pert, "mode", "homogeneous");
  if (mode == "homogeneous")
    config.perturbation.mode = PerturbationMode::homogeneous;
  else if (mode == "heterogeneous")
    config.perturbation.mode = PerturbationMode::heterogeneous;
  else
    throw ConfigError("config: perturbation.mode must be 'homogeneous' or "
                      "'heterogeneous'");
  if (pert.contains("eta")) {
    if (!pert["eta"].is_object())
      throw ConfigError("config: perturbation.eta must be an object");
    for (const auto& [name, value] : pert["eta"].items()) {
      if (!value.is_number())
        throw ConfigError("config: perturbation.eta values must be numbers");
      config.perturbation.eta[name] = value.get<double>();
    }
  }

  if (root.contains("microstructure")) {
    const json& micro = root["microstructure"];
    check_keys(micro, "microstructure",
               {"targets", "void_radius", "inclusion_radius", "gamma",
                "max_attempts", "pair_rule"});
    MicrostructureConfig mc;
    const json targets = micro.value("targets", json::object());
    check_keys(targets, "microstructure.targets", {"voids", "inclusions"});
    mc.target_voids = get_number(targets, "voids", 0.0);
    mc.target_inclusions = get_number(targets, "inclusions", 0.0);
    auto radius = [&](const char* key) {
      RadiusRange r;
      if (micro.contains(key)) {
        const json& arr = micro[key];
        if (!arr.is_array() || arr.size() != 2)
          throw ConfigError(std::string("config: microstructure.") + key +
                            " must be [r_min, r_max]");
        r.r_min = arr[0].get<double>();
        r.r_max = arr[1].get<double>();
      }
      return r;
    };
    mc.void_radius = radius("void_radius");
    mc.inclusion_radius = radius("inclusion_radius");
    mc.gamma = get_number(micro, "gamma", 0.1);
    mc.max_attempts = static_cast<std::size_t>(
        get_integer(micro, "max_attempts", 100000));
    const std::string rule = get_string(micro, "pair_rule", "inclusions");
    if (rule == "inclusions")
      mc.pair_rule = PairEnlargement::inclusions;
    else if (rule == "all")
      mc.pair_rule = PairEnlargement::all;
    else if (rule == "none")
      mc.pair_rule = PairEnlargement::none;
    else
      throw ConfigError("config: pair_rule must be 'inclusions', 'all', or "
                        "'none'");
    config.microstructure = mc;
  }

  const json sampling = root.value("sampling", json::object());
  check_keys(sampling, "sampling",
             {"samples", "seed", "threads", "keep_per_sample", "variance"});
  config.sampling.samples =
      static_cast<std::size_t>(get_integer(sampling, "samples", 16));
  config.sampling.seed =
      static_cast<std::uint64_t>(get_integer(sampling, "seed", 0));
  config.sampling.threads =
      static_cast<int>(get_integer(sampling, "threads", 1));
  config.sampling.keep_per_sample =
      get_bool(sampling, "keep_per_sample", true);
  const std::string variance = get_string(sampling, "variance", "population");
  if (variance == "population")
    config.sampling.unbiased_variance = false;
  else if (variance == "unbiased")
    config.sampling.unbiased_variance = true;
  else
    throw ConfigError("config: sampling.variance must be 'population' or "
                      "'unbiased'");

  const json output = root.value("output", json::object());
  check_keys(output, "output", {"dir", "write_fields"});
  config.output_dir = get_string(output, "dir", "out");
  config.write_fields = get_bool(output, "write_fields", false);

  const json rates = root.value("rate_study", json::object());
  check_keys(rates, "rate_study", {"m_levels", "replicates", "h_divisions"});
  if (rates.contains("m_levels")) {
    config.rate_study.m_levels.clear();
    for (const auto& v : rates["m_levels"])
      config.rate_study.m_levels.push_back(
          static_cast<std::size_t>(v.get<std::int64_t>()));
  }
  config.rate_study.replicates =
      static_cast<int>(get_integer(rates, "replicates", 8));
  if (rates.contains("h_divisions")) {
    for (const auto& v : rates["h_divisions"])
      config.rate_study.h_divisions.push_back(v.get<int>());
  }

  config.validate();
  return config;
}

CampaignConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

namespace {

DiscreteProblem build_problem(const CampaignConfig& config,
                              RandomStream& stream,
                              Microstructure* out_micro) {
  const ModelConfig& model = config.model;
  Mesh mesh =
      build_structured_mesh(model.dimension, model.box, model.divisions);

  std::optional<Microstructure> micro;
  if (config.microstructure) {
    AllocationSpec spec;
    spec.box = model.box;
    spec.box.dim = 2;
    spec.void_radius = config.microstructure->void_radius;
    spec.inclusion_radius = config.microstructure->inclusion_radius;
    spec.target_voids = config.microstructure->target_voids;
    spec.target_inclusions = config.microstructure->target_inclusions;
    spec.gamma = config.microstructure->gamma;
    spec.max_attempts = config.microstructure->max_attempts;
    spec.pair_rule = config.microstructure->pair_rule;
    micro = allocate(spec, stream);
    if (out_micro) *out_micro = *micro;
  }

  // Perturbed parameters realized per element against the matrix baseline.
  PerturbedParameterSet pset = config.perturbation;
  pset.baseline.clear();
  for (const auto& [name, eta] : config.perturbation.eta) {
    (void)eta;
    pset.baseline[name] = baseline_of(model.material, name);
  }
  const std::size_t n_points =
      pset.mode == PerturbationMode::heterogeneous ? mesh.n_elements() : 1;
  const auto realized = realize_parameters(pset, stream, n_points);

  DiscreteProblem problem;
  problem.element_params.reserve(mesh.n_elements());
  for (std::size_t e = 0; e < mesh.n_elements(); ++e) {
    Phase phase = Phase::matrix;
    if (micro) {
      const Eigen::Vector2d c = mesh.element_centroid(e);
      phase = phase_at(*micro, {c.x(), c.y(), 0.0});
    }
    MaterialParams mat = model.material;
    if (phase == Phase::matrix) {
      for (const auto& [name, values] : realized)
        apply_parameter(mat, name,
                        values[values.size() == 1 ? 0 : e]);
    } else if (phase == Phase::inclusion) {
      mat = model.inclusion_material ? *model.inclusion_material
                                     : model.material;
    } else {
      mat.K *= config.model.void_scaling;
      mat.mu *= config.model.void_scaling;
      mat.psi_c *= config.model.void_scaling;
    }
    mat.validate();
    problem.element_params.push_back(mat);
  }

  problem.mesh = std::move(mesh);
  problem.states.assign(problem.mesh.n_elements() * problem.n_qp(),
                        MaterialPointState{});
  problem.schedule =
      ramp_schedule(config.loading.steps, config.loading.t_end,
                    config.loading.u_end);
  problem.plasticity_enabled = model.plasticity;

  // uniaxial_x: pull the right face, fix the left one.
  problem.dirichlet_u.push_back(
      {BoundaryTag::left, 0, /*driven=*/false, 0.0});
  problem.dirichlet_u.push_back({BoundaryTag::right, 0, /*driven=*/true, 1.0});
  if (problem.mesh.dim == 2)
    problem.dirichlet_u.push_back(
        {BoundaryTag::bottom, 1, /*driven=*/false, 0.0});
  return problem;
}

QoICurve run_single_impl(const CampaignConfig& config, RandomStream stream,
                         Fields* out_fields) {
  DiscreteProblem problem = build_problem(config, stream, nullptr);
  Fields fields = Fields::zero(problem.mesh);
  const SimulationResult sim =
      run_simulation(problem, fields, config.solver);

  // Estimators need a shared grid: hold the last value through any steps
  // skipped by the early stop.
  QoICurve curve;
  curve.times = problem.schedule.times;
  curve.values = sim.reaction.values;
  const double pad = curve.values.empty() ? 0.0 : curve.values.back();
  curve.values.resize(curve.times.size(), pad);
  if (out_fields) *out_fields = fields;
  return curve;
}

void write_sample_csv(const std::filesystem::path& path,
                      const QoICurve& curve,
                      const std::vector<double>& displacement) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write '" + path.string() + "'");
  os << "step,time,displacement,force\n";
  for (std::size_t k = 0; k < curve.times.size(); ++k)
    os << k << ',' << format_full(curve.times[k]) << ','
       << format_full(displacement[k]) << ',' << format_full(curve.values[k])
       << "\n";
}

void write_summary_csv(const std::filesystem::path& path,
                       const McSummary& summary) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write '" + path.string() + "'");
  os << "step,mean,variance,ci_lo,ci_hi\n";
  for (std::size_t k = 0; k < summary.mean.times.size(); ++k)
    os << k << ',' << format_full(summary.mean.values[k]) << ','
       << format_full(summary.variance.values[k]) << ','
       << format_full(summary.ci95.first.values[k]) << ','
       << format_full(summary.ci95.second.values[k]) << "\n";
}

}  // namespace

QoICurve run_single(const CampaignConfig& config, RandomStream stream) {
  return run_single_impl(config, stream, nullptr);
}

CampaignResult run_campaign(const CampaignConfig& config,
                            const std::string& out_dir,
                            const std::string& config_text) {
  config.validate();
  const std::size_t n = config.sampling.samples;
  const int workers = resolve_threads(config.sampling.threads);

  std::filesystem::path out;
  const bool writing = !out_dir.empty();
  if (writing) {
    out = out_dir;
    std::filesystem::create_directories(out);
  }

  std::vector<std::optional<QoICurve>> curves(n);
  std::vector<std::optional<std::string>> errors(n);

  parallel_for(n, config.sampling.threads, [&](std::size_t i) {
    RandomStream stream(config.sampling.seed, i);
    try {
      Fields fields;
      QoICurve curve = run_single_impl(config, stream,
                                       config.write_fields ? &fields : nullptr);
      if (writing && config.write_fields) {
        char name[64];
        std::snprintf(name, sizeof(name), "fields_%04zu.vtk", i);
        std::ofstream os(out / name);
        if (os) {
          const Mesh mesh = build_structured_mesh(
              config.model.dimension, config.model.box,
              config.model.divisions);
          write_vtk(os, mesh, fields);
        }
      }
      curves[i] = std::move(curve);
    } catch (const std::exception& err) {
      errors[i] = err.what();
    }
  });

  CampaignResult result;
  result.samples_requested = n;
  result.master_seed = config.sampling.seed;
  for (std::size_t i = 0; i < n; ++i)
    if (errors[i]) result.failures.push_back({i, i, *errors[i]});

  // Partition the curves over per-worker accumulators and merge; the
  // index-ordered finalize makes the partition irrelevant to the summary.
  std::vector<McAccumulator> partial(static_cast<std::size_t>(workers));
  for (std::size_t i = 0; i < n; ++i)
    if (curves[i]) partial[i % partial.size()].add(i, *curves[i]);
  McAccumulator acc;
  for (auto& p : partial) acc.merge(std::move(p));
  if (acc.size() == 0)
    throw NumericalError("campaign: all " + std::to_string(n) +
                         " samples failed; first error: " +
                         result.failures.front().error);
  result.summary = acc.finalize(config.sampling.keep_per_sample);

  if (config.sampling.unbiased_variance) {
    const auto m = static_cast<double>(result.summary.samples);
    if (m < 2)
      throw ConfigError("campaign: unbiased variance needs >= 2 samples");
    const double scale = m / (m - 1.0);
    auto& summary = result.summary;
    for (std::size_t k = 0; k < summary.variance.values.size(); ++k) {
      summary.variance.values[k] *= scale;
      const double half = 1.96 * std::sqrt(summary.variance.values[k] / m);
      summary.ci95.first.values[k] = summary.mean.values[k] - half;
      summary.ci95.second.values[k] = summary.mean.values[k] + half;
    }
  }

  const LoadSchedule schedule = ramp_schedule(
      config.loading.steps, config.loading.t_end, config.loading.u_end);
  result.displacement = schedule.factors;

  if (writing) {
    if (config.sampling.keep_per_sample)
      for (std::size_t i = 0; i < n; ++i) {
        if (!curves[i]) continue;
        char name[64];
        std::snprintf(name, sizeof(name), "sample_%04zu.csv", i);
        write_sample_csv(out / name, *curves[i], result.displacement);
      }
    write_summary_csv(out / "summary.csv", result.summary);

    json manifest;
    manifest["schema_version"] = 1;
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(config_hash(config_text)));
    manifest["config_hash"] = hash;
    manifest["master_seed"] = config.sampling.seed;
    manifest["qoi"] = "reaction";
    manifest["samples_requested"] = n;
    manifest["samples_completed"] = n - result.failures.size();
    manifest["threads"] = workers;
    manifest["failures"] = json::array();
    for (const auto& f : result.failures)
      manifest["failures"].push_back({{"sample", f.sample},
                                      {"stream_id", f.stream_id},
                                      {"error", f.error}});
    std::ofstream os(out / "manifest.json");
    if (!os) throw IoError("cannot write manifest.json");
    os << manifest.dump(2) << "\n";
  }
  return result;
}

RateStudyResult run_rate_study(const CampaignConfig& config,
                               const std::string& out_dir,
                               const std::string& config_text) {
  config.validate();
  const auto& levels = config.rate_study.m_levels;
  const int replicates = config.rate_study.replicates;
  if (levels.size() < 4)
    throw ConfigError("rate study: need >= 4 sample-count levels");

  // Flat run layout: replicate-major chunks per level, globally unique
  // stream ids so no draw is ever reused across estimators.
  struct Chunk {
    std::size_t level;
    std::size_t offset;
    std::size_t count;
  };
  std::vector<Chunk> chunks;
  std::size_t total = 0;
  for (std::size_t k = 0; k < levels.size(); ++k)
    for (int r = 0; r < replicates; ++r) {
      chunks.push_back({k, total, levels[k]});
      total += levels[k];
    }

  // Same failure policy as campaigns: a sample that does not finish is
  // dropped from every estimator it feeds instead of aborting the study.
  // Exclusion is keyed on the run index alone, so the result stays
  // independent of the thread count.
  std::vector<double> qoi(total);
  std::vector<std::optional<std::string>> run_errors(total);
  parallel_for(total, config.sampling.threads, [&](std::size_t run) {
    try {
      const QoICurve curve =
          run_single(config, RandomStream(config.sampling.seed, run));
      double peak = 0.0;
      for (double v : curve.values) peak = std::max(peak, std::abs(v));
      qoi[run] = peak;
    } catch (const std::exception& err) {
      run_errors[run] = err.what();
    }
  });

  double reference = 0.0;
  std::size_t completed = 0;
  for (std::size_t run = 0; run < total; ++run)
    if (!run_errors[run]) {
      reference += qoi[run];
      ++completed;
    }
  if (completed == 0)
    throw NumericalError("rate study: all " + std::to_string(total) +
                         " runs failed; first error: " + *run_errors.front());
  reference /= static_cast<double>(completed);

  std::map<std::size_t, std::vector<double>> errors_per_m;
  for (const Chunk& chunk : chunks) {
    double mean = 0.0;
    std::size_t kept = 0;
    for (std::size_t i = 0; i < chunk.count; ++i)
      if (!run_errors[chunk.offset + i]) {
        mean += qoi[chunk.offset + i];
        ++kept;
      }
    if (kept == 0) continue;
    mean /= static_cast<double>(kept);
    errors_per_m[levels[chunk.level]].push_back(std::abs(mean - reference));
  }
  if (errors_per_m.size() < levels.size()) {
    for (std::size_t run = 0; run < total; ++run)
      if (run_errors[run])
        throw NumericalError(
            "rate study: a sample-count level lost every replicate; "
            "first failure: " + *run_errors[run]);
  }

  RateStudyResult result;
  result.reference = reference;
  result.statistical = mc_rate_study(errors_per_m);
  for (const auto& [m, errs] : errors_per_m) {
    double acc = 0.0;
    for (double e : errs) acc += e * e;
    result.rms_per_m[m] = std::sqrt(acc / static_cast<double>(errs.size()));
  }

  if (!config.rate_study.h_divisions.empty()) {
    // Manufactured elastic bar: u(x) = sin(pi x / 2) on [0, 1].
    const MaterialParams base = config.model.material;
    const double modulus = base.K + 4.0 / 3.0 * base.mu;
    std::vector<std::pair<double, double>> errors_h;
    for (int divisions : config.rate_study.h_divisions) {
      Box bar;
      bar.dim = 1;
      bar.lo = {0.0, 0.0, 0.0};
      bar.hi = {1.0, 1.0, 1.0};
      MaterialParams mat = base;
      mat.psi_c = 1e12 * std::max(1.0, modulus);
      DiscreteProblem problem = make_problem(
          build_structured_mesh(1, bar, {divisions, 1}),
          mat, ramp_schedule(1, 1.0, 1.0));
      problem.plasticity_enabled = false;
      problem.dirichlet_u.push_back({BoundaryTag::left, 0, false, 0.0});
      problem.dirichlet_u.push_back({BoundaryTag::right, 0, true, 1.0});
      problem.body_force = [modulus](const Eigen::Vector2d& x) {
        const double w = std::numbers::pi / 2.0;
        return Eigen::Vector2d(modulus * w * w * std::sin(w * x.x()), 0.0);
      };
      Fields fields = Fields::zero(problem.mesh);
      SolverConfig sconf = config.solver;
      sconf.early_stop.enabled = false;
      run_simulation(problem, fields, sconf);
      const double err = l2_error_u(
          problem.mesh, fields.u, [](const Eigen::Vector2d& x) {
            return Eigen::Vector2d(std::sin(std::numbers::pi / 2.0 * x.x()),
                                   0.0);
          });
      errors_h.emplace_back(1.0 / divisions, err);
    }
    std::sort(errors_h.begin(), errors_h.end());
    std::vector<std::pair<std::size_t, double>> errors_m_flat;
    for (const auto& [m, rms] : result.rms_per_m)
      errors_m_flat.emplace_back(m, rms);
    const ErrorDecomposition decomp =
        total_error_decomposition(errors_h, errors_m_flat);
    result.spatial = decomp.spatial;
    result.errors_h = errors_h;
  }

  if (!out_dir.empty()) {
    std::filesystem::path out(out_dir);
    std::filesystem::create_directories(out);
    {
      std::ofstream os(out / "rates_mc.csv");
      if (!os) throw IoError("cannot write rates_mc.csv");
      os << "samples,rms_error\n";
      for (const auto& [m, rms] : result.rms_per_m)
        os << m << ',' << format_full(rms) << "\n";
    }
    if (result.spatial) {
      std::ofstream os(out / "rates_h.csv");
      if (!os) throw IoError("cannot write rates_h.csv");
      os << "h,l2_error\n";
      for (const auto& [h, err] : result.errors_h)
        os << format_full(h) << ',' << format_full(err) << "\n";
    }
    json report;
    report["schema_version"] = 1;
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(config_hash(config_text)));
    report["config_hash"] = hash;
    report["reference"] = result.reference;
    report["statistical"] = {{"slope", result.statistical.slope},
                             {"intercept", result.statistical.intercept},
                             {"degenerate", result.statistical.degenerate}};
    if (result.spatial)
      report["spatial"] = {{"slope", result.spatial->slope},
                           {"intercept", result.spatial->intercept},
                           {"degenerate", result.spatial->degenerate}};
    std::ofstream os(out / "rates.json");
    if (!os) throw IoError("cannot write rates.json");
    os << report.dump(2) << "\n";
  }
  return result;
}

}  // namespace crackmc
