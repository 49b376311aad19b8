#include "sdmlmc/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "sdmlmc/calib.hpp"
#include "sdmlmc/errors.hpp"
#include "sdmlmc/rng.hpp"

namespace sdmlmc::cli {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

void set_checked(KeyValues& kv, const std::string& key, const std::string& value,
                 const std::string& origin) {
  static const KeyValues defaults = default_config();
  if (!defaults.count(key))
    throw ConfigError(origin + ": unknown configuration key '" + key + "'");
  kv[key] = value;
}

double get_double(const KeyValues& kv, const std::string& key) {
  const std::string& s = kv.at(key);
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': cannot parse '" + s + "' as a number");
  }
}

long get_long(const KeyValues& kv, const std::string& key) {
  const std::string& s = kv.at(key);
  try {
    std::size_t pos = 0;
    const long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': cannot parse '" + s + "' as an integer");
  }
}

int get_int(const KeyValues& kv, const std::string& key) {
  return static_cast<int>(get_long(kv, key));
}

bool is_set(const KeyValues& kv, const std::string& key) { return !kv.at(key).empty(); }

Norm get_norm(const KeyValues& kv) {
  const std::string& s = kv.at("norm");
  if (s == "l2") return Norm::l2;
  if (s == "linf") return Norm::linf;
  if (s == "h1") return Norm::h1;
  throw ConfigError("key 'norm': expected l2, linf or h1, got '" + s + "'");
}

std::vector<double> get_list(const KeyValues& kv, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(kv.at(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "': cannot parse '" + item + "' as a number");
    }
  }
  if (out.empty()) throw ConfigError("key '" + key + "': empty list");
  return out;
}

std::ofstream open_output(const std::string& outdir, const std::string& name) {
  std::filesystem::create_directories(outdir);
  const std::string path = outdir + "/" + name;
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open output file '" + path + "'");
  return os;
}

void write_manifest(const std::string& command, const KeyValues& kv,
                    const std::string& outdir) {
  std::ofstream os = open_output(outdir, "manifest.json");
  os << "{\n  \"command\": \"" << command << "\",\n  \"config\": {\n";
  std::size_t i = 0;
  for (const auto& [k, v] : kv) {
    os << "    \"" << k << "\": \"" << v << "\"";
    os << (++i < kv.size() ? ",\n" : "\n");
  }
  os << "  }\n}\n";
}

SolveOptions get_solver(const KeyValues& kv) {
  SolveOptions o;
  o.tol = get_double(kv, "tol");
  o.max_cycles = get_int(kv, "max_cycles");
  o.pre_smooth = get_int(kv, "pre_smooth");
  o.post_smooth = get_int(kv, "post_smooth");
  return o;
}

CovarianceParams get_covariance(const KeyValues& kv) {
  CovarianceParams cp;
  cp.variance = get_double(kv, "cov_variance");
  cp.len_x = get_double(kv, "cov_len_x");
  cp.len_y = get_double(kv, "cov_len_y");
  cp.mean_log = get_double(kv, "cov_mean_log");
  return cp;
}

PhysicalParams get_physics(const KeyValues& kv) {
  PhysicalParams pp;
  pp.nu = get_double(kv, "nu");
  pp.g = get_double(kv, "g");
  pp.alpha = get_double(kv, "alpha");
  pp.z = get_double(kv, "z");
  return pp;
}

// everything a sampling run needs, built once
struct Instruments {
  MeshHierarchy hier;
  PointSet ps;
  FieldSampler fs;
  CoupledSampler cs;

  explicit Instruments(const KeyValues& kv)
      : hier(build_hierarchy({}, get_double(kv, "h0"), get_int(kv, "ch"), get_int(kv, "L"))),
        ps(hier),
        fs(ps, get_covariance(kv)),
        cs(hier, ps, fs, get_physics(kv), {}, {}, get_solver(kv)) {}
};

double resolve_error_budget(const KeyValues& kv, const Instruments& ins, Norm norm,
                            std::uint64_t seed, long n_pilot, double* v_top_out) {
  const int L = ins.hier.depth();
  double v_top = -1.0;
  double e = 0.0;
  if (is_set(kv, "e_L")) {
    e = get_double(kv, "e_L");
    if (e <= 0.0) throw ConfigError("key 'e_L': must be positive");
  } else {
    v_top = pilot_variance(ins.cs, L, n_pilot, norm, rng::derive_seed(seed, 101, 0));
    e = sampling_error_target(v_top, get_long(kv, "N_SL"));
  }
  if (v_top_out) *v_top_out = v_top;
  return e;
}

void write_run_outputs(const Instruments& ins, const Estimate& est, Norm norm,
                       const std::string& outdir) {
  const DofCounts nd = ins.hier.level(ins.hier.depth()).dofs();
  {
    std::ofstream os = open_output(outdir, "estimate.csv");
    write_estimate_csv(nd, est.mean, os);
  }
  {
    std::ofstream os = open_output(outdir, "levels.csv");
    write_levels_csv(est, norm, os);
  }
}

void command_run(const KeyValues& kv, const std::string& outdir) {
  const std::string& method = kv.at("method");
  if (method != "slmc" && method != "mlmc" && method != "mgmlmc")
    throw ConfigError("key 'method': expected slmc, mlmc or mgmlmc, got '" + method + "'");
  if (!is_set(kv, "e_L") && !is_set(kv, "N_SL"))
    throw ConfigError("method '" + method +
                      "' needs a sampling budget: set either 'e_L' or 'N_SL'");
  const Norm norm = get_norm(kv);
  const std::uint64_t seed = static_cast<std::uint64_t>(get_long(kv, "seed"));
  const long n_pilot = get_long(kv, "n_pilot");
  if (n_pilot < 2) throw ConfigError("key 'n_pilot': must be at least 2");
  const Instruments ins(kv);
  const int L = ins.hier.depth();

  Estimate est;
  if (method == "slmc") {
    long N = 0;
    if (is_set(kv, "N_SL")) {
      N = get_long(kv, "N_SL");
    } else {
      const double v =
          pilot_variance(ins.cs, L, n_pilot, norm, rng::derive_seed(seed, 101, 0));
      N = std::max(1L, static_cast<long>(std::ceil(v / get_double(kv, "e_L"))));
    }
    if (N < 1) throw ConfigError("key 'N_SL': must be at least 1");
    est = slmc(ins.cs, L, N, seed);
  } else {
    const double e = resolve_error_budget(kv, ins, norm, seed, n_pilot, nullptr);
    MlmcPlan pilot_plan;
    pilot_plan.N.assign(L + 1, n_pilot);
    const Estimate pilot = mlmc(ins.cs, pilot_plan, rng::derive_seed(seed, 102, 0));
    std::vector<double> v, C;
    for (const LevelStats& ls : pilot.levels) {
      v.push_back(norm_component(ls.variance, norm));
      C.push_back(ls.flops / static_cast<double>(ls.N));
    }
    const MlmcPlan plan = allocate(v, C, e);
    est = (method == "mlmc") ? mlmc(ins.cs, plan, seed) : mgmlmc(ins.cs, plan, seed);
  }
  write_run_outputs(ins, est, norm, outdir);
}

void command_compare(const KeyValues& kv, const std::string& outdir) {
  if (!is_set(kv, "e_L") && !is_set(kv, "N_SL"))
    throw ConfigError("'compare' needs a sampling budget: set either 'e_L' or 'N_SL'");
  const Norm norm = get_norm(kv);
  const std::uint64_t seed = static_cast<std::uint64_t>(get_long(kv, "seed"));
  const long n_pilot = get_long(kv, "n_pilot");
  if (n_pilot < 2) throw ConfigError("key 'n_pilot': must be at least 2");
  const Instruments ins(kv);
  const int L = ins.hier.depth();

  double v_top = -1.0;
  const double e = resolve_error_budget(kv, ins, norm, seed, n_pilot, &v_top);
  if (v_top < 0.0)
    v_top = pilot_variance(ins.cs, L, n_pilot, norm, rng::derive_seed(seed, 101, 0));
  const long N_sl = std::max(1L, static_cast<long>(std::ceil(v_top / e)));

  MlmcPlan pilot_plan;
  pilot_plan.N.assign(L + 1, n_pilot);
  const Estimate pilot = mlmc(ins.cs, pilot_plan, rng::derive_seed(seed, 102, 0));
  std::vector<double> v, C;
  for (const LevelStats& ls : pilot.levels) {
    v.push_back(norm_component(ls.variance, norm));
    C.push_back(ls.flops / static_cast<double>(ls.N));
  }
  const MlmcPlan plan = allocate(v, C, e);

  const Estimate est_sl = slmc(ins.cs, L, N_sl, seed);
  const Estimate est_ml = mlmc(ins.cs, plan, seed);
  const Estimate est_mgml = mgmlmc(ins.cs, plan, seed);

  Efficiency eff;
  eff.T_sl = est_sl.flops;
  eff.T_ml = est_ml.flops;
  eff.T_mgml = est_mgml.flops;
  eff.sec_sl = est_sl.seconds;
  eff.sec_ml = est_ml.seconds;
  eff.sec_mgml = est_mgml.seconds;
  eff.gamma = get_double(kv, "gamma");
  eff.beta = get_double(kv, "beta");
  eff.e_L = e;
  {
    std::ofstream os = open_output(outdir, "efficiency.json");
    write_efficiency_json(eff, os);
  }
  write_run_outputs(ins, est_mgml, norm, outdir);
}

void command_calibrate_beta(const KeyValues& kv, const std::string& outdir) {
  BetaOptions opt;
  opt.sigmas = get_list(kv, "sigmas");
  opt.n_samples = get_int(kv, "beta_samples");
  opt.n_inner = get_int(kv, "beta_inner");
  opt.top_level = get_int(kv, "beta_top_level");
  opt.covariance = get_covariance(kv);
  opt.g = get_double(kv, "g");
  opt.solver = get_solver(kv);
  const int L = std::max(get_int(kv, "L"), opt.top_level);
  const MeshHierarchy hier =
      build_hierarchy({}, get_double(kv, "h0"), get_int(kv, "ch"), L);
  const BetaEstimate est = estimate_beta(
      hier, opt, static_cast<std::uint64_t>(get_long(kv, "seed")), &std::cerr);
  std::ofstream os = open_output(outdir, "beta.csv");
  write_beta_csv(est, os);
}

void command_calibrate_gamma(const KeyValues& kv, const std::string& outdir) {
  const int L = get_int(kv, "L");
  const MeshHierarchy hier =
      build_hierarchy({}, get_double(kv, "h0"), get_int(kv, "ch"), L);
  const PointSet ps(hier);
  // cost growth is a property of the mesh sizes and the solver, not of the
  // conductivity values, so the measurement uses the median field directly
  // instead of factoring the (large) joint covariance of a deep hierarchy
  const FieldRealization field = constant_field(ps, std::exp(get_double(kv, "cov_mean_log")));
  const GammaEstimate est =
      measure_gamma(hier, field, get_physics(kv), {}, {}, get_solver(kv));
  std::ofstream os = open_output(outdir, "gamma.json");
  write_gamma_json(est, os);
}

void command_dump_field(const KeyValues& kv, const std::string& outdir) {
  const MeshHierarchy hier =
      build_hierarchy({}, get_double(kv, "h0"), get_int(kv, "ch"), get_int(kv, "L"));
  const int level = get_int(kv, "level");
  if (level < 0 || level > hier.depth())
    throw ConfigError("key 'level': outside the hierarchy");
  const PointSet ps(hier);
  const FieldSampler fs(ps, get_covariance(kv));
  const FieldRealization field =
      realize(ps, fs, static_cast<std::uint64_t>(get_long(kv, "seed")), 0, level);
  std::ofstream os = open_output(outdir, "field.csv");
  export_field(field, os);
}

void command_dump_mesh(const KeyValues& kv, const std::string& outdir) {
  const MeshHierarchy hier =
      build_hierarchy({}, get_double(kv, "h0"), get_int(kv, "ch"), get_int(kv, "L"));
  const int level = get_int(kv, "level");
  if (level < 0 || level > hier.depth())
    throw ConfigError("key 'level': outside the hierarchy");
  std::ofstream os = open_output(outdir, "mesh.txt");
  export_mesh(hier.level(level), os);
}

}  // namespace

KeyValues default_config() {
  return {
      {"h0", "0.25"},     {"ch", "2"},           {"L", "2"},
      {"method", "mgmlmc"}, {"e_L", ""},         {"N_SL", ""},
      {"n_pilot", "16"},  {"norm", "l2"},        {"seed", "1"},
      {"cov_variance", "0.1"}, {"cov_len_x", "0.2"}, {"cov_len_y", "0.2"},
      {"cov_mean_log", "0"},
      {"nu", "1"},        {"g", "1"},            {"alpha", "1"},
      {"z", "0"},
      {"tol", "1e-8"},    {"max_cycles", "50"},  {"pre_smooth", "2"},
      {"post_smooth", "2"},
      {"sigmas", "0.02,0.8,1.2"}, {"beta_samples", "40"}, {"beta_inner", "50"},
      {"beta_top_level", "2"},
      {"gamma", "0"},     {"beta", "0"},
      {"level", "0"},     {"workers", "1"},
  };
}

void merge_config_stream(KeyValues& kv, std::istream& in, const std::string& origin) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    set_checked(kv, key, value, origin + ":" + std::to_string(lineno));
  }
}

void merge_config_file(KeyValues& kv, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  merge_config_stream(kv, in, path);
}

void merge_override(KeyValues& kv, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override '" + spec + "': expected key=value");
  set_checked(kv, trim(spec.substr(0, eq)), trim(spec.substr(eq + 1)),
              "override '" + spec + "'");
}

void run_command(const std::string& command, const KeyValues& kv, const std::string& outdir) {
  if (command == "run")
    command_run(kv, outdir);
  else if (command == "compare")
    command_compare(kv, outdir);
  else if (command == "calibrate-beta")
    command_calibrate_beta(kv, outdir);
  else if (command == "calibrate-gamma")
    command_calibrate_gamma(kv, outdir);
  else if (command == "dump-field")
    command_dump_field(kv, outdir);
  else if (command == "dump-mesh")
    command_dump_mesh(kv, outdir);
  else
    throw ConfigError("unknown command '" + command + "'");
  write_manifest(command, kv, outdir);
}

int dispatch(const std::string& command, const std::string& config_path,
             const std::vector<std::string>& overrides, const std::string& outdir,
             std::ostream& err) {
  try {
    KeyValues kv = default_config();
    if (!config_path.empty()) merge_config_file(kv, config_path);
    for (const std::string& o : overrides) merge_override(kv, o);
    run_command(command, kv, outdir);
    return 0;
  } catch (const SolveFailure& e) {
    err << "solver failure: " << e.what() << "\n";
    return 3;
  } catch (const SolverSetupError& e) {
    err << "solver failure: " << e.what() << "\n";
    return 3;
  } catch (const SmootherError& e) {
    err << "solver failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "configuration error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace sdmlmc::cli
