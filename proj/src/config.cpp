#include "wed/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "wed/parallel.hpp"

namespace wed {

using nlohmann::json;

namespace {

const json& require(const json& j, const std::string& key, const std::string& ptr) {
  if (!j.is_object()) throw ConfigError(ptr, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(ptr + "/" + key, "missing required key");
  return *it;
}

void only_keys(const json& j, std::initializer_list<const char*> keys, const std::string& ptr) {
  if (!j.is_object()) throw ConfigError(ptr, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; }))
      throw ConfigError(ptr + "/" + it.key(), "unknown key");
}

double as_number(const json& j, const std::string& ptr) {
  if (!j.is_number()) throw ConfigError(ptr, "expected a number");
  return j.get<double>();
}

int as_int(const json& j, const std::string& ptr) {
  if (!j.is_number_integer()) throw ConfigError(ptr, "expected an integer");
  return j.get<int>();
}

std::string as_string(const json& j, const std::string& ptr) {
  if (!j.is_string()) throw ConfigError(ptr, "expected a string");
  return j.get<std::string>();
}

std::vector<double> as_vector(const json& j, const std::string& ptr) {
  if (!j.is_array()) throw ConfigError(ptr, "expected an array of numbers");
  std::vector<double> v;
  for (std::size_t i = 0; i < j.size(); ++i) v.push_back(as_number(j[i], ptr + "/" + std::to_string(i)));
  return v;
}

template <class F>
auto wrap(const std::string& ptr, F f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(ptr, e.what());
  }
}

double opt_number(const json& j, const std::string& key, double def, const std::string& ptr) {
  return j.contains(key) ? as_number(j[key], ptr + "/" + key) : def;
}

int opt_int(const json& j, const std::string& key, int def, const std::string& ptr) {
  return j.contains(key) ? as_int(j[key], ptr + "/" + key) : def;
}

GridMode parse_grid(const json& j, const std::string& ptr) {
  const std::string s = as_string(j, ptr);
  if (s == "uniform") return GridMode::uniform;
  if (s == "exp_graded") return GridMode::exp_graded;
  throw ConfigError(ptr, "unknown grid mode '" + s + "'");
}

Solver parse_solver(const json& j, const std::string& ptr) {
  const std::string s = as_string(j, ptr);
  if (s == "direct") return Solver::direct;
  if (s == "euler_lagrange") return Solver::euler_lagrange;
  throw ConfigError(ptr, "unknown solver '" + s + "'");
}

Preconditioning parse_precond(const json& j, const std::string& ptr) {
  const std::string s = as_string(j, ptr);
  if (s == "kinetic") return Preconditioning::kinetic;
  if (s == "mass_diagonal") return Preconditioning::mass_diagonal;
  throw ConfigError(ptr, "unknown preconditioner '" + s + "'");
}

std::vector<double> parse_point(const json& j, const SpaceSpec& space, const std::string& ptr) {
  std::vector<double> x;
  if (j.is_object()) {
    const json& g = require(j, "gaussian", ptr);
    const double mean = as_number(require(g, "mean", ptr + "/gaussian"), ptr + "/gaussian/mean");
    const double sd = as_number(require(g, "sd", ptr + "/gaussian"), ptr + "/gaussian/sd");
    x = wrap(ptr, [&] { return gaussian_quantiles(space, mean, sd).vec(); });
  } else if (j.is_number() && space.dim() == 1) {
    x = {j.get<double>()};
  } else {
    x = as_vector(j, ptr);
  }
  wrap(ptr, [&] { return Point(space, x); });
  return x;
}

}  // namespace

SpaceSpec parse_space(const json& j, const std::string& ptr) {
  only_keys(j, {"kind", "dim", "p", "m"}, ptr);
  const std::string kind = as_string(require(j, "kind", ptr), ptr + "/kind");
  if (kind == "euclidean") {
    const int dim = as_int(require(j, "dim", ptr), ptr + "/dim");
    return wrap(ptr + "/dim", [&] { return SpaceSpec::euclidean(dim); });
  }
  if (kind == "pnorm") {
    const int dim = as_int(require(j, "dim", ptr), ptr + "/dim");
    const double p = as_number(require(j, "p", ptr), ptr + "/p");
    return wrap(ptr + "/p", [&] { return SpaceSpec::pnorm(dim, p); });
  }
  if (kind == "quantile1d") {
    const int m = as_int(require(j, "m", ptr), ptr + "/m");
    return wrap(ptr + "/m", [&] { return SpaceSpec::quantile1d(m); });
  }
  throw ConfigError(ptr + "/kind", "unknown space kind '" + kind + "'");
}

EnergySpec parse_energy(const json& j, const SpaceSpec& space, const std::string& ptr) {
  only_keys(j, {"kind", "params", "lambda", "coercivity"}, ptr);
  const std::string kind = as_string(require(j, "kind", ptr), ptr + "/kind");
  const json params = j.contains("params") ? j["params"] : json::object();
  const std::string pp = ptr + "/params";
  if (!params.is_object()) throw ConfigError(pp, "expected an object");
  const int n = space.dim();
  EnergySpec e;
  if (kind == "quadratic") {
    only_keys(params, {"A", "b"}, pp);
    Eigen::MatrixXd A(n, n);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    const json& a = require(params, "A", pp);
    if (a.is_number()) {
      A = Eigen::MatrixXd::Identity(n, n) * a.get<double>();
    } else {
      if (!a.is_array() || static_cast<int>(a.size()) != n) throw ConfigError(pp + "/A", "expected an n x n matrix");
      for (int r = 0; r < n; ++r) {
        const auto row = as_vector(a[r], pp + "/A/" + std::to_string(r));
        if (static_cast<int>(row.size()) != n) throw ConfigError(pp + "/A/" + std::to_string(r), "row has wrong length");
        for (int c = 0; c < n; ++c) A(r, c) = row[c];
      }
    }
    if (params.contains("b")) {
      const auto bv = as_vector(params["b"], pp + "/b");
      if (static_cast<int>(bv.size()) != n) throw ConfigError(pp + "/b", "wrong length");
      for (int k = 0; k < n; ++k) b[k] = bv[k];
    }
    e = wrap(pp, [&] { return make_quadratic(A, b); });
  } else if (kind == "convex_quartic") {
    only_keys(params, {}, pp);
    e = make_convex_quartic(n);
  } else if (kind == "double_well") {
    only_keys(params, {}, pp);
    e = make_double_well(n);
  } else if (kind == "discrete_dirichlet") {
    only_keys(params, {"p", "h", "reaction"}, pp);
    const double p = opt_number(params, "p", 2.0, pp);
    const double h = opt_number(params, "h", 1.0 / (n + 1), pp);
    std::vector<double> reaction;
    if (params.contains("reaction")) reaction = as_vector(params["reaction"], pp + "/reaction");
    e = wrap(pp, [&] { return make_discrete_dirichlet(p, h, reaction, n); });
  } else if (kind == "quantile_entropy") {
    only_keys(params, {"v2", "v1"}, pp);
    const double v2 = opt_number(params, "v2", 1.0, pp);
    const double v1 = opt_number(params, "v1", 0.0, pp);
    e = wrap(pp, [&] { return make_quantile_entropy(v2, v1, n); });
  } else {
    throw ConfigError(ptr + "/kind", "unknown energy kind '" + kind + "'");
  }
  if (j.contains("lambda")) {
    if (j["lambda"].is_null()) e.lambda.reset();
    else e.lambda = as_number(j["lambda"], ptr + "/lambda");
  }
  if (j.contains("coercivity")) {
    const json& c = j["coercivity"];
    const std::string cp = ptr + "/coercivity";
    only_keys(c, {"A", "B", "u_star"}, cp);
    e.coercivity.A = opt_number(c, "A", e.coercivity.A, cp);
    e.coercivity.B = opt_number(c, "B", e.coercivity.B, cp);
    if (c.contains("u_star")) e.coercivity.u_star = as_vector(c["u_star"], cp + "/u_star");
  }
  wrap(ptr, [&] {
    check_compatible(e, space);
    return 0;
  });
  return e;
}

WedProblem ExperimentConfig::problem(std::size_t i) const {
  const double eps = eps_list.at(i);
  const Horizon hz = resolve_horizon(T_obs, N, eps, grid_mode);
  WedProblem pb{eps, hz.T, hz.N, grid_mode, space, energy, x_bar_point()};
  pb.solver = solver;
  pb.grad_tol = grad_tol;
  pb.max_iter = max_iter;
  pb.preconditioning = preconditioning;
  return pb;
}

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("", "config must be a JSON object");
  static const std::vector<std::string> known{
      "space", "energy", "x_bar", "epsilon", "eps_list", "T", "N", "grid_mode", "solver",
      "preconditioner", "grad_tol", "max_iter", "value", "suites", "output_dir",
      "cache_capacity", "probe_seed", "jobs", "checks"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw ConfigError("/" + it.key(), "unknown key");
  ExperimentConfig c;
  c.source = j;
  c.space = parse_space(require(j, "space", ""));
  c.energy = parse_energy(require(j, "energy", ""), c.space);
  c.x_bar = parse_point(require(j, "x_bar", ""), c.space, "/x_bar");

  if (j.contains("eps_list")) {
    c.eps_list = as_vector(j["eps_list"], "/eps_list");
    if (c.eps_list.empty()) throw ConfigError("/eps_list", "must not be empty");
  } else {
    c.eps_list = {as_number(require(j, "epsilon", ""), "/epsilon")};
  }
  for (std::size_t k = 0; k < c.eps_list.size(); ++k) {
    const std::string p = j.contains("eps_list") ? "/eps_list/" + std::to_string(k) : "/epsilon";
    if (!(c.eps_list[k] > 0.0)) throw ConfigError(p, "epsilon must be positive");
    if (k > 0 && !(c.eps_list[k] < c.eps_list[k - 1])) throw ConfigError(p, "eps_list must be strictly decreasing");
    if (1.0 / (16.0 * c.eps_list[k]) < c.energy.coercivity.B)
      throw ConfigError(p, "violates 1/(16 eps) >= B of the energy");
  }
  c.T_obs = opt_number(j, "T", c.T_obs, "");
  if (!(c.T_obs > 0.0)) throw ConfigError("/T", "must be positive");
  c.N = opt_int(j, "N", c.N, "");
  if (c.N < 2) throw ConfigError("/N", "must be at least 2");
  if (j.contains("grid_mode")) c.grid_mode = parse_grid(j["grid_mode"], "/grid_mode");
  if (j.contains("solver")) c.solver = parse_solver(j["solver"], "/solver");
  if (j.contains("preconditioner")) c.preconditioning = parse_precond(j["preconditioner"], "/preconditioner");
  c.grad_tol = opt_number(j, "grad_tol", c.grad_tol, "");
  if (!(c.grad_tol > 0.0)) throw ConfigError("/grad_tol", "must be positive");
  c.max_iter = opt_int(j, "max_iter", c.max_iter, "");
  if (c.max_iter < 1) throw ConfigError("/max_iter", "must be positive");
  if (c.solver == Solver::euler_lagrange && !c.space.hilbertian())
    throw ConfigError("/solver", "euler_lagrange needs a Hilbertian space");

  if (j.contains("value")) {
    const json& v = j["value"];
    only_keys(v, {"N", "horizon_factor", "grid_mode", "solver"}, "/value");
    c.value.N = opt_int(v, "N", c.value.N, "/value");
    c.value.horizon_factor = opt_number(v, "horizon_factor", c.value.horizon_factor, "/value");
    if (v.contains("grid_mode")) c.value.grid_mode = parse_grid(v["grid_mode"], "/value/grid_mode");
    if (v.contains("solver")) c.value.solver = parse_solver(v["solver"], "/value/solver");
    if (c.value.N < 2) throw ConfigError("/value/N", "must be at least 2");
  }
  c.value.grad_tol = c.grad_tol;
  c.value.max_iter = c.max_iter;
  c.value.preconditioning = c.preconditioning;

  if (j.contains("suites")) {
    const json& s = j["suites"];
    if (!s.is_array()) throw ConfigError("/suites", "expected an array of suite names");
    for (std::size_t k = 0; k < s.size(); ++k) {
      const std::string name = as_string(s[k], "/suites/" + std::to_string(k));
      if (std::find(suite_names().begin(), suite_names().end(), name) == suite_names().end())
        throw ConfigError("/suites/" + std::to_string(k), "unknown suite '" + name + "'");
      c.suites.push_back(name);
    }
  }
  if (j.contains("output_dir")) c.output_dir = as_string(j["output_dir"], "/output_dir");
  if (j.contains("cache_capacity")) {
    const int cap = as_int(j["cache_capacity"], "/cache_capacity");
    if (cap < 0) throw ConfigError("/cache_capacity", "must be nonnegative");
    c.cache_capacity = static_cast<std::size_t>(cap);
  }
  if (j.contains("probe_seed")) {
    if (!j["probe_seed"].is_number_unsigned()) throw ConfigError("/probe_seed", "expected a nonnegative integer");
    c.probe_seed = j["probe_seed"].get<std::uint64_t>();
  }
  c.jobs = j.contains("jobs") ? as_int(j["jobs"], "/jobs") : default_jobs();
  if (c.jobs < 1) throw ConfigError("/jobs", "must be positive");
  c.value.jobs = c.jobs;

  SuiteSettings& st = c.settings;
  st.probe.seed = c.probe_seed;
  if (j.contains("checks")) {
    const json& ch = j["checks"];
    const std::string cp = "/checks";
    only_keys(ch, {"dpp_horizons", "points", "yosida_points", "probe_h0", "probe_levels",
                   "probe_random_directions", "lambda_prime", "spectral_samples", "spectral_cells",
                   "witness_n", "convergence_cells_per_unit", "mm_tau", "mm_steps",
                   "finsler_target", "finsler_cells"},
              cp);
    if (ch.contains("dpp_horizons")) st.dpp_horizons_eps = as_vector(ch["dpp_horizons"], cp + "/dpp_horizons");
    if (ch.contains("points")) {
      const json& pts = ch["points"];
      const std::string pp = cp + "/points";
      if (pts.is_object()) {
        const double from = as_number(require(pts, "from", pp), pp + "/from");
        const double to = as_number(require(pts, "to", pp), pp + "/to");
        const int count = as_int(require(pts, "count", pp), pp + "/count");
        if (c.space.dim() != 1) throw ConfigError(pp, "a linspace needs a 1-D space");
        if (count < 1) throw ConfigError(pp + "/count", "must be positive");
        for (int k = 0; k < count; ++k)
          st.points.push_back({count == 1 ? from : from + (to - from) * k / (count - 1)});
      } else if (pts.is_array()) {
        for (std::size_t k = 0; k < pts.size(); ++k)
          st.points.push_back(parse_point(pts[k], c.space, pp + "/" + std::to_string(k)));
      } else {
        throw ConfigError(pp, "expected an array of points or {from, to, count}");
      }
    }
    st.yosida_points = opt_int(ch, "yosida_points", st.yosida_points, cp);
    st.probe.h0 = opt_number(ch, "probe_h0", st.probe.h0, cp);
    st.probe.levels = opt_int(ch, "probe_levels", st.probe.levels, cp);
    st.probe.random_directions = opt_int(ch, "probe_random_directions", st.probe.random_directions, cp);
    if (ch.contains("lambda_prime")) st.lambda_prime = as_number(ch["lambda_prime"], cp + "/lambda_prime");
    st.spectral_samples = opt_int(ch, "spectral_samples", st.spectral_samples, cp);
    st.spectral_cells = opt_int(ch, "spectral_cells", st.spectral_cells, cp);
    st.witness_n = opt_int(ch, "witness_n", st.witness_n, cp);
    st.convergence_cells_per_unit =
        opt_number(ch, "convergence_cells_per_unit", st.convergence_cells_per_unit, cp);
    st.mm_tau = opt_number(ch, "mm_tau", st.mm_tau, cp);
    st.mm_steps = opt_int(ch, "mm_steps", st.mm_steps, cp);
    if (ch.contains("finsler_target"))
      st.finsler_target = parse_point(ch["finsler_target"], c.space, cp + "/finsler_target");
    st.finsler_cells = opt_int(ch, "finsler_cells", st.finsler_cells, cp);
    if (!(st.mm_tau > 0.0)) throw ConfigError(cp + "/mm_tau", "must be positive");
    if (st.mm_steps < 1) throw ConfigError(cp + "/mm_steps", "must be positive");
    if (st.probe.levels < 1) throw ConfigError(cp + "/probe_levels", "must be positive");
  }
  if (st.points.empty()) st.points.push_back(c.x_bar);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(j);
}

}  // namespace wed
