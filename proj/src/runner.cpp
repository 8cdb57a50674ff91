#include "wed/runner.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "wed/output.hpp"
#include "wed/parallel.hpp"

namespace wed {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

IdentityReport normalized(std::string name) {
  IdentityReport r;
  r.name = std::move(name);
  r.tolerance = 1.0;
  return r;
}

IdentityReport spectral_suite(const ExperimentConfig& c) {
  const SuiteSettings& st = c.settings;
  IdentityReport rep{"spectral"};
  rep.tolerance = 1e-12;
  std::mt19937_64 rng(c.probe_seed);
  std::normal_distribution<double> gauss;
  std::size_t violations = 0;
  double worst_ratio = 0.0;
  for (int s = 0; s < st.spectral_samples; ++s) {
    const double eps = c.eps_list[s % c.eps_list.size()];
    const TimeGrid grid = uniform_grid(20.0 * eps, st.spectral_cells);
    std::vector<double> w(grid.nodes.size(), 0.0);
    for (std::size_t i = 1; i < w.size(); ++i) w[i] = w[i - 1] + gauss(rng) * std::sqrt(grid.step(static_cast<int>(i) - 1));
    const SpectralResult r = spectral_check(grid, w, eps);
    const double viol = r.lhs > 0.0 ? std::max(0.0, r.rhs - r.lhs) / r.lhs : 0.0;
    if (viol > rep.tolerance) ++violations;
    worst_ratio = std::max(worst_ratio, r.ratio);
    rep.residuals.push_back(viol);
  }
  // near-extremal family g_n(t) e^{t/(2 eps)} with eps = 1
  const int n = st.witness_n;
  const TimeGrid grid = uniform_grid(4.0 * n, 100000);
  std::vector<double> w(grid.nodes.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double t = grid.nodes[i];
    w[i] = std::max(0.0, std::min(1.0, n - std::abs(t - n))) * std::exp(0.5 * t);
  }
  const SpectralResult wr = spectral_check(grid, w, 1.0);
  rep.residuals.push_back(std::max(0.0, 0.9 - wr.ratio));
  rep.details = {{"samples", static_cast<double>(st.spectral_samples)},
                 {"violations", static_cast<double>(violations)},
                 {"max_random_ratio", worst_ratio},
                 {"witness_ratio", wr.ratio}};
  rep.finish();
  return rep;
}

ConvergenceTable convergence_table(const ExperimentConfig& c) {
  ConvergenceOptions co;
  co.cells_per_unit = c.settings.convergence_cells_per_unit;
  co.solver = c.solver;
  co.grad_tol = c.grad_tol;
  co.max_iter = c.max_iter;
  co.jobs = c.jobs;
  return convergence_study(c.energy, c.space, c.x_bar_point(), c.eps_list, c.T_obs, co);
}

// sup error may grow by at most 10% per step; lsc residual at the finest eps
IdentityReport convergence_report(const ConvergenceTable& t) {
  IdentityReport rep = normalized("convergence");
  for (std::size_t k = 1; k < t.rows.size(); ++k)
    rep.residuals.push_back(std::max(0.0, t.rows[k].sup_err - t.rows[k - 1].sup_err) /
                            (0.1 * t.rows[k - 1].sup_err));
  rep.residuals.push_back(t.rows.back().lsc_residual / 5e-2);
  rep.details.emplace_back("fitted_C", t.fitted_C);
  for (const auto& r : t.rows) {
    std::ostringstream os;
    os << "sup_err_eps_" << r.epsilon;
    rep.details.emplace_back(os.str(), r.sup_err);
  }
  rep.finish();
  return rep;
}

}  // namespace

IdentityReport run_suite(const ExperimentConfig& c, const std::string& name, ValueCache* cache) {
  const SuiteSettings& st = c.settings;
  const double eps = c.eps_list.front();
  const Point x = c.x_bar_point();
  std::vector<Point> points;
  for (const auto& p : st.points) points.emplace_back(c.space, p);
  if (points.empty()) points.push_back(x);

  if (name == "spectral") return spectral_suite(c);
  if (name == "inner") {
    const WedSolution sol = solve(c.problem());
    const InnerVariationReport iv = check_inner_variation(sol, c.energy);
    IdentityReport rep = normalized("inner");
    const double scale = std::max(iv.speed_scale, 1e-300);
    for (double r : iv.residuals) rep.residuals.push_back(std::abs(r) / scale / 5e-2);
    rep.residuals.push_back(iv.boundary_residual / 1e-3);
    rep.details = {{"max_residual_over_speed2", iv.max_residual / scale},
                   {"boundary_residual", iv.boundary_residual}};
    rep.finish();
    return rep;
  }
  if (name == "dpp") {
    const ValueSample s = value_function(c.energy, c.space, x, eps, c.value, cache);
    std::vector<double> horizons;
    for (double k : st.dpp_horizons_eps) horizons.push_back(k * eps);
    return check_dpp(s, c.energy, horizons, c.value, cache);
  }
  if (name == "fundamental") return check_fundamental_identity(solve(c.problem()), c.energy);
  if (name == "monotone") {
    std::vector<double> eps_list = c.eps_list;
    if (eps_list.size() < 2) eps_list = {eps, eps / 2, eps / 4, eps / 8};
    return check_eps_monotonicity(c.energy, c.space, points, eps_list, c.value, cache);
  }
  if (name == "yosida") {
    IdentityReport rep{"yosida"};
    rep.tolerance = 0.0;
    double min_margin = std::numeric_limits<double>::infinity();
    for (const Point& p : points)
      for (double e : c.eps_list) {
        const IdentityReport r = check_yosida_bound(c.energy, c.space, p, e, c.value, st.yosida_points, cache);
        rep.residuals.insert(rep.residuals.end(), r.residuals.begin(), r.residuals.end());
        min_margin = std::min(min_margin, r.detail("margin"));
      }
    rep.details = {{"min_margin", min_margin}};
    rep.finish();
    return rep;
  }
  if (name == "hj") return check_hj(c.energy, c.space, x, eps, st.probe, c.value, cache);
  if (name == "lambda") {
    if (!c.energy.lambda) throw InvalidInput("lambda suite needs an energy with lambda set");
    LambdaOptions lo;
    if (st.lambda_prime) lo.lambda_prime_factor = *st.lambda_prime / *c.energy.lambda;
    const WedProblem pb = c.problem();
    return lambda_diagnostics(solve(pb), c.energy, *c.energy.lambda, lo);
  }
  if (name == "convergence") return convergence_report(convergence_table(c));
  if (name == "finsler") {
    if (!st.finsler_target) throw InvalidInput("finsler suite needs checks.finsler_target");
    FinslerOptions fo;
    fo.cells = st.finsler_cells;
    const FinslerResult r = finsler_distance(c.space, finsler_weight(c.energy), x,
                                             Point(c.space, *st.finsler_target), fo);
    IdentityReport rep = normalized("finsler");
    rep.residuals.push_back(std::max(0.0, r.base_distance - r.distance) / (1e-9 * (1.0 + r.base_distance)));
    const double gap = r.distance > 0.0 ? std::abs(r.product_form - r.distance) / r.distance : 0.0;
    rep.residuals.push_back(gap / 1e-3);
    rep.details = {{"distance", r.distance}, {"product_form", r.product_form},
                   {"base_distance", r.base_distance}, {"horizon", r.horizon}};
    rep.finish();
    return rep;
  }
  throw InvalidInput("unknown suite '" + name + "'");
}

int run(ExperimentConfig c, const RunOptions& o) {
  if (o.jobs) {
    if (*o.jobs < 1) throw InvalidInput("--jobs must be positive");
    c.jobs = *o.jobs;
    c.value.jobs = *o.jobs;
  }
  const fs::path out = o.out_dir ? fs::path(*o.out_dir) : fs::path(c.output_dir);
  fs::create_directories(out);
  ValueCache cache(c.cache_capacity);
  json manifest{{"tool", "wedcli"}, {"version", kToolVersion}, {"command", o.command},
                {"config", c.source}, {"probe_seed", c.probe_seed}, {"jobs", c.jobs},
                {"started", timestamp()}};
  json tasks = json::array();
  json files = json::array();
  json summary = json::object();
  bool all_pass = true;

  auto log = [&](const std::string& msg) {
    if (!o.quiet) std::cerr << msg << std::endl;
  };
  auto timed = [&](const std::string& name, auto&& fn) {
    log("[wedcli] " + name);
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    tasks.push_back({{"task", name}, {"wall_s", wall}});
  };
  auto add_file = [&](const fs::path& rel) { files.push_back(rel.generic_string()); };

  const bool all = o.command == "all";
  if (o.command == "solve" || all) {
    timed("solve", [&] {
      const WedSolution sol = solve(c.problem());
      const std::vector<double> V = value_along(sol);
      const IdentityReport fund = check_fundamental_identity(sol, c.energy);
      const InnerVariationReport iv = check_inner_variation(sol, c.energy);
      write_trajectory_csv(out / "solve" / "trajectory.csv", sol, V, fund.residuals, iv.residuals);
      json report{{"objective", sol.objective},
                  {"iterations", sol.iterations},
                  {"gradient_norm", sol.gradient_norm},
                  {"converged", sol.converged},
                  {"solver", to_string(sol.solver)},
                  {"epsilon", sol.epsilon},
                  {"T", sol.trajectory.grid().horizon()},
                  {"N", sol.trajectory.cells()},
                  {"residuals",
                   {{"inner_variation", iv.max_residual},
                    {"boundary_identity", iv.boundary_residual},
                    {"fundamental", fund.max_residual}}}};
      write_json(out / "solve" / "report.json", report);
      add_file("solve/trajectory.csv");
      add_file("solve/report.json");
    });
  }
  if (o.command == "value" || all) {
    timed("value", [&] {
      auto samples = ordered_parallel_map(c.eps_list, c.jobs, [&](double e) {
        return value_function(c.energy, c.space, c.x_bar_point(), e, c.value, &cache);
      });
      std::vector<std::string> header;
      for (int k = 0; k < c.space.dim(); ++k) header.push_back("x" + std::to_string(k));
      for (const char* h : {"epsilon", "V", "G", "phi"}) header.push_back(h);
      std::vector<std::vector<double>> rows;
      for (const auto& s : samples) {
        std::vector<double> r = s.x.vec();
        r.insert(r.end(), {s.epsilon, s.V, s.G, s.phi});
        rows.push_back(std::move(r));
      }
      write_csv(out / "value.csv", header, rows);
      add_file("value.csv");
    });
  }
  if (o.command == "sweep") {
    timed("sweep", [&] {
      std::vector<std::pair<std::size_t, double>> jobs;
      for (std::size_t i = 0; i < c.settings.points.size(); ++i)
        for (double e : c.eps_list) jobs.emplace_back(i, e);
      auto samples = ordered_parallel_map(jobs, c.jobs, [&](const auto& je) {
        return value_function(c.energy, c.space, Point(c.space, c.settings.points[je.first]),
                              je.second, c.value, &cache);
      });
      std::vector<std::string> header;
      for (int k = 0; k < c.space.dim(); ++k) header.push_back("x" + std::to_string(k));
      for (const char* h : {"epsilon", "V", "G", "phi"}) header.push_back(h);
      std::vector<std::vector<double>> rows;
      for (const auto& s : samples) {
        std::vector<double> r = s.x.vec();
        r.insert(r.end(), {s.epsilon, s.V, s.G, s.phi});
        rows.push_back(std::move(r));
      }
      write_csv(out / "sweep.csv", header, rows);
      add_file("sweep.csv");
    });
  }
  if (o.command == "check" || all) {
    std::vector<std::string> suites;
    if (o.suite) suites = {*o.suite};
    else if (!c.suites.empty()) suites = c.suites;
    else if (o.command == "check") suites = suite_names();
    for (const auto& s : suites)
      if (std::find(suite_names().begin(), suite_names().end(), s) == suite_names().end())
        throw InvalidInput("unknown suite '" + s + "'");
    for (const auto& s : suites) {
      timed("check:" + s, [&] {
        std::optional<ConvergenceTable> table;
        if (s == "convergence") table = convergence_table(c);
        const IdentityReport rep = table ? convergence_report(*table) : run_suite(c, s, &cache);
        const fs::path rfile = fs::path("reports") / (s + "_residuals.csv");
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < rep.residuals.size(); ++i)
          rows.push_back({static_cast<double>(i), rep.residuals[i]});
        write_csv(out / rfile, {"index", "residual"}, rows);
        write_json(out / "reports" / (s + ".json"), report_json(rep, rfile.generic_string()));
        if (table) {
          const ConvergenceTable& t = *table;
          std::vector<std::vector<double>> crow;
          for (const auto& r : t.rows) crow.push_back({r.epsilon, r.sup_err, r.lsc_residual, r.runtime_s});
          write_csv(out / "convergence.csv", {"epsilon", "sup_err", "lsc_residual", "runtime_s"}, crow);
          add_file("convergence.csv");
        }
        add_file(rfile);
        add_file(fs::path("reports") / (s + ".json"));
        summary[s] = rep.pass;
        all_pass = all_pass && rep.pass;
        log("[wedcli]   " + s + (rep.pass ? " PASS" : " FAIL") + " max_residual=" +
            format_double(rep.max_residual) + " tolerance=" + format_double(rep.tolerance));
      });
    }
  }
  if (o.command == "mm" || (all && c.source.contains("checks") && c.source["checks"].contains("mm_tau"))) {
    timed("mm", [&] {
      const MMSolution mm = minimizing_movements(c.x_bar_point(), c.settings.mm_tau,
                                                 c.settings.mm_steps, c.energy, c.space);
      std::vector<std::string> header{"k", "t"};
      for (int k = 0; k < c.space.dim(); ++k) header.push_back("x" + std::to_string(k));
      header.push_back("phi");
      header.push_back("movement");
      std::vector<std::vector<double>> rows;
      for (int k = 0; k <= mm.steps(); ++k) {
        std::vector<double> r{static_cast<double>(k), k * mm.tau};
        r.insert(r.end(), mm.iterates[k].begin(), mm.iterates[k].end());
        r.push_back(energy_eval(c.energy, mm.iterates[k]));
        r.push_back(k < mm.steps() ? mm.movement[k] : 0.0);
        rows.push_back(std::move(r));
      }
      write_csv(out / "mm.csv", header, rows);
      add_file("mm.csv");
    });
  }
  if (o.command == "finsler" || (all && c.settings.finsler_target)) {
    timed("finsler", [&] {
      if (!c.settings.finsler_target) throw InvalidInput("finsler needs checks.finsler_target");
      FinslerOptions fo;
      fo.cells = c.settings.finsler_cells;
      const FinslerResult r = finsler_distance(c.space, finsler_weight(c.energy), c.x_bar_point(),
                                               Point(c.space, *c.settings.finsler_target), fo);
      write_json(out / "finsler.json", {{"distance", r.distance},
                                        {"product_form", r.product_form},
                                        {"base_distance", r.base_distance},
                                        {"horizon", r.horizon}});
      add_file("finsler.json");
    });
  }
  static const std::vector<std::string> commands{"solve", "value", "sweep", "check", "mm", "finsler", "all"};
  if (std::find(commands.begin(), commands.end(), o.command) == commands.end())
    throw InvalidInput("unknown command '" + o.command + "'");

  manifest["tasks"] = tasks;
  manifest["files"] = files;
  manifest["summary"] = summary;
  manifest["all_pass"] = all_pass;
  manifest["cache"] = {{"hits", cache.hits()}, {"misses", cache.misses()}};
  manifest["finished"] = timestamp();
  write_json(out / "manifest.json", manifest);
  return all_pass ? 0 : 2;
}

}  // namespace wed
