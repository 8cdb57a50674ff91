#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wed/energy.hpp"
#include "wed/reference.hpp"
#include "wed/space.hpp"
#include "wed/value.hpp"
#include "wed/wed.hpp"

namespace wed {

/// Schema violation at a JSON pointer path such as "/energy/params/A".
class ConfigError : public InvalidInput {
 public:
  ConfigError(const std::string& pointer, const std::string& message)
      : InvalidInput(pointer + ": " + message), pointer_(pointer) {}
  const std::string& pointer() const noexcept { return pointer_; }

 private:
  std::string pointer_;
};

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"spectral", "inner",  "dpp",    "fundamental",
                                              "monotone", "yosida", "hj",     "lambda",
                                              "convergence", "finsler"};
  return names;
}

struct SuiteSettings {
  std::vector<double> dpp_horizons_eps{1.0, 2.0, 5.0};  // multiples of eps
  std::vector<std::vector<double>> points;  // x-grid for sweeps and monotonicity
  int yosida_points = 2000;
  ProbeOptions probe;
  std::optional<double> lambda_prime;
  int spectral_samples = 1000;
  int spectral_cells = 200;
  int witness_n = 50;
  double convergence_cells_per_unit = 1e5;
  double mm_tau = 0.01;
  int mm_steps = 100;
  std::optional<std::vector<double>> finsler_target;
  int finsler_cells = 200;
};

struct ExperimentConfig {
  nlohmann::json source;
  SpaceSpec space = SpaceSpec::euclidean(1);
  EnergySpec energy;
  std::vector<double> x_bar;
  std::vector<double> eps_list;  // strictly decreasing; first entry drives single solves
  double T_obs = 1.0;
  int N = 1000;
  GridMode grid_mode = GridMode::uniform;
  Solver solver = Solver::direct;
  Preconditioning preconditioning = Preconditioning::kinetic;
  double grad_tol = 1e-10;
  int max_iter = 20000;
  ValueOptions value;
  std::vector<std::string> suites;
  std::string output_dir = "out";
  std::size_t cache_capacity = 4096;
  std::uint64_t probe_seed = 20240611;
  int jobs = 1;
  SuiteSettings settings;

  Point x_bar_point() const { return Point(space, x_bar); }
  /// Problem for the i-th epsilon with the horizon rule applied.
  WedProblem problem(std::size_t eps_index = 0) const;
};

SpaceSpec parse_space(const nlohmann::json& j, const std::string& ptr = "/space");
EnergySpec parse_energy(const nlohmann::json& j, const SpaceSpec& space,
                        const std::string& ptr = "/energy");
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

}  // namespace wed
