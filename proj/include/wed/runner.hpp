#pragma once

#include <optional>
#include <string>

#include "wed/config.hpp"

namespace wed {

inline constexpr const char* kToolVersion = "1.0.0";

struct RunOptions {
  std::string command = "all";  // solve, value, sweep, check, mm, finsler, all
  std::optional<std::string> suite;
  std::optional<std::string> out_dir;
  std::optional<int> jobs;
  bool quiet = false;
};

/// Runs a command and writes its artifacts plus manifest.json. Returns 0 when
/// every selected suite passes and 2 otherwise; execution errors propagate.
int run(ExperimentConfig config, const RunOptions& options);

/// Runs a single identity suite without writing files.
IdentityReport run_suite(const ExperimentConfig& config, const std::string& name,
                         ValueCache* cache = nullptr);

}  // namespace wed
