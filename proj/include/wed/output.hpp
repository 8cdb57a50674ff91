#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "wed/value.hpp"
#include "wed/wed.hpp"

namespace wed {

/// Shortest decimal string that parses back to the same double.
std::string format_double(double v);

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);

/// Columns t, x0..x{d-1}, speed, phi, V, resid_fund, resid_inner; cell
/// quantities sit on the row of their left node and are empty on the last row.
void write_trajectory_csv(const std::filesystem::path& path, const WedSolution& sol,
                          const std::vector<double>& V, const std::vector<double>& resid_fund,
                          const std::vector<double>& resid_inner);

nlohmann::json report_json(const IdentityReport& rep, const std::string& residuals_file);

}  // namespace wed
