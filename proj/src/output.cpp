#include "wed/output.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

namespace wed {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path.string());
  return out;
}

void put_row(std::ofstream& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out << ',';
    out << cells[i];
  }
  out << '\n';
}

}  // namespace

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  for (const auto& r : rows)
    if (r.size() != header.size()) throw InvalidInput("csv row width differs from header: " + path.string());
  auto out = open_out(path);
  put_row(out, header);
  for (const auto& r : rows) {
    std::vector<std::string> cells;
    for (double v : r) cells.push_back(format_double(v));
    put_row(out, cells);
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

void write_trajectory_csv(const std::filesystem::path& path, const WedSolution& sol,
                          const std::vector<double>& V, const std::vector<double>& resid_fund,
                          const std::vector<double>& resid_inner) {
  const Trajectory& tr = sol.trajectory;
  const int N = tr.cells(), d = tr.dim();
  std::vector<std::string> header{"t"};
  for (int k = 0; k < d; ++k) header.push_back("x" + std::to_string(k));
  for (const char* h : {"speed", "phi", "V", "resid_fund", "resid_inner"}) header.push_back(h);
  auto out = open_out(path);
  put_row(out, header);
  auto cell = [](const std::vector<double>& v, int i) {
    return i < static_cast<int>(v.size()) ? format_double(v[i]) : std::string();
  };
  for (int i = 0; i <= N; ++i) {
    std::vector<std::string> row{format_double(tr.grid().nodes[i])};
    for (double x : tr.at(i)) row.push_back(format_double(x));
    row.push_back(cell(sol.speed, i));
    row.push_back(format_double(sol.phi[i]));
    row.push_back(cell(V, i));
    row.push_back(cell(resid_fund, i));
    row.push_back(cell(resid_inner, i));
    put_row(out, row);
  }
}

nlohmann::json report_json(const IdentityReport& rep, const std::string& residuals_file) {
  nlohmann::json details = nlohmann::json::object();
  for (const auto& [k, v] : rep.details) details[k] = v;
  return {{"identity", rep.name},
          {"max_residual", rep.max_residual},
          {"tolerance", rep.tolerance},
          {"pass", rep.pass},
          {"residuals_file", residuals_file},
          {"details", details}};
}

}  // namespace wed
