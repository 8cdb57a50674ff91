#include <iostream>
#include <utility>

#include <CLI11.hpp>

#include "wed/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Weighted energy-dissipation approximation of gradient flows"};
  app.require_subcommand(1);
  std::string config_path;
  wed::RunOptions opts;
  std::string out, suite;
  int jobs = 0;
  std::vector<CLI::Option*> jobs_opts;

  const std::pair<const char*, const char*> commands[] = {
      {"solve", "minimize the WED functional from x_bar"},
      {"value", "value function V_eps(x_bar) per epsilon"},
      {"sweep", "value and proto-slope over the configured points"},
      {"check", "run identity suites"},
      {"mm", "minimizing-movement reference trajectory"},
      {"finsler", "Finsler distance from x_bar to the target"},
      {"all", "everything the config enables"}};
  for (auto [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "experiment config (JSON)")->required();
    sub->add_option("--out", out, "output directory (overrides output_dir)");
    jobs_opts.push_back(sub->add_option("--jobs", jobs, "worker threads"));
    sub->add_flag("--quiet", opts.quiet, "no progress on stderr");
    if (std::string(name) == "check") sub->add_option("--suite", suite, "run a single suite");
  }
  CLI11_PARSE(app, argc, argv);
  opts.command = app.get_subcommands().front()->get_name();
  if (!out.empty()) opts.out_dir = out;
  if (!suite.empty()) opts.suite = suite;
  for (const CLI::Option* o : jobs_opts)
    if (o->count() > 0) opts.jobs = jobs;
  try {
    const wed::ExperimentConfig config = wed::load_config(config_path);
    return wed::run(config, opts);
  } catch (const std::exception& e) {
    std::cerr << "wedcli: error: " << e.what() << std::endl;
    return 1;
  }
}
