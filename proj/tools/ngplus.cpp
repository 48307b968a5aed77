// ngplus <task> --config <path> [--seed N] [--out DIR]
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "ngplus/config.hpp"
#include "ngplus/tasks.hpp"

int main(int argc, char** argv) {
  CLI::App app{"NG+ optimizer experiments"};
  std::string task;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  app.add_option("task", task, "train | gfim-study | regret | gradcheck | convergence")->required();
  app.add_option("--config", config_path, "config file (key = value with [section] headers)");
  app.add_option("--seed", seed, "overrides the config seed");
  app.add_option("--out", out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    ngplus::RunConfig cfg = config_path.empty() ? ngplus::RunConfig{} : ngplus::load_config(config_path);
    cfg.task = ngplus::parse_task(task);
    if (seed) cfg.seed = *seed;
    if (out) cfg.output_dir = *out;
    const int rc = ngplus::run_task(cfg);
    std::cout << (rc == 0 ? "PASS" : "FAIL") << " (see " << cfg.output_dir << "/summary.txt)\n";
    return rc;
  } catch (const std::exception& e) {
    std::cerr << "ngplus: " << e.what() << '\n';
    return 2;
  }
}
