// fv-sim: command-line front end of the particle-system harness.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "fvsim/errors.hpp"
#include "fvsim/harness.hpp"

namespace {

std::size_t default_workers() {
  if (const char* env = std::getenv("FV_SIM_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return 1;
}

template <class T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    if (item.empty()) continue;
    std::istringstream cell(item);
    T value{};
    if (!(cell >> value) || !cell.eof()) throw fvsim::ConfigError("cannot parse list entry '" + item + "'");
    out.push_back(value);
  }
  return out;
}

void emit(const nlohmann::json& report, const std::string& path) {
  const std::string text = report.dump(2) + "\n";
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw fvsim::ConfigError("cannot open output '" + path + "'");
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fleming-Viot particle system simulator"};
  app.require_subcommand(1);

  std::string config_path, out_path, n_text, dt_text;
  std::size_t workers = default_workers();

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON run configuration")->required();
    cmd->add_option("--workers", workers, "Concurrent replications (default: FV_SIM_WORKERS or 1)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--out", out_path, "Report path (default: outputs.report, else stdout)");
  };
  auto* run_cmd = app.add_subcommand("run", "Run seeded replications and report the estimators");
  auto* sweep_cmd = app.add_subcommand("sweep", "Error of the mass-loss estimator across particle counts");
  auto* dt_cmd = app.add_subcommand("dt-study", "Estimates across decreasing time steps");
  auto* hyp_cmd = app.add_subcommand("check-hypothesis", "Statistical check of the rebirth-measure conditions");
  for (auto* cmd : {run_cmd, sweep_cmd, dt_cmd, hyp_cmd}) add_common(cmd);
  sweep_cmd->add_option("--n", n_text, "Comma-separated particle counts")->required();
  dt_cmd->add_option("--dt", dt_text, "Comma-separated decreasing time steps")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const fvsim::RunConfig config = fvsim::load_run_config(config_path);
    const std::string target = out_path.empty() ? config.outputs.report : out_path;
    int code = 0;
    if (*run_cmd) {
      const auto report = fvsim::run(config, workers);
      fvsim::write_first_replication_outputs(config);
      emit(fvsim::report_json(config, report), target);
      code = report.exit_code();
    } else if (*sweep_cmd) {
      const auto result = fvsim::sweep(config, parse_list<std::size_t>(n_text), workers);
      emit(fvsim::report_json(config, result), target);
      code = result.exit_code;
    } else if (*dt_cmd) {
      const auto study = fvsim::dt_study(config, parse_list<double>(dt_text), workers);
      emit(fvsim::report_json(config, study), target);
      code = study.exit_code;
    } else {
      emit(fvsim::report_json(config, fvsim::check_hypothesis(config)), target);
    }
    return code;
  } catch (const fvsim::Error& e) {
    std::cerr << "fv-sim: " << e.what() << '\n';
    return 1;
  }
}
