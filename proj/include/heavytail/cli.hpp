#pragma once

#include "heavytail/results_io.hpp"
#include "heavytail/simlab.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace heavytail::cli {

enum ExitCode : int { kOk = 0, kValidation = 2, kNumerical = 3 };

struct RunOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_path;  // empty or "-" writes to stdout
  OutputFormat format = OutputFormat::csv;
  unsigned threads = 1;
  bool timings = false;
  bool full_scale = false;
};

struct CalibrateOptions {
  std::string data_path;
  std::string out_path;
  OutputFormat format = OutputFormat::csv;
  std::string score = "gaussian";
  double target_factor = kDefaultTargetFactor;
  std::optional<double> target1;
  std::optional<double> target2;
  unsigned threads = 1;
};

/// Strict loaders: unknown keys and out-of-range values raise ConfigError
/// naming `source` and the offending field.
McPlan mc_plan_from_json(const nlohmann::json& j, const std::string& source);
VicmPlan vicm_plan_from_json(const nlohmann::json& j, const std::string& source);
nlohmann::json to_json(const McPlan& plan);
nlohmann::json to_json(const VicmPlan& plan);

nlohmann::json load_json_file(const std::string& path);

int cmd_mc_experiment(const RunOptions& opts, std::ostream& err);
int cmd_vicm_experiment(const RunOptions& opts, std::ostream& err);
int cmd_calibrate(const CalibrateOptions& opts, std::ostream& err);

/// Parses argv and dispatches to a subcommand.
int run(int argc, const char* const* argv);

}  // namespace heavytail::cli
