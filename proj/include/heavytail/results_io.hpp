#pragma once

#include "heavytail/simlab.hpp"
#include "heavytail/transforms.hpp"
#include "heavytail/vicm_data.hpp"

#include <json.hpp>

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace heavytail {

inline constexpr const char* kResultsSchema = "heavytail-results/1";
inline constexpr const char* kLevelsSchema = "heavytail-levels/1";

enum class OutputFormat { csv, json_lines };

OutputFormat parse_format(std::string_view text);
const char* to_string(OutputFormat format);

/// Shortest-round-trip is not stable across libraries; files use 17
/// significant digits.
std::string format_double(double v);

/// Means, slope fits and the robust-vs-standard table as one JSON object.
nlohmann::json summary_json(const ExperimentOutput& output);

/// Writes a self-describing result file: a header carrying `header` (the
/// resolved configuration and seed), one line per record, then the summary.
/// Wall times are written only when `include_timings` is set, so reruns with
/// the same configuration produce byte-identical files.
void write_results(std::ostream& out, OutputFormat format, const nlohmann::json& header,
                   const ExperimentOutput& output, bool include_timings);

struct ResultFile {
  std::string schema;
  OutputFormat format = OutputFormat::csv;
  nlohmann::json header;
  std::vector<ExperimentRecord> records;
  nlohmann::json summary;
};

/// Parses either format back; throws DataError on malformed input.
ResultFile read_results(std::istream& in);

/// Calibration input: header line "d1=<int> d2=<int>", then one sample per
/// line: y, d1 x-values, d2 z-values, whitespace-separated.
struct VicmDataFile {
  Eigen::Index d1 = 0;
  Eigen::Index d2 = 0;
  std::vector<VicmSample> samples;
};

VicmDataFile read_vicm_data(std::istream& in);
void write_vicm_data(std::ostream& out, std::span<const VicmSample> samples);

/// Truncation-level file: one row per cell of gamma1 and gamma2 with its
/// calibration residual and saturation flag.
void write_levels(std::ostream& out, OutputFormat format, const nlohmann::json& header,
                  const VicmLevels& levels);

}  // namespace heavytail
