#include "heavytail/results_io.hpp"

#include "heavytail/errors.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace heavytail {

using nlohmann::json;

OutputFormat parse_format(std::string_view text) {
  if (text == "csv") {
    return OutputFormat::csv;
  }
  if (text == "json-lines" || text == "jsonl") {
    return OutputFormat::json_lines;
  }
  throw ConfigError("unknown output format '" + std::string(text) +
                    "' (expected csv or json-lines)");
}

const char* to_string(OutputFormat format) {
  return format == OutputFormat::csv ? "csv" : "json-lines";
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

constexpr const char* kCsvColumns = "experiment,estimator,noise,n,replicate,error,converged";

json record_json(const ExperimentRecord& r, bool timings) {
  json j = {{"type", "record"},         {"experiment", r.experiment}, {"estimator", r.estimator},
            {"noise", r.noise},         {"n", r.n},                   {"replicate", r.replicate},
            {"error", r.error},         {"converged", r.converged}};
  if (timings) {
    j["wall_seconds"] = r.wall_seconds;
  }
  return j;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, sep)) {
    out.push_back(field);
  }
  if (!line.empty() && line.back() == sep) {
    out.emplace_back();
  }
  return out;
}

double parse_double(const std::string& s, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw DataError("line " + std::to_string(line) + ": '" + s + "' is not a number");
  }
  return v;
}

std::size_t parse_size(const std::string& s, std::size_t line) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size() || s.front() == '-') {
    throw DataError("line " + std::to_string(line) + ": '" + s + "' is not a count");
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

json summary_json(const ExperimentOutput& output) {
  json means = json::array();
  for (const GroupMean& g : output.means) {
    means.push_back({{"estimator", g.estimator},
                     {"noise", g.noise},
                     {"n", g.n},
                     {"mean_error", g.mean_error},
                     {"replicates", g.replicates},
                     {"non_converged", g.non_converged}});
  }
  json slopes = json::array();
  for (const GroupSlope& s : output.slopes) {
    json entry = {{"estimator", s.estimator}, {"noise", s.noise}};
    if (s.fit) {
      entry["beta0"] = s.fit->intercept;
      entry["beta1"] = s.fit->slope;
      entry["r_squared"] = s.fit->r_squared;
      entry["points"] = s.fit->points;
    } else {
      entry["beta0"] = nullptr;
      entry["beta1"] = nullptr;
      entry["r_squared"] = nullptr;
      entry["note"] = s.note;
    }
    slopes.push_back(std::move(entry));
  }
  // Robust versus standard, per (noise, n).
  std::map<std::pair<std::string, std::size_t>, std::pair<const GroupMean*, const GroupMean*>> pairs;
  std::vector<std::pair<std::string, std::size_t>> order;
  for (const GroupMean& g : output.means) {
    const auto key = std::make_pair(g.noise, g.n);
    if (!pairs.contains(key)) {
      order.push_back(key);
    }
    auto& slot = pairs[key];
    (g.estimator == "robust" ? slot.first : slot.second) = &g;
  }
  json comparison = json::array();
  for (const auto& key : order) {
    const auto& [robust, standard] = pairs[key];
    if (robust == nullptr || standard == nullptr) {
      continue;
    }
    comparison.push_back({{"noise", key.first},
                          {"n", key.second},
                          {"robust", robust->mean_error},
                          {"standard", standard->mean_error},
                          {"robust_better", robust->mean_error < standard->mean_error}});
  }
  return {{"means", means}, {"slopes", slopes}, {"comparison", comparison}};
}

void write_results(std::ostream& out, OutputFormat format, const json& header,
                   const ExperimentOutput& output, bool include_timings) {
  const json summary = summary_json(output);
  if (format == OutputFormat::json_lines) {
    json head = {{"type", "header"}, {"schema", kResultsSchema}, {"timings", include_timings}};
    head["header"] = header;
    out << head.dump() << '\n';
    for (const ExperimentRecord& r : output.records) {
      out << record_json(r, include_timings).dump() << '\n';
    }
    out << json{{"type", "summary"}, {"summary", summary}}.dump() << '\n';
    return;
  }
  out << "# schema: " << kResultsSchema << '\n';
  out << "# header: " << header.dump() << '\n';
  out << kCsvColumns << (include_timings ? ",wall_seconds" : "") << '\n';
  for (const ExperimentRecord& r : output.records) {
    out << r.experiment << ',' << r.estimator << ',' << r.noise << ',' << r.n << ','
        << r.replicate << ',' << format_double(r.error) << ',' << (r.converged ? 1 : 0);
    if (include_timings) {
      out << ',' << format_double(r.wall_seconds);
    }
    out << '\n';
  }
  out << "# summary: " << summary.dump() << '\n';
}

ResultFile read_results(std::istream& in) {
  ResultFile file;
  std::string line;
  std::size_t line_no = 0;
  bool seen_columns = false;
  bool timings = false;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    try {
      if (first && line.front() == '{') {
        file.format = OutputFormat::json_lines;
      }
      first = false;
      if (file.format == OutputFormat::json_lines) {
        const json j = json::parse(line);
        const std::string type = j.at("type").get<std::string>();
        if (type == "header") {
          file.schema = j.at("schema").get<std::string>();
          file.header = j.at("header");
        } else if (type == "record") {
          ExperimentRecord r;
          r.experiment = j.at("experiment").get<std::string>();
          r.estimator = j.at("estimator").get<std::string>();
          r.noise = j.at("noise").get<std::string>();
          r.n = j.at("n").get<std::size_t>();
          r.replicate = j.at("replicate").get<std::size_t>();
          r.error = j.at("error").get<double>();
          r.converged = j.at("converged").get<bool>();
          r.wall_seconds = j.value("wall_seconds", 0.0);
          file.records.push_back(std::move(r));
        } else if (type == "summary") {
          file.summary = j.at("summary");
        } else {
          throw DataError("unknown line type '" + type + "'");
        }
        continue;
      }
      if (line.front() == '#') {
        const auto colon = line.find(": ");
        if (colon == std::string::npos) {
          continue;
        }
        const std::string key = line.substr(2, colon - 2);
        const std::string value = line.substr(colon + 2);
        if (key == "schema") {
          file.schema = value;
        } else if (key == "header") {
          file.header = json::parse(value);
        } else if (key == "summary") {
          file.summary = json::parse(value);
        }
        continue;
      }
      if (!seen_columns) {
        if (line.rfind(kCsvColumns, 0) != 0) {
          throw DataError("unexpected column header '" + line + "'");
        }
        timings = line.size() > std::string(kCsvColumns).size();
        seen_columns = true;
        continue;
      }
      const std::vector<std::string> f = split(line, ',');
      if (f.size() != (timings ? 8u : 7u)) {
        throw DataError("expected " + std::to_string(timings ? 8 : 7) + " fields");
      }
      ExperimentRecord r{f[0], f[1], f[2], parse_size(f[3], line_no), parse_size(f[4], line_no),
                         parse_double(f[5], line_no), 0.0, f[6] == "1"};
      if (timings) {
        r.wall_seconds = parse_double(f[7], line_no);
      }
      file.records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw DataError("result file line " + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("result file line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (file.schema != kResultsSchema) {
    throw DataError("result file: missing or unsupported schema '" + file.schema + "'");
  }
  return file;
}

VicmDataFile read_vicm_data(std::istream& in) {
  VicmDataFile file;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream is(line);
    if (!have_header) {
      std::string a, b;
      if (!(is >> a)) {
        continue;  // leading blank lines
      }
      long long d1 = 0, d2 = 0;
      if (!(is >> b) || std::sscanf(a.c_str(), "d1=%lld", &d1) != 1 ||
          std::sscanf(b.c_str(), "d2=%lld", &d2) != 1 || d1 < 1 || d2 < 1) {
        throw DataError("data file line " + std::to_string(line_no) +
                        ": expected header 'd1=<int> d2=<int>'");
      }
      file.d1 = d1;
      file.d2 = d2;
      have_header = true;
      continue;
    }
    std::vector<double> values;
    std::string token;
    while (is >> token) {
      values.push_back(parse_double(token, line_no));
    }
    if (values.empty()) {
      continue;
    }
    const auto expected = static_cast<std::size_t>(1 + file.d1 + file.d2);
    if (values.size() != expected) {
      throw DataError("data file line " + std::to_string(line_no) + ": expected " +
                      std::to_string(expected) + " values, got " + std::to_string(values.size()));
    }
    VicmSample s;
    s.y = values[0];
    s.x = Eigen::Map<const Vector>(values.data() + 1, file.d1);
    s.z = Eigen::Map<const Vector>(values.data() + 1 + file.d1, file.d2);
    if (!std::isfinite(s.y) || !s.x.allFinite() || !s.z.allFinite()) {
      throw DataError("data file line " + std::to_string(line_no) + ": non-finite value");
    }
    file.samples.push_back(std::move(s));
  }
  if (!have_header) {
    throw DataError("data file is empty");
  }
  if (file.samples.empty()) {
    throw DataError("data file has a header but no samples");
  }
  return file;
}

void write_vicm_data(std::ostream& out, std::span<const VicmSample> samples) {
  if (samples.empty()) {
    throw ParameterError("write_vicm_data: no samples");
  }
  out << "d1=" << samples.front().x.size() << " d2=" << samples.front().z.size() << '\n';
  for (const VicmSample& s : samples) {
    out << format_double(s.y);
    for (double v : s.x) {
      out << ' ' << format_double(v);
    }
    for (double v : s.z) {
      out << ' ' << format_double(v);
    }
    out << '\n';
  }
}

void write_levels(std::ostream& out, OutputFormat format, const json& header,
                  const VicmLevels& levels) {
  struct Cell {
    const char* matrix;
    Eigen::Index row, col;
    double tau, residual;
    bool saturated;
  };
  std::vector<Cell> cells;
  for (Eigen::Index j = 0; j < levels.gamma1.rows(); ++j) {
    for (Eigen::Index k = 0; k < levels.gamma1.cols(); ++k) {
      cells.push_back({"gamma1", j, k, levels.gamma1(j, k), levels.residual1(j, k),
                       levels.saturated1(j, k)});
    }
  }
  for (Eigen::Index j = 0; j < levels.gamma2.rows(); ++j) {
    for (Eigen::Index k = 0; k < levels.gamma2.cols(); ++k) {
      cells.push_back({"gamma2", j, k, levels.gamma2(j, k), levels.residual2(j, k),
                       levels.saturated2(j, k)});
    }
  }
  if (format == OutputFormat::json_lines) {
    json head = {{"type", "header"}, {"schema", kLevelsSchema}};
    head["header"] = header;
    out << head.dump() << '\n';
    for (const Cell& c : cells) {
      out << json{{"type", "level"},   {"matrix", c.matrix},     {"row", c.row},
                  {"col", c.col},      {"tau", c.tau},           {"residual", c.residual},
                  {"saturated", c.saturated}}
                 .dump()
          << '\n';
    }
    return;
  }
  out << "# schema: " << kLevelsSchema << '\n';
  out << "# header: " << header.dump() << '\n';
  out << "matrix,row,col,tau,residual,saturated\n";
  for (const Cell& c : cells) {
    out << c.matrix << ',' << c.row << ',' << c.col << ',' << format_double(c.tau) << ','
        << format_double(c.residual) << ',' << (c.saturated ? 1 : 0) << '\n';
  }
}

}  // namespace heavytail
