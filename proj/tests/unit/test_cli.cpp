#include "heavytail/cli.hpp"
#include "heavytail/errors.hpp"
#include "heavytail/results_io.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace heavytail;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() /
                       ("heavytail_cli_test_" + std::to_string(std::chrono::steady_clock::now()
                                                                   .time_since_epoch()
                                                                   .count()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string write_file(const std::string& name, const std::string& text) {
  const fs::path p = scratch_dir() / name;
  std::ofstream(p) << text;
  return p.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kTinyVicm = R"({"seed": 3, "d1": 10, "d2": 3, "s": 2, "n_grid": [500], "replicates": 2})";

const char* kNoiseless = R"({
  "seed": 7, "d1": 8, "d2": 8, "rank": 2, "target_vectors": 20,
  "n_grid": [400, 800, 1600], "replicates": 2, "include_standard": false,
  "admm": {"max_iter": 20000, "primal_tol": 1e-10, "dual_tol": 1e-10},
  "noises": [{"nu": 2.0, "scale": 0.0, "tau_scale": 1.0, "lambda_scale": 1e-9, "label": "none"}]
})";

const char* kSmallMc = R"({
  "seed": 11, "d1": 10, "d2": 10, "n_grid": [500, 1000, 2000], "replicates": 2,
  "noises": [{"nu": 1.5, "scale": 0.1}, {"nu": 2.0, "scale": 0.2, "label": "light"}]
})";

cli::RunOptions run_options(const std::string& config, const std::string& out,
                            OutputFormat format = OutputFormat::csv) {
  cli::RunOptions o;
  o.config_path = config;
  o.out_path = out;
  o.format = format;
  return o;
}

ExperimentOutput sample_output() {
  ExperimentOutput o;
  o.records = {{"mc", "robust", "t2/5", 2000, 0, 0.1 + 1e-17, 0.0, true},
               {"mc", "standard", "t2/5", 2000, 0, 1.0 / 3.0, 0.0, false},
               {"mc", "robust", "t2/5", 4000, 1, 6.02214076e-23, 0.0, true}};
  o.means = group_means(o.records);
  return o;
}

}  // namespace

TEST_CASE("double formatting keeps 17 significant digits") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(1.0 / 3.0) == "0.33333333333333331");
  CHECK(std::strtod(format_double(2.0 / 7.0).c_str(), nullptr) == 2.0 / 7.0);
}

TEST_CASE("result files round-trip in both formats") {
  const ExperimentOutput out = sample_output();
  const nlohmann::json header = {{"seed", 5}, {"config", {{"d1", 3}}}};
  for (OutputFormat f : {OutputFormat::csv, OutputFormat::json_lines}) {
    for (bool timings : {false, true}) {
      std::stringstream ss;
      write_results(ss, f, header, out, timings);
      const ResultFile back = read_results(ss);
      CHECK(back.schema == kResultsSchema);
      CHECK(back.format == f);
      CHECK(back.header == header);
      CHECK(back.records == out.records);
      CHECK(back.summary.contains("means"));
    }
  }
}

TEST_CASE("malformed result files are rejected") {
  std::stringstream no_schema("experiment,estimator,noise,n,replicate,error,converged\n");
  CHECK_THROWS_AS(read_results(no_schema), DataError);
  std::stringstream bad_row("# schema: heavytail-results/1\n"
                            "experiment,estimator,noise,n,replicate,error,converged\n"
                            "mc,robust,t2,1,0,abc,1\n");
  CHECK_THROWS_AS(read_results(bad_row), DataError);
}

TEST_CASE("calibration data files") {
  std::stringstream ok("d1=2 d2=1\n1 2 3 4\n-1 0.5 0.25 2\n");
  const VicmDataFile f = read_vicm_data(ok);
  CHECK(f.d1 == 2);
  CHECK(f.d2 == 1);
  REQUIRE(f.samples.size() == 2);
  CHECK(f.samples[1].x(1) == 0.25);
  CHECK(f.samples[1].z(0) == 2.0);

  std::stringstream out;
  write_vicm_data(out, f.samples);
  const VicmDataFile again = read_vicm_data(out);
  CHECK(again.samples[0].y == 1.0);

  std::stringstream empty("");
  CHECK_THROWS_AS(read_vicm_data(empty), DataError);
  std::stringstream short_row("d1=2 d2=1\n1 2 3\n");
  CHECK_THROWS_AS(read_vicm_data(short_row), DataError);
  std::stringstream bad_header("d1=2\n1 2 3\n");
  CHECK_THROWS_AS(read_vicm_data(bad_header), DataError);
}

TEST_CASE("strict configuration parsing") {
  const auto ok = nlohmann::json::parse(kSmallMc);
  const McPlan p = cli::mc_plan_from_json(ok, "small.json");
  CHECK(p.noises.size() == 2);
  CHECK(p.noises[1].name() == "light");
  CHECK(p.seed == 11);
  CHECK(cli::mc_plan_from_json(cli::to_json(p), "round").n_grid == p.n_grid);

  auto expect_error = [](const char* text, bool vicm, const std::string& fragment) {
    try {
      const auto j = nlohmann::json::parse(text);
      if (vicm) {
        cli::vicm_plan_from_json(j, "cfg.json");
      } else {
        cli::mc_plan_from_json(j, "cfg.json");
      }
      FAIL("expected a config error");
    } catch (const ConfigError& e) {
      const std::string what = e.what();
      CHECK(what.find("cfg.json") != std::string::npos);
      CHECK(what.find(fragment) != std::string::npos);
    }
  };
  expect_error(R"({"d1": 10, "bogus": 1})", true, "bogus");
  expect_error(R"({"d1": 10, "d2": 3, "s": 11})", true, "sparsity");
  expect_error(R"({"replicates": 0})", false, "replicates");
  expect_error(R"({"admm": {"rho": -1}})", false, "admm.rho");
  expect_error(R"({"noises": [{"nu": 1.5, "extra": true}]})", false, "noises[0].extra");
  expect_error(R"({"n_grid": [100, -5]})", false, "n_grid[1]");
  expect_error(R"({"z_decay": 1.5})", true, "z_decay");
}

TEST_CASE("mc-experiment command") {
  std::ostringstream err;
  SUBCASE("missing config exits 2") {
    CHECK(cli::cmd_mc_experiment(run_options("/nonexistent/x.json", ""), err) == cli::kValidation);
    CHECK(err.str().find("/nonexistent/x.json") != std::string::npos);
  }
  SUBCASE("noiseless smoke plan reports no slope") {
    const std::string cfg = write_file("noiseless.json", kNoiseless);
    const std::string out = (scratch_dir() / "noiseless.csv").string();
    REQUIRE(cli::cmd_mc_experiment(run_options(cfg, out), err) == cli::kOk);
    std::ifstream in(out);
    const ResultFile f = read_results(in);
    CHECK(f.records.size() == 6);
    CHECK(f.header.at("seed") == 7);
    const auto& slope = f.summary.at("slopes").at(0);
    CHECK(slope.at("beta1").is_null());
    CHECK(slope.at("note") == "errors at tolerance floor");
  }
  SUBCASE("reruns are byte-identical and the seed flag overrides") {
    const std::string cfg = write_file("small.json", kSmallMc);
    for (OutputFormat f : {OutputFormat::csv, OutputFormat::json_lines}) {
      const std::string a = (scratch_dir() / "a.out").string();
      const std::string b = (scratch_dir() / "b.out").string();
      REQUIRE(cli::cmd_mc_experiment(run_options(cfg, a, f), err) == cli::kOk);
      cli::RunOptions ob = run_options(cfg, b, f);
      ob.threads = 2;
      REQUIRE(cli::cmd_mc_experiment(ob, err) == cli::kOk);
      CHECK(slurp(a) == slurp(b));
      std::ifstream in(a);
      const ResultFile parsed = read_results(in);
      CHECK(parsed.records.size() == 2 * 2 * 3 * 2);

      cli::RunOptions oc = run_options(cfg, b, f);
      oc.seed = 12;
      REQUIRE(cli::cmd_mc_experiment(oc, err) == cli::kOk);
      CHECK(slurp(a) != slurp(b));
      std::ifstream in2(b);
      CHECK(read_results(in2).header.at("seed") == 12);
    }
  }
}

TEST_CASE("vicm-experiment command") {
  std::ostringstream err;
  SUBCASE("tiny plan runs quickly and reports fit fields") {
    const std::string cfg = write_file("tiny.json", kTinyVicm);
    const std::string out = (scratch_dir() / "tiny.jsonl").string();
    const auto start = std::chrono::steady_clock::now();
    REQUIRE(cli::cmd_vicm_experiment(run_options(cfg, out, OutputFormat::json_lines), err) ==
            cli::kOk);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(seconds < 10.0);
    std::ifstream in(out);
    const ResultFile f = read_results(in);
    CHECK(f.records.size() == 4);
    const auto& slope = f.summary.at("slopes").at(0);
    CHECK(slope.contains("beta1"));
    CHECK(slope.contains("r_squared"));
    CHECK(f.summary.at("comparison").size() == 1);
  }
  SUBCASE("sparsity above d1 exits 2") {
    const std::string cfg = write_file("bad_s.json", R"({"d1": 10, "d2": 3, "s": 11})");
    CHECK(cli::cmd_vicm_experiment(run_options(cfg, ""), err) == cli::kValidation);
    CHECK(err.str().find("bad_s.json") != std::string::npos);
  }
}

TEST_CASE("calibrate command") {
  std::ostringstream err;
  cli::CalibrateOptions o;
  SUBCASE("constant products give closed-form levels") {
    // y * x_j * z_k = +-3 and z_k z_s = +-1 for every sample.
    std::string text = "d1=2 d2=2\n";
    const int n = 40;
    for (int i = 0; i < n; ++i) {
      text += i % 2 ? "3 1 -1 1 1\n" : "-3 1 1 -1 1\n";
    }
    o.data_path = write_file("const.txt", text);
    o.out_path = (scratch_dir() / "levels.csv").string();
    REQUIRE(cli::cmd_calibrate(o, err) == cli::kOk);
    const CalibrationTargets t = CalibrationTargets::defaults(2, 2);
    std::ifstream in(o.out_path);
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#' || line.rfind("matrix", 0) == 0) continue;
      ++rows;
      std::stringstream ss(line);
      std::string matrix, row, col, tau, residual, saturated;
      std::getline(ss, matrix, ',');
      std::getline(ss, row, ',');
      std::getline(ss, col, ',');
      std::getline(ss, tau, ',');
      std::getline(ss, residual, ',');
      const bool first = matrix == "gamma1";
      const double target = first ? t.cross : t.covariance;
      const double expect = oracle::constant_data_tau(first ? 3.0 : 1.0, n, target);
      CHECK(std::abs(std::stod(tau) - expect) <= 1e-9 * expect);
      CHECK(std::stod(residual) <= 1e-6 * target);
    }
    CHECK(rows == 8);
  }
  SUBCASE("empty file exits 2") {
    o.data_path = write_file("empty.txt", "");
    CHECK(cli::cmd_calibrate(o, err) == cli::kValidation);
  }
  SUBCASE("degenerate column exits 3 and names it") {
    o.data_path = write_file("degenerate.txt", "d1=1 d2=2\n1 1 0 1\n2 1 0 1\n");
    o.out_path = (scratch_dir() / "deg.csv").string();
    CHECK(cli::cmd_calibrate(o, err) == cli::kNumerical);
    CHECK(err.str().find("z column 0") != std::string::npos);
  }
  SUBCASE("one-dimensional z needs explicit targets") {
    o.data_path = write_file("d21.txt", "d1=1 d2=1\n1 1 1\n2 1 1\n3 1 1\n");
    o.out_path = (scratch_dir() / "d21.csv").string();
    CHECK(cli::cmd_calibrate(o, err) == cli::kValidation);
    o.target1 = 1.0;
    o.target2 = 1.0;
    CHECK(cli::cmd_calibrate(o, err) == cli::kOk);
  }
}

TEST_CASE("argument parsing") {
  const char* help[] = {"heavytail", "--help"};
  CHECK(cli::run(2, help) == cli::kOk);
  const char* none[] = {"heavytail"};
  CHECK(cli::run(1, none) == cli::kValidation);
  const char* bad_format[] = {"heavytail", "mc-experiment", "--config", "x.json", "--format", "xml"};
  CHECK(cli::run(6, bad_format) == cli::kValidation);
  const char* bad_threads[] = {"heavytail", "mc-experiment", "--config", "x.json", "--threads", "0"};
  CHECK(cli::run(6, bad_threads) == cli::kValidation);
}
