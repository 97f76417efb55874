#include "heavytail/cli.hpp"

#include "heavytail/errors.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace heavytail::cli {

using nlohmann::json;

namespace {

/// Strict view of one JSON object: every read is recorded and `finish`
/// rejects whatever was not read.
class Fields {
 public:
  Fields(const json& obj, std::string source, std::string prefix = "")
      : obj_(obj), source_(std::move(source)), prefix_(std::move(prefix)) {
    if (!obj_.is_object()) {
      fail("", "expected an object");
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    const std::string field = prefix_.empty() ? key : key.empty() ? prefix_ : prefix_ + "." + key;
    throw ConfigError(source_ + ": " + (field.empty() ? "" : field + ": ") + msg);
  }

  const json* find(const std::string& key) {
    used_.insert(key);
    const auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  double number(const std::string& key, double fallback, double lo, double hi,
                bool open_lo = false) {
    const json* v = find(key);
    if (v == nullptr) {
      return fallback;
    }
    if (!v->is_number()) {
      fail(key, "expected a number");
    }
    const double x = v->get<double>();
    if (!(open_lo ? x > lo : x >= lo) || !(x <= hi)) {
      std::ostringstream os;
      os << "value " << x << " outside " << (open_lo ? "(" : "[") << lo << ", " << hi << "]";
      fail(key, os.str());
    }
    return x;
  }

  std::uint64_t count(const std::string& key, std::uint64_t fallback, std::uint64_t lo,
                      std::uint64_t hi) {
    const json* v = find(key);
    if (v == nullptr) {
      return fallback;
    }
    return as_count(*v, key, lo, hi);
  }

  std::uint64_t as_count(const json& v, const std::string& key, std::uint64_t lo,
                         std::uint64_t hi) const {
    if (!v.is_number_unsigned()) {
      fail(key, "expected a non-negative integer");
    }
    const auto x = v.get<std::uint64_t>();
    if (x < lo || x > hi) {
      fail(key, "value " + std::to_string(x) + " outside [" + std::to_string(lo) + ", " +
                    std::to_string(hi) + "]");
    }
    return x;
  }

  bool boolean(const std::string& key, bool fallback) {
    const json* v = find(key);
    if (v == nullptr) {
      return fallback;
    }
    if (!v->is_boolean()) {
      fail(key, "expected true or false");
    }
    return v->get<bool>();
  }

  std::string text(const std::string& key, const std::string& fallback) {
    const json* v = find(key);
    if (v == nullptr) {
      return fallback;
    }
    if (!v->is_string()) {
      fail(key, "expected a string");
    }
    return v->get<std::string>();
  }

  std::vector<std::size_t> counts(const std::string& key, std::vector<std::size_t> fallback,
                                  std::uint64_t lo) {
    const json* v = find(key);
    if (v == nullptr) {
      return fallback;
    }
    if (!v->is_array() || v->empty()) {
      fail(key, "expected a non-empty array of integers");
    }
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      out.push_back(as_count((*v)[i], key + "[" + std::to_string(i) + "]", lo, 1'000'000'000));
    }
    return out;
  }

  std::string path(const std::string& key) const {
    return prefix_.empty() ? key : prefix_ + "." + key;
  }

  void finish() const {
    for (const auto& [key, value] : obj_.items()) {
      if (!used_.contains(key)) {
        fail(key, "unknown key");
      }
    }
  }

 private:
  const json& obj_;
  std::string source_;
  std::string prefix_;
  std::set<std::string> used_;
};

constexpr double kBig = 1e300;

json noise_json(const NoiseSpec& s) {
  return {{"nu", s.nu},
          {"scale", s.scale},
          {"tau_scale", s.tau_scale},
          {"lambda_scale", s.lambda_scale},
          {"label", s.name()}};
}

std::ostream* open_output(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") {
    return &std::cout;
  }
  file.open(path, std::ios::binary | std::ios::trunc);
  if (!file) {
    throw ConfigError("cannot open output file '" + path + "'");
  }
  return &file;
}

/// Runs `load` then `execute`, mapping failures onto exit codes.
template <class Load, class Execute>
int guarded(std::ostream& err, Load&& load, Execute&& execute) {
  try {
    load();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  }
  try {
    execute();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  }
  return kOk;
}

json run_header(const char* experiment, json config, std::uint64_t seed, bool full_scale) {
  return {{"experiment", experiment},
          {"seed", seed},
          {"full_scale", full_scale},
          {"rng", "mt19937_64, splitmix64-derived child streams"},
          {"config", std::move(config)}};
}

}  // namespace

json load_json_file(const std::string& path) {
  if (path.empty()) {
    throw ConfigError("--config is required");
  }
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read config file '" + path + "'");
  }
  try {
    return json::parse(in, nullptr, true, false);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
}

McPlan mc_plan_from_json(const json& j, const std::string& source) {
  Fields f(j, source);
  McPlan plan;
  f.text("description", "");
  plan.seed = f.count("seed", plan.seed, 0, UINT64_MAX);
  plan.d1 = f.count("d1", plan.d1, 1, 100000);
  plan.d2 = f.count("d2", plan.d2, 1, 100000);
  plan.rank = f.count("rank", plan.rank, 1, 100000);
  plan.target_vectors = f.count("target_vectors", plan.target_vectors, 2, 10'000'000);
  plan.max_norm_budget = f.number("max_norm_budget", plan.max_norm_budget, 0.0, kBig, true);
  plan.n_grid = f.counts("n_grid", plan.n_grid, 1);
  plan.replicates = f.count("replicates", plan.replicates, 1, 1'000'000);
  plan.alpha_offset = f.number("alpha_offset", plan.alpha_offset, 0.0, 1.0);
  plan.include_standard = f.boolean("include_standard", plan.include_standard);
  plan.threads = static_cast<unsigned>(f.count("threads", plan.threads, 1, 1024));
  if (const json* a = f.find("admm")) {
    Fields g(*a, source, f.path("admm"));
    AdmmOptions& o = plan.admm;
    o.rho = g.number("rho", o.rho, 0.0, kBig, true);
    o.max_iter = static_cast<int>(g.count("max_iter", o.max_iter, 1, 100'000'000));
    o.primal_tol = g.number("primal_tol", o.primal_tol, 0.0, 1.0, true);
    o.dual_tol = g.number("dual_tol", o.dual_tol, 0.0, 1.0, true);
    o.adaptive_rho = g.boolean("adaptive_rho", o.adaptive_rho);
    o.balance_ratio = g.number("balance_ratio", o.balance_ratio, 1.0, kBig, true);
    o.balance_factor = g.number("balance_factor", o.balance_factor, 1.0, kBig, true);
    g.finish();
  }
  plan.noises = McPlan::default_noises();
  if (const json* list = f.find("noises")) {
    if (!list->is_array() || list->empty()) {
      f.fail("noises", "expected a non-empty array");
    }
    plan.noises.clear();
    for (std::size_t i = 0; i < list->size(); ++i) {
      Fields g((*list)[i], source, f.path("noises") + "[" + std::to_string(i) + "]");
      NoiseSpec s;
      s.nu = g.number("nu", s.nu, 1.0, kBig, true);
      s.scale = g.number("scale", s.scale, 0.0, kBig);
      s.tau_scale = g.number("tau_scale", s.tau_scale, 0.0, kBig, true);
      s.lambda_scale = g.number("lambda_scale", s.lambda_scale, 0.0, kBig, true);
      s.label = g.text("label", "");
      g.finish();
      plan.noises.push_back(std::move(s));
    }
  }
  f.finish();
  try {
    plan.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return plan;
}

json to_json(const McPlan& p) {
  json noises = json::array();
  for (const NoiseSpec& s : p.noises) {
    noises.push_back(noise_json(s));
  }
  return {{"d1", p.d1},
          {"d2", p.d2},
          {"rank", p.rank},
          {"target_vectors", p.target_vectors},
          {"max_norm_budget", p.max_norm_budget},
          {"n_grid", p.n_grid},
          {"replicates", p.replicates},
          {"alpha_offset", p.alpha_offset},
          {"include_standard", p.include_standard},
          {"admm",
           {{"rho", p.admm.rho},
            {"max_iter", p.admm.max_iter},
            {"primal_tol", p.admm.primal_tol},
            {"dual_tol", p.admm.dual_tol},
            {"adaptive_rho", p.admm.adaptive_rho},
            {"balance_ratio", p.admm.balance_ratio},
            {"balance_factor", p.admm.balance_factor}}},
          {"noises", noises},
          {"seed", p.seed}};
}

VicmPlan vicm_plan_from_json(const json& j, const std::string& source) {
  Fields f(j, source);
  VicmPlan plan;
  f.text("description", "");
  plan.seed = f.count("seed", plan.seed, 0, UINT64_MAX);
  plan.d1 = static_cast<Eigen::Index>(f.count("d1", plan.d1, 1, 100000));
  plan.d2 = static_cast<Eigen::Index>(f.count("d2", plan.d2, 2, 1000));
  plan.sparsity = static_cast<Eigen::Index>(f.count("s", plan.sparsity, 1, 100000));
  plan.n_grid = f.counts("n_grid", plan.n_grid, 2);
  plan.replicates = f.count("replicates", plan.replicates, 1, 1'000'000);
  plan.x_nu = f.number("x_nu", plan.x_nu, 2.0, kBig, true);
  plan.noise_nu = f.number("noise_nu", plan.noise_nu, 0.0, kBig, true);
  plan.z_nu = f.number("z_nu", plan.z_nu, 2.0, kBig, true);
  plan.z_decay = f.number("z_decay", plan.z_decay, -0.999999, 0.999999);
  plan.gamma_scale = f.number("gamma_scale", plan.gamma_scale, 0.0, kBig, true);
  plan.target_factor = f.number("target_factor", plan.target_factor, 0.0, kBig, true);
  plan.lambda_grid = f.count("lambda_grid", plan.lambda_grid, 1, 100000);
  plan.include_standard = f.boolean("include_standard", plan.include_standard);
  plan.threads = static_cast<unsigned>(f.count("threads", plan.threads, 1, 1024));
  f.finish();
  try {
    plan.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return plan;
}

json to_json(const VicmPlan& p) {
  return {{"d1", p.d1},
          {"d2", p.d2},
          {"s", p.sparsity},
          {"n_grid", p.n_grid},
          {"replicates", p.replicates},
          {"x_nu", p.x_nu},
          {"noise_nu", p.noise_nu},
          {"z_nu", p.z_nu},
          {"z_decay", p.z_decay},
          {"gamma_scale", p.gamma_scale},
          {"target_factor", p.target_factor},
          {"lambda_grid", p.lambda_grid},
          {"include_standard", p.include_standard},
          {"seed", p.seed}};
}

int cmd_mc_experiment(const RunOptions& opts, std::ostream& err) {
  McPlan plan;
  return guarded(
      err,
      [&] {
        plan = mc_plan_from_json(load_json_file(opts.config_path), opts.config_path);
        if (opts.seed) {
          plan.seed = *opts.seed;
        }
        plan.threads = opts.threads;
        if (opts.full_scale) {
          plan.n_grid = {2000, 4000, 6000, 8000, 10000, 12000, 15000};
          err << "warning: full-scale grid requested; expect a long run\n";
        }
        const double dim = static_cast<double>(std::max(plan.d1, plan.d2)) *
                           std::log(static_cast<double>(plan.d1 + plan.d2));
        for (std::size_t n : plan.n_grid) {
          if (static_cast<double>(n) < dim) {
            err << "warning: n=" << n << " is below (d1 v d2) log(d1 + d2) = " << dim << '\n';
          }
        }
      },
      [&] {
        const ExperimentOutput output = run_mc_experiment(plan);
        std::ofstream file;
        std::ostream* out = open_output(opts.out_path, file);
        write_results(*out, opts.format, run_header("mc", to_json(plan), plan.seed, opts.full_scale),
                      output, opts.timings);
        out->flush();
      });
}

int cmd_vicm_experiment(const RunOptions& opts, std::ostream& err) {
  VicmPlan plan;
  return guarded(
      err,
      [&] {
        plan = vicm_plan_from_json(load_json_file(opts.config_path), opts.config_path);
        if (opts.seed) {
          plan.seed = *opts.seed;
        }
        plan.threads = opts.threads;
        if (opts.full_scale) {
          plan.d1 = 200;
          plan.n_grid = {10000, 12500, 15000, 17500, 20000, 22500, 25000, 30000, 35000};
          plan.replicates = 50;
          err << "warning: full-scale grid requested (d1=200, 50 replicates); expect hours\n";
          plan.validate();
        }
      },
      [&] {
        const ExperimentOutput output = run_vicm_experiment(plan);
        std::ofstream file;
        std::ostream* out = open_output(opts.out_path, file);
        write_results(*out, opts.format,
                      run_header("vicm", to_json(plan), plan.seed, opts.full_scale), output,
                      opts.timings);
        out->flush();
      });
}

int cmd_calibrate(const CalibrateOptions& opts, std::ostream& err) {
  VicmDataFile data;
  ScoreFunction score;
  CalibrationTargets targets;
  return guarded(
      err,
      [&] {
        std::ifstream in(opts.data_path);
        if (opts.data_path.empty() || !in) {
          throw ConfigError("cannot read data file '" + opts.data_path + "'");
        }
        data = read_vicm_data(in);
        score = ScoreFunction::parse(opts.score);
        if (!(opts.target_factor > 0.0)) {
          throw ConfigError("--target-factor must be positive");
        }
        if (data.d2 >= 2) {
          targets = CalibrationTargets::defaults(data.d1, data.d2, opts.target_factor);
        } else if (!opts.target1 || !opts.target2) {
          throw ConfigError("d2 = 1 has no default targets; pass --target1 and --target2");
        }
        if (opts.target1) {
          targets.cross = *opts.target1;
        }
        if (opts.target2) {
          targets.covariance = *opts.target2;
        }
        if (!(targets.cross > 0.0) || !(targets.covariance > 0.0)) {
          throw ConfigError("calibration targets must be positive");
        }
      },
      [&] {
        const VicmLevels levels = calibrate_vicm_levels(data.samples, score, targets, opts.threads);
        json header = {{"data", opts.data_path},
                       {"d1", data.d1},
                       {"d2", data.d2},
                       {"n", data.samples.size()},
                       {"score", score.name()},
                       {"target1", targets.cross},
                       {"target2", targets.covariance}};
        std::ofstream file;
        std::ostream* out = open_output(opts.out_path, file);
        write_levels(*out, opts.format, header, levels);
        out->flush();
      });
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Robust estimation under heavy-tailed noise: experiments and calibration"};
  app.require_subcommand(1);

  RunOptions run_opts;
  std::string format = "csv";
  auto add_run_flags = [&](CLI::App* sub) {
    sub->add_option("--config", run_opts.config_path, "JSON configuration file")->required();
    sub->add_option("--seed", run_opts.seed, "Seed (overrides the config)");
    sub->add_option("--out", run_opts.out_path, "Output path (default stdout)");
    sub->add_option("--format", format, "csv or json-lines")
        ->check(CLI::IsMember({"csv", "json-lines"}));
    sub->add_option("--threads", run_opts.threads, "Worker threads")->check(CLI::Range(1u, 1024u));
    sub->add_flag("--timings", run_opts.timings, "Record wall-clock seconds per fit");
    sub->add_flag("--full-scale", run_opts.full_scale, "Use the large reference grid (slow)");
  };
  CLI::App* mc = app.add_subcommand("mc-experiment", "Matrix-completion rate experiment");
  add_run_flags(mc);
  CLI::App* vicm = app.add_subcommand("vicm-experiment", "VICM robust-vs-standard experiment");
  add_run_flags(vicm);

  CalibrateOptions cal;
  std::string cal_format = "csv";
  CLI::App* calibrate = app.add_subcommand("calibrate", "Solve for truncation levels of a data file");
  calibrate->add_option("--data,data", cal.data_path, "Data file")->required();
  calibrate->add_option("--out", cal.out_path, "Output path (default stdout)");
  calibrate->add_option("--format", cal_format, "csv or json-lines")
      ->check(CLI::IsMember({"csv", "json-lines"}));
  calibrate->add_option("--score", cal.score, "gaussian or t<nu>");
  calibrate->add_option("--target-factor", cal.target_factor, "Factor in the default targets");
  calibrate->add_option("--target1", cal.target1, "Target for the cross-moment levels");
  calibrate->add_option("--target2", cal.target2, "Target for the covariance levels");
  calibrate->add_option("--threads", cal.threads, "Worker threads")->check(CLI::Range(1u, 1024u));
  // --seed is accepted for interface uniformity; calibration is deterministic.
  std::optional<std::uint64_t> unused_seed;
  calibrate->add_option("--seed", unused_seed, "Ignored");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }
  if (*mc || *vicm) {
    run_opts.format = parse_format(format);
    return *mc ? cmd_mc_experiment(run_opts, std::cerr) : cmd_vicm_experiment(run_opts, std::cerr);
  }
  cal.format = parse_format(cal_format);
  return cmd_calibrate(cal, std::cerr);
}

}  // namespace heavytail::cli
