#include "heavytail/simlab.hpp"

#include "heavytail/errors.hpp"
#include "heavytail/parallel.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <limits>
#include <set>
#include <tuple>

namespace heavytail {

namespace {

std::string short_number(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

// ---------------------------------------------------------------------------
// Slope fitting

SlopeFit fit_loglog_slope(std::span<const double> n, std::span<const double> error) {
  if (n.size() != error.size()) {
    throw ShapeError("fit_loglog_slope: n and error lengths differ");
  }
  if (std::set<double>(n.begin(), n.end()).size() < 3) {
    throw ParameterError("fit_loglog_slope: insufficient data, need at least 3 distinct n");
  }
  const std::size_t m = n.size();
  std::vector<double> x(m), y(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (!(n[i] > 0.0) || !(error[i] > 0.0) || !std::isfinite(error[i])) {
      throw DataError("fit_loglog_slope: n and errors must be positive and finite");
    }
    x[i] = std::log(n[i]);
    y[i] = std::log(error[i]);
  }
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(m);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(m);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  SlopeFit fit;
  fit.points = m;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    ss_res += r * r;
  }
  // A constant response is fitted exactly by slope 0.
  fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  return fit;
}

std::vector<GroupMean> group_means(std::span<const ExperimentRecord> records) {
  std::vector<GroupMean> out;
  std::map<std::tuple<std::string, std::string, std::size_t>, std::size_t> index;
  for (const ExperimentRecord& r : records) {
    const auto key = std::make_tuple(r.estimator, r.noise, r.n);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, out.size()).first;
      out.push_back(GroupMean{r.estimator, r.noise, r.n, 0.0, 0, 0});
    }
    GroupMean& g = out[it->second];
    g.mean_error += r.error;
    g.replicates += 1;
    g.non_converged += r.converged ? 0 : 1;
  }
  for (GroupMean& g : out) {
    g.mean_error /= static_cast<double>(g.replicates);
  }
  return out;
}

SlopeFit fit_loglog_slope(std::span<const ExperimentRecord> records, const std::string& estimator,
                          const std::string& noise) {
  std::vector<double> n, err;
  for (const GroupMean& g : group_means(records)) {
    if (g.estimator == estimator && g.noise == noise) {
      n.push_back(static_cast<double>(g.n));
      err.push_back(g.mean_error);
    }
  }
  return fit_loglog_slope(n, err);
}

std::vector<GroupSlope> fit_all_groups(std::span<const ExperimentRecord> records) {
  const std::vector<GroupMean> means = group_means(records);
  std::vector<GroupSlope> out;
  std::set<std::pair<std::string, std::string>> seen;
  for (const GroupMean& g : means) {
    if (!seen.insert({g.estimator, g.noise}).second) {
      continue;
    }
    GroupSlope slope{g.estimator, g.noise, std::nullopt, ""};
    std::vector<double> n, err;
    bool at_floor = true;
    for (const GroupMean& h : means) {
      if (h.estimator == g.estimator && h.noise == g.noise) {
        n.push_back(static_cast<double>(h.n));
        err.push_back(h.mean_error);
        at_floor = at_floor && h.mean_error <= kErrorFloor;
      }
    }
    if (at_floor) {
      slope.note = "errors at tolerance floor";
    } else if (std::set<double>(n.begin(), n.end()).size() < 3) {
      slope.note = "fewer than 3 sample sizes";
    } else {
      try {
        slope.fit = fit_loglog_slope(n, err);
      } catch (const Error& e) {
        slope.note = e.what();
      }
    }
    out.push_back(std::move(slope));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Matrix completion

DenseMatrix make_low_rank_target(Rng& rng, Eigen::Index d, Eigen::Index rank,
                                 std::size_t vectors) {
  if (rank < 1 || d < rank) {
    throw ParameterError("make_low_rank_target: need 1 <= rank <= d");
  }
  if (vectors < 2) {
    throw ParameterError("make_low_rank_target: need at least 2 Gaussian vectors");
  }
  DenseMatrix g(static_cast<Eigen::Index>(vectors), d);
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      g(i, j) = rng.normal();
    }
  }
  const DenseMatrix centered = g.rowwise() - g.colwise().mean();
  const DenseMatrix cov = centered.transpose() * centered / static_cast<double>(vectors - 1);
  Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(cov);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("make_low_rank_target: eigendecomposition failed");
  }
  // Eigenvalues come back ascending; the top `rank` vectors are the last columns.
  const DenseMatrix v = eig.eigenvectors().rightCols(rank);
  const DenseMatrix theta = v * v.transpose() / std::sqrt(static_cast<double>(rank));
  return 0.5 * (theta + theta.transpose());
}

std::string NoiseSpec::name() const {
  if (!label.empty()) {
    return label;
  }
  if (scale == 0.0) {
    return "none";
  }
  const double inv = 1.0 / scale;
  if (std::fabs(inv - std::round(inv)) < 1e-9) {
    return "t" + short_number(nu) + "/" + short_number(std::round(inv));
  }
  return "t" + short_number(nu) + "*" + short_number(scale);
}

std::vector<McSample> generate_mc_data(Rng& rng, const DenseMatrix& theta_star, std::size_t n,
                                       const NoiseSpec& noise) {
  if (n == 0) {
    throw ParameterError("generate_mc_data: n must be positive");
  }
  if (!(noise.scale >= 0.0)) {
    throw ParameterError("generate_mc_data: noise scale must be non-negative");
  }
  const auto d1 = static_cast<std::uint64_t>(theta_star.rows());
  const auto d2 = static_cast<std::uint64_t>(theta_star.cols());
  const double amplitude = std::sqrt(static_cast<double>(d1 * d2));
  std::vector<McSample> out(n);
  for (McSample& s : out) {
    const std::uint64_t cell = rng.uniform_index(d1 * d2);
    s.row = static_cast<std::size_t>(cell / d2);
    s.col = static_cast<std::size_t>(cell % d2);
    s.response = amplitude * theta_star(static_cast<Eigen::Index>(s.row),
                                        static_cast<Eigen::Index>(s.col));
    if (noise.scale > 0.0) {
      s.response += sample_student_t(rng, noise.nu, noise.scale, 1).front();
    }
  }
  return out;
}

std::vector<NoiseSpec> McPlan::default_noises() {
  // Constants C1, C2 fixed per noise line.
  return {NoiseSpec{2.0, 0.2, 1.0, 1.0, ""}, NoiseSpec{1.5, 0.1, 1.0, 1.0, ""},
          NoiseSpec{1.1, 1.0 / 15.0, 1.0, 0.5, ""}};
}

void McPlan::validate() const {
  if (d1 == 0 || d2 == 0 || rank == 0 || rank > std::min(d1, d2)) {
    throw ParameterError("mc plan: need 1 <= rank <= min(d1, d2)");
  }
  if (d1 != d2) {
    throw ParameterError("mc plan: the low-rank target construction is square (d1 == d2)");
  }
  if (n_grid.empty() || std::any_of(n_grid.begin(), n_grid.end(), [](auto n) { return n == 0; })) {
    throw ParameterError("mc plan: n grid must be non-empty with positive entries");
  }
  if (noises.empty() || replicates == 0) {
    throw ParameterError("mc plan: need at least one noise law and one replicate");
  }
  for (const NoiseSpec& s : noises) {
    if (!(s.nu > 1.0) || !(s.scale >= 0.0) || !(s.tau_scale > 0.0) || !(s.lambda_scale > 0.0)) {
      throw ParameterError("mc plan: noise " + s.name() +
                           " needs nu > 1, scale >= 0 and positive C1, C2");
    }
    if (!(moment_index_for(s, alpha_offset) > 1.0)) {
      throw ParameterError("mc plan: noise " + s.name() + " gives moment index alpha <= 1");
    }
  }
  if (!(alpha_offset >= 0.0)) {
    throw ParameterError("mc plan: alpha offset must be non-negative");
  }
}

double moment_index_for(const NoiseSpec& noise, double alpha_offset) {
  return std::min(noise.nu - alpha_offset, 2.0);
}

ExperimentOutput run_mc_experiment(const McPlan& plan) {
  plan.validate();
  const Rng root(plan.seed);
  Rng target_stream = root.child(0);
  const DenseMatrix theta_star = make_low_rank_target(
      target_stream, static_cast<Eigen::Index>(plan.d1), static_cast<Eigen::Index>(plan.rank),
      plan.target_vectors);
  const Rng data_root = root.child(1);

  const std::size_t per_noise = plan.n_grid.size() * plan.replicates;
  const std::size_t tasks = plan.noises.size() * per_noise;
  const std::size_t estimators = plan.include_standard ? 2 : 1;
  std::vector<ExperimentRecord> records(tasks * estimators);

  parallel_for(tasks, plan.threads, [&](std::size_t task) {
    const std::size_t noise_idx = task / per_noise;
    const std::size_t n_idx = (task % per_noise) / plan.replicates;
    const std::size_t rep = task % plan.replicates;
    const NoiseSpec& noise = plan.noises[noise_idx];
    const std::size_t n = plan.n_grid[n_idx];

    Rng stream = data_root.child(noise_idx).child(n_idx).child(rep);
    const std::vector<McSample> samples = generate_mc_data(stream, theta_star, n, noise);

    McConfig cfg;
    cfg.d1 = plan.d1;
    cfg.d2 = plan.d2;
    cfg.rank_bound = plan.rank;
    cfg.max_norm_budget = plan.max_norm_budget;
    cfg.alpha = moment_index_for(noise, plan.alpha_offset);
    cfg.tau_scale = noise.tau_scale;
    cfg.lambda_scale = noise.lambda_scale;
    cfg.admm = plan.admm;
    const McSchedule schedule = schedule_simulation(cfg, n);

    auto run = [&](const char* tag, double tau, std::size_t slot) {
      const auto start = std::chrono::steady_clock::now();
      const McSufficientStats stats = accumulate_stats(samples, plan.d1, plan.d2, tau);
      const McSolution sol = solve_mc(stats, cfg, schedule.lambda);
      records[slot] = ExperimentRecord{"mc",  tag, noise.name(), n, rep,
                                       (sol.estimate - theta_star).norm(), seconds_since(start),
                                       sol.converged};
    };
    run("robust", schedule.tau, task * estimators);
    if (plan.include_standard) {
      run("standard", std::numeric_limits<double>::infinity(), task * estimators + 1);
    }
  });

  ExperimentOutput out;
  out.records = std::move(records);
  out.means = group_means(out.records);
  out.slopes = fit_all_groups(out.records);
  return out;
}

// ---------------------------------------------------------------------------
// Varying index coefficient model

double Law::draw(Rng& rng) const {
  switch (kind) {
    case Kind::none:
      return 0.0;
    case Kind::gaussian:
      return scale * rng.normal();
    case Kind::student_t:
      return sample_student_t(rng, nu, scale, 1).front();
  }
  return 0.0;
}

double default_link(std::size_t index, double u) {
  switch (index % 9) {
    case 0: {
      const double c = std::cos(5.0 * u);
      return 4.0 * u * c * c;
    }
    case 1: {
      const double s = std::sin(5.0 * u);
      return 4.0 * u * s * s;
    }
    case 2:
      return -5.0 * u / (2.0 + std::sin(u));
    case 3:
      return 4.0 * u + 1.0 / (1.0 + std::exp(-u));
    case 4:
      return 2.0 * u + std::exp(-u * u / 7.0);
    case 5:
      return -u + 5.0 * std::cos(8.0 * u);
    case 6:
      return u + 4.0 * std::sin(7.0 * u);
    case 7:
      return -u + std::cos(1.5 * u * u);
    default:
      return -2.0 * u + 4.0 * std::sin(0.5 * u * u);
  }
}

LinkBattery LinkBattery::defaults() { return LinkBattery{}; }

LinkBattery LinkBattery::linear(std::vector<double> slopes) {
  if (slopes.empty()) {
    throw ParameterError("linear links: need at least one slope");
  }
  LinkBattery b;
  b.slopes_ = std::move(slopes);
  return b;
}

double LinkBattery::operator()(std::size_t k, double u) const {
  if (slopes_.empty()) {
    return default_link(k, u);
  }
  return slopes_[k % slopes_.size()] * u;
}

DenseMatrix make_vicm_truth(Rng& rng, Eigen::Index d1, Eigen::Index d2, Eigen::Index s) {
  if (s < 1 || s > d1 || d2 < 1) {
    throw ParameterError("make_vicm_truth: need 1 <= s <= d1 and d2 >= 1");
  }
  DenseMatrix theta = DenseMatrix::Zero(d1, d2);
  const double magnitude = 1.0 / std::sqrt(static_cast<double>(s));
  std::vector<Eigen::Index> positions(static_cast<std::size_t>(d1));
  for (Eigen::Index k = 0; k < d2; ++k) {
    std::iota(positions.begin(), positions.end(), Eigen::Index{0});
    // Partial Fisher-Yates: the first s positions form a uniform s-subset.
    for (Eigen::Index i = 0; i < s; ++i) {
      const auto j = i + static_cast<Eigen::Index>(
                             rng.uniform_index(static_cast<std::uint64_t>(d1 - i)));
      std::swap(positions[static_cast<std::size_t>(i)], positions[static_cast<std::size_t>(j)]);
      theta(positions[static_cast<std::size_t>(i)], k) = rng.coin() ? magnitude : -magnitude;
    }
  }
  return theta;
}

DenseMatrix decay_precision(Eigen::Index d, double decay) {
  DenseMatrix omega(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      omega(i, j) = std::pow(decay, static_cast<double>(std::abs(i - j)));
    }
  }
  return omega;
}

std::vector<VicmSample> generate_vicm_data(Rng& rng, std::size_t n, const VicmDataSpec& spec) {
  const Eigen::Index d1 = spec.theta_star.rows();
  const Eigen::Index d2 = spec.theta_star.cols();
  require_shape(spec.z_precision, d2, d2, "generate_vicm_data z precision");
  if (n == 0) {
    throw ParameterError("generate_vicm_data: n must be positive");
  }
  const MultivariateT z_law(spec.z_nu, spec.z_precision);
  std::vector<VicmSample> out(n);
  for (VicmSample& s : out) {
    s.x.resize(d1);
    for (Eigen::Index j = 0; j < d1; ++j) {
      s.x(j) = spec.x_law.draw(rng);
    }
    s.z = spec.z_gaussian ? z_law.sample_gaussian(rng) : z_law.sample(rng);
    const Vector index = spec.theta_star.transpose() * s.x;
    double y = 0.0;
    for (Eigen::Index k = 0; k < d2; ++k) {
      y += s.z(k) * spec.links(static_cast<std::size_t>(k), index(k));
    }
    s.y = y + spec.noise_law.draw(rng);
  }
  return out;
}

void VicmPlan::validate() const {
  if (d1 < 1 || d2 < 2) {
    throw ParameterError("vicm plan: need d1 >= 1 and d2 >= 2");
  }
  if (sparsity < 1 || sparsity > d1) {
    throw ParameterError("vicm plan: sparsity s must satisfy 1 <= s <= d1");
  }
  if (n_grid.empty() || std::any_of(n_grid.begin(), n_grid.end(), [](auto n) { return n < 2; })) {
    throw ParameterError("vicm plan: n grid must be non-empty with entries >= 2");
  }
  if (replicates == 0 || lambda_grid == 0) {
    throw ParameterError("vicm plan: replicates and lambda grid must be positive");
  }
  if (!(x_nu > 2.0) || !(noise_nu > 0.0) || !(z_nu > 0.0)) {
    throw ParameterError("vicm plan: x_nu must exceed 2; noise_nu and z_nu must be positive");
  }
  if (!(std::fabs(z_decay) < 1.0) || !(gamma_scale > 0.0) || !(target_factor > 0.0)) {
    throw ParameterError("vicm plan: need |z_decay| < 1, positive gamma scale and target factor");
  }
}

std::pair<double, double> select_lambda(const DenseMatrix& a, const DenseMatrix& theta_star,
                                        std::size_t grid) {
  const double top = a.cwiseAbs().maxCoeff();
  double best_lambda = 0.0;
  double best = direction_distance(a, theta_star).value;
  for (std::size_t i = 1; i < grid; ++i) {
    const double threshold = top * static_cast<double>(i) / static_cast<double>(grid);
    const double dist = direction_distance(soft_threshold(a, threshold), theta_star).value;
    if (dist < best) {
      best = dist;
      best_lambda = 2.0 * threshold;
    }
  }
  return {best_lambda, best};
}

ExperimentOutput run_vicm_experiment(const VicmPlan& plan) {
  plan.validate();
  const Rng root(plan.seed);
  const std::size_t tasks = plan.n_grid.size() * plan.replicates;
  const std::size_t estimators = plan.include_standard ? 2 : 1;
  std::vector<ExperimentRecord> records(tasks * estimators);
  const std::string noise_tag = "t" + short_number(plan.noise_nu);
  const ScoreFunction score = ScoreFunction::student_t(plan.x_nu);

  parallel_for(tasks, plan.threads, [&](std::size_t task) {
    const std::size_t n_idx = task / plan.replicates;
    const std::size_t rep = task % plan.replicates;
    const std::size_t n = plan.n_grid[n_idx];
    Rng stream = root.child(n_idx).child(rep);

    VicmDataSpec spec;
    spec.theta_star = make_vicm_truth(stream, plan.d1, plan.d2, plan.sparsity);
    spec.x_law = Law::student_t(plan.x_nu);
    spec.noise_law = Law::student_t(plan.noise_nu);
    spec.z_nu = plan.z_nu;
    spec.z_precision = decay_precision(plan.d2, plan.z_decay);
    const std::vector<VicmSample> samples = generate_vicm_data(stream, n, spec);
    const VicmDesign design = make_design(samples, score);

    VicmConfig cfg;
    cfg.d1 = plan.d1;
    cfg.d2 = plan.d2;
    cfg.score = score;
    cfg.target_factor = plan.target_factor;
    cfg.clime_gamma =
        plan.gamma_scale * std::sqrt(std::log(static_cast<double>(plan.d2)) / static_cast<double>(n));

    auto run = [&](const char* tag, bool robust, std::size_t slot) {
      const auto start = std::chrono::steady_clock::now();
      cfg.robust = robust;
      const VicmEstimate est = estimate_vicm(design, cfg);
      const double dist = select_lambda(est.a_matrix, spec.theta_star, plan.lambda_grid).second;
      records[slot] =
          ExperimentRecord{"vicm", tag, noise_tag, n, rep, dist, seconds_since(start), true};
    };
    run("robust", true, task * estimators);
    if (plan.include_standard) {
      run("standard", false, task * estimators + 1);
    }
  });

  ExperimentOutput out;
  out.records = std::move(records);
  out.means = group_means(out.records);
  out.slopes = fit_all_groups(out.records);
  return out;
}

}  // namespace heavytail
