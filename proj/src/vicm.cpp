#include "heavytail/vicm.hpp"

#include "heavytail/errors.hpp"
#include "heavytail/parallel.hpp"
#include "heavytail/simplex.hpp"

#include <charconv>
#include <cmath>
#include <string>

namespace heavytail {

ScoreFunction ScoreFunction::student_t(double nu) {
  if (!(nu > 0.0) || !std::isfinite(nu)) {
    throw ConfigError("score: Student t degrees of freedom must be positive");
  }
  return {Kind::student_t, nu};
}

ScoreFunction ScoreFunction::parse(std::string_view text) {
  if (text == "gaussian" || text == "normal") {
    return gaussian();
  }
  if (!text.empty() && text.front() == 't') {
    std::string_view rest = text.substr(1);
    if (!rest.empty() && rest.front() == ':') {
      rest.remove_prefix(1);
    }
    double nu = 0.0;
    const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), nu);
    if (ec == std::errc() && ptr == rest.data() + rest.size() && !rest.empty()) {
      return student_t(nu);
    }
  }
  throw ConfigError("unknown score function '" + std::string(text) +
                    "' (expected 'gaussian' or 't<nu>')");
}

std::string ScoreFunction::name() const {
  if (kind == Kind::gaussian) {
    return "gaussian";
  }
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, nu);
  return "t" + std::string(buf, res.ptr);
}

double ScoreFunction::operator()(double x) const {
  if (kind == Kind::gaussian) {
    return x;
  }
  return (nu + 1.0) * x / (nu + x * x);
}

Vector score(const Vector& x, const ScoreFunction& kind) {
  Vector out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    out(i) = kind(x(i));
  }
  return out;
}

VicmDesign make_design(std::span<const VicmSample> samples, const ScoreFunction& kind) {
  if (samples.empty()) {
    throw ParameterError("make_design: no samples");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(samples.size());
  const Eigen::Index d1 = samples.front().x.size();
  const Eigen::Index d2 = samples.front().z.size();
  if (d1 == 0 || d2 == 0) {
    throw ShapeError("make_design: samples must have non-empty x and z");
  }
  VicmDesign design{Vector(n), DenseMatrix(n, d1), DenseMatrix(n, d2)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const VicmSample& s = samples[static_cast<std::size_t>(i)];
    if (s.x.size() != d1 || s.z.size() != d2) {
      throw ShapeError("make_design: sample " + std::to_string(i) +
                       " has inconsistent dimensions");
    }
    if (!std::isfinite(s.y) || !s.x.allFinite() || !s.z.allFinite()) {
      throw DataError("make_design: sample " + std::to_string(i) + " has non-finite entries");
    }
    design.y(i) = s.y;
    for (Eigen::Index j = 0; j < d1; ++j) {
      design.score_x(i, j) = kind(s.x(j));
    }
    design.z.row(i) = s.z.transpose();
  }
  return design;
}

namespace {

template <typename CellValues>
DenseMatrix truncated_mean(Eigen::Index rows, Eigen::Index cols, Eigen::Index n,
                           const TruncationMatrix* levels, CellValues&& values) {
  DenseMatrix out(rows, cols);
  for (Eigen::Index j = 0; j < rows; ++j) {
    for (Eigen::Index k = 0; k < cols; ++k) {
      const Eigen::ArrayXd v = values(j, k);
      out(j, k) = levels == nullptr
                      ? v.sum() / static_cast<double>(n)
                      : v.min((*levels)(j, k)).max(-(*levels)(j, k)).sum() / static_cast<double>(n);
    }
  }
  return out;
}

DenseMatrix cross_moment_impl(const VicmDesign& d, const TruncationMatrix* levels) {
  if (levels != nullptr && (levels->rows() != d.d1() || levels->cols() != d.d2())) {
    throw ShapeError("truncated_cross_moment: levels must be d1 x d2");
  }
  const Eigen::ArrayXd y = d.y.array();
  return truncated_mean(d.d1(), d.d2(), d.n(), levels, [&](Eigen::Index j, Eigen::Index k) {
    return (y * d.score_x.col(j).array() * d.z.col(k).array()).eval();
  });
}

DenseMatrix covariance_impl(const VicmDesign& d, const TruncationMatrix* levels) {
  if (levels != nullptr && (levels->rows() != d.d2() || levels->cols() != d.d2())) {
    throw ShapeError("truncated_covariance: levels must be d2 x d2");
  }
  const DenseMatrix a =
      truncated_mean(d.d2(), d.d2(), d.n(), levels, [&](Eigen::Index j, Eigen::Index k) {
        return (d.z.col(j).array() * d.z.col(k).array()).eval();
      });
  return 0.5 * (a + a.transpose());
}

}  // namespace

DenseMatrix truncated_cross_moment(const VicmDesign& design, const TruncationMatrix& levels) {
  return cross_moment_impl(design, &levels);
}

DenseMatrix truncated_cross_moment(std::span<const VicmSample> samples,
                                   const TruncationMatrix& levels, const ScoreFunction& kind) {
  return cross_moment_impl(make_design(samples, kind), &levels);
}

DenseMatrix cross_moment(const VicmDesign& design) { return cross_moment_impl(design, nullptr); }

DenseMatrix truncated_covariance(const VicmDesign& design, const TruncationMatrix& levels) {
  return covariance_impl(design, &levels);
}

DenseMatrix truncated_covariance(std::span<const VicmSample> samples,
                                 const TruncationMatrix& levels) {
  return covariance_impl(make_design(samples, ScoreFunction::gaussian()), &levels);
}

DenseMatrix second_moment(const VicmDesign& design) { return covariance_impl(design, nullptr); }

ClimeResult clime(const DenseMatrix& sigma_hat, double gamma, unsigned threads) {
  if (sigma_hat.rows() != sigma_hat.cols() || sigma_hat.size() == 0) {
    throw ShapeError("clime: sigma_hat must be square and non-empty");
  }
  require_finite(sigma_hat, "clime sigma_hat");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
    throw ParameterError("clime: gamma must be finite and non-negative");
  }
  const Eigen::Index d = sigma_hat.rows();

  // Variables x = (w+, w-) >= 0; constraints  S w <= gamma + e_k, -S w <= gamma - e_k.
  lp::LinearProgram program;
  program.a.resize(2 * d, 2 * d);
  program.a << sigma_hat, -sigma_hat, -sigma_hat, sigma_hat;
  program.c = Vector::Ones(2 * d);

  DenseMatrix raw(d, d);
  parallel_for(static_cast<std::size_t>(d), threads, [&](std::size_t col) {
    const auto k = static_cast<Eigen::Index>(col);
    lp::LinearProgram p = program;
    p.b = Vector::Constant(2 * d, gamma);
    p.b(k) += 1.0;
    p.b(d + k) -= 1.0;
    const lp::Solution sol = lp::solve(p);
    if (sol.status != lp::Status::optimal) {
      throw NumericalError("clime: column " + std::to_string(k) + " LP is " +
                           lp::to_string(sol.status) + " at gamma=" + std::to_string(gamma));
    }
    raw.col(k) = sol.x.head(d) - sol.x.tail(d);
  });

  DenseMatrix omega(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index k = 0; k < d; ++k) {
      omega(j, k) = std::fabs(raw(j, k)) <= std::fabs(raw(k, j)) ? raw(j, k) : raw(k, j);
    }
  }
  return {std::move(omega), std::move(raw)};
}

DenseMatrix soft_threshold(const DenseMatrix& a, double threshold) {
  if (!(threshold >= 0.0)) {
    throw ParameterError("soft_threshold: threshold must be non-negative");
  }
  return (a.array().sign() * (a.array().abs() - threshold).max(0.0)).matrix();
}

double vicm_objective(const DenseMatrix& theta, const DenseMatrix& a, double lambda) {
  require_shape(theta, a.rows(), a.cols(), "vicm_objective");
  return theta.squaredNorm() - 2.0 * (theta.array() * a.array()).sum() +
         lambda * theta.cwiseAbs().sum();
}

void VicmConfig::validate() const {
  if (d1 < 1 || d2 < 1) {
    throw ParameterError("VicmConfig: d1 and d2 must be positive");
  }
  if (!(clime_gamma > 0.0) && tuning == VicmTuning::calibrated) {
    throw ParameterError("VicmConfig: clime gamma must be positive");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ParameterError("VicmConfig: lambda must be finite and non-negative");
  }
  if (!(target_factor > 0.0)) {
    throw ParameterError("VicmConfig: target factor must be positive");
  }
}

Theorem2Schedule theorem2_schedule(Eigen::Index d1, Eigen::Index d2, std::size_t n,
                                   const PowerLawScales& s) {
  if (d1 < 1 || d2 < 2 || n == 0) {
    throw ParameterError("theorem2_schedule: needs d1 >= 1, d2 >= 2, n >= 1");
  }
  if (!(s.moment_bound > 0.0) || !(s.omega_l1_bound > 0.0) || !(s.tau1 > 0.0) ||
      !(s.tau2 > 0.0) || !(s.gamma > 0.0)) {
    throw ParameterError("theorem2_schedule: scales and bounds must be positive");
  }
  const double nn = static_cast<double>(n);
  const double log_d1d2 = std::log(static_cast<double>(d1) * static_cast<double>(d2));
  const double log_d2 = std::log(static_cast<double>(d2));
  const double m = s.moment_bound;
  return {s.tau1 * std::pow(m, 0.75) * std::sqrt(nn / log_d1d2),
          s.tau2 * std::sqrt(m) * std::sqrt(nn / log_d2),
          s.gamma * std::sqrt(m) * s.omega_l1_bound * std::sqrt(log_d2 / nn)};
}

double theorem2_lambda(Eigen::Index d1, Eigen::Index d2, std::size_t n, const Theorem2Oracle& o) {
  if (d1 < 1 || d2 < 2 || n == 0) {
    throw ParameterError("theorem2_lambda: needs d1 >= 1, d2 >= 2, n >= 1");
  }
  const double nn = static_cast<double>(n);
  const double log_d1d2 = std::log(static_cast<double>(d1) * static_cast<double>(d2));
  const double log_d2 = std::log(static_cast<double>(d2));
  return 8.0 * std::pow(o.moment_bound, 0.75) * o.omega_l11 * std::sqrt(3.0 * log_d1d2 / nn) +
         16.0 * o.max_abs_mu * o.theta_sigma_inf * std::sqrt(o.moment_bound) *
             o.omega_l1_bound * o.omega_l1_bound * std::sqrt(4.0 * log_d2 / nn);
}

VicmEstimate estimate_vicm(const VicmDesign& design, const VicmConfig& cfg) {
  cfg.validate();
  if (design.d1() != cfg.d1 || design.d2() != cfg.d2) {
    throw ShapeError("estimate_vicm: data dimensions do not match the configuration");
  }
  if (design.n() < 2) {
    throw ParameterError("estimate_vicm: need at least 2 samples");
  }

  VicmEstimate out;
  out.clime_gamma = cfg.clime_gamma;
  if (!cfg.robust) {
    out.moment_matrix = cross_moment(design);
    out.covariance = second_moment(design);
  } else if (cfg.tuning == VicmTuning::calibrated) {
    const CalibrationTargets targets =
        cfg.targets.value_or(CalibrationTargets::defaults(cfg.d1, cfg.d2, cfg.target_factor));
    VicmLevels levels = calibrate_vicm_levels(design, targets, cfg.threads);
    out.moment_matrix = truncated_cross_moment(design, levels.gamma1);
    out.covariance = truncated_covariance(design, levels.gamma2);
    out.levels = std::move(levels);
  } else {
    const Theorem2Schedule s =
        theorem2_schedule(cfg.d1, cfg.d2, static_cast<std::size_t>(design.n()), cfg.power_law);
    out.moment_matrix =
        truncated_cross_moment(design, TruncationMatrix::constant(cfg.d1, cfg.d2, s.tau1));
    out.covariance =
        truncated_covariance(design, TruncationMatrix::constant(cfg.d2, cfg.d2, s.tau2));
    out.clime_gamma = s.gamma;
  }

  out.omega_hat = clime(out.covariance, out.clime_gamma, cfg.threads).omega;
  out.a_matrix = out.moment_matrix * out.omega_hat;
  out.theta_hat = soft_threshold(out.a_matrix, cfg.lambda / 2.0);
  return out;
}

VicmEstimate estimate_vicm(std::span<const VicmSample> samples, const VicmConfig& cfg) {
  return estimate_vicm(make_design(samples, cfg.score), cfg);
}

DirectionDistance direction_distance(const DenseMatrix& theta_hat, const DenseMatrix& theta_star) {
  require_shape(theta_hat, theta_star.rows(), theta_star.cols(), "direction_distance");
  require_finite(theta_hat, "direction_distance estimate");
  DirectionDistance out;
  double total = 0.0;
  for (Eigen::Index k = 0; k < theta_star.cols(); ++k) {
    const double star_norm = theta_star.col(k).norm();
    if (std::fabs(star_norm - 1.0) > 1e-6) {
      throw ParameterError("direction_distance: true column " + std::to_string(k) +
                           " is not unit-norm");
    }
    const double norm = theta_hat.col(k).norm();
    if (norm == 0.0) {
      out.zero_columns.push_back(k);
      total += 1.0;
      continue;
    }
    const Vector unit = theta_hat.col(k) / norm;
    total += std::min((unit - theta_star.col(k)).squaredNorm(),
                      (unit + theta_star.col(k)).squaredNorm());
  }
  out.value = std::sqrt(total);
  return out;
}

}  // namespace heavytail
