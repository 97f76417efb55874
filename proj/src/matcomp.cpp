#include "heavytail/matcomp.hpp"

#include "heavytail/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace heavytail {

McSufficientStats& McSufficientStats::operator+=(const McSufficientStats& other) {
  require_shape(other.counts, d1(), d2(), "merge sufficient statistics");
  if (other.tau != tau) {
    throw ParameterError("merge sufficient statistics: truncation levels differ");
  }
  counts += other.counts;
  truncated_sums += other.truncated_sums;
  n += other.n;
  return *this;
}

McSufficientStats accumulate_stats(std::span<const McSample> samples, std::size_t d1,
                                   std::size_t d2, double tau) {
  if (d1 == 0 || d2 == 0) {
    throw ParameterError("accumulate_stats: dimensions must be positive");
  }
  if (!(tau > 0.0)) {
    throw ParameterError("accumulate_stats: tau must be positive, got " + std::to_string(tau));
  }
  McSufficientStats stats{DenseMatrix::Zero(d1, d2), DenseMatrix::Zero(d1, d2), samples.size(),
                          tau};
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const McSample& s = samples[i];
    if (s.row >= d1 || s.col >= d2) {
      throw DataError("accumulate_stats: sample " + std::to_string(i) + " has index (" +
                      std::to_string(s.row) + "," + std::to_string(s.col) + ") outside " +
                      std::to_string(d1) + "x" + std::to_string(d2));
    }
    if (!std::isfinite(s.response)) {
      throw DataError("accumulate_stats: sample " + std::to_string(i) + " has non-finite response");
    }
    const auto r = static_cast<Eigen::Index>(s.row);
    const auto c = static_cast<Eigen::Index>(s.col);
    stats.counts(r, c) += 1.0;
    stats.truncated_sums(r, c) += std::clamp(s.response, -tau, tau);
  }
  return stats;
}

void McConfig::validate() const {
  if (d1 == 0 || d2 == 0) {
    throw ParameterError("McConfig: d1 and d2 must be positive");
  }
  if (!(alpha > 1.0 && alpha <= 2.0)) {
    throw ParameterError("McConfig: alpha must lie in (1, 2], got " + std::to_string(alpha));
  }
  if (!(delta > 1.0)) {
    throw ParameterError("McConfig: delta must exceed 1");
  }
  if (!(max_norm_budget >= 0.0) || !std::isfinite(max_norm_budget)) {
    throw ParameterError("McConfig: max-norm budget R must be finite and non-negative");
  }
  if (!(tau_scale > 0.0) || !(lambda_scale > 0.0)) {
    throw ParameterError("McConfig: tau and lambda scales must be positive");
  }
  if (!(admm.rho > 0.0) || admm.max_iter == 0 || !(admm.primal_tol > 0.0) ||
      !(admm.dual_tol > 0.0)) {
    throw ParameterError("McConfig: ADMM rho, max_iter and tolerances must be positive");
  }
}

double McConfig::box_bound() const {
  return max_norm_budget / std::sqrt(static_cast<double>(d1) * static_cast<double>(d2));
}

namespace {

// (d1 v d2) log(d1 + d2)
double effective_dimension(std::size_t d1, std::size_t d2) {
  return static_cast<double>(std::max(d1, d2)) * std::log(static_cast<double>(d1 + d2));
}

void check_schedule_inputs(std::size_t n, double l) {
  if (n == 0) {
    throw ParameterError("schedule: n must be positive");
  }
  if (!(l > 0.0) || !std::isfinite(l)) {
    throw ParameterError("schedule: L_alpha must be positive and finite");
  }
}

}  // namespace

double l_alpha(double alpha, double max_norm_budget, double m_alpha, std::size_t d1,
               std::size_t d2) {
  if (std::max(d1, d2) < 2) {
    throw ParameterError("l_alpha: needs max(d1, d2) >= 2");
  }
  if (!(m_alpha > 0.0) || !(alpha > 1.0) || !(max_norm_budget >= 0.0)) {
    throw ParameterError("l_alpha: invalid moment bound, alpha or R");
  }
  const double log_d = std::log(static_cast<double>(std::max(d1, d2)));
  return std::pow(2.0, alpha - 1.0) *
         (std::pow(max_norm_budget, alpha) + std::numbers::e * std::pow(m_alpha, 1.0 / log_d));
}

McSchedule schedule_theorem1(const McConfig& cfg, std::size_t n, double l_alpha_value) {
  cfg.validate();
  check_schedule_inputs(n, l_alpha_value);
  const double dim = effective_dimension(cfg.d1, cfg.d2);
  const double nn = static_cast<double>(n);
  const double a = cfg.alpha;
  const double l_root = std::pow(l_alpha_value, 1.0 / a);
  McSchedule out;
  out.tau = cfg.tau_scale * std::pow(l_alpha_value * nn / dim, 1.0 / a);
  out.lambda = cfg.lambda_scale * std::pow(dim / nn, (a - 1.0) / a) *
               (l_root * cfg.delta + cfg.max_norm_budget * cfg.delta + l_root);
  out.sample_size_ok = nn >= dim;
  return out;
}

McSchedule schedule_adaptive(const McConfig& cfg, std::size_t n, double l_alpha_value,
                             std::optional<double> l_two) {
  McConfig relaxed = cfg;
  relaxed.alpha = 2.0;  // validate everything except the (1, 2] restriction
  relaxed.validate();
  if (!(cfg.alpha > 1.0) || !std::isfinite(cfg.alpha)) {
    throw ParameterError("schedule_adaptive: alpha must exceed 1");
  }
  check_schedule_inputs(n, l_alpha_value);
  const double a = cfg.alpha;
  double scale = std::pow(l_alpha_value, 1.0 / a);
  if (l_two) {
    if (!(*l_two > 0.0)) {
      throw ParameterError("schedule_adaptive: L_2 must be positive");
    }
    scale = std::min(scale, std::sqrt(*l_two));
  }
  const double ratio = static_cast<double>(n) / effective_dimension(cfg.d1, cfg.d2);
  McSchedule out;
  out.tau = cfg.tau_scale * scale * std::pow(ratio, std::max(1.0 / a, 0.5));
  out.lambda = cfg.lambda_scale * scale * std::pow(1.0 / ratio, std::min((a - 1.0) / a, 0.5));
  out.sample_size_ok = ratio >= 1.0;
  return out;
}

McSchedule schedule_simulation(const McConfig& cfg, std::size_t n) {
  cfg.validate();
  check_schedule_inputs(n, 1.0);
  const double dim = effective_dimension(cfg.d1, cfg.d2);
  const double nn = static_cast<double>(n);
  const double a = cfg.alpha;
  McSchedule out;
  out.tau = cfg.tau_scale * std::pow(nn / dim, 1.0 / a);
  out.lambda = cfg.lambda_scale * std::pow(dim / nn, (a - 1.0) / a);
  out.sample_size_ok = nn >= dim;
  return out;
}

DenseMatrix svt(const DenseMatrix& m, double threshold) {
  if (!(threshold >= 0.0) || !std::isfinite(threshold)) {
    throw ParameterError("svt: threshold must be finite and non-negative");
  }
  SvdResult s = svd(m);
  s.singular_values = (s.singular_values.array() - threshold).max(0.0).matrix();
  return s.reconstruct();
}

namespace {

struct QuadraticCoefficients {
  DenseMatrix quad;    // (d1 d2 / n) counts
  DenseMatrix linear;  // (sqrt(d1 d2) / n) truncated sums
};

QuadraticCoefficients coefficients(const McSufficientStats& stats) {
  const double dd = static_cast<double>(stats.d1()) * static_cast<double>(stats.d2());
  const double nn = static_cast<double>(stats.n);
  return {stats.counts * (dd / nn), stats.truncated_sums * (std::sqrt(dd) / nn)};
}

}  // namespace

double mc_objective(const McSufficientStats& stats, const DenseMatrix& theta, double lambda) {
  require_shape(theta, stats.d1(), stats.d2(), "mc_objective");
  if (stats.n == 0) {
    throw ParameterError("mc_objective: empty statistics");
  }
  const QuadraticCoefficients q = coefficients(stats);
  const double smooth = (q.quad.array() * theta.array().square()).sum() -
                        2.0 * (q.linear.array() * theta.array()).sum();
  return lambda == 0.0 ? smooth : smooth + lambda * nuclear_norm(theta);
}

McSolution solve_mc(const McSufficientStats& stats, const McConfig& cfg, double lambda) {
  cfg.validate();
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ParameterError("solve_mc: lambda must be finite and non-negative");
  }
  if (stats.n == 0) {
    throw ParameterError("solve_mc: no observations");
  }
  require_shape(stats.counts, static_cast<Eigen::Index>(cfg.d1),
                static_cast<Eigen::Index>(cfg.d2), "solve_mc statistics");

  const QuadraticCoefficients q = coefficients(stats);
  const double bound = cfg.box_bound();
  const AdmmOptions& opt = cfg.admm;
  const Eigen::Index d1 = stats.d1();
  const Eigen::Index d2 = stats.d2();

  DenseMatrix theta = DenseMatrix::Zero(d1, d2);
  DenseMatrix w = DenseMatrix::Zero(d1, d2);
  DenseMatrix u = DenseMatrix::Zero(d1, d2);
  DenseMatrix w_prev(d1, d2);
  double rho = opt.rho;

  McSolution out;
  for (std::size_t iter = 1; iter <= opt.max_iter; ++iter) {
    // Theta-step: per entry, minimize a t^2 - 2 b t + (rho/2)(t - v)^2 over the box.
    // Unobserved cells have a = b = 0 and reduce to projecting v.
    const DenseMatrix v = w - u;
    theta = ((2.0 * q.linear.array() + rho * v.array()) / (2.0 * q.quad.array() + rho))
                .max(-bound)
                .min(bound)
                .matrix();

    w_prev = w;
    w = svt(theta + u, lambda / rho);
    u += theta - w;

    out.primal_residual = (theta - w).norm();
    out.dual_residual = rho * (w - w_prev).norm();
    out.iterations = iter;
    if (out.primal_residual <= opt.primal_tol * std::max(1.0, theta.norm()) &&
        out.dual_residual <= opt.dual_tol) {
      out.converged = true;
      break;
    }
    if (opt.adaptive_rho) {
      // u is the scaled dual y / rho, so it rescales inversely with rho.
      if (out.primal_residual > opt.balance_ratio * out.dual_residual) {
        rho *= opt.balance_factor;
        u /= opt.balance_factor;
      } else if (out.dual_residual > opt.balance_ratio * out.primal_residual) {
        rho /= opt.balance_factor;
        u *= opt.balance_factor;
      }
    }
  }
  out.estimate = std::move(w);
  out.box_iterate = std::move(theta);
  out.rho = rho;
  return out;
}

}  // namespace heavytail
