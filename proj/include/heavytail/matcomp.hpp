#pragma once

#include "heavytail/core.hpp"

#include <cstddef>
#include <optional>
#include <span>

namespace heavytail {

/// One matrix-completion observation. The design X = sqrt(d1 d2) e_row e_col^T
/// is implicit in (row, col); indices are zero-based.
struct McSample {
  std::size_t row = 0;
  std::size_t col = 0;
  double response = 0.0;
};

/// Per-cell sufficient statistics of a sample set:
/// counts(j,k) = #{i : X_i at (j,k)}, truncated_sums(j,k) = sum psi_tau(y_i).
struct McSufficientStats {
  DenseMatrix counts;
  DenseMatrix truncated_sums;
  std::size_t n = 0;
  double tau = 0.0;  // +inf for the untruncated (standard) estimator

  Eigen::Index d1() const { return counts.rows(); }
  Eigen::Index d2() const { return counts.cols(); }

  /// Adds another shard accumulated with the same tau and dimensions.
  McSufficientStats& operator+=(const McSufficientStats& other);
};

McSufficientStats accumulate_stats(std::span<const McSample> samples, std::size_t d1,
                                   std::size_t d2, double tau);

struct AdmmOptions {
  double rho = 1.0;
  std::size_t max_iter = 20000;
  double primal_tol = 1e-9;
  double dual_tol = 1e-9;
  /// Residual balancing: rho is doubled (halved) when the primal residual
  /// exceeds (falls below) the dual residual by `balance_ratio`.
  bool adaptive_rho = true;
  double balance_ratio = 10.0;
  double balance_factor = 2.0;
};

struct McConfig {
  std::size_t d1 = 0;
  std::size_t d2 = 0;
  std::size_t rank_bound = 5;
  double max_norm_budget = 10.0;  // R; the box is |theta_jk| <= R / sqrt(d1 d2)
  double alpha = 2.0;             // noise moment index in (1, 2]
  double delta = 2.0;             // confidence parameter > 1
  double tau_scale = 1.0;         // C1
  double lambda_scale = 1.0;      // C2
  AdmmOptions admm;

  void validate() const;
  double box_bound() const;
};

struct McSchedule {
  double tau = 0.0;
  double lambda = 0.0;
  bool sample_size_ok = true;  // n >= (d1 v d2) log(d1 + d2)
};

/// L_alpha = 2^{alpha-1} (R^alpha + e * M_alpha^{1 / log(d1 v d2)}).
double l_alpha(double alpha, double max_norm_budget, double m_alpha, std::size_t d1,
               std::size_t d2);

/// tau = C1 (L n / ((d1 v d2) log(d1+d2)))^{1/alpha},
/// lambda = C2 ((d1 v d2) log(d1+d2) / n)^{(alpha-1)/alpha}
///          * (L^{1/alpha} delta + R delta + L^{1/alpha}).
McSchedule schedule_theorem1(const McConfig& cfg, std::size_t n, double l_alpha_value);

/// Moment-adaptive variant valid for any alpha > 1: exponents become
/// max(1/alpha, 1/2) for tau and min((alpha-1)/alpha, 1/2) for lambda, and the
/// scale min(L_alpha^{1/alpha}, L_2^{1/2}) when L_2 is supplied.
McSchedule schedule_adaptive(const McConfig& cfg, std::size_t n, double l_alpha_value,
                             std::optional<double> l_two = std::nullopt);

/// The simulation form with every constant absorbed into C1 and C2:
/// tau = C1 ratio^{1/alpha}, lambda = C2 ratio^{-(alpha-1)/alpha},
/// ratio = n / ((d1 v d2) log(d1 + d2)).
McSchedule schedule_simulation(const McConfig& cfg, std::size_t n);

/// Proximal map of threshold * nuclear norm: singular-value soft-thresholding.
DenseMatrix svt(const DenseMatrix& m, double threshold);

/// vec(theta)^T Sigma_XX vec(theta) - 2 <Sigma_yX, theta> + lambda ||theta||_*.
double mc_objective(const McSufficientStats& stats, const DenseMatrix& theta, double lambda);

struct McSolution {
  DenseMatrix estimate;       // low-rank iterate W
  DenseMatrix box_iterate;    // box-feasible iterate Theta
  bool converged = false;
  std::size_t iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double rho = 0.0;  // final penalty after residual balancing
};

/// ADMM for the box-constrained, nuclear-norm penalized quadratic, splitting
/// Theta = W. Starts from Theta = W = U = 0. Reaching max_iter is reported
/// through `converged`, not thrown.
McSolution solve_mc(const McSufficientStats& stats, const McConfig& cfg, double lambda);

}  // namespace heavytail
