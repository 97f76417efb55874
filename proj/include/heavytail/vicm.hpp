#pragma once

#include "heavytail/core.hpp"
#include "heavytail/transforms.hpp"
#include "heavytail/vicm_data.hpp"

#include <optional>
#include <span>
#include <vector>

namespace heavytail {

/// (1/n) sum_i psi(y_i S(X_i)_j z_ik, levels(j,k)), a d1 x d2 matrix.
DenseMatrix truncated_cross_moment(const VicmDesign& design, const TruncationMatrix& levels);
DenseMatrix truncated_cross_moment(std::span<const VicmSample> samples,
                                   const TruncationMatrix& levels, const ScoreFunction& kind);
/// Untruncated (1/n) sum_i y_i S(X_i) Z_i^T.
DenseMatrix cross_moment(const VicmDesign& design);

/// Element-wise truncated second moment of Z, symmetrized as (A + A^T) / 2.
DenseMatrix truncated_covariance(const VicmDesign& design, const TruncationMatrix& levels);
DenseMatrix truncated_covariance(std::span<const VicmSample> samples,
                                 const TruncationMatrix& levels);
/// Untruncated (1/n) sum_i Z_i Z_i^T.
DenseMatrix second_moment(const VicmDesign& design);

struct ClimeResult {
  DenseMatrix omega;  // symmetrized estimate
  DenseMatrix raw;    // column solutions before symmetrization
};

/// CLIME: for each column k, min ||w||_1 s.t. ||sigma_hat w - e_k||_inf <= gamma,
/// solved as an exact LP in (w+, w-). The symmetrized estimate keeps, for each
/// pair (j,k), whichever of raw(j,k), raw(k,j) has the smaller magnitude.
ClimeResult clime(const DenseMatrix& sigma_hat, double gamma, unsigned threads = 1);

/// Entry-wise soft-thresholding sign(a) * max(|a| - threshold, 0).
DenseMatrix soft_threshold(const DenseMatrix& a, double threshold);

/// Objective ||theta||_F^2 - 2 <a, theta> + lambda ||theta||_{1,1}.
double vicm_objective(const DenseMatrix& theta, const DenseMatrix& a, double lambda);

enum class VicmTuning {
  calibrated,  // per-cell levels from the adaptive calibration equations
  power_law,   // constant levels tau1, tau2 from the power-law schedule
};

struct PowerLawScales {
  double tau1 = 1.0;  // tau1 = c * M^{3/4} sqrt(n / log(d1 d2))
  double tau2 = 1.0;  // tau2 = c * M^{1/2} sqrt(n / log d2)
  double gamma = 1.0;  // gamma = c * M^{1/2} varpi sqrt(log d2 / n)
  double moment_bound = 1.0;  // M
  double omega_l1_bound = 1.0;  // varpi
};

struct VicmConfig {
  Eigen::Index d1 = 0;
  Eigen::Index d2 = 0;
  ScoreFunction score = ScoreFunction::gaussian();
  double clime_gamma = 0.1;
  double lambda = 0.0;
  /// false gives the standard estimator: no truncation in the cross moment nor
  /// in the covariance handed to CLIME.
  bool robust = true;
  VicmTuning tuning = VicmTuning::calibrated;
  std::optional<CalibrationTargets> targets;  // default factor * log(.)
  double target_factor = kDefaultTargetFactor;
  PowerLawScales power_law;
  std::optional<double> omega_l1_bound;  // metadata only
  unsigned threads = 1;

  void validate() const;
};

struct VicmEstimate {
  DenseMatrix theta_hat;
  DenseMatrix omega_hat;
  DenseMatrix moment_matrix;
  DenseMatrix covariance;
  DenseMatrix a_matrix;  // moment_matrix * omega_hat
  std::optional<VicmLevels> levels;  // calibrated mode only
  double clime_gamma = 0.0;
};

/// Calibrate levels, form the truncated moments, run CLIME, and return the
/// exact minimizer soft_threshold(moment * omega_hat, lambda / 2).
VicmEstimate estimate_vicm(const VicmDesign& design, const VicmConfig& cfg);
VicmEstimate estimate_vicm(std::span<const VicmSample> samples, const VicmConfig& cfg);

struct DirectionDistance {
  double value = 0.0;
  /// Estimated columns that were exactly zero; each contributes 1.
  std::vector<Eigen::Index> zero_columns;
};

/// sqrt(sum_k min ||t_k/||t_k|| - s_k||^2, ||t_k/||t_k|| + s_k||^2) for
/// estimated columns t_k and unit-norm true columns s_k.
DirectionDistance direction_distance(const DenseMatrix& theta_hat, const DenseMatrix& theta_star);

struct Theorem2Schedule {
  double tau1 = 0.0;
  double tau2 = 0.0;
  double gamma = 0.0;
};

Theorem2Schedule theorem2_schedule(Eigen::Index d1, Eigen::Index d2, std::size_t n,
                                   const PowerLawScales& scales);

/// Inputs of the oracle regularization level; all population quantities.
struct Theorem2Oracle {
  double moment_bound = 1.0;       // M
  double omega_l11 = 1.0;          // ||Omega*||_{1,1}
  double max_abs_mu = 1.0;         // max_j |mu_j*|
  double theta_sigma_inf = 1.0;    // ||Theta* Sigma*||_inf
  double omega_l1_bound = 1.0;     // varpi
};

/// 8 M^{3/4} ||Omega*||_{1,1} sqrt(3 log(d1 d2) / n)
///   + 16 max|mu| ||Theta* Sigma*||_inf M^{1/2} varpi^2 sqrt(4 log d2 / n).
double theorem2_lambda(Eigen::Index d1, Eigen::Index d2, std::size_t n,
                       const Theorem2Oracle& oracle);

}  // namespace heavytail
