#pragma once

#include "heavytail/core.hpp"

#include <span>

namespace heavytail {

/// Shrinkage psi_tau(x) = sign(x) * min(|x|, tau). tau = +inf disables clipping.
double psi(double x, double tau);

/// Matrix of strictly positive, finite truncation levels (one per entry).
class TruncationMatrix {
 public:
  explicit TruncationMatrix(DenseMatrix levels);

  /// Every entry equal to `level`.
  static TruncationMatrix constant(Eigen::Index rows, Eigen::Index cols, double level);

  const DenseMatrix& levels() const { return levels_; }
  Eigen::Index rows() const { return levels_.rows(); }
  Eigen::Index cols() const { return levels_.cols(); }
  double operator()(Eigen::Index r, Eigen::Index c) const { return levels_(r, c); }

 private:
  DenseMatrix levels_;
};

DenseMatrix psi_matrix(const DenseMatrix& m, const TruncationMatrix& levels);

/// Solution of sum_i psi_tau(x_i)^2 / tau^2 = target.
struct TauCalibration {
  double tau = 0.0;
  double residual = 0.0;  // |lhs(tau) - target|
  bool saturated = false;  // target >= #nonzero values: no finite root, tau = max|x|
};

/// Data-driven truncation level. The left-hand side is non-increasing in tau
/// and equals the number of nonzero values for tau <= min|x|, so a root exists
/// exactly when target < #nonzero. The root is bracketed by min|x| and
/// sqrt(sum x^2 / target) and found by bisection (at most 200 halvings).
TauCalibration calibrate_tau(std::span<const double> values, double target);

/// Left-hand side of the calibration equation, for residual checks.
double calibration_lhs(std::span<const double> values, double tau);

/// Default calibration target factor * log(dimension product).
inline constexpr double kDefaultTargetFactor = 10.0;

}  // namespace heavytail

#include "heavytail/vicm_data.hpp"

namespace heavytail {

/// Right-hand sides of the two calibration equations.
struct CalibrationTargets {
  double cross = 0.0;       // for levels of y * S(X)_j * z_k
  double covariance = 0.0;  // for levels of z_k * z_s

  /// factor * log(d1 d2) and factor * log(d2). Requires d1 * d2 > 1 and d2 > 1.
  static CalibrationTargets defaults(Eigen::Index d1, Eigen::Index d2,
                                     double factor = kDefaultTargetFactor);
};

struct VicmLevels {
  TruncationMatrix gamma1;  // d1 x d2
  TruncationMatrix gamma2;  // d2 x d2, symmetric
  DenseMatrix residual1;
  DenseMatrix residual2;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> saturated1;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> saturated2;
};

/// Solves one calibration equation per cell: gamma1(j,k) over
/// {y_i S(X_i)_j z_ik}_i and gamma2(k,s) over {z_ik z_is}_i.
VicmLevels calibrate_vicm_levels(const VicmDesign& design, const CalibrationTargets& targets,
                                 unsigned threads = 1);

VicmLevels calibrate_vicm_levels(std::span<const VicmSample> samples, const ScoreFunction& kind,
                                 const CalibrationTargets& targets, unsigned threads = 1);

}  // namespace heavytail
