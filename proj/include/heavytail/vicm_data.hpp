#pragma once

#include "heavytail/core.hpp"

#include <span>
#include <string>
#include <string_view>

namespace heavytail {

/// One observation (y, X, Z) of the varying index coefficient model
/// y = sum_k z_k f_k(<X, theta_k>) + eps.
struct VicmSample {
  double y = 0.0;
  Vector x;  // d1 covariates entering the indices
  Vector z;  // d2 varying coefficients
};

/// First-order score S(x) = -grad p(x) / p(x) of a known product density.
struct ScoreFunction {
  enum class Kind { gaussian, student_t };
  Kind kind = Kind::gaussian;
  double nu = 0.0;  // degrees of freedom for student_t

  static ScoreFunction gaussian() { return {Kind::gaussian, 0.0}; }
  static ScoreFunction student_t(double nu);
  /// "gaussian", or "t<nu>" / "t:<nu>" for iid Student t coordinates.
  static ScoreFunction parse(std::string_view text);

  std::string name() const;
  double operator()(double x) const;
};

Vector score(const Vector& x, const ScoreFunction& kind);

/// Column-major view of a sample set: y (n), S(X) (n x d1), Z (n x d2).
struct VicmDesign {
  Vector y;
  DenseMatrix score_x;
  DenseMatrix z;

  Eigen::Index n() const { return y.size(); }
  Eigen::Index d1() const { return score_x.cols(); }
  Eigen::Index d2() const { return z.cols(); }
};

VicmDesign make_design(std::span<const VicmSample> samples, const ScoreFunction& kind);

}  // namespace heavytail
