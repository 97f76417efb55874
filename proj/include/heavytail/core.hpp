#pragma once

#include <Eigen/Dense>

#include <string_view>

namespace heavytail {

/// Dense real matrix used for every parameter, moment and precision matrix.
using DenseMatrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Thin SVD: m = u * diag(singular_values) * vt with k = min(rows, cols).
struct SvdResult {
  DenseMatrix u;           // rows x k
  Vector singular_values;  // non-increasing, >= 0
  DenseMatrix vt;          // k x cols

  DenseMatrix reconstruct() const;
};

SvdResult svd(const DenseMatrix& m);

struct MatrixNorms {
  double frobenius = 0.0;
  double nuclear = 0.0;
  double max_abs = 0.0;
  double operator_norm = 0.0;
  double l1_entrywise = 0.0;  // sum of |a_ij|
  double row_sum_max = 0.0;   // max_i sum_j |a_ij|
  double col_sum_max = 0.0;   // max_j sum_i |a_ij|
};

MatrixNorms matrix_norms(const DenseMatrix& m);

double nuclear_norm(const DenseMatrix& m);

/// Throws DataError naming `what` if any entry is NaN or infinite.
void require_finite(const DenseMatrix& m, std::string_view what);

/// Throws ShapeError unless `m` has exactly rows x cols entries.
void require_shape(const DenseMatrix& m, Eigen::Index rows, Eigen::Index cols,
                   std::string_view what);

}  // namespace heavytail
