#include "heavytail/core.hpp"

#include "heavytail/errors.hpp"

#include <string>

namespace heavytail {

DenseMatrix SvdResult::reconstruct() const {
  return u * singular_values.asDiagonal() * vt;
}

SvdResult svd(const DenseMatrix& m) {
  require_finite(m, "svd input");
  if (m.size() == 0) {
    throw ShapeError("svd: empty matrix");
  }
  // One-sided Jacobi: slower than divide-and-conquer but accurate to full
  // relative precision, and every matrix here is at most a few hundred wide.
  Eigen::JacobiSVD<DenseMatrix> solver(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (solver.info() != Eigen::Success || !solver.singularValues().allFinite()) {
    throw NumericalError("svd: failed to converge for " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()) + " matrix");
  }
  return SvdResult{solver.matrixU(), solver.singularValues(), solver.matrixV().transpose()};
}

double nuclear_norm(const DenseMatrix& m) { return svd(m).singular_values.sum(); }

MatrixNorms matrix_norms(const DenseMatrix& m) {
  MatrixNorms out;
  if (m.size() == 0) {
    return out;
  }
  const SvdResult s = svd(m);
  const auto abs = m.cwiseAbs();
  out.frobenius = m.norm();
  out.nuclear = s.singular_values.sum();
  out.operator_norm = s.singular_values(0);
  out.max_abs = abs.maxCoeff();
  out.l1_entrywise = abs.sum();
  out.row_sum_max = abs.rowwise().sum().maxCoeff();
  out.col_sum_max = abs.colwise().sum().maxCoeff();
  return out;
}

void require_finite(const DenseMatrix& m, std::string_view what) {
  if (!m.allFinite()) {
    throw DataError(std::string(what) + ": contains non-finite entries");
  }
}

void require_shape(const DenseMatrix& m, Eigen::Index rows, Eigen::Index cols,
                   std::string_view what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(rows) + "x" +
                     std::to_string(cols) + ", got " + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()));
  }
}

}  // namespace heavytail
