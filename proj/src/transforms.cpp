#include "heavytail/transforms.hpp"

#include "heavytail/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace heavytail {

double psi(double x, double tau) {
  if (!(tau > 0.0)) {
    throw ParameterError("psi: truncation level must be positive, got " + std::to_string(tau));
  }
  return std::clamp(x, -tau, tau);
}

TruncationMatrix::TruncationMatrix(DenseMatrix levels) : levels_(std::move(levels)) {
  if (levels_.size() == 0) {
    throw ShapeError("truncation matrix: empty");
  }
  if (!levels_.allFinite() || (levels_.array() <= 0.0).any()) {
    throw ParameterError("truncation matrix: every level must be positive and finite");
  }
}

TruncationMatrix TruncationMatrix::constant(Eigen::Index rows, Eigen::Index cols, double level) {
  return TruncationMatrix(DenseMatrix::Constant(rows, cols, level));
}

DenseMatrix psi_matrix(const DenseMatrix& m, const TruncationMatrix& levels) {
  require_shape(m, levels.rows(), levels.cols(), "psi_matrix");
  const auto& tau = levels.levels().array();
  return m.array().min(tau).max(-tau).matrix();
}

namespace {

// Sorted nonzero magnitudes plus prefix sums of their squares, so the
// calibration left-hand side costs O(log n) per evaluation.
struct SortedMagnitudes {
  std::vector<double> abs;
  std::vector<double> prefix_sq;  // prefix_sq[i] = sum of abs[0..i)^2

  explicit SortedMagnitudes(std::span<const double> values) {
    abs.reserve(values.size());
    for (double v : values) {
      if (!std::isfinite(v)) {
        throw DataError("calibrate_tau: non-finite value");
      }
      if (v != 0.0) {
        abs.push_back(std::fabs(v));
      }
    }
    std::sort(abs.begin(), abs.end());
    prefix_sq.resize(abs.size() + 1, 0.0);
    for (std::size_t i = 0; i < abs.size(); ++i) {
      prefix_sq[i + 1] = prefix_sq[i] + abs[i] * abs[i];
    }
  }

  double lhs(double tau) const {
    const auto below = static_cast<std::size_t>(
        std::upper_bound(abs.begin(), abs.end(), tau) - abs.begin());
    return prefix_sq[below] / (tau * tau) + static_cast<double>(abs.size() - below);
  }
};

}  // namespace

double calibration_lhs(std::span<const double> values, double tau) {
  if (!(tau > 0.0)) {
    throw ParameterError("calibration_lhs: tau must be positive");
  }
  double total = 0.0;
  for (double v : values) {
    const double p = psi(v, tau);
    total += p * p / (tau * tau);
  }
  return total;
}

TauCalibration calibrate_tau(std::span<const double> values, double target) {
  if (!(target > 0.0) || !std::isfinite(target)) {
    throw ParameterError("calibrate_tau: target must be positive and finite, got " +
                         std::to_string(target));
  }
  const SortedMagnitudes data(values);
  if (data.abs.empty()) {
    throw DegenerateDataError("calibrate_tau: all values are zero");
  }
  const double nonzero = static_cast<double>(data.abs.size());
  TauCalibration out;
  if (target >= nonzero) {
    out.tau = data.abs.back();
    out.saturated = true;
    out.residual = std::fabs(data.lhs(out.tau) - target);
    return out;
  }
  double lo = data.abs.front();  // lhs(lo) = #nonzero > target
  double hi = std::sqrt(data.prefix_sq.back() / target);  // lhs(hi) <= target
  hi = std::max(hi, lo);
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) {
      break;
    }
    if (data.lhs(mid) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double r_lo = std::fabs(data.lhs(lo) - target);
  const double r_hi = std::fabs(data.lhs(hi) - target);
  out.tau = r_lo < r_hi ? lo : hi;
  out.residual = std::min(r_lo, r_hi);
  return out;
}

}  // namespace heavytail

#include "heavytail/parallel.hpp"

namespace heavytail {

CalibrationTargets CalibrationTargets::defaults(Eigen::Index d1, Eigen::Index d2, double factor) {
  if (d1 < 1 || d2 < 2) {
    throw ParameterError("calibration targets: default targets need d2 >= 2 (log d2 > 0)");
  }
  if (!(factor > 0.0)) {
    throw ParameterError("calibration targets: factor must be positive");
  }
  return {factor * std::log(static_cast<double>(d1) * static_cast<double>(d2)),
          factor * std::log(static_cast<double>(d2))};
}

namespace {

TauCalibration calibrate_cell(const Eigen::VectorXd& values, double target, const char* matrix,
                              Eigen::Index row, Eigen::Index col) {
  try {
    return calibrate_tau(std::span<const double>(values.data(), values.size()), target);
  } catch (const DegenerateDataError&) {
    throw DegenerateDataError(std::string("calibration of ") + matrix + "[" +
                              std::to_string(row) + "," + std::to_string(col) +
                              "]: all products are zero");
  }
}

}  // namespace

VicmLevels calibrate_vicm_levels(const VicmDesign& design, const CalibrationTargets& targets,
                                 unsigned threads) {
  const Eigen::Index n = design.n();
  const Eigen::Index d1 = design.d1();
  const Eigen::Index d2 = design.d2();
  if (n < 2) {
    throw ParameterError("calibrate_vicm_levels: need at least 2 samples");
  }
  if (!(targets.cross > 0.0) || !(targets.covariance > 0.0)) {
    throw ParameterError("calibrate_vicm_levels: targets must be positive");
  }
  for (Eigen::Index k = 0; k < d2; ++k) {
    if ((design.z.col(k).array() == 0.0).all()) {
      throw DegenerateDataError("calibrate_vicm_levels: z column " + std::to_string(k) +
                                " is identically zero");
    }
  }
  for (Eigen::Index j = 0; j < d1; ++j) {
    if ((design.score_x.col(j).array() == 0.0).all()) {
      throw DegenerateDataError("calibrate_vicm_levels: score column " + std::to_string(j) +
                                " of X is identically zero");
    }
  }
  if ((design.y.array() == 0.0).all()) {
    throw DegenerateDataError("calibrate_vicm_levels: response is identically zero");
  }

  DenseMatrix g1(d1, d2), r1(d1, d2), g2(d2, d2), r2(d2, d2);
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> s1(d1, d2), s2(d2, d2);

  parallel_for(static_cast<std::size_t>(d1 * d2), threads, [&](std::size_t cell) {
    const auto j = static_cast<Eigen::Index>(cell) / d2;
    const auto k = static_cast<Eigen::Index>(cell) % d2;
    const Eigen::VectorXd products =
        (design.y.array() * design.score_x.col(j).array() * design.z.col(k).array()).matrix();
    const TauCalibration c = calibrate_cell(products, targets.cross, "gamma1", j, k);
    g1(j, k) = c.tau;
    r1(j, k) = c.residual;
    s1(j, k) = c.saturated;
  });

  parallel_for(static_cast<std::size_t>(d2 * d2), threads, [&](std::size_t cell) {
    const auto k = static_cast<Eigen::Index>(cell) / d2;
    const auto s = static_cast<Eigen::Index>(cell) % d2;
    if (s < k) {
      return;
    }
    const Eigen::VectorXd products = (design.z.col(k).array() * design.z.col(s).array()).matrix();
    const TauCalibration c = calibrate_cell(products, targets.covariance, "gamma2", k, s);
    g2(k, s) = g2(s, k) = c.tau;
    r2(k, s) = r2(s, k) = c.residual;
    s2(k, s) = s2(s, k) = c.saturated;
  });

  return VicmLevels{TruncationMatrix(std::move(g1)), TruncationMatrix(std::move(g2)),
                    std::move(r1), std::move(r2), std::move(s1), std::move(s2)};
}

VicmLevels calibrate_vicm_levels(std::span<const VicmSample> samples, const ScoreFunction& kind,
                                 const CalibrationTargets& targets, unsigned threads) {
  return calibrate_vicm_levels(make_design(samples, kind), targets, threads);
}

}  // namespace heavytail
