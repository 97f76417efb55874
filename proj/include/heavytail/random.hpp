#pragma once

#include "heavytail/core.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace heavytail {

/// Seeded random stream.
///
/// Engine: std::mt19937_64. Child streams are keyed by an integer (usually a
/// replicate or cell index) and seeded with splitmix64(seed ^ splitmix64(key)),
/// so parallel work stays reproducible regardless of scheduling. Normal and
/// chi-square draws use the standard library distributions; outputs are
/// bit-identical for a given seed on a given standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  /// Independent stream derived from (seed, key). Does not advance *this.
  Rng child(std::uint64_t key) const;

  double normal();
  double chi_square(double dof);
  double uniform();  // [0, 1)
  std::uint64_t uniform_index(std::uint64_t count);  // [0, count)
  bool coin();

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Draws of scale * t_nu, each generated as N(0,1) / sqrt(chi2(nu) / nu).
std::vector<double> sample_student_t(Rng& rng, double nu, double scale, std::size_t count);

/// Multivariate t with the given precision (inverse scale) matrix.
/// The Cholesky factor is computed once; each draw is L^{-T} g * sqrt(nu / w)
/// with g ~ N(0, I), w ~ chi2(nu) and L L^T = precision. The covariance of a
/// draw is nu / (nu - 2) * precision^{-1} for nu > 2.
class MultivariateT {
 public:
  MultivariateT(double nu, const DenseMatrix& precision);

  Vector sample(Rng& rng) const;
  /// Gaussian draw with covariance precision^{-1} (the nu -> infinity limit).
  Vector sample_gaussian(Rng& rng) const;

  Eigen::Index dimension() const { return factor_.rows(); }
  double nu() const { return nu_; }

 private:
  double nu_;
  DenseMatrix factor_;  // lower-triangular L with L L^T = precision
};

Vector sample_multivariate_t(Rng& rng, double nu, const DenseMatrix& precision);

}  // namespace heavytail
