#include "heavytail/random.hpp"

#include "heavytail/errors.hpp"

#include <cmath>
#include <string>

namespace heavytail {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

Rng Rng::child(std::uint64_t key) const { return Rng(splitmix64(seed_ ^ splitmix64(key))); }

double Rng::normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

double Rng::chi_square(double dof) { return std::chi_squared_distribution<double>(dof)(engine_); }

double Rng::uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

std::uint64_t Rng::uniform_index(std::uint64_t count) {
  return std::uniform_int_distribution<std::uint64_t>(0, count - 1)(engine_);
}

bool Rng::coin() { return std::bernoulli_distribution(0.5)(engine_); }

namespace {

void check_nu(double nu) {
  if (!(nu > 0.0) || !std::isfinite(nu)) {
    throw ParameterError("student t: degrees of freedom must be positive, got " +
                         std::to_string(nu));
  }
}

double standard_t(Rng& rng, double nu) {
  const double g = rng.normal();
  const double w = rng.chi_square(nu);
  return g / std::sqrt(w / nu);
}

}  // namespace

std::vector<double> sample_student_t(Rng& rng, double nu, double scale, std::size_t count) {
  check_nu(nu);
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw ParameterError("student t: scale must be positive, got " + std::to_string(scale));
  }
  std::vector<double> out(count);
  for (double& v : out) {
    v = scale * standard_t(rng, nu);
  }
  return out;
}

MultivariateT::MultivariateT(double nu, const DenseMatrix& precision) : nu_(nu) {
  check_nu(nu);
  if (precision.rows() != precision.cols() || precision.size() == 0) {
    throw ShapeError("multivariate t: precision must be square and non-empty");
  }
  require_finite(precision, "multivariate t precision");
  if ((precision - precision.transpose()).cwiseAbs().maxCoeff() >
      1e-12 * (1.0 + precision.cwiseAbs().maxCoeff())) {
    throw ParameterError("multivariate t: precision matrix is not symmetric");
  }
  Eigen::LLT<DenseMatrix> llt(precision);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("multivariate t: Cholesky decomposition failed; precision is not "
                         "positive definite");
  }
  factor_ = llt.matrixL();
}

Vector MultivariateT::sample_gaussian(Rng& rng) const {
  Vector g(factor_.rows());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    g(i) = rng.normal();
  }
  // Solve L^T x = g.
  return factor_.transpose().triangularView<Eigen::Upper>().solve(g);
}

Vector MultivariateT::sample(Rng& rng) const {
  Vector x = sample_gaussian(rng);
  const double w = rng.chi_square(nu_);
  return x * std::sqrt(nu_ / w);
}

Vector sample_multivariate_t(Rng& rng, double nu, const DenseMatrix& precision) {
  return MultivariateT(nu, precision).sample(rng);
}

}  // namespace heavytail
