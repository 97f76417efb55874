#pragma once

#include "heavytail/core.hpp"
#include "heavytail/matcomp.hpp"
#include "heavytail/random.hpp"
#include "heavytail/vicm.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace heavytail {

// ---------------------------------------------------------------------------
// Records and slope fits

struct ExperimentRecord {
  std::string experiment;  // "mc" or "vicm"
  std::string estimator;   // "robust" or "standard"
  std::string noise;
  std::size_t n = 0;
  std::size_t replicate = 0;
  double error = 0.0;  // Frobenius error (mc) or direction distance (vicm)
  double wall_seconds = 0.0;
  bool converged = true;

  bool operator==(const ExperimentRecord&) const = default;
};

struct SlopeFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r_squared = 0.0;
  std::size_t points = 0;
};

/// OLS of log(error) on log(n). Needs at least 3 distinct n and positive errors.
SlopeFit fit_loglog_slope(std::span<const double> n, std::span<const double> error);

struct GroupMean {
  std::string estimator;
  std::string noise;
  std::size_t n = 0;
  double mean_error = 0.0;
  std::size_t replicates = 0;
  std::size_t non_converged = 0;
};

/// Mean error per (estimator, noise, n), in first-appearance order.
std::vector<GroupMean> group_means(std::span<const ExperimentRecord> records);

/// Fit over the group means of one (estimator, noise) pair.
SlopeFit fit_loglog_slope(std::span<const ExperimentRecord> records, const std::string& estimator,
                          const std::string& noise);

struct GroupSlope {
  std::string estimator;
  std::string noise;
  std::optional<SlopeFit> fit;
  std::string note;  // reason when fit is absent
};

/// Mean errors at or below this level are treated as exact recovery and are
/// not fitted.
inline constexpr double kErrorFloor = 1e-6;

std::vector<GroupSlope> fit_all_groups(std::span<const ExperimentRecord> records);

struct ExperimentOutput {
  std::vector<ExperimentRecord> records;
  std::vector<GroupMean> means;
  std::vector<GroupSlope> slopes;
};

// ---------------------------------------------------------------------------
// Matrix completion

/// Theta* = V V^T / sqrt(r) with V the top-r eigenvectors of the sample
/// covariance of `vectors` iid N(0, I_d) draws.
DenseMatrix make_low_rank_target(Rng& rng, Eigen::Index d, Eigen::Index rank = 5,
                                 std::size_t vectors = 100);

struct NoiseSpec {
  double nu = 2.0;
  double scale = 0.2;  // 0 disables noise
  double tau_scale = 1.0;     // C1
  double lambda_scale = 1.0;  // C2
  std::string label;          // defaults to e.g. "t2/5"

  std::string name() const;
};

/// y = sqrt(d1 d2) theta*(j,k) + scale * t_nu at a uniformly drawn cell.
std::vector<McSample> generate_mc_data(Rng& rng, const DenseMatrix& theta_star, std::size_t n,
                                       const NoiseSpec& noise);

struct McPlan {
  std::size_t d1 = 20;
  std::size_t d2 = 20;
  std::size_t rank = 5;
  std::size_t target_vectors = 100;
  double max_norm_budget = 10.0;
  std::vector<std::size_t> n_grid{2000, 4000, 8000, 16000, 32000};
  std::vector<NoiseSpec> noises;
  std::size_t replicates = 20;
  double alpha_offset = 0.01;  // alpha = min(nu - offset, 2)
  AdmmOptions admm{1.0, 5000, 1e-6, 1e-6, true, 10.0, 2.0};
  bool include_standard = true;
  std::uint64_t seed = 1;
  unsigned threads = 1;

  /// Desk-scale noises t2/5, t1.5/10, t1.1/15 with their default constants.
  static std::vector<NoiseSpec> default_noises();
  void validate() const;
};

double moment_index_for(const NoiseSpec& noise, double alpha_offset);

ExperimentOutput run_mc_experiment(const McPlan& plan);

// ---------------------------------------------------------------------------
// Varying index coefficient model

/// Per-coordinate law of a synthetic variable.
struct Law {
  enum class Kind { none, gaussian, student_t };
  Kind kind = Kind::gaussian;
  double nu = 0.0;
  double scale = 1.0;

  static Law none() { return {Kind::none, 0.0, 0.0}; }
  static Law gaussian(double scale = 1.0) { return {Kind::gaussian, 0.0, scale}; }
  static Law student_t(double nu, double scale = 1.0) { return {Kind::student_t, nu, scale}; }
  double draw(Rng& rng) const;
};

/// The nine link functions of the simulation battery, or linear links.
class LinkBattery {
 public:
  static LinkBattery defaults();
  static LinkBattery linear(std::vector<double> slopes);

  /// Link of coefficient k (the nine-function battery cycles with period 9).
  double operator()(std::size_t k, double u) const;
  bool is_linear() const { return !slopes_.empty(); }
  const std::vector<double>& slopes() const { return slopes_; }

 private:
  std::vector<double> slopes_;
};

/// f_1..f_9, index 0..8.
double default_link(std::size_t index, double u);

/// Columns with s random support positions and entries +-1/sqrt(s).
DenseMatrix make_vicm_truth(Rng& rng, Eigen::Index d1, Eigen::Index d2, Eigen::Index s);

/// (Omega)_{ij} = decay^{|i-j|}.
DenseMatrix decay_precision(Eigen::Index d, double decay = 0.5);

struct VicmDataSpec {
  DenseMatrix theta_star;  // d1 x d2, unit columns
  LinkBattery links = LinkBattery::defaults();
  Law x_law = Law::student_t(5.0);
  Law noise_law = Law::student_t(5.0);
  bool z_gaussian = false;  // Gaussian instead of multivariate t
  double z_nu = 5.0;
  DenseMatrix z_precision;  // d2 x d2
};

std::vector<VicmSample> generate_vicm_data(Rng& rng, std::size_t n, const VicmDataSpec& spec);

struct VicmPlan {
  Eigen::Index d1 = 50;
  Eigen::Index d2 = 9;
  Eigen::Index sparsity = 5;
  std::vector<std::size_t> n_grid{2500, 5000, 10000, 20000};
  std::size_t replicates = 10;
  double x_nu = 5.0;
  double noise_nu = 5.0;
  double z_nu = 5.0;
  double z_decay = 0.5;
  double gamma_scale = 1.0;  // clime gamma = gamma_scale * sqrt(log d2 / n)
  double target_factor = kDefaultTargetFactor;
  std::size_t lambda_grid = 40;  // fractions of max|A| scanned for lambda / 2
  bool include_standard = true;
  std::uint64_t seed = 1;
  unsigned threads = 1;

  void validate() const;
};

/// Scans lambda / 2 over {i / grid * max|A|, i = 0..grid-1} and returns the
/// (lambda, direction distance) pair with the smallest distance.
std::pair<double, double> select_lambda(const DenseMatrix& a, const DenseMatrix& theta_star,
                                        std::size_t grid);

ExperimentOutput run_vicm_experiment(const VicmPlan& plan);

}  // namespace heavytail
