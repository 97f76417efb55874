#include "heavytail/errors.hpp"
#include "heavytail/random.hpp"
#include "heavytail/simlab.hpp"
#include "heavytail/simplex.hpp"
#include "heavytail/vicm.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <string>

using namespace heavytail;

namespace {

DenseMatrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
  DenseMatrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.normal();
  return m;
}

DenseMatrix random_spd(Rng& rng, Eigen::Index d) {
  const DenseMatrix b = random_matrix(rng, d, d);
  return b * b.transpose() / static_cast<double>(d) + 0.2 * DenseMatrix::Identity(d, d);
}

std::vector<VicmSample> random_samples(Rng& rng, std::size_t n, Eigen::Index d1, Eigen::Index d2) {
  std::vector<VicmSample> s(n);
  for (auto& x : s) {
    x.x = Vector(d1);
    x.z = Vector(d2);
    for (auto& v : x.x) v = rng.normal();
    for (auto& v : x.z) v = rng.normal();
    x.y = x.z.sum() * x.x(0) + rng.normal();
  }
  return s;
}

DenseMatrix unit_columns(Rng& rng, Eigen::Index d1, Eigen::Index d2) {
  DenseMatrix m = random_matrix(rng, d1, d2);
  m.colwise().normalize();
  return m;
}

}  // namespace

TEST_CASE("score functions") {
  const Vector x = (Vector(2) << 1, -2).finished();
  CHECK(score(x, ScoreFunction::gaussian()) == x);
  const ScoreFunction t5 = ScoreFunction::student_t(5.0);
  CHECK(t5(0.0) == 0.0);
  CHECK(t5(1.0) == doctest::Approx(1.0).epsilon(1e-15));
  for (double nu : {1.5, 3.0, 5.0, 30.0}) {
    const ScoreFunction s = ScoreFunction::student_t(nu);
    for (double v : {-3.0, -0.7, 0.2, 1.0, 4.5}) {
      const double fd = oracle::numeric_score([nu](double u) { return oracle::log_t_density(u, nu); }, v);
      CHECK(std::abs(s(v) - fd) < 1e-6);
    }
  }
  CHECK(ScoreFunction::parse("t5").nu == 5.0);
  CHECK(ScoreFunction::parse("t:2.5").nu == 2.5);
  CHECK(ScoreFunction::parse("normal").kind == ScoreFunction::Kind::gaussian);
  CHECK_THROWS_AS(ScoreFunction::parse("laplace"), ConfigError);
}

TEST_CASE("truncated cross moment") {
  Rng rng(9);
  const auto s = random_samples(rng, 200, 4, 3);
  const VicmDesign design = make_design(s, ScoreFunction::student_t(5.0));
  SUBCASE("huge levels give the raw mean") {
    const DenseMatrix m = truncated_cross_moment(design, TruncationMatrix::constant(4, 3, 1e300));
    DenseMatrix raw = DenseMatrix::Zero(4, 3);
    for (const auto& x : s) {
      raw += x.y * score(x.x, ScoreFunction::student_t(5.0)) * x.z.transpose();
    }
    raw /= 200.0;
    CHECK((m - raw).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((cross_moment(design) - raw).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("entries never exceed their levels") {
    for (int t = 0; t < 50; ++t) {
      DenseMatrix lv(4, 3);
      for (Eigen::Index i = 0; i < lv.size(); ++i) lv(i) = std::exp(rng.normal() - 1.0);
      const DenseMatrix m = truncated_cross_moment(design, TruncationMatrix(lv));
      CHECK((m.cwiseAbs().array() <= lv.array()).all());
    }
  }
  SUBCASE("one sample above its level is clipped") {
    std::vector<VicmSample> one{{2.0, Vector::Constant(1, 3.0), Vector::Constant(1, -1.0)}};
    const DenseMatrix m =
        truncated_cross_moment(one, TruncationMatrix::constant(1, 1, 0.5), ScoreFunction::gaussian());
    CHECK(m(0, 0) == -0.5);
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(truncated_cross_moment(design, TruncationMatrix::constant(3, 3, 1.0)), ShapeError);
  }
}

TEST_CASE("truncated covariance") {
  SUBCASE("huge levels give the second moment") {
    Rng rng(10);
    const auto s = random_samples(rng, 100, 2, 3);
    const VicmDesign d = make_design(s, ScoreFunction::gaussian());
    const DenseMatrix c = truncated_covariance(d, TruncationMatrix::constant(3, 3, 1e300));
    CHECK((c - second_moment(d)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(c == c.transpose());
  }
  SUBCASE("constant first basis vector") {
    std::vector<VicmSample> s(10, VicmSample{1.0, Vector::Ones(1), Vector::Unit(3, 0) * 2.0});
    const DenseMatrix c = truncated_covariance(s, TruncationMatrix::constant(3, 3, 1.5));
    DenseMatrix expect = DenseMatrix::Zero(3, 3);
    expect(0, 0) = 1.5;
    CHECK(c == expect);
  }
  SUBCASE("multivariate t draws approach nu / (nu - 2) times the inverse precision") {
    Rng rng(12);
    const DenseMatrix omega = decay_precision(4, 0.5);
    MultivariateT dist(5.0, omega);
    std::vector<VicmSample> s(100000);
    for (auto& x : s) {
      x.y = 1.0;
      x.x = Vector::Ones(1);
      x.z = dist.sample(rng);
    }
    const DenseMatrix c = truncated_covariance(s, TruncationMatrix::constant(4, 4, 1e300));
    const DenseMatrix expect = (5.0 / 3.0) * omega.inverse();
    CHECK((c - expect).cwiseAbs().maxCoeff() <= 0.05 * expect.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("clime examples") {
  const DenseMatrix id = DenseMatrix::Identity(3, 3);
  CHECK((clime(id, 0.0).omega - id).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((clime(id, 0.3).omega - 0.7 * id).cwiseAbs().maxCoeff() < 1e-12);
  try {
    clime(DenseMatrix::Zero(2, 2), 0.5);
    FAIL("expected infeasibility");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("column 0") != std::string::npos);
  }
}

TEST_CASE("clime matches vertex enumeration") {
  Rng rng(101);
  for (int inst = 0; inst < 20; ++inst) {
    const auto d = static_cast<Eigen::Index>(2 + rng.uniform_index(3));
    const DenseMatrix sigma = random_spd(rng, d);
    const double gamma = 0.02 + 0.3 * rng.uniform();
    const ClimeResult r = clime(sigma, gamma);
    for (Eigen::Index k = 0; k < d; ++k) {
      const auto ref = oracle::clime_column_by_vertices(sigma, k, gamma);
      REQUIRE(ref.has_value());
      CHECK(std::abs(r.raw.col(k).cwiseAbs().sum() - *ref) <= 1e-7);
    }
  }
}

TEST_CASE("clime feasibility and symmetrization") {
  Rng rng(55);
  for (int inst = 0; inst < 40; ++inst) {
    const auto d = static_cast<Eigen::Index>(2 + rng.uniform_index(8));
    const DenseMatrix sigma = random_spd(rng, d);
    const double gamma = 0.01 + 0.2 * rng.uniform();
    const ClimeResult r = clime(sigma, gamma, 2);
    const DenseMatrix resid = sigma * r.raw - DenseMatrix::Identity(d, d);
    CHECK(resid.cwiseAbs().maxCoeff() <= gamma + 1e-9);
    CHECK(r.omega == r.omega.transpose());
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) {
        const double a = r.raw(i, j), b = r.raw(j, i);
        CHECK(r.omega(i, j) == (std::abs(a) <= std::abs(b) ? a : b));
      }
    }
  }
}

TEST_CASE("simplex solver on small programs") {
  // max x + y s.t. x + 2y <= 4, 3x + y <= 6.
  lp::LinearProgram p;
  p.a = (DenseMatrix(2, 2) << 1, 2, 3, 1).finished();
  p.b = (Vector(2) << 4, 6).finished();
  p.c = (Vector(2) << -1, -1).finished();
  const lp::Solution s = lp::solve(p);
  CHECK(s.status == lp::Status::optimal);
  CHECK(s.objective == doctest::Approx(-2.8));
  // x >= 1 and x <= 0 cannot both hold.
  lp::LinearProgram q;
  q.a = (DenseMatrix(2, 1) << -1, 1).finished();
  q.b = (Vector(2) << -1, 0).finished();
  q.c = Vector::Ones(1);
  CHECK(lp::solve(q).status == lp::Status::infeasible);
  lp::LinearProgram u;
  u.a = (DenseMatrix(1, 1) << -1).finished();
  u.b = Vector::Zero(1);
  u.c = -Vector::Ones(1);
  CHECK(lp::solve(u).status == lp::Status::unbounded);
}

TEST_CASE("soft threshold is the exact minimizer") {
  Rng rng(77);
  for (int inst = 0; inst < 50; ++inst) {
    const auto d1 = static_cast<Eigen::Index>(1 + rng.uniform_index(10));
    const auto d2 = static_cast<Eigen::Index>(1 + rng.uniform_index(10));
    const DenseMatrix a = random_matrix(rng, d1, d2);
    const double lambda = 2.0 * rng.uniform();
    const DenseMatrix closed = soft_threshold(a, lambda / 2.0);
    const DenseMatrix iter = oracle::prox_gradient_l1(a, lambda);
    CHECK((closed - iter).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(vicm_objective(closed, a, lambda) <= vicm_objective(iter, a, lambda) + 1e-12);
  }
}

TEST_CASE("estimate_vicm") {
  Rng rng(3);
  const auto s = random_samples(rng, 400, 4, 3);
  VicmConfig cfg;
  cfg.d1 = 4;
  cfg.d2 = 3;
  cfg.score = ScoreFunction::gaussian();
  cfg.clime_gamma = 0.05;
  SUBCASE("lambda zero returns A") {
    const VicmEstimate e = estimate_vicm(s, cfg);
    CHECK(e.theta_hat == e.a_matrix);
    CHECK(e.levels.has_value());
    CHECK((e.a_matrix - e.moment_matrix * e.omega_hat).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("large lambda kills everything") {
    const VicmEstimate e0 = estimate_vicm(s, cfg);
    cfg.lambda = 2.0 * e0.a_matrix.cwiseAbs().maxCoeff();
    CHECK(estimate_vicm(s, cfg).theta_hat.isZero(0.0));
  }
  SUBCASE("pipeline output matches proximal gradient") {
    cfg.lambda = 0.3;
    const VicmEstimate e = estimate_vicm(s, cfg);
    CHECK((e.theta_hat - oracle::prox_gradient_l1(e.a_matrix, 0.3)).cwiseAbs().maxCoeff() <= 1e-8);
  }
  SUBCASE("standard estimator skips truncation") {
    cfg.robust = false;
    const VicmEstimate e = estimate_vicm(s, cfg);
    const VicmDesign d = make_design(s, cfg.score);
    CHECK((e.moment_matrix - cross_moment(d)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_FALSE(e.levels.has_value());
  }
  SUBCASE("invalid configuration") {
    cfg.clime_gamma = 0.0;
    CHECK_THROWS_AS(estimate_vicm(s, cfg), ParameterError);
    cfg.clime_gamma = 0.1;
    cfg.lambda = -1.0;
    CHECK_THROWS_AS(estimate_vicm(s, cfg), ParameterError);
  }
}

TEST_CASE("direction distance") {
  Rng rng(21);
  const DenseMatrix star = unit_columns(rng, 6, 4);
  CHECK(direction_distance(star, star).value < 1e-15);
  CHECK(direction_distance(-3.0 * star, star).value < 1e-15);

  DenseMatrix u(2, 1), v(2, 1);
  u << 1, 0;
  v << 0, 1;
  CHECK(direction_distance(u, v).value == doctest::Approx(std::sqrt(2.0)));

  DenseMatrix hat = star;
  hat.col(2).setZero();
  const DirectionDistance dz = direction_distance(hat, star);
  CHECK(dz.value == doctest::Approx(1.0));
  CHECK(dz.zero_columns == std::vector<Eigen::Index>{2});

  CHECK_THROWS_AS(direction_distance(star, 2.0 * star), ParameterError);
  CHECK_THROWS_AS(direction_distance(star.leftCols(2), star), ShapeError);
}

TEST_CASE("direction distance is scale and sign invariant") {
  Rng rng(22);
  for (int t = 0; t < 500; ++t) {
    const DenseMatrix star = unit_columns(rng, 7, 3);
    const DenseMatrix hat = random_matrix(rng, 7, 3);
    const double base = direction_distance(hat, star).value;
    double c = std::exp(3.0 * rng.normal());
    if (rng.coin()) c = -c;
    DenseMatrix flipped = c * hat;
    for (Eigen::Index k = 0; k < 3; ++k) {
      if (rng.coin()) flipped.col(k) *= -1.0;
    }
    CHECK(std::abs(direction_distance(flipped, star).value - base) <= 1e-12 * std::max(1.0, base));
  }
}

TEST_CASE("theorem 2 schedules scale with n") {
  PowerLawScales sc;
  sc.moment_bound = 3.0;
  sc.omega_l1_bound = 2.0;
  for (std::size_t n : {100, 2500, 40000}) {
    const Theorem2Schedule a = theorem2_schedule(50, 9, n, sc);
    const Theorem2Schedule b = theorem2_schedule(50, 9, 2 * n, sc);
    CHECK(b.tau1 / a.tau1 == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    CHECK(b.tau2 / a.tau2 == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    CHECK(b.gamma / a.gamma == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
    const Theorem2Oracle o;
    CHECK(theorem2_lambda(50, 9, 2 * n, o) / theorem2_lambda(50, 9, n, o) ==
          doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  }
  // Only the first term depends on d1: sqrt(log(d1 d2)) scaling.
  Theorem2Oracle first_only;
  first_only.max_abs_mu = 0.0;
  const double r = theorem2_lambda(200, 9, 1000, first_only) / theorem2_lambda(50, 9, 1000, first_only);
  CHECK(r == doctest::Approx(std::sqrt(std::log(1800.0) / std::log(450.0))).epsilon(1e-12));
}

TEST_CASE("power-law tuning mode") {
  Rng rng(5);
  const auto s = random_samples(rng, 300, 3, 3);
  VicmConfig cfg;
  cfg.d1 = 3;
  cfg.d2 = 3;
  cfg.tuning = VicmTuning::power_law;
  const VicmEstimate e = estimate_vicm(s, cfg);
  const Theorem2Schedule sch = theorem2_schedule(3, 3, 300, cfg.power_law);
  CHECK(e.clime_gamma == sch.gamma);
  CHECK((e.moment_matrix.cwiseAbs().array() <= sch.tau1).all());
  CHECK_FALSE(e.levels.has_value());
}
