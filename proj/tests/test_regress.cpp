#include <catch2/catch_amalgamated.hpp>

#include <qmix/regress.hpp>
#include <qmix/rng.hpp>

#include <cmath>

using namespace qmix;

namespace {

// Normal-equations oracle: solve (X'X) b = X'y and sigma^2 (X'X)^-1 by a
// direct inverse. Numerically cruder than QR, but independent of it — on
// well-conditioned problems both must agree to near machine precision.
struct OlsOracle {
  Eigen::VectorXd beta;
  Eigen::MatrixXd covariance;
  double sigma2 = 0.0;
};

OlsOracle normal_equations(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  OlsOracle out;
  const Eigen::MatrixXd xtx_inv = (x.transpose() * x).inverse();
  out.beta = xtx_inv * (x.transpose() * y);
  const Eigen::VectorXd resid = y - x * out.beta;
  out.sigma2 = resid.squaredNorm() / static_cast<double>(x.rows() - x.cols());
  out.covariance = out.sigma2 * xtx_inv;
  return out;
}

DesignMatrix wrap(const Eigen::MatrixXd& x) {
  DesignMatrix design;
  design.values = x;
  design.roles.resize(static_cast<std::size_t>(x.cols()));
  design.roles[0] = {ColumnRole::Kind::intercept, -1, -1, "(intercept)"};
  for (Eigen::Index c = 1; c < x.cols(); ++c) {
    design.roles[static_cast<std::size_t>(c)] = {ColumnRole::Kind::covariate, -1, -1,
                                                 "v" + std::to_string(c)};
  }
  return design;
}

Eigen::MatrixXd random_design(int n, int p, std::uint64_t seed) {
  auto eng = make_engine({seed});
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd x(n, p);
  x.col(0).setOnes();
  for (Eigen::Index j = 1; j < p; ++j) {
    for (int i = 0; i < n; ++i) x(i, j) = normal(eng);
  }
  return x;
}

}  // namespace

TEST_CASE("least squares matches the normal-equations oracle", "[regress]") {
  for (std::uint64_t seed : {21ULL, 22ULL, 23ULL}) {
    const Eigen::MatrixXd x = random_design(120, 5, seed);
    auto eng = make_engine({seed, 7});
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd y(120);
    for (int i = 0; i < 120; ++i) y[i] = 0.5 + x(i, 1) - 2.0 * x(i, 3) + normal(eng);

    const FitResult fit = fit_linear(wrap(x), y);
    const OlsOracle oracle = normal_equations(x, y);
    REQUIRE((fit.beta - oracle.beta).cwiseAbs().maxCoeff() < 1e-8);
    REQUIRE((fit.covariance - oracle.covariance).cwiseAbs().maxCoeff() < 1e-8);
    REQUIRE(fit.residual_variance == Catch::Approx(oracle.sigma2).epsilon(1e-10));
    REQUIRE(fit.link == Link::identity);
    REQUIRE(fit.n == 120);
    REQUIRE(fit.converged);
  }
}

TEST_CASE("least squares on a hand-computed problem", "[regress]") {
  // x = (0,1,2), y = (0,1,3): slope 3/2, intercept -1/6, rss 1/6,
  // var(slope) = sigma2/Sxx = 1/12, var(intercept) = sigma2 (1/n + xbar^2/Sxx) = 5/36.
  Eigen::MatrixXd x(3, 2);
  x << 1, 0, 1, 1, 1, 2;
  Eigen::VectorXd y(3);
  y << 0, 1, 3;
  const FitResult fit = fit_linear(wrap(x), y);
  REQUIRE(fit.beta[0] == Catch::Approx(-1.0 / 6.0).margin(1e-12));
  REQUIRE(fit.beta[1] == Catch::Approx(1.5).margin(1e-12));
  REQUIRE(fit.residual_variance == Catch::Approx(1.0 / 6.0).margin(1e-12));
  REQUIRE(fit.covariance(1, 1) == Catch::Approx(1.0 / 12.0).margin(1e-12));
  REQUIRE(fit.covariance(0, 0) == Catch::Approx(5.0 / 36.0).margin(1e-12));
}

TEST_CASE("logistic fit satisfies the score equations and covariance formula", "[regress]") {
  for (std::uint64_t seed : {31ULL, 32ULL}) {
    const Eigen::MatrixXd x = random_design(400, 4, seed);
    Eigen::VectorXd beta_true(4);
    beta_true << -0.3, 0.8, -0.5, 0.2;
    auto eng = make_engine({seed, 13});
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::VectorXd y(400);
    for (int i = 0; i < 400; ++i) {
      const double p = 1.0 / (1.0 + std::exp(-x.row(i).dot(beta_true)));
      y[i] = unit(eng) < p ? 1.0 : 0.0;
    }

    const FitResult fit = fit_logistic(wrap(x), y);
    REQUIRE(fit.converged);
    REQUIRE(fit.link == Link::logit);

    // Score equations at the optimum: X'(y - mu) = 0.
    const Eigen::VectorXd mu =
        (x * fit.beta).unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    REQUIRE((x.transpose() * (y - mu)).cwiseAbs().maxCoeff() < 1e-8);

    // Covariance equals the inverse weighted Gram matrix, computed directly.
    const Eigen::VectorXd w = mu.array() * (1.0 - mu.array());
    const Eigen::MatrixXd info = x.transpose() * w.asDiagonal() * x;
    REQUIRE((fit.covariance - info.inverse()).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("logistic fit recovers coefficients in large samples", "[regress]") {
  const int n = 20000;
  const Eigen::MatrixXd x = random_design(n, 3, 77);
  Eigen::VectorXd beta_true(3);
  beta_true << -0.5, 0.3, 0.7;
  auto eng = make_engine({77, 13});
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    const double p = 1.0 / (1.0 + std::exp(-x.row(i).dot(beta_true)));
    y[i] = unit(eng) < p ? 1.0 : 0.0;
  }
  const FitResult fit = fit_logistic(wrap(x), y);
  for (int j = 0; j < 3; ++j) {
    const double se = std::sqrt(fit.covariance(j, j));
    REQUIRE(std::abs(fit.beta[j] - beta_true[j]) < 4.0 * se);
  }
}

TEST_CASE("fractional logit interpolates exact probabilities", "[regress]") {
  // When the response already equals expit(x'beta), the quasibinomial
  // deviance is minimized exactly there, so the fit must return beta.
  const Eigen::MatrixXd x = random_design(50, 3, 55);
  Eigen::VectorXd beta_true(3);
  beta_true << 0.4, -1.1, 0.25;
  const Eigen::VectorXd y =
      (x * beta_true).unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  const FitResult fit = fit_fractional_logit(wrap(x), y);
  REQUIRE((fit.beta - beta_true).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("predict applies the link", "[regress]") {
  Eigen::MatrixXd x(4, 2);
  x << 1, 0, 1, 1, 1, 2, 1, 3;
  FitResult fit;
  fit.beta.resize(2);
  fit.beta << -1.0, 0.5;
  fit.link = Link::identity;
  const DesignMatrix design = wrap(x);
  const Eigen::VectorXd eta = predict(fit, design);
  REQUIRE(eta[0] == Catch::Approx(-1.0));
  REQUIRE(eta[3] == Catch::Approx(0.5));

  fit.link = Link::logit;
  const Eigen::VectorXd p = predict(fit, design);
  REQUIRE(p[0] == Catch::Approx(1.0 / (1.0 + std::exp(1.0))));
  REQUIRE(p[3] == Catch::Approx(1.0 / (1.0 + std::exp(-0.5))));

  FitResult wide = fit;
  wide.beta.resize(3);
  REQUIRE_THROWS_AS(predict(wide, design), data_error);
}

TEST_CASE("rank deficiency is reported with the offending column", "[regress]") {
  Eigen::MatrixXd x = random_design(40, 4, 91);
  x.col(3) = 2.0 * x.col(1);  // exact collinearity
  DesignMatrix design = wrap(x);
  design.roles[1].label = "lead";
  design.roles[3].label = "lead_copy";
  Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(40, 0.0, 1.0);
  REQUIRE_THROWS_MATCHES(fit_linear(design, y), numeric_error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("rank deficient") &&
                             (Catch::Matchers::ContainsSubstring("lead"))));
}

TEST_CASE("separated logistic data raises a numerical error", "[regress]") {
  Eigen::MatrixXd x(30, 2);
  x.col(0).setOnes();
  x.col(1) = Eigen::VectorXd::LinSpaced(30, -3.0, 3.0);
  Eigen::VectorXd y(30);
  for (int i = 0; i < 30; ++i) y[i] = x(i, 1) > 0 ? 1.0 : 0.0;
  REQUIRE_THROWS_AS(fit_logistic(wrap(x), y), numeric_error);
}

TEST_CASE("regression input validation", "[regress]") {
  const Eigen::MatrixXd x = random_design(10, 3, 5);
  const Eigen::VectorXd y = Eigen::VectorXd::Ones(10);

  Eigen::VectorXd short_y = y.head(9);
  REQUIRE_THROWS_AS(fit_linear(wrap(x), short_y), data_error);

  Eigen::VectorXd bad_y = y;
  bad_y[2] = std::nan("");
  REQUIRE_THROWS_AS(fit_linear(wrap(x), bad_y), data_error);

  Eigen::MatrixXd bad_x = x;
  bad_x(0, 1) = std::numeric_limits<double>::infinity();
  REQUIRE_THROWS_AS(fit_linear(wrap(bad_x), y), data_error);

  // More columns than rows.
  const Eigen::MatrixXd fat = random_design(3, 4, 6);
  REQUIRE_THROWS_AS(fit_linear(wrap(fat), Eigen::VectorXd::Ones(3)), data_error);

  // Logistic responses restricted to {0,1}; fractional restricted to [0,1].
  Eigen::VectorXd frac = y;
  frac[0] = 0.5;
  REQUIRE_THROWS_AS(fit_logistic(wrap(x), frac), data_error);
  Eigen::VectorXd neg = y;
  neg[0] = -0.1;
  REQUIRE_THROWS_AS(fit_fractional_logit(wrap(x), neg), data_error);
}
