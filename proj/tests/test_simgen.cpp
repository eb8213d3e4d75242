#include <catch2/catch_amalgamated.hpp>

#include <qmix/regress.hpp>
#include <qmix/rng.hpp>
#include <qmix/simgen.hpp>

#include <cmath>

using namespace qmix;

TEST_CASE("scenario presets encode the study design", "[simgen]") {
  const ScenarioSpec s1 = scenario_preset(1, 500, 4);
  REQUIRE(s1.beta1 == 0.0);
  REQUIRE(s1.psi1() == 0.0);
  REQUIRE(s1.truth().size() == 1);

  const ScenarioSpec s2 = scenario_preset(2, 500, 4);
  REQUIRE(s2.beta1 == 0.25);
  REQUIRE(s2.beta2 == -0.25);
  REQUIRE(s2.psi1() == 0.0);

  const ScenarioSpec s3 = scenario_preset(3, 500, 9);
  REQUIRE(s3.psi1() == Catch::Approx(0.25));

  // Equal split: the total effect stays 0.25 at any d.
  for (int d : {4, 9, 14}) {
    const ScenarioSpec s4 = scenario_preset(4, 500, d);
    REQUIRE(s4.equal_split_betas);
    REQUIRE(s4.exposure_betas().size() == d);
    REQUIRE(s4.exposure_betas()[d - 1] == Catch::Approx(0.25 / d));
    REQUIRE(s4.psi1() == Catch::Approx(0.25));
  }

  const ScenarioSpec s6 = scenario_preset(6, 500, 4);
  REQUIRE(s6.beta_c == 0.5);
  REQUIRE(s6.rho_xc == 0.75);
  REQUIRE(s6.has_confounder());

  const ScenarioSpec s7 = scenario_preset(7, 500, 4);
  REQUIRE(s7.beta_12 == -0.15);
  REQUIRE(s7.nonlinear());
  REQUIRE(s7.truth().size() == 2);
  REQUIRE(s7.psi1() == Catch::Approx(0.5));
  REQUIRE(s7.psi2() == Catch::Approx(-0.15));

  const ScenarioSpec s8 = scenario_preset(8, 500, 4);
  REQUIRE(s8.beta_11 == -0.15);
  REQUIRE(s8.psi1() == Catch::Approx(0.5));
  REQUIRE(s8.psi2() == Catch::Approx(-0.15));

  REQUIRE_THROWS_AS(scenario_preset(9, 500, 4), data_error);
}

TEST_CASE("scenario grids expand to every combination", "[simgen]") {
  const auto grid5 = scenario_variants(5, 500, 4);
  REQUIRE(grid5.size() == 9);
  REQUIRE(grid5.front().beta2 == -0.2);
  REQUIRE(grid5.front().rho_x1x2 == 0.0);
  REQUIRE(grid5.back().beta2 == -0.05);
  REQUIRE(grid5.back().rho_x1x2 == 0.75);
  for (const auto& s : grid5) {
    REQUIRE(s.beta1 == 0.25);
    REQUIRE(s.psi1() == Catch::Approx(0.25 + s.beta2));
  }

  const auto grid6 = scenario_variants(6, 500, 4);
  REQUIRE(grid6.size() == 2);
  REQUIRE(grid6[0].beta1 == 0.0);
  REQUIRE(grid6[1].beta1 == 0.25);

  REQUIRE(scenario_variants(2, 500, 4).size() == 1);
}

TEST_CASE("uniform scores cover all levels evenly", "[simgen]") {
  auto eng = make_engine({71});
  const Eigen::VectorXi x = draw_quantized_uniform(40000, 4, eng);
  REQUIRE(x.minCoeff() == 0);
  REQUIRE(x.maxCoeff() == 3);
  for (int level = 0; level < 4; ++level) {
    const int count = static_cast<int>((x.array() == level).count());
    REQUIRE(std::abs(count - 10000) < 450);  // ~5 sigma
  }
}

TEST_CASE("correlated draws hit the copy probability in correlation", "[simgen]") {
  auto eng = make_engine({73});
  const Eigen::VectorXi base = draw_quantized_uniform(20000, 4, eng);
  for (double copy : {0.0, 0.5, 0.866}) {
    const Eigen::VectorXi x = draw_correlated(base, copy, eng);
    REQUIRE(std::abs(pearson(base, x) - copy) < 0.03);
    // Marginal stays uniform.
    for (int level = 0; level < 4; ++level) {
      const int count = static_cast<int>((x.array() == level).count());
      REQUIRE(std::abs(count - 5000) < 350);
    }
  }
}

TEST_CASE("generated outcomes follow the scenario coefficients", "[simgen]") {
  // Fit the true outcome model (including the hidden confounder) on a large
  // draw; every coefficient must come back within sampling error.
  ScenarioSpec s = scenario_preset(8, 30000, 4);
  auto eng = make_engine({79});
  const SimDataset ds = generate_dataset(s, eng);
  REQUIRE_FALSE(ds.confounder.has_value());

  DesignMatrix design;
  design.values.resize(30000, 6);
  design.values.col(0).setOnes();
  design.values.block(0, 1, 30000, 4) = ds.exposures.cast<double>();
  design.values.col(5) =
      ds.exposures.col(0).cast<double>().cwiseProduct(ds.exposures.col(0).cast<double>());
  design.roles.resize(6);
  design.roles[0] = {ColumnRole::Kind::intercept, -1, -1, "(intercept)"};
  for (int j = 1; j <= 5; ++j) {
    design.roles[static_cast<std::size_t>(j)] = {ColumnRole::Kind::covariate, -1, -1,
                                                 "c" + std::to_string(j)};
  }
  const FitResult fit = fit_linear(design, ds.outcome);
  REQUIRE(fit.beta[0] == Catch::Approx(0.0).margin(0.05));
  REQUIRE(fit.beta[1] == Catch::Approx(0.25).margin(0.05));
  REQUIRE(fit.beta[2] == Catch::Approx(0.25).margin(0.03));
  REQUIRE(fit.beta[3] == Catch::Approx(0.0).margin(0.03));
  REQUIRE(fit.beta[4] == Catch::Approx(0.0).margin(0.03));
  REQUIRE(fit.beta[5] == Catch::Approx(-0.15).margin(0.02));
  REQUIRE(fit.residual_variance == Catch::Approx(1.0).margin(0.05));
}

TEST_CASE("confounded scenario links the confounder to exposure and outcome", "[simgen]") {
  ScenarioSpec s = scenario_preset(6, 20000, 4);
  auto eng = make_engine({83});
  const SimDataset ds = generate_dataset(s, eng);
  REQUIRE(ds.confounder.has_value());
  REQUIRE(ds.realized_rho_xc == Catch::Approx(std::sqrt(0.75)).margin(0.03));
  REQUIRE(ds.realized_rho_xc == pearson(ds.exposures.col(0), *ds.confounder));

  // The estimators never see the confounder.
  const MixtureData data = to_mixture_data(ds);
  REQUIRE(data.n_covariates() == 0);
  REQUIRE(data.exposures.cols() == 4);
  REQUIRE(data.exposure_names.front() == "X1");
}

TEST_CASE("correlated co-exposure shows up in the realized correlation", "[simgen]") {
  ScenarioSpec s = scenario_preset(5, 20000, 4);
  auto eng = make_engine({89});
  const SimDataset ds = generate_dataset(s, eng);
  REQUIRE(ds.realized_rho_x1x2 == Catch::Approx(std::sqrt(0.75)).margin(0.03));
  REQUIRE(ds.truth[0] == Catch::Approx(0.20));  // 0.25 - 0.05
}

TEST_CASE("dataset generation is deterministic in the engine state", "[simgen]") {
  ScenarioSpec s = scenario_preset(2, 200, 4);
  auto eng1 = make_engine({97});
  auto eng2 = make_engine({97});
  const SimDataset a = generate_dataset(s, eng1);
  const SimDataset b = generate_dataset(s, eng2);
  REQUIRE(a.exposures == b.exposures);
  REQUIRE(a.outcome == b.outcome);

  auto eng3 = make_engine({98});
  const SimDataset c = generate_dataset(s, eng3);
  REQUIRE(a.outcome != c.outcome);
}

TEST_CASE("scenario validation", "[simgen]") {
  ScenarioSpec s;
  s.n = 1;
  REQUIRE_THROWS_AS(s.validate(), data_error);
  s.n = 100;
  s.d = 1;
  s.beta2 = 0.25;
  REQUIRE_THROWS_AS(s.validate(), data_error);
  s.d = 4;
  s.rho_x1x2 = 1.0;
  REQUIRE_THROWS_AS(s.validate(), data_error);
  s.rho_x1x2 = 0.5;
  s.equal_split_betas = true;  // but beta1 != beta2
  s.beta1 = 0.1;
  s.beta2 = 0.2;
  REQUIRE_THROWS_AS(s.validate(), data_error);
}
