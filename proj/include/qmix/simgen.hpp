#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "qmix/data.hpp"
#include "qmix/errors.hpp"

namespace qmix {

// One simulation cell: coefficients of the outcome model
//   Y = sum_j beta_j X_j + beta_11 X1^2 + beta_12 X1 X2 + beta_c C + N(0,1),
// the exposure/confounder correlation targets, and the sample shape.
// Exposures are drawn directly as quantile scores 0..q-1.
struct ScenarioSpec {
  int id = 0;
  double beta1 = 0.0;
  double beta2 = 0.0;
  double beta_11 = 0.0;  // X1^2 term
  double beta_12 = 0.0;  // X1*X2 term
  double beta_c = 0.0;   // confounder term (confounder is hidden from estimators)
  double rho_x1x2 = 0.0;
  double rho_xc = 0.0;
  int n = 500;
  int d = 4;
  int q = 4;
  bool equal_split_betas = false;  // every exposure gets beta1

  void validate() const {
    if (n < 2) throw data_error("scenario: n must be >= 2, got " + std::to_string(n));
    if (d < 1) throw data_error("scenario: d must be >= 1, got " + std::to_string(d));
    if (q < 2) throw data_error("scenario: q must be >= 2, got " + std::to_string(q));
    if ((beta2 != 0.0 || beta_12 != 0.0 || rho_x1x2 > 0.0) && d < 2) {
      throw data_error("scenario: second-exposure terms need d >= 2");
    }
    if (rho_x1x2 < 0.0 || rho_x1x2 >= 1.0 || rho_xc < 0.0 || rho_xc >= 1.0) {
      throw data_error("scenario: correlations must lie in [0, 1)");
    }
    if (equal_split_betas && beta1 != beta2) {
      throw data_error("scenario: equal-split betas require beta1 == beta2");
    }
  }

  Eigen::VectorXd exposure_betas() const {
    Eigen::VectorXd betas = Eigen::VectorXd::Zero(d);
    if (equal_split_betas) {
      betas.setConstant(beta1);
    } else {
      betas[0] = beta1;
      if (d > 1) betas[1] = beta2;
    }
    return betas;
  }

  bool nonlinear() const { return beta_11 != 0.0 || beta_12 != 0.0; }
  bool has_confounder() const { return beta_c != 0.0 || rho_xc > 0.0; }

  // Joint effect of raising every exposure one level. Setting all exposures
  // to level l gives mean sum(beta_j) l + (beta_11 + beta_12) l^2 (+ the
  // confounder term), so the slope and curvature below are the exact
  // estimands of the degree-1/degree-2 summary models.
  double psi1() const { return exposure_betas().sum(); }
  double psi2() const { return beta_11 + beta_12; }

  Eigen::VectorXd truth() const {
    if (nonlinear()) {
      Eigen::VectorXd t(2);
      t << psi1(), psi2();
      return t;
    }
    return Eigen::VectorXd::Constant(1, psi1());
  }
};

struct SimDataset {
  Eigen::MatrixXi exposures;  // n x d quantile scores
  Eigen::VectorXd outcome;
  std::optional<Eigen::VectorXi> confounder;  // never handed to estimators
  Eigen::VectorXd truth;
  double realized_rho_x1x2 = std::numeric_limits<double>::quiet_NaN();
  double realized_rho_xc = std::numeric_limits<double>::quiet_NaN();
};

inline Eigen::VectorXi draw_quantized_uniform(int n, int q, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> level(0, q - 1);
  Eigen::VectorXi x(n);
  for (int i = 0; i < n; ++i) x[i] = level(rng);
  return x;
}

// Correlated companion of `base`: each entry copies base[i] with probability
// copy_prob and otherwise draws one of the base values at another position,
// so the marginal stays uniform while the realized correlation is close to
// copy_prob.
inline Eigen::VectorXi draw_correlated(const Eigen::VectorXi& base, double copy_prob,
                                       std::mt19937_64& rng) {
  const int n = static_cast<int>(base.size());
  if (n < 2) throw data_error("correlated draw needs at least 2 rows");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> other(0, n - 2);
  Eigen::VectorXi x(n);
  for (int i = 0; i < n; ++i) {
    if (unit(rng) < copy_prob) {
      x[i] = base[i];
    } else {
      int j = other(rng);
      if (j >= i) ++j;
      x[i] = base[j];
    }
  }
  return x;
}

inline double pearson(const Eigen::VectorXi& a, const Eigen::VectorXi& b) {
  const Eigen::VectorXd x = a.cast<double>();
  const Eigen::VectorXd y = b.cast<double>();
  const double mx = x.mean();
  const double my = y.mean();
  const double sxy = ((x.array() - mx) * (y.array() - my)).sum();
  const double sxx = (x.array() - mx).square().sum();
  const double syy = (y.array() - my).square().sum();
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

// Draw one dataset. Correlation targets are met by copying with probability
// sqrt(rho); the realized correlations are measured and reported alongside.
inline SimDataset generate_dataset(const ScenarioSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  const int n = spec.n;
  const int d = spec.d;

  SimDataset out;
  out.exposures.resize(n, d);
  out.exposures.col(0) = draw_quantized_uniform(n, spec.q, rng);
  if (d > 1) {
    out.exposures.col(1) =
        spec.rho_x1x2 > 0.0
            ? draw_correlated(out.exposures.col(0), std::sqrt(spec.rho_x1x2), rng)
            : draw_quantized_uniform(n, spec.q, rng);
  }
  for (int j = 2; j < d; ++j) out.exposures.col(j) = draw_quantized_uniform(n, spec.q, rng);

  if (spec.has_confounder()) {
    out.confounder = spec.rho_xc > 0.0
                         ? draw_correlated(out.exposures.col(0), std::sqrt(spec.rho_xc), rng)
                         : draw_quantized_uniform(n, spec.q, rng);
    out.realized_rho_xc = pearson(out.exposures.col(0), *out.confounder);
  }

  const Eigen::VectorXd betas = spec.exposure_betas();
  std::normal_distribution<double> noise(0.0, 1.0);
  out.outcome.resize(n);
  for (int i = 0; i < n; ++i) {
    double mean = 0.0;
    for (int j = 0; j < d; ++j) mean += betas[j] * out.exposures(i, j);
    const double x1 = out.exposures(i, 0);
    mean += spec.beta_11 * x1 * x1;
    if (d > 1) mean += spec.beta_12 * x1 * out.exposures(i, 1);
    if (out.confounder) mean += spec.beta_c * (*out.confounder)[i];
    out.outcome[i] = mean + noise(rng);
  }

  if (d > 1) out.realized_rho_x1x2 = pearson(out.exposures.col(0), out.exposures.col(1));
  out.truth = spec.truth();
  return out;
}

// Estimator-facing view: quantized exposure scores and the outcome; the
// confounder stays hidden.
inline MixtureData to_mixture_data(const SimDataset& ds) {
  MixtureData data;
  data.exposures = ds.exposures.cast<double>();
  data.covariates.resize(ds.exposures.rows(), 0);
  data.outcome = ds.outcome;
  for (Eigen::Index j = 0; j < ds.exposures.cols(); ++j) {
    data.exposure_names.push_back("X" + std::to_string(j + 1));
  }
  return data;
}

// Canonical simulation cells. Scenarios with a value grid (5 and 6) expand
// to every grid point in scenario_variants; scenario_preset picks a single
// representative (the strongest co-exposure setting for 5, the non-null
// mixture for 6).
inline ScenarioSpec scenario_preset(int id, int n, int d, int q = 4) {
  ScenarioSpec s;
  s.id = id;
  s.n = n;
  s.d = d;
  s.q = q;
  switch (id) {
    case 1:
      break;
    case 2:
      s.beta1 = 0.25;
      s.beta2 = -0.25;
      break;
    case 3:
      s.beta1 = 0.25;
      break;
    case 4:
      s.beta1 = 0.25 / d;
      s.beta2 = 0.25 / d;
      s.equal_split_betas = true;
      break;
    case 5:
      s.beta1 = 0.25;
      s.beta2 = -0.05;
      s.rho_x1x2 = 0.75;
      break;
    case 6:
      s.beta1 = 0.25;
      s.beta_c = 0.5;
      s.rho_xc = 0.75;
      break;
    case 7:
      s.beta1 = 0.25;
      s.beta2 = 0.25;
      s.beta_12 = -0.15;
      break;
    case 8:
      s.beta1 = 0.25;
      s.beta2 = 0.25;
      s.beta_11 = -0.15;
      break;
    default:
      throw data_error("scenario: unknown id " + std::to_string(id) + " (expected 1..8)");
  }
  s.validate();
  return s;
}

inline std::vector<ScenarioSpec> scenario_variants(int id, int n, int d, int q = 4) {
  std::vector<ScenarioSpec> out;
  if (id == 5) {
    for (double beta2 : {-0.2, -0.1, -0.05}) {
      for (double rho : {0.0, 0.4, 0.75}) {
        ScenarioSpec s = scenario_preset(5, n, d, q);
        s.beta2 = beta2;
        s.rho_x1x2 = rho;
        out.push_back(s);
      }
    }
  } else if (id == 6) {
    for (double beta1 : {0.0, 0.25}) {
      ScenarioSpec s = scenario_preset(6, n, d, q);
      s.beta1 = beta1;
      out.push_back(s);
    }
  } else {
    out.push_back(scenario_preset(id, n, d, q));
  }
  return out;
}

}  // namespace qmix
