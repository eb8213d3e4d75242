#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qmix/data.hpp"
#include "qmix/design.hpp"
#include "qmix/errors.hpp"
#include "qmix/regress.hpp"
#include "qmix/rng.hpp"

namespace qmix {

// Multiplier for two-sided 95% Wald intervals, pinned project-wide.
inline constexpr double wald_z = 1.96;

enum class VarianceMethod { analytic, bootstrap };

inline std::string variance_method_name(VarianceMethod m) {
  return m == VarianceMethod::analytic ? "analytic" : "bootstrap";
}

// Joint mixture effect estimate. psi holds one entry per polynomial term of
// the summary model (slope first, curvature second when degree is 2). The
// se/ci vectors are empty when no variance has been attached yet.
struct MixtureEstimate {
  Eigen::VectorXd psi;
  Eigen::VectorXd se;
  Eigen::VectorXd ci_lower;
  Eigen::VectorXd ci_upper;
  bool weights_defined = false;
  std::map<std::string, double> weights_positive;
  std::map<std::string, double> weights_negative;
  double partial_effect_positive = 0.0;
  double partial_effect_negative = 0.0;
  FitResult underlying_fit;
  VarianceMethod variance_method = VarianceMethod::analytic;
  int bootstrap_iterations = 0;
  int bootstrap_retries = 0;
};

// Joint effect of a one-level increase in every exposure at once, with its
// variance, read off a linear additive fit: the coefficient sum and the
// corresponding sum over the coefficient covariance block.
inline std::pair<double, double> psi_linear(const FitResult& fit,
                                            const std::vector<int>& exposure_columns) {
  if (exposure_columns.empty()) throw data_error("psi: no exposure columns given");
  double psi = 0.0;
  double var = 0.0;
  for (int j : exposure_columns) {
    if (j < 0 || j >= fit.beta.size()) {
      throw data_error("psi: exposure column " + std::to_string(j) + " outside fit of size " +
                       std::to_string(fit.beta.size()));
    }
    psi += fit.beta[j];
  }
  for (int j : exposure_columns) {
    for (int k : exposure_columns) var += fit.covariance(j, k);
  }
  return {psi, var};
}

struct WeightPartition {
  std::map<std::string, double> positive;
  std::map<std::string, double> negative;
  double partial_positive = 0.0;
  double partial_negative = 0.0;
};

// Split exposures by coefficient sign; within each sign the weights are the
// coefficients over their same-sign sum, so each partition sums to one.
// Exposures with an exactly zero coefficient are reported in the positive
// partition with weight zero.
inline WeightPartition weights_partition(const FitResult& fit,
                                         const std::vector<int>& exposure_columns,
                                         const std::vector<std::string>& names) {
  if (names.size() != exposure_columns.size()) {
    throw data_error("weights: name count does not match exposure column count");
  }
  WeightPartition part;
  for (int j : exposure_columns) {
    const double b = fit.beta[j];
    if (b > 0.0) part.partial_positive += b;
    if (b < 0.0) part.partial_negative += b;
  }
  for (std::size_t i = 0; i < exposure_columns.size(); ++i) {
    const double b = fit.beta[exposure_columns[i]];
    if (b < 0.0) {
      part.negative[names[i]] = b / part.partial_negative;
    } else if (b > 0.0) {
      part.positive[names[i]] = b / part.partial_positive;
    } else {
      part.positive[names[i]] = 0.0;
    }
  }
  return part;
}

// Same, but reads the exposure columns from design roles and refuses models
// where per-exposure weights are undefined (any product or square term).
inline WeightPartition weights_partition(const FitResult& fit, const DesignMatrix& design) {
  std::vector<int> cols;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < design.roles.size(); ++c) {
    if (design.roles[c].kind == ColumnRole::Kind::exposure_product) {
      throw data_error(
          "weights: per-exposure weights are undefined when the model has "
          "product or square terms");
    }
    if (design.roles[c].kind == ColumnRole::Kind::exposure) {
      cols.push_back(static_cast<int>(c));
      names.push_back(design.roles[c].label);
    }
  }
  return weights_partition(fit, cols, names);
}

namespace detail {

inline void attach_wald_interval(MixtureEstimate& est) {
  est.ci_lower = est.psi - wald_z * est.se;
  est.ci_upper = est.psi + wald_z * est.se;
}

inline void attach_weights(MixtureEstimate& est, const DesignMatrix& design,
                           const ModelSpec& spec) {
  if (!spec.additive()) return;
  WeightPartition part = weights_partition(est.underlying_fit, design);
  est.weights_defined = true;
  est.weights_positive = std::move(part.positive);
  est.weights_negative = std::move(part.negative);
  est.partial_effect_positive = part.partial_positive;
  est.partial_effect_negative = part.partial_negative;
}

inline FitResult fit_underlying(const DesignMatrix& design, const MixtureData& data,
                                const ModelSpec& spec) {
  return spec.link == Link::identity ? fit_linear(design, data.outcome)
                                     : fit_logistic(design, data.outcome);
}

}  // namespace detail

// Point estimates via the counterfactual summary model: fit the underlying
// model, predict every row with all exposures pinned to each level
// 0..q-1, then regress the stacked predictions on a polynomial in the
// level. With a logit link the predictions are probabilities and the
// summary fit is a fractional-response logit, so psi stays on the log-odds
// scale. No variance is attached here.
inline MixtureEstimate msm_psi(const MixtureData& data, const ModelSpec& spec) {
  spec.validate();
  DesignMatrix design = build_design(data, spec);
  MixtureEstimate est;
  est.underlying_fit = detail::fit_underlying(design, data, spec);

  const Eigen::Index n = data.rows();
  const int q = spec.q;
  const int degree = spec.msm_degree;

  Eigen::VectorXd stacked(n * q);
  DesignMatrix msm_design;
  msm_design.values.resize(n * q, 1 + degree);
  msm_design.roles.resize(static_cast<std::size_t>(1 + degree));
  msm_design.roles[0] = {ColumnRole::Kind::intercept, -1, -1, "(intercept)"};
  for (int t = 1; t <= degree; ++t) {
    msm_design.roles[static_cast<std::size_t>(t)] = {
        ColumnRole::Kind::covariate, -1, -1,
        t == 1 ? std::string("level") : "level^" + std::to_string(t)};
  }
  for (int level = 0; level < q; ++level) {
    const DesignMatrix cf = build_design_at_level(data, spec, level);
    stacked.segment(level * n, n) = predict(est.underlying_fit, cf);
    double power = 1.0;
    msm_design.values.block(level * n, 0, n, 1).setOnes();
    for (int t = 1; t <= degree; ++t) {
      power *= static_cast<double>(level);
      msm_design.values.block(level * n, t, n, 1).setConstant(power);
    }
  }

  const FitResult msm = spec.link == Link::identity
                            ? fit_linear(msm_design, stacked)
                            : fit_fractional_logit(msm_design, stacked);
  est.psi = msm.beta.segment(1, degree);
  detail::attach_weights(est, design, spec);
  return est;
}

// Nonparametric bootstrap variance around the full-sample point estimates:
// resample rows, recompute the summary-model estimates, and take the
// across-resample standard deviation. A resample whose refit fails
// numerically is retried with a fresh draw; the total retry budget is 10%
// of the requested iterations, after which the bootstrap reports failure.
// Every (iteration, attempt) pair owns a derived RNG stream, so results do
// not depend on scheduling.
inline MixtureEstimate bootstrap_ci(const MixtureData& data, const ModelSpec& spec,
                                    int iterations, std::uint64_t seed) {
  if (iterations < 2) {
    throw data_error("bootstrap: needs at least 2 iterations, got " + std::to_string(iterations));
  }
  MixtureEstimate est = msm_psi(data, spec);
  const Eigen::Index n = data.rows();
  const int degree = spec.msm_degree;
  const int retry_budget = std::max(1, iterations / 10);

  Eigen::MatrixXd draws(iterations, degree);
  int total_retries = 0;
  std::vector<int> rows(static_cast<std::size_t>(n));
  for (int b = 0; b < iterations; ++b) {
    bool done = false;
    std::string last_error;
    for (int attempt = 0; attempt <= retry_budget && !done; ++attempt) {
      auto engine = make_engine({seed, stream::qgc_bootstrap, static_cast<std::uint64_t>(b),
                                 static_cast<std::uint64_t>(attempt)});
      std::uniform_int_distribution<int> pick(0, static_cast<int>(n) - 1);
      for (auto& r : rows) r = pick(engine);
      try {
        const MixtureEstimate redo = msm_psi(gather_rows(data, rows), spec);
        draws.row(b) = redo.psi.transpose();
        done = true;
      } catch (const numeric_error& e) {
        ++total_retries;
        last_error = e.what();
      }
    }
    if (!done) {
      throw numeric_error("bootstrap: iteration " + std::to_string(b) +
                          " kept failing after " + std::to_string(retry_budget + 1) +
                          " attempts (last: " + last_error + ")");
    }
  }
  if (total_retries > retry_budget) {
    throw numeric_error("bootstrap: " + std::to_string(total_retries) + " resample failures, over the " +
                        std::to_string(retry_budget) + "-retry budget for " +
                        std::to_string(iterations) + " iterations");
  }

  est.se.resize(degree);
  const Eigen::RowVectorXd mean = draws.colwise().mean();
  for (int t = 0; t < degree; ++t) {
    const double ss = (draws.col(t).array() - mean[t]).square().sum();
    est.se[t] = std::sqrt(ss / static_cast<double>(iterations - 1));
  }
  detail::attach_wald_interval(est);
  est.variance_method = VarianceMethod::bootstrap;
  est.bootstrap_iterations = iterations;
  est.bootstrap_retries = total_retries;
  return est;
}

struct QgcOptions {
  std::optional<VarianceMethod> variance;  // default: analytic when available
  int bootstrap_iterations = 200;
  std::uint64_t seed = 0;
};

// Main entry point. Linear additive identity-link models with a degree-1
// summary get the closed-form coefficient-sum estimate and its analytic
// variance; everything else goes through the summary model with bootstrap
// variance.
inline MixtureEstimate estimate(const MixtureData& data, const ModelSpec& spec,
                                const QgcOptions& options = {}) {
  spec.validate();
  const bool analytic_ok =
      spec.additive() && spec.link == Link::identity && spec.msm_degree == 1;
  const VarianceMethod method = options.variance.value_or(
      analytic_ok ? VarianceMethod::analytic : VarianceMethod::bootstrap);
  if (method == VarianceMethod::analytic) {
    if (!analytic_ok) {
      throw data_error(
          "estimate: analytic variance needs an additive identity-link model "
          "with a degree-1 summary; use bootstrap variance instead");
    }
    DesignMatrix design = build_design(data, spec);
    MixtureEstimate est;
    est.underlying_fit = fit_linear(design, data.outcome);
    const auto [psi, var] = psi_linear(est.underlying_fit, design.exposure_main_columns());
    est.psi = Eigen::VectorXd::Constant(1, psi);
    est.se = Eigen::VectorXd::Constant(1, std::sqrt(var));
    detail::attach_wald_interval(est);
    detail::attach_weights(est, design, spec);
    est.variance_method = VarianceMethod::analytic;
    return est;
  }
  return bootstrap_ci(data, spec, options.bootstrap_iterations, options.seed);
}

}  // namespace qmix
