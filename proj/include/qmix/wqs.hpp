#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "qmix/data.hpp"
#include "qmix/design.hpp"
#include "qmix/errors.hpp"
#include "qmix/regress.hpp"
#include "qmix/qgc.hpp"
#include "qmix/rng.hpp"

namespace qmix {

enum class WqsDirection { positive, negative };

inline std::string wqs_direction_name(WqsDirection d) {
  return d == WqsDirection::positive ? "positive" : "negative";
}

inline WqsDirection parse_wqs_direction(const std::string& name) {
  if (name == "positive") return WqsDirection::positive;
  if (name == "negative") return WqsDirection::negative;
  throw data_error("unknown direction '" + name + "' (expected positive or negative)");
}

struct WqsConfig {
  double train_fraction = 0.4;  // 0 disables the split: train = validate = all
  int n_bootstrap = 100;
  WqsDirection direction = WqsDirection::positive;
  bool quadratic_index = false;
  int q = 4;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(train_fraction >= 0.0 && train_fraction < 1.0)) {
      throw data_error("wqs: train fraction must lie in [0, 1), got " +
                       std::to_string(train_fraction));
    }
    if (n_bootstrap < 1) {
      throw data_error("wqs: needs at least 1 weight bootstrap, got " +
                       std::to_string(n_bootstrap));
    }
    if (q < 2) throw data_error("wqs: q must be >= 2, got " + std::to_string(q));
  }
};

struct WqsEstimate {
  double psi = 0.0;
  double se = 0.0;
  double t_statistic = 0.0;
  // Second-order index term, populated only when quadratic_index is set.
  double psi2 = std::numeric_limits<double>::quiet_NaN();
  double se2 = std::numeric_limits<double>::quiet_NaN();
  double t2_statistic = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd weights;  // d entries, non-negative, summing to one
  Eigen::VectorXd index;    // weighted score per observation, all rows
  FitResult validation_fit;
  int n_train = 0;
  int n_validation = 0;
  int uniform_fallbacks = 0;   // resamples where no coefficient had the allowed sign
  int bootstrap_retries = 0;
};

// Random train/validation split; indices come back sorted. A zero fraction
// means no split: both halves are the full sample.
inline std::pair<std::vector<int>, std::vector<int>> split_sample(int n, double train_fraction,
                                                                  std::uint64_t seed) {
  if (n < 1) throw data_error("wqs: cannot split an empty sample");
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  if (train_fraction == 0.0) return {idx, idx};

  auto engine = make_engine({seed, stream::wqs_split});
  std::shuffle(idx.begin(), idx.end(), engine);
  const int n_train = static_cast<int>(std::lround(train_fraction * n));
  std::vector<int> train(idx.begin(), idx.begin() + n_train);
  std::vector<int> validation(idx.begin() + n_train, idx.end());
  std::sort(train.begin(), train.end());
  std::sort(validation.begin(), validation.end());
  return {train, validation};
}

namespace detail {

inline Eigen::VectorXd resample_weights(const FitResult& fit, const std::vector<int>& cols,
                                        WqsDirection direction, int* fallbacks) {
  const int d = static_cast<int>(cols.size());
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  double total = 0.0;
  for (int j = 0; j < d; ++j) {
    const double b = fit.beta[cols[static_cast<std::size_t>(j)]];
    const bool allowed = direction == WqsDirection::positive ? b > 0.0 : b < 0.0;
    if (allowed) {
      w[j] = std::abs(b);
      total += std::abs(b);
    }
  }
  if (total == 0.0) {
    // No coefficient had the allowed sign; fall back to uniform weights so
    // the resample still contributes a valid simplex point.
    ++*fallbacks;
    return Eigen::VectorXd::Constant(d, 1.0 / d);
  }
  return w / total;
}

}  // namespace detail

// Bootstrap mean of per-resample weights on the training sample. Each
// resample fits the unconstrained linear model of the outcome on all
// exposures and covariates, keeps coefficients of the allowed sign
// (renormalized to sum to one), and zeroes the rest; resamples with no
// allowed coefficient contribute uniform weights. The mean across resamples
// is renormalized to the simplex.
inline Eigen::VectorXd bootstrap_weights(const MixtureData& train, const WqsConfig& config,
                                         int* uniform_fallbacks = nullptr,
                                         int* retries_out = nullptr) {
  config.validate();
  train.validate();
  const Eigen::Index n = train.rows();
  const int d = static_cast<int>(train.n_exposures());
  const ModelSpec spec = ModelSpec::linear(d, config.q);
  const int retry_budget = std::max(1, config.n_bootstrap / 10);

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
  int fallbacks = 0;
  int total_retries = 0;
  std::vector<int> rows(static_cast<std::size_t>(n));
  for (int b = 0; b < config.n_bootstrap; ++b) {
    bool done = false;
    std::string last_error;
    for (int attempt = 0; attempt <= retry_budget && !done; ++attempt) {
      auto engine = make_engine({config.seed, stream::wqs_bootstrap,
                                 static_cast<std::uint64_t>(b),
                                 static_cast<std::uint64_t>(attempt)});
      std::uniform_int_distribution<int> pick(0, static_cast<int>(n) - 1);
      for (auto& r : rows) r = pick(engine);
      try {
        const MixtureData resampled = gather_rows(train, rows);
        const DesignMatrix design = build_design(resampled, spec);
        const FitResult fit = fit_linear(design, resampled.outcome);
        sum += detail::resample_weights(fit, design.exposure_main_columns(), config.direction,
                                        &fallbacks);
        done = true;
      } catch (const numeric_error& e) {
        ++total_retries;
        last_error = e.what();
      }
    }
    if (!done) {
      throw numeric_error("wqs: weight resample " + std::to_string(b) + " kept failing after " +
                          std::to_string(retry_budget + 1) + " attempts (last: " + last_error +
                          ")");
    }
  }
  if (total_retries > retry_budget) {
    throw numeric_error("wqs: " + std::to_string(total_retries) +
                        " weight-resample failures, over the " + std::to_string(retry_budget) +
                        "-retry budget for " + std::to_string(config.n_bootstrap) +
                        " iterations");
  }

  Eigen::VectorXd mean = sum / static_cast<double>(config.n_bootstrap);
  mean /= mean.sum();
  if (uniform_fallbacks != nullptr) *uniform_fallbacks = fallbacks;
  if (retries_out != nullptr) *retries_out = total_retries;
  return mean;
}

// Weighted-index regression: learn weights on the training split, build the
// weighted score index, then estimate the index effect on the validation
// split by least squares of the outcome on (intercept, index[, index^2],
// covariates).
inline WqsEstimate wqs_fit(const MixtureData& data, const WqsConfig& config) {
  config.validate();
  data.validate();
  const Eigen::Index n = data.rows();

  auto [train_rows, validation_rows] = split_sample(static_cast<int>(n),
                                                    config.train_fraction, config.seed);
  const MixtureData train = gather_rows(data, train_rows);

  WqsEstimate est;
  est.n_train = static_cast<int>(train_rows.size());
  est.n_validation = static_cast<int>(validation_rows.size());
  est.weights = bootstrap_weights(train, config, &est.uniform_fallbacks, &est.bootstrap_retries);
  est.index = data.exposures * est.weights;

  Eigen::VectorXd index_val(static_cast<Eigen::Index>(validation_rows.size()));
  for (std::size_t i = 0; i < validation_rows.size(); ++i) {
    index_val[static_cast<Eigen::Index>(i)] = est.index[validation_rows[i]];
  }
  if (index_val.maxCoeff() - index_val.minCoeff() < 1e-12) {
    throw numeric_error("wqs: index is constant on the validation sample");
  }

  const MixtureData validation = gather_rows(data, validation_rows);
  const Eigen::Index c = validation.n_covariates();
  const Eigen::Index p = 2 + (config.quadratic_index ? 1 : 0) + c;
  DesignMatrix design;
  design.values.resize(static_cast<Eigen::Index>(validation_rows.size()), p);
  design.roles.resize(static_cast<std::size_t>(p));
  design.values.col(0).setOnes();
  design.roles[0] = {ColumnRole::Kind::intercept, -1, -1, "(intercept)"};
  design.values.col(1) = index_val;
  design.roles[1] = {ColumnRole::Kind::covariate, -1, -1, "index"};
  Eigen::Index col = 2;
  if (config.quadratic_index) {
    design.values.col(col) = index_val.cwiseProduct(index_val);
    design.roles[static_cast<std::size_t>(col)] = {ColumnRole::Kind::covariate, -1, -1,
                                                   "index^2"};
    ++col;
  }
  for (Eigen::Index k = 0; k < c; ++k, ++col) {
    design.values.col(col) = validation.covariates.col(k);
    design.roles[static_cast<std::size_t>(col)] = {ColumnRole::Kind::covariate, -1, -1,
                                                   validation.covariate_name(k)};
  }

  est.validation_fit = fit_linear(design, validation.outcome);
  est.psi = est.validation_fit.beta[1];
  est.se = std::sqrt(est.validation_fit.covariance(1, 1));
  est.t_statistic = est.psi / est.se;
  if (config.quadratic_index) {
    est.psi2 = est.validation_fit.beta[2];
    est.se2 = std::sqrt(est.validation_fit.covariance(2, 2));
    est.t2_statistic = est.psi2 / est.se2;
  }
  return est;
}

}  // namespace qmix
