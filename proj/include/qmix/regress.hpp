#pragma once

#include <Eigen/Dense>
#include <Eigen/QR>
#include <cmath>
#include <string>

#include "qmix/design.hpp"
#include "qmix/errors.hpp"
#include "qmix/regress_types.hpp"

namespace qmix {

struct IrlsOptions {
  int max_iterations = 50;
  double score_tolerance = 1e-8;      // max |X'(y - mu)|
  double deviance_tolerance = 1e-10;  // relative deviance change
  double separation_threshold = 30.0; // |beta| beyond which we suspect separation
};

namespace detail {

inline double expit(double v) { return 1.0 / (1.0 + std::exp(-v)); }

inline void check_regression_input(const DesignMatrix& design, const Eigen::VectorXd& y) {
  design.validate();
  if (design.rows() != y.size()) {
    throw data_error("regression: design has " + std::to_string(design.rows()) +
                     " rows but response has " + std::to_string(y.size()));
  }
  if (!design.values.allFinite()) throw data_error("regression: non-finite design value");
  if (!y.allFinite()) throw data_error("regression: non-finite response value");
  if (design.rows() <= design.cols()) {
    throw data_error("regression: need more rows than columns (n=" +
                     std::to_string(design.rows()) + ", p=" + std::to_string(design.cols()) + ")");
  }
}

// Columns are declared collinear when a pivot falls below 1e-10 times the
// largest pivot; the error names the first column the pivoting rejected.
inline void check_rank(const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr,
                       const DesignMatrix& design) {
  const Eigen::Index p = design.cols();
  if (qr.rank() < p) {
    const int offender = qr.colsPermutation().indices()(qr.rank());
    throw numeric_error("regression: design is rank deficient; column '" +
                        design.roles[static_cast<std::size_t>(offender)].label +
                        "' is collinear with earlier columns");
  }
}

// (X'X)^-1 from X P = Q R:  (X'X)^-1 = P R^-1 R^-T P'.
inline Eigen::MatrixXd gram_inverse(const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr) {
  const Eigen::Index p = qr.matrixQR().cols();
  const Eigen::MatrixXd r = qr.matrixQR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd rinv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd core = rinv * rinv.transpose();
  Eigen::MatrixXd cov = qr.colsPermutation() * core * qr.colsPermutation().transpose();
  return 0.5 * (cov + cov.transpose());
}

// Quasibinomial deviance; valid for fractional responses in [0, 1].
inline double binomial_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& mu) {
  double dev = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double m = std::min(std::max(mu[i], 1e-15), 1.0 - 1e-15);
    if (y[i] > 0.0) dev += y[i] * std::log(y[i] / m);
    if (y[i] < 1.0) dev += (1.0 - y[i]) * std::log((1.0 - y[i]) / (1.0 - m));
  }
  return 2.0 * dev;
}

// IRLS for the logit link. Responses may be fractional (the counterfactual
// summary fit regresses predicted probabilities), so convergence and
// deviance are handled quasibinomially.
inline FitResult irls_logit(const DesignMatrix& design, const Eigen::VectorXd& y,
                            const IrlsOptions& opt) {
  check_regression_input(design, y);
  const Eigen::MatrixXd& x = design.values;
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd mu = eta.unaryExpr([](double v) { return expit(v); });
  double dev = binomial_deviance(y, mu);

  FitResult fit;
  fit.link = Link::logit;
  fit.n = n;

  for (int iter = 1; iter <= opt.max_iterations; ++iter) {
    fit.iterations = iter;
    const Eigen::VectorXd w = (mu.array() * (1.0 - mu.array())).cwiseMax(1e-10).matrix();
    const Eigen::VectorXd score = x.transpose() * (y - mu);
    if (score.cwiseAbs().maxCoeff() < opt.score_tolerance) {
      fit.converged = true;
      break;
    }

    const Eigen::VectorXd sqrt_w = w.cwiseSqrt();
    const Eigen::MatrixXd xw = sqrt_w.asDiagonal() * x;
    const Eigen::VectorXd z = eta + (y - mu).cwiseQuotient(w);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xw);
    qr.setThreshold(1e-10);
    check_rank(qr, design);
    Eigen::VectorXd beta_new = qr.solve(sqrt_w.cwiseProduct(z));

    // Step-halving keeps the deviance from increasing on aggressive updates.
    Eigen::VectorXd eta_new = x * beta_new;
    Eigen::VectorXd mu_new = eta_new.unaryExpr([](double v) { return expit(v); });
    double dev_new = binomial_deviance(y, mu_new);
    for (int half = 0; half < 30 && (!std::isfinite(dev_new) || dev_new > dev + 1e-12); ++half) {
      beta_new = 0.5 * (beta_new + beta);
      eta_new = x * beta_new;
      mu_new = eta_new.unaryExpr([](double v) { return expit(v); });
      dev_new = binomial_deviance(y, mu_new);
    }

    const double rel_change = std::abs(dev - dev_new) / (std::abs(dev_new) + 0.1);
    beta = beta_new;
    eta = eta_new;
    mu = mu_new;
    dev = dev_new;

    if (beta.cwiseAbs().maxCoeff() > opt.separation_threshold) {
      const Eigen::VectorXd score_now = x.transpose() * (y - mu);
      if (score_now.cwiseAbs().maxCoeff() > opt.score_tolerance) {
        throw numeric_error(
            "regression: coefficients diverging with a non-vanishing score; "
            "responses look quasi-separated");
      }
    }
    if (rel_change < opt.deviance_tolerance) {
      fit.converged = true;
      break;
    }
  }
  if (!fit.converged) {
    throw numeric_error("regression: IRLS did not converge in " +
                        std::to_string(opt.max_iterations) + " iterations");
  }

  const Eigen::VectorXd w_final = (mu.array() * (1.0 - mu.array())).cwiseMax(1e-10).matrix();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_final(
      Eigen::MatrixXd(w_final.cwiseSqrt().asDiagonal() * x));
  qr_final.setThreshold(1e-10);
  check_rank(qr_final, design);
  fit.beta = beta;
  fit.covariance = gram_inverse(qr_final);
  fit.residual_variance = 0.0;
  return fit;
}

}  // namespace detail

// Ordinary least squares via column-pivoted QR.
inline FitResult fit_linear(const DesignMatrix& design, const Eigen::VectorXd& y) {
  detail::check_regression_input(design, y);
  const Eigen::Index n = design.rows();
  const Eigen::Index p = design.cols();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design.values);
  qr.setThreshold(1e-10);
  detail::check_rank(qr, design);

  FitResult fit;
  fit.beta = qr.solve(y);
  const Eigen::VectorXd resid = y - design.values * fit.beta;
  fit.residual_variance = resid.squaredNorm() / static_cast<double>(n - p);
  fit.covariance = fit.residual_variance * detail::gram_inverse(qr);
  fit.link = Link::identity;
  fit.n = n;
  fit.converged = true;
  return fit;
}

// Logistic regression; responses must be exactly 0 or 1.
inline FitResult fit_logistic(const DesignMatrix& design, const Eigen::VectorXd& y,
                              const IrlsOptions& opt = {}) {
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] != 0.0 && y[i] != 1.0) {
      throw data_error("regression: logistic response must be 0 or 1; row " + std::to_string(i) +
                       " has " + std::to_string(y[i]));
    }
  }
  return detail::irls_logit(design, y, opt);
}

// Logit-link fit for fractional responses in [0, 1] (quasibinomial); used
// for summary models over predicted probabilities.
inline FitResult fit_fractional_logit(const DesignMatrix& design, const Eigen::VectorXd& y,
                                      const IrlsOptions& opt = {}) {
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] < 0.0 || y[i] > 1.0) {
      throw data_error("regression: fractional logit response must lie in [0, 1]; row " +
                       std::to_string(i) + " has " + std::to_string(y[i]));
    }
  }
  return detail::irls_logit(design, y, opt);
}

inline Eigen::VectorXd predict(const FitResult& fit, const DesignMatrix& design) {
  if (design.cols() != fit.beta.size()) {
    throw data_error("predict: design has " + std::to_string(design.cols()) +
                     " columns but fit has " + std::to_string(fit.beta.size()) +
                     " coefficients");
  }
  Eigen::VectorXd eta = design.values * fit.beta;
  if (fit.link == Link::logit) {
    return eta.unaryExpr([](double v) { return detail::expit(v); });
  }
  return eta;
}

}  // namespace qmix
