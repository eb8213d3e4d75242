#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "qmix/errors.hpp"
#include "qmix/quantize.hpp"

namespace qmix {

// One analysis-ready sample: quantized exposure scores (stored as reals so
// they drop straight into design matrices), optional covariates kept on
// their original scale, and the outcome.
struct MixtureData {
  Eigen::MatrixXd exposures;   // n x d, quantile scores 0..q-1
  Eigen::MatrixXd covariates;  // n x c (c may be 0)
  Eigen::VectorXd outcome;     // n
  std::vector<std::string> exposure_names;
  std::vector<std::string> covariate_names;

  Eigen::Index rows() const { return outcome.size(); }
  Eigen::Index n_exposures() const { return exposures.cols(); }
  Eigen::Index n_covariates() const { return covariates.cols(); }

  void validate() const {
    const Eigen::Index n = rows();
    if (n < 1) throw data_error("data: empty sample");
    if (exposures.rows() != n) {
      throw data_error("data: exposures have " + std::to_string(exposures.rows()) +
                       " rows but outcome has " + std::to_string(n));
    }
    if (covariates.cols() > 0 && covariates.rows() != n) {
      throw data_error("data: covariates have " + std::to_string(covariates.rows()) +
                       " rows but outcome has " + std::to_string(n));
    }
    if (exposures.cols() < 1) throw data_error("data: no exposure columns");
    if (!exposures.allFinite()) throw data_error("data: non-finite exposure value");
    if (covariates.size() > 0 && !covariates.allFinite()) {
      throw data_error("data: non-finite covariate value");
    }
    if (!outcome.allFinite()) throw data_error("data: non-finite outcome value");
    if (!exposure_names.empty() &&
        static_cast<Eigen::Index>(exposure_names.size()) != exposures.cols()) {
      throw data_error("data: exposure name count does not match exposure columns");
    }
    if (!covariate_names.empty() &&
        static_cast<Eigen::Index>(covariate_names.size()) != covariates.cols()) {
      throw data_error("data: covariate name count does not match covariate columns");
    }
  }

  std::string exposure_name(Eigen::Index j) const {
    if (j < static_cast<Eigen::Index>(exposure_names.size())) {
      return exposure_names[static_cast<std::size_t>(j)];
    }
    return "X" + std::to_string(j + 1);
  }

  std::string covariate_name(Eigen::Index k) const {
    if (k < static_cast<Eigen::Index>(covariate_names.size())) {
      return covariate_names[static_cast<std::size_t>(k)];
    }
    return "Z" + std::to_string(k + 1);
  }
};

// Quantize raw exposures and assemble a MixtureData; cut points are returned
// through `bins` when callers need to report or reuse them.
inline MixtureData make_mixture_data(const Eigen::Ref<const Eigen::MatrixXd>& raw_exposures,
                                     const Eigen::Ref<const Eigen::MatrixXd>& covariates,
                                     const Eigen::Ref<const Eigen::VectorXd>& outcome, int q,
                                     std::vector<std::string> exposure_names = {},
                                     std::vector<std::string> covariate_names = {},
                                     QuantizedMatrix* bins = nullptr) {
  QuantizedMatrix qm = quantize_matrix(raw_exposures, q, std::move(exposure_names));
  MixtureData data;
  data.exposures = qm.scores.cast<double>();
  data.covariates = covariates;
  data.outcome = outcome;
  data.exposure_names = qm.column_names;
  data.covariate_names = std::move(covariate_names);
  data.validate();
  if (bins != nullptr) *bins = std::move(qm);
  return data;
}

// Row-gather used by resampling and sample splitting.
inline MixtureData gather_rows(const MixtureData& data, const std::vector<int>& rows) {
  MixtureData out;
  out.exposures.resize(static_cast<Eigen::Index>(rows.size()), data.exposures.cols());
  out.covariates.resize(static_cast<Eigen::Index>(rows.size()), data.covariates.cols());
  out.outcome.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Eigen::Index r = rows[i];
    out.exposures.row(static_cast<Eigen::Index>(i)) = data.exposures.row(r);
    if (data.covariates.cols() > 0) {
      out.covariates.row(static_cast<Eigen::Index>(i)) = data.covariates.row(r);
    }
    out.outcome[static_cast<Eigen::Index>(i)] = data.outcome[r];
  }
  out.exposure_names = data.exposure_names;
  out.covariate_names = data.covariate_names;
  return out;
}

}  // namespace qmix
