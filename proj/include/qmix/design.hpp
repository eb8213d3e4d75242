#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "qmix/data.hpp"
#include "qmix/errors.hpp"
#include "qmix/regress_types.hpp"

namespace qmix {

// One product term between exposures j and k; j == k encodes a square.
struct ExtraTerm {
  int j = 0;
  int k = 0;
};

// How the underlying exposure-outcome model and the downstream summary
// model are laid out: which exposure products enter, the polynomial degree
// of the joint-exposure summary, the score range, and the link.
struct ModelSpec {
  int n_exposures = 0;
  std::vector<ExtraTerm> extra_terms;
  int msm_degree = 1;
  int q = 4;
  Link link = Link::identity;

  static ModelSpec linear(int d, int q_levels = 4, Link lnk = Link::identity) {
    ModelSpec spec;
    spec.n_exposures = d;
    spec.q = q_levels;
    spec.link = lnk;
    return spec;
  }

  ModelSpec& add_square(int j) {
    extra_terms.push_back({j, j});
    return *this;
  }

  ModelSpec& add_product(int j, int k) {
    extra_terms.push_back({j, k});
    return *this;
  }

  // No squares or products: every exposure enters linearly, so the joint
  // effect is the plain coefficient sum and per-exposure weights are defined.
  bool additive() const { return extra_terms.empty(); }

  void validate() const {
    if (n_exposures < 1) throw data_error("model: needs at least one exposure");
    if (q < 2) throw data_error("model: q must be >= 2, got " + std::to_string(q));
    if (msm_degree < 1 || msm_degree > q - 1) {
      throw data_error("model: summary degree must be in [1, q-1]; got degree " +
                       std::to_string(msm_degree) + " with q=" + std::to_string(q));
    }
    for (const auto& t : extra_terms) {
      if (t.j < 0 || t.j >= n_exposures || t.k < 0 || t.k >= n_exposures) {
        throw data_error("model: product term (" + std::to_string(t.j) + "," +
                         std::to_string(t.k) + ") is out of range for " +
                         std::to_string(n_exposures) + " exposures");
      }
    }
  }
};

struct ColumnRole {
  enum class Kind { intercept, exposure, exposure_product, covariate };
  Kind kind = Kind::intercept;
  int j = -1;  // exposure index (exposure, exposure_product)
  int k = -1;  // second exposure index (exposure_product; j == k for squares)
  std::string label;
};

// Dense regression design plus per-column provenance. Roles let downstream
// code pick out exposure main effects without guessing at column order.
struct DesignMatrix {
  Eigen::MatrixXd values;  // n x p
  std::vector<ColumnRole> roles;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }

  std::vector<int> exposure_main_columns() const {
    std::vector<int> cols_out;
    for (std::size_t c = 0; c < roles.size(); ++c) {
      if (roles[c].kind == ColumnRole::Kind::exposure) cols_out.push_back(static_cast<int>(c));
    }
    return cols_out;
  }

  void validate() const {
    if (static_cast<Eigen::Index>(roles.size()) != values.cols()) {
      throw data_error("design: role count does not match column count");
    }
    int intercepts = 0;
    for (const auto& r : roles) intercepts += (r.kind == ColumnRole::Kind::intercept) ? 1 : 0;
    if (intercepts != 1) {
      throw data_error("design: expected exactly one intercept column, found " +
                       std::to_string(intercepts));
    }
  }
};

namespace detail {

// Shared layout: intercept, exposure mains, exposure products, covariates.
// When `level` is non-negative, every exposure (and therefore every product)
// is pinned to that score, which is how counterfactual predictions at a
// common exposure level are formed.
inline DesignMatrix build_design_impl(const MixtureData& data, const ModelSpec& spec,
                                      double level) {
  spec.validate();
  data.validate();
  if (static_cast<Eigen::Index>(spec.n_exposures) != data.n_exposures()) {
    throw data_error("design: model declares " + std::to_string(spec.n_exposures) +
                     " exposures but data has " + std::to_string(data.n_exposures()));
  }
  const Eigen::Index n = data.rows();
  const Eigen::Index d = data.n_exposures();
  const Eigen::Index c = data.n_covariates();
  const Eigen::Index p = 1 + d + static_cast<Eigen::Index>(spec.extra_terms.size()) + c;
  const bool pinned = level >= 0.0;

  DesignMatrix design;
  design.values.resize(n, p);
  design.roles.resize(static_cast<std::size_t>(p));

  design.values.col(0).setOnes();
  design.roles[0] = {ColumnRole::Kind::intercept, -1, -1, "(intercept)"};

  Eigen::Index col = 1;
  for (Eigen::Index j = 0; j < d; ++j, ++col) {
    if (pinned) {
      design.values.col(col).setConstant(level);
    } else {
      design.values.col(col) = data.exposures.col(j);
    }
    design.roles[static_cast<std::size_t>(col)] = {ColumnRole::Kind::exposure,
                                                   static_cast<int>(j), -1,
                                                   data.exposure_name(j)};
  }
  for (const auto& t : spec.extra_terms) {
    if (pinned) {
      design.values.col(col).setConstant(level * level);
    } else {
      design.values.col(col) =
          data.exposures.col(t.j).cwiseProduct(data.exposures.col(t.k));
    }
    const std::string label = (t.j == t.k)
                                  ? data.exposure_name(t.j) + "^2"
                                  : data.exposure_name(t.j) + ":" + data.exposure_name(t.k);
    design.roles[static_cast<std::size_t>(col)] = {ColumnRole::Kind::exposure_product, t.j, t.k,
                                                   label};
    ++col;
  }
  for (Eigen::Index k = 0; k < c; ++k, ++col) {
    design.values.col(col) = data.covariates.col(k);
    design.roles[static_cast<std::size_t>(col)] = {ColumnRole::Kind::covariate, -1, -1,
                                                   data.covariate_name(k)};
  }
  return design;
}

}  // namespace detail

inline DesignMatrix build_design(const MixtureData& data, const ModelSpec& spec) {
  return detail::build_design_impl(data, spec, -1.0);
}

// Design with every exposure set to the same score level (counterfactual
// "all exposures at level l"); covariates keep their observed values.
inline DesignMatrix build_design_at_level(const MixtureData& data, const ModelSpec& spec,
                                          int level) {
  if (level < 0 || level >= spec.q) {
    throw data_error("design: level " + std::to_string(level) + " outside [0, q-1]");
  }
  return detail::build_design_impl(data, spec, static_cast<double>(level));
}

}  // namespace qmix
