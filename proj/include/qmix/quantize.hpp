#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "qmix/errors.hpp"

namespace qmix {

// Integer score matrix produced by per-column quantile binning, together
// with the cut points needed to interpret the bins or apply them to new data.
struct QuantizedMatrix {
  Eigen::MatrixXi scores;                      // n x d, entries in [0, q-1]
  std::vector<std::vector<double>> cutpoints;  // d lists, each q-1 non-decreasing values
  int q = 0;
  std::vector<std::string> column_names;
};

namespace detail {

// Empirical quantile with linear interpolation between order statistics
// (the common spreadsheet/statistics-package default).
inline double interpolated_quantile(const std::vector<double>& sorted, double p) {
  const std::size_t n = sorted.size();
  const double h = static_cast<double>(n - 1) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= n) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace detail

// Bin one column into q scores 0..q-1 by its own empirical quantiles.
// Scores count how many cut points lie strictly below the value, so ties at
// a cut point fall in the lower bin. Columns that already take q or fewer
// distinct values map rank-of-distinct-value -> score, which leaves
// previously quantized columns unchanged; their cut points are midpoints
// between neighbouring distinct values, padded to length q-1 with the
// column maximum (padding can never sit strictly below an observation).
inline std::pair<Eigen::VectorXi, std::vector<double>> quantize_column(
    const Eigen::Ref<const Eigen::VectorXd>& x, int q,
    const std::string& label = "column") {
  const Eigen::Index n = x.size();
  if (q < 2) throw data_error(label + ": quantization needs q >= 2, got " + std::to_string(q));
  if (n < q) {
    throw data_error(label + ": quantization needs at least q=" + std::to_string(q) +
                     " observations, got " + std::to_string(n));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(x[i])) {
      throw data_error(label + ": non-finite value at row " + std::to_string(i));
    }
  }

  std::vector<double> sorted(x.data(), x.data() + n);
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> distinct(sorted);
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  std::vector<double> cuts;
  cuts.reserve(static_cast<std::size_t>(q - 1));
  if (distinct.size() <= static_cast<std::size_t>(q)) {
    for (std::size_t k = 1; k < distinct.size(); ++k) {
      cuts.push_back(0.5 * (distinct[k - 1] + distinct[k]));
    }
    while (cuts.size() < static_cast<std::size_t>(q - 1)) cuts.push_back(distinct.back());
  } else {
    for (int k = 1; k < q; ++k) {
      cuts.push_back(detail::interpolated_quantile(sorted, static_cast<double>(k) / q));
    }
  }

  Eigen::VectorXi scores(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    scores[i] = static_cast<int>(std::lower_bound(cuts.begin(), cuts.end(), x[i]) - cuts.begin());
  }
  return {std::move(scores), std::move(cuts)};
}

inline QuantizedMatrix quantize_matrix(const Eigen::Ref<const Eigen::MatrixXd>& x, int q,
                                       std::vector<std::string> names = {}) {
  const Eigen::Index d = x.cols();
  if (d < 1) throw data_error("quantization needs at least one column");
  if (names.empty()) {
    for (Eigen::Index j = 0; j < d; ++j) names.push_back("X" + std::to_string(j + 1));
  }
  if (static_cast<Eigen::Index>(names.size()) != d) {
    throw data_error("quantization: got " + std::to_string(names.size()) + " names for " +
                     std::to_string(d) + " columns");
  }

  QuantizedMatrix out;
  out.scores.resize(x.rows(), d);
  out.cutpoints.resize(static_cast<std::size_t>(d));
  out.q = q;
  out.column_names = std::move(names);
  for (Eigen::Index j = 0; j < d; ++j) {
    auto [scores, cuts] = quantize_column(x.col(j), q, out.column_names[static_cast<std::size_t>(j)]);
    out.scores.col(j) = scores;
    out.cutpoints[static_cast<std::size_t>(j)] = std::move(cuts);
  }
  return out;
}

}  // namespace qmix
