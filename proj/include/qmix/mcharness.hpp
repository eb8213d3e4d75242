#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "qmix/errors.hpp"
#include "qmix/parallel.hpp"
#include "qmix/qgc.hpp"
#include "qmix/rng.hpp"
#include "qmix/simgen.hpp"
#include "qmix/wqs.hpp"

namespace qmix {

enum class Method { qgcomp, wqs, wqs_nosplit };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::qgcomp: return "qgcomp";
    case Method::wqs: return "wqs";
    case Method::wqs_nosplit: return "wqs_nosplit";
  }
  return "?";
}

inline Method parse_method(const std::string& name) {
  if (name == "qgcomp") return Method::qgcomp;
  if (name == "wqs") return Method::wqs;
  if (name == "wqs_nosplit") return Method::wqs_nosplit;
  throw data_error("unknown method '" + name + "' (expected qgcomp, wqs or wqs_nosplit)");
}

struct HarnessConfig {
  std::vector<Method> methods{Method::qgcomp, Method::wqs};
  int replications = 1000;
  std::uint64_t base_seed = 0;
  int qgc_bootstrap = 200;
  int wqs_bootstrap = 100;
  double wqs_train_fraction = 0.4;
  // Default to a quadratic summary (and index) exactly when the scenario has
  // a square or product term.
  std::optional<int> msm_degree;
  std::optional<bool> quadratic_index;
  int threads = 0;

  void validate() const {
    if (methods.empty()) throw data_error("harness: no methods requested");
    if (replications < 1) throw data_error("harness: replications must be >= 1");
    if (qgc_bootstrap < 2) throw data_error("harness: qgc bootstrap must be >= 2");
    if (wqs_bootstrap < 1) throw data_error("harness: wqs bootstrap must be >= 1");
    if (!(wqs_train_fraction >= 0.0 && wqs_train_fraction < 1.0)) {
      throw data_error("harness: wqs train fraction must lie in [0, 1)");
    }
  }
};

// One estimator run on one simulated dataset. Vectors are indexed by summary
// component (slope, then curvature when present). `failed` rows carry the
// error text instead of estimates.
struct ReplicationResult {
  ScenarioSpec scenario;
  Method method = Method::qgcomp;
  int replication = 0;
  Eigen::VectorXd truth;
  Eigen::VectorXd estimate;
  Eigen::VectorXd se;
  Eigen::VectorXd ci_lower;
  Eigen::VectorXd ci_upper;
  std::vector<int> reject;
  double exposure1_se = std::numeric_limits<double>::quiet_NaN();  // qgcomp only
  double realized_rho_x1x2 = std::numeric_limits<double>::quiet_NaN();
  double realized_rho_xc = std::numeric_limits<double>::quiet_NaN();
  bool failed = false;
  std::string error;
};

// Monte Carlo summary for one (scenario cell, method, component).
struct SummaryRow {
  ScenarioSpec scenario;
  Method method = Method::qgcomp;
  int component = 1;  // 1-based: 1 = slope, 2 = curvature
  double truth = 0.0;
  double bias = 0.0;
  double mcse = 0.0;   // SD of estimates across replications
  double rmvar = 0.0;  // sqrt of mean estimated variance
  double coverage = 0.0;
  double power = 0.0;  // rejection rate; type-I error under a null
  int replications = 0;
  int failures = 0;
};

namespace detail {

// Value-determined key so sibling scenario variants (same id, different
// coefficients) get distinct RNG streams.
inline std::uint64_t scenario_key(const ScenarioSpec& s) {
  return derive_seed({static_cast<std::uint64_t>(s.id), std::bit_cast<std::uint64_t>(s.beta1),
                      std::bit_cast<std::uint64_t>(s.beta2),
                      std::bit_cast<std::uint64_t>(s.beta_11),
                      std::bit_cast<std::uint64_t>(s.beta_12),
                      std::bit_cast<std::uint64_t>(s.beta_c),
                      std::bit_cast<std::uint64_t>(s.rho_x1x2),
                      std::bit_cast<std::uint64_t>(s.rho_xc),
                      static_cast<std::uint64_t>(s.n), static_cast<std::uint64_t>(s.d),
                      static_cast<std::uint64_t>(s.q),
                      static_cast<std::uint64_t>(s.equal_split_betas ? 1 : 0)});
}

inline std::vector<int> wald_rejections(const Eigen::VectorXd& est, const Eigen::VectorXd& se) {
  std::vector<int> reject(static_cast<std::size_t>(est.size()));
  for (Eigen::Index k = 0; k < est.size(); ++k) {
    reject[static_cast<std::size_t>(k)] = std::abs(est[k] / se[k]) > wald_z ? 1 : 0;
  }
  return reject;
}

// Sort key covering every field that defines a summary cell.
inline auto summary_sort_key(const ReplicationResult& r, int component) {
  const ScenarioSpec& s = r.scenario;
  return std::make_tuple(s.id, s.n, s.d, s.q, s.beta1, s.beta2, s.beta_11, s.beta_12, s.beta_c,
                         s.rho_x1x2, s.rho_xc, static_cast<int>(s.equal_split_betas),
                         static_cast<int>(r.method), component);
}

}  // namespace detail

// Aggregate one cell (same scenario values, same method) into per-component
// metrics. Rows are folded in replication order, so the result is invariant
// to input permutation.
inline SummaryRow summarize_metrics(std::vector<const ReplicationResult*> cell, int component) {
  if (cell.empty()) throw data_error("summary: empty cell");
  std::sort(cell.begin(), cell.end(), [](const ReplicationResult* a, const ReplicationResult* b) {
    return a->replication < b->replication;
  });

  SummaryRow row;
  row.scenario = cell.front()->scenario;
  row.method = cell.front()->method;
  row.component = component + 1;

  double sum = 0.0;
  double sum_var = 0.0;
  int covered = 0;
  int rejected = 0;
  std::vector<double> estimates;
  estimates.reserve(cell.size());
  double truth = std::numeric_limits<double>::quiet_NaN();
  for (const ReplicationResult* r : cell) {
    if (r->failed) {
      ++row.failures;
      continue;
    }
    if (component >= r->estimate.size()) {
      throw data_error("summary: component " + std::to_string(component + 1) +
                       " not present in replication results");
    }
    truth = r->truth[component];
    const double est = r->estimate[component];
    estimates.push_back(est);
    sum += est;
    sum_var += r->se[component] * r->se[component];
    covered += (r->ci_lower[component] <= truth && truth <= r->ci_upper[component]) ? 1 : 0;
    rejected += r->reject[static_cast<std::size_t>(component)];
  }
  const int n_ok = static_cast<int>(estimates.size());
  if (n_ok < 2) throw numeric_error("summary: fewer than 2 successful replications in cell");

  const double mean = sum / n_ok;
  double ss = 0.0;
  for (double est : estimates) ss += (est - mean) * (est - mean);

  row.truth = truth;
  row.bias = mean - truth;
  row.mcse = std::sqrt(ss / (n_ok - 1));
  row.rmvar = std::sqrt(sum_var / n_ok);
  row.coverage = static_cast<double>(covered) / n_ok;
  row.power = static_cast<double>(rejected) / n_ok;
  row.replications = n_ok;
  row.failures = static_cast<int>(cell.size()) - n_ok;
  return row;
}

namespace detail {

// Cells sorted by scenario values, method — independent of input order.
inline std::vector<std::vector<const ReplicationResult*>> grouped_cells(
    const std::vector<ReplicationResult>& results) {
  std::vector<const ReplicationResult*> keys;
  keys.reserve(results.size());
  for (const auto& r : results) keys.push_back(&r);
  std::sort(keys.begin(), keys.end(), [](const ReplicationResult* a, const ReplicationResult* b) {
    return summary_sort_key(*a, 0) < summary_sort_key(*b, 0);
  });

  std::vector<std::vector<const ReplicationResult*>> cells;
  std::size_t i = 0;
  while (i < keys.size()) {
    std::size_t j = i;
    std::vector<const ReplicationResult*> cell;
    while (j < keys.size() && summary_sort_key(*keys[j], 0) == summary_sort_key(*keys[i], 0)) {
      cell.push_back(keys[j]);
      ++j;
    }
    cells.push_back(std::move(cell));
    i = j;
  }
  return cells;
}

inline Eigen::Index cell_components(const std::vector<const ReplicationResult*>& cell) {
  for (const ReplicationResult* r : cell) {
    if (!r->failed) return r->estimate.size();
  }
  return 0;
}

}  // namespace detail

// Group replication rows into cells and summarize each component.
inline std::vector<SummaryRow> summarize(const std::vector<ReplicationResult>& results) {
  std::vector<SummaryRow> rows;
  for (const auto& cell : detail::grouped_cells(results)) {
    const Eigen::Index components = detail::cell_components(cell);
    for (Eigen::Index k = 0; k < components; ++k) {
      rows.push_back(summarize_metrics(cell, static_cast<int>(k)));
    }
  }
  return rows;
}

// Per-cell plotting data: interval widths and realized correlations averaged
// over successful replications, alongside the bias.
struct FigureRow {
  ScenarioSpec scenario;
  Method method = Method::qgcomp;
  int component = 1;
  double truth = 0.0;
  double bias = 0.0;
  double mean_ci_width = 0.0;
  // Width of the Wald interval for the first exposure's own coefficient in
  // the underlying model (qgcomp cells only; NaN otherwise).
  double mean_exposure1_ci_width = std::numeric_limits<double>::quiet_NaN();
  double mean_realized_rho_x1x2 = std::numeric_limits<double>::quiet_NaN();
  double mean_realized_rho_xc = std::numeric_limits<double>::quiet_NaN();
  int replications = 0;
};

inline std::vector<FigureRow> summarize_figure(const std::vector<ReplicationResult>& results) {
  std::vector<FigureRow> rows;
  for (const auto& cell : detail::grouped_cells(results)) {
    const Eigen::Index components = detail::cell_components(cell);
    std::vector<const ReplicationResult*> ordered(cell);
    std::sort(ordered.begin(), ordered.end(),
              [](const ReplicationResult* a, const ReplicationResult* b) {
                return a->replication < b->replication;
              });
    for (Eigen::Index k = 0; k < components; ++k) {
      FigureRow row;
      row.scenario = ordered.front()->scenario;
      row.method = ordered.front()->method;
      row.component = static_cast<int>(k) + 1;

      double sum_est = 0.0;
      double sum_width = 0.0;
      double sum_e1_width = 0.0;
      double sum_rho12 = 0.0;
      double sum_rhoc = 0.0;
      int n_ok = 0;
      int n_e1 = 0;
      int n_rho12 = 0;
      int n_rhoc = 0;
      for (const ReplicationResult* r : ordered) {
        if (r->failed) continue;
        ++n_ok;
        row.truth = r->truth[k];
        sum_est += r->estimate[k];
        sum_width += r->ci_upper[k] - r->ci_lower[k];
        if (std::isfinite(r->exposure1_se)) {
          sum_e1_width += 2.0 * wald_z * r->exposure1_se;
          ++n_e1;
        }
        if (std::isfinite(r->realized_rho_x1x2)) {
          sum_rho12 += r->realized_rho_x1x2;
          ++n_rho12;
        }
        if (std::isfinite(r->realized_rho_xc)) {
          sum_rhoc += r->realized_rho_xc;
          ++n_rhoc;
        }
      }
      if (n_ok < 1) continue;
      row.bias = sum_est / n_ok - row.truth;
      row.mean_ci_width = sum_width / n_ok;
      if (n_e1 > 0) row.mean_exposure1_ci_width = sum_e1_width / n_e1;
      if (n_rho12 > 0) row.mean_realized_rho_x1x2 = sum_rho12 / n_rho12;
      if (n_rhoc > 0) row.mean_realized_rho_xc = sum_rhoc / n_rhoc;
      row.replications = n_ok;
      rows.push_back(row);
    }
  }
  return rows;
}

// Run every requested method on `replications` independently drawn datasets.
// Each (replication, purpose) pair owns a derived RNG stream keyed by the
// base seed and the scenario values, so results are identical however the
// work is scheduled, and any two runs with the same inputs agree exactly.
inline std::vector<ReplicationResult> run_replications(const ScenarioSpec& scenario,
                                                       const HarnessConfig& config) {
  scenario.validate();
  config.validate();

  const std::uint64_t key = detail::scenario_key(scenario);
  const int degree = config.msm_degree.value_or(scenario.nonlinear() ? 2 : 1);
  const bool quadratic = config.quadratic_index.value_or(scenario.nonlinear());

  ModelSpec model = ModelSpec::linear(scenario.d, scenario.q);
  if (scenario.beta_11 != 0.0) model.add_square(0);
  if (scenario.beta_12 != 0.0) model.add_product(0, 1);
  model.msm_degree = degree;
  model.validate();

  const int n_methods = static_cast<int>(config.methods.size());
  std::vector<ReplicationResult> results(
      static_cast<std::size_t>(config.replications) * static_cast<std::size_t>(n_methods));

  parallel_for(
      config.replications,
      [&](int r) {
        auto engine =
            make_engine({config.base_seed, key, static_cast<std::uint64_t>(r), stream::dataset});
        const SimDataset ds = generate_dataset(scenario, engine);
        const MixtureData data = to_mixture_data(ds);

        for (int mi = 0; mi < n_methods; ++mi) {
          const Method method = config.methods[static_cast<std::size_t>(mi)];
          ReplicationResult row;
          row.scenario = scenario;
          row.method = method;
          row.replication = r;
          row.truth = ds.truth;
          row.realized_rho_x1x2 = ds.realized_rho_x1x2;
          row.realized_rho_xc = ds.realized_rho_xc;
          try {
            const std::uint64_t method_seed = derive_seed(
                {config.base_seed, key, static_cast<std::uint64_t>(r),
                 200 + static_cast<std::uint64_t>(mi)});
            if (method == Method::qgcomp) {
              QgcOptions opt;
              opt.bootstrap_iterations = config.qgc_bootstrap;
              opt.seed = method_seed;
              const MixtureEstimate est = estimate(data, model, opt);
              row.estimate = est.psi;
              row.se = est.se;
              row.ci_lower = est.ci_lower;
              row.ci_upper = est.ci_upper;
              row.exposure1_se = std::sqrt(est.underlying_fit.covariance(1, 1));
            } else {
              WqsConfig wc;
              wc.train_fraction =
                  method == Method::wqs_nosplit ? 0.0 : config.wqs_train_fraction;
              wc.n_bootstrap = config.wqs_bootstrap;
              wc.quadratic_index = quadratic;
              wc.q = scenario.q;
              wc.seed = method_seed;
              const WqsEstimate est = wqs_fit(data, wc);
              const int comps = quadratic ? 2 : 1;
              row.estimate.resize(comps);
              row.se.resize(comps);
              row.estimate[0] = est.psi;
              row.se[0] = est.se;
              if (quadratic) {
                row.estimate[1] = est.psi2;
                row.se[1] = est.se2;
              }
              row.ci_lower = row.estimate - wald_z * row.se;
              row.ci_upper = row.estimate + wald_z * row.se;
            }
            row.reject = detail::wald_rejections(row.estimate, row.se);
          } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
          }
          results[static_cast<std::size_t>(r) * static_cast<std::size_t>(n_methods) +
                  static_cast<std::size_t>(mi)] = row;
        }
      },
      config.threads);
  return results;
}

}  // namespace qmix
