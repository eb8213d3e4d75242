// Command line front end: `simulate` runs the Monte Carlo study for one
// scenario, `fit` estimates mixture effects on a user CSV, `report`
// recomputes summary tables from a replication file. All outputs are written
// atomically and depend only on the arguments, so identical invocations
// produce identical bytes.

#include <CLI11.hpp>
#include <json.hpp>

#include <qmix/qmix.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_usage = 1;
constexpr int exit_data = 2;
constexpr int exit_numeric = 3;

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (const auto& p : parts) out += (out.empty() ? "" : sep) + p;
  return out;
}

std::vector<qmix::Method> parse_methods(const std::vector<std::string>& names) {
  if (names.empty()) throw qmix::data_error("at least one method is required");
  std::vector<qmix::Method> methods;
  for (const auto& name : names) {
    const qmix::Method m = qmix::parse_method(name);
    for (qmix::Method seen : methods) {
      if (seen == m) throw qmix::data_error("method '" + name + "' given twice");
    }
    methods.push_back(m);
  }
  return methods;
}

std::string markdown_table(const std::vector<std::string>& header,
                           const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream out;
  out << "| " << join(header, " | ") << " |\n|";
  for (std::size_t i = 0; i < header.size(); ++i) out << "---|";
  out << '\n';
  for (const auto& row : rows) out << "| " << join(row, " | ") << " |\n";
  return out.str();
}

std::string csv_table(const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream out;
  out << join(header, ",") << '\n';
  for (const auto& row : rows) out << join(row, ",") << '\n';
  return out.str();
}

void write_table(const fs::path& dir, const std::string& stem, const std::string& format,
                 const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows) {
  const bool md = format == "md";
  const fs::path path = dir / (stem + (md ? ".md" : ".csv"));
  qmix::write_file_atomic(path, md ? markdown_table(header, rows) : csv_table(header, rows));
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
  int scenario = 1;
  int n = 500;
  int d = 4;
  int q = 4;
  int reps = 1000;
  std::uint64_t seed = 0;
  std::vector<std::string> methods{"qgcomp", "wqs"};
  double train_fraction = 0.4;
  int bootstraps = 200;
  int wqs_bootstraps = 100;
  int msm_degree = 0;  // 0 = match the scenario
  bool quadratic_index = false;
  std::optional<double> beta1;
  std::optional<double> beta2;
  std::optional<double> rho;
  int threads = 0;
  bool emit_figure_data = false;
  std::string out = ".";
  std::string format = "csv";
};

void check_format(const std::string& format) {
  if (format != "csv" && format != "md") {
    throw qmix::data_error("unknown format '" + format + "' (expected csv or md)");
  }
}

int run_simulate(const SimulateOptions& opt) {
  check_format(opt.format);
  std::vector<qmix::ScenarioSpec> variants;
  if (opt.beta1 || opt.beta2 || opt.rho) {
    // Explicit coefficient overrides collapse grid scenarios to one cell.
    qmix::ScenarioSpec s = qmix::scenario_preset(opt.scenario, opt.n, opt.d, opt.q);
    if (opt.beta1) s.beta1 = *opt.beta1;
    if (opt.beta2) s.beta2 = *opt.beta2;
    if (opt.rho) s.rho_x1x2 = *opt.rho;
    if (s.equal_split_betas && opt.beta1) s.beta2 = s.beta1;
    s.validate();
    variants.push_back(s);
  } else {
    variants = qmix::scenario_variants(opt.scenario, opt.n, opt.d, opt.q);
  }

  qmix::HarnessConfig config;
  config.methods = parse_methods(opt.methods);
  config.replications = opt.reps;
  config.base_seed = opt.seed;
  config.qgc_bootstrap = opt.bootstraps;
  config.wqs_bootstrap = opt.wqs_bootstraps;
  config.wqs_train_fraction = opt.train_fraction;
  if (opt.msm_degree > 0) config.msm_degree = opt.msm_degree;
  if (opt.quadratic_index) config.quadratic_index = true;
  config.threads = opt.threads;
  config.validate();

  const fs::path outdir(opt.out);
  std::vector<qmix::ReplicationResult> all;
  json variant_meta = json::array();
  for (std::size_t v = 0; v < variants.size(); ++v) {
    const qmix::ScenarioSpec& s = variants[v];
    std::cerr << "scenario " << s.id << " [" << (v + 1) << "/" << variants.size()
              << "]: n=" << s.n << " d=" << s.d << " reps=" << opt.reps << " ..." << std::flush;
    const auto rows = qmix::run_replications(s, config);
    std::cerr << " done\n";

    double rho12_sum = 0.0;
    double rhoc_sum = 0.0;
    int rho12_count = 0;
    int rhoc_count = 0;
    int failures = 0;
    for (const auto& r : rows) {
      if (r.method == config.methods.front()) {
        if (std::isfinite(r.realized_rho_x1x2)) {
          rho12_sum += r.realized_rho_x1x2;
          ++rho12_count;
        }
        if (std::isfinite(r.realized_rho_xc)) {
          rhoc_sum += r.realized_rho_xc;
          ++rhoc_count;
        }
      }
      failures += r.failed ? 1 : 0;
    }
    json vm;
    vm["beta1"] = s.beta1;
    vm["beta2"] = s.beta2;
    vm["beta11"] = s.beta_11;
    vm["beta12"] = s.beta_12;
    vm["beta_c"] = s.beta_c;
    vm["rho_x1x2"] = s.rho_x1x2;
    vm["rho_xc"] = s.rho_xc;
    vm["equal_split"] = s.equal_split_betas;
    vm["truth_psi1"] = s.psi1();
    if (s.nonlinear()) vm["truth_psi2"] = s.psi2();
    if (rho12_count > 0) vm["mean_realized_rho_x1x2"] = rho12_sum / rho12_count;
    if (rhoc_count > 0) vm["mean_realized_rho_xc"] = rhoc_sum / rhoc_count;
    vm["failures"] = failures;
    variant_meta.push_back(vm);

    all.insert(all.end(), rows.begin(), rows.end());
  }

  qmix::write_file_atomic(outdir / "replications.csv", qmix::replications_to_csv(all));
  const auto summary = qmix::summarize(all);
  if (opt.format == "md") {
    qmix::write_file_atomic(outdir / "summary.md", qmix::summary_to_markdown(summary));
  } else {
    qmix::write_file_atomic(outdir / "summary.csv", qmix::summary_to_csv(summary));
  }
  if (opt.emit_figure_data) {
    qmix::write_file_atomic(outdir / "figure_data.csv",
                            qmix::figure_to_csv(qmix::summarize_figure(all)));
  }

  json meta;
  meta["command"] = "simulate";
  meta["version"] = qmix::version_string;
  meta["scenario"] = opt.scenario;
  meta["n"] = opt.n;
  meta["d"] = opt.d;
  meta["q"] = opt.q;
  meta["replications"] = opt.reps;
  meta["seed"] = opt.seed;
  meta["methods"] = opt.methods;
  meta["format"] = opt.format;
  meta["qgcomp"]["bootstrap"] = opt.bootstraps;
  if (opt.msm_degree > 0) {
    meta["qgcomp"]["msm_degree"] = opt.msm_degree;
  } else {
    meta["qgcomp"]["msm_degree"] = "auto";
  }
  meta["wqs"]["bootstrap"] = opt.wqs_bootstraps;
  meta["wqs"]["train_fraction"] = opt.train_fraction;
  meta["wqs"]["quadratic_index"] = opt.quadratic_index ? json(true) : json("auto");
  meta["variants"] = variant_meta;
  json outputs = json::array();
  outputs.push_back("replications.csv");
  outputs.push_back(opt.format == "md" ? "summary.md" : "summary.csv");
  if (opt.emit_figure_data) outputs.push_back("figure_data.csv");
  meta["outputs"] = outputs;
  qmix::write_file_atomic(outdir / "run_meta.json", meta.dump(2) + "\n");

  std::cerr << "wrote " << (outdir / "replications.csv").string() << " and summary\n";
  return exit_ok;
}

// --------------------------------------------------------------------- fit

struct FitOptions {
  std::string input;
  std::vector<std::string> exposures;
  std::string outcome;
  std::vector<std::string> covariates;
  int q = 4;
  std::vector<std::string> methods{"qgcomp"};
  std::string link = "identity";
  int msm_degree = 1;
  std::vector<std::string> squares;
  std::vector<std::string> products;
  std::string variance = "auto";
  int bootstraps = 200;
  double train_fraction = 0.4;
  int wqs_bootstraps = 100;
  std::string direction = "positive";
  bool quadratic_index = false;
  std::uint64_t seed = 0;
  std::string out = ".";
  std::string format = "csv";
};

Eigen::VectorXd extract_column(const qmix::CsvTable& table, const std::string& name) {
  const int c = table.column(name);
  Eigen::VectorXd v(static_cast<Eigen::Index>(table.rows.size()));
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = table.number(i, c);
  }
  return v;
}

int exposure_index(const std::vector<std::string>& exposures, const std::string& name) {
  for (std::size_t j = 0; j < exposures.size(); ++j) {
    if (exposures[j] == name) return static_cast<int>(j);
  }
  throw qmix::data_error("'" + name + "' is not one of the exposure columns");
}

int run_fit(const FitOptions& opt) {
  check_format(opt.format);
  const std::vector<qmix::Method> methods = parse_methods(opt.methods);
  const qmix::CsvTable table = qmix::read_csv(opt.input);

  Eigen::MatrixXd raw(static_cast<Eigen::Index>(table.rows.size()),
                      static_cast<Eigen::Index>(opt.exposures.size()));
  for (std::size_t j = 0; j < opt.exposures.size(); ++j) {
    raw.col(static_cast<Eigen::Index>(j)) = extract_column(table, opt.exposures[j]);
  }
  Eigen::MatrixXd covariates(raw.rows(), static_cast<Eigen::Index>(opt.covariates.size()));
  for (std::size_t k = 0; k < opt.covariates.size(); ++k) {
    covariates.col(static_cast<Eigen::Index>(k)) = extract_column(table, opt.covariates[k]);
  }
  const Eigen::VectorXd outcome = extract_column(table, opt.outcome);

  qmix::QuantizedMatrix bins;
  const qmix::MixtureData data = qmix::make_mixture_data(raw, covariates, outcome, opt.q,
                                                         opt.exposures, opt.covariates, &bins);

  qmix::ModelSpec model =
      qmix::ModelSpec::linear(static_cast<int>(opt.exposures.size()), opt.q,
                              qmix::parse_link(opt.link));
  for (const auto& name : opt.squares) model.add_square(exposure_index(opt.exposures, name));
  for (const auto& pair : opt.products) {
    const auto colon = pair.find(':');
    if (colon == std::string::npos) {
      throw qmix::data_error("product term '" + pair + "' must look like name:name");
    }
    model.add_product(exposure_index(opt.exposures, pair.substr(0, colon)),
                      exposure_index(opt.exposures, pair.substr(colon + 1)));
  }
  model.msm_degree = opt.msm_degree;
  model.validate();

  const std::vector<std::string> psi_header{"method",   "component", "estimate",
                                            "se",       "t",         "ci_lower",
                                            "ci_upper", "variance"};
  std::vector<std::vector<std::string>> psi_rows;
  const std::vector<std::string> weight_header{"method", "exposure", "direction", "weight"};
  std::vector<std::vector<std::string>> weight_rows;
  std::ostringstream human;

  auto fmt = [](double v) { return qmix::format_double(v, 9); };

  for (const qmix::Method method : methods) {
    if (method == qmix::Method::qgcomp) {
      qmix::QgcOptions qopt;
      if (opt.variance == "analytic") qopt.variance = qmix::VarianceMethod::analytic;
      else if (opt.variance == "bootstrap") qopt.variance = qmix::VarianceMethod::bootstrap;
      else if (opt.variance != "auto") {
        throw qmix::data_error("unknown variance '" + opt.variance +
                               "' (expected auto, analytic or bootstrap)");
      }
      qopt.bootstrap_iterations = opt.bootstraps;
      qopt.seed = qmix::derive_seed({opt.seed, 1});
      const qmix::MixtureEstimate est = qmix::estimate(data, model, qopt);
      const std::string variance = qmix::variance_method_name(est.variance_method);
      for (Eigen::Index k = 0; k < est.psi.size(); ++k) {
        psi_rows.push_back({"qgcomp", std::to_string(k + 1), fmt(est.psi[k]), fmt(est.se[k]),
                            fmt(est.psi[k] / est.se[k]), fmt(est.ci_lower[k]),
                            fmt(est.ci_upper[k]), variance});
      }
      human << "qgcomp: psi = " << fmt(est.psi[0]) << " (se " << fmt(est.se[0]) << ", 95% CI "
            << fmt(est.ci_lower[0]) << " to " << fmt(est.ci_upper[0]) << ", " << variance
            << " variance)\n";
      if (est.psi.size() > 1) {
        human << "        curvature = " << fmt(est.psi[1]) << " (se " << fmt(est.se[1]) << ")\n";
      }
      if (est.weights_defined) {
        for (const auto& [name, w] : est.weights_positive) {
          weight_rows.push_back({"qgcomp", name, "positive", fmt(w)});
        }
        for (const auto& [name, w] : est.weights_negative) {
          weight_rows.push_back({"qgcomp", name, "negative", fmt(w)});
        }
        human << "        partial effects: positive " << fmt(est.partial_effect_positive)
              << ", negative " << fmt(est.partial_effect_negative) << "\n";
      }
    } else {
      qmix::WqsConfig wc;
      wc.train_fraction = method == qmix::Method::wqs_nosplit ? 0.0 : opt.train_fraction;
      wc.n_bootstrap = opt.wqs_bootstraps;
      wc.direction = qmix::parse_wqs_direction(opt.direction);
      wc.quadratic_index = opt.quadratic_index;
      wc.q = opt.q;
      wc.seed = qmix::derive_seed({opt.seed, 2});
      const qmix::WqsEstimate est = qmix::wqs_fit(data, wc);
      const std::string label = qmix::method_name(method);
      psi_rows.push_back({label, "1", fmt(est.psi), fmt(est.se), fmt(est.t_statistic),
                          fmt(est.psi - qmix::wald_z * est.se),
                          fmt(est.psi + qmix::wald_z * est.se), "validation"});
      if (wc.quadratic_index) {
        psi_rows.push_back({label, "2", fmt(est.psi2), fmt(est.se2), fmt(est.t2_statistic),
                            fmt(est.psi2 - qmix::wald_z * est.se2),
                            fmt(est.psi2 + qmix::wald_z * est.se2), "validation"});
      }
      for (std::size_t j = 0; j < opt.exposures.size(); ++j) {
        weight_rows.push_back({label, opt.exposures[j], opt.direction,
                               fmt(est.weights[static_cast<Eigen::Index>(j)])});
      }
      human << label << ": psi = " << fmt(est.psi) << " (se " << fmt(est.se) << ", t "
            << fmt(est.t_statistic) << "; trained on " << est.n_train << ", validated on "
            << est.n_validation << ")\n";
    }
  }

  const std::vector<std::string> cut_header{"exposure", "cut", "value"};
  std::vector<std::vector<std::string>> cut_rows;
  for (std::size_t j = 0; j < bins.cutpoints.size(); ++j) {
    for (std::size_t k = 0; k < bins.cutpoints[j].size(); ++k) {
      cut_rows.push_back({bins.column_names[j], std::to_string(k + 1),
                          qmix::format_double(bins.cutpoints[j][k])});
    }
  }

  const fs::path outdir(opt.out);
  write_table(outdir, "fit_psi", opt.format, psi_header, psi_rows);
  write_table(outdir, "fit_weights", opt.format, weight_header, weight_rows);
  write_table(outdir, "fit_cutpoints", opt.format, cut_header, cut_rows);

  json meta;
  meta["command"] = "fit";
  meta["version"] = qmix::version_string;
  meta["input"] = opt.input;
  meta["rows"] = table.rows.size();
  meta["exposures"] = opt.exposures;
  meta["covariates"] = opt.covariates;
  meta["outcome"] = opt.outcome;
  meta["q"] = opt.q;
  meta["link"] = opt.link;
  meta["methods"] = opt.methods;
  meta["msm_degree"] = opt.msm_degree;
  meta["squares"] = opt.squares;
  meta["products"] = opt.products;
  meta["variance"] = opt.variance;
  meta["bootstraps"] = opt.bootstraps;
  meta["wqs"]["bootstrap"] = opt.wqs_bootstraps;
  meta["wqs"]["train_fraction"] = opt.train_fraction;
  meta["wqs"]["direction"] = opt.direction;
  meta["wqs"]["quadratic_index"] = opt.quadratic_index;
  meta["seed"] = opt.seed;
  meta["format"] = opt.format;
  qmix::write_file_atomic(outdir / "run_meta.json", meta.dump(2) + "\n");

  std::cout << human.str();
  return exit_ok;
}

// ------------------------------------------------------------------ report

struct ReportOptions {
  std::string input;
  std::string out = ".";
  std::string format = "csv";
};

int run_report(const ReportOptions& opt) {
  check_format(opt.format);
  const auto rows = qmix::replications_from_csv(qmix::read_csv(opt.input));
  if (rows.empty()) throw qmix::data_error(opt.input + ": no replication rows");
  const auto summary = qmix::summarize(rows);
  const fs::path outdir(opt.out);
  if (opt.format == "md") {
    qmix::write_file_atomic(outdir / "summary.md", qmix::summary_to_markdown(summary));
  } else {
    qmix::write_file_atomic(outdir / "summary.csv", qmix::summary_to_csv(summary));
  }
  std::cerr << "summarized " << rows.size() << " replication rows\n";
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"joint mixture effects for quantized exposures"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read options from an INI/TOML file");

  SimulateOptions sim;
  CLI::App* simulate = app.add_subcommand("simulate", "run the Monte Carlo study for a scenario");
  simulate->add_option("--scenario", sim.scenario, "scenario id (1-8)")->required();
  simulate->add_option("--n", sim.n, "sample size per replication");
  simulate->add_option("--d", sim.d, "number of exposures");
  simulate->add_option("--q", sim.q, "number of quantile levels");
  simulate->add_option("--reps", sim.reps, "Monte Carlo replications");
  simulate->add_option("--seed", sim.seed, "base RNG seed");
  simulate->add_option("--methods", sim.methods, "methods: qgcomp, wqs, wqs_nosplit")
      ->delimiter(',');
  simulate->add_option("--train-fraction", sim.train_fraction, "WQS training fraction");
  simulate->add_option("--bootstraps", sim.bootstraps, "bootstrap iterations for qgcomp variance");
  simulate->add_option("--wqs-bootstraps", sim.wqs_bootstraps, "WQS weight bootstrap iterations");
  simulate->add_option("--msm-degree", sim.msm_degree,
                       "summary polynomial degree (default: match scenario)");
  simulate->add_flag("--quadratic-index", sim.quadratic_index,
                     "force a quadratic WQS index term");
  simulate->add_option("--beta1", sim.beta1, "override the first exposure coefficient");
  simulate->add_option("--beta2", sim.beta2, "override the second exposure coefficient");
  simulate->add_option("--rho", sim.rho, "override the X1-X2 correlation");
  simulate->add_option("--threads", sim.threads, "worker threads (0 = hardware)");
  simulate->add_flag("--emit-figure-data", sim.emit_figure_data,
                     "also write per-cell figure_data.csv");
  simulate->add_option("--out", sim.out, "output directory")->envname("QMIX_OUT");
  simulate->add_option("--format", sim.format, "summary format: csv or md");

  FitOptions fit;
  CLI::App* fit_cmd = app.add_subcommand("fit", "estimate mixture effects from a CSV file");
  fit_cmd->add_option("--input", fit.input, "input CSV with a header row")->required();
  fit_cmd->add_option("--exposures", fit.exposures, "exposure column names")
      ->required()
      ->delimiter(',');
  fit_cmd->add_option("--outcome", fit.outcome, "outcome column name")->required();
  fit_cmd->add_option("--covariates", fit.covariates, "covariate column names")->delimiter(',');
  fit_cmd->add_option("--q", fit.q, "number of quantile levels");
  fit_cmd->add_option("--methods", fit.methods, "methods: qgcomp, wqs, wqs_nosplit")
      ->delimiter(',');
  fit_cmd->add_option("--link", fit.link, "identity or logit");
  fit_cmd->add_option("--msm-degree", fit.msm_degree, "summary polynomial degree");
  fit_cmd->add_option("--squares", fit.squares, "exposures entering squared")->delimiter(',');
  fit_cmd->add_option("--products", fit.products, "exposure products, as name:name")
      ->delimiter(',');
  fit_cmd->add_option("--variance", fit.variance, "auto, analytic or bootstrap");
  fit_cmd->add_option("--bootstraps", fit.bootstraps, "bootstrap iterations for qgcomp variance");
  fit_cmd->add_option("--train-fraction", fit.train_fraction, "WQS training fraction");
  fit_cmd->add_option("--wqs-bootstraps", fit.wqs_bootstraps, "WQS weight bootstrap iterations");
  fit_cmd->add_option("--direction", fit.direction, "WQS direction: positive or negative");
  fit_cmd->add_flag("--quadratic-index", fit.quadratic_index, "add a quadratic WQS index term");
  fit_cmd->add_option("--seed", fit.seed, "base RNG seed");
  fit_cmd->add_option("--out", fit.out, "output directory")->envname("QMIX_OUT");
  fit_cmd->add_option("--format", fit.format, "table format: csv or md");

  ReportOptions rep;
  CLI::App* report = app.add_subcommand("report", "summarize an existing replications.csv");
  report->add_option("--input", rep.input, "replications.csv from a simulate run")->required();
  report->add_option("--out", rep.out, "output directory")->envname("QMIX_OUT");
  report->add_option("--format", rep.format, "summary format: csv or md");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_usage;
  }

  try {
    if (simulate->parsed()) return run_simulate(sim);
    if (fit_cmd->parsed()) return run_fit(fit);
    if (report->parsed()) return run_report(rep);
    std::cerr << "no subcommand given\n";
    return exit_usage;
  } catch (const qmix::data_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_data;
  } catch (const qmix::numeric_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_numeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_numeric;
  }
}
