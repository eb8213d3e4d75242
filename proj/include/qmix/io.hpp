#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qmix/errors.hpp"
#include "qmix/mcharness.hpp"

namespace qmix {

// %.{precision}g — 17 significant digits round-trip doubles exactly, which
// is what makes regenerating summaries from a replication file reproduce
// the original bytes.
inline std::string format_double(double v, int precision = 17) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
  return buf;
}

inline double parse_double(const std::string& text, const std::string& context) {
  const char* begin = text.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw data_error(context + ": cannot parse '" + text + "' as a number");
  }
  return v;
}

inline int parse_int(const std::string& text, const std::string& context) {
  const double v = parse_double(text, context);
  const int i = static_cast<int>(v);
  if (static_cast<double>(i) != v) {
    throw data_error(context + ": expected an integer, got '" + text + "'");
  }
  return i;
}

// Write via a temporary in the same directory plus rename, so readers never
// observe a half-written file and a crashed run never leaves a corrupt one.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path dir = path.parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw data_error("cannot open '" + tmp.string() + "' for writing");
    out << content;
    out.flush();
    if (!out) throw data_error("failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

// Minimal delimited text: comma-separated, one header row, no quoting
// (writers sanitize free text so cells never contain commas).
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (columns[c] == name) return static_cast<int>(c);
    }
    std::string have;
    for (const auto& c : columns) have += (have.empty() ? "" : ", ") + c;
    throw data_error("missing column '" + name + "' (file has: " + have + ")");
  }

  const std::string& cell(std::size_t row, int col) const { return rows[row][static_cast<std::size_t>(col)]; }

  double number(std::size_t row, int col) const {
    return parse_double(rows[row][static_cast<std::size_t>(col)],
                        "row " + std::to_string(row + 2) + ", column '" +
                            columns[static_cast<std::size_t>(col)] + "'");
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(field);
      field.clear();
    } else if (ch != '\r') {
      field += ch;
    }
  }
  out.push_back(field);
  return out;
}

inline std::string sanitize_text(std::string s) {
  for (char& ch : s) {
    if (ch == ',' || ch == '\n' || ch == '\r') ch = ';';
  }
  return s;
}

}  // namespace detail

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open '" + path.string() + "'");
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() && in.eof()) break;
    auto fields = detail::split_csv_line(line);
    if (line_no == 1) {
      table.columns = std::move(fields);
      if (table.columns.empty() || (table.columns.size() == 1 && table.columns[0].empty())) {
        throw data_error(path.string() + ": empty header row");
      }
      continue;
    }
    if (fields.size() == 1 && fields[0].empty()) continue;  // trailing blank line
    if (fields.size() != table.columns.size()) {
      throw data_error(path.string() + " line " + std::to_string(line_no) + ": expected " +
                       std::to_string(table.columns.size()) + " fields, got " +
                       std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  if (table.columns.empty()) throw data_error(path.string() + ": empty file");
  return table;
}

// ---- replication rows ----
//
// Long format: one line per (replication, method, component); failed runs
// get a single line with component 0 and the error text.

inline constexpr const char* replications_header =
    "scenario,beta1,beta2,beta11,beta12,beta_c,rho_x1x2,rho_xc,equal_split,n,d,q,"
    "method,replication,component,truth,estimate,se,ci_lower,ci_upper,reject,"
    "exposure1_se,realized_rho_x1x2,realized_rho_xc,failed,error";

namespace detail {

inline void append_scenario_fields(std::ostringstream& out, const ScenarioSpec& s) {
  out << s.id << ',' << format_double(s.beta1) << ',' << format_double(s.beta2) << ','
      << format_double(s.beta_11) << ',' << format_double(s.beta_12) << ','
      << format_double(s.beta_c) << ',' << format_double(s.rho_x1x2) << ','
      << format_double(s.rho_xc) << ',' << (s.equal_split_betas ? 1 : 0) << ',' << s.n << ','
      << s.d << ',' << s.q;
}

}  // namespace detail

inline std::string replications_to_csv(const std::vector<ReplicationResult>& rows) {
  std::ostringstream out;
  out << replications_header << '\n';
  const std::string nan = "nan";
  for (const auto& r : rows) {
    const Eigen::Index components = r.failed ? 1 : r.estimate.size();
    for (Eigen::Index k = 0; k < components; ++k) {
      detail::append_scenario_fields(out, r.scenario);
      out << ',' << method_name(r.method) << ',' << r.replication << ','
          << (r.failed ? 0 : static_cast<int>(k) + 1) << ',';
      if (r.failed) {
        out << nan << ',' << nan << ',' << nan << ',' << nan << ',' << nan << ',' << 0;
      } else {
        out << format_double(r.truth[k]) << ',' << format_double(r.estimate[k]) << ','
            << format_double(r.se[k]) << ',' << format_double(r.ci_lower[k]) << ','
            << format_double(r.ci_upper[k]) << ',' << r.reject[static_cast<std::size_t>(k)];
      }
      out << ',' << format_double(r.exposure1_se) << ','
          << format_double(r.realized_rho_x1x2) << ',' << format_double(r.realized_rho_xc)
          << ',' << (r.failed ? 1 : 0) << ',' << detail::sanitize_text(r.error) << '\n';
    }
  }
  return out.str();
}

inline std::vector<ReplicationResult> replications_from_csv(const CsvTable& table) {
  const int c_scenario = table.column("scenario");
  const int c_beta1 = table.column("beta1");
  const int c_beta2 = table.column("beta2");
  const int c_beta11 = table.column("beta11");
  const int c_beta12 = table.column("beta12");
  const int c_beta_c = table.column("beta_c");
  const int c_rho12 = table.column("rho_x1x2");
  const int c_rhoc = table.column("rho_xc");
  const int c_equal = table.column("equal_split");
  const int c_n = table.column("n");
  const int c_d = table.column("d");
  const int c_q = table.column("q");
  const int c_method = table.column("method");
  const int c_rep = table.column("replication");
  const int c_comp = table.column("component");
  const int c_truth = table.column("truth");
  const int c_est = table.column("estimate");
  const int c_se = table.column("se");
  const int c_lo = table.column("ci_lower");
  const int c_hi = table.column("ci_upper");
  const int c_rej = table.column("reject");
  const int c_e1se = table.column("exposure1_se");
  const int c_rrho12 = table.column("realized_rho_x1x2");
  const int c_rrhoc = table.column("realized_rho_xc");
  const int c_failed = table.column("failed");
  const int c_error = table.column("error");

  std::vector<ReplicationResult> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const std::string ctx = "row " + std::to_string(i + 2);
    ScenarioSpec s;
    s.id = parse_int(table.cell(i, c_scenario), ctx);
    s.beta1 = table.number(i, c_beta1);
    s.beta2 = table.number(i, c_beta2);
    s.beta_11 = table.number(i, c_beta11);
    s.beta_12 = table.number(i, c_beta12);
    s.beta_c = table.number(i, c_beta_c);
    s.rho_x1x2 = table.number(i, c_rho12);
    s.rho_xc = table.number(i, c_rhoc);
    s.equal_split_betas = parse_int(table.cell(i, c_equal), ctx) != 0;
    s.n = parse_int(table.cell(i, c_n), ctx);
    s.d = parse_int(table.cell(i, c_d), ctx);
    s.q = parse_int(table.cell(i, c_q), ctx);

    const Method method = parse_method(table.cell(i, c_method));
    const int replication = parse_int(table.cell(i, c_rep), ctx);
    const int component = parse_int(table.cell(i, c_comp), ctx);
    const bool failed = parse_int(table.cell(i, c_failed), ctx) != 0;

    // Component 0 (a failed run) or 1 starts a new result; higher components
    // extend the one just read.
    if (component <= 1) {
      ReplicationResult r;
      r.scenario = s;
      r.method = method;
      r.replication = replication;
      r.failed = failed;
      r.error = table.cell(i, c_error);
      r.exposure1_se = table.number(i, c_e1se);
      r.realized_rho_x1x2 = table.number(i, c_rrho12);
      r.realized_rho_xc = table.number(i, c_rrhoc);
      out.push_back(std::move(r));
    }
    if (failed || component == 0) continue;
    if (out.empty()) throw data_error(ctx + ": component " + std::to_string(component) +
                                      " appears before component 1");

    ReplicationResult& r = out.back();
    if (r.method != method || r.replication != replication) {
      throw data_error(ctx + ": component " + std::to_string(component) +
                       " does not continue the preceding row");
    }
    const Eigen::Index k = r.estimate.size();
    if (component != static_cast<int>(k) + 1) {
      throw data_error(ctx + ": component " + std::to_string(component) +
                       " out of order (expected " + std::to_string(k + 1) + ")");
    }
    r.truth.conservativeResize(k + 1);
    r.estimate.conservativeResize(k + 1);
    r.se.conservativeResize(k + 1);
    r.ci_lower.conservativeResize(k + 1);
    r.ci_upper.conservativeResize(k + 1);
    r.truth[k] = table.number(i, c_truth);
    r.estimate[k] = table.number(i, c_est);
    r.se[k] = table.number(i, c_se);
    r.ci_lower[k] = table.number(i, c_lo);
    r.ci_upper[k] = table.number(i, c_hi);
    r.reject.push_back(parse_int(table.cell(i, c_rej), ctx));
  }
  return out;
}

// ---- summary and figure tables ----

inline constexpr const char* summary_header =
    "scenario,beta1,beta2,beta11,beta12,beta_c,rho_x1x2,rho_xc,equal_split,n,d,q,"
    "method,component,truth,replications,failures,bias,mcse,rmvar,coverage,power";

inline std::string summary_to_csv(const std::vector<SummaryRow>& rows) {
  std::ostringstream out;
  out << summary_header << '\n';
  for (const auto& r : rows) {
    detail::append_scenario_fields(out, r.scenario);
    out << ',' << method_name(r.method) << ',' << r.component << ','
        << format_double(r.truth, 9) << ',' << r.replications << ',' << r.failures << ','
        << format_double(r.bias, 9) << ',' << format_double(r.mcse, 9) << ','
        << format_double(r.rmvar, 9) << ',' << format_double(r.coverage, 9) << ','
        << format_double(r.power, 9) << '\n';
  }
  return out.str();
}

inline std::string summary_to_markdown(const std::vector<SummaryRow>& rows) {
  std::ostringstream out;
  out << "| scenario | beta1 | beta2 | beta11 | beta12 | beta_c | rho_x1x2 | rho_xc | n | d | q "
         "| method | component | truth | reps | failures | bias | mcse | rmvar | coverage | "
         "power |\n";
  out << "|---|---|---|---|---|---|---|---|---|---|---|---|---|---|---|---|---|---|---|---|---|"
         "\n";
  for (const auto& r : rows) {
    const ScenarioSpec& s = r.scenario;
    out << "| " << s.id << " | " << format_double(s.beta1, 6) << " | "
        << format_double(s.beta2, 6) << " | " << format_double(s.beta_11, 6) << " | "
        << format_double(s.beta_12, 6) << " | " << format_double(s.beta_c, 6) << " | "
        << format_double(s.rho_x1x2, 6) << " | " << format_double(s.rho_xc, 6) << " | " << s.n
        << " | " << s.d << " | " << s.q << " | " << method_name(r.method) << " | " << r.component
        << " | " << format_double(r.truth, 6) << " | " << r.replications << " | " << r.failures
        << " | " << format_double(r.bias, 6) << " | " << format_double(r.mcse, 6) << " | "
        << format_double(r.rmvar, 6) << " | " << format_double(r.coverage, 6) << " | "
        << format_double(r.power, 6) << " |\n";
  }
  return out.str();
}

inline constexpr const char* figure_header =
    "scenario,beta1,beta2,beta11,beta12,beta_c,rho_x1x2,rho_xc,equal_split,n,d,q,"
    "method,component,truth,bias,mean_ci_width,mean_exposure1_ci_width,"
    "mean_realized_rho_x1x2,mean_realized_rho_xc,replications";

inline std::string figure_to_csv(const std::vector<FigureRow>& rows) {
  std::ostringstream out;
  out << figure_header << '\n';
  for (const auto& r : rows) {
    detail::append_scenario_fields(out, r.scenario);
    out << ',' << method_name(r.method) << ',' << r.component << ',' << format_double(r.truth)
        << ',' << format_double(r.bias) << ',' << format_double(r.mean_ci_width) << ','
        << format_double(r.mean_exposure1_ci_width) << ','
        << format_double(r.mean_realized_rho_x1x2) << ',' << format_double(r.mean_realized_rho_xc)
        << ',' << r.replications << '\n';
  }
  return out.str();
}

}  // namespace qmix
