// Exercises the command line binary end to end: subcommand plumbing, output
// files, deterministic reruns, and the exit code contract (0 ok, 1 usage,
// 2 bad data, 3 numeric failure).

#include <catch2/catch_amalgamated.hpp>

#include <qmix/io.hpp>
#include <qmix/rng.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string cli_path = std::string(QMIX_CLI_DIR) + "/qmix";

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("qmix_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Runs the binary with stdout/stderr captured, returns the exit code.
int run_cli(const std::string& args, const fs::path& log) {
  const std::string command = "\"" + cli_path + "\" " + args + " >\"" + log.string() + "\" 2>&1";
  const int status = std::system(command.c_str());
  REQUIRE(status != -1);
  INFO("command: " << command);
  INFO("output: " << read_file(log));
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

// A small analysis-ready CSV: three exposures already on the 0..3 score
// scale (so quantization passes them through), one covariate, and an
// outcome with known coefficients 0.3 and 0.2 on the first two exposures.
fs::path write_fit_input(const fs::path& dir) {
  auto engine = qmix::make_engine({99, 1});
  std::uniform_int_distribution<int> level(0, 3);
  std::normal_distribution<double> noise(0.0, 0.1);
  std::ostringstream csv;
  csv << "x1,x2,x3,z,y\n";
  for (int i = 0; i < 300; ++i) {
    const int x1 = level(engine);
    const int x2 = level(engine);
    const int x3 = level(engine);
    const double z = noise(engine);
    const double y = 0.3 * x1 + 0.2 * x2 + 0.5 * z + noise(engine);
    csv << x1 << ',' << x2 << ',' << x3 << ',' << qmix::format_double(z) << ','
        << qmix::format_double(y) << '\n';
  }
  const fs::path path = dir / "input.csv";
  qmix::write_file_atomic(path, csv.str());
  return path;
}

}  // namespace

TEST_CASE("simulate writes deterministic outputs") {
  const fs::path dir1 = fresh_dir("sim1");
  const fs::path dir2 = fresh_dir("sim2");
  const std::string args =
      "simulate --scenario 1 --n 60 --d 4 --reps 4 --seed 3 --methods qgcomp,wqs "
      "--bootstraps 20 --wqs-bootstraps 10 --emit-figure-data --out ";

  REQUIRE(run_cli(args + dir1.string(), dir1 / "run.log") == 0);
  REQUIRE(fs::exists(dir1 / "replications.csv"));
  REQUIRE(fs::exists(dir1 / "summary.csv"));
  REQUIRE(fs::exists(dir1 / "figure_data.csv"));
  REQUIRE(fs::exists(dir1 / "run_meta.json"));

  REQUIRE(run_cli(args + dir2.string(), dir2 / "run.log") == 0);
  CHECK(read_file(dir1 / "replications.csv") == read_file(dir2 / "replications.csv"));
  CHECK(read_file(dir1 / "summary.csv") == read_file(dir2 / "summary.csv"));
  CHECK(read_file(dir1 / "figure_data.csv") == read_file(dir2 / "figure_data.csv"));
  CHECK(read_file(dir1 / "run_meta.json") == read_file(dir2 / "run_meta.json"));

  // The summary holds one row per method and the header line.
  const std::string summary = read_file(dir1 / "summary.csv");
  CHECK(summary.find("qgcomp") != std::string::npos);
  CHECK(summary.find("wqs") != std::string::npos);
}

TEST_CASE("report rebuilds the identical summary") {
  const fs::path sim_dir = fresh_dir("rep_sim");
  const fs::path rep_dir = fresh_dir("rep_out");
  REQUIRE(run_cli("simulate --scenario 3 --n 50 --d 4 --reps 3 --seed 11 --methods qgcomp "
                  "--bootstraps 20 --out " +
                      sim_dir.string(),
                  sim_dir / "run.log") == 0);
  REQUIRE(run_cli("report --input " + (sim_dir / "replications.csv").string() + " --out " +
                      rep_dir.string(),
                  rep_dir / "run.log") == 0);
  CHECK(read_file(rep_dir / "summary.csv") == read_file(sim_dir / "summary.csv"));
}

TEST_CASE("report honors the QMIX_OUT environment variable") {
  const fs::path sim_dir = fresh_dir("env_sim");
  const fs::path env_dir = fresh_dir("env_out");
  REQUIRE(run_cli("simulate --scenario 1 --n 40 --d 4 --reps 2 --seed 5 --methods qgcomp "
                  "--bootstraps 10 --out " +
                      sim_dir.string(),
                  sim_dir / "run.log") == 0);
  REQUIRE(setenv("QMIX_OUT", env_dir.string().c_str(), 1) == 0);
  const int code = run_cli("report --input " + (sim_dir / "replications.csv").string(),
                           env_dir / "run.log");
  REQUIRE(unsetenv("QMIX_OUT") == 0);
  REQUIRE(code == 0);
  CHECK(read_file(env_dir / "summary.csv") == read_file(sim_dir / "summary.csv"));
}

TEST_CASE("fit recovers known coefficients from a CSV") {
  const fs::path dir = fresh_dir("fit");
  const fs::path input = write_fit_input(dir);
  REQUIRE(run_cli("fit --input " + input.string() +
                      " --exposures x1,x2,x3 --outcome y --covariates z --q 4 "
                      "--methods qgcomp,wqs --seed 9 --out " +
                      dir.string(),
                  dir / "run.log") == 0);
  REQUIRE(fs::exists(dir / "fit_psi.csv"));
  REQUIRE(fs::exists(dir / "fit_weights.csv"));
  REQUIRE(fs::exists(dir / "fit_cutpoints.csv"));
  REQUIRE(fs::exists(dir / "run_meta.json"));

  // Parse qgcomp's psi back and compare with the truth 0.3 + 0.2 = 0.5.
  const qmix::CsvTable psi = qmix::read_csv(dir / "fit_psi.csv");
  REQUIRE(psi.rows.size() >= 2);
  REQUIRE(psi.rows[0][psi.column("method")] == "qgcomp");
  const double estimate = psi.number(0, psi.column("estimate"));
  const double se = psi.number(0, psi.column("se"));
  CHECK(estimate == Catch::Approx(0.5).margin(0.1));
  CHECK(se > 0.0);
  CHECK(psi.rows[0][psi.column("variance")] == "analytic");

  // Weights: both methods report rows for every exposure they weight.
  const qmix::CsvTable weights = qmix::read_csv(dir / "fit_weights.csv");
  bool saw_wqs = false;
  for (std::size_t i = 0; i < weights.rows.size(); ++i) {
    if (weights.rows[i][weights.column("method")] == "wqs") saw_wqs = true;
  }
  CHECK(saw_wqs);

  // Pass-through scores: cutpoints are the three interior boundaries per
  // exposure (x1..x3) since each has exactly q distinct values.
  const qmix::CsvTable cuts = qmix::read_csv(dir / "fit_cutpoints.csv");
  CHECK(cuts.rows.size() == 9);
}

TEST_CASE("fit supports curvature terms and markdown output") {
  const fs::path dir = fresh_dir("fit_md");
  const fs::path input = write_fit_input(dir);
  REQUIRE(run_cli("fit --input " + input.string() +
                      " --exposures x1,x2,x3 --outcome y --q 4 --methods qgcomp "
                      "--squares x1 --msm-degree 2 --variance bootstrap --bootstraps 20 "
                      "--seed 4 --format md --out " +
                      dir.string(),
                  dir / "run.log") == 0);
  REQUIRE(fs::exists(dir / "fit_psi.md"));
  const std::string table = read_file(dir / "fit_psi.md");
  // Two summary components (linear + quadratic), bootstrap variance.
  CHECK(table.find("| qgcomp | 1 |") != std::string::npos);
  CHECK(table.find("| qgcomp | 2 |") != std::string::npos);
  CHECK(table.find("bootstrap") != std::string::npos);
}

TEST_CASE("usage problems exit with code 1") {
  const fs::path dir = fresh_dir("usage");
  CHECK(run_cli("simulate --scenario 1 --no-such-flag", dir / "a.log") == 1);
  CHECK(run_cli("fit --outcome y", dir / "b.log") == 1);  // missing required --input
  CHECK(run_cli("frobnicate", dir / "c.log") == 1);
  CHECK(run_cli("", dir / "d.log") == 1);  // a subcommand is required
}

TEST_CASE("help exits with code 0") {
  const fs::path dir = fresh_dir("help");
  CHECK(run_cli("--help", dir / "a.log") == 0);
  CHECK(run_cli("simulate --help", dir / "b.log") == 0);
  CHECK(read_file(dir / "b.log").find("--scenario") != std::string::npos);
}

TEST_CASE("data problems exit with code 2") {
  const fs::path dir = fresh_dir("data_err");
  const fs::path input = write_fit_input(dir);
  CHECK(run_cli("simulate --scenario 99 --out " + dir.string(), dir / "a.log") == 2);
  CHECK(run_cli("fit --input " + input.string() +
                    " --exposures x1,nope --outcome y --out " + dir.string(),
                dir / "b.log") == 2);
  CHECK(run_cli("fit --input " + (dir / "missing.csv").string() +
                    " --exposures x1 --outcome y --out " + dir.string(),
                dir / "c.log") == 2);
}

TEST_CASE("numeric problems exit with code 3") {
  const fs::path dir = fresh_dir("numeric_err");
  // A constant exposure quantizes to a constant score column, which is
  // collinear with the intercept.
  std::ostringstream csv;
  csv << "x1,x2,y\n";
  auto engine = qmix::make_engine({17, 1});
  std::uniform_int_distribution<int> level(0, 3);
  for (int i = 0; i < 40; ++i) {
    csv << "5," << level(engine) << ',' << qmix::format_double(0.1 * level(engine)) << '\n';
  }
  const fs::path input = dir / "constant.csv";
  qmix::write_file_atomic(input, csv.str());
  CHECK(run_cli("fit --input " + input.string() + " --exposures x1,x2 --outcome y --out " +
                    dir.string(),
                dir / "a.log") == 3);
}
