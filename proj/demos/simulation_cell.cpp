// Runs one Monte Carlo cell of the method-comparison study and prints the
// operating characteristics. Mirrors what `qmix simulate` does, but through
// the library API so the pieces can be reused in custom studies.

#include <qmix/qmix.hpp>

#include <cstdio>

int main() {
  // Null mixture with correlated exposures: every exposure coefficient is
  // zero, so coverage should be nominal and power is the type-I error rate.
  const qmix::ScenarioSpec scenario = qmix::scenario_preset(2, 500, 9);

  qmix::HarnessConfig config;
  config.methods = {qmix::Method::qgcomp, qmix::Method::wqs};
  config.replications = 200;  // keep the demo quick; studies use 1000+
  config.base_seed = 42;

  const auto rows = qmix::run_replications(scenario, config);
  const auto summary = qmix::summarize(rows);

  std::printf("scenario %d: n=%d d=%d truth=%.2f, %d replications\n\n", scenario.id, scenario.n,
              scenario.d, scenario.psi1(), config.replications);
  std::printf("%-12s %8s %8s %8s %9s %7s\n", "method", "bias", "mcse", "rmvar", "coverage",
              "power");
  for (const auto& row : summary) {
    std::printf("%-12s %8.4f %8.4f %8.4f %9.3f %7.3f\n", qmix::method_name(row.method).c_str(),
                row.bias, row.mcse, row.rmvar, row.coverage, row.power);
  }
  std::printf("\n(the weighted index is biased away from zero under the null;\n");
  std::printf(" g-computation stays unbiased with nominal coverage)\n");
  return 0;
}
