#include "criteria.hpp"

#include <cstdio>
#include <functional>
#include <vector>

int main() {
  struct Row {
    const char* name;
    std::function<criteria::Verdict()> run;
  };
  const std::vector<Row> rows = {
      {"01 rejection-free on the reference Gaussian", criteria::rejection_free},
      {"02 reverse-map involution", criteria::involution},
      {"03 special-case reductions", criteria::special_cases},
      {"04 reduced preconditioned step matches long form", criteria::preconditioned_reduction},
      {"05 UDL acceptance identity", criteria::udl_identity},
      {"06 quadratic form of the HAMS-A ratio", criteria::lemma_quadratic_form},
      {"07 spectral-radius minimising carryover", criteria::lemma_optimal_carryover},
      {"08 lag-one autocovariance", criteria::lag_one_autocovariance},
      {"09 stationarity battery", criteria::stationarity_battery},
      {"10 gradient suite", criteria::gradient_suite},
      {"11 ESS estimator on AR(1)", criteria::ess_estimator},
      {"12 desk-scale SV ordering", criteria::desk_ordering},
      {"13 tuning targets", criteria::tuning_targets},
      {"14 I-Jump equivalence", criteria::ijump_equivalence},
      {"15 determinism", criteria::determinism},
  };
  int failures = 0;
  for (const auto& r : rows) {
    criteria::Verdict v;
    try {
      v = r.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failures += !v.pass;
    std::printf("[%s] %s: %s\n", v.pass ? "PASS" : "FAIL", r.name, v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(rows.size()) - failures, rows.size());
  return failures == 0 ? 0 : 1;
}
