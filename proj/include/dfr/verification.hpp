#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dfr {

// One verification check. Hard checks FAIL when violated; soft trend checks
// degrade to WARN. run_verification prints one line per check.
struct CheckResult {
  std::string name;
  bool hard = true;
  std::string status;  // "PASS", "WARN" or "FAIL"
  std::string detail;
  double seconds = 0.0;

  bool failed() const { return status == "FAIL"; }
};

CheckResult check_solver_against_oracles();
CheckResult check_gradient_correctness();
CheckResult check_subsample_exactness();
CheckResult check_logit_additivity_identity();
CheckResult check_correlation_table_pattern();
CheckResult check_decoded_accuracy_pattern();
CheckResult check_method_ordering();
CheckResult check_retrain_variance_trend();
CheckResult check_l1_regularization_gain();
CheckResult check_artifact_reproducibility(const std::string& workdir);

// Runs everything in order, streaming "[PASS] name (1.2s) detail" lines.
std::vector<CheckResult> run_verification(const std::string& workdir,
                                          std::ostream& log);

}  // namespace dfr
