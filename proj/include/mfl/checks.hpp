#pragma once

#include <string>
#include <vector>

namespace mfl {

enum class CheckLevel { kFast, kFull };

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;      // measured error or statistic
  double threshold = 0.0;  // pass iff value <= threshold
  std::string detail;
};

struct CheckOptions {
  // Relative perturbation applied to phi1 before the coefficient checks see
  // it. Used only to confirm that the suite notices a wrong coefficient.
  double phi1_tamper = 0.0;
  unsigned threads = 1;
};

// The verification suite. Fast checks finish in seconds; full adds the
// long-run stationary-moment test.
std::vector<CheckResult> run_checks(CheckLevel level, const CheckOptions& options = {});

}  // namespace mfl
