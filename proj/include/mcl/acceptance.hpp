#pragma once

#include <string>
#include <vector>

namespace mcl {

struct AcceptanceOptions {
  std::vector<int> only;        // empty: all criteria
  bool corrupt_median = false;  // substitute the coordinate mean for the median kernel
  unsigned threads = 1;
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

inline constexpr int kCriterionCount = 12;

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options);

}  // namespace mcl
