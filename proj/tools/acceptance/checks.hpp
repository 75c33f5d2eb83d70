// SPDX-License-Identifier: Apache-2.0
// Criterion checks shared by the two precision translation units.
#pragma once

#include <string>

namespace acceptance {

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Double precision (f64_checks.cpp).
Outcome gradient_suite();
Outcome double_backprop();
Outcome metric_correctness();

}  // namespace acceptance
