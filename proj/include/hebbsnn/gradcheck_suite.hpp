#pragma once

#include <string>
#include <vector>

namespace hebbsnn {

struct GradCheckCase {
  std::string name;
  double max_rel_err = 0.0;
};

// Central-difference checks of every smooth op kind plus composite graphs
// (deep linear recurrences, softmax cross-entropy, the Hebbian update chain).
// Spike ops are excluded by construction; their backward rule is exercised by
// the exact hand-unrolled checks in the test suite.
std::vector<GradCheckCase> run_gradcheck_suite();

}  // namespace hebbsnn
