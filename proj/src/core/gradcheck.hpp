#pragma once

#include <string>
#include <vector>

namespace ltr {

struct GradCheckResult {
  std::string name;
  double max_rel_err = 0.0;
  bool pass = false;
};

// Central-difference checks (eps 1e-5) for every graph primitive, both
// losses, and the three architectures end to end on a seeded 5-product list.
std::vector<GradCheckResult> run_gradcheck_suite(double tolerance = 1e-4);

bool gradcheck_all_pass(const std::vector<GradCheckResult>& results);
std::string render_gradcheck(const std::vector<GradCheckResult>& results);

}  // namespace ltr
