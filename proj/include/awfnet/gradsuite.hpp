#pragma once

#include <vector>

#include "awfnet/gradcheck.hpp"

namespace awfnet {

struct GradSuiteOptions {
  int seeds = 5;
  double op_tol = 1e-3;
  double loss_tol = 1e-4;
};

/// Central finite-difference checks for every differentiable op, the AWF
/// block pieces, the loss family, and an end-to-end AWFNet+BC pass. One
/// report per check, aggregated (worst seed) over opts.seeds seeds.
std::vector<GradReport> run_gradient_suite(const GradSuiteOptions& opts = {});

inline bool all_pass(const std::vector<GradReport>& reports) {
  for (const auto& r : reports)
    if (!r.pass) return false;
  return !reports.empty();
}

}  // namespace awfnet
