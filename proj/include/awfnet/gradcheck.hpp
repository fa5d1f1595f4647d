#pragma once

#include <functional>
#include <string>
#include <vector>

#include "awfnet/tensor.hpp"

namespace awfnet {

struct GradReport {
  std::string op_name;
  double max_rel_error = 0.0;
  std::int64_t worst_index = -1;
  bool pass = false;
};

/// Checked functions map a list of inputs to a scalar. Probes run in double
/// precision; the engine is precision-templated so the same op code paths are
/// exercised.
using CheckedFn =
    std::function<Tensor<double>(const std::vector<Tensor<double>>&)>;

/// Compare the analytic gradient of f w.r.t. every requires-grad input
/// against central finite differences (f(x+eps) - f(x-eps)) / (2 eps).
/// Relative error uses denominator max(|analytic|, |numeric|, 1e-8).
inline GradReport gradcheck(const std::string& op_name, const CheckedFn& f,
                            std::vector<Tensor<double>> inputs,
                            double eps = 1e-3, double tol = 1e-3) {
  GradReport report;
  report.op_name = op_name;

  Tensor<double> base = f(inputs);
  if (base.numel() != 1)
    throw ContractError("gradcheck: f must return a scalar, got shape " +
                        shape_str(base.shape()));
  Tensor<double> probe = f(inputs);
  if (base.data() != probe.data())
    throw DeterminismError("gradcheck('" + op_name +
                           "'): forward value drifted between probes");

  for (auto& in : inputs) in.zero_grad();
  base.backward();

  double max_rel = 0.0;
  std::int64_t worst = -1;
  std::int64_t running = 0;
  for (auto& in : inputs) {
    if (!in.requires_grad()) {
      running += in.numel();
      continue;
    }
    const std::vector<double> analytic =
        in.has_grad() ? in.grad() : std::vector<double>(in.data().size(), 0.0);
    auto& data = in.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + eps;
      const double plus = f(inputs).item();
      data[i] = saved - eps;
      const double minus = f(inputs).item();
      data[i] = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = analytic[i];
      const double rel =
          std::abs(a - numeric) /
          std::max({std::abs(a), std::abs(numeric), 1e-8});
      if (rel > max_rel) {
        max_rel = rel;
        worst = running + static_cast<std::int64_t>(i);
      }
    }
    running += in.numel();
  }
  report.max_rel_error = max_rel;
  report.worst_index = worst;
  report.pass = max_rel <= tol;
  return report;
}

}  // namespace awfnet
