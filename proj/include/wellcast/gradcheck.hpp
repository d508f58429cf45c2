// wellcast/gradcheck.hpp — finite-difference verification of taped gradients.
#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "wellcast/errors.hpp"
#include "wellcast/tensor.hpp"

namespace wellcast {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
};

// Compares tape gradients of the scalar function `f` against central finite
// differences, component by component. `f` must read the parameters through
// the given handles and must be deterministic (evaluate models in eval mode).
// Returns max over components of |a - n| / max(|a|, |n|, 1e-8).
inline GradCheckResult grad_check_detailed(const std::function<Tensor()>& f,
                                           std::vector<std::pair<std::string, Tensor>>& params,
                                           double eps) {
  if (eps < 1e-7 || eps > 1e-3) {
    throw ContractError("grad_check: eps must lie in [1e-7, 1e-3]");
  }

  zero_grad(params);
  std::vector<std::vector<double>> analytic;
  {
    Tensor loss = f();
    if (!std::isfinite(loss.value())) throw NumericError("grad_check: loss is not finite");
    loss.backward();
    analytic.reserve(params.size());
    for (auto& [name, p] : params) analytic.push_back(p.grad());
  }

  GradCheckResult result;
  Tape::NoGradGuard eval_only;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = params[pi].second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p.data()[i];
      p.data()[i] = saved + eps;
      const double f_plus = f().value();
      p.data()[i] = saved - eps;
      const double f_minus = f().value();
      p.data()[i] = saved;
      if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
        throw NumericError("grad_check: non-finite evaluation while perturbing " +
                           params[pi].first);
      }
      const double numeric = (f_plus - f_minus) / (2.0 * eps);
      const double a = analytic[pi][i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_param = params[pi].first;
        result.worst_index = i;
      }
    }
  }
  return result;
}

inline double grad_check(const std::function<Tensor()>& f,
                         std::vector<std::pair<std::string, Tensor>>& params, double eps) {
  return grad_check_detailed(f, params, eps).max_rel_error;
}

}  // namespace wellcast
