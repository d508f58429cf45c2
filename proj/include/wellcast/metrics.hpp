// wellcast/metrics.hpp — forecast quality metrics on physical-unit series.
#pragma once

#include <cmath>
#include <cstddef>
#include <span>

#include <json.hpp>

#include "wellcast/errors.hpp"

namespace wellcast {

// RMSE in target units; RSE/RAE relative to the constant-mean predictor;
// MAPE in percent. RSE and RAE are undefined for constant actuals, MAPE is
// undefined when any actual is zero.
struct MetricReport {
  double rmse = 0.0;
  double rse = 0.0;
  double rae = 0.0;
  double mape = 0.0;
  std::size_t n = 0;
  bool rse_defined = true;
  bool rae_defined = true;
  bool mape_defined = true;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["rmse"] = rmse;
    j["rse"] = rse_defined ? nlohmann::json(rse) : nlohmann::json(nullptr);
    j["rae"] = rae_defined ? nlohmann::json(rae) : nlohmann::json(nullptr);
    j["mape"] = mape_defined ? nlohmann::json(mape) : nlohmann::json(nullptr);
    j["n"] = n;
    j["undefined"] = {{"rse", !rse_defined}, {"rae", !rae_defined}, {"mape", !mape_defined}};
    return j;
  }
};

inline MetricReport evaluate(std::span<const double> preds, std::span<const double> actuals) {
  if (preds.size() != actuals.size()) {
    throw ContractError("evaluate: length mismatch " + std::to_string(preds.size()) + " vs " +
                        std::to_string(actuals.size()));
  }
  if (preds.empty()) throw ContractError("evaluate: empty series");
  const std::size_t n = preds.size();

  long double mean = 0.0L;
  for (double y : actuals) mean += y;
  mean /= static_cast<long double>(n);

  long double sq_err = 0.0L, abs_err = 0.0L;
  long double sq_dev = 0.0L, abs_dev = 0.0L;
  long double ape = 0.0L;
  bool any_zero_actual = false;
  for (std::size_t i = 0; i < n; ++i) {
    const long double d = static_cast<long double>(preds[i]) - actuals[i];
    const long double m = mean - actuals[i];
    sq_err += d * d;
    abs_err += std::abs(d);
    sq_dev += m * m;
    abs_dev += std::abs(m);
    if (actuals[i] == 0.0) {
      any_zero_actual = true;
    } else {
      ape += std::abs(d / actuals[i]);
    }
  }

  MetricReport r;
  r.n = n;
  r.rmse = static_cast<double>(std::sqrt(sq_err / static_cast<long double>(n)));
  r.rse_defined = sq_dev != 0.0L;
  r.rae_defined = abs_dev != 0.0L;
  r.rse = r.rse_defined ? static_cast<double>(sq_err / sq_dev) : 0.0;
  r.rae = r.rae_defined ? static_cast<double>(abs_err / abs_dev) : 0.0;
  r.mape_defined = !any_zero_actual;
  r.mape = r.mape_defined
               ? static_cast<double>(100.0L * ape / static_cast<long double>(n))
               : 0.0;
  return r;
}

}  // namespace wellcast
