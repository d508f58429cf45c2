// wellcast/synthetic.hpp — deterministic synthetic production wells for
// tests and experiments without field data.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "wellcast/data.hpp"
#include "wellcast/errors.hpp"
#include "wellcast/rng.hpp"

namespace wellcast {

// Wells share the structural constants; choke schedules and noise are
// independent per well. Pressure responds to the well's own rate, to the
// neighbors' rates (scaled by `coupling`), and to the day-over-day rate
// change. `response_lag` shifts the rate the pressure responds to into the
// past, which plants a long-range dependency in the series.
struct SyntheticConfig {
  std::uint64_t seed = 7;
  int days = 500;
  int wells = 1;
  double coupling = 0.0;      // in [0, 1]; neighbor-rate influence on bhp
  int response_lag = 0;       // days between rate cause and pressure effect
  double missing_fraction = 0.02;
};

inline std::vector<WellSeries> generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.days < 50) throw ContractError("generate_synthetic: need at least 50 days");
  if (cfg.wells < 1) throw ContractError("generate_synthetic: need at least 1 well");
  if (cfg.coupling < 0.0 || cfg.coupling > 1.0) {
    throw ContractError("generate_synthetic: coupling must lie in [0, 1]");
  }
  if (cfg.response_lag < 0) throw ContractError("generate_synthetic: negative response lag");

  // Structural constants (bar, m3/d, degC).
  const double rate_per_choke = 2.0;    // m3/d per % choke
  const double base_pressure = 240.0;   // bar at zero rate
  const double drawdown_coeff = 0.40;   // bar per m3/d of own rate
  const double transient_coeff = 0.15;  // bar per m3/d of day-over-day change
  const double oil_frac = 0.55, gas_frac = 0.30, water_frac = 0.15;
  const double base_temp = 95.0;

  Rng root(cfg.seed);
  const std::int64_t day0 = dates::from_civil(2020, 1, 1);

  // Choke schedules and rates first; pressure needs all wells' rates.
  std::vector<std::vector<double>> choke(cfg.wells), rate(cfg.wells);
  for (int w = 0; w < cfg.wells; ++w) {
    Rng rng = root.fork(100 + static_cast<std::uint64_t>(w));
    choke[w].resize(cfg.days);
    rate[w].resize(cfg.days);
    int remaining = 0;
    double level = 0.0;
    for (int t = 0; t < cfg.days; ++t) {
      if (remaining == 0) {
        remaining = 10 + static_cast<int>(rng.index(31));  // 10..40 day plateaus
        level = rng.uniform(20.0, 90.0);
      }
      choke[w][t] = level;
      --remaining;
    }
    const double rate_range = rate_per_choke * 90.0;
    for (int t = 0; t < cfg.days; ++t) {
      rate[w][t] = rate_per_choke * choke[w][t] + 0.01 * rate_range * rng.normal();
    }
  }

  std::vector<WellSeries> out;
  out.reserve(cfg.wells);
  for (int w = 0; w < cfg.wells; ++w) {
    Rng rng = root.fork(200 + static_cast<std::uint64_t>(w));
    char id[8];
    std::snprintf(id, sizeof(id), "W%02d", w);

    WellSeries series;
    series.well_id = id;
    series.dates.resize(cfg.days);
    for (int t = 0; t < cfg.days; ++t) series.dates[t] = day0 + t;

    std::vector<double> bhp(cfg.days), bht(cfg.days);
    const double pressure_range = drawdown_coeff * rate_per_choke * 90.0;
    for (int t = 0; t < cfg.days; ++t) {
      const int tl = std::max(0, t - cfg.response_lag);
      const int tl_prev = std::max(0, tl - 1);
      double neighbor_sum = 0.0;
      for (int v = 0; v < cfg.wells; ++v)
        if (v != w) neighbor_sum += rate[v][tl];
      bhp[t] = base_pressure - drawdown_coeff * rate[w][tl] -
               cfg.coupling * drawdown_coeff * neighbor_sum -
               transient_coeff * (rate[w][tl] - rate[w][tl_prev]) +
               0.01 * pressure_range * rng.normal();
      bht[t] = base_temp + 2.0 * std::sin(2.0 * std::numbers::pi * t / 120.0) +
               0.01 * 4.0 * rng.normal();
    }

    auto add_column = [&](const std::string& name, std::vector<double> values) {
      Column col;
      col.name = name;
      col.values = std::move(values);
      col.observed.assign(cfg.days, 1);
      series.columns.push_back(std::move(col));
    };
    std::vector<double> oil(cfg.days), gas(cfg.days), water(cfg.days);
    for (int t = 0; t < cfg.days; ++t) {
      oil[t] = oil_frac * rate[w][t];
      gas[t] = gas_frac * rate[w][t];
      water[t] = water_frac * rate[w][t];
    }
    add_column("oil_rate", oil);
    add_column("gas_rate", gas);
    add_column("water_rate", water);
    add_column("bhp", bhp);
    add_column("bht", bht);
    add_column("choke_pct", choke[w]);
    add_column("liquid_rate", rate[w]);

    // Knock out a few cells at random; interpolation fills them later.
    Rng mask_rng = root.fork(300 + static_cast<std::uint64_t>(w));
    for (auto& col : series.columns) {
      for (int t = 0; t < cfg.days; ++t) {
        if (mask_rng.uniform() < cfg.missing_fraction) col.observed[t] = 0;
      }
      // interpolate_missing needs two observations per column
      if (cfg.days >= 2) {
        col.observed[0] = 1;
        col.observed[cfg.days - 1] = 1;
      }
    }
    out.push_back(std::move(series));
  }
  return out;
}

inline std::vector<WellSeries> generate_synthetic(std::uint64_t seed, int days, int wells,
                                                  double coupling) {
  SyntheticConfig cfg;
  cfg.seed = seed;
  cfg.days = days;
  cfg.wells = wells;
  cfg.coupling = coupling;
  return generate_synthetic(cfg);
}

}  // namespace wellcast
