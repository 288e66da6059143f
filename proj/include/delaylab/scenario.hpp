#pragma once

// Scenario files: one JSON document describing a population model, its
// initial history, an optional harvesting input and run settings.
//
//   {
//     "model": {
//       "a_max": 30, "n_age": 3000, "dt": 0.01, "delay": 0.5,
//       "mu": 1.0, "alpha": 0.25, "mu_inf": 1.0,
//       "birth": {"law": "B2", "beta": 2.0, "critical": false},
//       "history": {"profile": {"exponential": {"scale": 1, "rate": -1}},
//                   "time_rate": 0.0}
//     },
//     "run": {"t_max": 40, "discard_fraction": 0.5, "snapshot_stride": 0},
//     "harvest": {"eta": 0.1,
//                 "q": {"time": {"constant": 1, "amplitude": 0.5,
//                                "frequency": 2, "phase": 0},
//                       "age": 1.0}},
//     "seed": 7
//   }
//
// An age profile is a number (constant), an array of n_age + 1 node values,
// or {"exponential": {"scale": s, "rate": k}} meaning s·e^{k·a}. For B1,
// "beta" may also be {"table": [[...], ...]} with one row per history slot
// σ = -d·dt; a profile is used for every slot. "critical": true rescales the
// birth table so that ξ(0) = 0 on the model grid. The history is
// φ(s, a) = profile(a)·e^{time_rate·s}, default e^{-a}. q may instead be
// {"table": {"dt": h, "values": [[...], ...]}}, rows at t = -r + i·h,
// linear in time and zero past the last row. Unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>

#include "delaylab/population.hpp"

namespace delaylab {

struct Scenario {
  AgePopulationModel model;
  HistoryFunction history;
  std::optional<HarvestInput> harvest;
  double t_max = 0.0;
  double discard_fraction = 0.5;
  std::size_t snapshot_stride = 0;
  std::uint64_t seed = 0;
};

/// ConfigError on malformed JSON, unknown keys or invalid values.
Scenario parse_scenario(std::string_view json_text);
Scenario load_scenario(const std::filesystem::path& path);

}  // namespace delaylab
