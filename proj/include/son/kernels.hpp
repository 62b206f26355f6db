#pragma once

// Data-parallel inner loops. Each kernel has an OpenMP version and a serial
// reference with identical per-element arithmetic; tests assert the two agree
// bit-for-bit and bench/ times them against each other.

#include <span>
#include <vector>

#include "son/geometry.hpp"
#include "son/rsrp_map.hpp"
#include "son/static_opt.hpp"

namespace son {

struct SiteGeometry {
  Point position;
  double azimuth_deg = 0.0;
};

namespace kernels {

// RSRP of one (anchor, tilt, site) triple before shadowing.
double rsrp_element(const MapGenConfig& cfg, const TiltAngle& tilt, const SiteGeometry& site, Point anchor);

// Fills the (anchor x tilt x site) table; `shadowing` is (anchor x site).
void rsrp_fill_serial(const MapGenConfig& cfg, const TiltDictionary& tilts, std::span<const Point> anchors,
                      std::span<const SiteGeometry> sites, std::span<const double> shadowing,
                      std::span<double> out);
void rsrp_fill_parallel(const MapGenConfig& cfg, const TiltDictionary& tilts, std::span<const Point> anchors,
                        std::span<const SiteGeometry> sites, std::span<const double> shadowing,
                        std::span<double> out);

// Best assignment found for one tilt combination.
struct ComboOutcome {
  double score = 0.0;  // larger is better
  std::vector<int> serving;
  StaticEval eval;
  bool feasible = false;
  FairStats coin;
};

// Round-robin greedy on every combo, scored by F.
void small_lambda_sweep_serial(const StaticInstance& inst, const StaticObjective& obj, std::span<ComboOutcome> out);
void small_lambda_sweep_parallel(const StaticInstance& inst, const StaticObjective& obj, std::span<ComboOutcome> out);

// `repetitions` fair-lambda passes per combo; combo c draws from its own
// stream derived from (seed, c), so both versions agree exactly.
void fair_lambda_sweep_serial(const StaticInstance& inst, double w, std::uint64_t seed, int repetitions,
                              const StaticObjective& obj, std::span<ComboOutcome> out);
void fair_lambda_sweep_parallel(const StaticInstance& inst, double w, std::uint64_t seed, int repetitions,
                                const StaticObjective& obj, std::span<ComboOutcome> out);

// Index of the best feasible outcome, lowest index on ties; -1 if none.
long best_outcome(std::span<const ComboOutcome> outcomes);

}  // namespace kernels
}  // namespace son
