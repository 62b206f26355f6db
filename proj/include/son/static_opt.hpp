#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "son/env.hpp"
#include "son/radio.hpp"
#include "son/random.hpp"

namespace son {

// Frozen-time view of the network: per tilt combination, every user's rate
// and RSRP toward every BS. Tables are either given explicitly or derived
// per combination from a K x M x N user RSRP array.
class StaticInstance {
 public:
  // Explicit tables, each (combos x K x N) flattened combo-major.
  StaticInstance(std::size_t num_users, std::size_t num_cells, std::vector<std::vector<int>> combos,
                 std::vector<double> rates, std::vector<double> rsrp, RadioConfig radio);

  // Rates follow from the SINR each BS would give the user under the combo.
  static StaticInstance from_rsrp(std::vector<double> user_rsrp, std::size_t num_users, std::size_t num_tilts,
                                  std::size_t num_cells, std::vector<std::vector<int>> combos, RadioConfig radio);

  std::size_t num_users() const { return num_users_; }
  std::size_t num_cells() const { return num_cells_; }
  std::size_t num_combos() const { return combos_.size(); }
  const std::vector<int>& combo(std::size_t c) const { return combos_[c]; }
  const RadioConfig& radio() const { return radio_; }

  // Fills K x N rate and RSRP tables for combo c.
  void tables(std::size_t c, std::span<double> rate, std::span<double> rsrp) const;

 private:
  StaticInstance() = default;

  std::size_t num_users_ = 0;
  std::size_t num_cells_ = 0;
  std::size_t num_tilts_ = 0;
  std::vector<std::vector<int>> combos_;
  std::vector<double> rates_;
  std::vector<double> rsrp_;
  std::vector<double> user_rsrp_;  // K x M x N when derived
  RadioConfig radio_;
};

// Every combination in {0..M-1}^N, first BS varying slowest.
std::vector<std::vector<int>> all_tilt_combos(std::size_t num_cells, std::size_t num_tilts);

// Utility weights: U = throughput_weight * R / scale + balance_weight * F with
// F = -max_n L_n / budget. Candidates with any R_n <= phi are infeasible when
// phi is set.
struct StaticObjective {
  double throughput_weight = 1.0;
  double balance_weight = 1.0;
  double throughput_scale_mbps = 100.0;
  std::optional<double> phi;
};

struct StaticEval {
  std::vector<double> cell_load_prb;
  std::vector<double> cell_throughput_mbps;
  double throughput_mbps = 0.0;
  double max_load_prb = 0.0;
  double throughput_norm = 0.0;  // R / scale
  double balance = 0.0;          // F
  double utility = 0.0;
  bool feasible = true;
};

// Schedules users under a fixed association with K x N rate table `rate`.
StaticEval evaluate_assignment(std::span<const double> rate, std::span<const int> serving, std::size_t num_cells,
                               const RadioConfig& radio, const StaticObjective& obj);

struct StaticSolution {
  AssociationMatrix association{0, {}};
  std::size_t combo_index = 0;
  std::vector<int> tilt;
  double objective = 0.0;  // what the solver ranked by
  StaticEval eval;
  std::uint64_t candidates = 0;
};

inline constexpr std::uint64_t kDefaultEnumerationCap = 10'000'000;

// Global optimum of U over every association and combo. Throws CapacityError
// when N^K * |combos| exceeds `cap`, StateError when nothing is feasible.
StaticSolution exact_enumerate(const StaticInstance& inst, const StaticObjective& obj,
                               std::uint64_t cap = kDefaultEnumerationCap);
// U = R + lambda * F.
StaticSolution exact_enumerate(const StaticInstance& inst, double lambda, std::optional<double> phi = std::nullopt,
                               std::uint64_t cap = kDefaultEnumerationCap);

// Round-robin greedy: BS 0, 1, ... each claim their highest-rate unassigned
// user until all are placed. Used by both heuristics.
std::vector<int> greedy_round_robin(std::span<const double> rate, std::size_t num_users, std::size_t num_cells);

// Per combo, the round-robin greedy association; returns the combo with the
// smallest max load (lowest index on ties). Objective = F.
StaticSolution heuristic_small_lambda(const StaticInstance& inst, std::optional<double> phi = std::nullopt,
                                      bool parallel = true);

struct FairOptions {
  int repetitions = 16;
  std::optional<double> phi;
  bool parallel = true;
};

struct FairStats {
  std::uint64_t greedy_rounds = 0;  // coin draws that chose the greedy round
  std::uint64_t random_picks = 0;   // coin draws that chose a random user
};

// Branch coin w = lambda / (1 + lambda). Each step: with probability w one
// greedy round, otherwise a random unassigned user joins its strongest BS.
// Ranked by U_w = (1 - w) R / scale + w F; the best over combos and
// repetitions wins. One value drawn from `rng` seeds all per-combo streams.
StaticSolution heuristic_fair_lambda(const StaticInstance& inst, double w, Rng& rng, const FairOptions& opt = {},
                                     FairStats* stats = nullptr);

// Single pass of the fair-lambda assignment on one combo's tables.
std::vector<int> fair_assignment(std::span<const double> rate, std::span<const double> rsrp, std::size_t num_users,
                                 std::size_t num_cells, double w, Rng& rng, FairStats* stats = nullptr);

enum class StaticSolver { kExact, kSmallLambda, kFairLambda };

struct StaticPolicyConfig {
  StaticSolver solver = StaticSolver::kFairLambda;
  int period_ticks = 1;           // tilt re-chosen every this many ticks
  bool reassociate_each_tick = true;  // association re-solved with tilt held
  double lambda = 1.0;
  FairOptions fair;
  std::vector<std::vector<int>> combos;  // empty: every combination
  std::uint64_t seed = 1;
};

struct SolverStats {
  std::uint64_t solves = 0;
  std::uint64_t candidates = 0;
  double wall_seconds = 0.0;
};

struct StaticRunLog {
  std::vector<TickRecord> ticks;
  std::vector<double> solver_objective;
  SolverStats stats;
};

// Oracle benchmark: each tick moves users, then solves on the true current
// RSRP and applies (tilt, association) directly, bypassing A3.
StaticRunLog periodic_static_policy(NetworkSim& net, const StaticPolicyConfig& cfg, long num_ticks);

}  // namespace son
