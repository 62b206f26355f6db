#include <algorithm>

#include "son/kernels.hpp"
#include "static_detail.hpp"

namespace son::kernels {

namespace {

ComboOutcome small_lambda_combo(const StaticInstance& inst, std::size_t c, const StaticObjective& obj) {
  const std::size_t K = inst.num_users();
  const std::size_t N = inst.num_cells();
  std::vector<double> rate(K * N), rsrp(K * N);
  inst.tables(c, rate, rsrp);
  ComboOutcome o;
  o.serving = greedy_round_robin(rate, K, N);
  o.eval = evaluate_assignment(rate, o.serving, N, inst.radio(), obj);
  o.score = o.eval.balance;
  o.feasible = o.eval.feasible;
  return o;
}

ComboOutcome fair_combo(const StaticInstance& inst, std::size_t c, double w, std::uint64_t seed, int repetitions,
                        const StaticObjective& obj) {
  const std::size_t K = inst.num_users();
  const std::size_t N = inst.num_cells();
  std::vector<double> rate(K * N), rsrp(K * N);
  inst.tables(c, rate, rsrp);
  const auto orders = detail::rate_orders(rate, K, N);
  const auto strongest = detail::strongest_cells(rsrp, K, N);
  Rng rng = detail::combo_rng(seed, c);
  ComboOutcome best;
  for (int r = 0; r < repetitions; ++r) {
    auto serving = detail::fair_pass(orders, strongest, K, w, rng, &best.coin);
    auto e = evaluate_assignment(rate, serving, N, inst.radio(), obj);
    if (e.feasible && (!best.feasible || e.utility > best.score)) {
      best.feasible = true;
      best.score = e.utility;
      best.serving = std::move(serving);
      best.eval = std::move(e);
    }
  }
  return best;
}

}  // namespace

void small_lambda_sweep_serial(const StaticInstance& inst, const StaticObjective& obj, std::span<ComboOutcome> out) {
  for (std::size_t c = 0; c < inst.num_combos(); ++c) out[c] = small_lambda_combo(inst, c, obj);
}

void small_lambda_sweep_parallel(const StaticInstance& inst, const StaticObjective& obj, std::span<ComboOutcome> out) {
  const auto count = static_cast<long>(inst.num_combos());
#pragma omp parallel for schedule(dynamic, 16)
  for (long c = 0; c < count; ++c) out[static_cast<std::size_t>(c)] = small_lambda_combo(inst, static_cast<std::size_t>(c), obj);
}

void fair_lambda_sweep_serial(const StaticInstance& inst, double w, std::uint64_t seed, int repetitions,
                              const StaticObjective& obj, std::span<ComboOutcome> out) {
  for (std::size_t c = 0; c < inst.num_combos(); ++c) out[c] = fair_combo(inst, c, w, seed, repetitions, obj);
}

void fair_lambda_sweep_parallel(const StaticInstance& inst, double w, std::uint64_t seed, int repetitions,
                                const StaticObjective& obj, std::span<ComboOutcome> out) {
  const auto count = static_cast<long>(inst.num_combos());
#pragma omp parallel for schedule(dynamic, 16)
  for (long c = 0; c < count; ++c) {
    out[static_cast<std::size_t>(c)] = fair_combo(inst, static_cast<std::size_t>(c), w, seed, repetitions, obj);
  }
}

long best_outcome(std::span<const ComboOutcome> outcomes) {
  long best = -1;
  for (std::size_t c = 0; c < outcomes.size(); ++c) {
    if (!outcomes[c].feasible) continue;
    if (best < 0 || outcomes[c].score > outcomes[static_cast<std::size_t>(best)].score) best = static_cast<long>(c);
  }
  return best;
}

}  // namespace son::kernels
