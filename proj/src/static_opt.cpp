#include "son/static_opt.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "son/error.hpp"
#include "son/kernels.hpp"
#include "static_detail.hpp"

namespace son {

namespace detail {

std::vector<std::vector<int>> rate_orders(std::span<const double> rate, std::size_t num_users, std::size_t num_cells) {
  std::vector<std::vector<int>> orders(num_cells, std::vector<int>(num_users));
  for (std::size_t n = 0; n < num_cells; ++n) {
    auto& o = orders[n];
    std::iota(o.begin(), o.end(), 0);
    std::stable_sort(o.begin(), o.end(), [&](int a, int b) {
      return rate[static_cast<std::size_t>(a) * num_cells + n] > rate[static_cast<std::size_t>(b) * num_cells + n];
    });
  }
  return orders;
}

std::vector<int> strongest_cells(std::span<const double> rsrp, std::size_t num_users, std::size_t num_cells) {
  std::vector<int> best(num_users, 0);
  for (std::size_t k = 0; k < num_users; ++k) {
    const double* row = rsrp.data() + k * num_cells;
    std::size_t b = 0;
    for (std::size_t n = 1; n < num_cells; ++n) {
      if (row[n] > row[b]) b = n;
    }
    best[k] = static_cast<int>(b);
  }
  return best;
}

std::vector<int> fair_pass(const std::vector<std::vector<int>>& orders, const std::vector<int>& strongest,
                           std::size_t num_users, double w, Rng& rng, FairStats* stats) {
  const std::size_t N = orders.size();
  std::vector<int> serving(num_users, -1);
  // Unassigned pool with O(1) removal, for the random branch.
  std::vector<int> pool(num_users), where(num_users);
  std::iota(pool.begin(), pool.end(), 0);
  std::iota(where.begin(), where.end(), 0);
  auto take = [&](int k, int n) {
    serving[static_cast<std::size_t>(k)] = n;
    const int pos = where[static_cast<std::size_t>(k)];
    const int last = pool.back();
    pool[static_cast<std::size_t>(pos)] = last;
    where[static_cast<std::size_t>(last)] = pos;
    pool.pop_back();
  };
  std::vector<std::size_t> cursor(N, 0);
  while (!pool.empty()) {
    bool greedy = w >= 1.0;
    if (w > 0.0 && w < 1.0) greedy = uniform01(rng) < w;
    if (greedy) {
      if (stats) ++stats->greedy_rounds;
      for (std::size_t n = 0; n < N && !pool.empty(); ++n) {
        auto& c = cursor[n];
        while (serving[static_cast<std::size_t>(orders[n][c])] >= 0) ++c;
        take(orders[n][c], static_cast<int>(n));
      }
    } else {
      if (stats) ++stats->random_picks;
      const int k = pool[uniform_index(rng, pool.size())];
      take(k, strongest[static_cast<std::size_t>(k)]);
    }
  }
  return serving;
}

}  // namespace detail

StaticInstance::StaticInstance(std::size_t num_users, std::size_t num_cells, std::vector<std::vector<int>> combos,
                               std::vector<double> rates, std::vector<double> rsrp, RadioConfig radio)
    : num_users_(num_users),
      num_cells_(num_cells),
      combos_(std::move(combos)),
      rates_(std::move(rates)),
      rsrp_(std::move(rsrp)),
      radio_(std::move(radio)) {
  if (num_cells_ == 0) throw ConfigError("static instance needs at least one BS");
  if (combos_.empty()) throw ConfigError("static instance needs at least one tilt combination");
  const std::size_t table = num_users_ * num_cells_;
  if (rates_.size() != combos_.size() * table || rsrp_.size() != combos_.size() * table) {
    throw DimensionError("static instance tables must hold combos x K x N values");
  }
  for (const auto& c : combos_) {
    if (c.size() != num_cells_) throw DimensionError("tilt combination has the wrong length");
  }
  for (double r : rates_) {
    if (!(r >= 0.0)) throw ConfigError("static instance rates must be non-negative");
  }
}

StaticInstance StaticInstance::from_rsrp(std::vector<double> user_rsrp, std::size_t num_users, std::size_t num_tilts,
                                         std::size_t num_cells, std::vector<std::vector<int>> combos,
                                         RadioConfig radio) {
  if (num_cells == 0 || num_tilts == 0) throw ConfigError("static instance needs BSs and tilts");
  if (combos.empty()) throw ConfigError("static instance needs at least one tilt combination");
  if (user_rsrp.size() != num_users * num_tilts * num_cells) {
    throw DimensionError("user RSRP must hold K x M x N values");
  }
  for (const auto& c : combos) {
    if (c.size() != num_cells) throw DimensionError("tilt combination has the wrong length");
    for (int m : c) {
      if (m < 0 || static_cast<std::size_t>(m) >= num_tilts) throw DimensionError("tilt index out of range");
    }
  }
  StaticInstance s;
  s.num_users_ = num_users;
  s.num_cells_ = num_cells;
  s.num_tilts_ = num_tilts;
  s.combos_ = std::move(combos);
  s.user_rsrp_ = std::move(user_rsrp);
  s.radio_ = std::move(radio);
  return s;
}

void StaticInstance::tables(std::size_t c, std::span<double> rate, std::span<double> rsrp) const {
  const std::size_t table = num_users_ * num_cells_;
  if (rate.size() != table || rsrp.size() != table) throw DimensionError("table buffers must hold K x N values");
  if (user_rsrp_.empty()) {
    std::copy_n(rates_.data() + c * table, table, rate.data());
    std::copy_n(rsrp_.data() + c * table, table, rsrp.data());
    return;
  }
  const auto& combo = combos_[c];
  const std::size_t N = num_cells_;
  for (std::size_t k = 0; k < num_users_; ++k) {
    double* row = rsrp.data() + k * N;
    for (std::size_t n = 0; n < N; ++n) row[n] = user_rsrp_[(k * num_tilts_ + static_cast<std::size_t>(combo[n])) * N + n];
    // Same arithmetic as the tick simulator, so both see identical rates.
    for (std::size_t n = 0; n < N; ++n) {
      rate[k * N + n] = rate_from_sinr(sinr_db({row, N}, n, radio_.noise_dbm), radio_.cqi_table);
    }
  }
}

std::vector<std::vector<int>> all_tilt_combos(std::size_t num_cells, std::size_t num_tilts) {
  if (num_cells == 0 || num_tilts == 0) throw ConfigError("tilt combinations need N > 0 and M > 0");
  std::size_t count = 1;
  for (std::size_t n = 0; n < num_cells; ++n) {
    if (count > 100'000'000 / num_tilts) throw CapacityError("too many tilt combinations to list");
    count *= num_tilts;
  }
  std::vector<std::vector<int>> out;
  out.reserve(count);
  std::vector<int> c(num_cells, 0);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(c);
    for (std::size_t n = num_cells; n-- > 0;) {
      if (static_cast<std::size_t>(++c[n]) < num_tilts) break;
      c[n] = 0;
    }
  }
  return out;
}

StaticEval evaluate_assignment(std::span<const double> rate, std::span<const int> serving, std::size_t num_cells,
                               const RadioConfig& radio, const StaticObjective& obj) {
  const std::size_t K = serving.size();
  std::vector<double> r(K), demand(K);
  for (std::size_t k = 0; k < K; ++k) {
    r[k] = rate[k * num_cells + static_cast<std::size_t>(serving[k])];
    demand[k] = user_load_prb(r[k], radio);
  }
  const AssociationMatrix assoc(num_cells, {serving.begin(), serving.end()});
  const auto alloc = schedule_network(assoc, demand, r, static_cast<double>(radio.cell_prb_budget));
  auto m = snapshot_metrics(assoc, r, alloc, radio);
  StaticEval e;
  e.cell_load_prb = std::move(m.cell_load_prb);
  e.cell_throughput_mbps = std::move(m.cell_throughput_mbps);
  for (std::size_t n = 0; n < num_cells; ++n) {
    e.throughput_mbps += e.cell_throughput_mbps[n];
    e.max_load_prb = std::max(e.max_load_prb, e.cell_load_prb[n]);
    if (obj.phi && !(e.cell_throughput_mbps[n] > *obj.phi)) e.feasible = false;
  }
  e.throughput_norm = e.throughput_mbps / obj.throughput_scale_mbps;
  e.balance = -e.max_load_prb / static_cast<double>(radio.cell_prb_budget);
  e.utility = obj.throughput_weight * e.throughput_norm + obj.balance_weight * e.balance;
  return e;
}

namespace {

StaticSolution make_solution(const StaticInstance& inst, std::size_t combo, std::vector<int> serving, StaticEval eval,
                             double objective, std::uint64_t candidates) {
  StaticSolution s;
  s.association = AssociationMatrix(inst.num_cells(), std::move(serving));
  s.combo_index = combo;
  s.tilt = inst.combo(combo);
  s.objective = objective;
  s.eval = std::move(eval);
  s.candidates = candidates;
  return s;
}

StaticSolution from_outcomes(const StaticInstance& inst, std::vector<kernels::ComboOutcome>& outcomes,
                             std::uint64_t candidates) {
  const long best = kernels::best_outcome(outcomes);
  if (best < 0) throw StateError("no tilt combination satisfies the throughput floor");
  auto& o = outcomes[static_cast<std::size_t>(best)];
  return make_solution(inst, static_cast<std::size_t>(best), std::move(o.serving), std::move(o.eval), o.score,
                       candidates);
}

}  // namespace

StaticSolution exact_enumerate(const StaticInstance& inst, const StaticObjective& obj, std::uint64_t cap) {
  const std::size_t K = inst.num_users();
  const std::size_t N = inst.num_cells();
  // N^K * |combos| against the cap, without overflow.
  double size = static_cast<double>(inst.num_combos());
  for (std::size_t k = 0; k < K; ++k) size *= static_cast<double>(N);
  if (size > static_cast<double>(cap)) {
    throw CapacityError("exact enumeration needs " + std::to_string(N) + "^" + std::to_string(K) + " x " +
                        std::to_string(inst.num_combos()) + " = " + std::to_string(size) +
                        " candidates, cap is " + std::to_string(cap));
  }
  std::vector<double> rate(K * N), rsrp(K * N);
  bool found = false;
  double best_u = -std::numeric_limits<double>::infinity();
  std::size_t best_combo = 0;
  std::vector<int> best_serving;
  StaticEval best_eval;
  std::uint64_t candidates = 0;
  for (std::size_t c = 0; c < inst.num_combos(); ++c) {
    inst.tables(c, rate, rsrp);
    std::vector<int> serving(K, 0);
    for (;;) {
      ++candidates;
      auto e = evaluate_assignment(rate, serving, N, inst.radio(), obj);
      if (e.feasible && (!found || e.utility > best_u)) {
        found = true;
        best_u = e.utility;
        best_combo = c;
        best_serving = serving;
        best_eval = std::move(e);
      }
      // Odometer over base-N digits, user 0 fastest.
      std::size_t k = 0;
      for (; k < K; ++k) {
        if (static_cast<std::size_t>(++serving[k]) < N) break;
        serving[k] = 0;
      }
      if (k == K) break;
    }
  }
  if (!found) throw StateError("no candidate satisfies the throughput floor");
  return make_solution(inst, best_combo, std::move(best_serving), std::move(best_eval), best_u, candidates);
}

StaticSolution exact_enumerate(const StaticInstance& inst, double lambda, std::optional<double> phi,
                               std::uint64_t cap) {
  StaticObjective obj;
  obj.throughput_weight = 1.0;
  obj.balance_weight = lambda;
  obj.phi = phi;
  return exact_enumerate(inst, obj, cap);
}

std::vector<int> greedy_round_robin(std::span<const double> rate, std::size_t num_users, std::size_t num_cells) {
  Rng unused(0);
  const auto orders = detail::rate_orders(rate, num_users, num_cells);
  return detail::fair_pass(orders, {}, num_users, 1.0, unused, nullptr);
}

StaticSolution heuristic_small_lambda(const StaticInstance& inst, std::optional<double> phi, bool parallel) {
  StaticObjective obj;
  obj.throughput_weight = 0.0;
  obj.balance_weight = 1.0;
  obj.phi = phi;
  std::vector<kernels::ComboOutcome> out(inst.num_combos());
  if (parallel) {
    kernels::small_lambda_sweep_parallel(inst, obj, out);
  } else {
    kernels::small_lambda_sweep_serial(inst, obj, out);
  }
  return from_outcomes(inst, out, inst.num_combos());
}

std::vector<int> fair_assignment(std::span<const double> rate, std::span<const double> rsrp, std::size_t num_users,
                                 std::size_t num_cells, double w, Rng& rng, FairStats* stats) {
  const auto orders = detail::rate_orders(rate, num_users, num_cells);
  const auto strongest = detail::strongest_cells(rsrp, num_users, num_cells);
  return detail::fair_pass(orders, strongest, num_users, w, rng, stats);
}

StaticSolution heuristic_fair_lambda(const StaticInstance& inst, double w, Rng& rng, const FairOptions& opt,
                                     FairStats* stats) {
  if (!(w >= 0.0 && w <= 1.0)) throw ConfigError("fair-lambda threshold w must lie in [0, 1]");
  if (opt.repetitions < 1) throw ConfigError("repetitions must be >= 1");
  StaticObjective obj;
  obj.throughput_weight = 1.0 - w;
  obj.balance_weight = w;
  obj.phi = opt.phi;
  const std::uint64_t seed = rng();
  std::vector<kernels::ComboOutcome> out(inst.num_combos());
  if (opt.parallel) {
    kernels::fair_lambda_sweep_parallel(inst, w, seed, opt.repetitions, obj, out);
  } else {
    kernels::fair_lambda_sweep_serial(inst, w, seed, opt.repetitions, obj, out);
  }
  if (stats) {
    for (const auto& o : out) {
      stats->greedy_rounds += o.coin.greedy_rounds;
      stats->random_picks += o.coin.random_picks;
    }
  }
  return from_outcomes(inst, out, inst.num_combos() * static_cast<std::uint64_t>(opt.repetitions));
}

StaticRunLog periodic_static_policy(NetworkSim& net, const StaticPolicyConfig& cfg, long num_ticks) {
  if (cfg.period_ticks < 1) throw ConfigError("static policy period must be >= 1 tick");
  if (!(cfg.lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  const std::size_t K = net.num_users();
  const std::size_t M = net.tensor().num_tilts();
  const std::size_t N = net.num_cells();
  const auto combos = cfg.combos.empty() ? all_tilt_combos(N, M) : cfg.combos;
  Rng coin = make_rng(cfg.seed, "heuristic-coin");
  const double w = std::isinf(cfg.lambda) ? 1.0 : cfg.lambda / (1.0 + cfg.lambda);

  auto solve = [&](std::vector<std::vector<int>> set) {
    auto inst = StaticInstance::from_rsrp(net.rsrp_all_tilts(), K, M, N, std::move(set), net.radio());
    switch (cfg.solver) {
      case StaticSolver::kExact:
        return exact_enumerate(inst, cfg.lambda, cfg.fair.phi);
      case StaticSolver::kSmallLambda:
        return heuristic_small_lambda(inst, cfg.fair.phi, cfg.fair.parallel);
      case StaticSolver::kFairLambda:
        break;
    }
    return heuristic_fair_lambda(inst, w, coin, cfg.fair);
  };

  StaticRunLog log;
  std::vector<int> tilt = net.tilt();
  AssociationMatrix assoc = net.snapshot().association;
  for (long t = 0; t < num_ticks; ++t) {
    net.advance_mobility();
    const bool boundary = t % cfg.period_ticks == 0;
    if (boundary || cfg.reassociate_each_tick) {
      const auto start = std::chrono::steady_clock::now();
      auto sol = boundary ? solve(combos) : solve({tilt});
      log.stats.wall_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      ++log.stats.solves;
      log.stats.candidates += sol.candidates;
      tilt = sol.tilt;
      assoc = sol.association;
      log.solver_objective.push_back(sol.objective);
    } else {
      log.solver_objective.push_back(std::numeric_limits<double>::quiet_NaN());
    }
    log.ticks.push_back(net.apply_direct(tilt, assoc));
  }
  return log;
}

}  // namespace son
