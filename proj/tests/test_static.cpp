#include <doctest.h>

#include <memory>

#include "oracles.hpp"
#include "son/error.hpp"
#include "son/kernels.hpp"
#include "son/static_opt.hpp"

using namespace son;

namespace {

// Rates drawn from the CQI table so every candidate is uncongested
// (K * 6 PRBs stays under the budget for K <= 16).
StaticInstance random_instance(Rng& rng, std::size_t K, std::size_t N, std::size_t combos) {
  const auto table = CqiTable::standard();
  const auto& levels = table.levels();
  std::vector<std::vector<int>> cs;
  for (std::size_t c = 0; c < combos; ++c) {
    std::vector<int> t(N);
    for (int& x : t) x = static_cast<int>(uniform_index(rng, 11));
    cs.push_back(t);
  }
  std::vector<double> rate(combos * K * N), rsrp(combos * K * N);
  for (double& r : rate) r = levels[uniform_index(rng, levels.size())].rate_mbps_per_prb;
  for (double& p : rsrp) p = uniform(rng, -110, -60);
  return StaticInstance(K, N, cs, rate, rsrp, RadioConfig{});
}

void check_same(std::span<const kernels::ComboOutcome> a, std::span<const kernels::ComboOutcome> b) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].score == b[i].score);
    CHECK(a[i].serving == b[i].serving);
    CHECK(a[i].feasible == b[i].feasible);
    CHECK(a[i].coin.greedy_rounds == b[i].coin.greedy_rounds);
    CHECK(a[i].coin.random_picks == b[i].coin.random_picks);
  }
}

}  // namespace

TEST_CASE("one user, two BSs: the optimum serves from the faster BS") {
  // Both rates are below CBR / 6, so throughput is 6 r and the faster BS wins.
  const StaticInstance slow(1, 2, {{0, 0}}, {0.1523, 0.1000}, {-80, -90}, RadioConfig{});
  const auto sol = exact_enumerate(slow, 0.0);
  CHECK(sol.association.serving_cells() == std::vector<int>{0});
  CHECK(sol.eval.throughput_mbps == doctest::Approx(6 * 0.1523));
  CHECK(sol.candidates == 2);
  // Above CBR / 6 both give 1 Mbps and the load term picks the faster BS.
  const StaticInstance inst(1, 2, {{0, 0}}, {0.8770, 2.7305}, {-80, -90}, RadioConfig{});
  const auto bal = exact_enumerate(inst, 1.0);
  CHECK(bal.association.serving_cells() == std::vector<int>{1});
  CHECK(bal.eval.throughput_mbps == doctest::Approx(1.0));
}

TEST_CASE("a huge lambda splits identical users evenly") {
  const std::size_t K = 6, N = 2;
  const StaticInstance inst(K, N, {{0, 0}}, std::vector<double>(K * N, 0.5), std::vector<double>(K * N, -80),
                            RadioConfig{});
  const auto sol = exact_enumerate(inst, 1e6);
  CHECK(sol.eval.cell_load_prb == std::vector<double>{6.0, 6.0});
  CHECK(sol.eval.max_load_prb == 6.0);
}

TEST_CASE("exact enumeration agrees with an independent enumerator") {
  Rng rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t K = 1 + uniform_index(rng, 5), N = 1 + uniform_index(rng, 3), C = 1 + uniform_index(rng, 3);
    const auto inst = random_instance(rng, K, N, C);
    for (double lambda : {0.0, 0.5, 1.0, 10.0}) {
      const auto sol = exact_enumerate(inst, lambda);
      const auto want = oracle::enumerate(inst, lambda);
      CHECK(sol.objective == want.best);
      CHECK(sol.candidates == want.candidates);
      std::vector<double> rate(K * N), rsrp(K * N);
      inst.tables(sol.combo_index, rate, rsrp);
      CHECK(oracle::static_objective(rate, sol.association.serving_cells(), N, inst.radio(), lambda) == want.best);
      // Neither heuristic can beat the exact minimum peak load.
      CHECK(heuristic_small_lambda(inst).eval.max_load_prb >= want.min_peak - 1e-12);
      Rng coin(trial);
      CHECK(heuristic_fair_lambda(inst, lambda / (1 + lambda), coin).eval.max_load_prb >= want.min_peak - 1e-12);
    }
  }
}

TEST_CASE("w = 1 is the round-robin greedy; w = 0 is strongest-RSRP association") {
  Rng rng(8);
  const std::size_t K = 12, N = 3;
  const auto inst = random_instance(rng, K, N, 4);
  std::vector<double> rate(K * N), rsrp(K * N);
  for (std::size_t c = 0; c < inst.num_combos(); ++c) {
    inst.tables(c, rate, rsrp);
    Rng coin(c);
    CHECK(fair_assignment(rate, rsrp, K, N, 1.0, coin) == greedy_round_robin(rate, K, N));
    const auto strongest = fair_assignment(rate, rsrp, K, N, 0.0, coin);
    for (std::size_t k = 0; k < K; ++k) {
      const auto row = std::span<const double>(rsrp).subspan(k * N, N);
      CHECK(static_cast<std::size_t>(strongest[k]) ==
            static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin()));
    }
  }
  Rng coin(1);
  const auto fair = heuristic_fair_lambda(inst, 1.0, coin);
  const auto small = heuristic_small_lambda(inst);
  CHECK(fair.combo_index == small.combo_index);
  CHECK(fair.association == small.association);
}

TEST_CASE("the branch coin picks the greedy round with probability w") {
  const std::size_t K = 10000, N = 2;
  Rng rng(2);
  std::vector<double> rate(K * N), rsrp(K * N);
  for (double& r : rate) r = uniform(rng, 0.1, 5.0);
  for (double& p : rsrp) p = uniform(rng, -110, -60);
  FairStats stats;
  fair_assignment(rate, rsrp, K, N, 0.5, rng, &stats);
  const double frac = static_cast<double>(stats.greedy_rounds) /
                      static_cast<double>(stats.greedy_rounds + stats.random_picks);
  CHECK(frac == doctest::Approx(0.5).epsilon(0.04));
}

TEST_CASE("greedy round robin balances user counts when N divides K; N = 1 is trivial") {
  Rng rng(4);
  const std::size_t K = 12, N = 4;
  std::vector<double> rate(K * N);
  for (double& r : rate) r = uniform(rng, 0.1, 5.0);
  const auto serving = greedy_round_robin(rate, K, N);
  std::vector<int> count(N, 0);
  for (int s : serving) ++count[static_cast<std::size_t>(s)];
  CHECK(count == std::vector<int>(N, 3));

  const auto one = random_instance(rng, 5, 1, 2);
  for (const auto& sol : {exact_enumerate(one, 1.0), heuristic_small_lambda(one)}) {
    CHECK(sol.association.serving_cells() == std::vector<int>(5, 0));
  }
}

TEST_CASE("exact enumeration refuses oversized instances") {
  Rng rng(5);
  const auto inst = random_instance(rng, 25, 2, 1);
  CHECK_THROWS_AS(exact_enumerate(inst, 1.0), CapacityError);
  CHECK_THROWS_AS(exact_enumerate(random_instance(rng, 4, 2, 2), 1.0, std::nullopt, 31), CapacityError);
  CHECK_NOTHROW(exact_enumerate(random_instance(rng, 4, 2, 2), 1.0, std::nullopt, 32));
  CHECK_THROWS_AS(exact_enumerate(random_instance(rng, 3, 2, 1), 1.0, 1e9), StateError);
}

TEST_CASE("serial and parallel sweeps agree exactly") {
  Rng rng(6);
  const auto inst = random_instance(rng, 40, 4, 64);
  StaticObjective obj;
  std::vector<kernels::ComboOutcome> a(inst.num_combos()), b(inst.num_combos());
  kernels::small_lambda_sweep_serial(inst, obj, a);
  kernels::small_lambda_sweep_parallel(inst, obj, b);
  check_same(a, b);
  std::vector<kernels::ComboOutcome> c(inst.num_combos()), d(inst.num_combos());
  kernels::fair_lambda_sweep_serial(inst, 0.5, 77, 4, obj, c);
  kernels::fair_lambda_sweep_parallel(inst, 0.5, 77, 4, obj, d);
  check_same(c, d);
  CHECK(kernels::best_outcome(a) == kernels::best_outcome(b));
}

namespace {

std::shared_ptr<const RsrpTensor> static_map() {
  static const auto t = [] {
    MapGenConfig cfg;
    cfg.area = {400, 400};
    cfg.grid_spacing_m = 10;
    return std::make_shared<const RsrpTensor>(
        generate_map(cfg, TiltDictionary::standard(), {{100, 100}, {300, 100}, {100, 300}, {300, 300}}));
  }();
  return t;
}

std::vector<std::vector<int>> coarse_combos() {
  std::vector<std::vector<int>> out;
  for (const auto& c : all_tilt_combos(4, 3)) {
    std::vector<int> t;
    for (int m : c) t.push_back(5 * m);
    out.push_back(t);
  }
  return out;
}

}  // namespace

TEST_CASE("periodic policy with stationary users repeats the same decision") {
  MobilityConfig mob;
  mob.num_users = 30;
  mob.area = {400, 400};
  mob.speed_min_mps = mob.speed_max_mps = 0.0;
  NetworkSim net(static_map(), RadioConfig{}, mob);
  net.reset(3);
  StaticPolicyConfig cfg;
  cfg.solver = StaticSolver::kSmallLambda;
  cfg.combos = coarse_combos();
  const auto log = periodic_static_policy(net, cfg, 12);
  REQUIRE(log.ticks.size() == 12);
  for (const auto& t : log.ticks) {
    CHECK(t.tilt == log.ticks[0].tilt);
    CHECK(t.cell_load_prb == log.ticks[0].cell_load_prb);
  }
  CHECK(log.stats.solves == 12);
}

TEST_CASE("re-optimizing every tick never does worse than a slower cadence") {
  MobilityConfig mob;
  mob.num_users = 40;
  mob.area = {400, 400};
  mob.tick_seconds = 60;
  auto run = [&](int period) {
    NetworkSim net(static_map(), RadioConfig{}, mob);
    net.reset(9);
    StaticPolicyConfig cfg;
    cfg.solver = StaticSolver::kSmallLambda;
    cfg.period_ticks = period;
    cfg.combos = coarse_combos();
    return periodic_static_policy(net, cfg, 48);
  };
  const auto fast = run(1), slow = run(8);
  double fast_sum = 0.0, slow_sum = 0.0;
  for (std::size_t t = 0; t < 48; ++t) {
    const double f = *std::max_element(fast.ticks[t].cell_load_prb.begin(), fast.ticks[t].cell_load_prb.end());
    const double s = *std::max_element(slow.ticks[t].cell_load_prb.begin(), slow.ticks[t].cell_load_prb.end());
    CHECK(f <= s + 1e-9);
    fast_sum += f;
    slow_sum += s;
  }
  CHECK(fast_sum <= slow_sum);
  CHECK(slow.stats.solves == 48);  // association still re-solved every tick
}
