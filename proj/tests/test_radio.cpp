#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "son/error.hpp"
#include "son/radio.hpp"
#include "son/random.hpp"

using namespace son;

namespace {

bool rel_close(double a, double b, double tol = 1e-9) {
  return std::fabs(a - b) <= tol * std::max(1.0, std::max(std::fabs(a), std::fabs(b)));
}

RsrpMatrix two_cell(double p0, double p1) { return {1, 2, {p0, p1}}; }

CioMatrix cio2(double o10) { return CioMatrix(2, {0.0, -o10, o10, 0.0}); }

}  // namespace

TEST_CASE("sinr worked examples") {
  const double v = -300.0;  // negligible noise
  const std::vector<double> a{-80, -90};
  CHECK(rel_close(sinr_db(a, 0, v), oracle::sinr_db(a, 0, v)));
  CHECK(std::fabs(sinr_db(a, 0, v) - 10.0) < 1e-9);

  const std::vector<double> b{-80};
  CHECK(rel_close(sinr_db(b, 0, -100), 20.0));

  const std::vector<double> c{-70, -70, -70, -70};
  CHECK(rel_close(sinr_db(c, 2, v), 10.0 * std::log10(1.0 / 3.0)));
  CHECK(std::fabs(sinr_db(c, 2, v) - (-4.77)) < 0.01);
}

TEST_CASE("sinr agrees with the direct formula on random vectors") {
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> p(1 + uniform_index(rng, 6));
    for (double& x : p) x = uniform(rng, -130, -50);
    const auto s = uniform_index(rng, p.size());
    CHECK(rel_close(sinr_db(p, s, -110), oracle::sinr_db(p, s, -110)));
  }
}

TEST_CASE("standard CQI table shape") {
  const auto t = CqiTable::standard();
  REQUIRE(t.levels().size() == 15);
  CHECK(t.levels().front().sinr_threshold_db == -6.0);
  CHECK(t.levels().back().sinr_threshold_db == 22.0);
  CHECK(t.levels().front().rate_mbps_per_prb == doctest::Approx(0.15).epsilon(0.02));
  CHECK(t.levels().back().rate_mbps_per_prb == doctest::Approx(5.55).epsilon(0.01));
  for (std::size_t i = 1; i < 15; ++i) {
    CHECK(t.levels()[i].sinr_threshold_db > t.levels()[i - 1].sinr_threshold_db);
    CHECK(t.levels()[i].rate_mbps_per_prb >= t.levels()[i - 1].rate_mbps_per_prb);
  }
  CHECK_THROWS_AS(CqiTable({{0, 1}, {0, 2}}), ConfigError);
  CHECK_THROWS_AS(CqiTable({{0, 2}, {1, 1}}), ConfigError);
}

TEST_CASE("rate lookup: floor, inclusive thresholds, monotone step") {
  const auto t = CqiTable::standard();
  CHECK(rate_from_sinr(-6.0001, t) == 0.0);
  CHECK(rate_from_sinr(-50, t) == 0.0);
  for (const auto& lv : t.levels()) {
    CHECK(rate_from_sinr(lv.sinr_threshold_db, t) == lv.rate_mbps_per_prb);
  }
  CHECK(rate_from_sinr(100, t) == t.levels().back().rate_mbps_per_prb);
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    double s1 = uniform(rng, -15, 30), s2 = uniform(rng, -15, 30);
    if (s1 > s2) std::swap(s1, s2);
    CHECK(rate_from_sinr(s1, t) <= rate_from_sinr(s2, t));
    CHECK(rate_from_sinr(s1, t) == oracle::rate(s1, t));
  }
}

TEST_CASE("CQI table loads from CSV") {
  const auto path = std::filesystem::temp_directory_path() / "son_test_cqi.csv";
  std::ofstream(path) << "sinr_threshold_db,rate_mbps_per_prb\n# two levels\n-2,0.5\n\n4,1.5\n";
  const auto t = CqiTable::load(path);
  REQUIRE(t.levels().size() == 2);
  CHECK(rate_from_sinr(0.0, t) == 0.5);
  CHECK(rate_from_sinr(4.0, t) == 1.5);
  std::ofstream(path) << "sinr_threshold_db,rate_mbps_per_prb\n1,abc\n";
  CHECK_THROWS(CqiTable::load(path));
  std::filesystem::remove(path);
}

TEST_CASE("user load l = min(C / r, l_limit)") {
  RadioConfig cfg;
  CHECK(user_load_prb(0.5, cfg) == 2.0);
  CHECK(user_load_prb(0.1, cfg) == 6.0);
  CHECK(user_load_prb(0.0, cfg) == 6.0);
  CHECK(user_load_prb(5.5547, cfg) == doctest::Approx(1.0 / 5.5547));
}

TEST_CASE("A3 inequality examples") {
  const AssociationMatrix on0(2, {0});
  // p_n' = -80, p_n = -85, O(n', n) = 3, H = 1: 5 > 4 hands over.
  CHECK(a3_handover(two_cell(-85, -80), on0, cio2(3), 1.0).serving(0) == 1);
  // O(n', n) = 5: 5 > 6 is false.
  CHECK(a3_handover(two_cell(-85, -80), on0, cio2(5), 1.0).serving(0) == 0);
  // Exactly on the boundary is not a trigger (strict inequality).
  CHECK(a3_handover(two_cell(-85, -80), on0, cio2(4), 1.0).serving(0) == 0);
}

TEST_CASE("A3 picks the largest margin, lowest index on ties") {
  const RsrpMatrix p{1, 4, {-90, -80, -78, -78}};
  const AssociationMatrix on0(4, {0});
  CHECK(a3_handover(p, on0, CioMatrix::zeros(4), 1.0).serving(0) == 2);
  std::vector<int> counts;
  const auto next = a3_handover(p, on0, CioMatrix::zeros(4), 1.0, &counts);
  CHECK(counts == std::vector<int>{1, 0, 0, 0});
  CHECK(next.serving(0) == 2);
}

TEST_CASE("A3 CIO sweep: raising O(n, n') eases leaving n and hinders entering it") {
  // Leaving n for n' needs p_n' - p_n > O(n', n) + H = -O(n, n') + H, so the
  // n -> n' count can only grow as O(n, n') rises, and n' -> n can only shrink.
  Rng rng(9);
  const std::size_t K = 400;
  RsrpMatrix p{K, 2, std::vector<double>(2 * K)};
  std::vector<int> serving(K);
  for (std::size_t k = 0; k < K; ++k) {
    p.dbm[2 * k] = uniform(rng, -100, -70);
    p.dbm[2 * k + 1] = p.dbm[2 * k] + uniform(rng, -15, 15);
    serving[k] = static_cast<int>(uniform_index(rng, 2));
  }
  const AssociationMatrix cur(2, serving);
  int prev_out = -1, prev_in = 1 << 30;
  for (double o01 = -12.0; o01 <= 12.0; o01 += 0.5) {
    std::vector<int> counts;
    a3_handover(p, cur, CioMatrix(2, {0.0, o01, -o01, 0.0}), 1.0, &counts);
    CHECK(counts[0] >= prev_out);
    CHECK(counts[1] <= prev_in);
    prev_out = counts[0];
    prev_in = counts[1];
  }
  CHECK(prev_out > 0);
}

TEST_CASE("A3 is idempotent with unchanged powers and CIOs") {
  // Holds when every CIO cycle sums to zero, O(i, j) = c_i - c_j; a cycle
  // sum above H can legitimately chain a second handover.
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t K = 60, N = 4;
    RsrpMatrix p{K, N, std::vector<double>(K * N)};
    for (double& x : p.dbm) x = uniform(rng, -110, -60);
    std::vector<int> serving(K);
    for (int& s : serving) s = static_cast<int>(uniform_index(rng, N));
    std::vector<double> c(N), upper;
    for (double& x : c) x = trial == 0 ? 0.0 : uniform(rng, -6, 6);
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t j = i + 1; j < N; ++j) upper.push_back(c[i] - c[j]);
    }
    const auto cio = CioMatrix::from_upper(N, upper);
    const auto once = a3_handover(p, AssociationMatrix(N, serving), cio, 1.0);
    std::vector<int> counts;
    const auto twice = a3_handover(p, once, cio, 1.0, &counts);
    CHECK(twice == once);
    CHECK(std::accumulate(counts.begin(), counts.end(), 0) == 0);
  }
}

TEST_CASE("CIO and association invariants") {
  CHECK_THROWS_AS(CioMatrix(2, {0.0, 3.0, 3.0, 0.0}), ConfigError);
  CHECK_THROWS_AS(CioMatrix(2, {0.0, 13.0, -13.0, 0.0}), ConfigError);
  CHECK_THROWS_AS(CioMatrix(2, {1.0, 0.0, 0.0, -1.0}), ConfigError);
  const std::vector<double> upper{1.5, -2.0, 12.0};
  const auto m = CioMatrix::from_upper(3, upper);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(m(i, i) == 0.0);
    for (std::size_t j = 0; j < 3; ++j) CHECK(m(i, j) == -m(j, i));
  }
  CHECK(m(0, 1) == 1.5);
  CHECK(m(1, 2) == 12.0);

  const std::vector<int> good{1, 0, 0, 1};  // N=2, K=2
  CHECK(AssociationMatrix::from_indicator(2, 2, good).serving_cells() == std::vector<int>{0, 1});
  const std::vector<int> doubled{1, 1, 1, 0};
  CHECK_THROWS_AS(AssociationMatrix::from_indicator(2, 2, doubled), ConfigError);
  const std::vector<int> orphan{0, 1, 0, 0};
  CHECK_THROWS_AS(AssociationMatrix::from_indicator(2, 2, orphan), ConfigError);
  CHECK_THROWS_AS(AssociationMatrix(2, {0, 2}), DimensionError);
}

TEST_CASE("scheduler: uncongested and zero cases") {
  CHECK(schedule_prbs(std::vector<double>{3, 3}, std::vector<double>{1, 2}, 100) == std::vector<double>{3, 3});
  CHECK(schedule_prbs(std::vector<double>{0, 0, 0}, std::vector<double>{1, 2, 3}, 100) ==
        std::vector<double>{0, 0, 0});
  CHECK(schedule_prbs(std::vector<double>{}, std::vector<double>{}, 100).empty());
}

TEST_CASE("scheduler: 20 users demanding 6 PRBs share 100 by rate rank") {
  std::vector<double> d(20, 6.0), r(20);
  Rng rng(4);
  for (double& x : r) x = uniform(rng, 0.1, 5.0);
  const auto alloc = schedule_prbs(d, r, 100);
  CHECK(std::accumulate(alloc.begin(), alloc.end(), 0.0) == 100.0);
  std::vector<std::size_t> order(20);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return r[a] > r[b]; });
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(alloc[order[i]] <= 6.0);
    CHECK(alloc[order[i]] == std::floor(alloc[order[i]]));
    if (i > 0) CHECK(alloc[order[i]] <= alloc[order[i - 1]]);
  }
}

TEST_CASE("scheduler matches the water-filling oracle up to whole-PRB rounding") {
  Rng rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t m = 1 + uniform_index(rng, 40);
    std::vector<double> d(m), r(m);
    for (std::size_t k = 0; k < m; ++k) {
      r[k] = uniform(rng, 0.0, 5.5);
      d[k] = uniform_index(rng, 5) == 0 ? 0.0 : std::min(1.0 / std::max(r[k], 1e-9), 6.0);
    }
    const double budget = static_cast<double>(10 + uniform_index(rng, 100));
    const auto got = schedule_prbs(d, r, budget);
    const auto want = oracle::water_fill(d, r, budget);
    const double total = std::accumulate(d.begin(), d.end(), 0.0);
    const double sum = std::accumulate(got.begin(), got.end(), 0.0);
    CHECK(sum <= budget + 1e-9);
    if (total > budget) CHECK(sum >= budget - 1.0 - 1e-9);
    for (std::size_t k = 0; k < m; ++k) {
      CHECK(got[k] >= 0.0);
      CHECK(got[k] <= d[k] + 1e-12);
      CHECK(std::fabs(got[k] - want[k]) < 1.0 + 1e-6);
      if (std::fabs(want[k] - d[k]) < 1e-9 && total <= budget) CHECK(got[k] == d[k]);
    }
  }
}

TEST_CASE("metrics: empty network, one user, edge flag") {
  RadioConfig cfg;
  const AssociationMatrix none(3, {});
  const auto e = snapshot_metrics(none, std::vector<double>{}, std::vector<double>{}, cfg);
  CHECK(e.cell_load_prb == std::vector<double>{0, 0, 0});
  CHECK(e.cell_throughput_mbps == std::vector<double>{0, 0, 0});

  const AssociationMatrix one(2, {1});
  const double l = user_load_prb(0.5, cfg);
  CHECK(l == 2.0);
  const auto m = snapshot_metrics(one, std::vector<double>{0.5}, std::vector<double>{l}, cfg);
  CHECK(m.cell_load_prb == std::vector<double>{0, 2});
  CHECK(m.cell_throughput_mbps == std::vector<double>{0, 1});
  CHECK_FALSE(m.edge_flags[0]);

  const auto edge = snapshot_metrics(one, std::vector<double>{0.2}, std::vector<double>{2.0}, cfg);
  CHECK(edge.edge_flags[0]);  // 0.4 Mbps < 550 kbps
}

TEST_CASE("evaluate_network: budget respected, uncongested throughput closed form") {
  Rng rng(8);
  RadioConfig cfg;
  cfg.noise_dbm = -110;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t K = 1 + uniform_index(rng, 120), N = 3;
    RsrpMatrix p{K, N, std::vector<double>(K * N)};
    for (double& x : p.dbm) x = uniform(rng, -120, -60);
    const auto assoc = strongest_cell_association(p);
    const auto snap = evaluate_network(p, assoc, cfg);
    for (std::size_t n = 0; n < N; ++n) {
      CHECK(snap.cell_load_prb[n] <= cfg.cell_prb_budget + 1e-9);
      double demand = 0.0, closed = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        if (assoc.serving(k) != static_cast<int>(n)) continue;
        const double r = oracle::rate(oracle::sinr_db({p.dbm.begin() + k * N, p.dbm.begin() + (k + 1) * N}, n, -110),
                                      cfg.cqi_table);
        CHECK(snap.rate_mbps_per_prb[k] == r);
        demand += r > 0 ? std::min(1.0 / r, 6.0) : 6.0;
        closed += std::min(cfg.cbr_mbps, r * 6.0);
      }
      CHECK(rel_close(snap.cell_demand_prb[n], demand));
      if (demand <= cfg.cell_prb_budget) CHECK(rel_close(snap.cell_throughput_mbps[n], closed));
    }
  }
}
