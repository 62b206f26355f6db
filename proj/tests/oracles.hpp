#pragma once

// Independent reference computations. Each one is written from the defining
// formula with its own loop structure, so agreement with the library means
// two separate derivations agree.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "son/env.hpp"
#include "son/nn.hpp"
#include "son/radio.hpp"
#include "son/random.hpp"
#include "son/static_opt.hpp"

namespace oracle {

inline double sinr_db(const std::vector<double>& dbm, std::size_t serving, double noise_dbm) {
  double interference_mw = std::pow(10.0, noise_dbm / 10.0);
  for (std::size_t n = 0; n < dbm.size(); ++n) {
    if (n != serving) interference_mw += std::pow(10.0, dbm[n] / 10.0);
  }
  return dbm[serving] - 10.0 * std::log10(interference_mw);
}

// Highest level whose threshold is <= sinr, scanning from the top.
inline double rate(double sinr_db, const son::CqiTable& table) {
  const auto& lv = table.levels();
  for (std::size_t i = lv.size(); i-- > 0;) {
    if (sinr_db >= lv[i].sinr_threshold_db) return lv[i].rate_mbps_per_prb;
  }
  return 0.0;
}

// Real-valued rank-weight water filling by bisection on the fill level mu:
// x_k = min(d_k, mu * w_k) with sum x_k = budget.
inline std::vector<double> water_fill(const std::vector<double>& demands, const std::vector<double>& rates,
                                      double budget) {
  const std::size_t m = demands.size();
  double total = 0.0;
  for (double d : demands) total += d;
  if (total <= budget) return demands;
  std::vector<double> w(m);
  for (std::size_t k = 0; k < m; ++k) {
    std::size_t better = 0;
    for (std::size_t j = 0; j < m; ++j) {
      if (rates[j] > rates[k] || (rates[j] == rates[k] && j < k)) ++better;
    }
    w[k] = static_cast<double>(m - better);
  }
  auto fill = [&](double mu) {
    double s = 0.0;
    for (std::size_t k = 0; k < m; ++k) s += std::min(demands[k], mu * w[k]);
    return s;
  };
  double lo = 0.0, hi = budget;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (fill(mid) < budget ? lo : hi) = mid;
  }
  std::vector<double> x(m);
  for (std::size_t k = 0; k < m; ++k) x[k] = std::min(demands[k], hi * w[k]);
  return x;
}

// Central finite differences of f(params) = sum_b <g_b, y_b>.
inline std::vector<double> fd_param_grad(son::nn::Mlp net, const std::vector<double>& inputs, std::size_t batch,
                                         const std::vector<double>& out_grad, double h) {
  auto objective = [&](const son::nn::Mlp& n) {
    const std::size_t in = n.spec().input_dim(), out = n.spec().output_dim();
    double s = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const auto y = n.forward(std::span<const double>(inputs).subspan(b * in, in));
      for (std::size_t j = 0; j < out; ++j) s += out_grad[b * out + j] * y[j];
    }
    return s;
  };
  std::vector<double> g(net.params().size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double keep = net.params()[i];
    net.params()[i] = keep + h;
    const double up = objective(net);
    net.params()[i] = keep - h;
    const double down = objective(net);
    net.params()[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline std::vector<double> fd_input_grad(const son::nn::Mlp& net, std::vector<double> inputs, std::size_t batch,
                                         const std::vector<double>& out_grad, double h) {
  const std::size_t in = net.spec().input_dim(), out = net.spec().output_dim();
  std::vector<double> g(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const std::size_t b = i / in;
    auto value = [&]() {
      const auto y = net.forward(std::span<const double>(inputs).subspan(b * in, in));
      double s = 0.0;
      for (std::size_t j = 0; j < out; ++j) s += out_grad[b * out + j] * y[j];
      return s;
    };
    const double keep = inputs[i];
    inputs[i] = keep + h;
    const double up = value();
    inputs[i] = keep - h;
    const double down = value();
    inputs[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  (void)batch;
  return g;
}

// Relative error used by the gradient checks: |a - b| / max(1, |a|, |b|)
// would hide large errors on tiny gradients, so the floor is 1e-6.
inline double rel_err(double a, double b) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-6});
}

// One randomized backward-vs-finite-difference case: random spec (sizes <= 16,
// 1-3 layers, either output activation), batch, inputs and output gradient.
// Returns the max relative error over parameter and input gradients.
inline double gradient_case(std::uint64_t seed) {
  son::Rng rng(seed);
  son::nn::MlpSpec spec;
  const std::size_t layers = 1 + son::uniform_index(rng, 3);
  for (std::size_t l = 0; l <= layers; ++l) spec.layer_sizes.push_back(1 + son::uniform_index(rng, 16));
  spec.hidden = son::nn::Activation::kRelu;
  spec.output = son::uniform_index(rng, 2) == 0 ? son::nn::Activation::kTanh : son::nn::Activation::kLinear;
  auto net = son::nn::Mlp::init(spec, rng);
  for (double& p : net.params()) p += 0.1 * son::uniform(rng, -1, 1);  // nonzero biases
  const std::size_t batch = 1 + son::uniform_index(rng, 4);
  std::vector<double> x(batch * spec.input_dim()), g(batch * spec.output_dim());
  for (double& v : x) v = son::uniform(rng, -1, 1);
  for (double& v : g) v = son::uniform(rng, -1, 1);

  son::nn::ForwardCache cache;
  net.forward_batch(x, batch, cache);
  std::vector<double> pg(net.params().size(), 0.0);
  const auto ig = net.backward(cache, g, pg);
  const auto fp = fd_param_grad(net, x, batch, g, 1e-5);
  const auto fi = fd_input_grad(net, x, batch, g, 1e-5);
  double worst = 0.0;
  for (std::size_t i = 0; i < pg.size(); ++i) worst = std::max(worst, rel_err(pg[i], fp[i]));
  for (std::size_t i = 0; i < ig.size(); ++i) worst = std::max(worst, rel_err(ig[i], fi[i]));
  return worst;
}

// Objective R/scale + lambda * (-max L / budget) of one uncongested candidate,
// from l_k = min(C / r_k, l_limit) and throughput r_k * l_k. Accumulation order
// is per cell over users in index order, then over cells, matching the
// definition of the cell sums.
inline double static_objective(const std::vector<double>& rate, const std::vector<int>& serving, std::size_t N,
                               const son::RadioConfig& radio, double lambda) {
  std::vector<double> load(N, 0.0), thr(N, 0.0);
  for (std::size_t k = 0; k < serving.size(); ++k) {
    const auto n = static_cast<std::size_t>(serving[k]);
    const double r = rate[k * N + n];
    const double l = r > 0.0 ? std::min(radio.cbr_mbps / r, static_cast<double>(radio.max_user_prb))
                             : static_cast<double>(radio.max_user_prb);
    load[n] += l;
    thr[n] += r * l;
  }
  double total = 0.0, peak = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    total += thr[n];
    peak = std::max(peak, load[n]);
  }
  return total / 100.0 + lambda * (-peak / static_cast<double>(radio.cell_prb_budget));
}

struct EnumResult {
  double best = -std::numeric_limits<double>::infinity();
  double min_peak = std::numeric_limits<double>::infinity();
  std::size_t candidates = 0;
};

// Depth-first over users from the last one down, combos in reverse order.
inline EnumResult enumerate(const son::StaticInstance& inst, double lambda) {
  const std::size_t K = inst.num_users(), N = inst.num_cells();
  EnumResult res;
  std::vector<double> rate(K * N), rsrp(K * N);
  std::vector<int> serving(K, 0);
  for (std::size_t c = inst.num_combos(); c-- > 0;) {
    inst.tables(c, rate, rsrp);
    std::function<void(std::size_t)> go = [&](std::size_t depth) {
      if (depth == K) {
        ++res.candidates;
        res.best = std::max(res.best, static_objective(rate, serving, N, inst.radio(), lambda));
        std::vector<double> load(N, 0.0);
        for (std::size_t k = 0; k < K; ++k) {
          const double r = rate[k * N + static_cast<std::size_t>(serving[k])];
          load[static_cast<std::size_t>(serving[k])] +=
              r > 0.0 ? std::min(inst.radio().cbr_mbps / r, static_cast<double>(inst.radio().max_user_prb))
                      : static_cast<double>(inst.radio().max_user_prb);
        }
        res.min_peak = std::min(res.min_peak, *std::max_element(load.begin(), load.end()));
        return;
      }
      const std::size_t k = K - 1 - depth;
      for (std::size_t n = N; n-- > 0;) {
        serving[k] = static_cast<int>(n);
        go(depth + 1);
      }
    };
    go(0);
  }
  return res;
}

// Reward vector recomputed from a tick log.
inline std::vector<double> reward_from_ticks(const std::vector<son::TickRecord>& ticks, int dims, double scale,
                                             double budget) {
  const std::size_t T = ticks.size(), N = ticks.front().cell_load_prb.size();
  double thr = 0.0;
  for (const auto& t : ticks) {
    for (double r : t.cell_throughput_mbps) thr += r;
  }
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < N; ++n) {
    double s = 0.0;
    for (const auto& t : ticks) s += t.cell_load_prb[n];
    peak = std::max(peak, s / static_cast<double>(T));
  }
  std::vector<double> r{thr / static_cast<double>(T) / scale, -peak / budget};
  if (dims == 3) {
    double mean = 0.0;
    for (const auto& t : ticks) {
      for (double l : t.cell_load_prb) mean += l / budget;
    }
    mean /= static_cast<double>(T * N);
    double var = 0.0;
    for (const auto& t : ticks) {
      for (double l : t.cell_load_prb) var += (l / budget - mean) * (l / budget - mean);
    }
    r.push_back(-std::sqrt(var / static_cast<double>(T * N)));
  }
  return r;
}

}  // namespace oracle
