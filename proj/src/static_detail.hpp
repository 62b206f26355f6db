#pragma once

// Assignment internals shared by the solvers and the sweep kernels.

#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "son/random.hpp"
#include "son/static_opt.hpp"

namespace son::detail {

// Per BS, users sorted by descending rate (lower index first on ties).
std::vector<std::vector<int>> rate_orders(std::span<const double> rate, std::size_t num_users, std::size_t num_cells);

// Strongest BS per user, lowest index on ties.
std::vector<int> strongest_cells(std::span<const double> rsrp, std::size_t num_users, std::size_t num_cells);

// Fair-lambda pass with precomputed orders. w >= 1 never draws the coin;
// w <= 0 skips the coin and always picks a random user.
std::vector<int> fair_pass(const std::vector<std::vector<int>>& orders, const std::vector<int>& strongest,
                           std::size_t num_users, double w, Rng& rng, FairStats* stats);

// Stream for combo c of a sweep seeded with `seed`.
inline Rng combo_rng(std::uint64_t seed, std::size_t c) {
  return Rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(c) + 0x5eedULL)));
}

}  // namespace son::detail
