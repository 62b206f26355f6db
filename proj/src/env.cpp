#include "son/env.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "son/error.hpp"

namespace son {

void EnvConfig::validate() const {
  if (action_period_ticks < 1) throw ConfigError("action_period_ticks must be >= 1");
  if (reward_dims != 2 && reward_dims != 3) throw ConfigError("reward_dims must be 2 or 3");
  if (!(throughput_scale_mbps > 0.0)) throw ConfigError("throughput_scale_mbps must be > 0");
  radio.validate();
  mobility.validate();
}

std::vector<double> State::flat() const {
  std::vector<double> v = cell_loads;
  v.insert(v.end(), edge_ratios.begin(), edge_ratios.end());
  return v;
}

Action Action::from_flat(std::span<const double> flat, std::size_t num_cells) {
  const std::size_t pairs = num_cells * (num_cells - 1) / 2;
  if (flat.size() != num_cells + pairs) {
    throw DimensionError("action has " + std::to_string(flat.size()) + " entries, expected " +
                         std::to_string(num_cells + pairs));
  }
  Action a;
  a.tilt_raw.assign(flat.begin(), flat.begin() + static_cast<long>(num_cells));
  a.cio_raw.assign(flat.begin() + static_cast<long>(num_cells), flat.end());
  return a;
}

Action Action::zeros(std::size_t num_cells) {
  Action a;
  a.tilt_raw.assign(num_cells, 0.0);
  a.cio_raw.assign(num_cells * (num_cells - 1) / 2, 0.0);
  return a;
}

std::vector<double> Action::flat() const {
  std::vector<double> v = tilt_raw;
  v.insert(v.end(), cio_raw.begin(), cio_raw.end());
  return v;
}

DecodedAction decode_action(const Action& action, std::size_t num_tilts, double cio_max_db) {
  const std::size_t n = action.tilt_raw.size();
  if (action.cio_raw.size() != n * (n - 1) / 2) throw DimensionError("action CIO part must hold N(N-1)/2 entries");
  std::vector<int> tilt(n);
  const double top = static_cast<double>(num_tilts - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double raw = std::clamp(action.tilt_raw[i], -1.0, 1.0);
    tilt[i] = static_cast<int>(std::clamp(std::round((raw + 1.0) / 2.0 * top), 0.0, top));
  }
  std::vector<double> upper(action.cio_raw.size());
  for (std::size_t i = 0; i < upper.size(); ++i) upper[i] = std::clamp(action.cio_raw[i], -1.0, 1.0) * cio_max_db;
  return {std::move(tilt), CioMatrix::from_upper(n, upper)};
}

std::vector<double> scale_state(const State& raw) {
  std::vector<double> v;
  v.reserve(raw.cell_loads.size() + raw.edge_ratios.size());
  for (double x : raw.cell_loads) v.push_back(2.0 * x - 1.0);
  for (double x : raw.edge_ratios) v.push_back(2.0 * x - 1.0);
  return v;
}

NetworkSim::NetworkSim(std::shared_ptr<const RsrpTensor> tensor, RadioConfig radio, MobilityConfig mobility)
    : tensor_(std::move(tensor)),
      radio_(std::move(radio)),
      mobility_cfg_(std::move(mobility)),
      cio_(CioMatrix::zeros(tensor_ ? tensor_->num_cells() : 0)) {
  if (!tensor_) throw ConfigError("network simulator needs an RSRP tensor");
  radio_.validate();
  mobility_cfg_.validate();
}

void NetworkSim::locate_users() {
  const auto pos = mobility_->positions();
  anchor_of_user_.resize(pos.size());
  for (std::size_t k = 0; k < pos.size(); ++k) anchor_of_user_[k] = tensor_->nearest_anchor(pos[k]);
}

RsrpMatrix NetworkSim::rsrp_at(const std::vector<int>& tilt) const {
  if (!mobility_) throw StateError("network simulator used before reset");
  RsrpMatrix m{num_users(), num_cells(), std::vector<double>(num_users() * num_cells())};
  for (std::size_t k = 0; k < m.num_users; ++k) {
    query_rsrp(*tensor_, anchor_of_user_[k], tilt, std::span<double>(m.dbm.data() + k * m.num_cells, m.num_cells));
  }
  return m;
}

std::vector<double> NetworkSim::rsrp_all_tilts() const {
  if (!mobility_) throw StateError("network simulator used before reset");
  const std::size_t M = tensor_->num_tilts();
  const std::size_t N = num_cells();
  std::vector<double> out(num_users() * M * N);
  for (std::size_t k = 0; k < num_users(); ++k) {
    const auto a = anchor_of_user_[k];
    for (std::size_t m = 0; m < M; ++m) {
      for (std::size_t n = 0; n < N; ++n) out[(k * M + m) * N + n] = tensor_->at(a, m, n);
    }
  }
  return out;
}

void NetworkSim::reset(std::uint64_t mobility_seed) {
  MobilityConfig cfg = mobility_cfg_;
  cfg.rng_seed = mobility_seed;
  mobility_ = std::make_unique<MobilitySim>(cfg);
  tick_ = 0;
  tilt_.assign(num_cells(), 0);
  cio_ = CioMatrix::zeros(num_cells());
  locate_users();
  auto rsrp = rsrp_at(tilt_);
  auto assoc = strongest_cell_association(rsrp);
  snapshot_ = std::make_unique<NetworkSnapshot>(evaluate_network(std::move(rsrp), std::move(assoc), radio_));
}

const NetworkSnapshot& NetworkSim::snapshot() const {
  if (!snapshot_) throw StateError("network simulator used before reset");
  return *snapshot_;
}

TickRecord NetworkSim::record(const std::vector<int>& handovers) const {
  const auto& s = *snapshot_;
  TickRecord r;
  r.tick = tick_;
  r.tilt = tilt_;
  r.cio = cio_.values();
  r.cell_load_prb = s.cell_load_prb;
  r.cell_throughput_mbps = s.cell_throughput_mbps;
  r.handovers = handovers;
  r.edge_users.assign(num_cells(), 0);
  r.users.assign(num_cells(), 0);
  for (std::size_t k = 0; k < num_users(); ++k) {
    const auto n = static_cast<std::size_t>(s.association.serving(k));
    ++r.users[n];
    if (s.edge_flags[k]) ++r.edge_users[n];
  }
  return r;
}

TickRecord NetworkSim::tick_a3(const std::vector<int>& tilt, const CioMatrix& cio) {
  if (!mobility_) throw StateError("network simulator used before reset");
  if (tilt.size() != num_cells() || cio.size() != num_cells()) throw DimensionError("tick_a3: control sized for a different N");
  tilt_ = tilt;
  cio_ = cio;
  mobility_->step();
  ++tick_;
  locate_users();
  auto rsrp = rsrp_at(tilt_);
  std::vector<int> handovers;
  auto assoc = a3_handover(rsrp, snapshot_->association, cio_, radio_.hysteresis_db, &handovers);
  *snapshot_ = evaluate_network(std::move(rsrp), std::move(assoc), radio_);
  return record(handovers);
}

void NetworkSim::advance_mobility() {
  if (!mobility_) throw StateError("network simulator used before reset");
  mobility_->step();
  ++tick_;
  locate_users();
}

TickRecord NetworkSim::apply_direct(const std::vector<int>& tilt, const AssociationMatrix& association) {
  if (!mobility_) throw StateError("network simulator used before reset");
  if (tilt.size() != num_cells() || association.num_cells() != num_cells() || association.num_users() != num_users()) {
    throw DimensionError("apply_direct: control sized for a different network");
  }
  std::vector<int> handovers(num_cells(), 0);
  for (std::size_t k = 0; k < num_users(); ++k) {
    const int before = snapshot_->association.serving(k);
    if (before != association.serving(k)) ++handovers[static_cast<std::size_t>(before)];
  }
  tilt_ = tilt;
  cio_ = CioMatrix::zeros(num_cells());
  *snapshot_ = evaluate_network(rsrp_at(tilt_), association, radio_);
  return record(handovers);
}

State state_from_snapshot(const NetworkSnapshot& snap, const RadioConfig& radio) {
  const std::size_t N = snap.association.num_cells();
  State s;
  s.cell_loads.resize(N);
  s.edge_ratios.assign(N, 0.0);
  std::vector<int> users(N, 0), edges(N, 0);
  for (std::size_t k = 0; k < snap.association.num_users(); ++k) {
    const auto n = static_cast<std::size_t>(snap.association.serving(k));
    ++users[n];
    if (snap.edge_flags[k]) ++edges[n];
  }
  for (std::size_t n = 0; n < N; ++n) {
    s.cell_loads[n] = snap.cell_load_prb[n] / static_cast<double>(radio.cell_prb_budget);
    if (users[n] > 0) s.edge_ratios[n] = static_cast<double>(edges[n]) / static_cast<double>(users[n]);
  }
  return s;
}

RewardVector period_reward(const std::vector<TickRecord>& ticks, int reward_dims, double throughput_scale_mbps,
                           double prb_budget) {
  if (ticks.empty()) throw StateError("period_reward needs at least one tick");
  const std::size_t N = ticks.front().cell_load_prb.size();
  const double T = static_cast<double>(ticks.size());
  double throughput = 0.0;
  std::vector<double> mean_load(N, 0.0);
  for (const auto& t : ticks) {
    for (std::size_t n = 0; n < N; ++n) {
      throughput += t.cell_throughput_mbps[n];
      mean_load[n] += t.cell_load_prb[n];
    }
  }
  double peak = 0.0;
  for (std::size_t n = 0; n < N; ++n) peak = std::max(peak, mean_load[n] / T);

  RewardVector r{throughput / T / throughput_scale_mbps, -peak / prb_budget};
  if (reward_dims == 3) {
    double mean = 0.0;
    for (const auto& t : ticks) {
      for (double l : t.cell_load_prb) mean += l / prb_budget;
    }
    const double count = T * static_cast<double>(N);
    mean /= count;
    double var = 0.0;
    for (const auto& t : ticks) {
      for (double l : t.cell_load_prb) var += (l / prb_budget - mean) * (l / prb_budget - mean);
    }
    r.push_back(-std::sqrt(var / count));
  }
  return r;
}

Env::Env(EnvConfig cfg, std::shared_ptr<const RsrpTensor> tensor)
    : cfg_(std::move(cfg)), net_(std::move(tensor), cfg_.radio, cfg_.mobility) {
  cfg_.validate();
}

State Env::reset(std::uint64_t seed) {
  net_.reset(seed);
  initialized_ = true;
  return state_from_snapshot(net_.snapshot(), cfg_.radio);
}

StepResult Env::step(const Action& action) {
  if (!initialized_) throw StateError("environment stepped before reset");
  if (action.tilt_raw.size() != num_cells()) {
    throw DimensionError("action sized for N=" + std::to_string(action.tilt_raw.size()) + ", environment has N=" +
                         std::to_string(num_cells()));
  }
  StepResult out;
  out.info.action = decode_action(action, net_.tensor().num_tilts());
  out.info.ticks.reserve(static_cast<std::size_t>(cfg_.action_period_ticks));
  for (int t = 0; t < cfg_.action_period_ticks; ++t) {
    out.info.ticks.push_back(net_.tick_a3(out.info.action.tilt, out.info.action.cio));
  }
  out.reward = period_reward(out.info.ticks, cfg_.reward_dims, cfg_.throughput_scale_mbps,
                             static_cast<double>(cfg_.radio.cell_prb_budget));
  out.next_state = state_from_snapshot(net_.snapshot(), cfg_.radio);
  return out;
}

}  // namespace son
