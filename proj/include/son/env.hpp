#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "son/mobility.hpp"
#include "son/radio.hpp"
#include "son/rsrp_map.hpp"

namespace son {

struct EnvConfig {
  int action_period_ticks = 8;  // T: 2 h at 15 min per tick
  int reward_dims = 2;          // 2: [throughput, -peak load]; 3 adds -load std
  RadioConfig radio;
  MobilityConfig mobility;
  // Reward entry 1 is network throughput divided by this; loads are always
  // divided by the cell PRB budget.
  double throughput_scale_mbps = 100.0;

  void validate() const;
};

// s(t) = [l(t), e(t)]: loads normalized by the PRB budget, edge-user ratios.
struct State {
  std::vector<double> cell_loads;
  std::vector<double> edge_ratios;

  std::vector<double> flat() const;
  friend bool operator==(const State&, const State&) = default;
};

// Raw actor output: N tilt entries then the CIO upper triangle, all in [-1, 1].
struct Action {
  std::vector<double> tilt_raw;
  std::vector<double> cio_raw;

  static Action from_flat(std::span<const double> flat, std::size_t num_cells);
  static Action zeros(std::size_t num_cells);
  std::vector<double> flat() const;
};

using RewardVector = std::vector<double>;

struct DecodedAction {
  std::vector<int> tilt;
  CioMatrix cio;
};

// Tilt index round((raw + 1) / 2 * (M - 1)); CIO raw * 12 dB completed
// antisymmetrically. Inputs are clamped to [-1, 1] first.
DecodedAction decode_action(const Action& action, std::size_t num_tilts, double cio_max_db = kCioMaxDb);

// Fixed affine map x -> 2x - 1 per entry; both features live in [0, 1].
std::vector<double> scale_state(const State& raw);

struct TickRecord {
  long tick = 0;
  std::vector<int> tilt;
  std::vector<double> cio;  // row-major N x N in effect during the tick
  std::vector<double> cell_load_prb;
  std::vector<double> cell_throughput_mbps;
  std::vector<int> handovers;   // per source cell
  std::vector<int> edge_users;  // per cell
  std::vector<int> users;       // per cell
};

// Tick-level network: mobility, RSRP lookup, association and scheduling.
class NetworkSim {
 public:
  NetworkSim(std::shared_ptr<const RsrpTensor> tensor, RadioConfig radio, MobilityConfig mobility);

  // Fresh mobility trace from `mobility_seed`; tilt 0 everywhere, zero CIOs
  // and strongest-RSRP association.
  void reset(std::uint64_t mobility_seed);

  // Moves users one tick, applies A3 handover under (tilt, cio), schedules.
  TickRecord tick_a3(const std::vector<int>& tilt, const CioMatrix& cio);

  // Moves users one tick without re-associating.
  void advance_mobility();
  // Serves the current positions with an externally chosen (tilt, association).
  TickRecord apply_direct(const std::vector<int>& tilt, const AssociationMatrix& association);

  RsrpMatrix rsrp_at(const std::vector<int>& tilt) const;
  // Per-user RSRP for every tilt: K x M x N, user-major.
  std::vector<double> rsrp_all_tilts() const;

  const NetworkSnapshot& snapshot() const;
  const RsrpTensor& tensor() const { return *tensor_; }
  const RadioConfig& radio() const { return radio_; }
  std::size_t num_cells() const { return tensor_->num_cells(); }
  std::size_t num_users() const { return static_cast<std::size_t>(mobility_cfg_.num_users); }
  long tick() const { return tick_; }
  std::vector<Point> positions() const { return mobility_->positions(); }
  const std::vector<int>& tilt() const { return tilt_; }
  const CioMatrix& cio() const { return cio_; }

 private:
  TickRecord record(const std::vector<int>& handovers) const;
  void locate_users();

  std::shared_ptr<const RsrpTensor> tensor_;
  RadioConfig radio_;
  MobilityConfig mobility_cfg_;
  std::unique_ptr<MobilitySim> mobility_;
  std::vector<std::size_t> anchor_of_user_;
  std::vector<int> tilt_;
  CioMatrix cio_;
  std::unique_ptr<NetworkSnapshot> snapshot_;
  long tick_ = 0;
};

State state_from_snapshot(const NetworkSnapshot& snap, const RadioConfig& radio);

struct StepInfo {
  DecodedAction action;
  std::vector<TickRecord> ticks;
};

struct StepResult {
  State next_state;
  RewardVector reward;
  StepInfo info;
};

// Reward vector over one action period from its tick log:
// [mean sum_n R_n / scale, -max_n mean_t L_n / budget, -std_{n,t} L_n / budget].
RewardVector period_reward(const std::vector<TickRecord>& ticks, int reward_dims, double throughput_scale_mbps,
                           double prb_budget);

class Env {
 public:
  Env(EnvConfig cfg, std::shared_ptr<const RsrpTensor> tensor);

  State reset(std::uint64_t seed);
  StepResult step(const Action& action);

  std::size_t num_cells() const { return net_.num_cells(); }
  std::size_t num_users() const { return net_.num_users(); }
  std::size_t state_dim() const { return 2 * num_cells(); }
  std::size_t action_dim() const { return num_cells() + num_cells() * (num_cells() - 1) / 2; }
  const EnvConfig& config() const { return cfg_; }
  const NetworkSim& network() const { return net_; }
  bool initialized() const { return initialized_; }

 private:
  EnvConfig cfg_;
  NetworkSim net_;
  bool initialized_ = false;
};

}  // namespace son
