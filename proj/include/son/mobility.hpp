#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "son/geometry.hpp"
#include "son/random.hpp"

namespace son {

enum class MobilityModel { kRandomWaypoint, kSlaw };

struct MobilityConfig {
  MobilityModel model = MobilityModel::kRandomWaypoint;
  int num_users = 80;
  Area area;
  double tick_seconds = 900.0;  // 15 model-minutes
  double speed_min_mps = 0.5;
  double speed_max_mps = 1.5;
  int pause_min_ticks = 0;
  int pause_max_ticks = 4;
  int slaw_num_clusters = 5;
  double slaw_cluster_radius_m = 40.0;
  double slaw_switch_prob = 0.05;
  std::uint64_t rng_seed = 1;

  void validate() const;
};

struct UserMotion {
  Point position;
  Point waypoint;
  double speed_mps = 0.0;
  int pause_ticks = 0;
  int cluster = 0;         // SLAW: cluster the user currently belongs to
  bool travelling = false; // SLAW: on an inter-cluster trip
};

struct MobilityState {
  std::vector<UserMotion> users;
  std::vector<Point> cluster_centers;  // SLAW only
};

// Draws initial positions (and SLAW clusters) from `rng`.
MobilityState init_mobility(const MobilityConfig& cfg, Rng& rng);

// Random waypoint: pause, else move toward the waypoint at the drawn speed;
// on arrival draw a pause, a new uniform waypoint and a new speed.
void step_rwp(MobilityState& state, const MobilityConfig& cfg, Rng& rng);

// Cluster-confined walk: RWP inside the current cluster disk; each tick a
// resting user retargets a different cluster with probability
// slaw_switch_prob and travels there.
void step_slaw(MobilityState& state, const MobilityConfig& cfg, Rng& rng);

// Owns the state and the rng substream of one trace.
class MobilitySim {
 public:
  explicit MobilitySim(const MobilityConfig& cfg);

  void step();
  std::vector<Point> positions() const;
  const MobilityState& state() const { return state_; }
  const MobilityConfig& config() const { return cfg_; }

 private:
  MobilityConfig cfg_;
  Rng rng_;
  MobilityState state_;
};

struct UserTrace {
  std::vector<std::vector<Point>> ticks;  // positions per tick, K each
};

UserTrace generate_trace(const MobilityConfig& cfg, int num_ticks);

// CSV "tick,user,x,y" with a header line; positions written with 17
// significant digits so import restores them exactly.
void save_trace_csv(const UserTrace& trace, const std::filesystem::path& path);
UserTrace load_trace_csv(const std::filesystem::path& path);

}  // namespace son
