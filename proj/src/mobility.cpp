#include "son/mobility.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "son/error.hpp"

namespace son {

namespace {

Point uniform_point(const Area& area, Rng& rng) {
  const double x = uniform(rng, 0.0, area.width);
  const double y = uniform(rng, 0.0, area.height);
  return {x, y};
}

// Uniform point in the disk, restricted to the area by rejection.
Point point_in_disk(Point c, double radius, const Area& area, Rng& rng) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double r = radius * std::sqrt(uniform01(rng));
    const double t = 6.283185307179586 * uniform01(rng);
    const Point p{c.x + r * std::cos(t), c.y + r * std::sin(t)};
    if (area.contains(p)) return p;
  }
  return area.clamp(c);
}

int draw_pause(const MobilityConfig& cfg, Rng& rng) {
  const auto span = static_cast<std::uint64_t>(cfg.pause_max_ticks - cfg.pause_min_ticks + 1);
  return cfg.pause_min_ticks + static_cast<int>(uniform_index(rng, span));
}

double draw_speed(const MobilityConfig& cfg, Rng& rng) { return uniform(rng, cfg.speed_min_mps, cfg.speed_max_mps); }

// Moves toward the waypoint; returns true on arrival.
bool advance(UserMotion& u, const MobilityConfig& cfg) {
  const double dx = u.waypoint.x - u.position.x;
  const double dy = u.waypoint.y - u.position.y;
  const double dist = std::sqrt(dx * dx + dy * dy);
  const double reach = u.speed_mps * cfg.tick_seconds;
  if (dist <= reach) {
    u.position = u.waypoint;
    return true;
  }
  u.position = cfg.area.clamp({u.position.x + dx / dist * reach, u.position.y + dy / dist * reach});
  return false;
}

}  // namespace

void MobilityConfig::validate() const {
  if (num_users <= 0) throw ConfigError("num_users must be > 0");
  if (!(area.width > 0.0) || !(area.height > 0.0)) throw ConfigError("mobility area must be positive");
  if (!(tick_seconds > 0.0)) throw ConfigError("tick_seconds must be > 0");
  if (!(speed_min_mps >= 0.0) || !(speed_max_mps >= speed_min_mps)) {
    throw ConfigError("speed range must be non-negative and ordered");
  }
  if (pause_min_ticks < 0 || pause_max_ticks < pause_min_ticks) {
    throw ConfigError("pause range must be non-negative and ordered");
  }
  if (model == MobilityModel::kSlaw) {
    if (slaw_num_clusters <= 0) throw ConfigError("slaw_num_clusters must be > 0");
    if (!(slaw_cluster_radius_m > 0.0)) throw ConfigError("slaw_cluster_radius_m must be > 0");
    if (!(slaw_switch_prob >= 0.0 && slaw_switch_prob <= 1.0)) {
      throw ConfigError("slaw_switch_prob must lie in [0, 1]");
    }
  }
}

MobilityState init_mobility(const MobilityConfig& cfg, Rng& rng) {
  cfg.validate();
  MobilityState s;
  s.users.resize(static_cast<std::size_t>(cfg.num_users));
  if (cfg.model == MobilityModel::kRandomWaypoint) {
    for (auto& u : s.users) {
      u.position = uniform_point(cfg.area, rng);
      u.waypoint = uniform_point(cfg.area, rng);
      u.speed_mps = draw_speed(cfg, rng);
    }
    return s;
  }
  const double rx = std::min(cfg.slaw_cluster_radius_m, 0.5 * cfg.area.width);
  const double ry = std::min(cfg.slaw_cluster_radius_m, 0.5 * cfg.area.height);
  for (int c = 0; c < cfg.slaw_num_clusters; ++c) {
    s.cluster_centers.push_back({uniform(rng, rx, cfg.area.width - rx), uniform(rng, ry, cfg.area.height - ry)});
  }
  for (auto& u : s.users) {
    u.cluster = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(cfg.slaw_num_clusters)));
    const Point c = s.cluster_centers[static_cast<std::size_t>(u.cluster)];
    u.position = point_in_disk(c, cfg.slaw_cluster_radius_m, cfg.area, rng);
    u.waypoint = point_in_disk(c, cfg.slaw_cluster_radius_m, cfg.area, rng);
    u.speed_mps = draw_speed(cfg, rng);
  }
  return s;
}

void step_rwp(MobilityState& state, const MobilityConfig& cfg, Rng& rng) {
  for (auto& u : state.users) {
    if (u.pause_ticks > 0) {
      --u.pause_ticks;
      continue;
    }
    if (advance(u, cfg)) {
      u.pause_ticks = draw_pause(cfg, rng);
      u.waypoint = uniform_point(cfg.area, rng);
      u.speed_mps = draw_speed(cfg, rng);
    }
  }
}

void step_slaw(MobilityState& state, const MobilityConfig& cfg, Rng& rng) {
  const auto n_clusters = static_cast<std::uint64_t>(state.cluster_centers.size());
  for (auto& u : state.users) {
    if (!u.travelling && n_clusters > 1) {
      bool retarget = cfg.slaw_switch_prob >= 1.0;
      if (cfg.slaw_switch_prob > 0.0 && cfg.slaw_switch_prob < 1.0) retarget = uniform01(rng) < cfg.slaw_switch_prob;
      if (retarget) {
        auto next = static_cast<int>(uniform_index(rng, n_clusters - 1));
        if (next >= u.cluster) ++next;
        u.cluster = next;
        u.waypoint = point_in_disk(state.cluster_centers[static_cast<std::size_t>(next)], cfg.slaw_cluster_radius_m,
                                   cfg.area, rng);
        u.speed_mps = draw_speed(cfg, rng);
        u.pause_ticks = 0;
        u.travelling = true;
      }
    }
    if (u.pause_ticks > 0) {
      --u.pause_ticks;
      continue;
    }
    if (advance(u, cfg)) {
      u.travelling = false;
      u.pause_ticks = draw_pause(cfg, rng);
      u.waypoint = point_in_disk(state.cluster_centers[static_cast<std::size_t>(u.cluster)], cfg.slaw_cluster_radius_m,
                                 cfg.area, rng);
      u.speed_mps = draw_speed(cfg, rng);
    }
  }
}

MobilitySim::MobilitySim(const MobilityConfig& cfg) : cfg_(cfg), rng_(make_rng(cfg.rng_seed, "mobility")) {
  state_ = init_mobility(cfg_, rng_);
}

void MobilitySim::step() {
  if (cfg_.model == MobilityModel::kRandomWaypoint) {
    step_rwp(state_, cfg_, rng_);
  } else {
    step_slaw(state_, cfg_, rng_);
  }
}

std::vector<Point> MobilitySim::positions() const {
  std::vector<Point> p;
  p.reserve(state_.users.size());
  for (const auto& u : state_.users) p.push_back(u.position);
  return p;
}

UserTrace generate_trace(const MobilityConfig& cfg, int num_ticks) {
  MobilitySim sim(cfg);
  UserTrace trace;
  trace.ticks.reserve(static_cast<std::size_t>(num_ticks));
  for (int t = 0; t < num_ticks; ++t) {
    trace.ticks.push_back(sim.positions());
    sim.step();
  }
  return trace;
}

void save_trace_csv(const UserTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  out << "tick,user,x,y\n";
  char buf[96];
  for (std::size_t t = 0; t < trace.ticks.size(); ++t) {
    for (std::size_t k = 0; k < trace.ticks[t].size(); ++k) {
      std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g\n", t, k, trace.ticks[t][k].x, trace.ticks[t][k].y);
      out << buf;
    }
  }
}

UserTrace load_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trace '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind("tick,user,x,y", 0) != 0) {
    throw ConfigError(path.string() + ": missing 'tick,user,x,y' header");
  }
  UserTrace trace;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::size_t t = 0, k = 0;
    double x = 0.0, y = 0.0;
    if (std::sscanf(line.c_str(), "%zu,%zu,%lf,%lf", &t, &k, &x, &y) != 4) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": malformed trace row");
    }
    if (t == trace.ticks.size()) trace.ticks.emplace_back();
    if (t + 1 != trace.ticks.size() || k != trace.ticks.back().size()) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": rows must be ordered by tick then user");
    }
    trace.ticks.back().push_back({x, y});
  }
  return trace;
}

}  // namespace son
