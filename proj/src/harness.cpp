#include "son/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "son/error.hpp"

namespace son {

using nlohmann::json;

namespace {

// Reads keys out of one JSON object and rejects anything it did not consume.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + " must be an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown key '" + path_ + "." + key + "'");
    }
  }
  Section(const Section&) = delete;
  Section& operator=(const Section&) = delete;

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <class T>
  void get(const std::string& key, T& out) {
    if (const json* v = find(key)) {
      try {
        out = v->get<T>();
      } catch (const json::exception&) {
        throw ConfigError(path_ + "." + key + " has the wrong type");
      }
    }
  }

  std::string path(const std::string& key) const { return path_ + "." + key; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::vector<Point> points_from(const json& j, const std::string& what) {
  if (!j.is_array()) throw ConfigError(what + " must be an array of [x, y] pairs");
  std::vector<Point> out;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
      throw ConfigError(what + " must be an array of [x, y] pairs");
    }
    out.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  return out;
}

const char* policy_name(PolicyKind p) {
  switch (p) {
    case PolicyKind::kPdpg:
      return "pdpg";
    case PolicyKind::kDdpg:
      return "ddpg";
    case PolicyKind::kStatic:
      break;
  }
  return "static";
}

const char* solver_name(StaticSolver s) {
  switch (s) {
    case StaticSolver::kExact:
      return "exact";
    case StaticSolver::kSmallLambda:
      return "small-lambda";
    case StaticSolver::kFairLambda:
      break;
  }
  return "fair-lambda";
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::uint64_t training_mobility_seed(const ExperimentConfig& cfg) { return substream_seed(cfg.seed, "mobility"); }
std::uint64_t eval_mobility_seed(const ExperimentConfig& cfg) { return substream_seed(cfg.seed, "eval-mobility"); }

EvalSample sample_from(const TickRecord& r, double budget, double scale) {
  EvalSample s;
  s.tick = r.tick;
  double thr = 0.0;
  for (std::size_t n = 0; n < r.cell_load_prb.size(); ++n) {
    thr += r.cell_throughput_mbps[n];
    s.cell_load_norm.push_back(r.cell_load_prb[n] / budget);
    s.peak_load_norm = std::max(s.peak_load_norm, r.cell_load_prb[n] / budget);
  }
  s.throughput_norm = thr / scale;
  s.cell_throughput_mbps = r.cell_throughput_mbps;
  s.handovers = r.handovers;
  s.edge_users = r.edge_users;
  return s;
}

PdpgConfig agent_config(const ExperimentConfig& cfg) {
  PdpgConfig a = cfg.agent;
  a.scalar_mode = cfg.policy == PolicyKind::kDdpg;
  return a;
}

std::vector<EvalSample> evaluate_agent(const ExperimentConfig& cfg, std::shared_ptr<const RsrpTensor> tensor,
                                       const Agent& agent) {
  Env env(cfg.env, std::move(tensor));
  auto state = scale_state(env.reset(eval_mobility_seed(cfg)));
  const long horizon = cfg.horizon_ticks();
  const long every = cfg.sample_every_ticks();
  const double budget = static_cast<double>(cfg.env.radio.cell_prb_budget);
  std::vector<EvalSample> samples;
  long ticks = 0;
  while (ticks < horizon) {
    auto result = env.step(Action::from_flat(agent.act(state), env.num_cells()));
    for (const auto& r : result.info.ticks) {
      if (++ticks > horizon) break;
      if (r.tick % every == 0) samples.push_back(sample_from(r, budget, cfg.env.throughput_scale_mbps));
    }
    state = scale_state(result.next_state);
  }
  return samples;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (bs_positions.empty()) throw ConfigError("scenario needs at least one BS");
  if (tilts_deg.empty()) throw ConfigError("tilt dictionary must not be empty");
  map.validate();
  env.validate();
  if (!(map.area == env.mobility.area)) throw ConfigError("map and mobility areas differ");
  if (train_periods < 0) throw ConfigError("train.periods must be >= 0");
  if (!(evaluation.horizon_days > 0.0)) throw ConfigError("evaluation.horizon_days must be > 0");
  if (evaluation.moving_average < 1) throw ConfigError("evaluation.moving_average must be >= 1");
  sample_every_ticks();
  if (policy != PolicyKind::kStatic) {
    agent_config(*this).validate(static_cast<std::size_t>(env.reward_dims));
  } else {
    if (static_policy.period_ticks < 1) throw ConfigError("static.period_ticks must be >= 1");
    if (static_policy.fair.repetitions < 1) throw ConfigError("static.repetitions must be >= 1");
    if (!(static_policy.lambda >= 0.0)) throw ConfigError("static.lambda must be >= 0");
  }
  const auto w = objective_weights();
  if (w.size() != 2) throw ConfigError("evaluation.objective_weights must have 2 entries");
}

long ExperimentConfig::sample_every_ticks() const {
  const double tick_min = env.mobility.tick_seconds / 60.0;
  const double ratio = evaluation.sample_interval_minutes / tick_min;
  const double r = std::round(ratio);
  if (!(r >= 1.0) || std::abs(ratio - r) > 1e-9) {
    throw ConfigError("evaluation.sample_interval_minutes must be a positive multiple of the " + fmt(tick_min) +
                      "-minute tick");
  }
  return static_cast<long>(r);
}

long ExperimentConfig::horizon_ticks() const {
  return static_cast<long>(std::ceil(evaluation.horizon_days * 86400.0 / env.mobility.tick_seconds - 1e-9));
}

std::vector<double> ExperimentConfig::objective_weights() const {
  if (!evaluation.objective_weights.empty()) return evaluation.objective_weights;
  if (agent.weights.size() == 2) return agent.weights;
  return {0.5, 0.5};
}

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(), e.byte);
  }
  ExperimentConfig cfg;
  Section top(root, "config");
  top.get("name", cfg.name);
  top.get("seed", cfg.seed);
  top.get("output_dir", cfg.output_dir);
  if (const json* p = top.find("policy")) {
    const auto s = p->is_string() ? p->get<std::string>() : std::string();
    if (s == "pdpg") {
      cfg.policy = PolicyKind::kPdpg;
    } else if (s == "ddpg") {
      cfg.policy = PolicyKind::kDdpg;
    } else if (s == "static") {
      cfg.policy = PolicyKind::kStatic;
    } else {
      throw ConfigError("policy must be one of pdpg, ddpg, static");
    }
  }

  if (const json* j = top.find("scenario")) {
    Section s(*j, "scenario");
    if (const json* a = s.find("area")) {
      const auto pts = points_from(json::array({*a}), "scenario.area");
      cfg.map.area = {pts[0].x, pts[0].y};
    }
    if (const json* b = s.find("bs_positions")) cfg.bs_positions = points_from(*b, "scenario.bs_positions");
    s.get("tilts_deg", cfg.tilts_deg);
  }
  if (const json* j = top.find("map")) {
    Section s(*j, "map");
    s.get("path", cfg.map_path);
    s.get("grid_spacing_m", cfg.map.grid_spacing_m);
    s.get("tx_power_dbm", cfg.map.tx_power_dbm);
    s.get("pathloss_exponent", cfg.map.pathloss_exponent);
    s.get("reference_loss_db", cfg.map.reference_loss_db);
    s.get("bs_height_m", cfg.map.bs_height_m);
    s.get("bs_azimuth_deg", cfg.map.bs_azimuth_deg);
    s.get("shadowing_sigma_db", cfg.map.shadowing_sigma_db);
    s.get("seed", cfg.map.rng_seed);
    s.get("horizontal_beamwidth_deg", cfg.map.gain.horizontal_beamwidth_deg);
    s.get("vertical_beamwidth_deg", cfg.map.gain.vertical_beamwidth_deg);
    s.get("max_attenuation_db", cfg.map.gain.max_attenuation_db);
    s.get("vertical_sidelobe_db", cfg.map.gain.vertical_sidelobe_db);
  }
  if (const json* j = top.find("radio")) {
    Section s(*j, "radio");
    auto& r = cfg.env.radio;
    s.get("cbr_mbps", r.cbr_mbps);
    s.get("max_user_prb", r.max_user_prb);
    s.get("cell_prb_budget", r.cell_prb_budget);
    s.get("hysteresis_db", r.hysteresis_db);
    s.get("noise_dbm", r.noise_dbm);
    s.get("edge_user_threshold_kbps", r.edge_user_threshold_kbps);
    if (const json* t = s.find("cqi_table")) {
      if (t->is_string()) {
        r.cqi_table = CqiTable::load(t->get<std::string>());
      } else if (t->is_array()) {
        std::vector<CqiLevel> levels;
        for (const auto& row : *t) {
          if (!row.is_array() || row.size() != 2) throw ConfigError("radio.cqi_table rows must be [threshold, rate]");
          levels.push_back({row[0].get<double>(), row[1].get<double>()});
        }
        r.cqi_table = CqiTable(std::move(levels));
      } else {
        throw ConfigError("radio.cqi_table must be a path or a list of [threshold, rate] rows");
      }
    }
  }
  if (const json* j = top.find("mobility")) {
    Section s(*j, "mobility");
    auto& m = cfg.env.mobility;
    if (const json* v = s.find("model")) {
      const auto name = v->is_string() ? v->get<std::string>() : std::string();
      if (name == "rwp") {
        m.model = MobilityModel::kRandomWaypoint;
      } else if (name == "slaw") {
        m.model = MobilityModel::kSlaw;
      } else {
        throw ConfigError("mobility.model must be rwp or slaw");
      }
    }
    s.get("num_users", m.num_users);
    s.get("tick_seconds", m.tick_seconds);
    s.get("speed_min_mps", m.speed_min_mps);
    s.get("speed_max_mps", m.speed_max_mps);
    s.get("pause_min_ticks", m.pause_min_ticks);
    s.get("pause_max_ticks", m.pause_max_ticks);
    s.get("slaw_num_clusters", m.slaw_num_clusters);
    s.get("slaw_cluster_radius_m", m.slaw_cluster_radius_m);
    s.get("slaw_switch_prob", m.slaw_switch_prob);
  }
  if (const json* j = top.find("env")) {
    Section s(*j, "env");
    s.get("action_period_ticks", cfg.env.action_period_ticks);
    s.get("reward_dims", cfg.env.reward_dims);
    s.get("throughput_scale_mbps", cfg.env.throughput_scale_mbps);
  }
  if (const json* j = top.find("agent")) {
    Section s(*j, "agent");
    auto& a = cfg.agent;
    s.get("gamma", a.gamma);
    s.get("tau", a.tau);
    s.get("weights", a.weights);
    s.get("exploration_variance_initial", a.exploration_variance_initial);
    s.get("exploration_decay_step", a.exploration_decay_step);
    s.get("exploration_variance_final", a.exploration_variance_final);
    s.get("batch_size", a.batch_size);
    s.get("buffer_capacity", a.buffer_capacity);
    s.get("hidden_layers", a.hidden_layers);
    s.get("actor_lr", a.actor_lr);
    s.get("critic_lr", a.critic_lr);
  }
  if (const json* j = top.find("static")) {
    Section s(*j, "static");
    auto& sp = cfg.static_policy;
    if (const json* v = s.find("solver")) {
      const auto name = v->is_string() ? v->get<std::string>() : std::string();
      if (name == "exact") {
        sp.solver = StaticSolver::kExact;
      } else if (name == "small-lambda") {
        sp.solver = StaticSolver::kSmallLambda;
      } else if (name == "fair-lambda") {
        sp.solver = StaticSolver::kFairLambda;
      } else {
        throw ConfigError("static.solver must be exact, small-lambda or fair-lambda");
      }
    }
    s.get("period_ticks", sp.period_ticks);
    s.get("reassociate_each_tick", sp.reassociate_each_tick);
    s.get("lambda", sp.lambda);
    s.get("repetitions", sp.fair.repetitions);
    s.get("parallel", sp.fair.parallel);
    if (const json* v = s.find("phi")) {
      if (!v->is_null()) sp.fair.phi = v->get<double>();
    }
    s.get("tilt_combos", sp.combos);
  }
  if (const json* j = top.find("train")) {
    Section s(*j, "train");
    s.get("periods", cfg.train_periods);
  }
  if (const json* j = top.find("evaluation")) {
    Section s(*j, "evaluation");
    s.get("horizon_days", cfg.evaluation.horizon_days);
    s.get("sample_interval_minutes", cfg.evaluation.sample_interval_minutes);
    s.get("moving_average", cfg.evaluation.moving_average);
    s.get("objective_weights", cfg.evaluation.objective_weights);
  }
  cfg.env.mobility.area = cfg.map.area;
  cfg.static_policy.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["name"] = cfg.name;
  j["seed"] = cfg.seed;
  j["policy"] = policy_name(cfg.policy);
  j["output_dir"] = cfg.output_dir;
  json bs = json::array();
  for (const auto& p : cfg.bs_positions) bs.push_back({p.x, p.y});
  j["scenario"] = {{"area", {cfg.map.area.width, cfg.map.area.height}}, {"bs_positions", bs},
                   {"tilts_deg", cfg.tilts_deg}};
  const auto& m = cfg.map;
  j["map"] = {{"path", cfg.map_path},
              {"grid_spacing_m", m.grid_spacing_m},
              {"tx_power_dbm", m.tx_power_dbm},
              {"pathloss_exponent", m.pathloss_exponent},
              {"reference_loss_db", m.reference_loss_db},
              {"bs_height_m", m.bs_height_m},
              {"bs_azimuth_deg", m.bs_azimuth_deg},
              {"shadowing_sigma_db", m.shadowing_sigma_db},
              {"seed", m.rng_seed},
              {"horizontal_beamwidth_deg", m.gain.horizontal_beamwidth_deg},
              {"vertical_beamwidth_deg", m.gain.vertical_beamwidth_deg},
              {"max_attenuation_db", m.gain.max_attenuation_db},
              {"vertical_sidelobe_db", m.gain.vertical_sidelobe_db}};
  const auto& r = cfg.env.radio;
  json cqi = json::array();
  for (const auto& l : r.cqi_table.levels()) cqi.push_back({l.sinr_threshold_db, l.rate_mbps_per_prb});
  j["radio"] = {{"cbr_mbps", r.cbr_mbps},
                {"max_user_prb", r.max_user_prb},
                {"cell_prb_budget", r.cell_prb_budget},
                {"hysteresis_db", r.hysteresis_db},
                {"noise_dbm", r.noise_dbm},
                {"edge_user_threshold_kbps", r.edge_user_threshold_kbps},
                {"cqi_table", cqi}};
  const auto& mo = cfg.env.mobility;
  j["mobility"] = {{"model", mo.model == MobilityModel::kSlaw ? "slaw" : "rwp"},
                   {"num_users", mo.num_users},
                   {"tick_seconds", mo.tick_seconds},
                   {"speed_min_mps", mo.speed_min_mps},
                   {"speed_max_mps", mo.speed_max_mps},
                   {"pause_min_ticks", mo.pause_min_ticks},
                   {"pause_max_ticks", mo.pause_max_ticks},
                   {"slaw_num_clusters", mo.slaw_num_clusters},
                   {"slaw_cluster_radius_m", mo.slaw_cluster_radius_m},
                   {"slaw_switch_prob", mo.slaw_switch_prob}};
  j["env"] = {{"action_period_ticks", cfg.env.action_period_ticks},
              {"reward_dims", cfg.env.reward_dims},
              {"throughput_scale_mbps", cfg.env.throughput_scale_mbps}};
  const auto& a = cfg.agent;
  j["agent"] = {{"gamma", a.gamma},
                {"tau", a.tau},
                {"weights", a.weights},
                {"exploration_variance_initial", a.exploration_variance_initial},
                {"exploration_decay_step", a.exploration_decay_step},
                {"exploration_variance_final", a.exploration_variance_final},
                {"batch_size", a.batch_size},
                {"buffer_capacity", a.buffer_capacity},
                {"hidden_layers", a.hidden_layers},
                {"actor_lr", a.actor_lr},
                {"critic_lr", a.critic_lr}};
  const auto& sp = cfg.static_policy;
  j["static"] = {{"solver", solver_name(sp.solver)},
                 {"period_ticks", sp.period_ticks},
                 {"reassociate_each_tick", sp.reassociate_each_tick},
                 {"lambda", sp.lambda},
                 {"repetitions", sp.fair.repetitions},
                 {"parallel", sp.fair.parallel},
                 {"phi", sp.fair.phi ? json(*sp.fair.phi) : json(nullptr)},
                 {"tilt_combos", sp.combos}};
  j["train"] = {{"periods", cfg.train_periods}};
  j["evaluation"] = {{"horizon_days", cfg.evaluation.horizon_days},
                     {"sample_interval_minutes", cfg.evaluation.sample_interval_minutes},
                     {"moving_average", cfg.evaluation.moving_average},
                     {"objective_weights", cfg.objective_weights()}};
  return j.dump(2) + "\n";
}

std::shared_ptr<const RsrpTensor> build_map(const ExperimentConfig& cfg) {
  std::shared_ptr<const RsrpTensor> t;
  if (!cfg.map_path.empty()) {
    t = std::make_shared<const RsrpTensor>(load_map(cfg.map_path));
    if (t->num_cells() != cfg.bs_positions.size()) {
      throw SchemaError("map '" + cfg.map_path + "' has N=" + std::to_string(t->num_cells()) +
                        " BSs but the scenario lists " + std::to_string(cfg.bs_positions.size()));
    }
    if (t->num_tilts() != cfg.tilts_deg.size()) {
      throw SchemaError("map '" + cfg.map_path + "' has M=" + std::to_string(t->num_tilts()) +
                        " tilts but the scenario lists " + std::to_string(cfg.tilts_deg.size()));
    }
    return t;
  }
  std::vector<TiltAngle> angles;
  for (double d : cfg.tilts_deg) angles.push_back({0.0, d});
  return std::make_shared<const RsrpTensor>(generate_map(cfg.map, TiltDictionary(angles), cfg.bs_positions));
}

double shifted_reward(std::span<const double> reward, std::span<const double> weights) {
  if (reward.size() != weights.size()) throw DimensionError("reward and weights differ in length");
  double s = 0.0;
  for (std::size_t i = 0; i < reward.size(); ++i) s += weights[i] * (i == 0 ? reward[i] : 1.0 + reward[i]);
  return s;
}

std::vector<double> moving_average(std::span<const double> x, std::size_t window) {
  if (window == 0) throw ConfigError("moving-average window must be >= 1");
  std::vector<double> out(x.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sum += x[i];
    if (i >= window) sum -= x[i - window];
    out[i] = sum / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

RunSummary summarize(const std::vector<EvalSample>& samples, std::span<const double> w) {
  RunSummary s;
  if (samples.empty()) return s;
  double load_sum = 0.0, load_sq = 0.0;
  std::size_t count = 0;
  for (const auto& x : samples) {
    s.mean_throughput_norm += x.throughput_norm;
    s.mean_peak_load_norm += x.peak_load_norm;
    for (double l : x.cell_load_norm) {
      load_sum += l;
      load_sq += l * l;
      ++count;
    }
  }
  const double n = static_cast<double>(samples.size());
  s.mean_throughput_norm /= n;
  s.mean_peak_load_norm /= n;
  const double mean = load_sum / static_cast<double>(count);
  s.load_std = std::sqrt(std::max(0.0, load_sq / static_cast<double>(count) - mean * mean));
  s.objective = w[0] * s.mean_throughput_norm + w[1] * (1.0 - s.mean_peak_load_norm);
  return s;
}

RunResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  auto tensor = build_map(cfg);
  RunResult result;
  const auto w = cfg.objective_weights();
  if (cfg.policy == PolicyKind::kStatic) {
    NetworkSim net(tensor, cfg.env.radio, cfg.env.mobility);
    net.reset(eval_mobility_seed(cfg));
    auto log = periodic_static_policy(net, cfg.static_policy, cfg.horizon_ticks());
    const long every = cfg.sample_every_ticks();
    const double budget = static_cast<double>(cfg.env.radio.cell_prb_budget);
    for (const auto& r : log.ticks) {
      if (r.tick % every == 0) result.samples.push_back(sample_from(r, budget, cfg.env.throughput_scale_mbps));
    }
    result.solver = log.stats;
    result.summary = summarize(result.samples, w);
    if (!cfg.output_dir.empty()) write_artifacts(cfg, result, nullptr);
    return result;
  }
  Env env(cfg.env, tensor);
  Agent agent(env.state_dim(), env.action_dim(), static_cast<std::size_t>(cfg.env.reward_dims), agent_config(cfg),
              cfg.seed);
  result.training = train_loop(env, agent, cfg.train_periods, training_mobility_seed(cfg));
  result.samples = evaluate_agent(cfg, tensor, agent);
  result.summary = summarize(result.samples, w);
  if (!cfg.output_dir.empty()) write_artifacts(cfg, result, &agent);
  return result;
}

RunResult evaluate_checkpoint(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint) {
  cfg.validate();
  if (cfg.policy == PolicyKind::kStatic) throw ConfigError("evaluate needs an RL policy config");
  auto tensor = build_map(cfg);
  const std::size_t N = tensor->num_cells();
  Agent agent(2 * N, N + N * (N - 1) / 2, static_cast<std::size_t>(cfg.env.reward_dims), agent_config(cfg),
              cfg.seed);
  const auto [sd, ad] = checkpoint_dims(checkpoint);
  if (sd != agent.state_dim() || ad != agent.action_dim()) {
    throw SchemaError("checkpoint was trained for N=" + std::to_string(sd / 2) + " (state " + std::to_string(sd) +
                      ", action " + std::to_string(ad) + ") but the scenario has N=" + std::to_string(N) +
                      " (state " + std::to_string(agent.state_dim()) + ", action " +
                      std::to_string(agent.action_dim()) + ")");
  }
  agent.load(checkpoint);
  RunResult result;
  result.samples = evaluate_agent(cfg, tensor, agent);
  result.summary = summarize(result.samples, cfg.objective_weights());
  if (!cfg.output_dir.empty()) write_artifacts(cfg, result, nullptr);
  return result;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  out << text;
}

}  // namespace

void write_artifacts(const ExperimentConfig& cfg, const RunResult& result, const Agent* agent) {
  const std::filesystem::path dir = cfg.output_dir;
  std::filesystem::create_directories(dir);
  write_text(dir / "config_echo.json", config_to_json(cfg));

  std::ostringstream thr, load, timeline;
  thr << "# schema: " << kThroughputSchema << "\nsample,tick,throughput_norm\n";
  load << "# schema: " << kCellLoadSchema << "\nsample,tick,cell,load_norm,throughput_mbps,handovers,edge_users\n";
  timeline << "# schema: " << kTimelineSchema << "\nsample,tick,throughput_norm,peak_load_norm,throughput_ma,peak_load_ma\n";
  std::vector<double> t, p;
  for (const auto& s : result.samples) {
    t.push_back(s.throughput_norm);
    p.push_back(s.peak_load_norm);
  }
  const auto window = static_cast<std::size_t>(cfg.evaluation.moving_average);
  const auto t_ma = moving_average(t, window);
  const auto p_ma = moving_average(p, window);
  for (std::size_t i = 0; i < result.samples.size(); ++i) {
    const auto& s = result.samples[i];
    thr << i << ',' << s.tick << ',' << fmt(s.throughput_norm) << '\n';
    for (std::size_t n = 0; n < s.cell_load_norm.size(); ++n) {
      load << i << ',' << s.tick << ',' << n << ',' << fmt(s.cell_load_norm[n]) << ','
           << fmt(s.cell_throughput_mbps[n]) << ',' << s.handovers[n] << ',' << s.edge_users[n] << '\n';
    }
    timeline << i << ',' << s.tick << ',' << fmt(s.throughput_norm) << ',' << fmt(s.peak_load_norm) << ','
             << fmt(t_ma[i]) << ',' << fmt(p_ma[i]) << '\n';
  }
  write_text(dir / "throughput.csv", thr.str());
  write_text(dir / "cell_load.csv", load.str());
  write_text(dir / "timeline.csv", timeline.str());

  json summary = {{"mean_throughput_norm", result.summary.mean_throughput_norm},
                  {"mean_peak_load_norm", result.summary.mean_peak_load_norm},
                  {"load_std", result.summary.load_std},
                  {"objective", result.summary.objective},
                  {"samples", result.samples.size()}};
  write_text(dir / "summary.json", summary.dump(2) + "\n");

  if (!result.training.empty()) {
    const std::size_t dims = result.training.front().reward.size();
    const std::size_t critics = agent ? agent->num_critics() : dims;
    const auto w = cfg.agent.weights;
    std::ostringstream conv;
    conv << "# schema: " << kConvergenceSchema << "\nperiod";
    for (std::size_t i = 0; i < dims; ++i) conv << ",reward_" << i;
    conv << ",shifted_reward";
    for (std::size_t i = 0; i < critics; ++i) conv << ",critic_loss_" << i;
    conv << ",actor_objective,noise_variance\n";
    for (const auto& e : result.training) {
      conv << e.period;
      for (double r : e.reward) conv << ',' << fmt(r);
      conv << ',' << fmt(shifted_reward(e.reward, w));
      for (std::size_t i = 0; i < critics; ++i) {
        conv << ',' << (e.critic_losses.empty() ? std::string() : fmt(e.critic_losses[i]));
      }
      conv << ',' << fmt(e.actor_objective) << ',' << fmt(e.noise_variance) << '\n';
    }
    write_text(dir / "convergence.csv", conv.str());
  }
  if (agent) agent->save(dir / "checkpoint.bin");
  if (cfg.policy == PolicyKind::kStatic) {
    json stats = {{"solver", solver_name(cfg.static_policy.solver)},
                  {"solves", result.solver.solves},
                  {"candidates", result.solver.candidates},
                  {"wall_seconds", result.solver.wall_seconds}};
    write_text(dir / "solver_stats.json", stats.dump(2) + "\n");
  }
}

namespace {

// Reads a schema-tagged CSV into rows of fields; rejects schema drift.
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path, const std::string& schema,
                                               std::vector<std::string>* header) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != "# schema: " + schema) {
    throw SchemaError(path.string() + ": expected schema '" + schema + "', found '" + line + "'");
  }
  std::getline(in, line);
  auto split = [](const std::string& l) {
    std::vector<std::string> f;
    std::stringstream ss(l);
    std::string x;
    while (std::getline(ss, x, ',')) f.push_back(x);
    if (!l.empty() && l.back() == ',') f.emplace_back();
    return f;
  };
  if (header) *header = split(line);
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (!line.empty()) rows.push_back(split(line));
  }
  return rows;
}

}  // namespace

RunArtifacts read_artifacts(const std::filesystem::path& dir) {
  RunArtifacts a;
  std::ifstream echo(dir / "config_echo.json");
  if (!echo) throw ConfigError("'" + dir.string() + "' has no config_echo.json");
  json cfg;
  try {
    cfg = json::parse(echo);
    a.name = cfg.at("name").get<std::string>();
    a.sample_interval_minutes = cfg.at("evaluation").at("sample_interval_minutes").get<double>();
  } catch (const json::exception& e) {
    throw SchemaError(dir.string() + "/config_echo.json: " + e.what());
  }
  for (const auto& row : read_csv(dir / "throughput.csv", kThroughputSchema, nullptr)) {
    if (row.size() != 3) throw SchemaError(dir.string() + "/throughput.csv: malformed row");
    a.throughput.push_back(std::stod(row[2]));
  }
  for (const auto& row : read_csv(dir / "cell_load.csv", kCellLoadSchema, nullptr)) {
    if (row.size() != 7) throw SchemaError(dir.string() + "/cell_load.csv: malformed row");
    const auto sample = std::stoul(row[0]);
    if (sample >= a.cell_load.size()) a.cell_load.resize(sample + 1);
    a.cell_load[sample].push_back(std::stod(row[3]));
  }
  if (std::filesystem::exists(dir / "convergence.csv")) {
    std::vector<std::string> header;
    const auto rows = read_csv(dir / "convergence.csv", kConvergenceSchema, &header);
    const auto col = std::find(header.begin(), header.end(), "shifted_reward") - header.begin();
    if (static_cast<std::size_t>(col) >= header.size()) {
      throw SchemaError(dir.string() + "/convergence.csv: no shifted_reward column");
    }
    for (const auto& row : rows) a.training_reward.push_back(std::stod(row[static_cast<std::size_t>(col)]));
  }
  return a;
}

std::vector<CdfPoint> empirical_cdf(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  std::vector<CdfPoint> out;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i + 1 < x.size() && x[i + 1] == x[i]) continue;
    out.push_back({x[i], static_cast<double>(i + 1) / n});
  }
  return out;
}

double quantile(std::vector<double> x, double q) {
  if (x.empty()) throw StateError("quantile of an empty sample");
  std::sort(x.begin(), x.end());
  const double pos = q * static_cast<double>(x.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (pos - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

std::vector<RunComparison> compare_runs(const std::vector<RunArtifacts>& runs, std::size_t final_window) {
  if (runs.empty()) throw ConfigError("compare needs at least one run");
  std::vector<RunComparison> out;
  for (const auto& r : runs) {
    if (r.sample_interval_minutes != runs.front().sample_interval_minutes) {
      throw ComparisonError("run '" + r.name + "' samples every " + fmt(r.sample_interval_minutes) +
                            " min but '" + runs.front().name + "' every " + fmt(runs.front().sample_interval_minutes));
    }
    if (r.throughput.empty()) throw ComparisonError("run '" + r.name + "' has no throughput samples");
    RunComparison c;
    c.name = r.name;
    c.p10 = quantile(r.throughput, 0.1);
    c.p50 = quantile(r.throughput, 0.5);
    c.p90 = quantile(r.throughput, 0.9);
    double sum = 0.0, sq = 0.0;
    std::size_t count = 0;
    for (const auto& cells : r.cell_load) {
      c.mean_peak_load += cells.empty() ? 0.0 : *std::max_element(cells.begin(), cells.end());
      for (double l : cells) {
        sum += l;
        sq += l * l;
        ++count;
      }
    }
    if (!r.cell_load.empty()) c.mean_peak_load /= static_cast<double>(r.cell_load.size());
    if (count > 0) {
      const double mean = sum / static_cast<double>(count);
      c.load_std = std::sqrt(std::max(0.0, sq / static_cast<double>(count) - mean * mean));
    }
    if (!r.training_reward.empty()) {
      const std::size_t w = std::min(final_window, r.training_reward.size());
      double m = 0.0, v = 0.0;
      for (std::size_t i = r.training_reward.size() - w; i < r.training_reward.size(); ++i) m += r.training_reward[i];
      m /= static_cast<double>(w);
      for (std::size_t i = r.training_reward.size() - w; i < r.training_reward.size(); ++i) {
        v += (r.training_reward[i] - m) * (r.training_reward[i] - m);
      }
      c.final_window_mean = m;
      c.final_window_std = std::sqrt(v / static_cast<double>(w));
    }
    c.cdf = empirical_cdf(r.throughput);
    out.push_back(std::move(c));
  }
  for (auto& c : out) {
    c.delta_p50 = c.p50 - out.front().p50;
    c.delta_mean_peak_load = c.mean_peak_load - out.front().mean_peak_load;
  }
  return out;
}

}  // namespace son
