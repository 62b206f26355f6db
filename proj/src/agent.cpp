#include "son/agent.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "binary_io.hpp"
#include "son/error.hpp"

namespace son {

namespace {

constexpr char kAgentMagic[8] = {'S', 'O', 'N', 'A', 'G', 'N', 'T', '\0'};
constexpr std::uint32_t kAgentVersion = 1;

// Row-major [s | a] batch for critic input.
std::vector<double> concat_rows(std::span<const double> s, std::size_t sd, std::span<const double> a, std::size_t ad,
                                std::size_t batch) {
  std::vector<double> out(batch * (sd + ad));
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy_n(s.data() + b * sd, sd, out.data() + b * (sd + ad));
    std::copy_n(a.data() + b * ad, ad, out.data() + b * (sd + ad) + sd);
  }
  return out;
}

std::vector<double> gather(const std::vector<const Transition*>& batch, std::vector<double> Transition::*field) {
  std::vector<double> out;
  for (const auto* t : batch) out.insert(out.end(), ((*t).*field).begin(), ((*t).*field).end());
  return out;
}

CriticEval mlp_critic(const nn::Mlp& net, std::size_t state_dim, std::size_t action_dim) {
  return [&net, state_dim, action_dim](std::span<const double> s, std::span<const double> a, std::size_t batch,
                                       std::span<double> q, std::span<double> dq_da) {
    nn::ForwardCache cache;
    net.forward_batch(concat_rows(s, state_dim, a, action_dim, batch), batch, cache);
    std::copy(cache.act.back().begin(), cache.act.back().end(), q.begin());
    const std::vector<double> ones(batch, 1.0);
    const auto gin = net.backward(cache, ones, {});
    for (std::size_t b = 0; b < batch; ++b) {
      std::copy_n(gin.data() + b * (state_dim + action_dim) + state_dim, action_dim, dq_da.data() + b * action_dim);
    }
  };
}

}  // namespace

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay buffer capacity must be > 0");
}

void ReplayBuffer::push(Transition t) {
  if (!records_.empty() && t.rewards.size() != records_.front().rewards.size()) {
    throw DimensionError("transition reward dimension differs from the buffer's");
  }
  if (records_.size() < capacity_) {
    records_.push_back(std::move(t));
    return;
  }
  records_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayBuffer::operator[](std::size_t i) const {
  if (i >= records_.size()) throw DimensionError("replay index out of range");
  return records_[(head_ + i) % records_.size()];
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t batch, Rng& rng) const {
  if (records_.empty()) throw StateError("cannot sample from an empty replay buffer");
  std::vector<const Transition*> out(batch);
  for (auto& p : out) p = &records_[uniform_index(rng, records_.size())];
  return out;
}

void PdpgConfig::validate(std::size_t reward_dims) const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in (0, 1]");
  if (weights.size() != reward_dims) {
    throw ConfigError("agent has " + std::to_string(weights.size()) + " weights but the reward has " +
                      std::to_string(reward_dims) + " entries");
  }
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ConfigError("weights must be non-negative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("weights must sum to 1");
  if (!(exploration_variance_initial >= 0.0) || !(exploration_variance_final >= 0.0)) {
    throw ConfigError("exploration variances must be non-negative");
  }
  if (exploration_decay_step < 0) throw ConfigError("exploration_decay_step must be >= 0");
  if (batch_size == 0) throw ConfigError("batch_size must be > 0");
  if (buffer_capacity == 0) throw ConfigError("buffer_capacity must be > 0");
  for (auto h : hidden_layers) {
    if (h == 0) throw ConfigError("hidden layer sizes must be positive");
  }
  if (!(actor_lr >= 0.0) || !(critic_lr >= 0.0)) throw ConfigError("learning rates must be non-negative");
}

double PdpgConfig::noise_variance(long iteration) const {
  return iteration < exploration_decay_step ? exploration_variance_initial : exploration_variance_final;
}

double actor_ascent_step(nn::Mlp& actor, nn::Adam& opt, std::span<const double> states, std::size_t batch,
                         std::span<const CriticEval> critics, std::span<const double> weights) {
  if (critics.size() != weights.size()) throw DimensionError("one weight per critic required");
  const std::size_t ad = actor.spec().output_dim();
  nn::ForwardCache cache;
  actor.forward_batch(states, batch, cache);
  const auto& actions = cache.act.back();

  std::vector<double> out_grad(batch * ad, 0.0);
  std::vector<double> q(batch), dq(batch * ad);
  double objective = 0.0;
  const double inv_b = 1.0 / static_cast<double>(batch);
  for (std::size_t i = 0; i < critics.size(); ++i) {
    if (weights[i] == 0.0) continue;
    critics[i](states, actions, batch, q, dq);
    for (std::size_t b = 0; b < batch; ++b) objective += weights[i] * q[b] * inv_b;
    // Descending the negated objective.
    for (std::size_t j = 0; j < batch * ad; ++j) out_grad[j] -= weights[i] * dq[j] * inv_b;
  }
  std::vector<double> grad(actor.params().size(), 0.0);
  actor.backward(cache, out_grad, grad);
  opt.step(actor.params(), grad);
  return objective;
}

void soft_update(const nn::Mlp& online, nn::Mlp& target, double tau) {
  if (!(online.spec() == target.spec())) throw DimensionError("soft_update: architectures differ");
  const auto& src = online.params();
  auto& dst = target.params();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = tau * src[i] + (1.0 - tau) * dst[i];
}

Agent::Agent(std::size_t state_dim, std::size_t action_dim, std::size_t reward_dims, PdpgConfig cfg,
             std::uint64_t seed)
    : state_dim_(state_dim),
      action_dim_(action_dim),
      reward_dims_(reward_dims),
      cfg_(std::move(cfg)),
      buffer_(cfg_.buffer_capacity),
      explore_rng_(make_rng(seed, "exploration")),
      replay_rng_(make_rng(seed, "replay")) {
  if (state_dim == 0 || action_dim == 0) throw ConfigError("agent dimensions must be positive");
  cfg_.validate(reward_dims);
  const std::size_t n_critics = cfg_.scalar_mode ? 1 : reward_dims;
  actor_weights_ = cfg_.scalar_mode ? std::vector<double>{1.0} : cfg_.weights;

  Rng init = make_rng(seed, "agent-init");
  nn::MlpSpec actor_spec{{state_dim}, nn::Activation::kRelu, nn::Activation::kTanh};
  nn::MlpSpec critic_spec{{state_dim + action_dim}, nn::Activation::kRelu, nn::Activation::kLinear};
  for (auto h : cfg_.hidden_layers) {
    actor_spec.layer_sizes.push_back(h);
    critic_spec.layer_sizes.push_back(h);
  }
  actor_spec.layer_sizes.push_back(action_dim);
  critic_spec.layer_sizes.push_back(1);

  actor_ = nn::Mlp::init(actor_spec, init);
  actor_target_ = actor_;
  // Every critic starts from the same draw, so one-hot weights track a
  // single-critic learner exactly.
  const auto critic0 = nn::Mlp::init(critic_spec, init);
  critics_.assign(n_critics, critic0);
  critic_targets_.assign(n_critics, critic0);

  actor_opt_ = nn::Adam(actor_.params().size(), {cfg_.actor_lr});
  critic_opts_.assign(n_critics, nn::Adam(critic0.params().size(), {cfg_.critic_lr}));
}

std::vector<double> Agent::act(std::span<const double> state) const {
  if (state.size() != state_dim_) throw DimensionError("state has the wrong dimension");
  return actor_.forward(state);
}

std::vector<double> Agent::select_action(std::span<const double> state, double variance) {
  return select_action(state, variance, explore_rng_);
}

std::vector<double> Agent::select_action(std::span<const double> state, double variance, Rng& rng) const {
  auto a = act(state);
  if (variance > 0.0) {
    const double sigma = std::sqrt(variance);
    for (auto& x : a) x = std::clamp(x + sigma * gaussian(rng), -1.0, 1.0);
  }
  return a;
}

std::vector<double> Agent::stored_reward(std::span<const double> reward) const {
  if (reward.size() != reward_dims_) throw DimensionError("reward has the wrong dimension");
  if (!cfg_.scalar_mode) return {reward.begin(), reward.end()};
  double s = 0.0;
  for (std::size_t i = 0; i < reward.size(); ++i) s += cfg_.weights[i] * reward[i];
  return {s};
}

std::vector<std::vector<double>> Agent::td_targets(const std::vector<const Transition*>& batch) const {
  const std::size_t B = batch.size();
  if (B == 0) throw StateError("td_targets needs a non-empty batch");
  const auto next = gather(batch, &Transition::next_state);
  nn::ForwardCache ac;
  actor_target_.forward_batch(next, B, ac);
  const auto input = concat_rows(next, state_dim_, ac.act.back(), action_dim_, B);
  std::vector<std::vector<double>> y(critics_.size(), std::vector<double>(B));
  nn::ForwardCache cc;
  for (std::size_t i = 0; i < critics_.size(); ++i) {
    critic_targets_[i].forward_batch(input, B, cc);
    for (std::size_t b = 0; b < B; ++b) y[i][b] = batch[b]->rewards[i] + cfg_.gamma * cc.act.back()[b];
  }
  return y;
}

std::vector<double> Agent::update_critics(const std::vector<const Transition*>& batch) {
  const std::size_t B = batch.size();
  const auto y = td_targets(batch);
  const auto input = concat_rows(gather(batch, &Transition::state), state_dim_, gather(batch, &Transition::action),
                                 action_dim_, B);
  std::vector<double> losses(critics_.size());
  nn::ForwardCache cache;
  std::vector<double> out_grad(B);
  for (std::size_t i = 0; i < critics_.size(); ++i) {
    critics_[i].forward_batch(input, B, cache);
    double loss = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      const double r = cache.act.back()[b] - y[i][b];
      loss += r * r;
      out_grad[b] = 2.0 * r / static_cast<double>(B);
    }
    losses[i] = loss / static_cast<double>(B);
    std::vector<double> grad(critics_[i].params().size(), 0.0);
    critics_[i].backward(cache, out_grad, grad);
    critic_opts_[i].step(critics_[i].params(), grad);
  }
  return losses;
}

double Agent::update_actor(const std::vector<const Transition*>& batch) {
  std::vector<CriticEval> evals;
  for (const auto& c : critics_) evals.push_back(mlp_critic(c, state_dim_, action_dim_));
  const auto states = gather(batch, &Transition::state);
  return actor_ascent_step(actor_, actor_opt_, states, batch.size(), evals, actor_weights_);
}

void Agent::soft_update_targets() {
  soft_update(actor_, actor_target_, cfg_.tau);
  for (std::size_t i = 0; i < critics_.size(); ++i) soft_update(critics_[i], critic_targets_[i], cfg_.tau);
}

UpdateStats Agent::observe(Transition t) {
  if (t.state.size() != state_dim_ || t.next_state.size() != state_dim_ || t.action.size() != action_dim_) {
    throw DimensionError("transition dimensions do not match the agent");
  }
  if (t.rewards.size() != critics_.size()) throw DimensionError("transition reward has the wrong dimension");
  buffer_.push(std::move(t));
  ++iterations_;
  UpdateStats stats;
  if (buffer_.size() < cfg_.batch_size) return stats;
  const auto batch = buffer_.sample(cfg_.batch_size, replay_rng_);
  stats.critic_losses = update_critics(batch);
  stats.actor_objective = update_actor(batch);
  soft_update_targets();
  stats.updated = true;
  return stats;
}

void Agent::save(const std::filesystem::path& path) const {
  detail::ByteWriter w;
  w.bytes(kAgentMagic, sizeof kAgentMagic);
  w.u32(kAgentVersion);
  w.u64(state_dim_);
  w.u64(action_dim_);
  w.u64(reward_dims_);
  w.u64(critics_.size());
  nn::write_mlp(w, actor_);
  nn::write_mlp(w, actor_target_);
  for (std::size_t i = 0; i < critics_.size(); ++i) {
    nn::write_mlp(w, critics_[i]);
    nn::write_mlp(w, critic_targets_[i]);
  }
  w.write_file(path);
}

namespace {

struct CheckpointHeader {
  std::uint64_t state_dim, action_dim, reward_dims, critics;
};

CheckpointHeader read_header(detail::ByteReader& r) {
  char magic[8];
  r.bytes(magic, sizeof magic, "magic");
  if (!std::equal(magic, magic + 8, kAgentMagic)) throw ParseError("not an agent checkpoint (bad magic)", 0);
  const auto version = r.u32("version");
  if (version != kAgentVersion) throw SchemaError("unsupported checkpoint version " + std::to_string(version));
  CheckpointHeader h{};
  h.state_dim = r.u64("state dim");
  h.action_dim = r.u64("action dim");
  h.reward_dims = r.u64("reward dims");
  h.critics = r.u64("critic count");
  return h;
}

}  // namespace

std::pair<std::size_t, std::size_t> checkpoint_dims(const std::filesystem::path& path) {
  auto r = detail::ByteReader::from_file(path);
  const auto h = read_header(r);
  return {h.state_dim, h.action_dim};
}

void Agent::load(const std::filesystem::path& path) {
  auto r = detail::ByteReader::from_file(path);
  const auto h = read_header(r);
  if (h.state_dim != state_dim_ || h.action_dim != action_dim_) {
    throw SchemaError("checkpoint has state/action dims " + std::to_string(h.state_dim) + "/" +
                      std::to_string(h.action_dim) + " but the environment needs " + std::to_string(state_dim_) +
                      "/" + std::to_string(action_dim_));
  }
  if (h.critics != critics_.size()) {
    throw SchemaError("checkpoint holds " + std::to_string(h.critics) + " critics, agent has " +
                      std::to_string(critics_.size()));
  }
  auto check = [](const nn::Mlp& got, const nn::Mlp& want, const char* what) {
    if (!(got.spec() == want.spec())) throw SchemaError(std::string("checkpoint ") + what + " architecture differs");
  };
  auto actor = nn::read_mlp(r);
  check(actor, actor_, "actor");
  auto actor_target = nn::read_mlp(r);
  check(actor_target, actor_, "target actor");
  std::vector<nn::Mlp> critics, targets;
  for (std::size_t i = 0; i < critics_.size(); ++i) {
    critics.push_back(nn::read_mlp(r));
    check(critics.back(), critics_[i], "critic");
    targets.push_back(nn::read_mlp(r));
    check(targets.back(), critics_[i], "target critic");
  }
  if (r.remaining() != 0) throw ParseError("trailing bytes after checkpoint", r.offset());
  actor_ = std::move(actor);
  actor_target_ = std::move(actor_target);
  critics_ = std::move(critics);
  critic_targets_ = std::move(targets);
}

std::vector<PeriodLog> train_loop(Env& env, Agent& agent, long total_periods, std::uint64_t env_seed,
                                  const std::function<void(const PeriodLog&, const StepResult&)>& on_period) {
  std::vector<PeriodLog> log;
  log.reserve(static_cast<std::size_t>(std::max(0L, total_periods)));
  auto state = scale_state(env.reset(env_seed));
  for (long p = 0; p < total_periods; ++p) {
    PeriodLog entry;
    entry.period = p;
    entry.noise_variance = agent.config().noise_variance(agent.iterations());
    auto action = agent.select_action(state, entry.noise_variance);
    auto result = env.step(Action::from_flat(action, env.num_cells()));
    auto next = scale_state(result.next_state);
    const auto stats = agent.observe({state, action, agent.stored_reward(result.reward), next});
    entry.reward = result.reward;
    entry.critic_losses = stats.critic_losses;
    entry.actor_objective = stats.actor_objective;
    entry.action = std::move(action);
    if (on_period) on_period(entry, result);
    log.push_back(std::move(entry));
    state = std::move(next);
  }
  return log;
}

}  // namespace son
