#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "son/env.hpp"
#include "son/nn.hpp"
#include "son/random.hpp"

namespace son {

// States and actions are stored flat: the scaled state vector and the raw
// actor output in [-1, 1].
struct Transition {
  std::vector<double> state;
  std::vector<double> action;
  std::vector<double> rewards;
  std::vector<double> next_state;
};

// Bounded FIFO; once full, each push evicts the oldest record.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return records_.size(); }
  std::size_t capacity() const { return capacity_; }
  // i = 0 is the oldest record still held.
  const Transition& operator[](std::size_t i) const;
  // Uniform with replacement.
  std::vector<const Transition*> sample(std::size_t batch, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // index of the oldest record once full
  std::vector<Transition> records_;
};

struct PdpgConfig {
  double gamma = 0.3;
  double tau = 0.01;
  std::vector<double> weights{0.5, 0.5};
  // Exploration noise is given as a variance; the Gaussian std is its root.
  double exploration_variance_initial = 0.1;
  long exploration_decay_step = 500;
  double exploration_variance_final = 1e-2;
  std::size_t batch_size = 64;
  std::size_t buffer_capacity = 50000;
  std::vector<std::size_t> hidden_layers{50, 100};
  double actor_lr = 1e-3;
  double critic_lr = 1e-3;
  // Collapse the reward vector to dot(weights, r) and train one critic.
  bool scalar_mode = false;

  void validate(std::size_t reward_dims) const;
  double noise_variance(long iteration) const;
};

// One critic evaluator: given a batch of states (B x S) and actions (B x A),
// writes Q (B) and dQ/da (B x A).
using CriticEval = std::function<void(std::span<const double> states, std::span<const double> actions,
                                      std::size_t batch, std::span<double> q, std::span<double> dq_da)>;

// One optimizer step ascending the batch mean of sum_i w_i Q_i(s, A(s)).
// Critics with zero weight are not evaluated. Returns that mean before the step.
double actor_ascent_step(nn::Mlp& actor, nn::Adam& opt, std::span<const double> states, std::size_t batch,
                         std::span<const CriticEval> critics, std::span<const double> weights);

// target <- tau * online + (1 - tau) * target.
void soft_update(const nn::Mlp& online, nn::Mlp& target, double tau);

struct UpdateStats {
  bool updated = false;
  std::vector<double> critic_losses;
  double actor_objective = 0.0;
};

class Agent {
 public:
  // Seeds: "agent-init" for weights, "exploration" for action noise and
  // "replay" for minibatch draws, all substreams of `seed`.
  Agent(std::size_t state_dim, std::size_t action_dim, std::size_t reward_dims, PdpgConfig cfg, std::uint64_t seed);

  std::vector<double> act(std::span<const double> state) const;
  std::vector<double> select_action(std::span<const double> state, double variance);
  std::vector<double> select_action(std::span<const double> state, double variance, Rng& rng) const;

  // Reward as stored in the buffer: the vector itself, or its weighted sum in
  // scalar mode.
  std::vector<double> stored_reward(std::span<const double> reward) const;

  // y_i = r_i + gamma * Q'_i(s', A'(s')), one row per critic.
  std::vector<std::vector<double>> td_targets(const std::vector<const Transition*>& batch) const;
  std::vector<double> update_critics(const std::vector<const Transition*>& batch);
  double update_actor(const std::vector<const Transition*>& batch);
  void soft_update_targets();

  // Stores the transition, then runs one learning iteration if the buffer
  // holds at least a batch.
  UpdateStats observe(Transition t);

  std::size_t num_critics() const { return critics_.size(); }
  std::size_t state_dim() const { return state_dim_; }
  std::size_t action_dim() const { return action_dim_; }
  std::size_t reward_dims() const { return reward_dims_; }
  const PdpgConfig& config() const { return cfg_; }
  const std::vector<double>& actor_weights() const { return actor_weights_; }
  const nn::Mlp& actor() const { return actor_; }
  const nn::Mlp& actor_target() const { return actor_target_; }
  const nn::Mlp& critic(std::size_t i) const { return critics_[i]; }
  const nn::Mlp& critic_target(std::size_t i) const { return critic_targets_[i]; }
  nn::Mlp& mutable_actor() { return actor_; }
  nn::Mlp& mutable_critic(std::size_t i) { return critics_[i]; }
  nn::Mlp& mutable_critic_target(std::size_t i) { return critic_targets_[i]; }
  nn::Mlp& mutable_actor_target() { return actor_target_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  long iterations() const { return iterations_; }

  // Checkpoint holds the dimensions, the actor and every critic with targets.
  void save(const std::filesystem::path& path) const;
  // Restores the networks; throws SchemaError if the stored dimensions differ.
  void load(const std::filesystem::path& path);

 private:
  std::size_t state_dim_;
  std::size_t action_dim_;
  std::size_t reward_dims_;
  PdpgConfig cfg_;
  std::vector<double> actor_weights_;
  nn::Mlp actor_;
  nn::Mlp actor_target_;
  std::vector<nn::Mlp> critics_;
  std::vector<nn::Mlp> critic_targets_;
  nn::Adam actor_opt_;
  std::vector<nn::Adam> critic_opts_;
  ReplayBuffer buffer_;
  Rng explore_rng_;
  Rng replay_rng_;
  long iterations_ = 0;
};

// Reads only the stored state and action dimensions of a checkpoint.
std::pair<std::size_t, std::size_t> checkpoint_dims(const std::filesystem::path& path);

struct PeriodLog {
  long period = 0;
  std::vector<double> reward;
  std::vector<double> critic_losses;  // empty before the first update
  double actor_objective = 0.0;
  double noise_variance = 0.0;
  std::vector<double> action;
};

// Algorithm loop: act with noise, step the env, store, learn, repeat.
std::vector<PeriodLog> train_loop(Env& env, Agent& agent, long total_periods, std::uint64_t env_seed,
                                  const std::function<void(const PeriodLog&, const StepResult&)>& on_period = {});

}  // namespace son
