#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fjsp/dan.hpp"
#include "fjsp/features.hpp"

namespace fjsp {

struct TransitionRecord {
  FeatureBundle bundle;
  int action_index = -1;
  Action action;
  double log_prob_old = 0.0;
  long long reward_raw = 0;
  double reward_scaled = 0.0;  // reward_raw / initial lower bound
  double value = 0.0;
  double advantage = 0.0;
  double norm_advantage = 0.0;
  double value_target = 0.0;
};

struct Trajectory {
  std::vector<TransitionRecord> steps;
  long long initial_lower_bound = 0;
  long long makespan = 0;
};

struct TrainConfig {
  int n_ep = 1000;
  int batch_envs = 20;      // parallel environments per episode
  int resample_every = 20;  // episodes between training-batch refreshes
  int validate_every = 10;
  int val_instances = 50;
  int k_epochs = 4;
  double gamma = 1.0;
  double lambda = 0.98;
  double clip_eps = 0.2;
  double policy_coef = 1.0;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  double lr = 3e-4;
  std::uint64_t seed = 1;
  int n_jobs = 6;
  int n_machines = 3;
  std::string generator = "sd2";
  bool normalize_advantages = true;
  bool normalize_rewards = true;
  DanConfig model;

  void check() const;
  std::string to_json() const;
  // Rejects unknown keys by name; missing keys keep their defaults except
  // the required instance-shape fields.
  static TrainConfig from_json(const std::string& text);
};

struct TrainLogRow {
  int episode = 0;
  double mean_return = 0.0;  // mean over envs of the raw reward sum
  std::optional<double> val_makespan;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<TrainLogRow> rows;
  static std::string csv_header();
  static std::string csv_row(const TrainLogRow& row);
};

// One sampled rollout per instance under the current parameters (the
// behaviour policy for this episode). Deterministic given the rng state.
std::vector<Trajectory> collect_batch(PolicyParams& params,
                                      std::span<const FjspInstance> instances,
                                      Rng& rng, bool scale_rewards);

// Fills advantage and value_target. Terminal bootstrap value is zero.
void compute_gae(Trajectory& traj, double gamma, double lambda);

// Shared forward path for one stored transition; used by the update loop
// and by gradient checks so both differentiate the same graph.
struct TransitionTerms {
  Tape::Id log_prob = -1;
  Tape::Id entropy = -1;
  Tape::Id value = -1;
};
TransitionTerms transition_forward(Tape& tape, PolicyParams& params,
                                   const FeatureBundle& bundle, int action_index);

struct UpdateStats {
  double policy_loss = 0.0;  // epoch-1 terms, before any step
  double value_loss = 0.0;
  double entropy = 0.0;
  double total_loss = 0.0;
  double max_ratio_deviation = 0.0;  // max |ratio - 1| at epoch 1
};

UpdateStats ppo_update(PolicyParams& params, Adam& adam,
                       std::span<Trajectory> trajectories, const TrainConfig& config);

struct TrainResult {
  std::string best_checkpoint;
  std::string last_checkpoint;
  double best_val_makespan = 0.0;
  TrainLog log;
};

// Full training loop: collect, GAE, update, periodic resample/validation,
// checkpointing of the best-validation parameters plus a resumable state.
TrainResult train(const TrainConfig& config, const std::string& out_dir,
                  bool resume = false, std::ostream* progress = nullptr);

FjspInstance generate_instance(const std::string& generator, int n, int m, Rng& rng);

}  // namespace fjsp
