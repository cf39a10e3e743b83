#include "fjsp/ppo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "fjsp/checkpoint.hpp"
#include "json.hpp"

namespace fjsp {

void TrainConfig::check() const {
  auto positive = [](auto v, const char* what) {
    if (v <= 0) throw ContractViolation(std::string("TrainConfig: ") + what +
                                        " must be positive");
  };
  positive(n_ep, "n_ep");
  positive(batch_envs, "batch_envs");
  positive(resample_every, "resample_every");
  positive(validate_every, "validate_every");
  positive(val_instances, "val_instances");
  positive(k_epochs, "k_epochs");
  positive(lr, "lr");
  positive(n_jobs, "n_jobs");
  positive(n_machines, "n_machines");
  if (gamma <= 0.0 || gamma > 1.0) throw ContractViolation("TrainConfig: gamma must be in (0,1]");
  if (lambda < 0.0 || lambda > 1.0) throw ContractViolation("TrainConfig: lambda must be in [0,1]");
  if (clip_eps <= 0.0) throw ContractViolation("TrainConfig: clip_eps must be positive");
  if (generator != "sd1" && generator != "sd2")
    throw ContractViolation("TrainConfig: generator must be sd1 or sd2");
  model.check();
}

std::string TrainConfig::to_json() const {
  nlohmann::json doc;
  doc["n_ep"] = n_ep;
  doc["batch_envs"] = batch_envs;
  doc["resample_every"] = resample_every;
  doc["validate_every"] = validate_every;
  doc["val_instances"] = val_instances;
  doc["k_epochs"] = k_epochs;
  doc["gamma"] = gamma;
  doc["lambda"] = lambda;
  doc["clip_eps"] = clip_eps;
  doc["policy_coef"] = policy_coef;
  doc["value_coef"] = value_coef;
  doc["entropy_coef"] = entropy_coef;
  doc["lr"] = lr;
  doc["seed"] = seed;
  doc["n_jobs"] = n_jobs;
  doc["n_machines"] = n_machines;
  doc["generator"] = generator;
  doc["normalize_advantages"] = normalize_advantages;
  doc["normalize_rewards"] = normalize_rewards;
  doc["model"] = nlohmann::json::parse(model.to_json());
  return doc.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  const nlohmann::json doc = nlohmann::json::parse(text);
  static const char* known[] = {
      "n_ep",        "batch_envs",      "resample_every", "validate_every",
      "val_instances", "k_epochs",      "gamma",          "lambda",
      "clip_eps",    "policy_coef",     "value_coef",     "entropy_coef",
      "lr",          "seed",            "n_jobs",         "n_machines",
      "generator",   "normalize_advantages", "normalize_rewards", "model"};
  for (const auto& [key, value] : doc.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw std::runtime_error("unknown config key: " + key);
  }
  for (const char* required : {"n_jobs", "n_machines", "generator", "seed"})
    if (!doc.contains(required))
      throw std::runtime_error(std::string("missing config key: ") + required);

  TrainConfig cfg;
  auto load = [&doc](const char* key, auto& into) {
    if (doc.contains(key)) into = doc.at(key).get<std::decay_t<decltype(into)>>();
  };
  load("n_ep", cfg.n_ep);
  load("batch_envs", cfg.batch_envs);
  load("resample_every", cfg.resample_every);
  load("validate_every", cfg.validate_every);
  load("val_instances", cfg.val_instances);
  load("k_epochs", cfg.k_epochs);
  load("gamma", cfg.gamma);
  load("lambda", cfg.lambda);
  load("clip_eps", cfg.clip_eps);
  load("policy_coef", cfg.policy_coef);
  load("value_coef", cfg.value_coef);
  load("entropy_coef", cfg.entropy_coef);
  load("lr", cfg.lr);
  load("seed", cfg.seed);
  load("n_jobs", cfg.n_jobs);
  load("n_machines", cfg.n_machines);
  load("generator", cfg.generator);
  load("normalize_advantages", cfg.normalize_advantages);
  load("normalize_rewards", cfg.normalize_rewards);
  if (doc.contains("model")) cfg.model = DanConfig::from_json(doc.at("model").dump());
  cfg.check();
  return cfg;
}

std::string TrainLog::csv_header() {
  return "episode,mean_return,val_makespan,policy_loss,value_loss,entropy,seconds";
}

std::string TrainLog::csv_row(const TrainLogRow& row) {
  std::ostringstream os;
  os << row.episode << ',' << row.mean_return << ',';
  if (row.val_makespan) os << *row.val_makespan;
  os << ',' << row.policy_loss << ',' << row.value_loss << ',' << row.entropy << ','
     << row.seconds;
  return os.str();
}

FjspInstance generate_instance(const std::string& generator, int n, int m, Rng& rng) {
  if (generator == "sd1") return gen_sd1(n, m, rng);
  if (generator == "sd2") return gen_sd2(n, m, rng);
  throw ContractViolation("unknown generator: " + generator);
}

std::vector<Trajectory> collect_batch(PolicyParams& params,
                                      std::span<const FjspInstance> instances,
                                      Rng& rng, bool scale_rewards) {
  std::vector<Trajectory> out;
  out.reserve(instances.size());
  for (const FjspInstance& inst : instances) {
    Rng env_rng = rng.split();
    Trajectory traj;
    ScheduleState state(inst);
    traj.initial_lower_bound = state.initial_estimated_makespan();
    const double scale =
        scale_rewards ? static_cast<double>(std::max<long long>(1, traj.initial_lower_bound))
                      : 1.0;
    while (!state.done()) {
      TransitionRecord rec;
      rec.bundle = build_bundle(state);
      const PolicyOutput policy = evaluate_policy(rec.bundle, params);
      const ActionChoice choice =
          select_action(policy.probs, Strategy::Sample, &env_rng);
      rec.action_index = choice.index;
      rec.action = rec.bundle.pairs[choice.index].action;
      rec.log_prob_old = choice.log_prob;
      rec.value = policy.value;
      const StepResult stepped = state.step(rec.action);
      rec.reward_raw = stepped.reward;
      rec.reward_scaled = static_cast<double>(stepped.reward) / scale;
      traj.steps.push_back(std::move(rec));
    }
    traj.makespan = state.extract_schedule().makespan;
    out.push_back(std::move(traj));
  }
  return out;
}

void compute_gae(Trajectory& traj, double gamma, double lambda) {
  const int T = static_cast<int>(traj.steps.size());
  double next_value = 0.0;  // terminal bootstrap
  double running = 0.0;
  for (int t = T - 1; t >= 0; --t) {
    TransitionRecord& rec = traj.steps[t];
    const double delta = rec.reward_scaled + gamma * next_value - rec.value;
    running = delta + gamma * lambda * running;
    rec.advantage = running;
    rec.norm_advantage = running;
    rec.value_target = rec.advantage + rec.value;
    next_value = rec.value;
  }
}

TransitionTerms transition_forward(Tape& tape, PolicyParams& params,
                                   const FeatureBundle& bundle, int action_index) {
  const Embeddings emb = dual_forward(tape, bundle, params);
  const Tape::Id pi =
      action_distribution(tape, actor_scores(tape, emb, bundle, params));
  TransitionTerms terms;
  terms.log_prob =
      tape.log_op(tape.slice_cols(pi, action_index, action_index + 1));
  terms.entropy = tape.scale(tape.sum_all(tape.mul(pi, tape.log_op(pi))), -1.0);
  terms.value = critic_value(tape, emb, params);
  return terms;
}

namespace {

void normalize_batch_advantages(std::span<Trajectory> trajectories) {
  double sum = 0.0;
  int count = 0;
  for (const Trajectory& traj : trajectories)
    for (const TransitionRecord& rec : traj.steps) {
      sum += rec.advantage;
      ++count;
    }
  if (count == 0) return;
  const double mean = sum / count;
  double var = 0.0;
  for (const Trajectory& traj : trajectories)
    for (const TransitionRecord& rec : traj.steps)
      var += (rec.advantage - mean) * (rec.advantage - mean);
  const double std_dev = std::sqrt(var / count);
  for (Trajectory& traj : trajectories)
    for (TransitionRecord& rec : traj.steps)
      rec.norm_advantage = (rec.advantage - mean) / (std_dev + 1e-8);
}

}  // namespace

UpdateStats ppo_update(PolicyParams& params, Adam& adam,
                       std::span<Trajectory> trajectories, const TrainConfig& config) {
  int total_transitions = 0;
  for (const Trajectory& traj : trajectories)
    total_transitions += static_cast<int>(traj.steps.size());
  if (total_transitions == 0) throw ContractViolation("ppo_update: empty batch");

  if (config.normalize_advantages) normalize_batch_advantages(trajectories);

  UpdateStats stats;
  for (int epoch = 0; epoch < config.k_epochs; ++epoch) {
    Tape tape;
    Tape::Id policy_sum = tape.scalar(0.0);
    Tape::Id value_sum = tape.scalar(0.0);
    Tape::Id entropy_sum = tape.scalar(0.0);
    double max_ratio_dev = 0.0;

    for (Trajectory& traj : trajectories) {
      for (TransitionRecord& rec : traj.steps) {
        const TransitionTerms terms =
            transition_forward(tape, params, rec.bundle, rec.action_index);
        const Tape::Id ratio = tape.exp_op(
            tape.sub(terms.log_prob, tape.scalar(rec.log_prob_old)));
        max_ratio_dev = std::max(max_ratio_dev, std::abs(tape.val(ratio).data[0] - 1.0));
        const Tape::Id adv = tape.scalar(rec.norm_advantage);
        const Tape::Id surrogate = tape.minimum(
            tape.mul(ratio, adv),
            tape.mul(tape.clamp(ratio, 1.0 - config.clip_eps, 1.0 + config.clip_eps),
                     adv));
        policy_sum = tape.add(policy_sum, surrogate);
        const Tape::Id err = tape.sub(terms.value, tape.scalar(rec.value_target));
        value_sum = tape.add(value_sum, tape.mul(err, err));
        entropy_sum = tape.add(entropy_sum, terms.entropy);
      }
    }

    const double inv = 1.0 / static_cast<double>(total_transitions);
    const Tape::Id policy_loss = tape.scale(policy_sum, -inv);
    const Tape::Id value_loss = tape.scale(value_sum, inv);
    const Tape::Id entropy_mean = tape.scale(entropy_sum, inv);
    const Tape::Id loss = tape.sub(
        tape.add(tape.scale(policy_loss, config.policy_coef),
                 tape.scale(value_loss, config.value_coef)),
        tape.scale(entropy_mean, config.entropy_coef));

    const double loss_value = tape.val(loss).data[0];
    if (!std::isfinite(loss_value)) {
      std::ostringstream os;
      os << "non-finite loss at epoch " << epoch + 1 << ": policy="
         << tape.val(policy_loss).data[0] << " value=" << tape.val(value_loss).data[0]
         << " entropy=" << tape.val(entropy_mean).data[0];
      throw std::runtime_error(os.str());
    }

    if (epoch == 0) {
      stats.policy_loss = tape.val(policy_loss).data[0];
      stats.value_loss = tape.val(value_loss).data[0];
      stats.entropy = tape.val(entropy_mean).data[0];
      stats.total_loss = loss_value;
      stats.max_ratio_deviation = max_ratio_dev;
    }

    adam.zero_grad();
    tape.backward(loss);
    adam.step();
  }
  return stats;
}

namespace {

namespace fs = std::filesystem;

std::vector<FjspInstance> make_instances(const TrainConfig& config, int count, Rng& rng) {
  std::vector<FjspInstance> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    Rng child = rng.split();
    out.push_back(generate_instance(config.generator, config.n_jobs, config.n_machines, child));
  }
  return out;
}

double greedy_validation_makespan(PolicyParams& params,
                                  std::span<const FjspInstance> instances) {
  double total = 0.0;
  for (const FjspInstance& inst : instances) {
    ScheduleState state(inst);
    while (!state.done()) {
      const FeatureBundle bundle = build_bundle(state);
      const PolicyOutput policy = evaluate_policy(bundle, params);
      const ActionChoice choice = select_action(policy.probs, Strategy::Greedy, nullptr);
      state.step(bundle.pairs[choice.index].action);
    }
    total += static_cast<double>(state.extract_schedule().makespan);
  }
  return total / static_cast<double>(instances.size());
}

struct TrainState {
  int next_episode = 1;
  double best_val = std::numeric_limits<double>::infinity();
  std::string instance_rng;
  std::string rollout_rng;
  std::vector<FjspInstance> batch;
};

void save_train_state(const std::string& path, PolicyParams& params, const Adam& adam,
                      const TrainState& ts, const TrainConfig& config) {
  std::vector<std::pair<std::string, const Tensor*>> tensors;
  auto named = params.named_tensors();
  for (auto& [name, tensor] : named) tensors.emplace_back(name, tensor);
  const auto& m = adam.first_moments();
  const auto& v = adam.second_moments();
  for (std::size_t i = 0; i < named.size(); ++i) {
    tensors.emplace_back("adam.m." + named[i].first, &m[i]);
    tensors.emplace_back("adam.v." + named[i].first, &v[i]);
  }

  nlohmann::json meta;
  meta["model"] = nlohmann::json::parse(config.model.to_json());
  meta["config"] = nlohmann::json::parse(config.to_json());
  meta["next_episode"] = ts.next_episode;
  meta["best_val"] = ts.best_val;
  meta["adam_steps"] = adam.steps_taken();
  meta["instance_rng"] = ts.instance_rng;
  meta["rollout_rng"] = ts.rollout_rng;
  nlohmann::json batch = nlohmann::json::array();
  for (const FjspInstance& inst : ts.batch)
    batch.push_back(nlohmann::json::parse(write_instance_json(inst)));
  meta["batch"] = batch;
  save_checkpoint(path, tensors, meta.dump(2));
}

void load_train_state(const std::string& path, PolicyParams& params, Adam& adam,
                      TrainState& ts) {
  LoadedCheckpoint loaded = load_checkpoint(path);
  const nlohmann::json meta = nlohmann::json::parse(loaded.metadata_json);

  auto named = params.named_tensors();
  std::vector<Tensor> m, v;
  for (auto& [name, tensor] : named) {
    const auto it = loaded.tensors.find(name);
    if (it == loaded.tensors.end())
      throw std::runtime_error("train state missing tensor " + name);
    tensor->data = it->second.data;
    m.push_back(loaded.tensors.at("adam.m." + name));
    v.push_back(loaded.tensors.at("adam.v." + name));
  }
  adam.restore(std::move(m), std::move(v), meta.at("adam_steps").get<std::int64_t>());

  ts.next_episode = meta.at("next_episode").get<int>();
  ts.best_val = meta.at("best_val").get<double>();
  ts.instance_rng = meta.at("instance_rng").get<std::string>();
  ts.rollout_rng = meta.at("rollout_rng").get<std::string>();
  ts.batch.clear();
  for (const auto& inst_doc : meta.at("batch"))
    ts.batch.push_back(parse_instance_json(inst_doc.dump()));
}

}  // namespace

TrainResult train(const TrainConfig& config, const std::string& out_dir, bool resume,
                  std::ostream* progress) {
  config.check();
  fs::create_directories(out_dir);
  const std::string best_path = (fs::path(out_dir) / "best.ckpt").string();
  const std::string last_path = (fs::path(out_dir) / "last.ckpt").string();
  const std::string state_path = (fs::path(out_dir) / "state.ckpt").string();
  const std::string log_path = (fs::path(out_dir) / "train_log.csv").string();

  Rng root(config.seed);
  Rng init_rng = root.split();
  Rng val_rng = root.split();
  Rng instance_rng = root.split();
  Rng rollout_rng = root.split();

  PolicyParams params = PolicyParams::init(config.model, init_rng);
  Adam adam(params.tensor_list(), AdamConfig{config.lr, 0.9, 0.999, 1e-8});

  // Fixed validation set, identical across resumes.
  const std::vector<FjspInstance> val_set =
      make_instances(config, config.val_instances, val_rng);

  TrainState ts;
  if (resume && fs::exists(state_path)) {
    load_train_state(state_path, params, adam, ts);
    instance_rng.restore_state(ts.instance_rng);
    rollout_rng.restore_state(ts.rollout_rng);
  } else {
    ts.batch = make_instances(config, config.batch_envs, instance_rng);
  }

  std::ofstream log_file(log_path, ts.next_episode > 1 ? std::ios::app : std::ios::trunc);
  if (!log_file) throw std::runtime_error("cannot write train log: " + log_path);
  if (ts.next_episode == 1) log_file << TrainLog::csv_header() << '\n';

  TrainResult result;
  auto training_meta = [&](int episode, double best_val) {
    nlohmann::json meta;
    meta["episode"] = episode;
    meta["best_val_makespan"] = best_val;
    meta["config"] = nlohmann::json::parse(config.to_json());
    return meta.dump(2);
  };

  for (int episode = ts.next_episode; episode <= config.n_ep; ++episode) {
    const auto start = std::chrono::steady_clock::now();

    if (episode > 1 && (episode - 1) % config.resample_every == 0)
      ts.batch = make_instances(config, config.batch_envs, instance_rng);

    std::vector<Trajectory> trajectories =
        collect_batch(params, ts.batch, rollout_rng, config.normalize_rewards);
    double return_sum = 0.0;
    for (Trajectory& traj : trajectories) {
      compute_gae(traj, config.gamma, config.lambda);
      long long raw = 0;
      for (const TransitionRecord& rec : traj.steps) raw += rec.reward_raw;
      return_sum += static_cast<double>(raw);
    }

    const UpdateStats stats = ppo_update(params, adam, trajectories, config);

    TrainLogRow row;
    row.episode = episode;
    row.mean_return = return_sum / static_cast<double>(trajectories.size());
    row.policy_loss = stats.policy_loss;
    row.value_loss = stats.value_loss;
    row.entropy = stats.entropy;

    if (episode % config.validate_every == 0 || episode == config.n_ep) {
      const double val = greedy_validation_makespan(params, val_set);
      row.val_makespan = val;
      if (val < ts.best_val) {
        ts.best_val = val;
        save_policy(best_path, params, training_meta(episode, ts.best_val));
      }
    }

    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                      .count();
    result.log.rows.push_back(row);
    log_file << TrainLog::csv_row(row) << '\n';
    log_file.flush();

    if (progress) {
      (*progress) << "episode " << episode << " return " << row.mean_return;
      if (row.val_makespan) (*progress) << " val " << *row.val_makespan;
      (*progress) << '\n';
    }

    ts.next_episode = episode + 1;
    ts.instance_rng = instance_rng.save_state();
    ts.rollout_rng = rollout_rng.save_state();
    save_train_state(state_path, params, adam, ts, config);
  }

  save_policy(last_path, params, training_meta(config.n_ep, ts.best_val));
  if (!fs::exists(best_path))
    save_policy(best_path, params, training_meta(config.n_ep, ts.best_val));

  result.best_checkpoint = best_path;
  result.last_checkpoint = last_path;
  result.best_val_makespan = ts.best_val;
  return result;
}

}  // namespace fjsp
