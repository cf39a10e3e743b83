#include "fjsp/solve.hpp"

#include <chrono>

#include "fjsp/features.hpp"

namespace fjsp {

SolvePolicy SolvePolicy::pdr(PdrRule rule) {
  SolvePolicy p;
  p.kind_ = Kind::Pdr;
  p.rule_ = rule;
  p.name_ = pdr_rule_name(rule);
  return p;
}

SolvePolicy SolvePolicy::learned(PolicyParams* params, std::string name) {
  if (!params) throw ContractViolation("SolvePolicy::learned: null params");
  SolvePolicy p;
  p.kind_ = Kind::Learned;
  p.params_ = params;
  p.name_ = std::move(name);
  return p;
}

SolvePolicy SolvePolicy::random() {
  SolvePolicy p;
  p.kind_ = Kind::Random;
  p.name_ = "random";
  return p;
}

Action SolvePolicy::decide(const ScheduleState& state, Strategy strategy, Rng* rng) const {
  switch (kind_) {
    case Kind::Pdr: {
      PdrPolicy policy{rule_, strategy == Strategy::Sample ? rng : nullptr};
      return pdr_action(policy, state);
    }
    case Kind::Learned: {
      const FeatureBundle bundle = build_bundle(state);
      const PolicyOutput out = evaluate_policy(bundle, *params_);
      const ActionChoice choice = select_action(out.probs, strategy, rng);
      return bundle.pairs[choice.index].action;
    }
    case Kind::Random: {
      const auto& actions = state.actions();
      if (strategy == Strategy::Greedy) return actions.front();
      if (!rng) throw ContractViolation("random policy sampling requires an rng");
      return actions[rng->uniform_int(0, static_cast<int>(actions.size()) - 1)];
    }
  }
  throw ContractViolation("unreachable policy kind");
}

namespace {

struct RolloutOutcome {
  long long makespan = 0;
  std::vector<Action> actions;
  std::vector<long long> rewards;
};

RolloutOutcome run_rollout(const SolvePolicy& policy, ScheduleState& state,
                           Strategy strategy, Rng* rng) {
  RolloutOutcome out;
  state.reset();
  while (!state.done()) {
    const Action a = policy.decide(state, strategy, rng);
    out.actions.push_back(a);
    out.rewards.push_back(state.step(a).reward);
  }
  out.makespan = state.extract_schedule().makespan;
  return out;
}

}  // namespace

SolveOutcome solve_instance(const SolvePolicy& policy, const FjspInstance& inst,
                            const SolveOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  ScheduleState state(inst);

  RolloutOutcome best = run_rollout(policy, state, Strategy::Greedy, nullptr);
  if (options.strategy == Strategy::Sample) {
    Rng root(options.seed);
    for (int s = 0; s < options.samples; ++s) {
      Rng rng = root.split();
      RolloutOutcome sampled = run_rollout(policy, state, Strategy::Sample, &rng);
      if (sampled.makespan < best.makespan) best = std::move(sampled);
    }
  }

  SolveOutcome outcome;
  outcome.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  outcome.schedule = replay_trace(inst, best.actions);
  outcome.makespan = outcome.schedule.makespan;
  if (options.keep_trace) {
    outcome.trace.instance_name = inst.meta.name;
    outcome.trace.policy = policy.name();
    outcome.trace.seed = options.seed;
    outcome.trace.actions = best.actions;
    outcome.trace.rewards = best.rewards;
    outcome.trace.makespan = best.makespan;
  }
  return outcome;
}

}  // namespace fjsp
