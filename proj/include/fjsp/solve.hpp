#pragma once

#include <string>

#include "fjsp/dan.hpp"
#include "fjsp/env.hpp"
#include "fjsp/pdr.hpp"

namespace fjsp {

// One interface over dispatching rules, the learned policy, and a uniform
// random baseline, so rollouts and reports treat them alike.
class SolvePolicy {
 public:
  static SolvePolicy pdr(PdrRule rule);
  static SolvePolicy learned(PolicyParams* params, std::string name = "dan");
  static SolvePolicy random();

  // Greedy is deterministic; Sample randomizes (tie-breaks for rules,
  // categorical draws for the learned policy). rng may be null for Greedy.
  Action decide(const ScheduleState& state, Strategy strategy, Rng* rng) const;
  const std::string& name() const { return name_; }

 private:
  enum class Kind { Pdr, Learned, Random };
  Kind kind_ = Kind::Random;
  PdrRule rule_ = PdrRule::Spt;
  PolicyParams* params_ = nullptr;
  std::string name_;
};

struct SolveOptions {
  Strategy strategy = Strategy::Greedy;
  int samples = 100;  // stochastic rollouts when strategy == Sample
  std::uint64_t seed = 0;
  bool keep_trace = false;
};

struct SolveOutcome {
  long long makespan = 0;
  ScheduleResult schedule;
  double seconds = 0.0;  // rollout time only
  RolloutTrace trace;    // of the best rollout, when requested
};

// Sample strategy runs `samples` seeded rollouts plus one greedy rollout and
// keeps the best, so sampling can never lose to greedy.
SolveOutcome solve_instance(const SolvePolicy& policy, const FjspInstance& inst,
                            const SolveOptions& options);

}  // namespace fjsp
