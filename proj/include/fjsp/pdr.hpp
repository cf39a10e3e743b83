#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fjsp/env.hpp"
#include "fjsp/rng.hpp"

namespace fjsp {

enum class PdrRule { Fifo, Mopnr, Spt, Mwkr };

std::optional<PdrRule> pdr_rule_from_name(const std::string& name);
std::string pdr_rule_name(PdrRule rule);

// Ties are broken lexicographically by (job, op position, machine) in
// deterministic mode, or uniformly at random among the tied set when an rng
// is supplied.
struct PdrPolicy {
  PdrRule rule = PdrRule::Spt;
  Rng* tie_break_rng = nullptr;  // null -> deterministic
};

Action pdr_action(const PdrPolicy& policy, const ScheduleState& state);

// Full rollout; state must be freshly reset.
ScheduleResult pdr_rollout(const PdrPolicy& policy, ScheduleState& state);

struct PdrStats {
  std::vector<long long> makespans;  // one per run
  double mean = 0.0;
  long long best = 0;
};

// Independent seeded runs with random tie-breaking, or identical
// lexicographic runs when deterministic_ties is set.
PdrStats pdr_solve(PdrRule rule, const FjspInstance& inst, int runs, std::uint64_t seed,
                   bool deterministic_ties = false);

}  // namespace fjsp
