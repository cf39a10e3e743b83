#include "fjsp/pdr.hpp"

#include <algorithm>
#include <limits>
#include <tuple>

namespace fjsp {

std::optional<PdrRule> pdr_rule_from_name(const std::string& name) {
  if (name == "fifo") return PdrRule::Fifo;
  if (name == "mopnr") return PdrRule::Mopnr;
  if (name == "spt") return PdrRule::Spt;
  if (name == "mwkr") return PdrRule::Mwkr;
  return std::nullopt;
}

std::string pdr_rule_name(PdrRule rule) {
  switch (rule) {
    case PdrRule::Fifo: return "fifo";
    case PdrRule::Mopnr: return "mopnr";
    case PdrRule::Spt: return "spt";
    case PdrRule::Mwkr: return "mwkr";
  }
  return "?";
}

namespace {

// Lexicographic (job, position, machine) order for deterministic ties.
bool action_less(const ScheduleState& state, const Action& a, const Action& b) {
  const OpIndex& ops = state.ops();
  const auto ka = std::tuple(ops.job_of[a.op], ops.pos_in_job[a.op], a.machine);
  const auto kb = std::tuple(ops.job_of[b.op], ops.pos_in_job[b.op], b.machine);
  return ka < kb;
}

Action break_tie(const PdrPolicy& policy, const ScheduleState& state,
                 std::vector<Action>& tied) {
  if (policy.tie_break_rng && tied.size() > 1)
    return tied[policy.tie_break_rng->uniform_int(0, static_cast<int>(tied.size()) - 1)];
  return *std::min_element(tied.begin(), tied.end(),
                           [&](const Action& a, const Action& b) {
                             return action_less(state, a, b);
                           });
}

int proc_time(const ScheduleState& state, const Action& a) {
  const OpIndex& ops = state.ops();
  return *state.instance()
              .jobs[ops.job_of[a.op]]
              .operations[ops.pos_in_job[a.op]]
              .time_on(a.machine);
}

// Highest-priority operations first, then the machine able to start it now
// with the smallest processing time (FIFO instead prefers the machine that
// has been idle the longest).
template <typename Priority>
Action select_by_op_priority(const PdrPolicy& policy, const ScheduleState& state,
                             Priority priority, bool fifo_machine) {
  const std::vector<Action>& actions = state.actions();

  double best_priority = -std::numeric_limits<double>::infinity();
  for (int op : state.candidate_ops())
    best_priority = std::max(best_priority, priority(op));

  std::vector<Action> best;
  std::optional<long long> best_key;
  for (const Action& a : actions) {
    if (priority(a.op) != best_priority) continue;
    const long long key = fifo_machine
                              ? state.machine_free_at(a.machine)  // earliest ready
                              : proc_time(state, a);              // fastest
    if (!best_key || key < *best_key) {
      best_key = key;
      best.clear();
    }
    if (key == *best_key) best.push_back(a);
  }
  return break_tie(policy, state, best);
}

}  // namespace

Action pdr_action(const PdrPolicy& policy, const ScheduleState& state) {
  if (state.done()) throw ContractViolation("pdr_action on finished rollout");
  const OpIndex& ops = state.ops();
  const FjspInstance& inst = state.instance();

  switch (policy.rule) {
    case PdrRule::Spt: {
      std::vector<Action> best;
      int best_time = 0;
      for (const Action& a : state.actions()) {
        const int t = proc_time(state, a);
        if (best.empty() || t < best_time) {
          best_time = t;
          best.clear();
        }
        if (t == best_time) best.push_back(a);
      }
      return break_tie(policy, state, best);
    }
    case PdrRule::Fifo: {
      // Earliest ready candidate; readiness is the moment the predecessor
      // finished (0 for a job's first operation).
      auto priority = [&](int op) {
        return -static_cast<double>(state.ready_time(op));
      };
      return select_by_op_priority(policy, state, priority, /*fifo_machine=*/true);
    }
    case PdrRule::Mopnr: {
      auto priority = [&](int op) {
        const int job = ops.job_of[op];
        return static_cast<double>(ops.ops_in_job(job) - 1 - ops.pos_in_job[op]);
      };
      return select_by_op_priority(policy, state, priority, /*fifo_machine=*/false);
    }
    case PdrRule::Mwkr: {
      auto priority = [&](int op) {
        const int job = ops.job_of[op];
        double workload = 0.0;
        for (int o = ops.first_of_job[job]; o < ops.first_of_job[job + 1]; ++o)
          if (!state.scheduled(o))
            workload += inst.jobs[job].operations[ops.pos_in_job[o]].avg_time();
        return workload;
      };
      return select_by_op_priority(policy, state, priority, /*fifo_machine=*/false);
    }
  }
  throw ContractViolation("unknown rule");
}

ScheduleResult pdr_rollout(const PdrPolicy& policy, ScheduleState& state) {
  while (!state.done()) state.step(pdr_action(policy, state));
  return state.extract_schedule();
}

PdrStats pdr_solve(PdrRule rule, const FjspInstance& inst, int runs, std::uint64_t seed,
                   bool deterministic_ties) {
  if (runs < 1) throw ContractViolation("pdr_solve: runs must be >= 1");
  PdrStats stats;
  Rng root(seed);
  ScheduleState state(inst);
  for (int r = 0; r < runs; ++r) {
    Rng rng = root.split();
    PdrPolicy policy{rule, deterministic_ties ? nullptr : &rng};
    state.reset();
    stats.makespans.push_back(pdr_rollout(policy, state).makespan);
  }
  double sum = 0.0;
  stats.best = stats.makespans.front();
  for (long long mk : stats.makespans) {
    sum += static_cast<double>(mk);
    stats.best = std::min(stats.best, mk);
  }
  stats.mean = sum / static_cast<double>(runs);
  return stats;
}

}  // namespace fjsp
