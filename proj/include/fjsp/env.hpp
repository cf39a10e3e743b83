#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fjsp/instance.hpp"

namespace fjsp {

// Contract faults: illegal action, querying a finished/unfinished state the
// wrong way round. Data problems (bad schedules) are reported as values.
struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

struct Action {
  int op = -1;       // flat operation id (OpIndex numbering)
  int machine = -1;  // 0-based

  friend bool operator==(const Action&, const Action&) = default;
};

struct Assignment {
  int machine = -1;
  long long start = -1;
  long long completion = -1;
};

enum class OpPhase { Unscheduled, Processing, Completed };

struct StepResult {
  long long reward = 0;  // drop in the estimated-makespan lower bound (<= 0)
  bool done = false;
};

struct ScheduledOp {
  int job = -1;
  int pos = -1;  // position within the job chain
  int machine = -1;
  long long start = -1;
  long long completion = -1;
};

struct ScheduleResult {
  std::vector<ScheduledOp> ops;
  long long makespan = 0;
};

// One rollout's mutable state. Decision points are the times at which at
// least one compatible (operation, machine) pair can start immediately;
// dispatching never inserts deliberate idle time, so the reachable set is
// the non-delay schedules.
class ScheduleState {
 public:
  // Holds a reference; the instance must outlive the state.
  explicit ScheduleState(const FjspInstance& inst);
  explicit ScheduleState(FjspInstance&&) = delete;

  void reset();
  StepResult step(const Action& a);

  bool done() const { return scheduled_count_ == ops_.total; }
  long long system_time() const { return system_time_; }
  int steps_taken() const { return scheduled_count_; }

  // A(t), recomputed after every transition.
  const std::vector<Action>& actions() const { return actions_; }
  // Operations that appear in A(t), each listed once.
  const std::vector<int>& candidate_ops() const { return candidates_; }

  // max over all operations of the completion-time lower bound.
  long long estimated_makespan() const;
  long long initial_estimated_makespan() const { return initial_lower_bound_; }
  long long lower_bound(int op) const { return lower_bound_[op]; }

  OpPhase phase(int op) const;
  bool scheduled(int op) const { return assignment_[op].machine >= 0; }
  const Assignment& assignment(int op) const { return assignment_[op]; }
  long long machine_free_at(int machine) const { return machine_free_[machine]; }

  // Completion time of the predecessor (0 for a job's first operation);
  // meaningful only once the predecessor is scheduled.
  bool ready(int op) const;
  long long ready_time(int op) const;

  std::vector<int> relevant_ops() const;       // O_u: everything not yet completed
  std::vector<int> relevant_machines() const;  // M_u: can still process unscheduled work

  const FjspInstance& instance() const { return *inst_; }
  const OpIndex& ops() const { return ops_; }

  ScheduleResult extract_schedule() const;  // requires done()

 private:
  void recompute_lower_bounds_from(int op);
  void advance_time();
  void refresh_actions();

  const FjspInstance* inst_;
  OpIndex ops_;
  std::vector<const OperationSpec*> spec_;  // flat op id -> spec

  long long system_time_ = 0;
  int scheduled_count_ = 0;
  std::vector<Assignment> assignment_;
  std::vector<long long> machine_free_;
  std::vector<long long> lower_bound_;
  long long initial_lower_bound_ = 0;
  std::vector<Action> actions_;
  std::vector<int> candidates_;
};

// Independent schedule checker: precedence, machine non-overlap, eligibility,
// completeness. Empty result means valid.
std::vector<std::string> validate_schedule(const FjspInstance& inst,
                                           const ScheduleResult& result);

std::string gantt_csv(const ScheduleResult& result);

// Replayable record of one rollout.
struct RolloutTrace {
  std::string instance_name;
  std::uint64_t seed = 0;
  std::string policy;
  std::vector<Action> actions;
  std::vector<long long> rewards;
  long long makespan = 0;
};

std::string trace_json(const RolloutTrace& trace, const FjspInstance& inst);

// Re-executes a trace against a fresh state; throws on illegal actions.
ScheduleResult replay_trace(const FjspInstance& inst, const std::vector<Action>& actions);

}  // namespace fjsp
