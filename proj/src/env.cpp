#include "fjsp/env.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace fjsp {

namespace {
constexpr long long kFar = std::numeric_limits<long long>::max() / 4;
}

ScheduleState::ScheduleState(const FjspInstance& inst) : inst_(&inst), ops_(inst) {
  spec_.reserve(ops_.total);
  for (int op = 0; op < ops_.total; ++op)
    spec_.push_back(&inst.jobs[ops_.job_of[op]].operations[ops_.pos_in_job[op]]);
  reset();
}

void ScheduleState::reset() {
  system_time_ = 0;
  scheduled_count_ = 0;
  assignment_.assign(ops_.total, Assignment{});
  machine_free_.assign(inst_->num_machines, 0);
  lower_bound_.assign(ops_.total, 0);
  for (int j = 0; j < inst_->num_jobs; ++j) recompute_lower_bounds_from(ops_.id(j, 0));
  initial_lower_bound_ = estimated_makespan();
  refresh_actions();
}

void ScheduleState::recompute_lower_bounds_from(int op) {
  const int job = ops_.job_of[op];
  const int last = ops_.id(job, ops_.ops_in_job(job) - 1);
  for (int o = op; o <= last; ++o) {
    if (scheduled(o)) {
      lower_bound_[o] = assignment_[o].completion;
    } else {
      const long long prev =
          ops_.pos_in_job[o] == 0 ? 0 : lower_bound_[o - 1];
      lower_bound_[o] = prev + spec_[o]->min_time();
    }
  }
}

long long ScheduleState::estimated_makespan() const {
  long long best = 0;
  for (long long lb : lower_bound_) best = std::max(best, lb);
  return best;
}

OpPhase ScheduleState::phase(int op) const {
  if (!scheduled(op)) return OpPhase::Unscheduled;
  return assignment_[op].completion <= system_time_ ? OpPhase::Completed
                                                    : OpPhase::Processing;
}

bool ScheduleState::ready(int op) const {
  if (ops_.pos_in_job[op] == 0) return true;
  const Assignment& pred = assignment_[op - 1];
  return pred.machine >= 0 && pred.completion <= system_time_;
}

long long ScheduleState::ready_time(int op) const {
  if (ops_.pos_in_job[op] == 0) return 0;
  return assignment_[op - 1].completion;
}

void ScheduleState::refresh_actions() {
  actions_.clear();
  candidates_.clear();
  for (int j = 0; j < inst_->num_jobs; ++j) {
    // Within a job only the first unscheduled operation can be dispatched.
    int op = -1;
    for (int o = ops_.first_of_job[j]; o < ops_.first_of_job[j + 1]; ++o)
      if (!scheduled(o)) {
        op = o;
        break;
      }
    if (op < 0 || !ready(op)) continue;
    bool any = false;
    for (const MachineOption& opt : spec_[op]->eligible)
      if (machine_free_[opt.machine] <= system_time_) {
        actions_.push_back({op, opt.machine});
        any = true;
      }
    if (any) candidates_.push_back(op);
  }
}

void ScheduleState::advance_time() {
  // Earliest moment >= T_s at which some frontier operation can start on
  // some compatible machine. All such moments are completion events.
  long long next = kFar;
  for (int j = 0; j < inst_->num_jobs; ++j) {
    int op = -1;
    for (int o = ops_.first_of_job[j]; o < ops_.first_of_job[j + 1]; ++o)
      if (!scheduled(o)) {
        op = o;
        break;
      }
    if (op < 0) continue;
    const long long pred_done = ops_.pos_in_job[op] == 0
                                    ? 0
                                    : assignment_[op - 1].completion;
    long long earliest_machine = kFar;
    for (const MachineOption& opt : spec_[op]->eligible)
      earliest_machine = std::min(earliest_machine, machine_free_[opt.machine]);
    next = std::min(next, std::max(pred_done, earliest_machine));
  }
  system_time_ = std::max(system_time_, next);
}

StepResult ScheduleState::step(const Action& a) {
  if (done()) throw ContractViolation("step on a finished rollout");
  if (std::find(actions_.begin(), actions_.end(), a) == actions_.end())
    throw ContractViolation("illegal action: operation " + std::to_string(a.op) +
                            " on machine " + std::to_string(a.machine));

  const long long before = estimated_makespan();

  const int time = *spec_[a.op]->time_on(a.machine);
  Assignment& slot = assignment_[a.op];
  slot.machine = a.machine;
  slot.start = system_time_;
  slot.completion = system_time_ + time;
  machine_free_[a.machine] = slot.completion;
  ++scheduled_count_;
  recompute_lower_bounds_from(a.op);

  StepResult result;
  result.reward = before - estimated_makespan();
  result.done = done();
  if (!result.done) {
    advance_time();
    refresh_actions();
  } else {
    actions_.clear();
    candidates_.clear();
  }
  return result;
}

std::vector<int> ScheduleState::relevant_ops() const {
  std::vector<int> out;
  for (int op = 0; op < ops_.total; ++op)
    if (phase(op) != OpPhase::Completed) out.push_back(op);
  return out;
}

std::vector<int> ScheduleState::relevant_machines() const {
  std::vector<bool> keep(inst_->num_machines, false);
  for (int op = 0; op < ops_.total; ++op)
    if (!scheduled(op))
      for (const MachineOption& opt : spec_[op]->eligible) keep[opt.machine] = true;
  std::vector<int> out;
  for (int m = 0; m < inst_->num_machines; ++m)
    if (keep[m]) out.push_back(m);
  return out;
}

ScheduleResult ScheduleState::extract_schedule() const {
  if (!done()) throw ContractViolation("extract_schedule before completion");
  ScheduleResult result;
  for (int op = 0; op < ops_.total; ++op) {
    const Assignment& a = assignment_[op];
    result.ops.push_back(
        {ops_.job_of[op], ops_.pos_in_job[op], a.machine, a.start, a.completion});
    result.makespan = std::max(result.makespan, a.completion);
  }
  return result;
}

std::vector<std::string> validate_schedule(const FjspInstance& inst,
                                           const ScheduleResult& result) {
  std::vector<std::string> problems;
  const OpIndex ops(inst);

  std::vector<const ScheduledOp*> by_op(ops.total, nullptr);
  for (const ScheduledOp& so : result.ops) {
    if (so.job < 0 || so.job >= inst.num_jobs ||
        so.pos < 0 || so.pos >= ops.ops_in_job(so.job)) {
      problems.push_back("schedule names a nonexistent operation");
      continue;
    }
    const int id = ops.id(so.job, so.pos);
    if (by_op[id]) problems.push_back("operation scheduled twice");
    by_op[id] = &so;
  }
  for (int op = 0; op < ops.total; ++op)
    if (!by_op[op]) {
      problems.push_back("operation (" + std::to_string(ops.job_of[op] + 1) + "," +
                         std::to_string(ops.pos_in_job[op] + 1) + ") missing");
      return problems;
    }

  long long makespan = 0;
  for (int op = 0; op < ops.total; ++op) {
    const ScheduledOp& so = *by_op[op];
    const OperationSpec& spec = inst.jobs[so.job].operations[so.pos];
    const auto time = spec.time_on(so.machine);
    if (!time) {
      problems.push_back("ineligible machine for (" + std::to_string(so.job + 1) + "," +
                         std::to_string(so.pos + 1) + ")");
      continue;
    }
    if (so.start < 0 || so.completion != so.start + *time)
      problems.push_back("inconsistent start/completion for (" +
                         std::to_string(so.job + 1) + "," + std::to_string(so.pos + 1) +
                         ")");
    if (so.pos > 0) {
      const ScheduledOp& pred = *by_op[op - 1];
      if (so.start < pred.completion)
        problems.push_back("precedence violated in job " + std::to_string(so.job + 1) +
                           " at operation " + std::to_string(so.pos + 1));
    }
    makespan = std::max(makespan, so.completion);
  }

  // Non-overlap per machine.
  std::vector<std::vector<const ScheduledOp*>> per_machine(inst.num_machines);
  for (int op = 0; op < ops.total; ++op) {
    const ScheduledOp& so = *by_op[op];
    if (so.machine >= 0 && so.machine < inst.num_machines)
      per_machine[so.machine].push_back(&so);
  }
  for (int m = 0; m < inst.num_machines; ++m) {
    auto& list = per_machine[m];
    std::sort(list.begin(), list.end(), [](const ScheduledOp* a, const ScheduledOp* b) {
      return a->start < b->start;
    });
    for (std::size_t i = 1; i < list.size(); ++i)
      if (list[i]->start < list[i - 1]->completion)
        problems.push_back("overlap on machine " + std::to_string(m + 1));
  }

  if (makespan != result.makespan)
    problems.push_back("stored makespan " + std::to_string(result.makespan) +
                       " != max completion " + std::to_string(makespan));
  return problems;
}

std::string gantt_csv(const ScheduleResult& result) {
  std::ostringstream out;
  out << "operation,job,machine,start,end\n";
  for (const ScheduledOp& so : result.ops)
    out << so.pos + 1 << ',' << so.job + 1 << ',' << so.machine + 1 << ',' << so.start
        << ',' << so.completion << '\n';
  return out.str();
}

std::string trace_json(const RolloutTrace& trace, const FjspInstance& inst) {
  const OpIndex ops(inst);
  nlohmann::json doc;
  doc["instance"] = trace.instance_name;
  doc["policy"] = trace.policy;
  doc["seed"] = trace.seed;
  doc["makespan"] = trace.makespan;
  nlohmann::json steps = nlohmann::json::array();
  for (std::size_t i = 0; i < trace.actions.size(); ++i) {
    const Action& a = trace.actions[i];
    nlohmann::json step;
    step["job"] = ops.job_of[a.op] + 1;
    step["op"] = ops.pos_in_job[a.op] + 1;
    step["machine"] = a.machine + 1;
    if (i < trace.rewards.size()) step["reward"] = trace.rewards[i];
    steps.push_back(step);
  }
  doc["steps"] = steps;
  return doc.dump(2) + "\n";
}

ScheduleResult replay_trace(const FjspInstance& inst, const std::vector<Action>& actions) {
  ScheduleState state(inst);
  for (const Action& a : actions) state.step(a);
  return state.extract_schedule();
}

}  // namespace fjsp
