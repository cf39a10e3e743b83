#include "fjsp/oracle.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <vector>

namespace fjsp {

namespace {

struct Search {
  const FjspInstance& inst;
  const OpIndex ops;
  const OracleBudget budget;
  std::chrono::steady_clock::time_point deadline;

  std::vector<int> next_pos;          // per job, next unscheduled position
  std::vector<long long> job_ready;   // completion of the job's last scheduled op
  std::vector<long long> mach_free;   // per machine
  std::vector<long long> min_tail;    // per op: sum of min times from op to job end
  std::vector<long long> mandatory;   // per machine: remaining single-machine work
  std::vector<ScheduledOp> partial;

  int remaining = 0;
  long long best = std::numeric_limits<long long>::max();
  std::vector<ScheduledOp> best_schedule;
  std::uint64_t nodes = 0;
  bool exhausted = true;

  explicit Search(const FjspInstance& i, const OracleBudget& b)
      : inst(i), ops(i), budget(b) {
    deadline = std::chrono::steady_clock::now() +
               std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                   std::chrono::duration<double>(budget.max_seconds));
    next_pos.assign(inst.num_jobs, 0);
    job_ready.assign(inst.num_jobs, 0);
    mach_free.assign(inst.num_machines, 0);
    remaining = ops.total;

    min_tail.assign(ops.total, 0);
    for (int j = 0; j < inst.num_jobs; ++j) {
      long long tail = 0;
      for (int p = ops.ops_in_job(j) - 1; p >= 0; --p) {
        tail += inst.jobs[j].operations[p].min_time();
        min_tail[ops.id(j, p)] = tail;
      }
    }
    mandatory.assign(inst.num_machines, 0);
    for (int j = 0; j < inst.num_jobs; ++j)
      for (const OperationSpec& op : inst.jobs[j].operations)
        if (op.eligible.size() == 1)
          mandatory[op.eligible.front().machine] += op.eligible.front().time;
  }

  long long lower_bound(long long current_max) const {
    long long lb = current_max;
    for (int j = 0; j < inst.num_jobs; ++j)
      if (next_pos[j] < ops.ops_in_job(j))
        lb = std::max(lb, job_ready[j] + min_tail[ops.id(j, next_pos[j])]);
    for (int m = 0; m < inst.num_machines; ++m)
      lb = std::max(lb, mach_free[m] + mandatory[m]);
    return lb;
  }

  bool out_of_budget() {
    if (nodes >= budget.max_nodes) return true;
    if ((nodes & 0xfff) == 0 && std::chrono::steady_clock::now() > deadline) return true;
    return false;
  }

  void dfs(long long current_max) {
    ++nodes;
    if (remaining == 0) {
      if (current_max < best) {
        best = current_max;
        best_schedule = partial;
      }
      return;
    }
    if (out_of_budget()) {
      exhausted = false;
      return;
    }
    if (lower_bound(current_max) >= best) return;

    struct Child {
      int job;
      int machine;
      int time;
      long long start;
    };
    std::vector<Child> children;
    for (int j = 0; j < inst.num_jobs; ++j) {
      if (next_pos[j] >= ops.ops_in_job(j)) continue;
      const OperationSpec& spec = inst.jobs[j].operations[next_pos[j]];
      for (const MachineOption& opt : spec.eligible) {
        const long long start = std::max(job_ready[j], mach_free[opt.machine]);
        children.push_back({j, opt.machine, opt.time, start});
      }
    }
    // Explore promising dispatches first so the incumbent tightens quickly.
    std::sort(children.begin(), children.end(), [](const Child& a, const Child& b) {
      return a.start + a.time < b.start + b.time;
    });

    for (const Child& c : children) {
      const long long completion = c.start + c.time;
      const long long child_max = std::max(current_max, completion);
      if (child_max >= best) continue;

      const int pos = next_pos[c.job];
      const long long prev_ready = job_ready[c.job];
      const long long prev_free = mach_free[c.machine];
      const OperationSpec& spec = inst.jobs[c.job].operations[pos];
      const long long prev_mandatory = mandatory[c.machine];
      if (spec.eligible.size() == 1) mandatory[c.machine] -= c.time;

      next_pos[c.job] = pos + 1;
      job_ready[c.job] = completion;
      mach_free[c.machine] = completion;
      --remaining;
      partial.push_back({c.job, pos, c.machine, c.start, completion});

      dfs(child_max);

      partial.pop_back();
      ++remaining;
      next_pos[c.job] = pos;
      job_ready[c.job] = prev_ready;
      mach_free[c.machine] = prev_free;
      mandatory[c.machine] = prev_mandatory;

      if (!exhausted) return;
    }
  }
};

// Cheap incumbent: repeatedly dispatch the earliest-completing frontier pair.
long long greedy_upper_bound(const FjspInstance& inst, std::vector<ScheduledOp>& out) {
  const OpIndex ops(inst);
  std::vector<int> next_pos(inst.num_jobs, 0);
  std::vector<long long> job_ready(inst.num_jobs, 0);
  std::vector<long long> mach_free(inst.num_machines, 0);
  long long makespan = 0;
  for (int step = 0; step < ops.total; ++step) {
    int best_job = -1, best_machine = -1;
    long long best_start = 0, best_completion = std::numeric_limits<long long>::max();
    for (int j = 0; j < inst.num_jobs; ++j) {
      if (next_pos[j] >= ops.ops_in_job(j)) continue;
      for (const MachineOption& opt : inst.jobs[j].operations[next_pos[j]].eligible) {
        const long long start = std::max(job_ready[j], mach_free[opt.machine]);
        if (start + opt.time < best_completion) {
          best_completion = start + opt.time;
          best_start = start;
          best_job = j;
          best_machine = opt.machine;
        }
      }
    }
    out.push_back({best_job, next_pos[best_job], best_machine, best_start, best_completion});
    job_ready[best_job] = best_completion;
    mach_free[best_machine] = best_completion;
    ++next_pos[best_job];
    makespan = std::max(makespan, best_completion);
  }
  return makespan;
}

}  // namespace

OracleResult solve_exact(const FjspInstance& inst, const OracleBudget& budget) {
  Search search(inst, budget);

  // Seed the incumbent so equal-cost branches can be pruned immediately.
  std::vector<ScheduledOp> greedy;
  search.best = greedy_upper_bound(inst, greedy);
  search.best_schedule = greedy;

  search.dfs(0);

  OracleResult result;
  result.makespan = search.best;
  result.schedule.ops = search.best_schedule;
  result.schedule.makespan = search.best;
  result.nodes = search.nodes;
  result.proven = search.exhausted;
  return result;
}

}  // namespace fjsp
