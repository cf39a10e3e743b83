#include "fjsp/features.hpp"

#include <algorithm>

#include "json.hpp"

namespace fjsp {

namespace {

double normalizer_of(const ScheduleState& state) {
  return static_cast<double>(std::max<long long>(1, state.initial_estimated_makespan()));
}

// Sum of average processing times over the job's unscheduled operations.
double job_remaining_workload(const ScheduleState& state, int job) {
  const OpIndex& ops = state.ops();
  const FjspInstance& inst = state.instance();
  double total = 0.0;
  for (int o = ops.first_of_job[job]; o < ops.first_of_job[job + 1]; ++o)
    if (!state.scheduled(o)) total += inst.jobs[job].operations[ops.pos_in_job[o]].avg_time();
  return total;
}

int job_remaining_ops(const ScheduleState& state, int job) {
  const OpIndex& ops = state.ops();
  int count = 0;
  for (int o = ops.first_of_job[job]; o < ops.first_of_job[job + 1]; ++o)
    if (!state.scheduled(o)) ++count;
  return count;
}

}  // namespace

std::array<double, kOpFeatureDim> op_features(const ScheduleState& state, int op) {
  const FjspInstance& inst = state.instance();
  const OpIndex& ops = state.ops();
  const int job = ops.job_of[op];
  const OperationSpec& spec = inst.jobs[job].operations[ops.pos_in_job[op]];
  const double norm = normalizer_of(state);
  const long long now = state.system_time();

  std::array<double, kOpFeatureDim> f{};
  f[0] = spec.min_time() / norm;
  f[1] = spec.avg_time() / norm;
  f[2] = (spec.max_time() - spec.min_time()) / norm;
  f[3] = static_cast<double>(spec.eligible.size()) / inst.num_machines;
  f[4] = state.scheduled(op) ? 1.0 : 0.0;
  f[5] = state.lower_bound(op) / norm;
  f[6] = job_remaining_ops(state, job);
  f[7] = job_remaining_workload(state, job) / norm;
  if (!state.scheduled(op) && state.ready(op))
    f[8] = (now - state.ready_time(op)) / norm;
  if (state.scheduled(op))
    f[9] = (state.assignment(op).completion - now) / norm;
  return f;
}

std::array<double, kMachFeatureDim> machine_features(const ScheduleState& state,
                                                     int machine) {
  const FjspInstance& inst = state.instance();
  const OpIndex& ops = state.ops();
  const double norm = normalizer_of(state);
  const long long now = state.system_time();

  // Static aggregates over every operation of the instance this machine can run.
  int min_time = 0;
  long long time_sum = 0;
  int processable = 0;
  int unscheduled = 0;
  for (int op = 0; op < ops.total; ++op) {
    const OperationSpec& spec =
        inst.jobs[ops.job_of[op]].operations[ops.pos_in_job[op]];
    const auto t = spec.time_on(machine);
    if (!t) continue;
    if (processable == 0 || *t < min_time) min_time = *t;
    time_sum += *t;
    ++processable;
    if (!state.scheduled(op)) ++unscheduled;
  }
  int candidates = 0;
  for (int op : state.candidate_ops()) {
    const OperationSpec& spec =
        inst.jobs[ops.job_of[op]].operations[ops.pos_in_job[op]];
    if (spec.time_on(machine)) ++candidates;
  }

  const long long free_at = state.machine_free_at(machine);
  const bool working = free_at > now;

  std::array<double, kMachFeatureDim> f{};
  f[0] = min_time / norm;
  f[1] = (processable == 0 ? 0.0 : static_cast<double>(time_sum) / processable) / norm;
  f[2] = unscheduled;
  f[3] = candidates;
  f[4] = free_at / norm;
  f[5] = working ? 0.0 : (now - free_at) / norm;
  f[6] = working ? 1.0 : 0.0;
  f[7] = working ? (free_at - now) / norm : 0.0;
  return f;
}

std::array<double, kPairFeatureDim> pair_features(const ScheduleState& state,
                                                  const Action& action) {
  const FjspInstance& inst = state.instance();
  const OpIndex& ops = state.ops();
  const int job = ops.job_of[action.op];
  const OperationSpec& spec = inst.jobs[job].operations[ops.pos_in_job[action.op]];
  const double norm = normalizer_of(state);
  const long long now = state.system_time();

  const double p = static_cast<double>(*spec.time_on(action.machine));

  double max_on_candidates = 0.0;  // over candidate ops this machine can run, time on it
  for (int op : state.candidate_ops()) {
    const OperationSpec& other = inst.jobs[ops.job_of[op]].operations[ops.pos_in_job[op]];
    if (const auto t = other.time_on(action.machine))
      max_on_candidates = std::max(max_on_candidates, static_cast<double>(*t));
  }
  double max_unscheduled = 0.0;           // over all unscheduled ops, any machine
  double max_unscheduled_on_mach = 0.0;   // over unscheduled ops, time on this machine
  for (int op = 0; op < ops.total; ++op) {
    if (state.scheduled(op)) continue;
    const OperationSpec& other = inst.jobs[ops.job_of[op]].operations[ops.pos_in_job[op]];
    max_unscheduled = std::max(max_unscheduled, static_cast<double>(other.max_time()));
    if (const auto t = other.time_on(action.machine))
      max_unscheduled_on_mach = std::max(max_unscheduled_on_mach, static_cast<double>(*t));
  }
  double max_pair = 0.0;  // over the whole action set
  for (const Action& a : state.actions()) {
    const OperationSpec& other =
        inst.jobs[ops.job_of[a.op]].operations[ops.pos_in_job[a.op]];
    max_pair = std::max(max_pair, static_cast<double>(*other.time_on(a.machine)));
  }

  const double op_wait =
      (!state.scheduled(action.op) && state.ready(action.op))
          ? static_cast<double>(now - state.ready_time(action.op))
          : 0.0;
  const long long free_at = state.machine_free_at(action.machine);
  const double mach_wait = free_at > now ? 0.0 : static_cast<double>(now - free_at);

  std::array<double, kPairFeatureDim> f{};
  f[0] = p / norm;
  f[1] = p / spec.max_time();
  f[2] = p / max_on_candidates;
  f[3] = p / max_unscheduled;
  f[4] = p / max_unscheduled_on_mach;
  f[5] = p / max_pair;
  f[6] = p / job_remaining_workload(state, job);
  f[7] = (op_wait + mach_wait) / norm;
  return f;
}

FeatureBundle build_bundle(const ScheduleState& state) {
  if (state.done()) throw ContractViolation("build_bundle on a finished rollout");

  const FjspInstance& inst = state.instance();
  const OpIndex& ops = state.ops();

  FeatureBundle b;
  b.normalizer = normalizer_of(state);

  const std::vector<int> relevant = state.relevant_ops();
  const std::vector<int> machines = state.relevant_machines();
  b.num_ops = static_cast<int>(relevant.size());
  b.num_machines = static_cast<int>(machines.size());

  b.op_ids = relevant;
  b.machine_ids = machines;
  b.op_row_of.assign(ops.total, -1);
  for (int row = 0; row < b.num_ops; ++row) b.op_row_of[relevant[row]] = row;
  b.mach_row_of.assign(inst.num_machines, -1);
  for (int row = 0; row < b.num_machines; ++row) b.mach_row_of[machines[row]] = row;

  b.op_feats.resize(static_cast<std::size_t>(b.num_ops) * kOpFeatureDim);
  b.pred_row.assign(b.num_ops, -1);
  b.succ_row.assign(b.num_ops, -1);
  for (int row = 0; row < b.num_ops; ++row) {
    const int op = relevant[row];
    const auto f = op_features(state, op);
    std::copy(f.begin(), f.end(), b.op_feats.begin() + row * kOpFeatureDim);
    const int pos = ops.pos_in_job[op];
    if (pos > 0) b.pred_row[row] = b.op_row_of[op - 1];
    if (pos + 1 < ops.ops_in_job(ops.job_of[op])) b.succ_row[row] = b.op_row_of[op + 1];
  }

  b.mach_feats.resize(static_cast<std::size_t>(b.num_machines) * kMachFeatureDim);
  for (int row = 0; row < b.num_machines; ++row) {
    const auto f = machine_features(state, machines[row]);
    std::copy(f.begin(), f.end(), b.mach_feats.begin() + row * kMachFeatureDim);
  }

  const std::vector<Action>& actions = state.actions();
  b.num_pairs = static_cast<int>(actions.size());
  b.pair_feats.resize(static_cast<std::size_t>(b.num_pairs) * kPairFeatureDim);
  for (int row = 0; row < b.num_pairs; ++row) {
    const auto f = pair_features(state, actions[row]);
    std::copy(f.begin(), f.end(), b.pair_feats.begin() + row * kPairFeatureDim);
    b.pairs.push_back(
        {actions[row], b.op_row_of[actions[row].op], b.mach_row_of[actions[row].machine]});
  }

  // Competition structure: for each pair of relevant machines, the
  // unscheduled operations both can process; candidate rows are the subset
  // that is currently dispatchable.
  std::vector<bool> is_candidate(ops.total, false);
  for (int op : state.candidate_ops()) is_candidate[op] = true;

  std::vector<std::vector<int>> unscheduled_on(b.num_machines);
  for (int op = 0; op < ops.total; ++op) {
    if (state.scheduled(op)) continue;
    const OperationSpec& spec =
        inst.jobs[ops.job_of[op]].operations[ops.pos_in_job[op]];
    for (const MachineOption& opt : spec.eligible) {
      const int row = b.mach_row_of[opt.machine];
      if (row >= 0) unscheduled_on[row].push_back(op);
    }
  }

  b.mach_neighbors.resize(b.num_machines);
  for (int k = 0; k < b.num_machines; ++k) {
    for (int q = 0; q < b.num_machines; ++q) {
      std::vector<int> shared;
      std::set_intersection(unscheduled_on[k].begin(), unscheduled_on[k].end(),
                            unscheduled_on[q].begin(), unscheduled_on[q].end(),
                            std::back_inserter(shared));
      if (shared.empty()) continue;
      CompetitionEdge edge;
      edge.k = k;
      edge.q = q;
      for (int op : shared) {
        if (!is_candidate[op]) continue;
        const int row = b.op_row_of[op];
        edge.candidate_rows.push_back(row);
        for (int d = 0; d < kOpFeatureDim; ++d)
          edge.raw_sum[d] += b.op_feats[row * kOpFeatureDim + d];
      }
      b.mach_neighbors[k].push_back(static_cast<int>(b.edges.size()));
      b.edges.push_back(std::move(edge));
    }
  }
  return b;
}

std::string bundle_json(const FeatureBundle& b) {
  nlohmann::json doc;
  doc["num_ops"] = b.num_ops;
  doc["num_machines"] = b.num_machines;
  doc["num_pairs"] = b.num_pairs;
  doc["normalizer"] = b.normalizer;

  auto matrix = [](const std::vector<double>& flat, int rows, int cols) {
    nlohmann::json m = nlohmann::json::array();
    for (int r = 0; r < rows; ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (int c = 0; c < cols; ++c) row.push_back(flat[r * cols + c]);
      m.push_back(row);
    }
    return m;
  };
  doc["op_feats"] = matrix(b.op_feats, b.num_ops, kOpFeatureDim);
  doc["mach_feats"] = matrix(b.mach_feats, b.num_machines, kMachFeatureDim);
  doc["pair_feats"] = matrix(b.pair_feats, b.num_pairs, kPairFeatureDim);
  doc["op_ids"] = b.op_ids;
  doc["machine_ids"] = b.machine_ids;
  doc["pred_row"] = b.pred_row;
  doc["succ_row"] = b.succ_row;

  nlohmann::json edges = nlohmann::json::array();
  for (const CompetitionEdge& e : b.edges) {
    nlohmann::json edge;
    edge["k"] = e.k;
    edge["q"] = e.q;
    edge["candidate_rows"] = e.candidate_rows;
    edge["raw_sum"] = e.raw_sum;
    edges.push_back(edge);
  }
  doc["competition"] = edges;

  nlohmann::json pairs = nlohmann::json::array();
  for (const PairEntry& p : b.pairs) {
    nlohmann::json pair;
    pair["op_row"] = p.op_row;
    pair["mach_row"] = p.mach_row;
    pair["machine"] = p.action.machine + 1;
    pairs.push_back(pair);
  }
  doc["pairs"] = pairs;
  return doc.dump(2) + "\n";
}

}  // namespace fjsp
