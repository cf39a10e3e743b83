#pragma once

#include <cstdint>

#include "fjsp/env.hpp"

namespace fjsp {

struct OracleResult {
  long long makespan = 0;
  ScheduleResult schedule;
  std::uint64_t nodes = 0;
  bool proven = false;  // search space exhausted within budget
};

struct OracleBudget {
  std::uint64_t max_nodes = 50'000'000;
  double max_seconds = 120.0;
};

// Depth-first branch and bound over machine assignments and per-machine
// operation orders. Each branch starts an operation as early as its job and
// machine allow, which enumerates the semi-active schedules; that set
// contains an optimum and, unlike the dispatching environment, includes
// schedules where a machine waits for a better operation. Pruned by
// admissible job-tail and committed-machine bounds.
OracleResult solve_exact(const FjspInstance& inst, const OracleBudget& budget = {});

}  // namespace fjsp
