#pragma once

#include <array>
#include <string>
#include <vector>

#include "fjsp/env.hpp"

namespace fjsp {

inline constexpr int kOpFeatureDim = 10;
inline constexpr int kMachFeatureDim = 8;
inline constexpr int kPairFeatureDim = 8;

// Competition edge between two relevant machines (k == q is the machine's
// own workload edge and is always present). candidate_rows lists the
// operation rows both machines can process that are currently dispatchable;
// raw_sum is the sum of their raw feature vectors (zeros when empty).
struct CompetitionEdge {
  int k = -1;  // machine row
  int q = -1;  // machine row
  std::vector<int> candidate_rows;
  std::array<double, kOpFeatureDim> raw_sum{};
};

struct PairEntry {
  Action action;
  int op_row = -1;
  int mach_row = -1;
};

// Snapshot of the decision-relevant state as dense matrices plus the index
// structure the attention blocks need. Row counts shrink as scheduling
// proceeds.
struct FeatureBundle {
  int num_ops = 0;
  int num_machines = 0;
  int num_pairs = 0;

  std::vector<double> op_feats;    // num_ops x kOpFeatureDim, row-major
  std::vector<double> mach_feats;  // num_machines x kMachFeatureDim
  std::vector<double> pair_feats;  // num_pairs x kPairFeatureDim

  std::vector<int> op_ids;       // row -> flat op id
  std::vector<int> machine_ids;  // row -> machine id
  std::vector<int> op_row_of;    // flat op id -> row, -1 if pruned
  std::vector<int> mach_row_of;  // machine id -> row, -1 if pruned

  std::vector<int> pred_row;  // per op row; -1 when absent or pruned
  std::vector<int> succ_row;

  std::vector<CompetitionEdge> edges;           // ordered pairs (k,q), self loops included
  std::vector<std::vector<int>> mach_neighbors;  // per machine row -> edge indices

  std::vector<PairEntry> pairs;  // row order matches pair_feats and actions()

  double normalizer = 1.0;  // initial estimated makespan of the rollout
};

// Raw (already normalized) feature vectors for a single entity.
std::array<double, kOpFeatureDim> op_features(const ScheduleState& state, int op);
std::array<double, kMachFeatureDim> machine_features(const ScheduleState& state,
                                                     int machine);
std::array<double, kPairFeatureDim> pair_features(const ScheduleState& state,
                                                  const Action& action);

FeatureBundle build_bundle(const ScheduleState& state);

std::string bundle_json(const FeatureBundle& bundle);

}  // namespace fjsp
