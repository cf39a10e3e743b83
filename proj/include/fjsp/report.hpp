#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fjsp {

struct EvalRow {
  std::string policy;
  std::string instance;
  long long makespan = 0;
  double seconds = 0.0;
  std::optional<double> reference;  // oracle or best-known value
  std::optional<double> gap;        // (makespan - reference) / reference
};

struct PolicyAggregate {
  std::string policy;
  int instances = 0;
  double mean_objective = 0.0;
  std::optional<double> mean_gap;
  double mean_seconds = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::vector<PolicyAggregate> aggregates;
  std::map<std::string, std::string> provenance;
};

// Computes per-row gaps (where references exist) and per-policy aggregates.
EvalReport build_report(std::vector<EvalRow> rows,
                        std::map<std::string, std::string> provenance);

std::string report_csv(const EvalReport& report);
std::string report_json(const EvalReport& report);

// FNV-1a, used to stamp reports with config/checkpoint identities.
std::uint64_t fnv1a(const std::string& bytes);
std::string hash_hex(const std::string& bytes);
std::string file_hash_hex(const std::string& path);

// Best-known values file: JSON object mapping instance name -> value.
std::map<std::string, double> read_best_known(const std::string& path);

}  // namespace fjsp
