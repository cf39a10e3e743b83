#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fjsp/rng.hpp"

namespace fjsp {

// Machines are 0-based everywhere in memory; file formats use 1-based
// indices and the parser/writer translate at that boundary.
struct MachineOption {
  int machine = 0;
  int time = 0;

  friend bool operator==(const MachineOption&, const MachineOption&) = default;
};

struct OperationSpec {
  std::vector<MachineOption> eligible;  // sorted by machine index, unique

  std::optional<int> time_on(int machine) const;
  int min_time() const;
  int max_time() const;
  double avg_time() const;

  friend bool operator==(const OperationSpec&, const OperationSpec&) = default;
};

struct Job {
  std::vector<OperationSpec> operations;  // vector order is the precedence chain

  friend bool operator==(const Job&, const Job&) = default;
};

// Provenance carried by generated instances; not part of structural equality.
struct InstanceMeta {
  std::string name;
  std::string generator;
  std::uint64_t seed = 0;
};

struct FjspInstance {
  int num_jobs = 0;
  int num_machines = 0;
  std::vector<Job> jobs;
  InstanceMeta meta;

  int total_operations() const;
  double avg_flexibility() const;  // mean eligible-set size over all operations

  friend bool operator==(const FjspInstance& a, const FjspInstance& b) {
    return a.num_jobs == b.num_jobs && a.num_machines == b.num_machines &&
           a.jobs == b.jobs;
  }
};

// Flat operation numbering, job-major. Shared by the environment, the
// feature extractor and the solvers.
struct OpIndex {
  explicit OpIndex(const FjspInstance& inst);

  int total = 0;
  std::vector<int> first_of_job;  // size num_jobs + 1
  std::vector<int> job_of;        // size total
  std::vector<int> pos_in_job;    // size total

  int id(int job, int pos) const { return first_of_job[job] + pos; }
  int ops_in_job(int job) const { return first_of_job[job + 1] - first_of_job[job]; }
};

// Returns an empty vector when the instance is well formed; otherwise one
// message per violation with job/operation coordinates (1-based in text).
std::vector<std::string> validate(const FjspInstance& inst);

// Synthetic generators. Pure functions of (n, m, rng state).
FjspInstance gen_sd1(int n, int m, Rng& rng);  // requires m >= 2
FjspInstance gen_sd2(int n, int m, Rng& rng);

struct ParseError : std::runtime_error {
  ParseError(int line, int column, const std::string& what);
  int line;
  int column;
};

// Text format used by the published benchmark sets:
//   line 1:  <num_jobs> <num_machines> [<avg_flexibility>]
//   per job: <n_i> { <k_ij> { <machine> <time> } x k_ij } x n_i
FjspInstance parse_fjs(std::istream& in);
FjspInstance parse_fjs(const std::string& text);
std::string write_fjs(const FjspInstance& inst);

// Native JSON format; lossless, including generator metadata.
FjspInstance parse_instance_json(const std::string& text);
std::string write_instance_json(const FjspInstance& inst);

// Reads either format, chosen by file extension (.fjs or .json).
FjspInstance read_instance_file(const std::string& path);
void write_instance_file(const std::string& path, const FjspInstance& inst);

}  // namespace fjsp
