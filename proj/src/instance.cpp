#include "fjsp/instance.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace fjsp {

std::optional<int> OperationSpec::time_on(int machine) const {
  for (const auto& opt : eligible)
    if (opt.machine == machine) return opt.time;
  return std::nullopt;
}

int OperationSpec::min_time() const {
  int best = eligible.front().time;
  for (const auto& opt : eligible) best = std::min(best, opt.time);
  return best;
}

int OperationSpec::max_time() const {
  int best = eligible.front().time;
  for (const auto& opt : eligible) best = std::max(best, opt.time);
  return best;
}

double OperationSpec::avg_time() const {
  long long sum = 0;
  for (const auto& opt : eligible) sum += opt.time;
  return static_cast<double>(sum) / static_cast<double>(eligible.size());
}

int FjspInstance::total_operations() const {
  int total = 0;
  for (const auto& job : jobs) total += static_cast<int>(job.operations.size());
  return total;
}

double FjspInstance::avg_flexibility() const {
  long long options = 0;
  int ops = 0;
  for (const auto& job : jobs)
    for (const auto& op : job.operations) {
      options += static_cast<long long>(op.eligible.size());
      ++ops;
    }
  return ops == 0 ? 0.0 : static_cast<double>(options) / static_cast<double>(ops);
}

OpIndex::OpIndex(const FjspInstance& inst) {
  first_of_job.reserve(inst.jobs.size() + 1);
  first_of_job.push_back(0);
  for (int j = 0; j < static_cast<int>(inst.jobs.size()); ++j) {
    const int count = static_cast<int>(inst.jobs[j].operations.size());
    for (int p = 0; p < count; ++p) {
      job_of.push_back(j);
      pos_in_job.push_back(p);
    }
    first_of_job.push_back(first_of_job.back() + count);
  }
  total = first_of_job.back();
}

std::vector<std::string> validate(const FjspInstance& inst) {
  std::vector<std::string> violations;
  auto where = [](int job, int op) {
    return "(" + std::to_string(job + 1) + "," + std::to_string(op + 1) + ")";
  };

  if (inst.num_jobs < 1) violations.push_back("num_jobs must be positive");
  if (inst.num_machines < 1) violations.push_back("num_machines must be positive");
  if (static_cast<int>(inst.jobs.size()) != inst.num_jobs)
    violations.push_back("job count " + std::to_string(inst.jobs.size()) +
                         " does not match num_jobs " + std::to_string(inst.num_jobs));

  for (int j = 0; j < static_cast<int>(inst.jobs.size()); ++j) {
    const Job& job = inst.jobs[j];
    if (job.operations.empty())
      violations.push_back("job " + std::to_string(j + 1) + " has no operations");
    for (int p = 0; p < static_cast<int>(job.operations.size()); ++p) {
      const OperationSpec& op = job.operations[p];
      if (op.eligible.empty()) {
        violations.push_back("empty machine set at " + where(j, p));
        continue;
      }
      int prev_machine = -1;
      for (const auto& opt : op.eligible) {
        if (opt.machine < 0 || opt.machine >= inst.num_machines)
          violations.push_back("machine index out of range at " + where(j, p));
        if (opt.machine <= prev_machine)
          violations.push_back("unsorted or duplicate machine at " + where(j, p));
        prev_machine = opt.machine;
        if (opt.time < 1)
          violations.push_back("non-positive time at " + where(j, p));
      }
    }
  }
  return violations;
}

namespace {

// Uniform random subset of {0..m-1} with |subset| = size, returned sorted.
std::vector<int> random_machine_subset(int m, int size, Rng& rng) {
  std::vector<int> pool(m);
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < size; ++i) {
    const int j = rng.uniform_int(i, m - 1);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(size);
  std::sort(pool.begin(), pool.end());
  return pool;
}

OperationSpec random_operation(int m, int max_time, Rng& rng) {
  const int set_size = rng.uniform_int(1, m);
  OperationSpec op;
  for (int machine : random_machine_subset(m, set_size, rng))
    op.eligible.push_back({machine, rng.uniform_int(1, max_time)});
  return op;
}

}  // namespace

FjspInstance gen_sd1(int n, int m, Rng& rng) {
  if (n < 1 || m < 2) throw std::invalid_argument("gen_sd1: need n >= 1, m >= 2");
  FjspInstance inst;
  inst.num_jobs = n;
  inst.num_machines = m;
  inst.meta.generator = "sd1";
  const int lo_ops = std::max(1, m - 2);
  const int hi_ops = m + 2;
  for (int j = 0; j < n; ++j) {
    Job job;
    const int ops = rng.uniform_int(lo_ops, hi_ops);
    for (int p = 0; p < ops; ++p) job.operations.push_back(random_operation(m, 20, rng));
    inst.jobs.push_back(std::move(job));
  }
  return inst;
}

FjspInstance gen_sd2(int n, int m, Rng& rng) {
  if (n < 1 || m < 1) throw std::invalid_argument("gen_sd2: need n >= 1, m >= 1");
  FjspInstance inst;
  inst.num_jobs = n;
  inst.num_machines = m;
  inst.meta.generator = "sd2";
  for (int j = 0; j < n; ++j) {
    Job job;
    for (int p = 0; p < m; ++p) job.operations.push_back(random_operation(m, 99, rng));
    inst.jobs.push_back(std::move(job));
  }
  return inst;
}

ParseError::ParseError(int line_, int column_, const std::string& what_)
    : std::runtime_error("line " + std::to_string(line_) + ", column " +
                         std::to_string(column_) + ": " + what_),
      line(line_),
      column(column_) {}

namespace {

// Whitespace tokenizer that remembers line/column for diagnostics.
class Tokens {
 public:
  explicit Tokens(std::istream& in) {
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::size_t i = 0;
      while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i >= line.size()) break;
        std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        tokens_.push_back({line.substr(start, i - start), line_no,
                           static_cast<int>(start) + 1});
      }
    }
  }

  bool done() const { return pos_ >= tokens_.size(); }

  int current_line() const {
    if (done()) return tokens_.empty() ? 1 : tokens_.back().line;
    return tokens_[pos_].line;
  }

  // Tokens remaining on the line of the token at the current position.
  bool line_has_more(int line) const {
    return !done() && tokens_[pos_].line == line;
  }

  int next_int(const char* what) {
    const Tok& t = take(what);
    try {
      std::size_t used = 0;
      const long v = std::stol(t.text, &used);
      if (used != t.text.size()) throw std::invalid_argument("");
      return static_cast<int>(v);
    } catch (const std::exception&) {
      throw ParseError(t.line, t.column, std::string("expected integer for ") + what +
                                             ", got '" + t.text + "'");
    }
  }

  double next_double(const char* what) {
    const Tok& t = take(what);
    try {
      std::size_t used = 0;
      const double v = std::stod(t.text, &used);
      if (used != t.text.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ParseError(t.line, t.column, std::string("expected number for ") + what +
                                             ", got '" + t.text + "'");
    }
  }

  ParseError error_here(const std::string& what) const {
    if (done()) {
      const int line = tokens_.empty() ? 1 : tokens_.back().line;
      return ParseError(line, 1, what + " (unexpected end of input)");
    }
    return ParseError(tokens_[pos_].line, tokens_[pos_].column, what);
  }

 private:
  struct Tok {
    std::string text;
    int line;
    int column;
  };

  const Tok& take(const char* what) {
    if (done()) throw error_here(std::string("missing ") + what);
    return tokens_[pos_++];
  }

  std::vector<Tok> tokens_;
  std::size_t pos_ = 0;
};

}  // namespace

FjspInstance parse_fjs(std::istream& in) {
  Tokens toks(in);

  FjspInstance inst;
  const int header_line = toks.current_line();
  inst.num_jobs = toks.next_int("job count");
  inst.num_machines = toks.next_int("machine count");
  if (inst.num_jobs < 1) throw toks.error_here("job count must be positive");
  if (inst.num_machines < 1) throw toks.error_here("machine count must be positive");
  // Third header field (average flexibility) is informative; some published
  // files omit it.
  if (toks.line_has_more(header_line)) toks.next_double("average flexibility");

  for (int j = 0; j < inst.num_jobs; ++j) {
    if (toks.done())
      throw toks.error_here("header declares " + std::to_string(inst.num_jobs) +
                            " jobs but body has only " + std::to_string(j));
    Job job;
    const int ops = toks.next_int("operation count");
    if (ops < 1) throw toks.error_here("operation count must be positive");
    for (int p = 0; p < ops; ++p) {
      const int options = toks.next_int("machine option count");
      if (options < 1) throw toks.error_here("machine option count must be positive");
      OperationSpec op;
      for (int k = 0; k < options; ++k) {
        const int machine = toks.next_int("machine index");
        const int time = toks.next_int("processing time");
        if (machine < 1 || machine > inst.num_machines)
          throw toks.error_here("machine index " + std::to_string(machine) +
                                " out of range 1.." + std::to_string(inst.num_machines));
        if (time < 1) throw toks.error_here("processing time must be positive");
        op.eligible.push_back({machine - 1, time});
      }
      std::sort(op.eligible.begin(), op.eligible.end(),
                [](const MachineOption& a, const MachineOption& b) {
                  return a.machine < b.machine;
                });
      for (std::size_t k = 1; k < op.eligible.size(); ++k)
        if (op.eligible[k].machine == op.eligible[k - 1].machine)
          throw toks.error_here("duplicate machine in option list");
      job.operations.push_back(std::move(op));
    }
    inst.jobs.push_back(std::move(job));
  }
  if (!toks.done())
    throw toks.error_here("trailing data after " + std::to_string(inst.num_jobs) +
                          " declared jobs");
  return inst;
}

FjspInstance parse_fjs(const std::string& text) {
  std::istringstream in(text);
  return parse_fjs(in);
}

std::string write_fjs(const FjspInstance& inst) {
  std::ostringstream out;
  char flex[32];
  std::snprintf(flex, sizeof(flex), "%.1f", inst.avg_flexibility());
  out << inst.num_jobs << ' ' << inst.num_machines << ' ' << flex << '\n';
  for (const Job& job : inst.jobs) {
    out << job.operations.size();
    for (const OperationSpec& op : job.operations) {
      out << ' ' << op.eligible.size();
      for (const MachineOption& opt : op.eligible)
        out << ' ' << opt.machine + 1 << ' ' << opt.time;
    }
    out << '\n';
  }
  return out.str();
}

FjspInstance parse_instance_json(const std::string& text) {
  nlohmann::json doc = nlohmann::json::parse(text);
  FjspInstance inst;
  inst.num_jobs = doc.at("num_jobs").get<int>();
  inst.num_machines = doc.at("num_machines").get<int>();
  if (doc.contains("name")) inst.meta.name = doc["name"].get<std::string>();
  if (doc.contains("generator")) inst.meta.generator = doc["generator"].get<std::string>();
  if (doc.contains("seed")) inst.meta.seed = doc["seed"].get<std::uint64_t>();
  for (const auto& job_doc : doc.at("jobs")) {
    Job job;
    for (const auto& op_doc : job_doc) {
      OperationSpec op;
      for (const auto& pair : op_doc)
        op.eligible.push_back({pair.at(0).get<int>() - 1, pair.at(1).get<int>()});
      std::sort(op.eligible.begin(), op.eligible.end(),
                [](const MachineOption& a, const MachineOption& b) {
                  return a.machine < b.machine;
                });
      job.operations.push_back(std::move(op));
    }
    inst.jobs.push_back(std::move(job));
  }
  return inst;
}

std::string write_instance_json(const FjspInstance& inst) {
  nlohmann::json doc;
  doc["format"] = "fjsp-instance-v1";
  doc["num_jobs"] = inst.num_jobs;
  doc["num_machines"] = inst.num_machines;
  if (!inst.meta.name.empty()) doc["name"] = inst.meta.name;
  if (!inst.meta.generator.empty()) {
    doc["generator"] = inst.meta.generator;
    doc["seed"] = inst.meta.seed;
  }
  nlohmann::json jobs = nlohmann::json::array();
  for (const Job& job : inst.jobs) {
    nlohmann::json ops = nlohmann::json::array();
    for (const OperationSpec& op : job.operations) {
      nlohmann::json options = nlohmann::json::array();
      for (const MachineOption& opt : op.eligible)
        options.push_back({opt.machine + 1, opt.time});
      ops.push_back(options);
    }
    jobs.push_back(ops);
  }
  doc["jobs"] = jobs;
  return doc.dump(2) + "\n";
}

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

FjspInstance read_instance_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open instance file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  FjspInstance inst;
  if (ends_with(path, ".json")) {
    inst = parse_instance_json(buf.str());
  } else {
    inst = parse_fjs(buf.str());
  }
  if (inst.meta.name.empty()) {
    std::size_t slash = path.find_last_of("/\\");
    inst.meta.name = slash == std::string::npos ? path : path.substr(slash + 1);
  }
  const auto violations = validate(inst);
  if (!violations.empty())
    throw std::runtime_error(path + ": invalid instance: " + violations.front());
  return inst;
}

void write_instance_file(const std::string& path, const FjspInstance& inst) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write instance file: " + path);
  out << (ends_with(path, ".json") ? write_instance_json(inst) : write_fjs(inst));
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace fjsp
