#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "fjsp/instance.hpp"

using namespace fjsp;

namespace {

FjspInstance minimal_instance() {
  FjspInstance inst;
  inst.num_jobs = 1;
  inst.num_machines = 1;
  inst.jobs = {Job{{OperationSpec{{{0, 5}}}}}};
  return inst;
}

}  // namespace

TEST_CASE("validate accepts the minimal legal instance") {
  CHECK(validate(minimal_instance()).empty());
}

TEST_CASE("validate reports an empty machine set with coordinates") {
  FjspInstance inst = minimal_instance();
  inst.jobs[0].operations[0].eligible.clear();
  const auto violations = validate(inst);
  REQUIRE(violations.size() == 1);
  CHECK(violations[0].find("empty machine set") != std::string::npos);
  CHECK(violations[0].find("(1,1)") != std::string::npos);
}

TEST_CASE("validate reports non-positive processing times") {
  FjspInstance inst = minimal_instance();
  inst.jobs[0].operations[0].eligible[0].time = 0;
  const auto violations = validate(inst);
  REQUIRE(violations.size() == 1);
  CHECK(violations[0].find("non-positive time") != std::string::npos);
}

TEST_CASE("sd2 shape and whole-instance marginals") {
  Rng rng(42);
  const FjspInstance inst = gen_sd2(10, 5, rng);
  CHECK(inst.num_jobs == 10);
  CHECK(inst.num_machines == 5);
  CHECK(inst.total_operations() == 50);
  CHECK(validate(inst).empty());
  for (const Job& job : inst.jobs) {
    CHECK(job.operations.size() == 5);  // one operation per machine count
    for (const OperationSpec& op : job.operations) {
      CHECK(op.eligible.size() >= 1);
      CHECK(op.eligible.size() <= 5);
      for (const MachineOption& opt : op.eligible) {
        CHECK(opt.time >= 1);
        CHECK(opt.time <= 99);
      }
    }
  }
}

TEST_CASE("sd2 degenerate bounds at 1x1") {
  Rng rng(7);
  const FjspInstance inst = gen_sd2(1, 1, rng);
  REQUIRE(inst.total_operations() == 1);
  const OperationSpec& op = inst.jobs[0].operations[0];
  REQUIRE(op.eligible.size() == 1);
  CHECK(op.eligible[0].machine == 0);
  CHECK(op.eligible[0].time >= 1);
  CHECK(op.eligible[0].time <= 99);
}

TEST_CASE("generators are pure functions of (n, m, seed)") {
  for (std::uint64_t seed : {1ULL, 99ULL, 123456789ULL}) {
    Rng a(seed), b(seed);
    CHECK(gen_sd2(6, 3, a) == gen_sd2(6, 3, b));
    Rng c(seed), d(seed);
    CHECK(gen_sd1(6, 3, c) == gen_sd1(6, 3, d));
  }
}

TEST_CASE("sd2 marginal distributions pass a chi-square sanity check") {
  // >= 10^4 operation draws; times must cover exactly 1..99 and set sizes
  // exactly 1..m. Critical values at p = 0.001.
  Rng rng(2024);
  const int m = 5;
  std::vector<long long> time_counts(100, 0);
  std::vector<long long> size_counts(m + 1, 0);
  long long n_times = 0, n_sizes = 0;
  while (n_sizes < 10000) {
    const FjspInstance inst = gen_sd2(10, m, rng);
    for (const Job& job : inst.jobs)
      for (const OperationSpec& op : job.operations) {
        ++size_counts[op.eligible.size()];
        ++n_sizes;
        for (const MachineOption& opt : op.eligible) {
          ++time_counts[opt.time];
          ++n_times;
        }
      }
  }
  for (int t = 1; t <= 99; ++t) CHECK(time_counts[t] > 0);
  for (int s = 1; s <= m; ++s) CHECK(size_counts[s] > 0);
  CHECK(time_counts[0] == 0);
  CHECK(size_counts[0] == 0);

  double chi_times = 0.0;
  const double expect_t = static_cast<double>(n_times) / 99.0;
  for (int t = 1; t <= 99; ++t) {
    const double d = time_counts[t] - expect_t;
    chi_times += d * d / expect_t;
  }
  CHECK(chi_times < 148.230);  // chi-square(0.999, df=98)

  double chi_sizes = 0.0;
  const double expect_s = static_cast<double>(n_sizes) / m;
  for (int s = 1; s <= m; ++s) {
    const double d = size_counts[s] - expect_s;
    chi_sizes += d * d / expect_s;
  }
  CHECK(chi_sizes < 18.467);  // chi-square(0.999, df=4)
}

TEST_CASE("sd1 job lengths cover exactly the configured range") {
  Rng rng(11);
  std::set<int> seen;
  for (int draw = 0; draw < 1000; ++draw) {
    const FjspInstance inst = gen_sd1(10, 5, rng);
    for (const Job& job : inst.jobs) {
      const int n_ops = static_cast<int>(job.operations.size());
      CHECK(n_ops >= 3);
      CHECK(n_ops <= 7);
      seen.insert(n_ops);
      for (const OperationSpec& op : job.operations)
        for (const MachineOption& opt : op.eligible) {
          CHECK(opt.time >= 1);
          CHECK(opt.time <= 20);
        }
    }
    if (seen.size() == 5 && draw > 100) break;
  }
  CHECK(seen == std::set<int>{3, 4, 5, 6, 7});
}

TEST_CASE("sd1 with one job and two machines stays within bounds") {
  std::set<int> seen;
  for (std::uint64_t seed = 0; seed < 400; ++seed) {
    Rng rng(seed);
    const FjspInstance inst = gen_sd1(1, 2, rng);
    const int n_ops = static_cast<int>(inst.jobs[0].operations.size());
    CHECK(n_ops >= 1);
    CHECK(n_ops <= 4);
    seen.insert(n_ops);
  }
  CHECK(seen == std::set<int>{1, 2, 3, 4});
}

TEST_CASE("parse_fjs reads the documented grammar") {
  const FjspInstance inst = parse_fjs("2 2 1.5\n2 1 1 3 2 1 2 2 4\n1 1 2 6\n");
  REQUIRE(inst.num_jobs == 2);
  REQUIRE(inst.num_machines == 2);
  REQUIRE(inst.jobs[0].operations.size() == 2);
  CHECK(inst.jobs[0].operations[0].eligible ==
        std::vector<MachineOption>{{0, 3}});
  CHECK(inst.jobs[0].operations[1].eligible ==
        std::vector<MachineOption>{{0, 2}, {1, 4}});
  REQUIRE(inst.jobs[1].operations.size() == 1);
  CHECK(inst.jobs[1].operations[0].eligible ==
        std::vector<MachineOption>{{1, 6}});
}

TEST_CASE("parse_fjs reports header/body count mismatch") {
  CHECK_THROWS_WITH_AS(parse_fjs("3 2 1.0\n1 1 1 3\n1 1 2 4\n"),
                       doctest::Contains("3 jobs"), ParseError);
}

TEST_CASE("parse_fjs reports malformed tokens with position") {
  try {
    parse_fjs("1 1 1.0\n1 1 x 5\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 2);
    CHECK(e.column == 5);
  }
}

TEST_CASE("parse_fjs rejects out-of-range machine indices") {
  CHECK_THROWS_WITH_AS(parse_fjs("1 2 1.0\n1 1 3 5\n"),
                       doctest::Contains("out of range"), ParseError);
}

TEST_CASE("parse_fjs rejects trailing jobs") {
  CHECK_THROWS_WITH_AS(parse_fjs("1 1 1.0\n1 1 1 5\n1 1 1 5\n"),
                       doctest::Contains("trailing"), ParseError);
}

TEST_CASE("write_fjs emits the minimal instance exactly") {
  CHECK(write_fjs(minimal_instance()) == "1 1 1.0\n1 1 1 5\n");
}

TEST_CASE("write_fjs prints average flexibility with one decimal") {
  const FjspInstance inst = parse_fjs("2 2 9.9\n2 1 1 3 2 1 2 2 4\n1 1 2 6\n");
  // 1 + 2 + 1 options over 3 operations -> 1.3
  const std::string text = write_fjs(inst);
  CHECK(text.substr(0, text.find('\n')) == "2 2 1.3");

  FjspInstance half;
  half.num_jobs = 1;
  half.num_machines = 2;
  half.jobs = {Job{{OperationSpec{{{0, 1}, {1, 2}}}, OperationSpec{{{0, 4}}}}}};
  const std::string text2 = write_fjs(half);
  CHECK(text2.substr(0, text2.find('\n')) == "1 2 1.5");
}

TEST_CASE("fjs round trip is identity over random instances") {
  Rng rng(5150);
  for (int i = 0; i < 100; ++i) {
    Rng child = rng.split();
    const FjspInstance inst = i % 2 == 0 ? gen_sd2(1 + i % 7, 1 + i % 5, child)
                                         : gen_sd1(1 + i % 7, 2 + i % 4, child);
    CHECK(parse_fjs(write_fjs(inst)) == inst);
  }
}

TEST_CASE("json round trip keeps structure and metadata") {
  Rng rng(77);
  FjspInstance inst = gen_sd2(4, 3, rng);
  inst.meta.seed = 77;
  inst.meta.name = "sample";
  const FjspInstance back = parse_instance_json(write_instance_json(inst));
  CHECK(back == inst);
  CHECK(back.meta.generator == "sd2");
  CHECK(back.meta.seed == 77);
}

TEST_CASE("parse_fjs accepts a header without the flexibility field") {
  const FjspInstance inst = parse_fjs("1 1\n1 1 1 5\n");
  CHECK(inst == minimal_instance());
}
