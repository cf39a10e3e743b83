#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "fjsp/dan.hpp"
#include "fjsp/instance.hpp"

using namespace fjsp;

namespace {

DanConfig small_config(int layers = 2, int heads = 2) {
  DanConfig cfg;
  cfg.layers = layers;
  cfg.heads = heads;
  cfg.op_dims.assign(layers, 6);
  cfg.mach_dims.assign(layers, 5);
  return cfg;
}

FeatureBundle bundle_at_reset(const FjspInstance& inst) {
  ScheduleState state(inst);
  return build_bundle(state);
}

FjspInstance three_op_chain() {
  FjspInstance inst;
  inst.num_jobs = 1;
  inst.num_machines = 2;
  inst.jobs = {Job{{OperationSpec{{{0, 2}}}, OperationSpec{{{0, 3}, {1, 4}}},
                    OperationSpec{{{1, 5}}}}}};
  return inst;
}

void zero_all(PolicyParams& params) {
  for (auto& [name, tensor] : params.named_tensors())
    std::fill(tensor->data.begin(), tensor->data.end(), 0.0);
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double out = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    out = std::max(out, std::abs(a[i] - b[i]));
  return out;
}

}  // namespace

TEST_CASE("embedding and global dimensions follow the configuration") {
  Rng rng(1);
  DanConfig cfg;  // the default 2-layer 4-head stack
  PolicyParams params = PolicyParams::init(cfg, rng);
  CHECK(cfg.op_layer_output(0) == 128);
  CHECK(cfg.op_layer_output(1) == 8);
  CHECK(cfg.mach_layer_output(1) == 8);
  CHECK(cfg.global_dim() == 16);
  CHECK(cfg.actor_input_dim() == 40);

  Rng gen(3);
  const FjspInstance small = gen_sd2(3, 2, gen);
  const FeatureBundle b = bundle_at_reset(small);
  Tape tape;
  const Embeddings emb = dual_forward(tape, b, params);
  CHECK(tape.val(emb.op_emb).rows == b.num_ops);
  CHECK(tape.val(emb.op_emb).cols == 8);
  CHECK(tape.val(emb.mach_emb).rows == b.num_machines);
  CHECK(tape.val(emb.mach_emb).cols == 8);
  CHECK(tape.val(emb.global).cols == 16);

  Rng gen2(4);
  const FjspInstance larger = gen_sd2(10, 5, gen2);
  const FeatureBundle b2 = bundle_at_reset(larger);
  Tape tape2;
  const Embeddings emb2 = dual_forward(tape2, b2, params);  // same parameters
  CHECK(tape2.val(emb2.op_emb).rows == b2.num_ops);
  CHECK(tape2.val(emb2.global).cols == 16);
}

TEST_CASE("zero parameters map everything to zero") {
  Rng rng(2);
  PolicyParams params = PolicyParams::init(small_config(), rng);
  zero_all(params);
  Rng gen(5);
  const FjspInstance inst = gen_sd2(3, 2, gen);
  const FeatureBundle b = bundle_at_reset(inst);
  Tape tape;
  const Embeddings emb = dual_forward(tape, b, params);
  for (double v : tape.val(emb.op_emb).data) CHECK(v == 0.0);
  for (double v : tape.val(emb.mach_emb).data) CHECK(v == 0.0);
  CHECK(tape.val(critic_value(tape, emb, params)).data[0] == 0.0);
  // Uniform scores give the uniform distribution.
  const Tape::Id pi = action_distribution(tape, actor_scores(tape, emb, b, params));
  for (double p : tape.val(pi).data)
    CHECK(p == doctest::Approx(1.0 / b.num_pairs).epsilon(1e-12));
}

TEST_CASE("single-head single-layer block matches a hand-rolled GAT layer") {
  Rng rng(7);
  PolicyParams params = PolicyParams::init(small_config(/*layers=*/1, /*heads=*/1), rng);
  const FjspInstance inst = three_op_chain();
  const FeatureBundle b = bundle_at_reset(inst);

  Tape tape;
  const Embeddings emb = dual_forward(tape, b, params);
  const Tensor& got = tape.val(emb.op_emb);

  const Tensor& W = params.op_layers[0][0].W;
  const Tensor& a = params.op_layers[0][0].a;
  const int d = W.rows;
  const double slope = params.cfg.leaky_slope;

  // Wh per row, then pairwise logits over {pred, self, succ}.
  std::vector<std::vector<double>> wh(b.num_ops, std::vector<double>(d, 0.0));
  for (int r = 0; r < b.num_ops; ++r)
    for (int o = 0; o < d; ++o)
      for (int i = 0; i < kOpFeatureDim; ++i)
        wh[r][o] += W.at(o, i) * b.op_feats[r * kOpFeatureDim + i];

  auto logit = [&](int i, int p) {
    double e = 0.0;
    for (int o = 0; o < d; ++o) e += a.data[o] * wh[i][o];
    for (int o = 0; o < d; ++o) e += a.data[d + o] * wh[p][o];
    return e > 0.0 ? e : slope * e;
  };

  for (int i = 0; i < b.num_ops; ++i) {
    std::vector<int> peers;
    if (b.pred_row[i] >= 0) peers.push_back(b.pred_row[i]);
    peers.push_back(i);
    if (b.succ_row[i] >= 0) peers.push_back(b.succ_row[i]);

    double denom = 0.0;
    std::vector<double> weights;
    double max_logit = -1e300;
    for (int p : peers) max_logit = std::max(max_logit, logit(i, p));
    for (int p : peers) {
      weights.push_back(std::exp(logit(i, p) - max_logit));
      denom += weights.back();
    }
    for (int o = 0; o < d; ++o) {
      double combo = 0.0;
      for (std::size_t k = 0; k < peers.size(); ++k)
        combo += weights[k] / denom * wh[peers[k]][o];
      const double expected = combo > 0.0 ? combo : std::expm1(combo);
      CHECK(got.at(i, o) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("lone operations reduce to a singleton softmax") {
  Rng rng(8);
  PolicyParams params = PolicyParams::init(small_config(1, 1), rng);
  FjspInstance inst;
  inst.num_jobs = 1;
  inst.num_machines = 1;
  inst.jobs = {Job{{OperationSpec{{{0, 5}}}}}};
  const FeatureBundle b = bundle_at_reset(inst);
  Tape tape;
  const Embeddings emb = dual_forward(tape, b, params);

  const Tensor& W = params.op_layers[0][0].W;
  for (int o = 0; o < W.rows; ++o) {
    double wh = 0.0;
    for (int i = 0; i < kOpFeatureDim; ++i) wh += W.at(o, i) * b.op_feats[i];
    const double expected = wh > 0.0 ? wh : std::expm1(wh);
    CHECK(tape.val(emb.op_emb).at(0, o) == doctest::Approx(expected).epsilon(1e-12));
  }

  // The single machine's attention collapses onto its self edge the same way.
  const Tensor& Z1 = params.mach_layers[0][0].Z1;
  for (int o = 0; o < Z1.rows; ++o) {
    double zh = 0.0;
    for (int i = 0; i < kMachFeatureDim; ++i) zh += Z1.at(o, i) * b.mach_feats[i];
    const double expected = zh > 0.0 ? zh : std::expm1(zh);
    CHECK(tape.val(emb.mach_emb).at(0, o) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("stacking layers widens the receptive field along the chain") {
  const FjspInstance inst = three_op_chain();
  const FeatureBundle base = bundle_at_reset(inst);
  FeatureBundle poked = base;
  poked.op_feats[0] += 0.25;  // perturb operation 1's first raw feature

  for (int layers : {1, 2}) {
    Rng rng(9);
    PolicyParams params = PolicyParams::init(small_config(layers, 2), rng);
    Tape t1, t2;
    const Embeddings e1 = dual_forward(t1, base, params);
    const Embeddings e2 = dual_forward(t2, poked, params);
    const Tensor& a = t1.val(e1.op_emb);
    const Tensor& b = t2.val(e2.op_emb);
    double last_row_diff = 0.0;
    for (int c = 0; c < a.cols; ++c)
      last_row_diff = std::max(last_row_diff, std::abs(a.at(2, c) - b.at(2, c)));
    if (layers == 1) {
      CHECK(last_row_diff == 0.0);  // op 3 cannot see op 1 in one hop
    } else {
      CHECK(last_row_diff > 0.0);
    }
  }
}

TEST_CASE("identical machines share identical embeddings") {
  FjspInstance inst;
  inst.num_jobs = 2;
  inst.num_machines = 2;
  inst.jobs = {Job{{OperationSpec{{{0, 4}, {1, 4}}}}},
               Job{{OperationSpec{{{0, 4}, {1, 4}}}}}};
  Rng rng(10);
  PolicyParams params = PolicyParams::init(small_config(), rng);
  const FeatureBundle b = bundle_at_reset(inst);
  Tape tape;
  const Embeddings emb = dual_forward(tape, b, params);
  const Tensor& mach = tape.val(emb.mach_emb);
  REQUIRE(mach.rows == 2);
  for (int c = 0; c < mach.cols; ++c) CHECK(mach.at(0, c) == mach.at(1, c));
}

TEST_CASE("competition features steer machine attention") {
  Rng gen(11);
  const FjspInstance inst = gen_sd2(3, 2, gen);
  const FeatureBundle base = bundle_at_reset(inst);
  FeatureBundle no_candidates = base;
  for (CompetitionEdge& e : no_candidates.edges) {
    e.candidate_rows.clear();
    e.raw_sum.fill(0.0);
  }
  REQUIRE(base.edges.size() > 0);

  Rng rng(12);
  PolicyParams params = PolicyParams::init(small_config(), rng);
  Tape t1, t2;
  const Embeddings e1 = dual_forward(t1, base, params);
  const Embeddings e2 = dual_forward(t2, no_candidates, params);
  CHECK(max_abs_diff(t1.val(e1.mach_emb).data, t2.val(e2.mach_emb).data) > 1e-9);
}

TEST_CASE("actor distribution sums to one and handles forced choices") {
  Rng rng(13);
  PolicyParams params = PolicyParams::init(small_config(), rng);

  FjspInstance forced;
  forced.num_jobs = 1;
  forced.num_machines = 1;
  forced.jobs = {Job{{OperationSpec{{{0, 5}}}}}};
  const PolicyOutput single = evaluate_policy(bundle_at_reset(forced), params);
  REQUIRE(single.probs.size() == 1);
  CHECK(single.probs[0] == 1.0);

  Rng gen(14);
  for (int i = 0; i < 10; ++i) {
    Rng child = gen.split();
    const FjspInstance inst = gen_sd2(2 + i % 4, 2 + i % 3, child);
    const PolicyOutput out = evaluate_policy(bundle_at_reset(inst), params);
    double sum = 0.0;
    for (double p : out.probs) sum += p;
    CHECK(std::abs(sum - 1.0) < 1e-12);
    CHECK(std::isfinite(out.value));
  }
}

TEST_CASE("duplicated identical actions share probability") {
  // Two interchangeable machines for a single ready operation.
  FjspInstance inst;
  inst.num_jobs = 1;
  inst.num_machines = 2;
  inst.jobs = {Job{{OperationSpec{{{0, 6}, {1, 6}}}, OperationSpec{{{0, 2}, {1, 2}}}}}};
  Rng rng(15);
  PolicyParams params = PolicyParams::init(small_config(), rng);
  const PolicyOutput out = evaluate_policy(bundle_at_reset(inst), params);
  REQUIRE(out.probs.size() == 2);
  CHECK(out.probs[0] == doctest::Approx(out.probs[1]).epsilon(1e-12));
}

TEST_CASE("critic is invariant to machine relabeling") {
  Rng gen(16);
  const FjspInstance inst = gen_sd2(4, 3, gen);
  FjspInstance relabeled = inst;
  const int perm[3] = {1, 2, 0};
  for (Job& job : relabeled.jobs)
    for (OperationSpec& op : job.operations) {
      for (MachineOption& opt : op.eligible) opt.machine = perm[opt.machine];
      std::sort(op.eligible.begin(), op.eligible.end(),
                [](const MachineOption& a, const MachineOption& b) {
                  return a.machine < b.machine;
                });
    }
  Rng rng(17);
  PolicyParams params = PolicyParams::init(DanConfig{}, rng);
  const PolicyOutput a = evaluate_policy(bundle_at_reset(inst), params);
  const PolicyOutput b = evaluate_policy(bundle_at_reset(relabeled), params);
  CHECK(a.value == doctest::Approx(b.value).epsilon(1e-12));

  std::vector<double> pa = a.probs, pb = b.probs;
  std::sort(pa.begin(), pa.end());
  std::sort(pb.begin(), pb.end());
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i)
    CHECK(pa[i] == doctest::Approx(pb[i]).epsilon(1e-12));
}

TEST_CASE("greedy choice is argmax with first-index ties and monotone invariance") {
  const std::vector<double> probs = {0.2, 0.8};
  CHECK(select_action(probs, Strategy::Greedy, nullptr).index == 1);

  const std::vector<double> tied = {0.4, 0.4, 0.2};
  CHECK(select_action(tied, Strategy::Greedy, nullptr).index == 0);

  // Any strictly increasing transform of the scores leaves the argmax alone.
  Rng rng(18);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> mu(5);
    for (double& v : mu) v = rng.uniform01() * 4.0 - 2.0;
    auto softmax = [](std::vector<double> xs) {
      double mx = *std::max_element(xs.begin(), xs.end());
      double denom = 0.0;
      for (double& x : xs) denom += (x = std::exp(x - mx));
      for (double& x : xs) x /= denom;
      return xs;
    };
    std::vector<double> transformed = mu;
    for (double& v : transformed) v = 3.0 * v + 1.0;  // strictly increasing
    const int base = select_action(softmax(mu), Strategy::Greedy, nullptr).index;
    const int moved = select_action(softmax(transformed), Strategy::Greedy, nullptr).index;
    CHECK(base == moved);
  }
}

TEST_CASE("sampling is reproducible and matches frequencies within three sigma") {
  const std::vector<double> probs = {0.1, 0.6, 0.3};
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i)
    CHECK(select_action(probs, Strategy::Sample, &a).index ==
          select_action(probs, Strategy::Sample, &b).index);

  Rng rng(4242);
  const int draws = 10000;
  std::vector<int> counts(3, 0);
  for (int i = 0; i < draws; ++i)
    ++counts[select_action(probs, Strategy::Sample, &rng).index];
  for (int k = 0; k < 3; ++k) {
    const double expected = probs[k] * draws;
    const double sigma = std::sqrt(draws * probs[k] * (1.0 - probs[k]));
    CHECK(std::abs(counts[k] - expected) <= 3.0 * sigma);
  }

  const ActionChoice choice = select_action(probs, Strategy::Sample, &rng);
  CHECK(choice.log_prob == doctest::Approx(std::log(probs[choice.index])));
}

TEST_CASE("checkpoint round trip preserves parameters and config") {
  Rng rng(19);
  PolicyParams params = PolicyParams::init(small_config(), rng);
  const auto dir = std::filesystem::temp_directory_path() / "fjsp_dan_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "model.ckpt").string();
  save_policy(path, params, "{\"note\":\"unit\"}");

  PolicyParams loaded = load_policy(path);
  CHECK(loaded.cfg.layers == params.cfg.layers);
  CHECK(loaded.cfg.heads == params.cfg.heads);
  auto a = params.named_tensors();
  auto b = loaded.named_tensors();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].first == b[i].first);
    CHECK(a[i].second->data == b[i].second->data);
  }

  Rng gen(20);
  const FjspInstance inst = gen_sd2(3, 2, gen);
  const FeatureBundle bundle = bundle_at_reset(inst);
  const PolicyOutput x = evaluate_policy(bundle, params);
  const PolicyOutput y = evaluate_policy(bundle, loaded);
  CHECK(x.value == y.value);
  CHECK(x.probs == y.probs);
}

TEST_CASE("model description reports widths and parameter count") {
  Rng rng(21);
  PolicyParams params = PolicyParams::init(DanConfig{}, rng);
  const std::string text = describe_model(params);
  CHECK(text.find("layers: 2") != std::string::npos);
  CHECK(text.find("heads per block: 4") != std::string::npos);
  CHECK(text.find(std::to_string(params.parameter_count())) != std::string::npos);
  CHECK(params.parameter_count() > 0);
}
