#include "fjsp/dan.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fjsp/checkpoint.hpp"
#include "json.hpp"

namespace fjsp {

void DanConfig::check() const {
  if (layers < 1) throw ContractViolation("DanConfig: layers must be >= 1");
  if (heads < 1) throw ContractViolation("DanConfig: heads must be >= 1");
  if (static_cast<int>(op_dims.size()) != layers ||
      static_cast<int>(mach_dims.size()) != layers)
    throw ContractViolation("DanConfig: per-layer width lists must match layer count");
  for (int d : op_dims)
    if (d < 1) throw ContractViolation("DanConfig: non-positive op width");
  for (int d : mach_dims)
    if (d < 1) throw ContractViolation("DanConfig: non-positive machine width");
}

int DanConfig::op_layer_input(int layer) const {
  return layer == 0 ? op_in : op_layer_output(layer - 1);
}

int DanConfig::op_layer_output(int layer) const {
  return layer == layers - 1 ? op_dims[layer] : heads * op_dims[layer];
}

int DanConfig::mach_layer_input(int layer) const {
  return layer == 0 ? mach_in : mach_layer_output(layer - 1);
}

int DanConfig::mach_layer_output(int layer) const {
  return layer == layers - 1 ? mach_dims[layer] : heads * mach_dims[layer];
}

int DanConfig::global_dim() const {
  return op_layer_output(layers - 1) + mach_layer_output(layers - 1);
}

int DanConfig::actor_input_dim() const {
  return op_layer_output(layers - 1) + mach_layer_output(layers - 1) + global_dim() +
         pair_in;
}

std::string DanConfig::to_json() const {
  nlohmann::json doc;
  doc["layers"] = layers;
  doc["heads"] = heads;
  doc["op_dims"] = op_dims;
  doc["mach_dims"] = mach_dims;
  doc["op_in"] = op_in;
  doc["mach_in"] = mach_in;
  doc["pair_in"] = pair_in;
  doc["actor_hidden"] = actor_hidden;
  doc["critic_hidden"] = critic_hidden;
  doc["leaky_slope"] = leaky_slope;
  return doc.dump();
}

DanConfig DanConfig::from_json(const std::string& text) {
  const nlohmann::json doc = nlohmann::json::parse(text);
  DanConfig cfg;
  cfg.layers = doc.at("layers").get<int>();
  cfg.heads = doc.at("heads").get<int>();
  cfg.op_dims = doc.at("op_dims").get<std::vector<int>>();
  cfg.mach_dims = doc.at("mach_dims").get<std::vector<int>>();
  cfg.op_in = doc.at("op_in").get<int>();
  cfg.mach_in = doc.at("mach_in").get<int>();
  cfg.pair_in = doc.at("pair_in").get<int>();
  cfg.actor_hidden = doc.at("actor_hidden").get<int>();
  cfg.critic_hidden = doc.at("critic_hidden").get<int>();
  cfg.leaky_slope = doc.at("leaky_slope").get<double>();
  cfg.check();
  return cfg;
}

namespace {

Tensor fan_in_uniform(int rows, int cols, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
  return Tensor::uniform(rows, cols, -bound, bound, rng);
}

MlpParams init_mlp(int in, int hidden, int out, Rng& rng) {
  auto bias = [&rng](int width, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return Tensor::uniform(1, width, -bound, bound, rng);
  };
  MlpParams mlp;
  mlp.w1 = fan_in_uniform(hidden, in, rng);
  mlp.b1 = bias(hidden, in);
  mlp.w2 = fan_in_uniform(hidden, hidden, rng);
  mlp.b2 = bias(hidden, hidden);
  mlp.w3 = fan_in_uniform(out, hidden, rng);
  mlp.b3 = bias(out, hidden);
  return mlp;
}

}  // namespace

PolicyParams PolicyParams::init(const DanConfig& cfg, Rng& rng) {
  cfg.check();
  PolicyParams p;
  p.cfg = cfg;
  for (int l = 0; l < cfg.layers; ++l) {
    std::vector<OpHeadParams> op_heads;
    std::vector<MachHeadParams> mach_heads;
    const int op_in = cfg.op_layer_input(l);
    const int op_head_out = cfg.op_dims[l];
    const int mach_in = cfg.mach_layer_input(l);
    const int mach_head_out = cfg.mach_dims[l];
    const int edge_in = cfg.op_layer_output(l);  // same-layer op output feeds c_kq
    for (int h = 0; h < cfg.heads; ++h) {
      OpHeadParams oh;
      oh.W = fan_in_uniform(op_head_out, op_in, rng);
      oh.a = fan_in_uniform(1, 2 * op_head_out, rng);
      op_heads.push_back(std::move(oh));

      MachHeadParams mh;
      mh.Z1 = fan_in_uniform(mach_head_out, mach_in, rng);
      mh.Z2 = fan_in_uniform(mach_head_out, edge_in, rng);
      mh.b = fan_in_uniform(1, 3 * mach_head_out, rng);
      mach_heads.push_back(std::move(mh));
    }
    p.op_layers.push_back(std::move(op_heads));
    p.mach_layers.push_back(std::move(mach_heads));
  }
  p.actor = init_mlp(cfg.actor_input_dim(), cfg.actor_hidden, 1, rng);
  p.critic = init_mlp(cfg.global_dim(), cfg.critic_hidden, 1, rng);
  return p;
}

std::vector<std::pair<std::string, Tensor*>> PolicyParams::named_tensors() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (std::size_t l = 0; l < op_layers.size(); ++l)
    for (std::size_t h = 0; h < op_layers[l].size(); ++h) {
      const std::string prefix =
          "op.l" + std::to_string(l) + ".h" + std::to_string(h) + ".";
      out.emplace_back(prefix + "W", &op_layers[l][h].W);
      out.emplace_back(prefix + "a", &op_layers[l][h].a);
    }
  for (std::size_t l = 0; l < mach_layers.size(); ++l)
    for (std::size_t h = 0; h < mach_layers[l].size(); ++h) {
      const std::string prefix =
          "mach.l" + std::to_string(l) + ".h" + std::to_string(h) + ".";
      out.emplace_back(prefix + "Z1", &mach_layers[l][h].Z1);
      out.emplace_back(prefix + "Z2", &mach_layers[l][h].Z2);
      out.emplace_back(prefix + "b", &mach_layers[l][h].b);
    }
  auto add_mlp = [&out](const std::string& prefix, MlpParams& mlp) {
    out.emplace_back(prefix + "w1", &mlp.w1);
    out.emplace_back(prefix + "b1", &mlp.b1);
    out.emplace_back(prefix + "w2", &mlp.w2);
    out.emplace_back(prefix + "b2", &mlp.b2);
    out.emplace_back(prefix + "w3", &mlp.w3);
    out.emplace_back(prefix + "b3", &mlp.b3);
  };
  add_mlp("actor.", actor);
  add_mlp("critic.", critic);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> PolicyParams::named_tensors() const {
  auto mutable_list = const_cast<PolicyParams*>(this)->named_tensors();
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(mutable_list.size());
  for (auto& [name, tensor] : mutable_list) out.emplace_back(name, tensor);
  return out;
}

std::vector<Tensor*> PolicyParams::tensor_list() {
  std::vector<Tensor*> out;
  for (auto& [name, tensor] : named_tensors()) out.push_back(tensor);
  return out;
}

std::int64_t PolicyParams::parameter_count() const {
  std::int64_t total = 0;
  for (const auto& [name, tensor] : named_tensors()) total += tensor->size();
  return total;
}

namespace {

// e[i][j] = row_term[i] + col_term[j], as a dense matrix on the tape.
Tape::Id outer_sum(Tape& tape, Tape::Id row_term, Tape::Id col_term, int n_rows,
                   int n_cols) {
  const Tape::Id ones_row = tape.constant(Tensor::full(1, n_cols, 1.0));
  const Tape::Id ones_col = tape.constant(Tensor::full(n_rows, 1, 1.0));
  const Tape::Id left = tape.matmul(row_term, ones_row);           // [N, C]
  const Tape::Id right = tape.matmul(ones_col, tape.transpose(col_term));
  return tape.add(left, right);
}

// One attention head over the job chains: neighbors are the predecessor,
// the node itself and the successor, with absent neighbors masked out.
Tape::Id op_head_forward(Tape& tape, Tape::Id feats, const FeatureBundle& bundle,
                         double slope, Tape::Id W, Tape::Id a) {
  const int n = bundle.num_ops;
  const int d_out = tape.val(W).rows;
  const Tape::Id wh = tape.matmul(feats, tape.transpose(W));  // [N, d_out]
  const Tape::Id a_self = tape.slice_cols(a, 0, d_out);
  const Tape::Id a_peer = tape.slice_cols(a, d_out, 2 * d_out);
  const Tape::Id f = tape.matmul(wh, tape.transpose(a_self));  // [N,1]
  const Tape::Id g = tape.matmul(wh, tape.transpose(a_peer));  // [N,1]

  std::vector<std::uint8_t> mask(static_cast<std::size_t>(n) * n, 0);
  for (int i = 0; i < n; ++i) {
    mask[static_cast<std::size_t>(i) * n + i] = 1;
    if (bundle.pred_row[i] >= 0) mask[static_cast<std::size_t>(i) * n + bundle.pred_row[i]] = 1;
    if (bundle.succ_row[i] >= 0) mask[static_cast<std::size_t>(i) * n + bundle.succ_row[i]] = 1;
  }
  const Tape::Id e = tape.leaky_relu(outer_sum(tape, f, g, n, n), slope);
  const Tape::Id alpha = tape.masked_softmax_rows(e, std::move(mask));
  return tape.matmul(alpha, wh);  // pre-activation combination
}

// One attention head over the machine competition graph. c_kq is rebuilt
// from this layer's operation embeddings through a constant selection
// matrix, so gradients reach the operation block as well.
Tape::Id mach_head_forward(Tape& tape, Tape::Id feats, Tape::Id op_out,
                           const FeatureBundle& bundle, double slope,
                           Tape::Id Z1, Tape::Id Z2, Tape::Id b) {
  const int m = bundle.num_machines;
  const int n_edges = static_cast<int>(bundle.edges.size());
  const int d_out = tape.val(Z1).rows;

  const Tape::Id z1h = tape.matmul(feats, tape.transpose(Z1));  // [M, d_out]

  Tensor selection(n_edges, tape.val(op_out).rows);
  for (int e = 0; e < n_edges; ++e)
    for (int row : bundle.edges[e].candidate_rows) selection.at(e, row) += 1.0;
  const Tape::Id c = tape.matmul(tape.constant(std::move(selection)), op_out);
  const Tape::Id z2c = tape.matmul(c, tape.transpose(Z2));  // [E, d_out]

  const Tape::Id b1 = tape.slice_cols(b, 0, d_out);
  const Tape::Id b2 = tape.slice_cols(b, d_out, 2 * d_out);
  const Tape::Id b3 = tape.slice_cols(b, 2 * d_out, 3 * d_out);
  const Tape::Id f = tape.matmul(z1h, tape.transpose(b1));   // [M,1]
  const Tape::Id g = tape.matmul(z1h, tape.transpose(b2));   // [M,1]
  const Tape::Id w = tape.matmul(z2c, tape.transpose(b3));   // [E,1]

  std::vector<int> edge_cells(n_edges);
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(m) * m, 0);
  for (int e = 0; e < n_edges; ++e) {
    const CompetitionEdge& edge = bundle.edges[e];
    edge_cells[e] = edge.k * m + edge.q;
    mask[static_cast<std::size_t>(edge.k) * m + edge.q] = 1;
  }
  const Tape::Id w_mat =
      tape.reshape(tape.scatter_add_rows(w, std::move(edge_cells), m * m), m, m);
  const Tape::Id u_pre = tape.add(outer_sum(tape, f, g, m, m), w_mat);
  const Tape::Id u = tape.leaky_relu(u_pre, slope);
  const Tape::Id alpha = tape.masked_softmax_rows(u, std::move(mask));
  return tape.matmul(alpha, z1h);
}

// Concatenate activated heads, except the final layer which averages the
// raw combinations and activates once.
Tape::Id aggregate_heads(Tape& tape, std::vector<Tape::Id>& head_outputs, bool final_layer) {
  if (final_layer) {
    Tape::Id sum = head_outputs[0];
    for (std::size_t h = 1; h < head_outputs.size(); ++h)
      sum = tape.add(sum, head_outputs[h]);
    return tape.elu(tape.scale(sum, 1.0 / static_cast<double>(head_outputs.size())));
  }
  std::vector<Tape::Id> activated;
  activated.reserve(head_outputs.size());
  for (Tape::Id id : head_outputs) activated.push_back(tape.elu(id));
  return tape.concat_cols(activated);
}

Tape::Id mlp_forward(Tape& tape, Tape::Id x, MlpParams& mlp) {
  Tape::Id h = tape.tanh_op(
      tape.add_rowvec(tape.matmul(x, tape.transpose(tape.param(&mlp.w1))),
                      tape.param(&mlp.b1)));
  h = tape.tanh_op(tape.add_rowvec(tape.matmul(h, tape.transpose(tape.param(&mlp.w2))),
                                   tape.param(&mlp.b2)));
  return tape.add_rowvec(tape.matmul(h, tape.transpose(tape.param(&mlp.w3))),
                         tape.param(&mlp.b3));
}

}  // namespace

Embeddings dual_forward(Tape& tape, const FeatureBundle& bundle, PolicyParams& params) {
  const DanConfig& cfg = params.cfg;
  cfg.check();
  if (bundle.num_ops < 1 || bundle.num_machines < 1)
    throw ContractViolation("dual_forward: empty bundle");

  Tensor op_in(bundle.num_ops, kOpFeatureDim);
  op_in.data = bundle.op_feats;
  Tensor mach_in(bundle.num_machines, kMachFeatureDim);
  mach_in.data = bundle.mach_feats;

  Tape::Id op_h = tape.constant(std::move(op_in));
  Tape::Id mach_h = tape.constant(std::move(mach_in));

  for (int l = 0; l < cfg.layers; ++l) {
    const bool final_layer = l == cfg.layers - 1;

    std::vector<Tape::Id> op_heads;
    for (int h = 0; h < cfg.heads; ++h) {
      OpHeadParams& head = params.op_layers[l][h];
      op_heads.push_back(op_head_forward(tape, op_h, bundle, cfg.leaky_slope,
                                         tape.param(&head.W), tape.param(&head.a)));
    }
    const Tape::Id op_out = aggregate_heads(tape, op_heads, final_layer);

    std::vector<Tape::Id> mach_heads;
    for (int h = 0; h < cfg.heads; ++h) {
      MachHeadParams& head = params.mach_layers[l][h];
      mach_heads.push_back(mach_head_forward(tape, mach_h, op_out, bundle, cfg.leaky_slope,
                                             tape.param(&head.Z1), tape.param(&head.Z2),
                                             tape.param(&head.b)));
    }
    const Tape::Id mach_out = aggregate_heads(tape, mach_heads, final_layer);

    op_h = op_out;
    mach_h = mach_out;
  }

  Embeddings emb;
  emb.op_emb = op_h;
  emb.mach_emb = mach_h;
  const std::array<Tape::Id, 2> pooled = {tape.mean_rows(op_h), tape.mean_rows(mach_h)};
  emb.global = tape.concat_cols(pooled);
  return emb;
}

Tape::Id actor_scores(Tape& tape, const Embeddings& emb, const FeatureBundle& bundle,
                      PolicyParams& params) {
  if (bundle.num_pairs < 1) throw ContractViolation("actor_scores: empty action set");
  std::vector<int> op_rows, mach_rows;
  op_rows.reserve(bundle.pairs.size());
  mach_rows.reserve(bundle.pairs.size());
  for (const PairEntry& p : bundle.pairs) {
    op_rows.push_back(p.op_row);
    mach_rows.push_back(p.mach_row);
  }
  Tensor pair_in(bundle.num_pairs, kPairFeatureDim);
  pair_in.data = bundle.pair_feats;

  const std::array<Tape::Id, 4> parts = {
      tape.gather_rows(emb.op_emb, std::move(op_rows)),
      tape.gather_rows(emb.mach_emb, std::move(mach_rows)),
      tape.repeat_rows(emb.global, bundle.num_pairs),
      tape.constant(std::move(pair_in)),
  };
  const Tape::Id x = tape.concat_cols(parts);
  return mlp_forward(tape, x, params.actor);  // [|A|, 1]
}

Tape::Id action_distribution(Tape& tape, Tape::Id scores) {
  const Tape::Id row = tape.transpose(scores);  // [1, |A|]
  std::vector<std::uint8_t> mask(tape.val(row).data.size(), 1);
  return tape.masked_softmax_rows(row, std::move(mask));
}

Tape::Id critic_value(Tape& tape, const Embeddings& emb, PolicyParams& params) {
  return mlp_forward(tape, emb.global, params.critic);
}

PolicyOutput evaluate_policy(const FeatureBundle& bundle, PolicyParams& params) {
  Tape tape;
  const Embeddings emb = dual_forward(tape, bundle, params);
  const Tape::Id pi = action_distribution(tape, actor_scores(tape, emb, bundle, params));
  const Tape::Id v = critic_value(tape, emb, params);
  PolicyOutput out;
  out.probs = tape.val(pi).data;
  out.value = tape.val(v).data[0];
  return out;
}

ActionChoice select_action(std::span<const double> probs, Strategy strategy, Rng* rng) {
  if (probs.empty()) throw ContractViolation("select_action: empty distribution");
  ActionChoice choice;
  if (strategy == Strategy::Greedy) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(probs.size()); ++i)
      if (probs[i] > probs[best]) best = i;
    choice.index = best;
  } else {
    if (!rng) throw ContractViolation("select_action: sampling requires an rng");
    const double u = rng->uniform01();
    double cum = 0.0;
    choice.index = static_cast<int>(probs.size()) - 1;
    for (int i = 0; i < static_cast<int>(probs.size()); ++i) {
      cum += probs[i];
      if (u < cum) {
        choice.index = i;
        break;
      }
    }
  }
  choice.log_prob = std::log(probs[choice.index]);
  return choice;
}

void save_policy(const std::string& path, const PolicyParams& params,
                 const std::string& training_metadata_json) {
  nlohmann::json meta;
  meta["model"] = nlohmann::json::parse(params.cfg.to_json());
  meta["training"] = nlohmann::json::parse(training_metadata_json);
  save_checkpoint(path, params.named_tensors(), meta.dump(2));
}

PolicyParams load_policy(const std::string& path) {
  LoadedCheckpoint loaded = load_checkpoint(path);
  nlohmann::json meta = nlohmann::json::parse(loaded.metadata_json);
  if (!meta.contains("model"))
    throw std::runtime_error("checkpoint sidecar lacks model config: " + path);
  const DanConfig cfg = DanConfig::from_json(meta["model"].dump());
  Rng rng(0);
  PolicyParams params = PolicyParams::init(cfg, rng);
  for (auto& [name, tensor] : params.named_tensors()) {
    const auto it = loaded.tensors.find(name);
    if (it == loaded.tensors.end())
      throw std::runtime_error("checkpoint missing tensor " + name + ": " + path);
    if (it->second.rows != tensor->rows || it->second.cols != tensor->cols)
      throw std::runtime_error("checkpoint shape mismatch for " + name + ": " + path);
    tensor->data = it->second.data;
  }
  return params;
}

std::string describe_model(const PolicyParams& params) {
  const DanConfig& cfg = params.cfg;
  std::ostringstream out;
  out << "dual attention network\n";
  out << "  layers: " << cfg.layers << ", heads per block: " << cfg.heads << "\n";
  for (int l = 0; l < cfg.layers; ++l) {
    out << "  layer " << l + 1 << ": op " << cfg.op_layer_input(l) << " -> "
        << cfg.op_dims[l] << " x" << cfg.heads
        << (l == cfg.layers - 1 ? " (mean)" : " (concat)") << " = "
        << cfg.op_layer_output(l) << ", mach " << cfg.mach_layer_input(l) << " -> "
        << cfg.mach_dims[l] << " x" << cfg.heads
        << (l == cfg.layers - 1 ? " (mean)" : " (concat)") << " = "
        << cfg.mach_layer_output(l) << "\n";
  }
  out << "  global feature width: " << cfg.global_dim() << "\n";
  out << "  actor MLP: " << cfg.actor_input_dim() << " -> " << cfg.actor_hidden
      << " -> " << cfg.actor_hidden << " -> 1 (tanh hiddens)\n";
  out << "  critic MLP: " << cfg.global_dim() << " -> " << cfg.critic_hidden << " -> "
      << cfg.critic_hidden << " -> 1 (tanh hiddens)\n";
  out << "  leaky slope: " << cfg.leaky_slope << "\n";
  out << "  parameters: " << params.parameter_count() << "\n";
  return out.str();
}

}  // namespace fjsp
