#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fjsp/features.hpp"
#include "fjsp/rng.hpp"
#include "fjsp/tensor.hpp"

namespace fjsp {

// Network widths. Sizing is per attention head; a non-final layer emits the
// concatenation of its heads, the final layer their average, so the model is
// size-agnostic: the same parameters apply to any instance.
struct DanConfig {
  int layers = 2;
  int heads = 4;
  std::vector<int> op_dims = {32, 8};    // per-head output width per layer
  std::vector<int> mach_dims = {32, 8};
  int op_in = 10;
  int mach_in = 8;
  int pair_in = 8;
  int actor_hidden = 64;
  int critic_hidden = 64;
  double leaky_slope = 0.2;

  void check() const;

  int op_layer_input(int layer) const;
  int op_layer_output(int layer) const;  // post-aggregation width
  int mach_layer_input(int layer) const;
  int mach_layer_output(int layer) const;
  int global_dim() const;
  int actor_input_dim() const;

  std::string to_json() const;
  static DanConfig from_json(const std::string& text);
};

struct OpHeadParams {
  Tensor W;  // [d_out, d_in]
  Tensor a;  // [1, 2*d_out]
};

struct MachHeadParams {
  Tensor Z1;  // [d_out, d_in]
  Tensor Z2;  // [d_out, same-layer op output width]
  Tensor b;   // [1, 3*d_out]
};

struct MlpParams {
  Tensor w1, b1, w2, b2, w3, b3;
};

struct PolicyParams {
  DanConfig cfg;
  std::vector<std::vector<OpHeadParams>> op_layers;      // [layer][head]
  std::vector<std::vector<MachHeadParams>> mach_layers;  // [layer][head]
  MlpParams actor;
  MlpParams critic;

  static PolicyParams init(const DanConfig& cfg, Rng& rng);

  // Stable name -> tensor listing; the checkpoint and optimizer orderings.
  std::vector<std::pair<std::string, Tensor*>> named_tensors();
  std::vector<std::pair<std::string, const Tensor*>> named_tensors() const;
  std::vector<Tensor*> tensor_list();
  std::int64_t parameter_count() const;
};

// Layer outputs on a tape; gradients flow back to the parameters used.
struct Embeddings {
  Tape::Id op_emb = -1;    // [|O_u|, d_op]
  Tape::Id mach_emb = -1;  // [|M_u|, d_m]
  Tape::Id global = -1;    // [1, d_op + d_m]
};

Embeddings dual_forward(Tape& tape, const FeatureBundle& bundle, PolicyParams& params);

// Per-action scores mu [|A|,1] and the softmax distribution pi [1,|A|].
Tape::Id actor_scores(Tape& tape, const Embeddings& emb, const FeatureBundle& bundle,
                      PolicyParams& params);
Tape::Id action_distribution(Tape& tape, Tape::Id scores);

Tape::Id critic_value(Tape& tape, const Embeddings& emb, PolicyParams& params);

// Forward pass without retaining a caller-visible tape.
struct PolicyOutput {
  std::vector<double> probs;  // over bundle.pairs rows
  double value = 0.0;
};
PolicyOutput evaluate_policy(const FeatureBundle& bundle, PolicyParams& params);

enum class Strategy { Greedy, Sample };

struct ActionChoice {
  int index = -1;
  double log_prob = 0.0;
};

// Greedy takes the argmax (first index on ties); Sample draws from the
// distribution. rng may be null for Greedy.
ActionChoice select_action(std::span<const double> probs, Strategy strategy, Rng* rng);

// Checkpoint round trip. Metadata keeps the model config plus caller extras
// under "training".
void save_policy(const std::string& path, const PolicyParams& params,
                 const std::string& training_metadata_json = "{}");
PolicyParams load_policy(const std::string& path);

std::string describe_model(const PolicyParams& params);

}  // namespace fjsp
