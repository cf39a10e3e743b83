#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fjsp/env.hpp"  // ContractViolation
#include "fjsp/rng.hpp"

namespace fjsp {

// Dense row-major f64 matrix. The optional grad buffer is populated by the
// tape for parameters and by the Adam optimizer.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;
  std::vector<double> grad;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  static Tensor full(int r, int c, double v) {
    Tensor t(r, c);
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }
  static Tensor row(std::span<const double> values) {
    Tensor t(1, static_cast<int>(values.size()));
    std::copy(values.begin(), values.end(), t.data.begin());
    return t;
  }
  static Tensor uniform(int r, int c, double lo, double hi, Rng& rng) {
    Tensor t(r, c);
    for (double& v : t.data) v = lo + (hi - lo) * rng.uniform01();
    return t;
  }

  int size() const { return rows * cols; }
  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

// Computation tape. Nodes are appended in evaluation order, so walking the
// node list backwards is a reverse topological traversal; backward() visits
// every node exactly once. A tape is confined to one thread and is rebuilt
// for every forward pass; parameters live outside it and receive
// accumulated gradients through param() bindings.
class Tape {
 public:
  using Id = int;

  Id constant(Tensor value);
  Id scalar(double v);
  Id param(Tensor* p);  // p must outlive the tape; p->grad accumulates on backward

  Id matmul(Id a, Id b);
  Id add(Id a, Id b);
  Id sub(Id a, Id b);
  Id mul(Id a, Id b);  // elementwise, same shape
  Id scale(Id a, double s);
  Id add_rowvec(Id a, Id v);  // [N,D] + [1,D], the only broadcast allowed
  Id transpose(Id a);
  Id reshape(Id a, int rows, int cols);
  Id concat_cols(std::span<const Id> parts);
  Id slice_cols(Id a, int begin, int end);
  Id repeat_rows(Id a, int n);  // [1,D] -> [N,D]
  Id gather_rows(Id a, std::vector<int> rows);
  Id scatter_add_rows(Id a, std::vector<int> rows, int out_rows);
  Id sum_all(Id a);
  Id mean_all(Id a);
  Id mean_rows(Id a);  // [N,D] -> [1,D]

  // Row-wise softmax with an additive -1e30 sentinel on masked entries.
  // Masked outputs are exactly zero (and so are their gradients). A fully
  // masked row is a contract fault.
  Id masked_softmax_rows(Id a, std::vector<std::uint8_t> mask);

  Id leaky_relu(Id a, double slope);
  Id elu(Id a);
  Id tanh_op(Id a);
  Id exp_op(Id a);
  Id log_op(Id a);  // requires strictly positive inputs
  Id minimum(Id a, Id b);
  Id clamp(Id a, double lo, double hi);

  const Tensor& val(Id id) const { return nodes_[id].value; }
  std::size_t size() const { return nodes_.size(); }

  // Accumulates d(loss)/d(param) into every bound parameter's grad buffer.
  void backward(Id loss);

 private:
  struct Node {
    Tensor value;
    std::vector<double> grad;
    std::function<void(Tape&)> back;  // empty for constants
    Tensor* bound = nullptr;
  };

  Id push(Tensor value, std::function<void(Tape&)> back);
  std::vector<double>& grad_of(Id id) { return nodes_[id].grad; }
  static void require(bool ok, const char* what);

  std::vector<Node> nodes_;
};

// Adam with bias correction. Parameter identity is positional; moments can
// be exported/imported for checkpoint resume.
struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(std::vector<Tensor*> params, AdamConfig config);

  void step();       // consumes params' grad buffers
  void zero_grad();  // clears params' grad buffers

  std::int64_t steps_taken() const { return t_; }
  const AdamConfig& config() const { return config_; }

  // m/v moment access for checkpointing, index-aligned with the params.
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }
  void restore(std::vector<Tensor> m, std::vector<Tensor> v, std::int64_t t);

 private:
  std::vector<Tensor*> params_;
  AdamConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::int64_t t_ = 0;
};

}  // namespace fjsp
