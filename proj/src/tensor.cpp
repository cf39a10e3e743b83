#include "fjsp/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fjsp {

namespace {
constexpr double kMaskSentinel = -1e30;
}

void Tape::require(bool ok, const char* what) {
  if (!ok) throw ContractViolation(what);
}

Tape::Id Tape::push(Tensor value, std::function<void(Tape&)> back) {
  Node node;
  node.grad.assign(value.data.size(), 0.0);
  node.value = std::move(value);
  node.back = std::move(back);
  nodes_.push_back(std::move(node));
  return static_cast<Id>(nodes_.size() - 1);
}

Tape::Id Tape::constant(Tensor value) { return push(std::move(value), {}); }

Tape::Id Tape::scalar(double v) { return constant(Tensor::full(1, 1, v)); }

Tape::Id Tape::param(Tensor* p) {
  require(p != nullptr, "param: null tensor");
  p->ensure_grad();
  const Id out = push(*p, {});
  nodes_[out].bound = p;
  nodes_[out].back = [out](Tape& t) {
    Tensor* bound = t.nodes_[out].bound;
    const auto& g = t.grad_of(out);
    for (std::size_t i = 0; i < g.size(); ++i) bound->grad[i] += g[i];
  };
  return out;
}

Tape::Id Tape::matmul(Id a, Id b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  require(A.cols == B.rows, "matmul: inner dimensions differ");
  Tensor C(A.rows, B.cols);
  for (int i = 0; i < A.rows; ++i)
    for (int k = 0; k < A.cols; ++k) {
      const double aik = A.at(i, k);
      if (aik == 0.0) continue;
      const double* brow = &B.data[static_cast<std::size_t>(k) * B.cols];
      double* crow = &C.data[static_cast<std::size_t>(i) * C.cols];
      for (int j = 0; j < B.cols; ++j) crow[j] += aik * brow[j];
    }
  const Id out = push(std::move(C), {});
  nodes_[out].back = [a, b, out](Tape& t) {
    const Tensor& A = t.val(a);
    const Tensor& B = t.val(b);
    const auto& gC = t.grad_of(out);
    auto& gA = t.grad_of(a);
    auto& gB = t.grad_of(b);
    // dA = dC * B^T
    for (int i = 0; i < A.rows; ++i)
      for (int k = 0; k < A.cols; ++k) {
        double acc = 0.0;
        const double* gcrow = &gC[static_cast<std::size_t>(i) * B.cols];
        const double* brow = &B.data[static_cast<std::size_t>(k) * B.cols];
        for (int j = 0; j < B.cols; ++j) acc += gcrow[j] * brow[j];
        gA[static_cast<std::size_t>(i) * A.cols + k] += acc;
      }
    // dB = A^T * dC
    for (int k = 0; k < B.rows; ++k)
      for (int i = 0; i < A.rows; ++i) {
        const double aik = A.at(i, k);
        if (aik == 0.0) continue;
        const double* gcrow = &gC[static_cast<std::size_t>(i) * B.cols];
        double* gbrow = &gB[static_cast<std::size_t>(k) * B.cols];
        for (int j = 0; j < B.cols; ++j) gbrow[j] += aik * gcrow[j];
      }
  };
  return out;
}

Tape::Id Tape::add(Id a, Id b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  require(A.rows == B.rows && A.cols == B.cols, "add: shape mismatch");
  Tensor C = A;
  for (int i = 0; i < C.size(); ++i) C.data[i] += B.data[i];
  const Id out = push(std::move(C), {});
  nodes_[out].back = [a, b, out](Tape& t) {
    const auto& g = t.grad_of(out);
    auto& gA = t.grad_of(a);
    auto& gB = t.grad_of(b);
    for (std::size_t i = 0; i < g.size(); ++i) {
      gA[i] += g[i];
      gB[i] += g[i];
    }
  };
  return out;
}

Tape::Id Tape::sub(Id a, Id b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  require(A.rows == B.rows && A.cols == B.cols, "sub: shape mismatch");
  Tensor C = A;
  for (int i = 0; i < C.size(); ++i) C.data[i] -= B.data[i];
  const Id out = push(std::move(C), {});
  nodes_[out].back = [a, b, out](Tape& t) {
    const auto& g = t.grad_of(out);
    auto& gA = t.grad_of(a);
    auto& gB = t.grad_of(b);
    for (std::size_t i = 0; i < g.size(); ++i) {
      gA[i] += g[i];
      gB[i] -= g[i];
    }
  };
  return out;
}

Tape::Id Tape::mul(Id a, Id b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  require(A.rows == B.rows && A.cols == B.cols, "mul: shape mismatch");
  Tensor C = A;
  for (int i = 0; i < C.size(); ++i) C.data[i] *= B.data[i];
  const Id out = push(std::move(C), {});
  nodes_[out].back = [a, b, out](Tape& t) {
    const Tensor& A = t.val(a);
    const Tensor& B = t.val(b);
    const auto& g = t.grad_of(out);
    auto& gA = t.grad_of(a);
    auto& gB = t.grad_of(b);
    for (std::size_t i = 0; i < g.size(); ++i) {
      gA[i] += g[i] * B.data[i];
      gB[i] += g[i] * A.data[i];
    }
  };
  return out;
}

Tape::Id Tape::scale(Id a, double s) {
  Tensor C = val(a);
  for (double& v : C.data) v *= s;
  const Id out = push(std::move(C), {});
  nodes_[out].back = [a, s, out](Tape& t) {
    const auto& g = t.grad_of(out);
    auto& gA = t.grad_of(a);
    for (std::size_t i = 0; i < g.size(); ++i) gA[i] += s * g[i];
  };
  return out;
}

Tape::Id Tape::add_rowvec(Id a, Id v) {
  const Tensor& A = val(a);
  const Tensor& V = val(v);
  require(V.rows == 1 && V.cols == A.cols, "add_rowvec: vector shape mismatch");
  Tensor C = A;
  for (int i = 0; i < A.rows; ++i)
    for (int j = 0; j < A.cols; ++j) C.at(i, j) += V.data[j];
  const Id out = push(std::move(C), {});
  nodes_[out].back = [a, v, out](Tape& t) {
    const Tensor& A = t.val(a);
    const auto& g = t.grad_of(out);
    auto& gA = t.grad_of(a);
    auto& gV = t.grad_of(v);
    for (int i = 0; i < A.rows; ++i)
      for (int j = 0; j < A.cols; ++j) {
        const double gg = g[static_cast<std::size_t>(i) * A.cols + j];
        gA[static_cast<std::size_t>(i) * A.cols + j] += gg;
        gV[j] += gg;
      }
  };
  return out;
}

Tape::Id Tape::transpose(Id a) {
  const Tensor& A = val(a);
  Tensor C(A.cols, A.rows);
  for (int i = 0; i < A.rows; ++i)
    for (int j = 0; j < A.cols; ++j) C.at(j, i) = A.at(i, j);
  const Id out = push(std::move(C), {});
  nodes_[out].back = [a, out](Tape& t) {
    const Tensor& A = t.val(a);
    const auto& g = t.grad_of(out);
    auto& gA = t.grad_of(a);
    for (int i = 0; i < A.rows; ++i)
      for (int j = 0; j < A.cols; ++j)
        gA[static_cast<std::size_t>(i) * A.cols + j] +=
            g[static_cast<std::size_t>(j) * A.rows + i];
  };
  return out;
}

Tape::Id Tape::reshape(Id a, int rows, int cols) {
  const Tensor& A = val(a);
  require(rows * cols == A.size(), "reshape: element count mismatch");
  Tensor C(rows, cols);
  C.data = A.data;
  const Id out = push(std::move(C), {});
  nodes_[out].back = [a, out](Tape& t) {
    const auto& g = t.grad_of(out);
    auto& gA = t.grad_of(a);
    for (std::size_t i = 0; i < g.size(); ++i) gA[i] += g[i];
  };
  return out;
}

Tape::Id Tape::concat_cols(std::span<const Id> parts) {
  require(!parts.empty(), "concat_cols: empty part list");
  const int rows = val(parts[0]).rows;
  int cols = 0;
  for (Id p : parts) {
    require(val(p).rows == rows, "concat_cols: row count mismatch");
    cols += val(p).cols;
  }
  Tensor C(rows, cols);
  int offset = 0;
  for (Id p : parts) {
    const Tensor& P = val(p);
    for (int i = 0; i < rows; ++i)
      std::copy(&P.data[static_cast<std::size_t>(i) * P.cols],
                &P.data[static_cast<std::size_t>(i) * P.cols] + P.cols,
                &C.data[static_cast<std::size_t>(i) * cols + offset]);
    offset += P.cols;
  }
  std::vector<Id> owned(parts.begin(), parts.end());
  const Id out = push(std::move(C), {});
  nodes_[out].back = [owned, rows, cols, out](Tape& t) {
    const auto& g = t.grad_of(out);
    int offset = 0;
    for (Id p : owned) {
      const int pc = t.val(p).cols;
      auto& gP = t.grad_of(p);
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < pc; ++j)
          gP[static_cast<std::size_t>(i) * pc + j] +=
              g[static_cast<std::size_t>(i) * cols + offset + j];
      offset += pc;
    }
  };
  return out;
}

Tape::Id Tape::slice_cols(Id a, int begin, int end) {
  const Tensor& A = val(a);
  require(0 <= begin && begin < end && end <= A.cols, "slice_cols: bad range");
  Tensor C(A.rows, end - begin);
  for (int i = 0; i < A.rows; ++i)
    for (int j = begin; j < end; ++j) C.at(i, j - begin) = A.at(i, j);
  const Id out = push(std::move(C), {});
  nodes_[out].back = [a, begin, end, out](Tape& t) {
    const Tensor& A = t.val(a);
    const auto& g = t.grad_of(out);
    auto& gA = t.grad_of(a);
    const int width = end - begin;
    for (int i = 0; i < A.rows; ++i)
      for (int j = 0; j < width; ++j)
        gA[static_cast<std::size_t>(i) * A.cols + begin + j] +=
            g[static_cast<std::size_t>(i) * width + j];
  };
  return out;
}

Tape::Id Tape::repeat_rows(Id a, int n) {
  const Tensor& A = val(a);
  require(A.rows == 1, "repeat_rows: input must be a single row");
  require(n >= 1, "repeat_rows: n must be positive");
  Tensor C(n, A.cols);
  for (int i = 0; i < n; ++i)
    std::copy(A.data.begin(), A.data.end(),
              &C.data[static_cast<std::size_t>(i) * A.cols]);
  const Id out = push(std::move(C), {});
  nodes_[out].back = [a, n, out](Tape& t) {
    const Tensor& A = t.val(a);
    const auto& g = t.grad_of(out);
    auto& gA = t.grad_of(a);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < A.cols; ++j)
        gA[j] += g[static_cast<std::size_t>(i) * A.cols + j];
  };
  return out;
}

Tape::Id Tape::gather_rows(Id a, std::vector<int> rows) {
  const Tensor& A = val(a);
  for (int r : rows) require(0 <= r && r < A.rows, "gather_rows: row out of range");
  Tensor C(static_cast<int>(rows.size()), A.cols);
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(&A.data[static_cast<std::size_t>(rows[i]) * A.cols],
              &A.data[static_cast<std::size_t>(rows[i]) * A.cols] + A.cols,
              &C.data[i * A.cols]);
  const Id out = push(std::move(C), {});
  nodes_[out].back = [a, rows = std::move(rows), out](Tape& t) {
    const Tensor& A = t.val(a);
    const auto& g = t.grad_of(out);
    auto& gA = t.grad_of(a);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (int j = 0; j < A.cols; ++j)
        gA[static_cast<std::size_t>(rows[i]) * A.cols + j] += g[i * A.cols + j];
  };
  return out;
}

Tape::Id Tape::scatter_add_rows(Id a, std::vector<int> rows, int out_rows) {
  const Tensor& A = val(a);
  require(static_cast<int>(rows.size()) == A.rows, "scatter_add_rows: index count mismatch");
  for (int r : rows) require(0 <= r && r < out_rows, "scatter_add_rows: row out of range");
  Tensor C(out_rows, A.cols);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < A.cols; ++j) C.at(rows[i], j) += A.data[i * A.cols + j];
  const Id out = push(std::move(C), {});
  nodes_[out].back = [a, rows = std::move(rows), out](Tape& t) {
    const Tensor& A = t.val(a);
    const auto& g = t.grad_of(out);
    auto& gA = t.grad_of(a);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (int j = 0; j < A.cols; ++j)
        gA[i * A.cols + j] += g[static_cast<std::size_t>(rows[i]) * A.cols + j];
  };
  return out;
}

Tape::Id Tape::sum_all(Id a) {
  const Tensor& A = val(a);
  double total = 0.0;
  for (double v : A.data) total += v;
  const Id out = push(Tensor::full(1, 1, total), {});
  nodes_[out].back = [a, out](Tape& t) {
    const double g = t.grad_of(out)[0];
    auto& gA = t.grad_of(a);
    for (double& v : gA) v += g;
  };
  return out;
}

Tape::Id Tape::mean_all(Id a) {
  const Tensor& A = val(a);
  require(A.size() > 0, "mean_all: empty tensor");
  double total = 0.0;
  for (double v : A.data) total += v;
  const double inv = 1.0 / static_cast<double>(A.size());
  const Id out = push(Tensor::full(1, 1, total * inv), {});
  nodes_[out].back = [a, inv, out](Tape& t) {
    const double g = t.grad_of(out)[0] * inv;
    auto& gA = t.grad_of(a);
    for (double& v : gA) v += g;
  };
  return out;
}

Tape::Id Tape::mean_rows(Id a) {
  const Tensor& A = val(a);
  require(A.rows > 0, "mean_rows: empty tensor");
  Tensor C(1, A.cols);
  for (int i = 0; i < A.rows; ++i)
    for (int j = 0; j < A.cols; ++j) C.data[j] += A.at(i, j);
  const double inv = 1.0 / static_cast<double>(A.rows);
  for (double& v : C.data) v *= inv;
  const Id out = push(std::move(C), {});
  nodes_[out].back = [a, inv, out](Tape& t) {
    const Tensor& A = t.val(a);
    const auto& g = t.grad_of(out);
    auto& gA = t.grad_of(a);
    for (int i = 0; i < A.rows; ++i)
      for (int j = 0; j < A.cols; ++j)
        gA[static_cast<std::size_t>(i) * A.cols + j] += g[j] * inv;
  };
  return out;
}

Tape::Id Tape::masked_softmax_rows(Id a, std::vector<std::uint8_t> mask) {
  const Tensor& A = val(a);
  require(static_cast<int>(mask.size()) == A.size(), "masked_softmax: mask shape mismatch");
  Tensor C(A.rows, A.cols);
  for (int i = 0; i < A.rows; ++i) {
    const std::size_t base = static_cast<std::size_t>(i) * A.cols;
    double row_max = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (int j = 0; j < A.cols; ++j) {
      const double x = mask[base + j] ? A.data[base + j] : A.data[base + j] + kMaskSentinel;
      row_max = std::max(row_max, x);
      any = any || mask[base + j];
    }
    require(any, "masked_softmax: fully masked row");
    double denom = 0.0;
    for (int j = 0; j < A.cols; ++j) {
      const double x = mask[base + j] ? A.data[base + j] : A.data[base + j] + kMaskSentinel;
      const double e = std::exp(x - row_max);
      C.data[base + j] = e;
      denom += e;
    }
    for (int j = 0; j < A.cols; ++j) C.data[base + j] /= denom;
  }
  const Id out = push(std::move(C), {});
  nodes_[out].back = [a, out](Tape& t) {
    const Tensor& Y = t.val(out);
    const auto& g = t.grad_of(out);
    auto& gA = t.grad_of(a);
    for (int i = 0; i < Y.rows; ++i) {
      const std::size_t base = static_cast<std::size_t>(i) * Y.cols;
      double dot = 0.0;
      for (int j = 0; j < Y.cols; ++j) dot += g[base + j] * Y.data[base + j];
      for (int j = 0; j < Y.cols; ++j)
        gA[base + j] += Y.data[base + j] * (g[base + j] - dot);
    }
  };
  return out;
}

Tape::Id Tape::leaky_relu(Id a, double slope) {
  const Tensor& A = val(a);
  Tensor C = A;
  for (double& v : C.data) v = v > 0.0 ? v : slope * v;
  const Id out = push(std::move(C), {});
  nodes_[out].back = [a, slope, out](Tape& t) {
    const Tensor& A = t.val(a);
    const auto& g = t.grad_of(out);
    auto& gA = t.grad_of(a);
    for (std::size_t i = 0; i < g.size(); ++i)
      gA[i] += g[i] * (A.data[i] > 0.0 ? 1.0 : slope);
  };
  return out;
}

Tape::Id Tape::elu(Id a) {
  const Tensor& A = val(a);
  Tensor C = A;
  for (double& v : C.data) v = v > 0.0 ? v : std::expm1(v);
  const Id out = push(std::move(C), {});
  nodes_[out].back = [a, out](Tape& t) {
    const Tensor& A = t.val(a);
    const auto& g = t.grad_of(out);
    auto& gA = t.grad_of(a);
    for (std::size_t i = 0; i < g.size(); ++i)
      gA[i] += g[i] * (A.data[i] > 0.0 ? 1.0 : std::exp(A.data[i]));
  };
  return out;
}

Tape::Id Tape::tanh_op(Id a) {
  Tensor C = val(a);
  for (double& v : C.data) v = std::tanh(v);
  const Id out = push(std::move(C), {});
  nodes_[out].back = [a, out](Tape& t) {
    const Tensor& Y = t.val(out);
    const auto& g = t.grad_of(out);
    auto& gA = t.grad_of(a);
    for (std::size_t i = 0; i < g.size(); ++i)
      gA[i] += g[i] * (1.0 - Y.data[i] * Y.data[i]);
  };
  return out;
}

Tape::Id Tape::exp_op(Id a) {
  Tensor C = val(a);
  for (double& v : C.data) v = std::exp(v);
  const Id out = push(std::move(C), {});
  nodes_[out].back = [a, out](Tape& t) {
    const Tensor& Y = t.val(out);
    const auto& g = t.grad_of(out);
    auto& gA = t.grad_of(a);
    for (std::size_t i = 0; i < g.size(); ++i) gA[i] += g[i] * Y.data[i];
  };
  return out;
}

Tape::Id Tape::log_op(Id a) {
  const Tensor& A = val(a);
  Tensor C = A;
  for (double& v : C.data) {
    require(v > 0.0, "log: non-positive input");
    v = std::log(v);
  }
  const Id out = push(std::move(C), {});
  nodes_[out].back = [a, out](Tape& t) {
    const Tensor& A = t.val(a);
    const auto& g = t.grad_of(out);
    auto& gA = t.grad_of(a);
    for (std::size_t i = 0; i < g.size(); ++i) gA[i] += g[i] / A.data[i];
  };
  return out;
}

Tape::Id Tape::minimum(Id a, Id b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  require(A.rows == B.rows && A.cols == B.cols, "minimum: shape mismatch");
  Tensor C = A;
  for (int i = 0; i < C.size(); ++i) C.data[i] = std::min(A.data[i], B.data[i]);
  const Id out = push(std::move(C), {});
  // Subgradient at ties goes to the first argument.
  nodes_[out].back = [a, b, out](Tape& t) {
    const Tensor& A = t.val(a);
    const Tensor& B = t.val(b);
    const auto& g = t.grad_of(out);
    auto& gA = t.grad_of(a);
    auto& gB = t.grad_of(b);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (A.data[i] <= B.data[i])
        gA[i] += g[i];
      else
        gB[i] += g[i];
    }
  };
  return out;
}

Tape::Id Tape::clamp(Id a, double lo, double hi) {
  require(lo <= hi, "clamp: lo > hi");
  const Tensor& A = val(a);
  Tensor C = A;
  for (double& v : C.data) v = std::min(std::max(v, lo), hi);
  const Id out = push(std::move(C), {});
  nodes_[out].back = [a, lo, hi, out](Tape& t) {
    const Tensor& A = t.val(a);
    const auto& g = t.grad_of(out);
    auto& gA = t.grad_of(a);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (A.data[i] >= lo && A.data[i] <= hi) gA[i] += g[i];
  };
  return out;
}

void Tape::backward(Id loss) {
  require(val(loss).rows == 1 && val(loss).cols == 1, "backward: loss must be scalar");
  for (Node& n : nodes_) std::fill(n.grad.begin(), n.grad.end(), 0.0);
  nodes_[loss].grad[0] = 1.0;
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i)
    if (nodes_[i].back) nodes_[i].back(*this);
}

Adam::Adam(std::vector<Tensor*> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  for (Tensor* p : params_) {
    p->ensure_grad();
    m_.emplace_back(p->rows, p->cols);
    v_.emplace_back(p->rows, p->cols);
  }
}

void Adam::zero_grad() {
  for (Tensor* p : params_) p->zero_grad();
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = *params_[i];
    for (int k = 0; k < p.size(); ++k) {
      const double g = p.grad[k];
      m_[i].data[k] = config_.beta1 * m_[i].data[k] + (1.0 - config_.beta1) * g;
      v_[i].data[k] = config_.beta2 * v_[i].data[k] + (1.0 - config_.beta2) * g * g;
      const double mhat = m_[i].data[k] / bc1;
      const double vhat = v_[i].data[k] / bc2;
      p.data[k] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

void Adam::restore(std::vector<Tensor> m, std::vector<Tensor> v, std::int64_t t) {
  if (m.size() != params_.size() || v.size() != params_.size())
    throw ContractViolation("Adam::restore: moment count mismatch");
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (m[i].size() != params_[i]->size() || v[i].size() != params_[i]->size())
      throw ContractViolation("Adam::restore: moment shape mismatch");
  m_ = std::move(m);
  v_ = std::move(v);
  t_ = t;
}

}  // namespace fjsp
