#pragma once

// Tape-based reverse-mode differentiation over dense Eigen matrices.
//
// A Graph records every operation in creation order; backward() walks the
// tape in reverse. Parameters live outside the graph and receive their
// gradients when backward() finishes. Graphs are single-use and cheap; build
// one per training step or per inference call.

#include "f2v/core.hpp"

#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace f2v::ad {

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}
  void zero_grad() { grad.setZero(); }
};

class Graph;

class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
  bool valid() const { return graph_ != nullptr; }
  int id() const { return id_; }
  Graph& graph() const { return *graph_; }

 private:
  friend class Graph;
  Var(Graph* g, int id) : graph_(g), id_(id) {}

  Graph* graph_ = nullptr;
  int id_ = -1;
};

class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Matrix& out_grad)>;

  // With grad disabled no backward closures are recorded; inference only.
  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  Var constant(Matrix value);
  Var param(Parameter& p);
  // Read-only view of a parameter; never receives gradients.
  Var param(const Parameter& p);

  const Matrix& value(Var v) const;
  const Matrix& grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id_].requires_grad; }

  // Seeds d(loss)/d(loss) = 1 for a 1x1 loss and propagates. Parameter
  // gradients are added into Parameter::grad.
  void backward(Var loss);

  // Op authoring: records a node whose gradient flows to `inputs`.
  Var record(Matrix value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var record(Matrix value, std::span<const Var> inputs, BackwardFn fn);
  // Adds `g` into the gradient buffer of `v` when `v` requires grad.
  template <typename Derived>
  void accumulate(Var v, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[v.id_];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;
    Matrix grad;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  bool grad_enabled_;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_nodes_;
};

inline const Matrix& Var::value() const { return graph_->value(*this); }

// --- elementwise and linear algebra ---
Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b);  // a * b^T
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator-(Var a);
Var mul(Var a, Var b);  // Hadamard
Var scale(Var a, double k);
Var add_scalar(Var a, double k);
Var add_row(Var a, Var row);  // broadcast 1 x c over rows
Var mul_row(Var a, Var row);
Var mul_col(Var a, Var col);  // broadcast r x 1 over columns
Var relu(Var a);
Var gelu(Var a);
Var tanh(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);

// --- reductions ---
Var sum(Var a);
Var mean(Var a);
Var mean_rows(Var a);  // 1 x c
Var sum_cols(Var a);   // r x 1

// --- normalization / softmax ---
Var layer_norm(Var a, double eps = 1e-5);  // per-row, no affine
// Rows of `a` scaled to unit L2 norm. Throws DegenerateVector on a zero row.
Var row_normalize(Var a);
// `mask(i, j) == false` entries receive -inf before the softmax.
Var softmax_rows(Var a, const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>* mask = nullptr);
Var log_softmax_rows(Var a);
// Per-row log-sum-exp over the entries where mask is true; r x 1.
Var logsumexp_rows(Var a, const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& mask);

// --- losses ---
Var l1_loss(Var pred, Var target);   // mean |pred - target|
Var mse_loss(Var pred, Var target);  // mean (pred - target)^2
// Mean negative log-likelihood of integer targets under row-wise softmax.
Var cross_entropy(Var logits, std::span<const int> targets);

// --- structure ---
Var slice_rows(Var a, Index start, Index count);
Var slice_cols(Var a, Index start, Index count);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var transpose(Var a);
Var gather_rows(Var table, std::span<const int> ids);
// Row i repeated counts[i] times.
Var repeat_rows(Var a, std::span<const int> counts);
// Row i = mean of segment i (segments from cumulative counts).
Var segment_mean(Var a, std::span<const int> counts);
// Stack of time-shifted copies: row t = [a(t - k/2), ..., a(t + k/2)], zero padded.
Var unfold_time(Var a, int kernel);

struct Conv2dGeometry {
  int height = 0;
  int width = 0;
  int channels = 0;
  int kernel = 3;
  int stride = 1;
  int pad = 0;

  int out_height() const { return (height + 2 * pad - kernel) / stride + 1; }
  int out_width() const { return (width + 2 * pad - kernel) / stride + 1; }
};
// Input laid out as (height*width) x channels, row-major over pixels. Output
// is (out_h*out_w) x (kernel*kernel*channels) patches ready for a matmul.
Var im2col(Var a, const Conv2dGeometry& geom);

// Value equals `quantized`; the gradient passes to `x` unchanged.
Var straight_through(Var x, Var quantized);
Var stop_gradient(Var a);

}  // namespace f2v::ad
