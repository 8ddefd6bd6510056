#include "f2v/autograd.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace f2v::ad {

using BoolArray = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// ---------------------------------------------------------------------------
// Graph

Var Graph::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Graph::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
  Node n;
  n.external = &p.value;
  n.param = grad_enabled_ ? &p : nullptr;
  n.requires_grad = grad_enabled_;
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size() - 1);
  param_nodes_.emplace(&p, id);
  return Var(this, id);
}

Var Graph::param(const Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
  Node n;
  n.external = &p.value;
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size() - 1);
  param_nodes_.emplace(&p, id);
  return Var(this, id);
}

const Matrix& Graph::value(Var v) const {
  const Node& n = nodes_[v.id_];
  return n.external ? *n.external : n.value;
}

const Matrix& Graph::grad(Var v) const { return nodes_[v.id_].grad; }

Var Graph::record(Matrix value, std::initializer_list<Var> inputs, BackwardFn fn) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(fn));
}

Var Graph::record(Matrix value, std::span<const Var> inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  if (grad_enabled_) {
    for (const Var& in : inputs) {
      if (nodes_[in.id_].requires_grad) {
        n.requires_grad = true;
        break;
      }
    }
    if (n.requires_grad) n.backward = std::move(fn);
  }
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

void Graph::backward(Var loss) {
  if (!grad_enabled_) throw InvalidInput("backward on a graph without gradients");
  const Matrix& lv = value(loss);
  if (lv.rows() != 1 || lv.cols() != 1) throw InvalidInput("backward requires a 1x1 loss");
  if (!nodes_[loss.id_].requires_grad) return;
  nodes_[loss.id_].grad = Matrix::Ones(1, 1);
  for (int id = loss.id_; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backward) {
      n.backward(*this, n.grad);
    } else if (n.param) {
      n.param->grad += n.grad;
    }
  }
}

// ---------------------------------------------------------------------------
// Elementwise and linear algebra

Var matmul(Var a, Var b) {
  Graph& g = a.graph();
  if (a.cols() != b.rows()) throw InvalidInput("matmul shape mismatch");
  return g.record(a.value() * b.value(), {a, b}, [a, b](Graph& g, const Matrix& og) {
    if (g.requires_grad(a)) g.accumulate(a, og * b.value().transpose());
    if (g.requires_grad(b)) g.accumulate(b, a.value().transpose() * og);
  });
}

Var matmul_nt(Var a, Var b) {
  Graph& g = a.graph();
  if (a.cols() != b.cols()) throw InvalidInput("matmul_nt shape mismatch");
  return g.record(a.value() * b.value().transpose(), {a, b}, [a, b](Graph& g, const Matrix& og) {
    if (g.requires_grad(a)) g.accumulate(a, og * b.value());
    if (g.requires_grad(b)) g.accumulate(b, og.transpose() * a.value());
  });
}

static void check_same_shape(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw InvalidInput(std::string(op) + " shape mismatch");
}

Var operator+(Var a, Var b) {
  check_same_shape(a, b, "add");
  return a.graph().record(a.value() + b.value(), {a, b}, [a, b](Graph& g, const Matrix& og) {
    g.accumulate(a, og);
    g.accumulate(b, og);
  });
}

Var operator-(Var a, Var b) {
  check_same_shape(a, b, "sub");
  return a.graph().record(a.value() - b.value(), {a, b}, [a, b](Graph& g, const Matrix& og) {
    g.accumulate(a, og);
    g.accumulate(b, -og);
  });
}

Var operator-(Var a) {
  return a.graph().record(-a.value(), {a}, [a](Graph& g, const Matrix& og) { g.accumulate(a, -og); });
}

Var mul(Var a, Var b) {
  check_same_shape(a, b, "mul");
  return a.graph().record(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Graph& g, const Matrix& og) {
    if (g.requires_grad(a)) g.accumulate(a, og.cwiseProduct(b.value()));
    if (g.requires_grad(b)) g.accumulate(b, og.cwiseProduct(a.value()));
  });
}

Var scale(Var a, double k) {
  return a.graph().record(a.value() * k, {a}, [a, k](Graph& g, const Matrix& og) { g.accumulate(a, og * k); });
}

Var add_scalar(Var a, double k) {
  return a.graph().record((a.value().array() + k).matrix(), {a},
                          [a](Graph& g, const Matrix& og) { g.accumulate(a, og); });
}

Var add_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw InvalidInput("add_row shape mismatch");
  Matrix out = a.value().rowwise() + row.value().row(0);
  return a.graph().record(std::move(out), {a, row}, [a, row](Graph& g, const Matrix& og) {
    g.accumulate(a, og);
    if (g.requires_grad(row)) g.accumulate(row, og.colwise().sum());
  });
}

Var mul_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw InvalidInput("mul_row shape mismatch");
  Matrix out = a.value().array().rowwise() * row.value().row(0).array();
  return a.graph().record(std::move(out), {a, row}, [a, row](Graph& g, const Matrix& og) {
    if (g.requires_grad(a)) g.accumulate(a, (og.array().rowwise() * row.value().row(0).array()).matrix());
    if (g.requires_grad(row)) g.accumulate(row, og.cwiseProduct(a.value()).colwise().sum());
  });
}

Var mul_col(Var a, Var col) {
  if (col.cols() != 1 || col.rows() != a.rows()) throw InvalidInput("mul_col shape mismatch");
  Matrix out = a.value().array().colwise() * col.value().col(0).array();
  return a.graph().record(std::move(out), {a, col}, [a, col](Graph& g, const Matrix& og) {
    if (g.requires_grad(a)) g.accumulate(a, (og.array().colwise() * col.value().col(0).array()).matrix());
    if (g.requires_grad(col)) g.accumulate(col, og.cwiseProduct(a.value()).rowwise().sum());
  });
}

Var relu(Var a) {
  Matrix out = a.value().cwiseMax(0.0);
  return a.graph().record(std::move(out), {a}, [a](Graph& g, const Matrix& og) {
    g.accumulate(a, (a.value().array() > 0.0).select(og, 0.0));
  });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
}

Var gelu(Var a) {
  const auto x = a.value().array();
  const Eigen::ArrayXXd t = (kGeluC * (x + 0.044715 * x.cube())).tanh();
  Matrix out = (0.5 * x * (1.0 + t)).matrix();
  return a.graph().record(std::move(out), {a}, [a, t](Graph& g, const Matrix& og) {
    const auto x = a.value().array();
    const auto dt = (1.0 - t.square()) * kGeluC * (1.0 + 3.0 * 0.044715 * x.square());
    g.accumulate(a, (og.array() * (0.5 * (1.0 + t) + 0.5 * x * dt)).matrix());
  });
}

Var tanh(Var a) {
  Matrix out = a.value().array().tanh().matrix();
  return a.graph().record(out, {a}, [a, out](Graph& g, const Matrix& og) {
    g.accumulate(a, (og.array() * (1.0 - out.array().square())).matrix());
  });
}

Var exp(Var a) {
  Matrix out = a.value().array().exp().matrix();
  return a.graph().record(out, {a}, [a, out](Graph& g, const Matrix& og) { g.accumulate(a, og.cwiseProduct(out)); });
}

Var log(Var a) {
  Matrix out = a.value().array().log().matrix();
  return a.graph().record(std::move(out), {a}, [a](Graph& g, const Matrix& og) {
    g.accumulate(a, (og.array() / a.value().array()).matrix());
  });
}

Var square(Var a) {
  Matrix out = a.value().array().square().matrix();
  return a.graph().record(std::move(out), {a}, [a](Graph& g, const Matrix& og) {
    g.accumulate(a, 2.0 * og.cwiseProduct(a.value()));
  });
}

// ---------------------------------------------------------------------------
// Reductions

Var sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.graph().record(std::move(out), {a}, [a](Graph& g, const Matrix& og) {
    g.accumulate(a, Matrix::Constant(a.rows(), a.cols(), og(0, 0)));
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  Matrix out(1, 1);
  out(0, 0) = a.value().sum() / n;
  return a.graph().record(std::move(out), {a}, [a, n](Graph& g, const Matrix& og) {
    g.accumulate(a, Matrix::Constant(a.rows(), a.cols(), og(0, 0) / n));
  });
}

Var mean_rows(Var a) {
  const double n = static_cast<double>(a.rows());
  Matrix out = a.value().colwise().sum() / n;
  return a.graph().record(std::move(out), {a}, [a, n](Graph& g, const Matrix& og) {
    g.accumulate(a, og.replicate(a.rows(), 1) / n);
  });
}

Var sum_cols(Var a) {
  Matrix out = a.value().rowwise().sum();
  return a.graph().record(std::move(out), {a}, [a](Graph& g, const Matrix& og) {
    g.accumulate(a, og.replicate(1, a.cols()));
  });
}

// ---------------------------------------------------------------------------
// Normalization / softmax

Var layer_norm(Var a, double eps) {
  const Matrix& x = a.value();
  const Index c = x.cols();
  Vector inv_std(x.rows());
  Matrix y(x.rows(), c);
  for (Index i = 0; i < x.rows(); ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    y.row(i) = (x.row(i).array() - mu) * inv_std(i);
  }
  return a.graph().record(y, {a}, [a, y, inv_std](Graph& g, const Matrix& og) {
    Matrix dx(y.rows(), y.cols());
    for (Index i = 0; i < y.rows(); ++i) {
      const double mg = og.row(i).mean();
      const double mgy = og.row(i).dot(y.row(i)) / static_cast<double>(y.cols());
      dx.row(i) = (og.row(i).array() - mg - y.row(i).array() * mgy) * inv_std(i);
    }
    g.accumulate(a, dx);
  });
}

Var row_normalize(Var a) {
  const Matrix& x = a.value();
  Vector norms = x.rowwise().norm();
  for (Index i = 0; i < norms.size(); ++i) {
    if (!(norms(i) > 0.0)) throw DegenerateVector("zero-norm vector in cosine similarity");
  }
  Matrix y = x.array().colwise() / norms.array();
  return a.graph().record(y, {a}, [a, y, norms](Graph& g, const Matrix& og) {
    Vector dots = og.cwiseProduct(y).rowwise().sum();
    Matrix dx = og - (y.array().colwise() * dots.array()).matrix();
    dx.array().colwise() /= norms.array();
    g.accumulate(a, dx);
  });
}

Var softmax_rows(Var a, const BoolArray* mask) {
  const Matrix& x = a.value();
  if (mask && (mask->rows() != x.rows() || mask->cols() != x.cols())) throw InvalidInput("softmax mask shape");
  Matrix y(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < x.cols(); ++j) {
      if (!mask || (*mask)(i, j)) mx = std::max(mx, x(i, j));
    }
    double s = 0.0;
    for (Index j = 0; j < x.cols(); ++j) {
      const double e = (!mask || (*mask)(i, j)) ? std::exp(x(i, j) - mx) : 0.0;
      y(i, j) = e;
      s += e;
    }
    y.row(i) /= s;
  }
  return a.graph().record(y, {a}, [a, y](Graph& g, const Matrix& og) {
    Vector dots = og.cwiseProduct(y).rowwise().sum();
    g.accumulate(a, (y.array() * (og.array().colwise() - dots.array())).matrix());
  });
}

static Vector row_logsumexp(const Matrix& x) {
  Vector lse(x.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    const double mx = x.row(i).maxCoeff();
    lse(i) = mx + std::log((x.row(i).array() - mx).exp().sum());
  }
  return lse;
}

Var log_softmax_rows(Var a) {
  const Matrix& x = a.value();
  Matrix y = x.colwise() - row_logsumexp(x);
  return a.graph().record(y, {a}, [a, y](Graph& g, const Matrix& og) {
    Vector gs = og.rowwise().sum();
    Matrix p = y.array().exp().matrix();
    g.accumulate(a, og - (p.array().colwise() * gs.array()).matrix());
  });
}

Var logsumexp_rows(Var a, const BoolArray& mask) {
  const Matrix& x = a.value();
  if (mask.rows() != x.rows() || mask.cols() != x.cols()) throw InvalidInput("logsumexp mask shape");
  Matrix out(x.rows(), 1);
  Matrix p = Matrix::Zero(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < x.cols(); ++j) {
      if (mask(i, j)) mx = std::max(mx, x(i, j));
    }
    if (!std::isfinite(mx)) throw InvalidInput("logsumexp over an empty mask row");
    double s = 0.0;
    for (Index j = 0; j < x.cols(); ++j) {
      if (mask(i, j)) {
        p(i, j) = std::exp(x(i, j) - mx);
        s += p(i, j);
      }
    }
    p.row(i) /= s;
    out(i, 0) = mx + std::log(s);
  }
  return a.graph().record(std::move(out), {a}, [a, p](Graph& g, const Matrix& og) {
    g.accumulate(a, (p.array().colwise() * og.col(0).array()).matrix());
  });
}

// ---------------------------------------------------------------------------
// Losses

Var l1_loss(Var pred, Var target) {
  check_same_shape(pred, target, "l1_loss");
  const Matrix diff = pred.value() - target.value();
  const double n = static_cast<double>(diff.size());
  Matrix out(1, 1);
  out(0, 0) = diff.cwiseAbs().sum() / n;
  return pred.graph().record(std::move(out), {pred, target}, [pred, target, diff, n](Graph& g, const Matrix& og) {
    const Matrix sgn = diff.array().sign().matrix() * (og(0, 0) / n);
    g.accumulate(pred, sgn);
    g.accumulate(target, -sgn);
  });
}

Var mse_loss(Var pred, Var target) {
  check_same_shape(pred, target, "mse_loss");
  const Matrix diff = pred.value() - target.value();
  const double n = static_cast<double>(diff.size());
  Matrix out(1, 1);
  out(0, 0) = diff.squaredNorm() / n;
  return pred.graph().record(std::move(out), {pred, target}, [pred, target, diff, n](Graph& g, const Matrix& og) {
    const Matrix d = diff * (2.0 * og(0, 0) / n);
    g.accumulate(pred, d);
    g.accumulate(target, -d);
  });
}

Var cross_entropy(Var logits, std::span<const int> targets) {
  const Matrix& x = logits.value();
  if (static_cast<Index>(targets.size()) != x.rows()) throw InvalidInput("cross_entropy target count");
  const Vector lse = row_logsumexp(x);
  const double n = static_cast<double>(x.rows());
  double total = 0.0;
  std::vector<int> t(targets.begin(), targets.end());
  for (Index i = 0; i < x.rows(); ++i) {
    if (t[i] < 0 || t[i] >= x.cols()) throw InvalidInput("cross_entropy target out of range");
    total += lse(i) - x(i, t[i]);
  }
  Matrix out(1, 1);
  out(0, 0) = total / n;
  return logits.graph().record(std::move(out), {logits}, [logits, lse, t, n](Graph& g, const Matrix& og) {
    Matrix p = (logits.value().colwise() - lse).array().exp().matrix();
    for (Index i = 0; i < p.rows(); ++i) p(i, t[i]) -= 1.0;
    g.accumulate(logits, p * (og(0, 0) / n));
  });
}

// ---------------------------------------------------------------------------
// Structure

Var slice_rows(Var a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw InvalidInput("slice_rows out of range");
  Matrix out = a.value().middleRows(start, count);
  return a.graph().record(std::move(out), {a}, [a, start, count](Graph& g, const Matrix& og) {
    Matrix d = Matrix::Zero(a.rows(), a.cols());
    d.middleRows(start, count) = og;
    g.accumulate(a, d);
  });
}

Var slice_cols(Var a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw InvalidInput("slice_cols out of range");
  Matrix out = a.value().middleCols(start, count);
  return a.graph().record(std::move(out), {a}, [a, start, count](Graph& g, const Matrix& og) {
    Matrix d = Matrix::Zero(a.rows(), a.cols());
    d.middleCols(start, count) = og;
    g.accumulate(a, d);
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw InvalidInput("concat_rows of nothing");
  Index rows = 0;
  const Index cols = parts[0].cols();
  for (const Var& p : parts) {
    if (p.cols() != cols) throw InvalidInput("concat_rows column mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Index r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  std::vector<Var> ins(parts.begin(), parts.end());
  return parts[0].graph().record(std::move(out), parts, [ins](Graph& g, const Matrix& og) {
    Index r = 0;
    for (const Var& p : ins) {
      g.accumulate(p, og.middleRows(r, p.rows()));
      r += p.rows();
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw InvalidInput("concat_cols of nothing");
  Index cols = 0;
  const Index rows = parts[0].rows();
  for (const Var& p : parts) {
    if (p.rows() != rows) throw InvalidInput("concat_cols row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Index c = 0;
  for (const Var& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  std::vector<Var> ins(parts.begin(), parts.end());
  return parts[0].graph().record(std::move(out), parts, [ins](Graph& g, const Matrix& og) {
    Index c = 0;
    for (const Var& p : ins) {
      g.accumulate(p, og.middleCols(c, p.cols()));
      c += p.cols();
    }
  });
}

Var transpose(Var a) {
  return a.graph().record(a.value().transpose(), {a},
                          [a](Graph& g, const Matrix& og) { g.accumulate(a, og.transpose()); });
}

Var gather_rows(Var table, std::span<const int> ids) {
  const Matrix& t = table.value();
  std::vector<int> idx(ids.begin(), ids.end());
  Matrix out(static_cast<Index>(idx.size()), t.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= t.rows()) throw InvalidInput("gather_rows index out of range");
    out.row(static_cast<Index>(i)) = t.row(idx[i]);
  }
  return table.graph().record(std::move(out), {table}, [table, idx](Graph& g, const Matrix& og) {
    Matrix d = Matrix::Zero(table.rows(), table.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) d.row(idx[i]) += og.row(static_cast<Index>(i));
    g.accumulate(table, d);
  });
}

Var repeat_rows(Var a, std::span<const int> counts) {
  if (static_cast<Index>(counts.size()) != a.rows()) throw InvalidInput("repeat_rows count mismatch");
  std::vector<int> c(counts.begin(), counts.end());
  Index total = 0;
  for (int k : c) {
    if (k < 0) throw InvalidInput("repeat_rows negative count");
    total += k;
  }
  Matrix out(total, a.cols());
  Index r = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (int k = 0; k < c[i]; ++k) out.row(r++) = a.value().row(static_cast<Index>(i));
  }
  return a.graph().record(std::move(out), {a}, [a, c](Graph& g, const Matrix& og) {
    Matrix d(a.rows(), a.cols());
    Index r = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      d.row(static_cast<Index>(i)) = og.middleRows(r, c[i]).colwise().sum();
      r += c[i];
    }
    g.accumulate(a, d);
  });
}

Var segment_mean(Var a, std::span<const int> counts) {
  std::vector<int> c(counts.begin(), counts.end());
  Index total = 0;
  for (int k : c) {
    if (k < 1) throw InvalidInput("segment_mean requires positive counts");
    total += k;
  }
  if (total != a.rows()) throw InvalidInput("segment_mean counts do not sum to row count");
  Matrix out(static_cast<Index>(c.size()), a.cols());
  Index r = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    out.row(static_cast<Index>(i)) = a.value().middleRows(r, c[i]).colwise().sum() / static_cast<double>(c[i]);
    r += c[i];
  }
  return a.graph().record(std::move(out), {a}, [a, c](Graph& g, const Matrix& og) {
    Matrix d(a.rows(), a.cols());
    Index r = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      const RowVector row = og.row(static_cast<Index>(i)) / static_cast<double>(c[i]);
      for (int k = 0; k < c[i]; ++k) d.row(r++) = row;
    }
    g.accumulate(a, d);
  });
}

Var unfold_time(Var a, int kernel) {
  if (kernel < 1 || kernel % 2 == 0) throw InvalidInput("unfold_time requires an odd kernel");
  const Matrix& x = a.value();
  const Index m = x.rows();
  const Index c = x.cols();
  const int half = kernel / 2;
  Matrix out = Matrix::Zero(m, c * kernel);
  for (int j = 0; j < kernel; ++j) {
    const int off = j - half;
    const Index lo = std::max<Index>(0, -off);
    const Index hi = std::min<Index>(m, m - off);
    if (hi > lo) out.block(lo, j * c, hi - lo, c) = x.middleRows(lo + off, hi - lo);
  }
  return a.graph().record(std::move(out), {a}, [a, kernel, half, m, c](Graph& g, const Matrix& og) {
    Matrix d = Matrix::Zero(m, c);
    for (int j = 0; j < kernel; ++j) {
      const int off = j - half;
      const Index lo = std::max<Index>(0, -off);
      const Index hi = std::min<Index>(m, m - off);
      if (hi > lo) d.middleRows(lo + off, hi - lo) += og.block(lo, j * c, hi - lo, c);
    }
    g.accumulate(a, d);
  });
}

Var im2col(Var a, const Conv2dGeometry& geom) {
  const Matrix& x = a.value();
  if (x.rows() != static_cast<Index>(geom.height) * geom.width || x.cols() != geom.channels) {
    throw InvalidInput("im2col input shape does not match geometry");
  }
  const int oh = geom.out_height();
  const int ow = geom.out_width();
  const int k = geom.kernel;
  const int c = geom.channels;
  if (oh < 1 || ow < 1) throw InvalidInput("im2col output would be empty");
  Matrix out = Matrix::Zero(static_cast<Index>(oh) * ow, static_cast<Index>(k) * k * c);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const Index row = static_cast<Index>(oy) * ow + ox;
      for (int ky = 0; ky < k; ++ky) {
        const int iy = oy * geom.stride + ky - geom.pad;
        if (iy < 0 || iy >= geom.height) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = ox * geom.stride + kx - geom.pad;
          if (ix < 0 || ix >= geom.width) continue;
          out.block(row, (static_cast<Index>(ky) * k + kx) * c, 1, c) = x.row(static_cast<Index>(iy) * geom.width + ix);
        }
      }
    }
  }
  return a.graph().record(std::move(out), {a}, [a, geom, oh, ow](Graph& g, const Matrix& og) {
    const int k = geom.kernel;
    const int c = geom.channels;
    Matrix d = Matrix::Zero(a.rows(), a.cols());
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const Index row = static_cast<Index>(oy) * ow + ox;
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * geom.stride + ky - geom.pad;
          if (iy < 0 || iy >= geom.height) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ox * geom.stride + kx - geom.pad;
            if (ix < 0 || ix >= geom.width) continue;
            d.row(static_cast<Index>(iy) * geom.width + ix) += og.block(row, (static_cast<Index>(ky) * k + kx) * c, 1, c);
          }
        }
      }
    }
    g.accumulate(a, d);
  });
}

Var straight_through(Var x, Var quantized) {
  check_same_shape(x, quantized, "straight_through");
  return x.graph().record(quantized.value(), {x}, [x](Graph& g, const Matrix& og) { g.accumulate(x, og); });
}

Var stop_gradient(Var a) { return a.graph().constant(a.value()); }

}  // namespace f2v::ad
