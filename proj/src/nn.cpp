#include "f2v/nn.hpp"

#include <cmath>

namespace f2v::nn {

Parameter& ParameterSet::add(const std::string& name, Matrix value) {
  if (index_.contains(name)) throw InvalidInput("duplicate parameter name: " + name);
  index_.emplace(name, params_.size());
  params_.push_back(std::make_unique<Parameter>(name, std::move(value)));
  return *params_.back();
}

Parameter& ParameterSet::xavier(const std::string& name, Index rows, Index cols, Rng& rng, double gain) {
  const double bound = gain * std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix w(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) w(i, j) = rng.uniform(-bound, bound);
  }
  return add(name, std::move(w));
}

Parameter& ParameterSet::zeros(const std::string& name, Index rows, Index cols) {
  return add(name, Matrix::Zero(rows, cols));
}

Parameter& ParameterSet::constant(const std::string& name, Index rows, Index cols, double v) {
  return add(name, Matrix::Constant(rows, cols, v));
}

Parameter* ParameterSet::find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : params_[it->second].get();
}

const Parameter* ParameterSet::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : params_[it->second].get();
}

Parameter& ParameterSet::at(const std::string& name) {
  if (Parameter* p = find(name)) return *p;
  throw InvalidInput("unknown parameter: " + name);
}

const Parameter& ParameterSet::at(const std::string& name) const {
  if (const Parameter* p = find(name)) return *p;
  throw InvalidInput("unknown parameter: " + name);
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

// ---------------------------------------------------------------------------

Linear Linear::create(ParameterSet& ps, const std::string& name, Index in, Index out, Rng& rng, bool with_bias,
                      double gain) {
  Linear l;
  l.weight = &ps.xavier(name + ".weight", in, out, rng, gain);
  if (with_bias) l.bias = &ps.zeros(name + ".bias", 1, out);
  return l;
}

Var Linear::operator()(Graph& g, Var x) const {
  Var y = ad::matmul(x, g.param(*weight));
  if (bias) y = ad::add_row(y, g.param(*bias));
  return y;
}

LayerNorm LayerNorm::create(ParameterSet& ps, const std::string& name, Index dim) {
  return LayerNorm{&ps.constant(name + ".gamma", 1, dim, 1.0), &ps.zeros(name + ".beta", 1, dim)};
}

Var LayerNorm::operator()(Graph& g, Var x) const {
  return ad::add_row(ad::mul_row(ad::layer_norm(x), g.param(*gamma)), g.param(*beta));
}

ConditionalLayerNorm ConditionalLayerNorm::create(ParameterSet& ps, const std::string& name, Index dim,
                                                  Index cond_dim, Rng& rng) {
  ConditionalLayerNorm n;
  n.to_scale = Linear::create(ps, name + ".scale", cond_dim, dim, rng, true, 0.1);
  n.to_shift = Linear::create(ps, name + ".shift", cond_dim, dim, rng, true, 0.1);
  return n;
}

Var ConditionalLayerNorm::operator()(Graph& g, Var x, Var cond) const {
  Var scale = ad::add_scalar(to_scale(g, cond), 1.0);
  Var shift = to_shift(g, cond);
  return ad::add_row(ad::mul_row(ad::layer_norm(x), scale), shift);
}

MultiHeadAttention MultiHeadAttention::create(ParameterSet& ps, const std::string& name, Index dim, int heads,
                                              Rng& rng) {
  if (heads < 1 || dim % heads != 0) throw InvalidInput("attention width must divide by head count");
  MultiHeadAttention a;
  a.query = Linear::create(ps, name + ".q", dim, dim, rng);
  a.key = Linear::create(ps, name + ".k", dim, dim, rng);
  a.value = Linear::create(ps, name + ".v", dim, dim, rng);
  a.out = Linear::create(ps, name + ".o", dim, dim, rng);
  a.heads = heads;
  return a;
}

Var MultiHeadAttention::operator()(Graph& g, Var x, const AttentionMask* mask) const {
  const Index dim = x.cols();
  const Index hd = dim / heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(hd));
  Var q = query(g, x);
  Var k = key(g, x);
  Var v = value(g, x);
  std::vector<Var> parts;
  parts.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    Var qh = heads == 1 ? q : ad::slice_cols(q, h * hd, hd);
    Var kh = heads == 1 ? k : ad::slice_cols(k, h * hd, hd);
    Var vh = heads == 1 ? v : ad::slice_cols(v, h * hd, hd);
    Var att = ad::softmax_rows(ad::scale(ad::matmul_nt(qh, kh), inv), mask);
    parts.push_back(ad::matmul(att, vh));
  }
  Var merged = heads == 1 ? parts[0] : ad::concat_cols(parts);
  return out(g, merged);
}

FeedForward FeedForward::create(ParameterSet& ps, const std::string& name, Index dim, Index hidden, Rng& rng) {
  return FeedForward{Linear::create(ps, name + ".in", dim, hidden, rng),
                     Linear::create(ps, name + ".out", hidden, dim, rng)};
}

Var FeedForward::operator()(Graph& g, Var x) const { return out(g, ad::gelu(in(g, x))); }

TransformerBlock TransformerBlock::create(ParameterSet& ps, const std::string& name, Index dim, int heads,
                                          Index ffn_hidden, Rng& rng, std::optional<Index> cond_dim) {
  TransformerBlock b;
  if (cond_dim) {
    b.cnorm1 = ConditionalLayerNorm::create(ps, name + ".norm1", dim, *cond_dim, rng);
    b.cnorm2 = ConditionalLayerNorm::create(ps, name + ".norm2", dim, *cond_dim, rng);
  } else {
    b.norm1 = LayerNorm::create(ps, name + ".norm1", dim);
    b.norm2 = LayerNorm::create(ps, name + ".norm2", dim);
  }
  b.attention = MultiHeadAttention::create(ps, name + ".attn", dim, heads, rng);
  b.ffn = FeedForward::create(ps, name + ".ffn", dim, ffn_hidden, rng);
  return b;
}

Var TransformerBlock::operator()(Graph& g, Var x, const AttentionMask* mask, std::optional<Var> cond) const {
  if (cnorm1 && !cond) throw InvalidInput("conditional block applied without a conditioning vector");
  Var h = cnorm1 ? (*cnorm1)(g, x, *cond) : (*norm1)(g, x);
  x = x + attention(g, h, mask);
  h = cnorm2 ? (*cnorm2)(g, x, *cond) : (*norm2)(g, x);
  return x + ffn(g, h);
}

Conv1d Conv1d::create(ParameterSet& ps, const std::string& name, Index in, Index out, int kernel, Rng& rng) {
  if (kernel < 1 || kernel % 2 == 0) throw InvalidInput("conv1d kernel must be odd");
  return Conv1d{Linear::create(ps, name, in * kernel, out, rng), kernel};
}

Var Conv1d::operator()(Graph& g, Var x) const {
  return proj(g, kernel == 1 ? x : ad::unfold_time(x, kernel));
}

Conv2d Conv2d::create(ParameterSet& ps, const std::string& name, ad::Conv2dGeometry geom, Index out, Rng& rng) {
  const Index fan_in = static_cast<Index>(geom.kernel) * geom.kernel * geom.channels;
  return Conv2d{Linear::create(ps, name, fan_in, out, rng, true, std::sqrt(2.0)), geom};
}

Var Conv2d::operator()(Graph& g, Var x) const { return proj(g, ad::im2col(x, geometry)); }

Matrix sinusoid_positions(Index length, Index dim) {
  Matrix pe(length, dim);
  for (Index t = 0; t < length; ++t) {
    for (Index i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      pe(t, i) = (i % 2 == 0) ? std::sin(static_cast<double>(t) * rate) : std::cos(static_cast<double>(t) * rate);
    }
  }
  return pe;
}

// ---------------------------------------------------------------------------

bool Adam::trainable(const std::string& name) const {
  if (prefixes_.empty()) return true;
  for (const auto& p : prefixes_) {
    if (name.starts_with(p)) return true;
  }
  return false;
}

double Adam::step(ParameterSet& params) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (trainable(p->name)) sq += p->grad.squaredNorm();
  }
  const double norm = std::sqrt(sq);
  const double clip = (opts_.clip_norm > 0.0 && norm > opts_.clip_norm) ? opts_.clip_norm / norm : 1.0;
  ++steps_;
  const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(steps_));
  for (auto& p : params) {
    if (!trainable(p->name)) {
      p->zero_grad();
      continue;
    }
    auto [it, inserted] = moments_.try_emplace(p->name);
    auto& [m, v] = it->second;
    if (inserted) {
      m = Matrix::Zero(p->value.rows(), p->value.cols());
      v = Matrix::Zero(p->value.rows(), p->value.cols());
    }
    const Matrix g = p->grad * clip;
    m = opts_.beta1 * m + (1.0 - opts_.beta1) * g;
    v = opts_.beta2 * v + (1.0 - opts_.beta2) * g.cwiseProduct(g);
    p->value.array() -= opts_.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + opts_.epsilon);
    p->zero_grad();
  }
  return norm;
}

}  // namespace f2v::nn
