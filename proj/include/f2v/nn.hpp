#pragma once

#include "f2v/autograd.hpp"
#include "f2v/rng.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace f2v::nn {

using ad::Graph;
using ad::Parameter;
using ad::Var;

// Named parameters in insertion order. Addresses are stable for the lifetime
// of the set, so layers hold plain pointers into it.
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;
  ParameterSet(ParameterSet&&) = default;
  ParameterSet& operator=(ParameterSet&&) = default;

  Parameter& add(const std::string& name, Matrix value);
  Parameter& xavier(const std::string& name, Index rows, Index cols, Rng& rng, double gain = 1.0);
  Parameter& zeros(const std::string& name, Index rows, Index cols);
  Parameter& constant(const std::string& name, Index rows, Index cols, double v);

  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  void zero_grad();

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, std::size_t> index_;
};

// Layers are thin handles onto parameters in a ParameterSet. Applied to a
// graph without gradients they only read the parameters.
struct Linear {
  Parameter* weight = nullptr;  // in x out
  Parameter* bias = nullptr;    // 1 x out, optional

  static Linear create(ParameterSet& ps, const std::string& name, Index in, Index out, Rng& rng,
                       bool with_bias = true, double gain = 1.0);
  Var operator()(Graph& g, Var x) const;
  Index in_features() const { return weight->value.rows(); }
  Index out_features() const { return weight->value.cols(); }
};

struct LayerNorm {
  Parameter* gamma = nullptr;
  Parameter* beta = nullptr;

  static LayerNorm create(ParameterSet& ps, const std::string& name, Index dim);
  Var operator()(Graph& g, Var x) const;
};

// Layer normalization whose scale and shift are predicted from a
// conditioning row vector: y = LN(x) * (1 + cond Wg) + cond Wb.
struct ConditionalLayerNorm {
  Linear to_scale;
  Linear to_shift;

  static ConditionalLayerNorm create(ParameterSet& ps, const std::string& name, Index dim, Index cond_dim, Rng& rng);
  Var operator()(Graph& g, Var x, Var cond) const;
};

using AttentionMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct MultiHeadAttention {
  Linear query, key, value, out;
  int heads = 1;

  static MultiHeadAttention create(ParameterSet& ps, const std::string& name, Index dim, int heads, Rng& rng);
  Var operator()(Graph& g, Var x, const AttentionMask* mask = nullptr) const;
};

struct FeedForward {
  Linear in, out;

  static FeedForward create(ParameterSet& ps, const std::string& name, Index dim, Index hidden, Rng& rng);
  Var operator()(Graph& g, Var x) const;
};

// Pre-norm transformer block. With a conditioning vector the norms are
// conditional layer norms driven by it.
struct TransformerBlock {
  std::optional<LayerNorm> norm1, norm2;
  std::optional<ConditionalLayerNorm> cnorm1, cnorm2;
  MultiHeadAttention attention;
  FeedForward ffn;

  static TransformerBlock create(ParameterSet& ps, const std::string& name, Index dim, int heads, Index ffn_hidden,
                                 Rng& rng, std::optional<Index> cond_dim = std::nullopt);
  Var operator()(Graph& g, Var x, const AttentionMask* mask = nullptr, std::optional<Var> cond = std::nullopt) const;
};

// 1-D convolution over time ('same' padding, odd kernel). Rows are frames.
struct Conv1d {
  Linear proj;  // (kernel*in) x out
  int kernel = 3;

  static Conv1d create(ParameterSet& ps, const std::string& name, Index in, Index out, int kernel, Rng& rng);
  Var operator()(Graph& g, Var x) const;
};

struct Conv2d {
  Linear proj;  // (kernel*kernel*in) x out
  ad::Conv2dGeometry geometry;

  static Conv2d create(ParameterSet& ps, const std::string& name, ad::Conv2dGeometry geom, Index out, Rng& rng);
  Var operator()(Graph& g, Var x) const;
};

// Sinusoidal position signal, rows = positions.
Matrix sinusoid_positions(Index length, Index dim);

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 1.0;  // global gradient norm clip; <= 0 disables
};

class Adam {
 public:
  explicit Adam(AdamOptions opts = {}) : opts_(opts) {}

  // Applies one update from the accumulated gradients and zeroes them.
  // Returns the pre-clip global gradient norm.
  double step(ParameterSet& params);
  // Restricts updates to parameters whose name starts with one of `prefixes`.
  void set_trainable_prefixes(std::vector<std::string> prefixes) { prefixes_ = std::move(prefixes); }
  const AdamOptions& options() const { return opts_; }
  void set_learning_rate(double lr) { opts_.learning_rate = lr; }

 private:
  bool trainable(const std::string& name) const;

  AdamOptions opts_;
  std::vector<std::string> prefixes_;
  std::map<std::string, std::pair<Matrix, Matrix>> moments_;
  long steps_ = 0;
};

}  // namespace f2v::nn
