#pragma once

// Prosody codec: low-band mel frames -> phoneme-level pooling -> vector
// quantization against a learned codebook.

#include "f2v/audio.hpp"
#include "f2v/autograd.hpp"
#include "f2v/nn.hpp"
#include "f2v/rng.hpp"

#include <vector>

namespace f2v {

struct Codebook {
  Matrix entries;     // T x d
  Vector ema_count;   // T, exponential moving usage
  Matrix ema_sum;     // T x d, exponential moving sum of assigned vectors

  Index size() const { return entries.rows(); }
  Index dim() const { return entries.cols(); }
};

Codebook make_codebook(Index codes, Index dim, Rng& rng, double init_scale = 0.1);
// Entries taken from given vectors (sampled with replacement), counts reset.
void initialize_codebook_from(Codebook& codebook, const Matrix& vectors, Rng& rng);

// Nearest entry by squared L2 distance; ties go to the lowest index.
template <typename DerivedH, typename DerivedC>
std::vector<int> nearest_codes(const Eigen::MatrixBase<DerivedH>& h, const Eigen::MatrixBase<DerivedC>& entries) {
  if (h.cols() != entries.cols()) throw InvalidInput("quantize: dimension mismatch with codebook");
  std::vector<int> idx(static_cast<std::size_t>(h.rows()));
  const auto norms = entries.rowwise().squaredNorm().eval();
  for (Index i = 0; i < h.rows(); ++i) {
    const auto dots = (entries * h.row(i).transpose()).eval();
    int best = 0;
    auto best_d = norms(0) - 2 * dots(0);
    for (Index t = 1; t < entries.rows(); ++t) {
      const auto dist = norms(t) - 2 * dots(t);
      if (dist < best_d) {
        best_d = dist;
        best = static_cast<int>(t);
      }
    }
    idx[static_cast<std::size_t>(i)] = best;
  }
  return idx;
}

struct QuantizeResult {
  ProsodyCodes codes;
  Matrix quantized;
  double codebook_loss = 0.0;    // mean ||sg(h) - q||^2
  double commitment_loss = 0.0;  // beta * mean ||h - sg(q)||^2
};

QuantizeResult quantize(const Matrix& h, const Codebook& codebook, double beta = 0.25);
Matrix dequantize(const ProsodyCodes& codes, const Codebook& codebook);

// Differentiable quantization. `quantized` carries the straight-through
// gradient to `h`; `codebook_loss` differentiates into `entries` only and
// `commitment_loss` into `h` only.
struct VqTerms {
  ad::Var quantized;
  ad::Var codebook_loss;
  ad::Var commitment_loss;
  ProsodyCodes codes;
};
VqTerms quantize(ad::Var h, ad::Var entries, double beta);

struct CodebookUpdateOptions {
  double decay = 0.99;
  double dead_threshold = 0.01;  // EMA usage per step below which a code is reseeded
};

// EMA update of entry sums and counts from vectors assigned to codes. Dead
// entries are reseeded from random rows of `vectors`.
Codebook update_codebook(Codebook codebook, const Matrix& vectors, const std::vector<int>& codes, Rng& rng,
                         const CodebookUpdateOptions& opts = {});

// Frame encoder over the low mel band followed by phoneme pooling.
struct ProsodyEncoder {
  std::vector<nn::Conv1d> layers;

  static ProsodyEncoder create(nn::ParameterSet& ps, const std::string& name, Index n_low, Index dim, int kernel,
                               int n_layers, Rng& rng);
  // `low_frames` is the normalized low band, m x n_low; returns n x dim.
  ad::Var operator()(ad::Graph& g, ad::Var low_frames, const DurationVector& d) const;
};

}  // namespace f2v
