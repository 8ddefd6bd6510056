#include "f2v/prosody.hpp"

#include "f2v/sequence.hpp"

namespace f2v {

Codebook make_codebook(Index codes, Index dim, Rng& rng, double init_scale) {
  if (codes < 2) throw InvalidInput("codebook needs at least 2 entries");
  Codebook c;
  c.entries.resize(codes, dim);
  for (Index i = 0; i < codes; ++i) {
    for (Index j = 0; j < dim; ++j) c.entries(i, j) = init_scale * rng.normal();
  }
  c.ema_count = Vector::Ones(codes);
  c.ema_sum = c.entries;
  return c;
}

void initialize_codebook_from(Codebook& codebook, const Matrix& vectors, Rng& rng) {
  if (vectors.rows() == 0) return;
  for (Index t = 0; t < codebook.size(); ++t) {
    const auto r = static_cast<Index>(rng.uniform_int(static_cast<std::uint64_t>(vectors.rows())));
    for (Index j = 0; j < codebook.dim(); ++j) codebook.entries(t, j) = vectors(r, j) + 1e-3 * rng.normal();
  }
  codebook.ema_count = Vector::Ones(codebook.size());
  codebook.ema_sum = codebook.entries;
}

QuantizeResult quantize(const Matrix& h, const Codebook& codebook, double beta) {
  QuantizeResult r;
  r.codes.indices = nearest_codes(h, codebook.entries);
  r.quantized = dequantize(r.codes, codebook);
  const double mse = h.rows() > 0 ? (h - r.quantized).squaredNorm() / static_cast<double>(h.size()) : 0.0;
  r.codebook_loss = mse;
  r.commitment_loss = beta * mse;
  return r;
}

Matrix dequantize(const ProsodyCodes& codes, const Codebook& codebook) {
  Matrix out(static_cast<Index>(codes.size()), codebook.dim());
  for (std::size_t i = 0; i < codes.size(); ++i) {
    const int c = codes.indices[i];
    if (c < 0 || c >= codebook.size()) throw InvalidInput("prosody code out of range: " + std::to_string(c));
    out.row(static_cast<Index>(i)) = codebook.entries.row(c);
  }
  return out;
}

VqTerms quantize(ad::Var h, ad::Var entries, double beta) {
  VqTerms t;
  t.codes.indices = nearest_codes(h.value(), entries.value());
  ad::Var q = ad::gather_rows(entries, t.codes.indices);
  t.codebook_loss = ad::mse_loss(q, ad::stop_gradient(h));
  t.commitment_loss = ad::scale(ad::mse_loss(h, ad::stop_gradient(q)), beta);
  t.quantized = ad::straight_through(h, q);
  return t;
}

Codebook update_codebook(Codebook c, const Matrix& vectors, const std::vector<int>& codes, Rng& rng,
                         const CodebookUpdateOptions& opts) {
  if (static_cast<Index>(codes.size()) != vectors.rows()) throw InvalidInput("update_codebook: code count mismatch");
  if (vectors.rows() > 0 && vectors.cols() != c.dim()) throw InvalidInput("update_codebook: dimension mismatch");
  Vector counts = Vector::Zero(c.size());
  Matrix sums = Matrix::Zero(c.size(), c.dim());
  for (std::size_t i = 0; i < codes.size(); ++i) {
    const int k = codes[i];
    if (k < 0 || k >= c.size()) throw InvalidInput("update_codebook: code out of range");
    counts(k) += 1.0;
    sums.row(k) += vectors.row(static_cast<Index>(i));
  }
  const double g = opts.decay;
  for (Index t = 0; t < c.size(); ++t) {
    c.ema_count(t) = g * c.ema_count(t) + (1.0 - g) * counts(t);
    c.ema_sum.row(t) = g * c.ema_sum.row(t) + (1.0 - g) * sums.row(t);
    // Decaying sum and count together leaves an unassigned entry's mean as is.
    if (counts(t) > 0.0) c.entries.row(t) = c.ema_sum.row(t) / c.ema_count(t);
  }
  if (vectors.rows() > 0) {
    for (Index t = 0; t < c.size(); ++t) {
      if (c.ema_count(t) >= opts.dead_threshold) continue;
      const auto r = static_cast<Index>(rng.uniform_int(static_cast<std::uint64_t>(vectors.rows())));
      c.entries.row(t) = vectors.row(r);
      c.ema_count(t) = 1.0;
      c.ema_sum.row(t) = vectors.row(r);
    }
  }
  return c;
}

ProsodyEncoder ProsodyEncoder::create(nn::ParameterSet& ps, const std::string& name, Index n_low, Index dim,
                                      int kernel, int n_layers, Rng& rng) {
  if (n_layers < 1) throw InvalidInput("prosody encoder needs at least one layer");
  ProsodyEncoder e;
  for (int l = 0; l < n_layers; ++l) {
    e.layers.push_back(nn::Conv1d::create(ps, name + ".conv" + std::to_string(l), l == 0 ? n_low : dim, dim, kernel, rng));
  }
  return e;
}

ad::Var ProsodyEncoder::operator()(ad::Graph& g, ad::Var low_frames, const DurationVector& d) const {
  ad::Var h = low_frames;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    h = layers[l](g, h);
    if (l + 1 < layers.size()) h = ad::gelu(h);
  }
  return ad::segment_mean(h, d.counts);
}

}  // namespace f2v
