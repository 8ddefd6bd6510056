#pragma once

// Shared helpers for the unit tests and the acceptance suite: finite-difference
// gradient checking, tiny model configurations and brute-force oracles.

#include "f2v/autograd.hpp"
#include "f2v/nn.hpp"
#include "f2v/plm.hpp"
#include "f2v/tts.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace f2v::testing {

struct GradCheck {
  double relative_error = 0.0;  // ||analytic - numeric|| / max(norms)
  double analytic_norm = 0.0;
  std::size_t scalars = 0;
};

// Compares backward() against central differences of `loss` over every
// scalar of `params`. The loss must be rebuilt from scratch on each call.
inline GradCheck check_gradients(const std::vector<ad::Parameter*>& params,
                                 const std::function<ad::Var(ad::Graph&)>& loss, double h = 1e-6) {
  for (ad::Parameter* p : params) p->zero_grad();
  {
    ad::Graph g;
    g.backward(loss(g));
  }
  std::vector<double> analytic;
  std::vector<double> numeric;
  for (ad::Parameter* p : params) {
    for (Index k = 0; k < p->value.size(); ++k) {
      analytic.push_back(p->grad.data()[k]);
      double& x = p->value.data()[k];
      const double saved = x;
      x = saved + h;
      double up;
      {
        ad::Graph g(false);
        up = loss(g).scalar();
      }
      x = saved - h;
      double down;
      {
        ad::Graph g(false);
        down = loss(g).scalar();
      }
      x = saved;
      numeric.push_back((up - down) / (2.0 * h));
    }
  }
  const Eigen::Map<const Vector> a(analytic.data(), static_cast<Index>(analytic.size()));
  const Eigen::Map<const Vector> n(numeric.data(), static_cast<Index>(numeric.size()));
  GradCheck out;
  out.analytic_norm = a.norm();
  out.scalars = analytic.size();
  const double scale = std::max({a.norm(), n.norm(), 1e-300});
  out.relative_error = (a - n).norm() / scale;
  return out;
}

inline std::vector<ad::Parameter*> all_parameters(nn::ParameterSet& ps, std::string_view prefix = "") {
  std::vector<ad::Parameter*> out;
  for (auto& p : ps) {
    if (p->name.starts_with(prefix)) out.push_back(p.get());
  }
  return out;
}

// Small enough for exhaustive finite differences (< 10k scalars).
inline TtsConfig tiny_tts_config() {
  TtsConfig c;
  c.n_mels = 80;
  c.n_low = 4;
  c.text_dim = 8;
  c.speech_dim = 8;
  c.prosody_dim = 8;
  c.decoder_dim = 8;
  c.n_codes = 4;
  c.encoder_blocks = 1;
  c.decoder_blocks = 1;
  c.heads = 2;
  c.ffn_mult = 2;
  return c;
}

// Fast-training configuration for behavioural tests.
inline TtsConfig small_tts_config() {
  TtsConfig c;
  c.text_dim = 32;
  c.speech_dim = 32;
  c.prosody_dim = 32;
  c.decoder_dim = 32;
  c.n_codes = 16;
  c.decoder_blocks = 2;
  return c;
}

// Row i of h repeated d_i times, written as plain loops.
inline Matrix brute_expand(const Matrix& h, const std::vector<int>& d) {
  std::vector<RowVector> rows;
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (int k = 0; k < d[i]; ++k) rows.push_back(h.row(static_cast<Index>(i)));
  }
  Matrix out(static_cast<Index>(rows.size()), h.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Index>(r)) = rows[r];
  return out;
}

// Every composition of m into n positive parts.
inline void for_each_segmentation(int n, int m, const std::function<void(const std::vector<int>&)>& visit) {
  std::vector<int> d(static_cast<std::size_t>(n), 1);
  std::function<void(int, int)> rec = [&](int i, int left) {
    if (i == n - 1) {
      d[static_cast<std::size_t>(i)] = left;
      visit(d);
      return;
    }
    for (int c = 1; c <= left - (n - 1 - i); ++c) {
      d[static_cast<std::size_t>(i)] = c;
      rec(i + 1, left - c);
    }
  };
  if (n >= 1 && m >= n) rec(0, m);
}

inline double segmentation_score(const Matrix& sim, const std::vector<int>& d) {
  double s = 0.0;
  Index t = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (int k = 0; k < d[i]; ++k) s += sim(static_cast<Index>(i), t++);
  }
  return s;
}

// Plain recursive edit distance with memoization over suffixes.
inline std::size_t brute_edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::vector<std::size_t>> memo(a.size() + 1,
                                             std::vector<std::size_t>(b.size() + 1, std::string::npos));
  std::function<std::size_t(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> std::size_t {
    if (i == a.size()) return b.size() - j;
    if (j == b.size()) return a.size() - i;
    std::size_t& m = memo[i][j];
    if (m != std::string::npos) return m;
    m = std::min({go(i + 1, j) + 1, go(i, j + 1) + 1, go(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1)});
    return m;
  };
  return go(0, 0);
}

// All strings of length <= max_len over `alphabet`, shortest first.
inline std::vector<std::string> all_strings(const std::string& alphabet, int max_len) {
  std::vector<std::string> out{""};
  std::size_t begin = 0;
  for (int len = 1; len <= max_len; ++len) {
    const std::size_t end = out.size();
    for (std::size_t i = begin; i < end; ++i) {
      for (char c : alphabet) out.push_back(out[i] + c);
    }
    begin = end;
  }
  return out;
}

// Contrastive term of one row, written directly from the softmax definition.
inline double brute_contrastive_row(const Matrix& v, const Matrix& s, Index i, const std::vector<Index>& negatives,
                                    double tau) {
  auto cosine = [&](Index a, Index b) { return v.row(a).dot(s.row(b)) / (v.row(a).norm() * s.row(b).norm()); };
  const double pos = std::exp(cosine(i, i) / tau);
  double denom = pos;
  for (Index k : negatives) denom += std::exp(cosine(i, k) / tau);
  return -std::log(pos / denom);
}

}  // namespace f2v::testing
