#pragma once

// Length regulation between phoneme-rate and frame-rate sequences.

#include "f2v/core.hpp"

#include <limits>
#include <string>

namespace f2v {

namespace detail {
inline void check_durations(const DurationVector& d, Index rows, const char* op) {
  if (static_cast<Index>(d.size()) != rows) {
    throw InvalidInput(std::string(op) + ": " + std::to_string(d.size()) + " durations for " + std::to_string(rows) +
                       " rows");
  }
}
}  // namespace detail

// Row i of `h` repeated d_i times, in order.
template <typename Derived>
MatrixX<typename Derived::Scalar> expand(const Eigen::MatrixBase<Derived>& h, const DurationVector& d) {
  detail::check_durations(d, h.rows(), "expand");
  Index total = 0;
  for (int c : d.counts) {
    if (c < 0) throw InvalidInput("expand: negative duration");
    total += c;
  }
  MatrixX<typename Derived::Scalar> out(total, h.cols());
  Index r = 0;
  for (Index i = 0; i < h.rows(); ++i) {
    out.middleRows(r, d.counts[static_cast<std::size_t>(i)]).rowwise() = h.row(i);
    r += d.counts[static_cast<std::size_t>(i)];
  }
  return out;
}

// Row i = mean of the frames in segment i.
template <typename Derived>
MatrixX<typename Derived::Scalar> pool_by_phoneme(const Eigen::MatrixBase<Derived>& frames, const DurationVector& d) {
  using Scalar = typename Derived::Scalar;
  Index total = 0;
  for (int c : d.counts) {
    if (c < 1) throw InvalidInput("pool_by_phoneme: durations must be >= 1");
    total += c;
  }
  if (total != frames.rows()) {
    throw InvalidInput("pool_by_phoneme: durations sum to " + std::to_string(total) + " but there are " +
                       std::to_string(frames.rows()) + " frames");
  }
  MatrixX<Scalar> out(static_cast<Index>(d.size()), frames.cols());
  Index r = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    out.row(static_cast<Index>(i)) = frames.middleRows(r, d.counts[i]).colwise().sum() / static_cast<Scalar>(d.counts[i]);
    r += d.counts[i];
  }
  return out;
}

// Monotonic hard alignment maximizing the summed similarity of
// `similarity` (phonemes x frames). Every phoneme gets at least one frame;
// on ties the later phoneme keeps the frame.
template <typename Derived>
DurationVector monotonic_align(const Eigen::MatrixBase<Derived>& similarity) {
  using Scalar = typename Derived::Scalar;
  const Index n = similarity.rows();
  const Index m = similarity.cols();
  if (n < 1) throw InvalidInput("monotonic_align: no phonemes");
  if (m < n) {
    throw AlignmentInfeasible("cannot align " + std::to_string(n) + " phonemes to " + std::to_string(m) + " frames");
  }
  const Scalar neg = -std::numeric_limits<Scalar>::infinity();
  MatrixX<Scalar> q = MatrixX<Scalar>::Constant(n, m, neg);
  q(0, 0) = similarity(0, 0);
  for (Index t = 1; t < m; ++t) {
    const Index lo = std::max<Index>(0, n - (m - t));
    const Index hi = std::min<Index>(n - 1, t);
    for (Index i = lo; i <= hi; ++i) {
      const Scalar stay = q(i, t - 1);
      const Scalar advance = i > 0 ? q(i - 1, t - 1) : neg;
      q(i, t) = similarity(i, t) + std::max(stay, advance);
    }
  }
  DurationVector d;
  d.counts.assign(static_cast<std::size_t>(n), 0);
  Index i = n - 1;
  for (Index t = m - 1; t >= 0; --t) {
    ++d.counts[static_cast<std::size_t>(i)];
    if (t == 0) break;
    if (i > 0 && (i == t || q(i - 1, t - 1) > q(i, t - 1))) --i;
  }
  return d;
}

}  // namespace f2v
