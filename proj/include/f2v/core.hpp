#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace f2v {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using RowVector = RowVectorX<double>;
using Index = Eigen::Index;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ManifestError : public Error {
 public:
  ManifestError(std::size_t line, const std::string& what)
      : Error("manifest line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class AlignmentInfeasible : public Error {
 public:
  using Error::Error;
};

class TrainingDiverged : public Error {
 public:
  TrainingDiverged(int step, const std::string& what)
      : Error("training diverged at step " + std::to_string(step) + ": " + what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

class DegenerateVector : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

// Per-phoneme frame counts. Every count is >= 1 once produced by the model.
struct DurationVector {
  std::vector<int> counts;

  std::size_t size() const { return counts.size(); }
  int total() const {
    int t = 0;
    for (int c : counts) t += c;
    return t;
  }
  bool operator==(const DurationVector&) const = default;
};

struct PhonemeSequence {
  std::vector<int> ids;

  std::size_t size() const { return ids.size(); }
  bool operator==(const PhonemeSequence&) const = default;
};

// Zero-based code indices into a codebook of T entries.
struct ProsodyCodes {
  std::vector<int> indices;

  std::size_t size() const { return indices.size(); }
  bool operator==(const ProsodyCodes&) const = default;
};

struct SpeechVector {
  RowVector values;
};

// Lives in the speech-vector space; substitutes for a SpeechVector at synthesis.
struct FaceVector {
  RowVector values;

  SpeechVector as_speech_vector() const { return SpeechVector{values}; }
};

}  // namespace f2v
