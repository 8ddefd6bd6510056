#pragma once

// Face encoder and the face-to-speech-vector mapping objective.

#include "f2v/archive.hpp"
#include "f2v/corpus.hpp"
#include "f2v/nn.hpp"
#include "f2v/tts.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace f2v {

// (H*W) x 3 matrix, row y*W + x, values normalized to roughly zero mean.
Matrix face_pixels(const FaceImage& face);

// Integer translation; uncovered pixels repeat the nearest edge pixel.
FaceImage translate_face(const FaceImage& face, int dx, int dy);

struct FaceEncoderConfig {
  int speech_dim = 128;
  std::vector<int> channels{8, 16, 32, 128};

  nlohmann::json to_json() const;
  static FaceEncoderConfig from_json(const nlohmann::json& j);
  void validate() const;
};

// Four strided convolutions (224 -> 56 -> 28 -> 14 -> 7), global average
// pooling and a linear head to the speech-vector dimension.
class FaceEncoder {
 public:
  FaceEncoder(const FaceEncoderConfig& cfg, std::uint64_t init_seed);
  FaceEncoder(FaceEncoder&&) = default;
  FaceEncoder& operator=(FaceEncoder&&) = default;

  const FaceEncoderConfig& config() const { return cfg_; }
  nn::ParameterSet& parameters() { return params_; }
  const nn::ParameterSet& parameters() const { return params_; }

  // `pixels` as produced by face_pixels; returns 1 x speech_dim.
  ad::Var forward(ad::Graph& g, ad::Var pixels) const;
  FaceVector encode(const FaceImage& face) const;

  Archive to_archive() const;
  static FaceEncoder from_archive(const Archive& archive);
  void save(const std::filesystem::path& path) const { to_archive().save(path); }
  static FaceEncoder load(const std::filesystem::path& path) { return from_archive(Archive::load(path)); }

 private:
  FaceEncoderConfig cfg_;
  nn::ParameterSet params_;
  std::vector<nn::Conv2d> convs_;
  nn::Linear head_;
};

// Throws CheckpointError when the face vector cannot stand in for the TTS
// model's speech vector.
void check_compatible(const FaceEncoder& face, const TtsModel& tts);

// ---------------------------------------------------------------------------
// Mapping loss

enum class MappingVariant { kMseCos, kMseCosTriplet, kMseCosContrastive };

std::string to_string(MappingVariant v);
MappingVariant parse_mapping_variant(std::string_view name);

struct MappingLossConfig {
  MappingVariant variant = MappingVariant::kMseCosContrastive;
  double temperature = 0.07;
  double margin = 0.2;
  // Upper bound on negatives per row; 0 uses every eligible in-batch item.
  int max_negatives = 0;

  void validate() const;
};

struct MappingLossTerms {
  ad::Var total;
  ad::Var mse;
  ad::Var cosine;       // mean (1 - cos)
  ad::Var contrastive;  // or the triplet hinge; zero for mse_cos
};

// Negatives of row i are the batch rows j != i whose identity differs from
// row i's. Empty `identities` means every row is its own identity.
MappingLossTerms map_loss(ad::Var v, ad::Var s, std::span<const int> identities, const MappingLossConfig& cfg);
double map_loss_value(const Matrix& v, const Matrix& s, std::span<const int> identities,
                      const MappingLossConfig& cfg);

// Eligibility matrix: entry (i, j) is true for the positive (j = i) and for
// each negative of row i.
Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> negative_mask(Index batch, std::span<const int> identities,
                                                                 int max_negatives);

// ---------------------------------------------------------------------------
// Training

// Speech vectors of every corpus example under a frozen TTS speech encoder.
// With a cache directory, vectors are stored there keyed by a fingerprint of
// the checkpoint and the utterance ids, and reused when present.
Matrix speech_vectors(const TtsModel& tts, const std::vector<CorpusExample>& corpus,
                      const std::optional<std::filesystem::path>& cache_dir = std::nullopt);

struct FaceTrainConfig {
  int steps = 600;
  int batch = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  double clip_norm = 1.0;
  // Random integer shift of each training face, in pixels per axis.
  int augment_shift = 4;
  MappingLossConfig loss;
};

struct FaceLogRecord {
  int step = 0;
  double loss = 0.0;
  double running_min = 0.0;
  nlohmann::json to_json() const { return {{"step", step}, {"loss", loss}, {"running_min", running_min}}; }
};

using FaceStepCallback = std::function<void(const FaceLogRecord&)>;

struct FaceTrainResult {
  FaceEncoder encoder;
  std::vector<FaceLogRecord> log;
};

// Every example needs a face. `targets` holds one speech vector per example.
FaceTrainResult train_face_encoder(const std::vector<CorpusExample>& corpus, const Matrix& targets,
                                   const FaceEncoderConfig& model_cfg, const FaceTrainConfig& train,
                                   const FaceStepCallback& on_step = {});

// Fraction of rows i whose most cosine-similar row of `keys` is row i.
double recall_at_1(const Matrix& queries, const Matrix& keys);

}  // namespace f2v
