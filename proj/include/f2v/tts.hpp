#pragma once

// Zero-shot TTS backbone: text encoder, speech encoder, aligner, duration
// predictor, prosody codec and a speech-vector-conditioned decoder.

#include "f2v/archive.hpp"
#include "f2v/audio.hpp"
#include "f2v/corpus.hpp"
#include "f2v/nn.hpp"
#include "f2v/prosody.hpp"
#include "f2v/sequence.hpp"

#include <json.hpp>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace f2v {

// Fixed affine normalization of log-mel values applied at model inputs and
// undone at the decoder output.
inline constexpr double kMelMean = -5.0;
inline constexpr double kMelScale = 3.0;

Matrix normalize_mel(const Matrix& frames);
Matrix denormalize_mel(const Matrix& frames);

enum class DecoderMode { kFeedForward, kDenoise };

struct TtsConfig {
  int vocab_size = kPhonemeCount;
  int n_mels = 80;
  int n_low = 20;
  int text_dim = 128;
  int speech_dim = 128;
  int prosody_dim = 128;
  int decoder_dim = 128;
  int n_codes = 128;
  int encoder_blocks = 2;
  int decoder_blocks = 4;
  int heads = 2;
  int ffn_mult = 4;
  int prosody_kernel = 3;
  int prosody_layers = 2;
  int duration_kernel = 3;
  double commitment = 0.25;
  double ema_decay = 0.99;
  double dead_code_threshold = 0.01;
  bool use_prosody = true;
  DecoderMode decoder_mode = DecoderMode::kFeedForward;
  int denoise_steps = 4;
  double denoise_sigma = 1.0;

  nlohmann::json to_json() const;
  // Unknown keys are rejected; missing keys keep their defaults.
  static TtsConfig from_json(const nlohmann::json& j);
  void validate() const;
};

// Round half up, clamp to >= 1.
DurationVector durations_from_log(const Vector& log_durations);

class TtsModel {
 public:
  TtsModel(const TtsConfig& cfg, std::uint64_t init_seed);
  TtsModel(TtsModel&&) = default;
  TtsModel& operator=(TtsModel&&) = default;

  const TtsConfig& config() const { return cfg_; }
  nn::ParameterSet& parameters() { return params_; }
  const nn::ParameterSet& parameters() const { return params_; }
  Codebook& codebook() { return codebook_; }
  const Codebook& codebook() const { return codebook_; }

  // --- model operations (no gradient tracking) ---
  Matrix encode_text(const PhonemeSequence& x) const;
  SpeechVector encode_speech(const MelSpectrogram& mel) const;
  // Phoneme x frame similarities used by the aligner.
  Matrix alignment_scores(const PhonemeSequence& x, const MelSpectrogram& mel) const;
  DurationVector align(const PhonemeSequence& x, const MelSpectrogram& mel) const;
  Vector predict_log_durations(const Matrix& text, const SpeechVector& s) const;
  DurationVector predict_durations(const Matrix& text, const SpeechVector& s) const;
  // Pre-quantization prosody representation from the low mel band.
  Matrix encode_prosody(const MelSpectrogram& low_mel, const DurationVector& d) const;
  QuantizeResult quantize_prosody(const Matrix& prosody) const;
  // Frame-level decode. `prosody_frames` must be absent iff the model is
  // prosody-free. The noise seed only matters in denoising mode.
  MelSpectrogram decode(const Matrix& text_frames, const Matrix* prosody_frames, const SpeechVector& s,
                        std::uint64_t noise_seed = 0) const;

  // --- graph builders used by training and gradient checks ---
  ad::Var text_forward(ad::Graph& g, const PhonemeSequence& x) const;
  ad::Var speech_forward(ad::Graph& g, ad::Var normalized_mel) const;
  ad::Var aligner_means(ad::Graph& g, ad::Var text) const;
  ad::Var duration_forward(ad::Graph& g, ad::Var text, ad::Var s) const;
  ad::Var prosody_forward(ad::Graph& g, ad::Var normalized_low, const DurationVector& d) const;
  // Returns normalized mel frames.
  ad::Var decoder_forward(ad::Graph& g, ad::Var text_frames, std::optional<ad::Var> prosody_frames, ad::Var s,
                          std::optional<ad::Var> noisy_mel = std::nullopt) const;

  Archive to_archive() const;
  static TtsModel from_archive(const Archive& archive);
  void save(const std::filesystem::path& path) const { to_archive().save(path); }
  static TtsModel load(const std::filesystem::path& path) { return from_archive(Archive::load(path)); }

 private:
  TtsConfig cfg_;
  nn::ParameterSet params_;
  Codebook codebook_;

  ad::Parameter* text_embedding_ = nullptr;
  std::vector<nn::TransformerBlock> text_blocks_;
  nn::LayerNorm text_norm_;
  nn::Linear speech_in_;
  std::vector<nn::TransformerBlock> speech_blocks_;
  nn::Linear speech_out_;
  nn::Linear aligner_;
  nn::Linear duration_cond_;
  nn::Conv1d duration_conv_;
  nn::LayerNorm duration_norm_;
  nn::Linear duration_out_;
  std::optional<ProsodyEncoder> prosody_encoder_;
  nn::Linear decoder_text_in_;
  std::optional<nn::Linear> decoder_prosody_in_;
  std::optional<nn::Linear> decoder_noisy_in_;
  std::vector<nn::TransformerBlock> decoder_blocks_;
  nn::ConditionalLayerNorm decoder_norm_;
  nn::Linear decoder_out_;
};

// Parameter-name prefixes of the sub-networks.
inline constexpr std::string_view kTextPrefix = "text.";
inline constexpr std::string_view kSpeechPrefix = "speech.";

// ---------------------------------------------------------------------------
// Training

struct TtsTrainConfig {
  int steps = 300;
  int batch = 8;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  double clip_norm = 1.0;
};

struct TtsLogRecord {
  int step = 0;
  double loss_mel = 0.0;
  double loss_dur = 0.0;
  double loss_vq = 0.0;
  double loss_align = 0.0;

  nlohmann::json to_json() const;
};

// One training utterance with its cached normalized mel.
struct TtsExample {
  PhonemeSequence text;
  Matrix mel;  // normalized
};

std::vector<TtsExample> prepare_tts_examples(const std::vector<CorpusExample>& corpus, const AudioConfig& audio = {});

struct TtsLossTerms {
  ad::Var total;
  ad::Var mel;
  ad::Var duration;
  ad::Var align;
  ad::Var commitment;
  ad::Var codebook;
  // Assigned pre-quantization vectors and their codes, for the EMA update.
  Matrix prosody_vectors;
  std::vector<int> codes;
};

// Loss of one utterance. Durations come from the aligner unless given.
// `noise_rng` is used in denoising mode only.
TtsLossTerms tts_loss(ad::Graph& g, const TtsModel& model, const TtsExample& ex,
                      const DurationVector* durations = nullptr, Rng* noise_rng = nullptr);

struct TtsTrainResult {
  TtsModel model;
  std::vector<TtsLogRecord> log;
};

using TtsStepCallback = std::function<void(const TtsLogRecord&)>;

// Minimizes L1 mel reconstruction + MSE on log durations + aligner prior +
// VQ commitment; the codebook follows an EMA update. Deterministic in seed.
TtsTrainResult train_tts(const std::vector<CorpusExample>& corpus, const TtsConfig& cfg, const TtsTrainConfig& train,
                         const TtsStepCallback& on_step = {});
// Continues training an existing model.
std::vector<TtsLogRecord> train_tts_model(TtsModel& model, const std::vector<TtsExample>& data,
                                          const TtsTrainConfig& train, const TtsStepCallback& on_step = {});

// Eq-1-style composition given a conditioning vector and optional prosody
// codes: durations -> expand -> decode.
struct SynthesisResult {
  MelSpectrogram mel;
  DurationVector durations;
};
SynthesisResult synthesize(const TtsModel& model, const PhonemeSequence& x, const SpeechVector& s,
                           const ProsodyCodes* codes, std::uint64_t seed);

}  // namespace f2v
