#pragma once

// Autoregressive prosody-code language model. The prompt (its text and
// codes) and the target text form a bidirectional prefix; target codes are
// predicted left to right, one per target phoneme.

#include "f2v/tts.hpp"

#include <functional>
#include <span>

namespace f2v {

// ---------------------------------------------------------------------------
// Prosody code files: JSON lines of {"utt": id, "codes": [int, ...]}.

struct CodeRecord {
  std::string utt;
  ProsodyCodes codes;
};

void write_code_records(const std::filesystem::path& path, const std::vector<CodeRecord>& records);
std::vector<CodeRecord> read_code_records(const std::filesystem::path& path);

// Codes of each corpus utterance under the TTS checkpoint, using aligner
// durations on the utterance's own mel.
std::vector<CodeRecord> extract_prosody_codes(const TtsModel& tts, const std::vector<CorpusExample>& corpus);

// ---------------------------------------------------------------------------

struct PlmConfig {
  int n_codes = 128;
  int text_dim = 128;
  int dim = 128;
  int blocks = 2;
  int heads = 2;
  int ffn_mult = 4;
  int max_positions = 512;

  int vocab_size() const { return n_codes + 2; }
  int bos() const { return n_codes; }
  int eos() const { return n_codes + 1; }

  nlohmann::json to_json() const;
  static PlmConfig from_json(const nlohmann::json& j);
  void validate() const;
};

struct PlmPrompt {
  ProsodyCodes codes;
  Matrix text;  // encoded prompt phonemes, one row per code
};

struct PlmContext {
  ProsodyCodes prompt_codes;
  Matrix prompt_text;
  Matrix target_text;

  void validate(const PlmConfig& cfg) const;
};

PlmContext make_context(const PlmPrompt& prompt, Matrix target_text);

// Codes of a prompt utterance. Durations come from the duration predictor on
// x_p (conditioned on the prompt's own speech vector), rescaled so they cover
// exactly the prompt's frames.
PlmPrompt make_prompt(const MelSpectrogram& prompt_mel, const PhonemeSequence& prompt_phonemes, const TtsModel& tts);

// Rescales positive durations to sum to `frames` (largest remainder, each >= 1).
DurationVector fit_durations(const DurationVector& d, int frames);

struct SamplingConfig {
  int top_k = 8;
  double temperature = 0.8;
};

class ProsodyLm {
 public:
  ProsodyLm(const PlmConfig& cfg, std::uint64_t init_seed);
  ProsodyLm(ProsodyLm&&) = default;
  ProsodyLm& operator=(ProsodyLm&&) = default;

  const PlmConfig& config() const { return cfg_; }
  nn::ParameterSet& parameters() { return params_; }
  const nn::ParameterSet& parameters() const { return params_; }

  // Logits for the code rows, given the code fed at each row (BOS first, then
  // previous codes). Returns rows x vocab_size.
  ad::Var logits(ad::Graph& g, const PlmContext& ctx, std::span<const int> inputs) const;
  // Mean next-code cross entropy under teacher forcing.
  ad::Var loss(ad::Graph& g, const PlmContext& ctx, const ProsodyCodes& target) const;
  double loss_value(const PlmContext& ctx, const ProsodyCodes& target) const;

  // One code per target-text row. Top-k 1 is greedy.
  ProsodyCodes generate(const PlmContext& ctx, const SamplingConfig& sampling, std::uint64_t seed) const;

  Archive to_archive() const;
  static ProsodyLm from_archive(const Archive& archive);
  void save(const std::filesystem::path& path) const { to_archive().save(path); }
  static ProsodyLm load(const std::filesystem::path& path) { return from_archive(Archive::load(path)); }

 private:
  PlmConfig cfg_;
  nn::ParameterSet params_;
  ad::Parameter* code_embedding_ = nullptr;
  ad::Parameter* segment_embedding_ = nullptr;
  ad::Parameter* position_embedding_ = nullptr;
  nn::Linear text_in_;
  std::vector<nn::TransformerBlock> blocks_;
  nn::LayerNorm norm_;
  nn::Linear out_;
};

// ---------------------------------------------------------------------------
// Training

struct PlmExample {
  PlmContext context;
  ProsodyCodes target;
};

struct PlmUtterance {
  PhonemeSequence text;
  ProsodyCodes codes;
};

// Splits each utterance at a seeded random phoneme boundary into a prompt and
// a target. Utterances with fewer than two phonemes are skipped.
std::vector<PlmExample> make_plm_examples(const TtsModel& tts, const std::vector<PlmUtterance>& utterances,
                                          std::uint64_t seed);

// Mean loss over the batch; one optimizer update.
double plm_train_step(ProsodyLm& lm, nn::Adam& adam, std::span<const PlmExample> batch);

struct PlmTrainConfig {
  int steps = 200;
  int batch = 8;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  double clip_norm = 1.0;
};

struct PlmLogRecord {
  int step = 0;
  double loss = 0.0;
  nlohmann::json to_json() const { return {{"step", step}, {"loss", loss}}; }
};

using PlmStepCallback = std::function<void(const PlmLogRecord&)>;

std::vector<PlmLogRecord> train_plm(ProsodyLm& lm, const std::vector<PlmExample>& examples,
                                    const PlmTrainConfig& train, const PlmStepCallback& on_step = {});

}  // namespace f2v
