#pragma once

// Objective metrics (CER, SECS, SED), the frame-consistency test and the
// mapping-loss ablation runner.

#include "f2v/face.hpp"
#include "f2v/pipeline.hpp"

#include <json.hpp>

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace f2v {

// ---------------------------------------------------------------------------
// Metrics

// 100 * Levenshtein(reference, hypothesis) / |reference| after lowercasing and
// collapsing whitespace runs to one space (leading/trailing removed).
double cer(std::string_view reference, std::string_view hypothesis);
std::size_t edit_distance(std::string_view a, std::string_view b);
std::string normalize_transcript(std::string_view text);

class SpeakerEmbedder {
 public:
  virtual ~SpeakerEmbedder() = default;
  // Unit-norm embedding of fixed dimension.
  virtual RowVector embed(const Waveform& w) const = 0;
  // Mel-domain entry point; the default renders audio with 64 phase
  // reconstruction iterations and calls embed.
  virtual RowVector embed_mel(const MelSpectrogram& mel) const;
};

// L2-normalized output of a trained TTS speech encoder.
class SpeechEncoderEmbedder final : public SpeakerEmbedder {
 public:
  explicit SpeechEncoderEmbedder(const TtsModel& tts) : tts_(tts) {}
  RowVector embed(const Waveform& w) const override;
  RowVector embed_mel(const MelSpectrogram& mel) const override;

 private:
  const TtsModel& tts_;
};

class Transcriber {
 public:
  virtual ~Transcriber() = default;
  // `content` is the intended phoneme sequence. Reference-free backends
  // ignore it; the oracle backend decodes against it.
  virtual std::string transcribe(const Waveform& w, const PhonemeSequence& content) const = 0;
  virtual std::string transcribe_mel(const MelSpectrogram& mel, const PhonemeSequence& content) const;
};

// Per-phoneme mean of utterance-centered normalized mel frames, pooled over
// aligner segments of a corpus. Rows are phoneme ids; unseen phonemes hold
// NaN and are never predicted.
Matrix fit_phoneme_centroids(const TtsModel& tts, const std::vector<CorpusExample>& corpus);

// Oracle for the synthetic corpus: the aligner segments the mel against the
// intended content, and each segment is labelled with its nearest phoneme
// centroid. Wrong durations or smeared segments become character errors.
class ForcedAlignTranscriber final : public Transcriber {
 public:
  ForcedAlignTranscriber(const TtsModel& tts, Matrix centroids);
  std::string transcribe(const Waveform& w, const PhonemeSequence& content) const override;
  std::string transcribe_mel(const MelSpectrogram& mel, const PhonemeSequence& content) const override;

 private:
  const TtsModel& tts_;
  Matrix centroids_;
};

// 100 * cosine of the two embeddings; throws DegenerateVector on a zero norm.
double secs_embeddings(const RowVector& a, const RowVector& b);
double secs(const Waveform& a, const Waveform& b, const SpeakerEmbedder& emb);
// Mean SECS over all unordered distinct pairs; throws InvalidInput below 2.
double sed_embeddings(const std::vector<RowVector>& embeddings);
double sed(const std::vector<Waveform>& waves, const SpeakerEmbedder& emb);

// ---------------------------------------------------------------------------
// Evaluation sets

// One held-out identity.
struct EvalIdentity {
  std::string speaker_id;
  std::vector<FaceImage> frames;  // distinct face frames, by frame index
  MelSpectrogram reference;       // ground-truth utterance compared by SECS
  Matrix speech_vectors;          // encoder output of each of its utterances
};

struct EvalSet {
  std::vector<EvalIdentity> identities;
  PhonemeSequence text;  // synthesized for every identity
};

// The SECS reference of each identity is one of its utterances chosen by
// `seed`; the shared text is the first identity's reference transcript.
EvalSet make_eval_set(const TtsModel& tts, const std::vector<CorpusExample>& corpus, std::uint64_t seed);

struct Checkpoints {
  const TtsModel& tts;
  const ProsodyLm* plm = nullptr;
  const PromptSpeech* prompt = nullptr;
};

// ---------------------------------------------------------------------------
// Reports

struct EvalRow {
  std::string variant;
  double cer = 0.0;
  double secs = 0.0;
  double sed = 0.0;
  int n = 0;
  std::optional<double> recall_at_1;

  nlohmann::json to_json() const;
};

// Aligned text table with a reserved MOS column for externally collected
// scores.
std::string render_table(const std::vector<EvalRow>& rows);

struct MetricsResult {
  EvalRow row;
  std::vector<RowVector> embeddings;  // one per identity, from frame 0
};

// Synthesizes the shared text from frame 0 of every identity.
MetricsResult evaluate_face_metrics(const EvalSet& set, const Checkpoints& ckpt, const FaceEncoder& face,
                                    const SpeakerEmbedder& emb, const Transcriber& asr, const PipelineOptions& opts,
                                    std::string variant = "face");

// Face-vector -> speech-vector retrieval over the set's identities: queries
// are frame-0 face vectors, keys are per-identity mean speech vectors.
double face_recall_at_1(const EvalSet& set, const FaceEncoder& face);

struct ConsistencyResult {
  Matrix secs;  // pairwise over frames
  double off_diagonal_mean = 0.0;
  std::vector<RowVector> embeddings;
};

// Synthesizes `x` from every frame with identical prompt and seed.
ConsistencyResult consistency_test(const std::vector<FaceImage>& frames, const PhonemeSequence& x,
                                   const Checkpoints& ckpt, const FaceEncoder& face, const SpeakerEmbedder& emb,
                                   const PipelineOptions& opts);

struct ConsistencySuite {
  std::vector<std::string> speakers;
  std::vector<ConsistencyResult> results;
  // Mean SECS between frame-0 outputs of different identities.
  double cross_identity_mean = 0.0;
  // Fraction of identities whose off-diagonal mean exceeds the baseline.
  double fraction_consistent = 0.0;

  nlohmann::json to_json() const;
};

ConsistencySuite run_consistency(const EvalSet& set, const Checkpoints& ckpt, const FaceEncoder& face,
                                 const SpeakerEmbedder& emb, const PipelineOptions& opts);

struct AblationSetup {
  const std::vector<CorpusExample>& train_corpus;
  const Matrix& train_targets;  // speech vectors of train_corpus
  FaceEncoderConfig model;
  FaceTrainConfig train;  // loss.variant is overridden per row
};

struct AblationReport {
  std::vector<EvalRow> rows;
  std::vector<FaceEncoder> encoders;
};

// One face encoder per variant, identical seeds and budgets.
AblationReport run_ablation(const AblationSetup& setup, const std::vector<MappingVariant>& variants,
                            const EvalSet& set, const Checkpoints& ckpt, const SpeakerEmbedder& emb,
                            const Transcriber& asr, const PipelineOptions& opts);

}  // namespace f2v
