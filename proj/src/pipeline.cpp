#include "f2v/pipeline.hpp"

namespace f2v {

namespace {
constexpr std::uint64_t kCodeStream = 1;
constexpr std::uint64_t kDecodeStream = 2;
}  // namespace

std::optional<ProsodyCodes> generate_codes(const PhonemeSequence& x, const TtsModel& tts, const ProsodyLm* plm,
                                           const PromptSpeech* prompt, const PipelineOptions& opts) {
  if (!tts.config().use_prosody) return std::nullopt;
  if (!plm) throw InvalidInput("this checkpoint needs a prosody language model");
  if (!prompt) throw InvalidInput("this checkpoint needs prompt speech");
  if (plm->config().n_codes != tts.config().n_codes || plm->config().text_dim != tts.config().text_dim) {
    throw CheckpointError("PLM checkpoint does not match the TTS codebook or text width");
  }
  const PlmPrompt p = make_prompt(prompt->mel, prompt->phonemes, tts);
  const PlmContext ctx = make_context(p, tts.encode_text(x));
  return plm->generate(ctx, opts.sampling, Rng::substream(opts.seed, kCodeStream).next_u64());
}

SynthesisResult synthesize_with_vector(const PhonemeSequence& x, const SpeechVector& s, const TtsModel& tts,
                                       const ProsodyLm* plm, const PromptSpeech* prompt,
                                       const PipelineOptions& opts) {
  const std::optional<ProsodyCodes> codes = generate_codes(x, tts, plm, prompt, opts);
  return synthesize(tts, x, s, codes ? &*codes : nullptr, Rng::substream(opts.seed, kDecodeStream).next_u64());
}

SynthesisResult infer(const PhonemeSequence& x, const MelSpectrogram& reference, const TtsModel& tts,
                      const ProsodyLm* plm, const PromptSpeech* prompt, const PipelineOptions& opts) {
  return synthesize_with_vector(x, tts.encode_speech(reference), tts, plm, prompt, opts);
}

SynthesisResult synthesize_from_face(const FaceImage& face, const PhonemeSequence& x, const TtsModel& tts,
                                     const ProsodyLm* plm, const FaceEncoder& encoder, const PromptSpeech* prompt,
                                     const PipelineOptions& opts) {
  check_compatible(encoder, tts);
  return synthesize_with_vector(x, encoder.encode(face).as_speech_vector(), tts, plm, prompt, opts);
}

}  // namespace f2v
