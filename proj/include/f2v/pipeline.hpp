#pragma once

// End-to-end synthesis: text + conditioning vector + prompt -> mel.

#include "f2v/face.hpp"
#include "f2v/plm.hpp"
#include "f2v/tts.hpp"

namespace f2v {

// Any utterance with its phonemes; supplies prosody-code context only.
struct PromptSpeech {
  MelSpectrogram mel;
  PhonemeSequence phonemes;
};

struct PipelineOptions {
  SamplingConfig sampling;
  std::uint64_t seed = 0;
};

// Prosody codes for `x` from the PLM, or none for a prosody-free checkpoint.
std::optional<ProsodyCodes> generate_codes(const PhonemeSequence& x, const TtsModel& tts, const ProsodyLm* plm,
                                           const PromptSpeech* prompt, const PipelineOptions& opts);

// Shared tail of both entry points: codes from the PLM, then durations,
// expansion and decoding under conditioning vector `s`.
SynthesisResult synthesize_with_vector(const PhonemeSequence& x, const SpeechVector& s, const TtsModel& tts,
                                       const ProsodyLm* plm, const PromptSpeech* prompt,
                                       const PipelineOptions& opts);

// Reference-speech conditioning: s = encode_speech(reference).
SynthesisResult infer(const PhonemeSequence& x, const MelSpectrogram& reference, const TtsModel& tts,
                      const ProsodyLm* plm, const PromptSpeech* prompt, const PipelineOptions& opts);

// Face conditioning: the face vector replaces s for durations and decoding.
SynthesisResult synthesize_from_face(const FaceImage& face, const PhonemeSequence& x, const TtsModel& tts,
                                     const ProsodyLm* plm, const FaceEncoder& encoder, const PromptSpeech* prompt,
                                     const PipelineOptions& opts);

}  // namespace f2v
