#pragma once

#include "f2v/audio.hpp"
#include "f2v/core.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace f2v {

// ---------------------------------------------------------------------------
// Phonemes

// Closed phoneme inventory; each phoneme renders as one character.
inline constexpr std::string_view kPhonemeSymbols = "aeioumnlrwjsfhzv";
inline constexpr int kPhonemeCount = static_cast<int>(kPhonemeSymbols.size());

std::string render_phonemes(const PhonemeSequence& x);
PhonemeSequence phonemes_from_symbols(std::string_view symbols);

// Bundled word -> phoneme table. Throws InvalidInput on an unknown word.
PhonemeSequence grapheme_to_phoneme(std::string_view text);
const std::map<std::string, std::string>& lexicon();

// ---------------------------------------------------------------------------
// Faces

inline constexpr int kFaceSize = 224;

// 3 x 224 x 224, channel-major, values in [0, 1].
struct FaceImage {
  Eigen::ArrayXf pixels = Eigen::ArrayXf::Zero(3 * kFaceSize * kFaceSize);

  float at(int c, int y, int x) const { return pixels(static_cast<Index>((c * kFaceSize + y) * kFaceSize + x)); }
  float& at(int c, int y, int x) { return pixels(static_cast<Index>((c * kFaceSize + y) * kFaceSize + x)); }
  bool operator==(const FaceImage& o) const { return (pixels == o.pixels).all(); }
};

void validate_face(const FaceImage& face);

std::string encode_png(const FaceImage& face);
// Any PNG; center-cropped to square and resized to 224 x 224 (bilinear).
FaceImage decode_png(std::string_view bytes);
void write_png(const std::filesystem::path& path, const FaceImage& face);
FaceImage read_png(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Corpus

struct CorpusExample {
  std::string utterance_id;
  Waveform waveform;
  PhonemeSequence transcript;
  std::string speaker_id;
  std::optional<FaceImage> face;
  std::optional<int> frame_index;
};

// JSON-lines manifest; paths are resolved relative to the manifest's directory.
std::vector<CorpusExample> load_manifest(const std::filesystem::path& path);

// Examples grouped by speaker id, in first-appearance order.
std::vector<std::pair<std::string, std::vector<std::size_t>>> group_by_speaker(
    const std::vector<CorpusExample>& corpus);

// ---------------------------------------------------------------------------
// Synthetic audiovisual corpus

inline constexpr double kF0Min = 90.0;
inline constexpr double kF0Max = 280.0;
inline constexpr double kFormantMin = 0.8;
inline constexpr double kFormantMax = 1.25;

struct SpeakerFactors {
  double f0_base = 0.0;
  double formant_shift = 1.0;

  bool operator==(const SpeakerFactors&) const = default;
};

struct SyntheticSpeaker {
  std::string id;
  SpeakerFactors factors;
};

// Geometry of a rendered face, in pixels.
struct FaceLayout {
  double center_x, center_y;
  double face_rx, face_ry;
  double eye_separation, eye_offset_y, eye_radius;
  double nose_length;
  double mouth_width, mouth_height, mouth_offset_y;
};

struct FrameJitter {
  double dx = 0.0, dy = 0.0;  // |d| <= kJitterShift
  double scale = 1.0;         // |scale - 1| <= kJitterScale
};

inline constexpr double kJitterShift = 4.0;
inline constexpr double kJitterScale = 0.005;

// Identity-determined layout (an affine function of the factors).
FaceLayout face_layout(const SpeakerFactors& f);
FaceLayout apply_jitter(const FaceLayout& base, const FrameJitter& j);
// Per-frame jitter, a pure function of (seed, speaker index, frame).
FrameJitter frame_jitter(std::uint64_t seed, std::size_t speaker, int frame);
FaceImage render_face(const FaceLayout& layout);

struct SyntheticUtterance {
  Waveform waveform;
  PhonemeSequence phonemes;
  DurationVector durations;  // ground-truth frames per phoneme
};

SyntheticUtterance render_utterance(const SpeakerFactors& f, std::uint64_t seed, const AudioConfig& cfg = {});

struct SyntheticCorpus {
  std::vector<SyntheticSpeaker> speakers;
  std::vector<CorpusExample> examples;
  std::vector<DurationVector> durations;  // parallel to examples
};

// Deterministic in `seed`. Utterance j of a speaker is paired with face frame
// j mod frames_per_face.
SyntheticCorpus generate_synthetic_corpus(std::uint64_t seed, int n_speakers, int utts_per_speaker,
                                          int frames_per_face);

struct CorpusFiles {
  std::filesystem::path manifest;
  std::size_t wav_count = 0;
  std::size_t png_count = 0;
};

// Writes wav/<utt>.wav, faces/<speaker>_f<frame>.png (one per distinct frame)
// and manifest.jsonl with relative paths and ground-truth durations.
CorpusFiles write_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir);

}  // namespace f2v
