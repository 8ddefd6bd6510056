#pragma once

#include "f2v/core.hpp"

#include <complex>
#include <cstdint>
#include <filesystem>

namespace f2v {

struct Waveform {
  Vector samples;
  int sample_rate = 16000;
};

struct AudioConfig {
  int sample_rate = 16000;
  int window = 800;  // 50 ms
  int hop = 200;     // 12.5 ms
  int n_fft = 1024;
  int n_mels = 80;
  double f_min = 0.0;
  double f_max = 8000.0;
  double log_floor = 1e-5;

  int n_bins() const { return n_fft / 2 + 1; }
};

// Rows are frames, columns are mel bins of natural-log energy.
struct MelSpectrogram {
  Matrix frames;
  int hop_length = 200;
  int sample_rate = 16000;

  Index frame_count() const { return frames.rows(); }
  Index bins() const { return frames.cols(); }
};

// Slaney mel scale: linear below 1 kHz, logarithmic above.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// n_mels x n_bins triangular filters with Slaney area normalization.
Matrix mel_filterbank(const AudioConfig& cfg);
// Peak frequency of every filter.
Vector mel_center_frequencies(const AudioConfig& cfg);

// Frame count for L samples: ceil(L / hop).
Index frame_count(Index samples, const AudioConfig& cfg);

using ComplexMatrix = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic>;

// Frames x n_bins complex spectrum. The signal is reflect-padded by window/2
// on the left and enough on the right for exactly ceil(L / hop) frames.
ComplexMatrix stft(const Vector& samples, const AudioConfig& cfg);
// Overlap-add inverse of stft; returns frames * hop samples.
Vector istft(const ComplexMatrix& spectrum, const AudioConfig& cfg);

MelSpectrogram compute_mel(const Waveform& w, const AudioConfig& cfg = {});

// First n_low mel bins of every frame.
MelSpectrogram lowpass_mel(const MelSpectrogram& mel, int n_low);

// Iterative phase reconstruction from a log-mel spectrogram.
Waveform griffin_lim(const MelSpectrogram& mel, const AudioConfig& cfg, int iterations, std::uint64_t seed);

// 16-bit PCM mono WAV.
std::string encode_wav(const Waveform& w);
Waveform decode_wav(std::string_view bytes);
void write_wav(const std::filesystem::path& path, const Waveform& w);
Waveform read_wav(const std::filesystem::path& path);

}  // namespace f2v
