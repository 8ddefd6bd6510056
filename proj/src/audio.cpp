#include "f2v/audio.hpp"

#include "f2v/archive.hpp"
#include "f2v/rng.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <cstring>
#include <numbers>

namespace f2v {

namespace {

constexpr double kMinLogHz = 1000.0;
constexpr double kLinearStep = 200.0 / 3.0;
constexpr double kMinLogMel = kMinLogHz / kLinearStep;
const double kLogStep = std::log(6.4) / 27.0;

// Periodic Hann window of length n.
Vector hann(int n) {
  Vector w(n);
  for (int i = 0; i < n; ++i) w(i) = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  return w;
}

Index reflect(Index i, Index n) {
  if (n == 1) return 0;
  const Index period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

void check_config(const AudioConfig& cfg) {
  if (cfg.sample_rate <= 0 || cfg.hop <= 0 || cfg.window <= 0 || cfg.n_fft < cfg.window || cfg.n_mels < 1) {
    throw InvalidInput("invalid audio configuration");
  }
  if (cfg.window / 2 < cfg.hop) throw InvalidInput("window must be at least twice the hop");
}

}  // namespace

double hz_to_mel(double hz) {
  if (hz < kMinLogHz) return hz / kLinearStep;
  return kMinLogMel + std::log(hz / kMinLogHz) / kLogStep;
}

double mel_to_hz(double mel) {
  if (mel < kMinLogMel) return mel * kLinearStep;
  return kMinLogHz * std::exp(kLogStep * (mel - kMinLogMel));
}

Vector mel_center_frequencies(const AudioConfig& cfg) {
  const double lo = hz_to_mel(cfg.f_min);
  const double hi = hz_to_mel(cfg.f_max);
  Vector centers(cfg.n_mels);
  for (int i = 0; i < cfg.n_mels; ++i) centers(i) = mel_to_hz(lo + (hi - lo) * (i + 1) / (cfg.n_mels + 1));
  return centers;
}

Matrix mel_filterbank(const AudioConfig& cfg) {
  const double lo = hz_to_mel(cfg.f_min);
  const double hi = hz_to_mel(cfg.f_max);
  std::vector<double> edges(static_cast<std::size_t>(cfg.n_mels + 2));
  for (int i = 0; i < cfg.n_mels + 2; ++i) edges[i] = mel_to_hz(lo + (hi - lo) * i / (cfg.n_mels + 1));
  Matrix fb = Matrix::Zero(cfg.n_mels, cfg.n_bins());
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double left = edges[m];
    const double center = edges[m + 1];
    const double right = edges[m + 2];
    const double norm = 2.0 / (right - left);
    for (int k = 0; k < cfg.n_bins(); ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / cfg.n_fft;
      const double up = (f - left) / (center - left);
      const double down = (right - f) / (right - center);
      fb(m, k) = std::max(0.0, std::min(up, down)) * norm;
    }
  }
  return fb;
}

Index frame_count(Index samples, const AudioConfig& cfg) { return (samples + cfg.hop - 1) / cfg.hop; }

ComplexMatrix stft(const Vector& samples, const AudioConfig& cfg) {
  check_config(cfg);
  const Index L = samples.size();
  if (L == 0) throw InvalidInput("empty waveform");
  const Index m = frame_count(L, cfg);
  const Index left = cfg.window / 2;
  const Vector win = hann(cfg.window);
  Eigen::FFT<double> fft;
  std::vector<double> frame(static_cast<std::size_t>(cfg.n_fft));
  std::vector<std::complex<double>> spec;
  ComplexMatrix out(m, cfg.n_bins());
  for (Index t = 0; t < m; ++t) {
    std::fill(frame.begin(), frame.end(), 0.0);
    for (int i = 0; i < cfg.window; ++i) {
      const Index src = t * cfg.hop + i - left;
      frame[static_cast<std::size_t>(i)] = samples(reflect(src, L)) * win(i);
    }
    fft.fwd(spec, frame);
    for (int k = 0; k < cfg.n_bins(); ++k) out(t, k) = spec[static_cast<std::size_t>(k)];
  }
  return out;
}

Vector istft(const ComplexMatrix& spectrum, const AudioConfig& cfg) {
  check_config(cfg);
  const Index m = spectrum.rows();
  const Index left = cfg.window / 2;
  const Index padded = cfg.window + (m - 1) * cfg.hop;
  const Vector win = hann(cfg.window);
  Vector acc = Vector::Zero(padded);
  Vector wsum = Vector::Zero(padded);
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> full(static_cast<std::size_t>(cfg.n_fft));
  std::vector<double> frame;
  for (Index t = 0; t < m; ++t) {
    for (int k = 0; k < cfg.n_bins(); ++k) full[static_cast<std::size_t>(k)] = spectrum(t, k);
    for (int k = cfg.n_bins(); k < cfg.n_fft; ++k) full[static_cast<std::size_t>(k)] = std::conj(spectrum(t, cfg.n_fft - k));
    fft.inv(frame, full);
    for (int i = 0; i < cfg.window; ++i) {
      acc(t * cfg.hop + i) += frame[static_cast<std::size_t>(i)] * win(i);
      wsum(t * cfg.hop + i) += win(i) * win(i);
    }
  }
  Vector out(m * cfg.hop);
  for (Index i = 0; i < out.size(); ++i) {
    const double w = wsum(i + left);
    out(i) = w > 1e-8 ? acc(i + left) / w : 0.0;
  }
  return out;
}

MelSpectrogram compute_mel(const Waveform& w, const AudioConfig& cfg) {
  if (w.samples.size() == 0) throw InvalidInput("empty waveform");
  if (w.sample_rate != cfg.sample_rate) {
    throw InvalidInput("sample rate " + std::to_string(w.sample_rate) + " does not match config " +
                       std::to_string(cfg.sample_rate));
  }
  if (!w.samples.allFinite()) throw InvalidInput("waveform contains non-finite samples");
  const ComplexMatrix spec = stft(w.samples, cfg);
  const Matrix mag = spec.cwiseAbs();
  const Matrix fb = mel_filterbank(cfg);
  MelSpectrogram mel;
  mel.frames = (mag * fb.transpose()).array().max(cfg.log_floor).log().matrix();
  mel.hop_length = cfg.hop;
  mel.sample_rate = cfg.sample_rate;
  return mel;
}

MelSpectrogram lowpass_mel(const MelSpectrogram& mel, int n_low) {
  if (n_low < 1 || n_low > mel.bins()) {
    throw InvalidInput("n_low " + std::to_string(n_low) + " outside [1, " + std::to_string(mel.bins()) + "]");
  }
  MelSpectrogram out = mel;
  out.frames = mel.frames.leftCols(n_low);
  return out;
}

Waveform griffin_lim(const MelSpectrogram& mel, const AudioConfig& cfg, int iterations, std::uint64_t seed) {
  if (mel.frame_count() < 1) throw InvalidInput("empty mel spectrogram");
  if (mel.bins() != cfg.n_mels) throw InvalidInput("mel bin count does not match config");
  const Matrix fb = mel_filterbank(cfg);
  const Matrix pinv = fb.completeOrthogonalDecomposition().pseudoInverse();
  const Matrix energy = mel.frames.array().exp().matrix();
  const Matrix mag = (energy * pinv.transpose()).cwiseMax(0.0);

  Rng rng(seed);
  ComplexMatrix spec(mag.rows(), mag.cols());
  for (Index i = 0; i < mag.rows(); ++i) {
    for (Index j = 0; j < mag.cols(); ++j) spec(i, j) = std::polar(mag(i, j), 2.0 * std::numbers::pi * rng.uniform());
  }
  Vector signal = istft(spec, cfg);
  for (int it = 0; it < iterations; ++it) {
    const ComplexMatrix rebuilt = stft(signal, cfg);
    for (Index i = 0; i < mag.rows(); ++i) {
      for (Index j = 0; j < mag.cols(); ++j) {
        const double a = std::abs(rebuilt(i, j));
        spec(i, j) = a > 1e-12 ? mag(i, j) * rebuilt(i, j) / a : std::complex<double>(mag(i, j), 0.0);
      }
    }
    signal = istft(spec, cfg);
  }
  const double peak = signal.cwiseAbs().maxCoeff();
  if (peak > 0.99) signal *= 0.99 / peak;
  return Waveform{signal, cfg.sample_rate};
}

// ---------------------------------------------------------------------------
// WAV

namespace {

template <typename T>
void put_le(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get_le(std::string_view bytes, std::size_t pos) {
  if (pos + sizeof(T) > bytes.size()) throw IoError("truncated WAV data");
  T v;
  std::memcpy(&v, bytes.data() + pos, sizeof(T));
  return v;
}

}  // namespace

std::string encode_wav(const Waveform& w) {
  const auto n = static_cast<std::uint32_t>(w.samples.size());
  std::string out;
  out.reserve(44 + 2 * n);
  out += "RIFF";
  put_le<std::uint32_t>(out, 36 + 2 * n);
  out += "WAVEfmt ";
  put_le<std::uint32_t>(out, 16);
  put_le<std::uint16_t>(out, 1);
  put_le<std::uint16_t>(out, 1);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(w.sample_rate));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(w.sample_rate) * 2);
  put_le<std::uint16_t>(out, 2);
  put_le<std::uint16_t>(out, 16);
  out += "data";
  put_le<std::uint32_t>(out, 2 * n);
  for (Index i = 0; i < w.samples.size(); ++i) {
    const double x = std::clamp(w.samples(i), -1.0, 1.0);
    put_le<std::int16_t>(out, static_cast<std::int16_t>(std::lround(x * 32767.0)));
  }
  return out;
}

Waveform decode_wav(std::string_view bytes) {
  if (bytes.size() < 12 || bytes.substr(0, 4) != "RIFF" || bytes.substr(8, 4) != "WAVE") {
    throw IoError("not a RIFF/WAVE file");
  }
  std::size_t pos = 12;
  int rate = 0;
  bool have_fmt = false;
  while (pos + 8 <= bytes.size()) {
    const std::string_view id = bytes.substr(pos, 4);
    const auto size = get_le<std::uint32_t>(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      const auto format = get_le<std::uint16_t>(bytes, body);
      const auto channels = get_le<std::uint16_t>(bytes, body + 2);
      rate = static_cast<int>(get_le<std::uint32_t>(bytes, body + 4));
      const auto bits = get_le<std::uint16_t>(bytes, body + 14);
      if (format != 1 || channels != 1 || bits != 16) throw IoError("only 16-bit PCM mono WAV is supported");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw IoError("WAV data chunk before fmt chunk");
      if (body + size > bytes.size()) throw IoError("truncated WAV data");
      Waveform w;
      w.sample_rate = rate;
      w.samples.resize(size / 2);
      for (std::uint32_t i = 0; i < size / 2; ++i) {
        w.samples(i) = get_le<std::int16_t>(bytes, body + 2 * i) / 32767.0;
      }
      return w;
    }
    pos = body + size + (size & 1);
  }
  throw IoError("WAV file has no data chunk");
}

void write_wav(const std::filesystem::path& path, const Waveform& w) { write_file(path, encode_wav(w)); }

Waveform read_wav(const std::filesystem::path& path) { return decode_wav(read_file(path)); }

}  // namespace f2v
