#include "f2v/corpus.hpp"

#include "f2v/archive.hpp"
#include "f2v/rng.hpp"

#include <json.hpp>
#include <png.h>

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

namespace f2v {

// ---------------------------------------------------------------------------
// Phonemes

std::string render_phonemes(const PhonemeSequence& x) {
  std::string out;
  out.reserve(x.size());
  for (int id : x.ids) {
    if (id < 0 || id >= kPhonemeCount) throw InvalidInput("phoneme id out of range: " + std::to_string(id));
    out.push_back(kPhonemeSymbols[static_cast<std::size_t>(id)]);
  }
  return out;
}

PhonemeSequence phonemes_from_symbols(std::string_view symbols) {
  PhonemeSequence x;
  for (char c : symbols) {
    const auto pos = kPhonemeSymbols.find(c);
    if (pos == std::string_view::npos) throw InvalidInput(std::string("unknown phoneme symbol '") + c + "'");
    x.ids.push_back(static_cast<int>(pos));
  }
  return x;
}

const std::map<std::string, std::string>& lexicon() {
  static const std::map<std::string, std::string> table = {
      {"a", "a"},          {"all", "ol"},      {"always", "olwejz"}, {"fine", "fajn"},  {"five", "fajv"},
      {"hello", "helou"},  {"here", "hir"},    {"how", "hau"},       {"is", "iz"},      {"lemon", "lemon"},
      {"lime", "lajm"},    {"line", "lajn"},   {"love", "lav"},      {"many", "meni"},  {"me", "mi"},
      {"mine", "majn"},    {"moon", "mun"},    {"more", "mor"},      {"my", "maj"},     {"new", "nju"},
      {"no", "nou"},       {"now", "nau"},     {"one", "wan"},       {"over", "ouvr"},  {"said", "sed"},
      {"seven", "sevn"},   {"she", "si"},      {"so", "sou"},        {"sun", "san"},    {"voice", "vojs"},
      {"we", "wi"},        {"well", "wel"},    {"who", "hu"},        {"yes", "jes"},    {"you", "ju"},
      {"zero", "zirou"},
  };
  return table;
}

PhonemeSequence grapheme_to_phoneme(std::string_view text) {
  PhonemeSequence out;
  std::istringstream words{std::string(text)};
  std::string w;
  while (words >> w) {
    std::string lower;
    for (char c : w) {
      if (std::isalpha(static_cast<unsigned char>(c))) lower.push_back(static_cast<char>(std::tolower(c)));
    }
    if (lower.empty()) continue;
    auto it = lexicon().find(lower);
    if (it == lexicon().end()) throw InvalidInput("word not in lexicon: " + lower);
    const PhonemeSequence p = phonemes_from_symbols(it->second);
    out.ids.insert(out.ids.end(), p.ids.begin(), p.ids.end());
  }
  if (out.ids.empty()) throw InvalidInput("text has no words");
  return out;
}

// ---------------------------------------------------------------------------
// Faces

void validate_face(const FaceImage& face) {
  if (face.pixels.size() != 3 * kFaceSize * kFaceSize) throw InvalidInput("face image must be 3x224x224");
  if (!face.pixels.allFinite() || face.pixels.minCoeff() < 0.0f || face.pixels.maxCoeff() > 1.0f) {
    throw InvalidInput("face pixels must lie in [0, 1]");
  }
}

std::string encode_png(const FaceImage& face) {
  validate_face(face);
  std::vector<png_byte> rgb(3 * kFaceSize * kFaceSize);
  for (int y = 0; y < kFaceSize; ++y) {
    for (int x = 0; x < kFaceSize; ++x) {
      for (int c = 0; c < 3; ++c) {
        rgb[static_cast<std::size_t>((y * kFaceSize + x) * 3 + c)] =
            static_cast<png_byte>(std::lround(face.at(c, y, x) * 255.0f));
      }
    }
  }
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = kFaceSize;
  image.height = kFaceSize;
  image.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, rgb.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encode failed: ") + image.message);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, rgb.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

FaceImage decode_png(std::string_view bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw IoError(std::string("PNG decode failed: ") + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<png_byte> rgb(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, rgb.data(), 0, nullptr)) {
    throw IoError(std::string("PNG decode failed: ") + image.message);
  }
  const int w = static_cast<int>(image.width);
  const int h = static_cast<int>(image.height);
  const int side = std::min(w, h);
  const int x0 = (w - side) / 2;
  const int y0 = (h - side) / 2;
  auto src = [&](int c, int y, int x) {
    return rgb[static_cast<std::size_t>(((y0 + y) * w + (x0 + x)) * 3 + c)] / 255.0f;
  };
  FaceImage face;
  if (side == kFaceSize) {
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < kFaceSize; ++y)
        for (int x = 0; x < kFaceSize; ++x) face.at(c, y, x) = src(c, y, x);
    return face;
  }
  const double ratio = static_cast<double>(side) / kFaceSize;
  for (int y = 0; y < kFaceSize; ++y) {
    const double sy = std::clamp((y + 0.5) * ratio - 0.5, 0.0, side - 1.0);
    const int iy = std::min(static_cast<int>(sy), side - 2 < 0 ? 0 : side - 2);
    const double fy = side > 1 ? sy - iy : 0.0;
    for (int x = 0; x < kFaceSize; ++x) {
      const double sx = std::clamp((x + 0.5) * ratio - 0.5, 0.0, side - 1.0);
      const int ix = std::min(static_cast<int>(sx), side - 2 < 0 ? 0 : side - 2);
      const double fx = side > 1 ? sx - ix : 0.0;
      const int ix1 = std::min(ix + 1, side - 1);
      const int iy1 = std::min(iy + 1, side - 1);
      for (int c = 0; c < 3; ++c) {
        const double v = (1 - fy) * ((1 - fx) * src(c, iy, ix) + fx * src(c, iy, ix1)) +
                         fy * ((1 - fx) * src(c, iy1, ix) + fx * src(c, iy1, ix1));
        face.at(c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return face;
}

void write_png(const std::filesystem::path& path, const FaceImage& face) { write_file(path, encode_png(face)); }

FaceImage read_png(const std::filesystem::path& path) { return decode_png(read_file(path)); }

// ---------------------------------------------------------------------------
// Manifest

std::vector<CorpusExample> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError(0, "cannot open " + path.string());
  const std::filesystem::path base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };
  std::vector<CorpusExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ManifestError(lineno, std::string("invalid JSON: ") + e.what());
    }
    if (!rec.is_object()) throw ManifestError(lineno, "record is not an object");
    try {
      CorpusExample ex;
      if (!rec.contains("audio") || !rec["audio"].is_string()) throw ManifestError(lineno, "missing \"audio\" path");
      if (!rec.contains("speaker") || !rec["speaker"].is_string()) throw ManifestError(lineno, "missing \"speaker\"");
      ex.speaker_id = rec["speaker"].get<std::string>();
      ex.utterance_id = rec.value("utt", std::filesystem::path(rec["audio"].get<std::string>()).stem().string());
      if (rec.contains("phonemes")) {
        for (const auto& v : rec["phonemes"]) {
          if (!v.is_number_integer()) throw ManifestError(lineno, "phoneme ids must be integers");
          const int id = v.get<int>();
          if (id < 0 || id >= kPhonemeCount) throw ManifestError(lineno, "phoneme id out of range");
          ex.transcript.ids.push_back(id);
        }
      } else if (rec.contains("text") && rec["text"].is_string()) {
        ex.transcript = grapheme_to_phoneme(rec["text"].get<std::string>());
      } else {
        throw ManifestError(lineno, "record needs \"phonemes\" or \"text\"");
      }
      if (ex.transcript.ids.empty()) throw ManifestError(lineno, "empty transcript");
      ex.waveform = read_wav(resolve(rec["audio"].get<std::string>()));
      if (rec.contains("face") && !rec["face"].is_null()) {
        ex.face = read_png(resolve(rec["face"].get<std::string>()));
      }
      if (rec.contains("frame") && !rec["frame"].is_null()) ex.frame_index = rec["frame"].get<int>();
      out.push_back(std::move(ex));
    } catch (const ManifestError&) {
      throw;
    } catch (const std::exception& e) {
      throw ManifestError(lineno, e.what());
    }
  }
  return out;
}

std::vector<std::pair<std::string, std::vector<std::size_t>>> group_by_speaker(
    const std::vector<CorpusExample>& corpus) {
  std::vector<std::pair<std::string, std::vector<std::size_t>>> groups;
  std::map<std::string, std::size_t> where;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto [it, inserted] = where.try_emplace(corpus[i].speaker_id, groups.size());
    if (inserted) groups.emplace_back(corpus[i].speaker_id, std::vector<std::size_t>{});
    groups[it->second].second.push_back(i);
  }
  return groups;
}

// ---------------------------------------------------------------------------
// Synthetic faces

FaceLayout face_layout(const SpeakerFactors& f) {
  const double a = (f.f0_base - kF0Min) / (kF0Max - kF0Min);
  const double b = (f.formant_shift - kFormantMin) / (kFormantMax - kFormantMin);
  FaceLayout l;
  l.center_x = 112.0;
  l.center_y = 112.0;
  l.face_rx = 50.0 + 50.0 * a;
  l.face_ry = 64.0 + 40.0 * b;
  l.eye_separation = 36.0 + 40.0 * b;
  l.eye_offset_y = -14.0 - 14.0 * a;
  l.eye_radius = 5.0 + 12.0 * a;
  l.nose_length = 10.0 + 30.0 * b;
  l.mouth_width = 20.0 + 50.0 * a;
  l.mouth_height = 4.0 + 14.0 * b;
  l.mouth_offset_y = 30.0 + 20.0 * b;
  return l;
}

FaceLayout apply_jitter(const FaceLayout& base, const FrameJitter& j) {
  FaceLayout l = base;
  l.center_x += j.dx;
  l.center_y += j.dy;
  for (double* v : {&l.face_rx, &l.face_ry, &l.eye_separation, &l.eye_offset_y, &l.eye_radius, &l.nose_length,
                    &l.mouth_width, &l.mouth_height, &l.mouth_offset_y}) {
    *v *= j.scale;
  }
  return l;
}

FrameJitter frame_jitter(std::uint64_t seed, std::size_t speaker, int frame) {
  Rng rng = Rng::substream(seed, 0x4a17000000000000ULL ^ (static_cast<std::uint64_t>(speaker) << 16) ^
                                     static_cast<std::uint64_t>(frame));
  FrameJitter j;
  j.dx = rng.uniform(-kJitterShift, kJitterShift);
  j.dy = rng.uniform(-kJitterShift, kJitterShift);
  j.scale = 1.0 + rng.uniform(-kJitterScale, kJitterScale);
  return j;
}

FaceImage render_face(const FaceLayout& l) {
  struct Rgb {
    float r, g, b;
  };
  constexpr Rgb kBackground{0.86f, 0.87f, 0.92f};
  constexpr Rgb kSkin{0.91f, 0.73f, 0.60f};
  constexpr Rgb kEye{0.12f, 0.13f, 0.20f};
  constexpr Rgb kNose{0.62f, 0.44f, 0.38f};
  constexpr Rgb kMouth{0.72f, 0.18f, 0.24f};
  auto quantize = [](float v) { return std::round(v * 255.0f) / 255.0f; };

  auto shade = [&](double px, double py) {
    Rgb c = kBackground;
    if ((px * px) / (l.face_rx * l.face_rx) + (py * py) / (l.face_ry * l.face_ry) <= 1.0) c = kSkin;
    const double ey = py - l.eye_offset_y;
    const double ex1 = px - l.eye_separation / 2.0;
    const double ex2 = px + l.eye_separation / 2.0;
    if (ex1 * ex1 + ey * ey <= l.eye_radius * l.eye_radius || ex2 * ex2 + ey * ey <= l.eye_radius * l.eye_radius) {
      c = kEye;
    }
    if (std::abs(px) <= 2.5 && py >= -4.0 && py <= -4.0 + l.nose_length) c = kNose;
    if (std::abs(px) <= l.mouth_width / 2.0 && std::abs(py - l.mouth_offset_y) <= l.mouth_height / 2.0) c = kMouth;
    return c;
  };

  // Box-filtered over a 4 x 4 subpixel grid so edges carry subpixel geometry.
  constexpr int kSub = 4;
  FaceImage img;
  for (int y = 0; y < kFaceSize; ++y) {
    for (int x = 0; x < kFaceSize; ++x) {
      float r = 0, g = 0, b = 0;
      for (int sy = 0; sy < kSub; ++sy) {
        for (int sx = 0; sx < kSub; ++sx) {
          const Rgb c = shade(x + (sx + 0.5) / kSub - l.center_x, y + (sy + 0.5) / kSub - l.center_y);
          r += c.r;
          g += c.g;
          b += c.b;
        }
      }
      constexpr float kInv = 1.0f / (kSub * kSub);
      img.at(0, y, x) = quantize(r * kInv);
      img.at(1, y, x) = quantize(g * kInv);
      img.at(2, y, x) = quantize(b * kInv);
    }
  }
  return img;
}

// ---------------------------------------------------------------------------
// Synthetic speech

namespace {

struct PhonemeAcoustics {
  double f1, f2, f3;
  double voicing;
  double noise_lo, noise_hi, noise_gain;
  double base_frames;
};

// Indexed like kPhonemeSymbols: a e i o u m n l r w j s f h z v.
constexpr PhonemeAcoustics kAcoustics[kPhonemeCount] = {
    {730, 1090, 2440, 1.0, 0, 0, 0, 10},       {530, 1840, 2480, 1.0, 0, 0, 0, 9},
    {270, 2290, 3010, 1.0, 0, 0, 0, 8},        {570, 840, 2410, 1.0, 0, 0, 0, 10},
    {300, 870, 2240, 1.0, 0, 0, 0, 9},         {280, 1000, 2200, 0.35, 0, 0, 0, 6},
    {280, 1600, 2600, 0.35, 0, 0, 0, 6},       {360, 1300, 2700, 0.55, 0, 0, 0, 6},
    {420, 1300, 1600, 0.55, 0, 0, 0, 6},       {300, 610, 2200, 0.55, 0, 0, 0, 5},
    {270, 2200, 3000, 0.55, 0, 0, 0, 5},       {0, 0, 0, 0.0, 4500, 7500, 0.30, 8},
    {0, 0, 0, 0.0, 1500, 6500, 0.15, 7},       {0, 0, 0, 0.0, 500, 3500, 0.15, 6},
    {300, 1500, 2500, 0.30, 4000, 7000, 0.20, 7}, {300, 1100, 2300, 0.30, 1500, 5500, 0.12, 6},
};

bool is_vowel(int id) { return id < 5; }

double formant_envelope(double f, double f1, double f2, double f3, double shift) {
  const double F[3] = {f1 * shift, f2 * shift, f3 * shift};
  const double B[3] = {90.0 * shift, 120.0 * shift, 180.0 * shift};
  const double G[3] = {1.0, 0.55, 0.3};
  double e = 0.0;
  for (int j = 0; j < 3; ++j) {
    const double z = (f - F[j]) / B[j];
    e += G[j] / (1.0 + z * z);
  }
  return e / (1.0 + f / 2500.0);
}

}  // namespace

SyntheticUtterance render_utterance(const SpeakerFactors& f, std::uint64_t seed, const AudioConfig& cfg) {
  Rng rng(seed);
  SyntheticUtterance u;
  const int n = 6 + static_cast<int>(rng.uniform_int(7));
  bool consonant = rng.uniform() < 0.5;
  for (int i = 0; i < n; ++i) {
    const int id = consonant ? 5 + static_cast<int>(rng.uniform_int(kPhonemeCount - 5))
                             : static_cast<int>(rng.uniform_int(5));
    u.phonemes.ids.push_back(id);
    consonant = !consonant;
  }

  // Prosody: per-phoneme pitch accent, energy and duration.
  const double speed = rng.uniform(0.85, 1.15);
  constexpr double kAccents[4] = {0.85, 1.0, 1.15, 1.3};
  std::vector<double> accent(n), energy(n);
  for (int i = 0; i < n; ++i) {
    const int pid = u.phonemes.ids[i];
    const double frames = kAcoustics[pid].base_frames * speed * rng.uniform(0.8, 1.2);
    u.durations.counts.push_back(std::max(3, static_cast<int>(std::lround(frames))));
    accent[i] = kAccents[rng.uniform_int(4)];
    energy[i] = rng.uniform(0.6, 1.0) * (is_vowel(pid) ? 1.0 : 0.8);
  }
  const int m = u.durations.total();
  // Accents are relative: the duration-weighted mean pitch factor is 1.
  double accent_mean = 0.0;
  for (int i = 0; i < n; ++i) accent_mean += accent[i] * u.durations.counts[i];
  accent_mean /= m;
  for (double& a : accent) a /= accent_mean;
  const Index L = static_cast<Index>(m) * cfg.hop;

  // Frame-level controls, smoothed across phoneme boundaries.
  std::vector<int> frame_ph(static_cast<std::size_t>(m));
  for (int i = 0, t = 0; i < n; ++i) {
    for (int k = 0; k < u.durations.counts[i]; ++k) frame_ph[t++] = i;
  }
  Matrix ctl(m, 5);  // f0, voiced amplitude, f1, f2, f3
  for (int t = 0; t < m; ++t) {
    const int i = frame_ph[t];
    const auto& ac = kAcoustics[u.phonemes.ids[i]];
    const double decl = 1.0 - 0.12 * t / std::max(1, m - 1);
    ctl(t, 0) = f.f0_base * accent[i] * decl;
    ctl(t, 1) = ac.voicing * energy[i];
    ctl(t, 2) = ac.voicing > 0 ? ac.f1 : 500;
    ctl(t, 3) = ac.voicing > 0 ? ac.f2 : 1500;
    ctl(t, 4) = ac.voicing > 0 ? ac.f3 : 2500;
  }
  Matrix smooth = ctl;
  for (int t = 0; t < m; ++t) {
    const int lo = std::max(0, t - 1);
    const int hi = std::min(m - 1, t + 1);
    smooth.row(t) = ctl.middleRows(lo, hi - lo + 1).colwise().mean();
  }

  // Harmonic part: one phase accumulator, harmonics at integer multiples.
  Vector voiced = Vector::Zero(L);
  const double nyquist_guard = 0.49 * cfg.sample_rate;
  double phase = 0.0;
  const int max_harm = static_cast<int>(nyquist_guard / (kF0Min * 0.8)) + 1;
  std::vector<double> amp0(static_cast<std::size_t>(max_harm + 1)), amp1(amp0.size());
  auto harmonic_amps = [&](int t, std::vector<double>& amp) {
    const double f0 = smooth(t, 0);
    for (int k = 1; k <= max_harm; ++k) {
      const double fk = k * f0;
      amp[k] = fk < nyquist_guard
                   ? smooth(t, 1) * formant_envelope(fk, smooth(t, 2), smooth(t, 3), smooth(t, 4), f.formant_shift)
                   : 0.0;
    }
  };
  for (int t = 0; t < m; ++t) {
    harmonic_amps(t, amp0);
    harmonic_amps(std::min(t + 1, m - 1), amp1);
    const double f0a = smooth(t, 0);
    const double f0b = smooth(std::min(t + 1, m - 1), 0);
    for (int s = 0; s < cfg.hop; ++s) {
      const double w = static_cast<double>(s) / cfg.hop;
      const double f0 = (1 - w) * f0a + w * f0b;
      phase += 2.0 * std::numbers::pi * f0 / cfg.sample_rate;
      if (phase > 2.0 * std::numbers::pi * 1e6) phase = std::fmod(phase, 2.0 * std::numbers::pi);
      double acc = 0.0;
      for (int k = 1; k <= max_harm; ++k) {
        const double a = (1 - w) * amp0[k] + w * amp1[k];
        if (a != 0.0) acc += a * std::sin(k * phase);
      }
      voiced(static_cast<Index>(t) * cfg.hop + s) = acc;
    }
  }

  // Noise part: shaped white noise in the STFT domain.
  Vector white(L);
  for (Index i = 0; i < L; ++i) white(i) = rng.normal();
  ComplexMatrix spec = stft(white, cfg);
  for (int t = 0; t < m; ++t) {
    const auto& ac = kAcoustics[u.phonemes.ids[frame_ph[t]]];
    const double lo = std::min(ac.noise_lo * f.formant_shift, 7900.0);
    const double hi = std::min(ac.noise_hi * f.formant_shift, 7950.0);
    for (int k = 0; k < cfg.n_bins(); ++k) {
      const double fk = static_cast<double>(k) * cfg.sample_rate / cfg.n_fft;
      const double g = (ac.noise_gain > 0 && fk >= lo && fk <= hi) ? ac.noise_gain * energy[frame_ph[t]] : 0.0;
      spec(t, k) *= g;
    }
  }
  const Vector noise = istft(spec, cfg);

  Vector x = voiced + 0.25 * noise;
  for (Index i = 0; i < L; ++i) x(i) += 2e-4 * rng.normal();
  const double rms = std::sqrt(x.squaredNorm() / static_cast<double>(L));
  if (rms > 0) x *= 0.08 / rms;
  for (Index i = 0; i < L; ++i) x(i) = std::round(std::clamp(x(i), -1.0, 1.0) * 32767.0) / 32767.0;
  u.waveform = Waveform{x, cfg.sample_rate};
  return u;
}

// ---------------------------------------------------------------------------
// Corpus generation

namespace {

constexpr std::uint64_t kFactorStream = 0xfac7000000000000ULL;
constexpr std::uint64_t kUtteranceStream = 0x0770000000000000ULL;

std::vector<SpeakerFactors> sample_factors(std::uint64_t seed, int n) {
  // Rejection sampling with a minimum separation in normalized factor space
  // keeps identities distinguishable.
  Rng rng = Rng::substream(seed, kFactorStream);
  const double min_sep = 0.7 / std::sqrt(static_cast<double>(n));
  std::vector<std::pair<double, double>> unit;
  std::vector<SpeakerFactors> out;
  for (int s = 0; s < n; ++s) {
    std::pair<double, double> best{0, 0};
    double best_d = -1.0;
    for (int attempt = 0; attempt < 200; ++attempt) {
      const std::pair<double, double> cand{rng.uniform(), rng.uniform()};
      double d = std::numeric_limits<double>::infinity();
      for (const auto& u : unit) d = std::min(d, std::hypot(cand.first - u.first, cand.second - u.second));
      if (d > best_d) {
        best_d = d;
        best = cand;
      }
      if (d >= min_sep) break;
    }
    unit.push_back(best);
    out.push_back(SpeakerFactors{kF0Min + (kF0Max - kF0Min) * best.first,
                                 kFormantMin + (kFormantMax - kFormantMin) * best.second});
  }
  return out;
}

std::string padded(int v, int width) {
  std::string s = std::to_string(v);
  return std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
}

}  // namespace

SyntheticCorpus generate_synthetic_corpus(std::uint64_t seed, int n_speakers, int utts_per_speaker,
                                          int frames_per_face) {
  if (n_speakers < 1 || utts_per_speaker < 1 || frames_per_face < 1) {
    throw InvalidInput("synthetic corpus counts must be >= 1");
  }
  SyntheticCorpus corpus;
  const auto factors = sample_factors(seed, n_speakers);
  for (int s = 0; s < n_speakers; ++s) {
    SyntheticSpeaker spk{"spk" + padded(s, 3), factors[static_cast<std::size_t>(s)]};
    const FaceLayout base = face_layout(spk.factors);
    std::vector<FaceImage> frames;
    for (int f = 0; f < frames_per_face; ++f) {
      frames.push_back(render_face(apply_jitter(base, frame_jitter(seed, static_cast<std::size_t>(s), f))));
    }
    for (int u = 0; u < utts_per_speaker; ++u) {
      const std::uint64_t useed =
          Rng::substream(seed, kUtteranceStream ^ (static_cast<std::uint64_t>(s) << 20) ^ static_cast<std::uint64_t>(u))
              .next_u64();
      SyntheticUtterance utt = render_utterance(spk.factors, useed);
      CorpusExample ex;
      ex.utterance_id = spk.id + "_u" + padded(u, 3);
      ex.waveform = std::move(utt.waveform);
      ex.transcript = std::move(utt.phonemes);
      ex.speaker_id = spk.id;
      ex.frame_index = u % frames_per_face;
      ex.face = frames[static_cast<std::size_t>(*ex.frame_index)];
      corpus.examples.push_back(std::move(ex));
      corpus.durations.push_back(std::move(utt.durations));
    }
    corpus.speakers.push_back(std::move(spk));
  }
  return corpus;
}

}  // namespace f2v

namespace f2v {

CorpusFiles write_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "wav", ec);
  if (!ec) fs::create_directories(dir / "faces", ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  CorpusFiles files;
  files.manifest = dir / "manifest.jsonl";
  std::ostringstream manifest;
  std::map<std::string, bool> written_faces;
  for (std::size_t i = 0; i < corpus.examples.size(); ++i) {
    const CorpusExample& ex = corpus.examples[i];
    const std::string wav = "wav/" + ex.utterance_id + ".wav";
    write_wav(dir / wav, ex.waveform);
    ++files.wav_count;
    nlohmann::json rec = {{"utt", ex.utterance_id}, {"speaker", ex.speaker_id}, {"audio", wav},
                          {"phonemes", ex.transcript.ids}};
    if (i < corpus.durations.size()) rec["durations"] = corpus.durations[i].counts;
    if (ex.face) {
      const int frame = ex.frame_index.value_or(0);
      const std::string png = "faces/" + ex.speaker_id + "_f" + std::to_string(frame) + ".png";
      if (written_faces.emplace(png, true).second) {
        write_png(dir / png, *ex.face);
        ++files.png_count;
      }
      rec["face"] = png;
      rec["frame"] = frame;
    }
    manifest << rec.dump() << '\n';
  }
  std::ofstream out(files.manifest, std::ios::binary);
  out << manifest.str();
  if (!out) throw IoError("cannot write " + files.manifest.string());
  return files;
}

}  // namespace f2v
