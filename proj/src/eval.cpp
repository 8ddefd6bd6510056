#include "f2v/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

namespace f2v {

// ---------------------------------------------------------------------------
// CER

std::string normalize_transcript(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

double cer(std::string_view reference, std::string_view hypothesis) {
  const std::string ref = normalize_transcript(reference);
  if (ref.empty()) throw InvalidInput("cer: empty reference");
  const std::string hyp = normalize_transcript(hypothesis);
  return 100.0 * static_cast<double>(edit_distance(ref, hyp)) / static_cast<double>(ref.size());
}

// ---------------------------------------------------------------------------
// Embedders and transcribers

namespace {
constexpr int kPhaseIterations = 64;

Waveform render_audio(const MelSpectrogram& mel) {
  return griffin_lim(mel, AudioConfig{}, kPhaseIterations, 0);
}

RowVector unit(const RowVector& v) {
  const double norm = v.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) throw DegenerateVector("speaker embedding has zero or invalid norm");
  return v / norm;
}
}  // namespace

RowVector SpeakerEmbedder::embed_mel(const MelSpectrogram& mel) const { return embed(render_audio(mel)); }

RowVector SpeechEncoderEmbedder::embed(const Waveform& w) const { return embed_mel(compute_mel(w)); }

RowVector SpeechEncoderEmbedder::embed_mel(const MelSpectrogram& mel) const {
  return unit(tts_.encode_speech(mel).values);
}

std::string Transcriber::transcribe_mel(const MelSpectrogram& mel, const PhonemeSequence& content) const {
  return transcribe(render_audio(mel), content);
}

namespace {
Matrix centered(const MelSpectrogram& mel) {
  Matrix y = normalize_mel(mel.frames);
  y.rowwise() -= y.colwise().mean();
  return y;
}
}  // namespace

Matrix fit_phoneme_centroids(const TtsModel& tts, const std::vector<CorpusExample>& corpus) {
  const int bins = tts.config().n_mels;
  Matrix sums = Matrix::Zero(kPhonemeCount, bins);
  Vector counts = Vector::Zero(kPhonemeCount);
  for (const CorpusExample& ex : corpus) {
    const MelSpectrogram mel = compute_mel(ex.waveform);
    const DurationVector d = tts.align(ex.transcript, mel);
    const Matrix seg = pool_by_phoneme(centered(mel), d);
    for (std::size_t i = 0; i < ex.transcript.size(); ++i) {
      sums.row(ex.transcript.ids[i]) += seg.row(static_cast<Index>(i));
      counts(ex.transcript.ids[i]) += 1.0;
    }
  }
  Matrix centroids(kPhonemeCount, bins);
  for (Index p = 0; p < kPhonemeCount; ++p) {
    if (counts(p) > 0.0) {
      centroids.row(p) = sums.row(p) / counts(p);
    } else {
      centroids.row(p).setConstant(std::numeric_limits<double>::quiet_NaN());
    }
  }
  return centroids;
}

ForcedAlignTranscriber::ForcedAlignTranscriber(const TtsModel& tts, Matrix centroids)
    : tts_(tts), centroids_(std::move(centroids)) {
  if (centroids_.rows() != kPhonemeCount || centroids_.cols() != tts.config().n_mels) {
    throw InvalidInput("phoneme centroids have the wrong shape");
  }
}

std::string ForcedAlignTranscriber::transcribe(const Waveform& w, const PhonemeSequence& content) const {
  return transcribe_mel(compute_mel(w), content);
}

std::string ForcedAlignTranscriber::transcribe_mel(const MelSpectrogram& mel, const PhonemeSequence& content) const {
  if (mel.frame_count() == 0 || content.size() == 0) return {};
  // With fewer frames than phonemes, decode the longest alignable prefix;
  // the missing tail counts as deletions.
  PhonemeSequence target = content;
  if (static_cast<Index>(target.size()) > mel.frame_count()) {
    target.ids.resize(static_cast<std::size_t>(mel.frame_count()));
  }
  const DurationVector d = tts_.align(target, mel);
  const Matrix seg = pool_by_phoneme(centered(mel), d);
  PhonemeSequence decoded;
  for (Index i = 0; i < seg.rows(); ++i) {
    int best = -1;
    double best_dist = std::numeric_limits<double>::infinity();
    for (Index p = 0; p < centroids_.rows(); ++p) {
      if (std::isnan(centroids_(p, 0))) continue;
      const double dist = (centroids_.row(p) - seg.row(i)).squaredNorm();
      if (dist < best_dist) {
        best_dist = dist;
        best = static_cast<int>(p);
      }
    }
    if (best < 0) throw InvalidInput("phoneme centroids are empty");
    decoded.ids.push_back(best);
  }
  return render_phonemes(decoded);
}

// ---------------------------------------------------------------------------
// SECS / SED

double secs_embeddings(const RowVector& a, const RowVector& b) {
  if (a.size() != b.size()) throw InvalidInput("secs: embedding dimensions differ");
  // One reduction for all three products, so a == b gives ab == aa == bb.
  const double aa = a.dot(a);
  const double bb = b.dot(b);
  if (!(aa > 0.0) || !(bb > 0.0) || !std::isfinite(aa * bb)) {
    throw DegenerateVector("speaker embedding has zero or invalid norm");
  }
  // sqrt(x * x) == x in IEEE arithmetic, so identical inputs score exactly 100.
  return 100.0 * (a.dot(b) / std::sqrt(aa * bb));
}

double secs(const Waveform& a, const Waveform& b, const SpeakerEmbedder& emb) {
  return secs_embeddings(emb.embed(a), emb.embed(b));
}

double sed_embeddings(const std::vector<RowVector>& embeddings) {
  if (embeddings.size() < 2) throw InvalidInput("sed needs at least two outputs");
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    for (std::size_t j = i + 1; j < embeddings.size(); ++j) {
      total += secs_embeddings(embeddings[i], embeddings[j]);
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

double sed(const std::vector<Waveform>& waves, const SpeakerEmbedder& emb) {
  if (waves.size() < 2) throw InvalidInput("sed needs at least two outputs");
  std::vector<RowVector> e;
  e.reserve(waves.size());
  for (const Waveform& w : waves) e.push_back(emb.embed(w));
  return sed_embeddings(e);
}

// ---------------------------------------------------------------------------
// Evaluation sets

EvalSet make_eval_set(const TtsModel& tts, const std::vector<CorpusExample>& corpus, std::uint64_t seed) {
  EvalSet set;
  Rng rng(seed);
  for (const auto& [speaker, members] : group_by_speaker(corpus)) {
    EvalIdentity id;
    id.speaker_id = speaker;
    std::map<int, const FaceImage*> frames;
    for (std::size_t k : members) {
      const CorpusExample& ex = corpus[k];
      if (ex.face) frames.emplace(ex.frame_index.value_or(0), &*ex.face);
    }
    if (frames.empty()) throw InvalidInput("speaker " + speaker + " has no face image");
    for (const auto& [index, face] : frames) id.frames.push_back(*face);
    id.speech_vectors.resize(static_cast<Index>(members.size()), tts.config().speech_dim);
    std::vector<MelSpectrogram> mels;
    for (std::size_t r = 0; r < members.size(); ++r) {
      mels.push_back(compute_mel(corpus[members[r]].waveform));
      id.speech_vectors.row(static_cast<Index>(r)) = tts.encode_speech(mels.back()).values;
    }
    const std::size_t pick = static_cast<std::size_t>(rng.uniform_int(members.size()));
    id.reference = mels[pick];
    if (set.identities.empty()) set.text = corpus[members[pick]].transcript;
    set.identities.push_back(std::move(id));
  }
  if (set.identities.empty()) throw InvalidInput("evaluation corpus is empty");
  return set;
}

// ---------------------------------------------------------------------------
// Reports

nlohmann::json EvalRow::to_json() const {
  nlohmann::json j = {{"variant", variant}, {"cer", cer}, {"secs", secs}, {"sed", sed}, {"n", n}};
  if (recall_at_1) j["recall_at_1"] = *recall_at_1;
  return j;
}

std::string render_table(const std::vector<EvalRow>& rows) {
  const std::vector<std::string> header = {"Variant", "MOS", "CER", "SECS", "SED", "R@1", "n"};
  std::vector<std::vector<std::string>> cells = {header};
  auto fixed = [](double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << v;
    return os.str();
  };
  for (const EvalRow& r : rows) {
    cells.push_back({r.variant, "-", fixed(r.cer), fixed(r.secs), fixed(r.sed),
                     r.recall_at_1 ? fixed(*r.recall_at_1) : "-", std::to_string(r.n)});
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : cells) {
    for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
  }
  std::ostringstream os;
  auto emit = [&](const std::vector<std::string>& line) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      if (c == 0) {
        os << std::left << std::setw(static_cast<int>(width[c])) << line[c];
      } else {
        os << "  " << std::right << std::setw(static_cast<int>(width[c])) << line[c];
      }
    }
    os << '\n';
  };
  emit(cells[0]);
  std::size_t total = 0;
  for (std::size_t w : width) total += w;
  os << std::string(total + 2 * (width.size() - 1), '-') << '\n';
  for (std::size_t i = 1; i < cells.size(); ++i) emit(cells[i]);
  return os.str();
}

namespace {
SynthesisResult face_synthesis(const FaceImage& face, const PhonemeSequence& x, const Checkpoints& ckpt,
                               const FaceEncoder& encoder, const PipelineOptions& opts) {
  return synthesize_from_face(face, x, ckpt.tts, ckpt.plm, encoder, ckpt.prompt, opts);
}
}  // namespace

MetricsResult evaluate_face_metrics(const EvalSet& set, const Checkpoints& ckpt, const FaceEncoder& face,
                                    const SpeakerEmbedder& emb, const Transcriber& asr, const PipelineOptions& opts,
                                    std::string variant) {
  MetricsResult out;
  out.row.variant = std::move(variant);
  const std::string reference_text = render_phonemes(set.text);
  double cer_sum = 0.0;
  double secs_sum = 0.0;
  for (const EvalIdentity& id : set.identities) {
    const SynthesisResult syn = face_synthesis(id.frames.front(), set.text, ckpt, face, opts);
    cer_sum += cer(reference_text, asr.transcribe_mel(syn.mel, set.text));
    out.embeddings.push_back(emb.embed_mel(syn.mel));
    secs_sum += secs_embeddings(out.embeddings.back(), emb.embed_mel(id.reference));
  }
  const double n = static_cast<double>(set.identities.size());
  out.row.n = static_cast<int>(set.identities.size());
  out.row.cer = cer_sum / n;
  out.row.secs = secs_sum / n;
  out.row.sed = out.embeddings.size() >= 2 ? sed_embeddings(out.embeddings) : 100.0;
  return out;
}

double face_recall_at_1(const EvalSet& set, const FaceEncoder& face) {
  const Index n = static_cast<Index>(set.identities.size());
  Matrix queries(n, face.config().speech_dim);
  Matrix keys(n, face.config().speech_dim);
  for (Index i = 0; i < n; ++i) {
    const EvalIdentity& id = set.identities[static_cast<std::size_t>(i)];
    queries.row(i) = face.encode(id.frames.front()).values;
    keys.row(i) = id.speech_vectors.colwise().mean();
  }
  return recall_at_1(queries, keys);
}

ConsistencyResult consistency_test(const std::vector<FaceImage>& frames, const PhonemeSequence& x,
                                   const Checkpoints& ckpt, const FaceEncoder& face, const SpeakerEmbedder& emb,
                                   const PipelineOptions& opts) {
  if (frames.size() < 2) throw InvalidInput("consistency test needs at least two frames");
  ConsistencyResult out;
  for (const FaceImage& f : frames) out.embeddings.push_back(emb.embed_mel(face_synthesis(f, x, ckpt, face, opts).mel));
  const Index k = static_cast<Index>(frames.size());
  out.secs.resize(k, k);
  double off = 0.0;
  for (Index i = 0; i < k; ++i) {
    out.secs(i, i) = 100.0;
    for (Index j = i + 1; j < k; ++j) {
      const double v = secs_embeddings(out.embeddings[static_cast<std::size_t>(i)],
                                       out.embeddings[static_cast<std::size_t>(j)]);
      out.secs(i, j) = v;
      out.secs(j, i) = v;
      off += 2.0 * v;
    }
  }
  out.off_diagonal_mean = off / static_cast<double>(k * (k - 1));
  return out;
}

nlohmann::json ConsistencySuite::to_json() const {
  nlohmann::json ids = nlohmann::json::array();
  for (std::size_t i = 0; i < results.size(); ++i) {
    nlohmann::json matrix = nlohmann::json::array();
    for (Index r = 0; r < results[i].secs.rows(); ++r) {
      std::vector<double> row(results[i].secs.cols());
      for (Index c = 0; c < results[i].secs.cols(); ++c) row[static_cast<std::size_t>(c)] = results[i].secs(r, c);
      matrix.push_back(row);
    }
    ids.push_back({{"speaker", speakers[i]}, {"secs", matrix}, {"off_diagonal_mean", results[i].off_diagonal_mean}});
  }
  return {{"identities", ids},
          {"cross_identity_mean", cross_identity_mean},
          {"fraction_consistent", fraction_consistent}};
}

ConsistencySuite run_consistency(const EvalSet& set, const Checkpoints& ckpt, const FaceEncoder& face,
                                 const SpeakerEmbedder& emb, const PipelineOptions& opts) {
  ConsistencySuite suite;
  std::vector<RowVector> firsts;
  for (const EvalIdentity& id : set.identities) {
    if (id.frames.size() < 2) continue;
    suite.speakers.push_back(id.speaker_id);
    suite.results.push_back(consistency_test(id.frames, set.text, ckpt, face, emb, opts));
    firsts.push_back(suite.results.back().embeddings.front());
  }
  if (firsts.size() < 2) throw InvalidInput("consistency suite needs two identities with at least two frames");
  suite.cross_identity_mean = sed_embeddings(firsts);
  std::size_t above = 0;
  for (const ConsistencyResult& r : suite.results) above += r.off_diagonal_mean > suite.cross_identity_mean ? 1 : 0;
  suite.fraction_consistent = static_cast<double>(above) / static_cast<double>(suite.results.size());
  return suite;
}

AblationReport run_ablation(const AblationSetup& setup, const std::vector<MappingVariant>& variants,
                            const EvalSet& set, const Checkpoints& ckpt, const SpeakerEmbedder& emb,
                            const Transcriber& asr, const PipelineOptions& opts) {
  AblationReport report;
  for (MappingVariant v : variants) {
    FaceTrainConfig train = setup.train;
    train.loss.variant = v;
    FaceTrainResult trained = train_face_encoder(setup.train_corpus, setup.train_targets, setup.model, train);
    EvalRow row = evaluate_face_metrics(set, ckpt, trained.encoder, emb, asr, opts, to_string(v)).row;
    row.recall_at_1 = face_recall_at_1(set, trained.encoder);
    report.rows.push_back(std::move(row));
    report.encoders.push_back(std::move(trained.encoder));
  }
  return report;
}

}  // namespace f2v
