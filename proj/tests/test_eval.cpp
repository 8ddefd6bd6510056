#include "f2v/eval.hpp"
#include "f2v/pipeline.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

namespace f2v {
namespace {

using testing::all_strings;
using testing::brute_edit_distance;

// Embeds the first samples of a waveform as they are.
class SampleEmbedder final : public SpeakerEmbedder {
 public:
  RowVector embed(const Waveform& w) const override { return w.samples.head(3).transpose(); }
};

Waveform wave(std::initializer_list<double> samples) {
  Waveform w;
  w.samples = Vector(static_cast<Index>(samples.size()));
  Index i = 0;
  for (double s : samples) w.samples(i++) = s;
  return w;
}

TEST(Cer, HandExamples) {
  EXPECT_EQ(cer("hello", "hello"), 0.0);
  EXPECT_DOUBLE_EQ(cer("hello", "hallo"), 20.0);
  EXPECT_DOUBLE_EQ(cer("abc", ""), 100.0);
  EXPECT_DOUBLE_EQ(cer("ab", "abcd"), 100.0);
  EXPECT_EQ(cer("  Hello   World ", "hello world"), 0.0);
  EXPECT_THROW(cer("", "x"), InvalidInput);
  EXPECT_THROW(cer("   ", "x"), InvalidInput);
  EXPECT_EQ(normalize_transcript("\tA  b\nC "), "a b c");
}

TEST(Cer, EditDistanceMatchesRecursiveOracle) {
  const std::vector<std::string> strings = all_strings("abc", 6);
  Rng rng(1);
  for (int trial = 0; trial < 3000; ++trial) {
    const std::string& a = strings[rng.uniform_int(strings.size())];
    const std::string& b = strings[rng.uniform_int(strings.size())];
    ASSERT_EQ(edit_distance(a, b), brute_edit_distance(a, b)) << a << " / " << b;
    if (!a.empty()) {
      ASSERT_DOUBLE_EQ(cer(a, b), 100.0 * static_cast<double>(brute_edit_distance(a, b)) / a.size());
    }
  }
  // Every pair up to length 3, exhaustively.
  for (const std::string& a : all_strings("abc", 3)) {
    for (const std::string& b : all_strings("abc", 3)) ASSERT_EQ(edit_distance(a, b), brute_edit_distance(a, b));
  }
}

TEST(Secs, SelfSimilarityIsExactlyOneHundred) {
  const SampleEmbedder emb;
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const Waveform w = wave({rng.normal(), rng.normal(), rng.normal()});
    ASSERT_EQ(secs(w, w, emb), 100.0);
  }
}

TEST(Secs, OrthogonalSymmetricAndScaleInvariant) {
  const SampleEmbedder emb;
  EXPECT_EQ(secs(wave({1, 0, 0}), wave({0, 2, 0}), emb), 0.0);
  EXPECT_DOUBLE_EQ(secs(wave({1, 0, 0}), wave({-3, 0, 0}), emb), -100.0);
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const Waveform a = wave({rng.normal(), rng.normal(), rng.normal()});
    const Waveform b = wave({rng.normal(), rng.normal(), rng.normal()});
    ASSERT_EQ(secs(a, b, emb), secs(b, a, emb));
    Waveform scaled = a;
    scaled.samples *= rng.uniform(0.1, 10.0);
    ASSERT_NEAR(secs(scaled, b, emb), secs(a, b, emb), 1e-12);
  }
  EXPECT_THROW(secs(wave({0, 0, 0}), wave({1, 0, 0}), emb), DegenerateVector);
}

TEST(Sed, CopiesOrthogonalSetsAndPairs) {
  const SampleEmbedder emb;
  const Waveform w = wave({0.3, -1.7, 0.2});
  for (std::size_t n = 2; n <= 6; ++n) EXPECT_EQ(sed(std::vector<Waveform>(n, w), emb), 100.0) << n;
  EXPECT_EQ(sed({wave({1, 0, 0}), wave({0, 1, 0}), wave({0, 0, 1})}, emb), 0.0);
  const Waveform a = wave({1, 2, 3});
  const Waveform b = wave({3, -1, 0.5});
  EXPECT_DOUBLE_EQ(sed({a, b}, emb), secs(a, b, emb));
  EXPECT_THROW(sed({a}, emb), InvalidInput);
  EXPECT_THROW(sed({}, emb), InvalidInput);
}

TEST(Reports, RowJsonAndTable) {
  EvalRow row{"mse_cos", 12.5, 80.25, 40.0, 4, std::nullopt};
  nlohmann::json j = row.to_json();
  for (const char* key : {"variant", "cer", "secs", "sed", "n"}) EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_FALSE(j.contains("recall_at_1"));
  EXPECT_EQ(j["variant"], "mse_cos");
  EXPECT_EQ(j["n"], 4);
  row.recall_at_1 = 0.75;
  EXPECT_EQ(row.to_json()["recall_at_1"], 0.75);
  const std::string table = render_table({row, EvalRow{"face", 1.0, 2.0, 3.0, 2, std::nullopt}});
  for (const char* part : {"Variant", "MOS", "CER", "SECS", "SED", "mse_cos", "face", "12.5"}) {
    EXPECT_NE(table.find(part), std::string::npos) << part;
  }
}

TEST(Transcriber, ForcedAlignmentLabelsEverySegment) {
  const TtsModel tts(testing::tiny_tts_config(), 4);
  const SyntheticUtterance u = render_utterance(SpeakerFactors{150.0, 1.0}, 5);
  const MelSpectrogram mel = compute_mel(u.waveform);
  Matrix only_s = Matrix::Constant(kPhonemeCount, 80, std::numeric_limits<double>::quiet_NaN());
  only_s.row(11).setZero();
  const ForcedAlignTranscriber asr(tts, only_s);
  EXPECT_EQ(asr.transcribe_mel(mel, u.phonemes), std::string(u.phonemes.size(), 's'));
  MelSpectrogram short_mel;
  short_mel.frames = mel.frames.topRows(3);
  EXPECT_EQ(asr.transcribe_mel(short_mel, u.phonemes), "sss");
  EXPECT_THROW(ForcedAlignTranscriber(tts, Matrix::Zero(3, 80)), InvalidInput);

  CorpusExample ex;
  ex.waveform = u.waveform;
  ex.transcript = u.phonemes;
  const Matrix centroids = fit_phoneme_centroids(tts, {ex});
  for (int p = 0; p < kPhonemeCount; ++p) {
    const bool seen = std::find(u.phonemes.ids.begin(), u.phonemes.ids.end(), p) != u.phonemes.ids.end();
    EXPECT_EQ(std::isnan(centroids(p, 0)), !seen) << p;
  }
  const std::string decoded = ForcedAlignTranscriber(tts, centroids).transcribe(u.waveform, u.phonemes);
  EXPECT_EQ(decoded.size(), u.phonemes.size());
}

// Untrained prosody-free checkpoints: the suites' bookkeeping, not quality.
class EvalSuitesTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    TtsConfig cfg = testing::tiny_tts_config();
    cfg.use_prosody = false;
    tts_ = new TtsModel(cfg, 6);
    corpus_ = new SyntheticCorpus(generate_synthetic_corpus(7, 3, 3, 3));
    FaceEncoderConfig fc;
    fc.speech_dim = cfg.speech_dim;
    fc.channels = {2, 2, 2, 4};
    face_cfg_ = new FaceEncoderConfig(fc);
    face_ = new FaceEncoder(fc, 8);
  }
  static void TearDownTestSuite() {
    delete face_;
    delete face_cfg_;
    delete corpus_;
    delete tts_;
  }

  static TtsModel* tts_;
  static SyntheticCorpus* corpus_;
  static FaceEncoderConfig* face_cfg_;
  static FaceEncoder* face_;
};
TtsModel* EvalSuitesTest::tts_ = nullptr;
SyntheticCorpus* EvalSuitesTest::corpus_ = nullptr;
FaceEncoderConfig* EvalSuitesTest::face_cfg_ = nullptr;
FaceEncoder* EvalSuitesTest::face_ = nullptr;

TEST_F(EvalSuitesTest, EvalSetHasOrderedDistinctFrames) {
  const EvalSet set = make_eval_set(*tts_, corpus_->examples, 1);
  ASSERT_EQ(set.identities.size(), 3u);
  for (const EvalIdentity& id : set.identities) {
    EXPECT_EQ(id.frames.size(), 3u);
    EXPECT_FALSE(id.frames[0] == id.frames[1]);
    EXPECT_EQ(id.speech_vectors.rows(), 3);
    EXPECT_GT(id.reference.frame_count(), 0);
  }
  EXPECT_FALSE(set.text.ids.empty());
  EXPECT_EQ(make_eval_set(*tts_, corpus_->examples, 1).text, set.text);
}

TEST_F(EvalSuitesTest, ConsistencyMatrixIsSymmetricWithUnitDiagonal) {
  const EvalSet set = make_eval_set(*tts_, corpus_->examples, 1);
  const Checkpoints ckpt{*tts_, nullptr, nullptr};
  const SpeechEncoderEmbedder emb(*tts_);
  const ConsistencyResult r = consistency_test(set.identities[0].frames, set.text, ckpt, *face_, emb, {});
  ASSERT_EQ(r.secs.rows(), 3);
  ASSERT_EQ(r.secs.cols(), 3);
  for (Index i = 0; i < 3; ++i) {
    EXPECT_EQ(r.secs(i, i), 100.0);
    for (Index j = 0; j < 3; ++j) EXPECT_EQ(r.secs(i, j), r.secs(j, i));
  }
  const double off = (r.secs.sum() - r.secs.trace()) / 6.0;
  EXPECT_NEAR(r.off_diagonal_mean, off, 1e-12);
  EXPECT_THROW(consistency_test({set.identities[0].frames[0]}, set.text, ckpt, *face_, emb, {}), InvalidInput);

  const ConsistencySuite suite = run_consistency(set, ckpt, *face_, emb, {});
  EXPECT_EQ(suite.results.size(), 3u);
  EXPECT_EQ(suite.speakers.size(), 3u);
  EXPECT_GE(suite.fraction_consistent, 0.0);
  EXPECT_LE(suite.fraction_consistent, 1.0);
  const nlohmann::json j = suite.to_json();
  EXPECT_TRUE(j.contains("cross_identity_mean"));
  EXPECT_TRUE(j.contains("fraction_consistent"));
}

TEST_F(EvalSuitesTest, MetricsRowCoversEveryIdentity) {
  const EvalSet set = make_eval_set(*tts_, corpus_->examples, 2);
  const Checkpoints ckpt{*tts_, nullptr, nullptr};
  const SpeechEncoderEmbedder emb(*tts_);
  const ForcedAlignTranscriber asr(*tts_, fit_phoneme_centroids(*tts_, corpus_->examples));
  const MetricsResult m = evaluate_face_metrics(set, ckpt, *face_, emb, asr, {});
  EXPECT_EQ(m.row.variant, "face");
  EXPECT_EQ(m.row.n, 3);
  EXPECT_EQ(m.embeddings.size(), 3u);
  EXPECT_GE(m.row.cer, 0.0);
  EXPECT_LE(std::abs(m.row.secs), 100.0);
  EXPECT_NEAR(m.row.sed, sed_embeddings(m.embeddings), 1e-12);
  const double r = face_recall_at_1(set, *face_);
  EXPECT_GE(r, 0.0);
  EXPECT_LE(r, 1.0);
}

TEST_F(EvalSuitesTest, AblationTrainsOneEncoderPerVariantDeterministically) {
  const Matrix targets = speech_vectors(*tts_, corpus_->examples);
  FaceTrainConfig train;
  train.steps = 2;
  train.batch = 3;
  train.seed = 9;
  const AblationSetup setup{corpus_->examples, targets, *face_cfg_, train};
  const EvalSet set = make_eval_set(*tts_, corpus_->examples, 3);
  const Checkpoints ckpt{*tts_, nullptr, nullptr};
  const SpeechEncoderEmbedder emb(*tts_);
  const ForcedAlignTranscriber asr(*tts_, fit_phoneme_centroids(*tts_, corpus_->examples));
  const std::vector<MappingVariant> variants{MappingVariant::kMseCos, MappingVariant::kMseCosTriplet,
                                             MappingVariant::kMseCosContrastive};
  const AblationReport a = run_ablation(setup, variants, set, ckpt, emb, asr, {});
  ASSERT_EQ(a.rows.size(), 3u);
  ASSERT_EQ(a.encoders.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a.rows[i].variant, to_string(variants[i]));
    EXPECT_TRUE(a.rows[i].recall_at_1.has_value());
  }
  const AblationReport b = run_ablation(setup, variants, set, ckpt, emb, asr, {});
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a.rows[i].to_json(), b.rows[i].to_json());
}

}  // namespace
}  // namespace f2v
