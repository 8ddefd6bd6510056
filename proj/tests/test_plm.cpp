#include "f2v/plm.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

namespace f2v {
namespace {

PlmConfig small_plm(int n_codes = 8, int text_dim = 8) {
  PlmConfig c;
  c.n_codes = n_codes;
  c.text_dim = text_dim;
  c.dim = 16;
  c.blocks = 2;
  c.heads = 2;
  c.ffn_mult = 2;
  c.max_positions = 64;
  return c;
}

Matrix random_matrix(Rng& rng, Index r, Index c) {
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

PlmContext random_context(Rng& rng, int prompt, int target, int n_codes, int text_dim) {
  PlmContext ctx;
  for (int i = 0; i < prompt; ++i) ctx.prompt_codes.indices.push_back(static_cast<int>(rng.uniform_int(n_codes)));
  ctx.prompt_text = random_matrix(rng, prompt, text_dim);
  ctx.target_text = random_matrix(rng, target, text_dim);
  return ctx;
}

// Output weights start at zero; randomize them so logits depend on the input.
void randomize_output(ProsodyLm& lm, Rng& rng) {
  for (auto& p : lm.parameters()) {
    if (p->name == "plm.out.weight" || p->name == "plm.out.bias") {
      for (Index i = 0; i < p->value.size(); ++i) p->value.data()[i] = 0.5 * rng.normal();
    }
  }
}

TEST(PlmConfig, JsonRoundTripAndValidation) {
  const PlmConfig c = small_plm();
  EXPECT_EQ(PlmConfig::from_json(c.to_json()).to_json(), c.to_json());
  EXPECT_THROW(PlmConfig::from_json({{"layers", 3}}), InvalidInput);
  PlmConfig bad = c;
  bad.dim = 15;
  EXPECT_THROW(bad.validate(), InvalidInput);
  EXPECT_EQ(c.bos(), 8);
  EXPECT_EQ(c.eos(), 9);
  EXPECT_EQ(c.vocab_size(), 10);
}

TEST(ProsodyLm, InitialLossIsUniform) {
  const PlmConfig cfg = small_plm(128);
  const ProsodyLm lm(cfg, 1);
  Rng rng(2);
  const PlmContext ctx = random_context(rng, 5, 7, 128, 8);
  ProsodyCodes target;
  for (int i = 0; i < 7; ++i) target.indices.push_back(static_cast<int>(rng.uniform_int(128)));
  const double loss = lm.loss_value(ctx, target);
  EXPECT_NEAR(loss, std::log(130.0), 1e-9);
  EXPECT_LT(std::abs(loss - std::log(128.0)) / std::log(128.0), 0.05);
}

TEST(ProsodyLm, LogitsAreCausalInCodes) {
  ProsodyLm lm(small_plm(), 3);
  Rng rng(4);
  randomize_output(lm, rng);
  const PlmContext ctx = random_context(rng, 3, 6, 8, 8);
  const std::vector<int> inputs{8, 1, 2, 3, 4, 5};
  ad::Graph g(false);
  const Matrix base = lm.logits(g, ctx, inputs).value();
  for (std::size_t j = 1; j < inputs.size(); ++j) {
    std::vector<int> changed = inputs;
    changed[j] = (changed[j] + 3) % 8;
    const Matrix other = lm.logits(g, ctx, changed).value();
    const auto rows = static_cast<Index>(j);
    EXPECT_EQ(base.topRows(rows), other.topRows(rows)) << j;
    EXPECT_GT((base.row(rows) - other.row(rows)).norm(), 1e-9) << j;
  }
}

TEST(ProsodyLm, IncrementalScoringMatchesTeacherForcing) {
  ProsodyLm lm(small_plm(), 5);
  Rng rng(6);
  randomize_output(lm, rng);
  const PlmContext ctx = random_context(rng, 4, 5, 8, 8);
  const ProsodyCodes target{{3, 0, 7, 7, 2}};
  double total = 0.0;
  std::vector<int> inputs{lm.config().bos()};
  for (std::size_t pos = 0; pos < target.size(); ++pos) {
    ad::Graph g(false);
    const RowVector row = lm.logits(g, ctx, inputs).value().row(static_cast<Index>(pos));
    const double lse = row.maxCoeff() + std::log((row.array() - row.maxCoeff()).exp().sum());
    total += lse - row(target.indices[pos]);
    inputs.push_back(target.indices[pos]);
  }
  EXPECT_NEAR(lm.loss_value(ctx, target), total / static_cast<double>(target.size()), 1e-9);
}

TEST(ProsodyLm, RejectsInvalidInputs) {
  const ProsodyLm lm(small_plm(), 7);
  Rng rng(8);
  const PlmContext ctx = random_context(rng, 2, 3, 8, 8);
  EXPECT_THROW(lm.loss_value(ctx, ProsodyCodes{{0, 1, 8}}), InvalidInput);
  EXPECT_THROW(lm.loss_value(ctx, ProsodyCodes{{0, 1}}), InvalidInput);
  PlmContext wide = ctx;
  wide.target_text = Matrix::Zero(3, 5);
  EXPECT_THROW(lm.loss_value(wide, ProsodyCodes{{0, 1, 2}}), InvalidInput);
  ProsodyLm trainable(small_plm(), 7);
  nn::Adam adam;
  EXPECT_THROW(plm_train_step(trainable, adam, {}), InvalidInput);
  EXPECT_THROW(train_plm(trainable, {}, PlmTrainConfig{}), InvalidInput);
  EXPECT_THROW(lm.generate(ctx, SamplingConfig{0, 1.0}, 1), InvalidInput);
}

TEST(ProsodyLm, GenerationLengthRangeAndDeterminism) {
  ProsodyLm lm(small_plm(), 9);
  Rng rng(10);
  randomize_output(lm, rng);
  const PlmContext ctx = random_context(rng, 3, 9, 8, 8);
  const SamplingConfig sampling{4, 1.0};
  const ProsodyCodes a = lm.generate(ctx, sampling, 11);
  ASSERT_EQ(a.size(), 9u);
  for (int c : a.indices) {
    EXPECT_GE(c, 0);
    EXPECT_LT(c, 8);
  }
  EXPECT_EQ(a, lm.generate(ctx, sampling, 11));
  bool differs = false;
  for (std::uint64_t seed = 12; seed < 20 && !differs; ++seed) differs = lm.generate(ctx, sampling, seed) != a;
  EXPECT_TRUE(differs);
  // Greedy decoding ignores the seed.
  EXPECT_EQ(lm.generate(ctx, SamplingConfig{1, 1.0}, 1), lm.generate(ctx, SamplingConfig{1, 1.0}, 2));
}

TEST(ProsodyLm, GreedyDecodingReproducesOverfitTarget) {
  ProsodyLm lm(small_plm(), 13);
  Rng rng(14);
  PlmExample ex;
  ex.context = random_context(rng, 3, 6, 8, 8);
  ex.target = ProsodyCodes{{5, 1, 1, 6, 0, 3}};
  PlmTrainConfig train;
  train.steps = 150;
  train.batch = 1;
  train.learning_rate = 1e-2;
  const std::vector<PlmLogRecord> log = train_plm(lm, {ex}, train);
  ASSERT_EQ(log.size(), 150u);
  EXPECT_LT(log.back().loss, 0.1 * log.front().loss);
  EXPECT_EQ(lm.generate(ex.context, SamplingConfig{1, 1.0}, 0), ex.target);
}

TEST(ProsodyLm, ArchiveRoundTrip) {
  ProsodyLm lm(small_plm(), 15);
  Rng rng(16);
  randomize_output(lm, rng);
  const ProsodyLm back = ProsodyLm::from_archive(Archive::deserialize(lm.to_archive().serialize()));
  const PlmContext ctx = random_context(rng, 2, 4, 8, 8);
  EXPECT_EQ(back.config().to_json(), lm.config().to_json());
  EXPECT_EQ(back.generate(ctx, SamplingConfig{3, 0.7}, 5), lm.generate(ctx, SamplingConfig{3, 0.7}, 5));
  EXPECT_EQ(back.loss_value(ctx, ProsodyCodes{{1, 2, 3, 4}}), lm.loss_value(ctx, ProsodyCodes{{1, 2, 3, 4}}));
}

TEST(FitDurations, CoversFramesProportionally) {
  EXPECT_EQ(fit_durations(DurationVector{{1, 1}}, 4).counts, (std::vector<int>{2, 2}));
  EXPECT_EQ(fit_durations(DurationVector{{3, 1}}, 10).counts, (std::vector<int>{7, 3}));
  EXPECT_EQ(fit_durations(DurationVector{{5, 5, 5}}, 3).counts, (std::vector<int>{1, 1, 1}));
  EXPECT_THROW(fit_durations(DurationVector{{1, 1, 1}}, 2), AlignmentInfeasible);
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    DurationVector d;
    const int n = 1 + static_cast<int>(rng.uniform_int(8));
    for (int i = 0; i < n; ++i) d.counts.push_back(1 + static_cast<int>(rng.uniform_int(9)));
    const int frames = n + static_cast<int>(rng.uniform_int(60));
    const DurationVector f = fit_durations(d, frames);
    ASSERT_EQ(f.total(), frames);
    for (int c : f.counts) ASSERT_GE(c, 1);
  }
}

TEST(PlmData, PromptHasOneCodePerPhoneme) {
  const TtsModel tts(testing::tiny_tts_config(), 18);
  const SyntheticUtterance u = render_utterance(SpeakerFactors{120.0, 0.9}, 19);
  const PlmPrompt p = make_prompt(compute_mel(u.waveform), u.phonemes, tts);
  EXPECT_EQ(p.codes.size(), u.phonemes.size());
  EXPECT_EQ(p.text.rows(), static_cast<Index>(u.phonemes.size()));
  for (int c : p.codes.indices) EXPECT_LT(c, tts.config().n_codes);
  const PlmContext ctx = make_context(p, tts.encode_text(PhonemeSequence{{0, 5}}));
  EXPECT_EQ(ctx.prompt_codes, p.codes);
  EXPECT_EQ(ctx.target_text.rows(), 2);
}

TEST(PlmData, ExamplesSplitEachUtteranceOnce) {
  const TtsModel tts(testing::tiny_tts_config(), 20);
  const std::vector<PlmUtterance> utts{{PhonemeSequence{{0, 5, 1, 6}}, ProsodyCodes{{0, 1, 2, 3}}},
                                       {PhonemeSequence{{2}}, ProsodyCodes{{1}}},
                                       {PhonemeSequence{{3, 7}}, ProsodyCodes{{3, 2}}}};
  const std::vector<PlmExample> ex = make_plm_examples(tts, utts, 1);
  ASSERT_EQ(ex.size(), 2u);
  for (std::size_t k = 0; k < ex.size(); ++k) {
    const PlmUtterance& u = utts[k == 0 ? 0 : 2];
    EXPECT_GE(ex[k].context.prompt_codes.size(), 1u);
    EXPECT_GE(ex[k].target.size(), 1u);
    ProsodyCodes joined = ex[k].context.prompt_codes;
    joined.indices.insert(joined.indices.end(), ex[k].target.indices.begin(), ex[k].target.indices.end());
    EXPECT_EQ(joined, u.codes);
  }
  EXPECT_THROW(make_plm_examples(tts, {{PhonemeSequence{{0, 1}}, ProsodyCodes{{0}}}}, 1), InvalidInput);
}

TEST(PlmData, CodeRecordsRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "f2v_test_codes.jsonl";
  const std::vector<CodeRecord> records{{"spk000_u000", ProsodyCodes{{1, 2, 3}}}, {"spk001_u004", ProsodyCodes{{0}}}};
  write_code_records(path, records);
  const std::vector<CodeRecord> back = read_code_records(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].utt, "spk000_u000");
  EXPECT_EQ(back[0].codes, records[0].codes);
  EXPECT_EQ(back[1].codes, records[1].codes);
  std::filesystem::remove(path);
}

TEST(PlmData, ExtractedCodesFollowAlignment) {
  const TtsModel tts(testing::tiny_tts_config(), 21);
  const SyntheticCorpus corpus = generate_synthetic_corpus(3, 1, 2, 1);
  const std::vector<CodeRecord> records = extract_prosody_codes(tts, corpus.examples);
  ASSERT_EQ(records.size(), 2u);
  for (std::size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(records[i].utt, corpus.examples[i].utterance_id);
    EXPECT_EQ(records[i].codes.size(), corpus.examples[i].transcript.size());
  }
}

}  // namespace
}  // namespace f2v
