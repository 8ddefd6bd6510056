// Acceptance suite: prints one PASS/FAIL line per criterion and exits nonzero
// when any criterion fails.

#include "f2v/eval.hpp"
#include "f2v/pipeline.hpp"
#include "test_support.hpp"

#include <json.hpp>

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

namespace f2v {
namespace {

namespace fs = std::filesystem;
using ad::Graph;
using ad::Parameter;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), format, args...);
  return buf;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Matrix random_matrix(Rng& rng, Index r, Index c) {
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

// ---------------------------------------------------------------------------
// Shared toy-scale fixture for the retrieval, ablation and consistency checks.

struct Fixture {
  std::vector<CorpusExample> train;
  std::vector<CorpusExample> test;
  std::optional<TtsModel> tts;
  std::optional<ProsodyLm> plm;
  std::optional<PromptSpeech> prompt;
  std::optional<EvalSet> set;
  std::optional<AblationReport> ablation;
  std::optional<ConsistencySuite> consistency;
  double build_seconds = 0.0;
  double ablation_seconds = 0.0;
};

constexpr int kFixtureWidth = 64;

Fixture& fixture() {
  static Fixture f = [] {
    Fixture x;
    const auto start = Clock::now();
    x.train = generate_synthetic_corpus(7, 96, 4, 4).examples;
    x.test = generate_synthetic_corpus(8, 32, 16, 3).examples;
    TtsConfig cfg;
    cfg.text_dim = cfg.speech_dim = cfg.prosody_dim = cfg.decoder_dim = kFixtureWidth;
    TtsTrainConfig tc;
    tc.steps = 1000;
    tc.batch = 8;
    tc.seed = 1;
    x.tts.emplace(train_tts(x.train, cfg, tc).model);

    const std::vector<CodeRecord> codes = extract_prosody_codes(*x.tts, x.train);
    std::vector<PlmUtterance> utts;
    for (std::size_t i = 0; i < x.train.size(); ++i) utts.push_back({x.train[i].transcript, codes[i].codes});
    PlmConfig pc;
    pc.text_dim = kFixtureWidth;
    pc.n_codes = cfg.n_codes;
    pc.dim = kFixtureWidth;
    x.plm.emplace(pc, 3);
    PlmTrainConfig ptc;
    ptc.seed = 3;
    train_plm(*x.plm, make_plm_examples(*x.tts, utts, 3), ptc);

    x.prompt = PromptSpeech{compute_mel(x.train[0].waveform), x.train[0].transcript};
    x.set = make_eval_set(*x.tts, x.test, 5);
    x.build_seconds = seconds_since(start);
    return x;
  }();
  return f;
}

PipelineOptions fixture_options() {
  PipelineOptions po;
  po.seed = 11;
  return po;
}

const AblationReport& ablation() {
  Fixture& f = fixture();
  if (!f.ablation) {
    const auto start = Clock::now();
    const Matrix targets = speech_vectors(*f.tts, f.train);
    FaceEncoderConfig fc;
    fc.speech_dim = kFixtureWidth;
    FaceTrainConfig ft;
    ft.seed = 2;
    const Checkpoints ckpt{*f.tts, &*f.plm, &*f.prompt};
    const SpeechEncoderEmbedder emb(*f.tts);
    const ForcedAlignTranscriber asr(*f.tts, fit_phoneme_centroids(*f.tts, f.train));
    f.ablation = run_ablation(AblationSetup{f.train, targets, fc, ft},
                              {MappingVariant::kMseCos, MappingVariant::kMseCosTriplet,
                               MappingVariant::kMseCosContrastive},
                              *f.set, ckpt, emb, asr, fixture_options());
    f.ablation_seconds = seconds_since(start);
  }
  return *f.ablation;
}

// ---------------------------------------------------------------------------
// Criteria

Outcome expand_oracle() {
  Rng rng(1);
  std::size_t instances = 0;
  for (int n = 1; n <= 5; ++n) {
    const Matrix h = random_matrix(rng, n, 3);
    std::vector<int> d(static_cast<std::size_t>(n), 1);
    while (true) {
      if (expand(h, DurationVector{d}) != testing::brute_expand(h, d)) {
        return {false, fmt("mismatch at n=%d", n)};
      }
      ++instances;
      std::size_t j = 0;
      while (j < d.size() && d[j] == 4) d[j++] = 1;
      if (j == d.size()) break;
      ++d[j];
    }
  }
  return {true, fmt("%zu duration vectors, exact", instances)};
}

Outcome vq_oracle() {
  Rng rng(2);
  int ties = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Index n = 1 + static_cast<Index>(rng.uniform_int(8));
    const Index t = 1 + static_cast<Index>(rng.uniform_int(32));
    const Index dim = 1 + static_cast<Index>(rng.uniform_int(4));
    // Small integer grids make exact ties common.
    const bool grid = trial % 2 == 0;
    auto draw = [&](Index r) {
      Matrix m(r, dim);
      for (Index i = 0; i < m.size(); ++i) {
        m.data()[i] = grid ? static_cast<double>(rng.uniform_int(3)) : rng.normal();
      }
      return m;
    };
    const Matrix h = draw(n);
    Codebook c;
    c.entries = draw(t);
    c.ema_count = Vector::Ones(t);
    c.ema_sum = c.entries;
    const ProsodyCodes codes = quantize(h, c).codes;
    for (Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (h.row(i) - c.entries.row(0)).squaredNorm();
      int equal = 1;
      for (Index k = 1; k < t; ++k) {
        const double dk = (h.row(i) - c.entries.row(k)).squaredNorm();
        if (dk < best_d) {
          best_d = dk;
          best = static_cast<int>(k);
          equal = 1;
        } else if (dk == best_d) {
          ++equal;
        }
      }
      ties += equal > 1;
      if (codes.indices[static_cast<std::size_t>(i)] != best) return {false, fmt("trial %d row %ld", trial, i)};
    }
  }
  return {true, fmt("1000 instances, %d tied rows, integer-exact", ties)};
}

Outcome pooling_oracle() {
  Rng rng(3);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_int(8));
    DurationVector d;
    for (int i = 0; i < n; ++i) d.counts.push_back(1 + static_cast<int>(rng.uniform_int(6)));
    const Matrix frames = random_matrix(rng, d.total(), 4);
    const Matrix pooled = pool_by_phoneme(frames, d);
    Index start = 0;
    for (int i = 0; i < n; ++i) {
      RowVector mean = RowVector::Zero(4);
      for (int k = 0; k < d.counts[static_cast<std::size_t>(i)]; ++k) mean += frames.row(start + k);
      mean /= d.counts[static_cast<std::size_t>(i)];
      start += d.counts[static_cast<std::size_t>(i)];
      worst = std::max(worst, (pooled.row(i) - mean).norm() / std::max(mean.norm(), 1e-300));
    }
  }
  return {worst < 1e-12, fmt("1000 instances, max relative error %.2e", worst)};
}

Outcome map_loss_oracle() {
  Rng rng(4);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index m = 1 + static_cast<Index>(rng.uniform_int(16));
    const Matrix v = random_matrix(rng, m, 6);
    const Matrix s = random_matrix(rng, m, 6);
    std::vector<int> ids(static_cast<std::size_t>(m));
    for (int& id : ids) id = static_cast<int>(rng.uniform_int(6));
    MappingLossConfig cfg;
    cfg.temperature = rng.uniform(0.05, 1.0);
    double expected = 0.0;
    for (Index i = 0; i < m; ++i) {
      std::vector<Index> negatives;
      for (Index j = 0; j < m; ++j) {
        if (ids[static_cast<std::size_t>(j)] != ids[static_cast<std::size_t>(i)]) negatives.push_back(j);
      }
      expected += testing::brute_contrastive_row(v, s, i, negatives, cfg.temperature);
    }
    expected /= static_cast<double>(m);
    Graph g(false);
    const double got = map_loss(g.constant(v), g.constant(s), ids, cfg).contrastive.scalar();
    worst = std::max(worst, std::abs(got - expected));
  }
  Graph g(false);
  const double mse = ad::mse_loss(g.constant(Matrix{{0.0, 0.0}}), g.constant(Matrix{{3.0, 4.0}})).scalar();
  MappingLossConfig plain;
  plain.variant = MappingVariant::kMseCos;
  const MappingLossTerms t = map_loss(g.constant(Matrix{{1.0, 0.0}}), g.constant(Matrix{{0.0, 2.0}}), {}, plain);
  const bool hand = mse == 12.5 && t.mse.scalar() == 2.5 && std::abs(t.cosine.scalar() - 1.0) < 1e-15;
  return {worst < 1e-9 && hand,
          fmt("100 batches, max |diff| %.2e; MSE([0,0],[3,4]) = %g; cosine term of orthogonal pair = %g", worst, mse,
              t.cosine.scalar())};
}

Outcome gradient_checks() {
  constexpr double kTolerance = 1e-4;
  double worst = 0.0;
  std::vector<std::string> failed;
  auto record = [&](const std::string& name, const testing::GradCheck& r) {
    worst = std::max(worst, r.relative_error);
    if (!(r.relative_error < kTolerance) || r.analytic_norm == 0.0) failed.push_back(name);
  };

  Rng rng(5);
  for (MappingVariant variant :
       {MappingVariant::kMseCos, MappingVariant::kMseCosTriplet, MappingVariant::kMseCosContrastive}) {
    Parameter v("v", random_matrix(rng, 6, 5));
    Parameter s("s", random_matrix(rng, 6, 5));
    const std::vector<int> ids{0, 1, 2, 0, 3, 4};
    MappingLossConfig cfg;
    cfg.variant = variant;
    cfg.temperature = 0.5;
    record("map_loss/" + to_string(variant),
           testing::check_gradients({&v, &s}, [&](Graph& g) { return map_loss(g.param(v), g.param(s), ids, cfg).total; }));
  }

  {
    Parameter h("h", random_matrix(rng, 5, 3));
    Parameter entries("entries", random_matrix(rng, 4, 3));
    record("vq/codebook", testing::check_gradients({&entries}, [&](Graph& g) {
             return quantize(g.constant(h.value), g.param(entries), 0.25).codebook_loss;
           }));
    record("vq/commitment", testing::check_gradients({&h}, [&](Graph& g) {
             return quantize(g.param(h), g.constant(entries.value), 0.25).commitment_loss;
           }));
    // Pass-through: d(sum(w * quantized)) / dh must equal w.
    const Matrix w = random_matrix(rng, 5, 3);
    h.zero_grad();
    Graph g;
    g.backward(ad::sum(ad::mul(quantize(g.param(h), g.param(entries), 0.25).quantized, g.constant(w))));
    const double pass_error = (h.grad - w).norm() / w.norm();
    worst = std::max(worst, pass_error);
    if (!(pass_error < kTolerance)) failed.push_back("vq/pass-through");
  }

  TtsModel model(testing::tiny_tts_config(), 5);
  TtsExample ex{PhonemeSequence{{1, 4, 7, 2}}, Matrix()};
  const DurationVector d{{3, 2, 4, 3}};
  ex.mel = random_matrix(rng, d.total(), model.config().n_mels);
  std::vector<Parameter*> dur_params = testing::all_parameters(model.parameters(), "dur.");
  for (Parameter* p : testing::all_parameters(model.parameters(), "speech.")) dur_params.push_back(p);
  record("tts/duration",
         testing::check_gradients(dur_params, [&](Graph& g) { return tts_loss(g, model, ex, &d).duration; }));
  std::vector<Parameter*> mel_params;
  for (auto& p : model.parameters()) {
    if (!p->name.starts_with("prosody.")) mel_params.push_back(p.get());
  }
  record("tts/mel", testing::check_gradients(mel_params, [&](Graph& g) { return tts_loss(g, model, ex, &d).mel; }));

  std::string detail = fmt("%zu parameters in the TTS model, max relative error %.2e",
                           model.parameters().scalar_count(), worst);
  for (const auto& name : failed) detail += "; failed " + name;
  return {failed.empty() && model.parameters().scalar_count() <= 10000, detail};
}

Outcome alignment_oracle() {
  Rng rng(6);
  int instances = 0;
  for (int n = 1; n <= 4; ++n) {
    for (int m = n; m <= 8; ++m) {
      for (int trial = 0; trial < 25; ++trial) {
        const Matrix sim = random_matrix(rng, n, m);
        double best = -std::numeric_limits<double>::infinity();
        testing::for_each_segmentation(
            n, m, [&](const std::vector<int>& seg) { best = std::max(best, testing::segmentation_score(sim, seg)); });
        const DurationVector got = monotonic_align(sim);
        if (got.total() != m || std::abs(testing::segmentation_score(sim, got.counts) - best) > 1e-9) {
          return {false, fmt("n=%d m=%d trial %d", n, m, trial)};
        }
        ++instances;
      }
    }
  }
  return {true, fmt("%d instances over all n <= 4, m <= 8", instances)};
}

// Textbook full-table edit distance, independent of the library's row DP.
std::size_t table_edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::vector<std::size_t>> t(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) t[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) t[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      t[i][j] = std::min({t[i - 1][j] + 1, t[i][j - 1] + 1, t[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0u : 1u)});
    }
  }
  return t[a.size()][b.size()];
}

Outcome cer_oracle() {
  const std::vector<std::string> strings = testing::all_strings("abc", 6);
  std::size_t pairs = 0;
  for (const std::string& a : strings) {
    for (const std::string& b : strings) {
      if (edit_distance(a, b) != table_edit_distance(a, b)) return {false, "mismatch on " + a + " / " + b};
      if (!a.empty() && cer(a, b) != 100.0 * static_cast<double>(table_edit_distance(a, b)) / a.size()) {
        return {false, "cer mismatch on " + a + " / " + b};
      }
      ++pairs;
    }
  }
  const double h0 = cer("hello", "hello");
  const double h20 = cer("hello", "hallo");
  const double h100 = cer("abc", "");
  return {h0 == 0.0 && h20 == 20.0 && h100 == 100.0,
          fmt("%zu string pairs; hand examples %.1f / %.1f / %.1f", pairs, h0, h20, h100)};
}

Outcome tts_overfit() {
  auto start = Clock::now();
  const SyntheticCorpus one = generate_synthetic_corpus(21, 1, 1, 1);
  TtsTrainConfig tc;
  tc.steps = 500;
  tc.batch = 1;
  tc.seed = 3;
  const TtsTrainResult r = train_tts(one.examples, TtsConfig{}, tc);
  const double ratio = r.log.back().loss_mel / r.log.front().loss_mel;
  const double overfit_seconds = seconds_since(start);

  start = Clock::now();
  const SyntheticCorpus corpus = generate_synthetic_corpus(22, 4, 20, 3);
  bool finite = true;
  TtsTrainConfig full;
  full.seed = 4;
  train_tts(corpus.examples, TtsConfig{}, full, [&](const TtsLogRecord& rec) {
    finite = finite && std::isfinite(rec.loss_mel) && std::isfinite(rec.loss_dur) && std::isfinite(rec.loss_vq) &&
             std::isfinite(rec.loss_align);
  });
  const double corpus_seconds = seconds_since(start);
  return {ratio < 0.25 && finite && corpus_seconds < 600.0,
          fmt("1 utterance: mel L1 %.1f%% of initial after 500 steps (%.0f s); 4x20 corpus, %d steps: %s losses, "
              "%.0f s",
              100.0 * ratio, overfit_seconds, full.steps, finite ? "finite" : "non-finite", corpus_seconds)};
}

Outcome plm_sanity() {
  Fixture& f = fixture();
  const TtsModel& tts = *f.tts;
  PlmConfig pc;
  pc.text_dim = tts.config().text_dim;
  pc.n_codes = tts.config().n_codes;
  const int t = pc.n_codes;

  // Ten utterances with their codes, one prompt/target split each.
  std::vector<CorpusExample> ten(f.train.begin(), f.train.begin() + 10);
  const std::vector<CodeRecord> codes = extract_prosody_codes(tts, ten);
  std::vector<PlmUtterance> utts;
  for (std::size_t i = 0; i < ten.size(); ++i) utts.push_back({ten[i].transcript, codes[i].codes});
  const std::vector<PlmExample> examples = make_plm_examples(tts, utts, 4);
  auto mean_loss = [&](const ProsodyLm& lm) {
    double total = 0.0;
    for (const PlmExample& ex : examples) total += lm.loss_value(ex.context, ex.target);
    return total / static_cast<double>(examples.size());
  };
  ProsodyLm lm(pc, 4);
  const double initial = mean_loss(lm);
  const double initial_gap = std::abs(initial - std::log(t)) / std::log(t);
  PlmTrainConfig ptc;
  ptc.seed = 4;
  ptc.steps = 200;
  train_plm(lm, examples, ptc);
  const double trained = mean_loss(lm);

  ProsodyLm single(pc, 5);
  PlmTrainConfig overfit;
  overfit.seed = 5;
  overfit.steps = 200;
  overfit.batch = 1;
  overfit.learning_rate = 3e-3;
  train_plm(single, {examples.front()}, overfit);
  const bool reproduced =
      single.generate(examples.front().context, SamplingConfig{1, 1.0}, 0) == examples.front().target;

  Rng rng(6);
  bool lengths = true;
  for (int trial = 0; trial < 50; ++trial) {
    const PhonemeSequence x = render_utterance(SpeakerFactors{150.0, 1.0}, 100 + trial).phonemes;
    const PlmPrompt prompt = make_prompt(compute_mel(f.train[static_cast<std::size_t>(trial)].waveform),
                                         f.train[static_cast<std::size_t>(trial)].transcript, tts);
    const ProsodyCodes out = lm.generate(make_context(prompt, tts.encode_text(x)), SamplingConfig{}, rng.next_u64());
    lengths = lengths && out.size() == x.size();
  }
  return {initial_gap < 0.05 && trained < 0.5 * initial && reproduced && lengths,
          fmt("initial %.3f vs ln T %.3f (%.1f%%); after 200 steps %.3f (%.0f%%); greedy overfit %s; lengths %s",
              initial, std::log(t), 100.0 * initial_gap, trained, 100.0 * trained / initial,
              reproduced ? "exact" : "differs", lengths ? "match" : "differ")};
}

Outcome retrieval() {
  const AblationReport& r = ablation();
  const Fixture& f = fixture();
  const double recall = *r.rows.back().recall_at_1;
  return {recall >= 0.9 && f.set->identities.size() == 32,
          fmt("recall@1 %.3f over %zu held-out identities (96 train identities; fixture %.0f s, training %.0f s)",
              recall, f.set->identities.size(), f.build_seconds, f.ablation_seconds)};
}

Outcome ablation_direction() {
  const AblationReport& r = ablation();
  const EvalRow& mse = r.rows[0];
  const EvalRow& triplet = r.rows[1];
  const EvalRow& contrastive = r.rows[2];
  const bool sed_ok = contrastive.sed <= mse.sed;
  const bool recall_ok =
      *contrastive.recall_at_1 >= *mse.recall_at_1 && *contrastive.recall_at_1 >= *triplet.recall_at_1;
  return {sed_ok && recall_ok,
          fmt("SED %.2f / %.2f / %.2f; recall@1 %.3f / %.3f / %.3f (mse_cos / triplet / contrastive)", mse.sed,
              triplet.sed, contrastive.sed, *mse.recall_at_1, *triplet.recall_at_1, *contrastive.recall_at_1)};
}

Outcome consistency() {
  Fixture& f = fixture();
  const AblationReport& r = ablation();
  const Checkpoints ckpt{*f.tts, &*f.plm, &*f.prompt};
  const SpeechEncoderEmbedder emb(*f.tts);
  f.consistency = run_consistency(*f.set, ckpt, r.encoders.back(), emb, fixture_options());
  double lowest = 100.0;
  for (const ConsistencyResult& c : f.consistency->results) lowest = std::min(lowest, c.off_diagonal_mean);
  return {f.consistency->fraction_consistent >= 0.8,
          fmt("%.0f%% of %zu identities above the cross-identity mean %.2f (lowest within-identity mean %.2f)",
              100.0 * f.consistency->fraction_consistent, f.consistency->results.size(),
              f.consistency->cross_identity_mean, lowest)};
}

// --- determinism through the command-line tool ---

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return files;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(F2V_CLI_PATH) + " " + args + " >>" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "f2v_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path log = root / "cli.log";
  const nlohmann::json tiny = {
      {"tts", {{"text_dim", 16}, {"speech_dim", 16}, {"prosody_dim", 16}, {"decoder_dim", 16}, {"n_codes", 8}}},
      {"tts_train", {{"steps", 20}, {"batch", 4}}},
      {"plm", {{"dim", 16}}},
      {"plm_train", {{"steps", 20}, {"batch", 4}}},
      {"face", {{"channels", {4, 4, 8, 16}}}},
      {"face_train", {{"steps", 10}, {"batch", 8}}},
      {"phase_iterations", 16}};
  std::ofstream(root / "config.json") << tiny.dump(2);
  const fs::path work = root / "work";
  const std::string common = "--config " + (root / "config.json").string() + " --corpus " +
                             (work / "train/manifest.jsonl").string() + " --eval-corpus " +
                             (work / "eval/manifest.jsonl").string() + " --ckpt-dir " + (work / "ckpt").string();
  const std::vector<std::string> commands{
      "gen-corpus --speakers 4 --utts 6 --frames 3 --seed 1 --out-dir " + (work / "train").string(),
      "gen-corpus --speakers 3 --utts 3 --frames 3 --seed 2 --out-dir " + (work / "eval").string(),
      "train tts --seed 7 " + common,
      "train plm --seed 7 " + common,
      "train face --seed 7 " + common,
      "synthesize --seed 7 " + common + " --face " + (work / "eval/faces/spk001_f0.png").string() +
          " --text \"my voice is new\" --prompt spk000_u001 --out " + (work / "out/voice.wav").string(),
      "evaluate --seed 7 --suite metrics --out-dir " + (work / "report").string() + " " + common,
      "evaluate --seed 7 --suite consistency --out-dir " + (work / "report").string() + " " + common};

  std::map<std::string, std::string> first;
  for (int pass = 0; pass < 2; ++pass) {
    fs::remove_all(work);
    for (const std::string& c : commands) {
      if (run_cli(c, log) != 0) return {false, "command failed: " + c.substr(0, c.find(' ', 12))};
    }
    if (pass == 0) {
      first = snapshot(work);
    } else {
      const auto second = snapshot(work);
      if (second.size() != first.size()) return {false, "file sets differ between runs"};
      for (const auto& [name, bytes] : first) {
        const auto it = second.find(name);
        if (it == second.end() || it->second != bytes) return {false, "differs on rerun: " + name};
      }
    }
  }
  // Stage checkpoints sit at the top of the checkpoint directory; the speech-vector cache is below it.
  std::size_t checkpoints = 0;
  std::size_t cached = 0;
  for (const auto& [name, bytes] : first) {
    if (!name.ends_with(".f2v")) continue;
    (fs::path(name).parent_path() == "ckpt" ? checkpoints : cached) += 1;
  }
  fs::remove_all(root);
  return {checkpoints == 3, fmt("%zu files byte-identical across reruns (checkpoints: %zu, speech-vector cache: %zu, "
                                "corpus, logs, WAV, reports)",
                                first.size(), checkpoints, cached)};
}

}  // namespace
}  // namespace f2v

int main() {
  using namespace f2v;
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "expand oracle", expand_oracle},
      {2, "quantizer oracle", vq_oracle},
      {3, "pooling oracle", pooling_oracle},
      {4, "mapping-loss value oracle", map_loss_oracle},
      {5, "gradient checks", gradient_checks},
      {6, "alignment oracle", alignment_oracle},
      {7, "CER oracle", cer_oracle},
      {8, "toy TTS overfit", tts_overfit},
      {9, "prosody LM sanity", plm_sanity},
      {10, "face-to-voice retrieval", retrieval},
      {11, "loss ablation direction", ablation_direction},
      {12, "cross-frame consistency", consistency},
      {13, "determinism audit", determinism},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << c.id << "] " << c.name << ": " << o.detail
              << fmt(" (%.1f s)", seconds_since(start)) << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria pass" : fmt("%d criteria failed", failures)) << std::endl;
  return failures == 0 ? 0 : 1;
}
