// face2voice command-line entry point.
//
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include "f2v/eval.hpp"
#include "f2v/run_config.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace f2v;

namespace {

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;
constexpr std::uint64_t kPhaseStream = 3;

class MissingPrerequisite : public Error {
 public:
  using Error::Error;
};

// Flags shared by every config-driven command.
struct CommonFlags {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> corpus;
  std::optional<std::string> eval_corpus;
  std::optional<std::string> checkpoint_dir;
  std::optional<int> steps;
  std::optional<int> batch;
  std::optional<double> learning_rate;

  void attach(CLI::App* cmd, bool training_flags) {
    cmd->add_option("--config", config_path, "JSON config file (defaults < file < flags)");
    cmd->add_option("--set", sets, "Override any config key, e.g. --set tts.text_dim=64")->take_all();
    cmd->add_option("--seed", seed, "Random seed");
    cmd->add_option("--out-dir", out_dir, "Output directory");
    cmd->add_option("--corpus", corpus, "Training manifest (JSON lines)");
    cmd->add_option("--eval-corpus", eval_corpus, "Held-out manifest (JSON lines)");
    cmd->add_option("--ckpt-dir", checkpoint_dir, "Checkpoint directory");
    if (training_flags) {
      cmd->add_option("--steps", steps, "Training steps of the selected stage");
      cmd->add_option("--batch", batch, "Batch size of the selected stage");
      cmd->add_option("--learning-rate", learning_rate, "Learning rate of the selected stage");
    }
  }

  RunConfig resolve(const std::string& train_section = "") const {
    std::optional<json> file;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw InvalidInput("cannot open config file " + config_path);
      file = json::parse(in, nullptr, false);
      if (file->is_discarded()) throw InvalidInput("config file " + config_path + " is not valid JSON");
    }
    std::vector<std::pair<std::string, json>> overrides;
    if (seed) overrides.emplace_back("seed", *seed);
    if (out_dir) overrides.emplace_back("out_dir", *out_dir);
    if (corpus) overrides.emplace_back("corpus", *corpus);
    if (eval_corpus) overrides.emplace_back("eval_corpus", *eval_corpus);
    if (checkpoint_dir) overrides.emplace_back("checkpoint_dir", *checkpoint_dir);
    if (!train_section.empty()) {
      if (steps) overrides.emplace_back(train_section + ".steps", *steps);
      if (batch) overrides.emplace_back(train_section + ".batch", *batch);
      if (learning_rate) overrides.emplace_back(train_section + ".learning_rate", *learning_rate);
    }
    for (const std::string& s : sets) overrides.push_back(parse_override(s));
    return resolve_run_config(file, overrides);
  }
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) ensure_dir(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

void write_resolved(const RunConfig& cfg, const fs::path& dir) {
  write_text(dir / "run_config.resolved.json", cfg.to_json().dump(2) + "\n");
}

fs::path require_file(const fs::path& path, const std::string& hint) {
  if (!fs::exists(path)) throw MissingPrerequisite("missing prerequisite " + path.string() + " (" + hint + ")");
  return path;
}

std::vector<CorpusExample> load_corpus(const std::string& manifest, const char* what) {
  if (manifest.empty()) throw InvalidInput(std::string("no ") + what + " given (--corpus / --eval-corpus)");
  return load_manifest(manifest);
}

fs::path tts_path(const RunConfig& c) { return fs::path(c.checkpoint_dir) / "tts.f2v"; }
fs::path plm_path(const RunConfig& c) { return fs::path(c.checkpoint_dir) / "plm.f2v"; }
fs::path face_path(const RunConfig& c) { return fs::path(c.checkpoint_dir) / "face.f2v"; }

TtsModel load_tts(const RunConfig& c) { return TtsModel::load(require_file(tts_path(c), "run `train tts` first")); }

std::optional<ProsodyLm> load_plm(const RunConfig& c, const TtsModel& tts) {
  if (!tts.config().use_prosody) return std::nullopt;
  return ProsodyLm::load(require_file(plm_path(c), "run `train plm` first"));
}

FaceEncoder load_face(const RunConfig& c) {
  return FaceEncoder::load(require_file(face_path(c), "run `train face` first"));
}

fs::path cache_dir(const RunConfig& c) {
  if (const char* env = std::getenv("FACE2VOICE_CACHE"); env && *env) return env;
  return fs::path(c.checkpoint_dir) / "cache";
}

// Streams JSON-lines records to a file.
class JsonLog {
 public:
  explicit JsonLog(const fs::path& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot write " + path.string());
  }
  void write(const json& record) { out_ << record.dump() << '\n'; }
  void close() {
    out_.close();
    if (!out_) throw IoError("cannot write " + path_.string());
  }

 private:
  fs::path path_;
  std::ofstream out_;
};

// ---------------------------------------------------------------------------
// Commands

struct GenCorpusArgs {
  int speakers = 4;
  int utts = 20;
  int frames = 3;
  std::uint64_t seed = 0;
  std::string out_dir = "corpus";
};

int cmd_gen_corpus(const GenCorpusArgs& a) {
  if (a.speakers < 1 || a.utts < 1 || a.frames < 1) throw InvalidInput("--speakers, --utts and --frames must be >= 1");
  const SyntheticCorpus corpus = generate_synthetic_corpus(a.seed, a.speakers, a.utts, a.frames);
  const CorpusFiles files = write_corpus(corpus, a.out_dir);
  std::cout << json{{"manifest", files.manifest.string()},
                    {"records", corpus.examples.size()},
                    {"speakers", corpus.speakers.size()},
                    {"wav", files.wav_count},
                    {"png", files.png_count}}
                   .dump()
            << '\n';
  return 0;
}

int cmd_train_tts(const RunConfig& cfg) {
  TtsTrainConfig train = cfg.tts_train;
  train.seed = cfg.require_seed();
  const auto corpus = load_corpus(cfg.corpus, "training corpus");
  ensure_dir(cfg.checkpoint_dir);
  write_resolved(cfg, cfg.checkpoint_dir);
  JsonLog log(fs::path(cfg.checkpoint_dir) / "tts_log.jsonl");
  TtsTrainResult r = train_tts(corpus, cfg.tts, train, [&](const TtsLogRecord& rec) { log.write(rec.to_json()); });
  log.close();
  r.model.save(tts_path(cfg));
  std::cout << json{{"checkpoint", tts_path(cfg).string()}, {"final", r.log.back().to_json()}}.dump() << '\n';
  return 0;
}

int cmd_train_plm(const RunConfig& cfg) {
  PlmTrainConfig train = cfg.plm_train;
  train.seed = cfg.require_seed();
  const TtsModel tts = load_tts(cfg);
  if (!tts.config().use_prosody) throw InvalidInput("the TTS checkpoint is prosody-free; there is nothing to model");
  const auto corpus = load_corpus(cfg.corpus, "training corpus");
  write_resolved(cfg, cfg.checkpoint_dir);
  const std::vector<CodeRecord> codes = extract_prosody_codes(tts, corpus);
  write_code_records(fs::path(cfg.checkpoint_dir) / "prosody_codes.jsonl", codes);
  std::vector<PlmUtterance> utts;
  for (std::size_t i = 0; i < corpus.size(); ++i) utts.push_back({corpus[i].transcript, codes[i].codes});
  const std::vector<PlmExample> examples = make_plm_examples(tts, utts, train.seed);
  PlmConfig model_cfg = cfg.plm;
  model_cfg.text_dim = tts.config().text_dim;
  model_cfg.n_codes = tts.config().n_codes;
  ProsodyLm lm(model_cfg, train.seed);
  JsonLog log(fs::path(cfg.checkpoint_dir) / "plm_log.jsonl");
  const auto records = train_plm(lm, examples, train, [&](const PlmLogRecord& rec) { log.write(rec.to_json()); });
  log.close();
  lm.save(plm_path(cfg));
  std::cout << json{{"checkpoint", plm_path(cfg).string()}, {"final", records.back().to_json()}}.dump() << '\n';
  return 0;
}

int cmd_train_face(const RunConfig& cfg) {
  FaceTrainConfig train = cfg.face_train;
  train.seed = cfg.require_seed();
  const TtsModel tts = load_tts(cfg);
  const auto corpus = load_corpus(cfg.corpus, "training corpus");
  write_resolved(cfg, cfg.checkpoint_dir);
  const Matrix targets = speech_vectors(tts, corpus, cache_dir(cfg));
  FaceEncoderConfig model_cfg = cfg.face;
  model_cfg.speech_dim = tts.config().speech_dim;
  JsonLog log(fs::path(cfg.checkpoint_dir) / "face_log.jsonl");
  FaceTrainResult r =
      train_face_encoder(corpus, targets, model_cfg, train, [&](const FaceLogRecord& rec) { log.write(rec.to_json()); });
  log.close();
  r.encoder.save(face_path(cfg));
  std::cout << json{{"checkpoint", face_path(cfg).string()}, {"final", r.log.back().to_json()}}.dump() << '\n';
  return 0;
}

// Prompt utterance by id, or the first training utterance.
PromptSpeech pick_prompt(const std::vector<CorpusExample>& corpus, const std::string& id) {
  if (corpus.empty()) throw InvalidInput("the training corpus is empty");
  if (id.empty()) {
    std::cerr << "notice: no --prompt given; using the first training utterance " << corpus.front().utterance_id
              << '\n';
    return {compute_mel(corpus.front().waveform), corpus.front().transcript};
  }
  for (const CorpusExample& ex : corpus) {
    if (ex.utterance_id == id) return {compute_mel(ex.waveform), ex.transcript};
  }
  throw InvalidInput("prompt utterance " + id + " is not in the corpus");
}

struct SynthesizeArgs {
  std::string face;
  std::string text;
  std::string prompt;
  std::string out;
};

int cmd_synthesize(const RunConfig& cfg, const SynthesizeArgs& a) {
  const std::uint64_t seed = cfg.seed.value_or(0);
  const TtsModel tts = load_tts(cfg);
  const std::optional<ProsodyLm> plm = load_plm(cfg, tts);
  const FaceEncoder encoder = load_face(cfg);
  const FaceImage face = read_png(require_file(a.face, "face image"));
  const PhonemeSequence x = grapheme_to_phoneme(a.text);
  std::optional<PromptSpeech> prompt;
  if (tts.config().use_prosody) prompt = pick_prompt(load_corpus(cfg.corpus, "training corpus"), a.prompt);
  PipelineOptions opts{cfg.sampling, seed};
  const SynthesisResult r =
      synthesize_from_face(face, x, tts, plm ? &*plm : nullptr, encoder, prompt ? &*prompt : nullptr, opts);
  const Waveform w =
      griffin_lim(r.mel, AudioConfig{}, cfg.phase_iterations, Rng::substream(seed, kPhaseStream).next_u64());
  const fs::path out(a.out);
  if (out.has_parent_path()) ensure_dir(out.parent_path());
  write_wav(out, w);
  write_resolved(cfg, out.has_parent_path() ? out.parent_path() : fs::path("."));
  std::cout << json{{"out", out.string()},
                    {"phonemes", render_phonemes(x)},
                    {"durations", r.durations.counts},
                    {"frames", r.mel.frame_count()},
                    {"seconds", static_cast<double>(w.samples.size()) / w.sample_rate}}
                   .dump()
            << '\n';
  return 0;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& suite) {
  const std::uint64_t seed = suite == "ablation" ? cfg.require_seed() : cfg.seed.value_or(0);
  const TtsModel tts = load_tts(cfg);
  const std::optional<ProsodyLm> plm = load_plm(cfg, tts);
  const auto train_corpus = load_corpus(cfg.corpus, "training corpus");
  const auto eval_corpus = load_corpus(cfg.eval_corpus, "held-out corpus");
  std::optional<PromptSpeech> prompt;
  if (tts.config().use_prosody) prompt = pick_prompt(train_corpus, "");
  const Checkpoints ckpt{tts, plm ? &*plm : nullptr, prompt ? &*prompt : nullptr};
  const EvalSet set = make_eval_set(tts, eval_corpus, seed);
  const SpeechEncoderEmbedder emb(tts);
  const PipelineOptions opts{cfg.sampling, seed};
  ensure_dir(cfg.out_dir);
  write_resolved(cfg, cfg.out_dir);

  json report;
  std::string table;
  if (suite == "metrics") {
    const FaceEncoder face = load_face(cfg);
    const ForcedAlignTranscriber asr(tts, fit_phoneme_centroids(tts, train_corpus));
    EvalRow row = evaluate_face_metrics(set, ckpt, face, emb, asr, opts).row;
    row.recall_at_1 = face_recall_at_1(set, face);
    report = json::array({row.to_json()});
    table = render_table({row});
  } else if (suite == "consistency") {
    const FaceEncoder face = load_face(cfg);
    const ConsistencySuite cs = run_consistency(set, ckpt, face, emb, opts);
    report = cs.to_json();
    std::ostringstream os;
    os << "cross-identity SECS mean: " << cs.cross_identity_mean << '\n'
       << "identities above baseline: " << cs.fraction_consistent * 100.0 << "%\n";
    for (std::size_t i = 0; i < cs.results.size(); ++i) {
      os << '\n' << cs.speakers[i] << " (off-diagonal mean " << cs.results[i].off_diagonal_mean << ")\n";
      const Matrix& m = cs.results[i].secs;
      for (Index r = 0; r < m.rows(); ++r) {
        for (Index c = 0; c < m.cols(); ++c) os << (c ? "  " : "") << std::fixed << std::setprecision(2) << m(r, c);
        os << '\n';
      }
    }
    table = os.str();
  } else {
    const ForcedAlignTranscriber asr(tts, fit_phoneme_centroids(tts, train_corpus));
    const Matrix targets = speech_vectors(tts, train_corpus, cache_dir(cfg));
    FaceEncoderConfig model_cfg = cfg.face;
    model_cfg.speech_dim = tts.config().speech_dim;
    FaceTrainConfig train = cfg.face_train;
    train.seed = seed;
    const AblationReport ab =
        run_ablation(AblationSetup{train_corpus, targets, model_cfg, train}, cfg.ablation_variants, set, ckpt, emb,
                     asr, opts);
    report = json::array();
    for (const EvalRow& row : ab.rows) report.push_back(row.to_json());
    table = render_table(ab.rows);
  }
  const fs::path base = fs::path(cfg.out_dir) / ("report_" + suite);
  write_text(base.string() + ".json", report.dump(2) + "\n");
  write_text(base.string() + ".txt", table);
  std::cout << table;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"face2voice: face-conditioned zero-shot text-to-speech"};
  app.require_subcommand(1);

  GenCorpusArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen-corpus", "Write a synthetic audiovisual corpus");
  gen_cmd->add_option("--speakers", gen.speakers, "Number of identities")->capture_default_str();
  gen_cmd->add_option("--utts", gen.utts, "Utterances per identity")->capture_default_str();
  gen_cmd->add_option("--frames", gen.frames, "Face frames per identity")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
  gen_cmd->add_option("--out-dir", gen.out_dir, "Output directory")->capture_default_str();

  CommonFlags train_flags;
  std::string stage;
  CLI::App* train_cmd = app.add_subcommand("train", "Train one stage: tts, plm or face");
  train_cmd->add_option("stage", stage, "Stage to train")->required()->check(CLI::IsMember({"tts", "plm", "face"}));
  train_flags.attach(train_cmd, true);

  CommonFlags synth_flags;
  SynthesizeArgs synth;
  CLI::App* synth_cmd = app.add_subcommand("synthesize", "Speak text in a voice inferred from a face image");
  synth_cmd->add_option("--face", synth.face, "Face image (PNG)")->required();
  synth_cmd->add_option("--text", synth.text, "Text to speak (words from the bundled lexicon)")->required();
  synth_cmd->add_option("--prompt", synth.prompt, "Prompt utterance id from the training corpus");
  synth_cmd->add_option("--out", synth.out, "Output WAV path")->required();
  synth_flags.attach(synth_cmd, false);

  CommonFlags eval_flags;
  std::string suite;
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "Objective metrics, consistency test or loss ablation");
  eval_cmd->add_option("--suite", suite, "metrics, consistency or ablation")
      ->required()
      ->check(CLI::IsMember({"metrics", "consistency", "ablation"}));
  eval_flags.attach(eval_cmd, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen_corpus(gen);
    if (train_cmd->parsed()) {
      const RunConfig cfg = train_flags.resolve(stage + "_train");
      if (stage == "tts") return cmd_train_tts(cfg);
      if (stage == "plm") return cmd_train_plm(cfg);
      return cmd_train_face(cfg);
    }
    if (synth_cmd->parsed()) return cmd_synthesize(synth_flags.resolve(), synth);
    return cmd_evaluate(eval_flags.resolve(), suite);
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
}
