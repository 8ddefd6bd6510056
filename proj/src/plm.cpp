#include "f2v/plm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace f2v {

// ---------------------------------------------------------------------------
// Code files

void write_code_records(const std::filesystem::path& path, const std::vector<CodeRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += nlohmann::json{{"utt", r.utt}, {"codes", r.codes.indices}}.dump();
    out += '\n';
  }
  write_file(path, out);
}

std::vector<CodeRecord> read_code_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open code file: " + path.string());
  std::vector<CodeRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      CodeRecord r;
      r.utt = j.at("utt").get<std::string>();
      r.codes.indices = j.at("codes").get<std::vector<int>>();
      records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw InvalidInput(path.string() + ":" + std::to_string(line_no) + ": malformed code record: " + e.what());
    }
  }
  return records;
}

std::vector<CodeRecord> extract_prosody_codes(const TtsModel& tts, const std::vector<CorpusExample>& corpus) {
  if (!tts.config().use_prosody) throw InvalidInput("checkpoint has no prosody codec");
  std::vector<CodeRecord> out;
  out.reserve(corpus.size());
  for (const auto& ex : corpus) {
    const MelSpectrogram mel = compute_mel(ex.waveform);
    const DurationVector d = tts.align(ex.transcript, mel);
    const Matrix h = tts.encode_prosody(lowpass_mel(mel, tts.config().n_low), d);
    out.push_back(CodeRecord{ex.utterance_id, tts.quantize_prosody(h).codes});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Config and context

nlohmann::json PlmConfig::to_json() const {
  return {{"n_codes", n_codes}, {"text_dim", text_dim}, {"dim", dim},     {"blocks", blocks},
          {"heads", heads},     {"ffn_mult", ffn_mult}, {"max_positions", max_positions}};
}

PlmConfig PlmConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidInput("PLM config must be a JSON object");
  PlmConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "n_codes") c.n_codes = v.get<int>();
    else if (key == "text_dim") c.text_dim = v.get<int>();
    else if (key == "dim") c.dim = v.get<int>();
    else if (key == "blocks") c.blocks = v.get<int>();
    else if (key == "heads") c.heads = v.get<int>();
    else if (key == "ffn_mult") c.ffn_mult = v.get<int>();
    else if (key == "max_positions") c.max_positions = v.get<int>();
    else throw InvalidInput("unknown PLM config key: " + key);
  }
  c.validate();
  return c;
}

void PlmConfig::validate() const {
  if (n_codes < 2) throw InvalidInput("PLM needs at least 2 codes");
  if (text_dim < 1 || dim < 1 || blocks < 0 || ffn_mult < 1 || max_positions < 2) {
    throw InvalidInput("invalid PLM dimensions");
  }
  if (heads < 1 || dim % heads != 0) throw InvalidInput("PLM width must divide by the head count");
}

void PlmContext::validate(const PlmConfig& cfg) const {
  if (static_cast<Index>(prompt_codes.size()) != prompt_text.rows()) {
    throw InvalidInput("prompt code count differs from prompt text length");
  }
  if (target_text.rows() < 1) throw InvalidInput("target text is empty");
  if ((prompt_text.rows() > 0 && prompt_text.cols() != cfg.text_dim) || target_text.cols() != cfg.text_dim) {
    throw InvalidInput("text representation width differs from the PLM config");
  }
  for (int c : prompt_codes.indices) {
    if (c < 0 || c >= cfg.n_codes) throw InvalidInput("prompt code out of range: " + std::to_string(c));
  }
  if (prompt_text.rows() + 2 * target_text.rows() > cfg.max_positions) {
    throw InvalidInput("prompt and target exceed the PLM position limit");
  }
}

PlmContext make_context(const PlmPrompt& prompt, Matrix target_text) {
  return PlmContext{prompt.codes, prompt.text, std::move(target_text)};
}

DurationVector fit_durations(const DurationVector& d, int frames) {
  const auto n = static_cast<int>(d.size());
  if (n == 0) throw InvalidInput("cannot fit empty durations");
  if (frames < n) {
    throw AlignmentInfeasible("cannot fit " + std::to_string(n) + " phonemes into " + std::to_string(frames) +
                              " frames");
  }
  const double total = d.total();
  if (total <= 0) throw InvalidInput("durations must be positive");
  const int spare = frames - n;
  DurationVector out;
  out.counts.assign(d.size(), 1);
  std::vector<double> frac(d.size());
  int used = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double share = spare * d.counts[i] / total;
    const int whole = static_cast<int>(std::floor(share));
    out.counts[i] += whole;
    used += whole;
    frac[i] = share - whole;
  }
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (int k = 0; k < spare - used; ++k) ++out.counts[order[static_cast<std::size_t>(k)]];
  return out;
}

PlmPrompt make_prompt(const MelSpectrogram& prompt_mel, const PhonemeSequence& prompt_phonemes, const TtsModel& tts) {
  if (!tts.config().use_prosody) throw InvalidInput("checkpoint has no prosody codec");
  PlmPrompt p;
  p.text = tts.encode_text(prompt_phonemes);
  const SpeechVector s = tts.encode_speech(prompt_mel);
  const DurationVector d =
      fit_durations(tts.predict_durations(p.text, s), static_cast<int>(prompt_mel.frame_count()));
  const Matrix h = tts.encode_prosody(lowpass_mel(prompt_mel, tts.config().n_low), d);
  p.codes = tts.quantize_prosody(h).codes;
  return p;
}

// ---------------------------------------------------------------------------
// Model

namespace {
enum Segment { kPromptSegment = 0, kTargetTextSegment = 1, kCodeSegment = 2 };
}

ProsodyLm::ProsodyLm(const PlmConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(init_seed);
  code_embedding_ = &params_.xavier("plm.code_embedding", cfg_.vocab_size(), cfg_.dim, rng);
  segment_embedding_ = &params_.xavier("plm.segment_embedding", 3, cfg_.dim, rng);
  position_embedding_ = &params_.xavier("plm.position_embedding", cfg_.max_positions, cfg_.dim, rng, 0.1);
  text_in_ = nn::Linear::create(params_, "plm.text_in", cfg_.text_dim, cfg_.dim, rng);
  for (int b = 0; b < cfg_.blocks; ++b) {
    blocks_.push_back(nn::TransformerBlock::create(params_, "plm.block" + std::to_string(b), cfg_.dim, cfg_.heads,
                                                   cfg_.dim * cfg_.ffn_mult, rng));
  }
  norm_ = nn::LayerNorm::create(params_, "plm.norm", cfg_.dim);
  // Zero output layer: the untrained model predicts a uniform distribution.
  out_ = nn::Linear::create(params_, "plm.out", cfg_.dim, cfg_.vocab_size(), rng);
  params_.at("plm.out.weight").value.setZero();
}

ad::Var ProsodyLm::logits(ad::Graph& g, const PlmContext& ctx, std::span<const int> inputs) const {
  ctx.validate(cfg_);
  const Index p = ctx.prompt_text.rows();
  const Index n = ctx.target_text.rows();
  const auto r = static_cast<Index>(inputs.size());
  if (r < 1 || r > n) throw InvalidInput("code row count must lie in [1, target length]");
  for (int c : inputs) {
    if (c < 0 || c >= cfg_.vocab_size()) throw InvalidInput("code input out of vocabulary: " + std::to_string(c));
  }
  const Index prefix = p + n;
  const Index len = prefix + r;

  ad::Var codes_table = g.param(*code_embedding_);
  ad::Var segments = g.param(*segment_embedding_);
  std::vector<ad::Var> parts;
  if (p > 0) {
    ad::Var rows = text_in_(g, g.constant(ctx.prompt_text)) + ad::gather_rows(codes_table, ctx.prompt_codes.indices);
    const std::vector<int> seg(static_cast<std::size_t>(p), kPromptSegment);
    parts.push_back(rows + ad::gather_rows(segments, seg));
  }
  ad::Var target_text = text_in_(g, g.constant(ctx.target_text));
  {
    const std::vector<int> seg(static_cast<std::size_t>(n), kTargetTextSegment);
    parts.push_back(target_text + ad::gather_rows(segments, seg));
  }
  {
    const std::vector<int> seg(static_cast<std::size_t>(r), kCodeSegment);
    parts.push_back(ad::gather_rows(codes_table, inputs) + ad::slice_rows(target_text, 0, r) +
                    ad::gather_rows(segments, seg));
  }
  ad::Var h = ad::concat_rows(parts) + ad::slice_rows(g.param(*position_embedding_), 0, len);

  nn::AttentionMask mask = nn::AttentionMask::Constant(len, len, false);
  mask.leftCols(prefix).setConstant(true);
  for (Index i = prefix; i < len; ++i) mask.block(i, prefix, 1, i - prefix + 1).setConstant(true);

  for (const auto& b : blocks_) h = b(g, h, &mask);
  return out_(g, norm_(g, ad::slice_rows(h, prefix, r)));
}

ad::Var ProsodyLm::loss(ad::Graph& g, const PlmContext& ctx, const ProsodyCodes& target) const {
  if (static_cast<Index>(target.size()) != ctx.target_text.rows()) {
    throw InvalidInput("target code count differs from target text length");
  }
  for (int c : target.indices) {
    if (c < 0 || c >= cfg_.n_codes) throw InvalidInput("target code out of range: " + std::to_string(c));
  }
  std::vector<int> inputs;
  inputs.reserve(target.size());
  inputs.push_back(cfg_.bos());
  inputs.insert(inputs.end(), target.indices.begin(), target.indices.end() - 1);
  return ad::cross_entropy(logits(g, ctx, inputs), target.indices);
}

double ProsodyLm::loss_value(const PlmContext& ctx, const ProsodyCodes& target) const {
  ad::Graph g(false);
  return loss(g, ctx, target).scalar();
}

ProsodyCodes ProsodyLm::generate(const PlmContext& ctx, const SamplingConfig& sampling, std::uint64_t seed) const {
  ctx.validate(cfg_);
  if (sampling.top_k < 1) throw InvalidInput("top_k must be >= 1");
  if (!(sampling.temperature > 0.0)) throw InvalidInput("temperature must be positive");
  Rng rng(seed);
  const Index n = ctx.target_text.rows();
  const int k = std::min(sampling.top_k, cfg_.n_codes);
  std::vector<int> inputs{cfg_.bos()};
  ProsodyCodes out;
  std::vector<int> order(static_cast<std::size_t>(cfg_.n_codes));
  for (Index pos = 0; pos < n; ++pos) {
    ad::Graph g(false);
    const Matrix all = logits(g, ctx, inputs).value();
    const auto row = all.row(pos).head(cfg_.n_codes);
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](int a, int b) {
      return row(a) > row(b) || (row(a) == row(b) && a < b);
    });
    int chosen = order[0];
    if (k > 1) {
      std::vector<double> w(static_cast<std::size_t>(k));
      const double top = row(order[0]);
      double z = 0.0;
      for (int i = 0; i < k; ++i) {
        w[static_cast<std::size_t>(i)] = std::exp((row(order[static_cast<std::size_t>(i)]) - top) / sampling.temperature);
        z += w[static_cast<std::size_t>(i)];
      }
      double u = rng.uniform() * z;
      for (int i = 0; i < k; ++i) {
        u -= w[static_cast<std::size_t>(i)];
        if (u < 0.0 || i == k - 1) {
          chosen = order[static_cast<std::size_t>(i)];
          break;
        }
      }
    }
    out.indices.push_back(chosen);
    inputs.push_back(chosen);
  }
  return out;
}

Archive ProsodyLm::to_archive() const {
  Archive a;
  a.config = {{"kind", "plm"}, {"plm", cfg_.to_json()}};
  store_parameters(a, params_);
  return a;
}

ProsodyLm ProsodyLm::from_archive(const Archive& archive) {
  if (archive.config.value("kind", "") != "plm") throw CheckpointError("archive is not a PLM checkpoint");
  ProsodyLm lm(PlmConfig::from_json(archive.config.at("plm")), 0);
  load_parameters(archive, lm.params_);
  return lm;
}

// ---------------------------------------------------------------------------
// Training

std::vector<PlmExample> make_plm_examples(const TtsModel& tts, const std::vector<PlmUtterance>& utterances,
                                          std::uint64_t seed) {
  Rng rng(seed);
  std::vector<PlmExample> out;
  for (const auto& u : utterances) {
    if (u.text.size() != u.codes.size()) throw InvalidInput("code count differs from phoneme count");
    if (u.text.size() < 2) continue;
    const std::size_t cut = 1 + rng.uniform_int(u.text.size() - 1);
    const PhonemeSequence prompt_text{{u.text.ids.begin(), u.text.ids.begin() + static_cast<std::ptrdiff_t>(cut)}};
    const PhonemeSequence target_text{{u.text.ids.begin() + static_cast<std::ptrdiff_t>(cut), u.text.ids.end()}};
    PlmExample ex;
    ex.context.prompt_codes.indices.assign(u.codes.indices.begin(),
                                           u.codes.indices.begin() + static_cast<std::ptrdiff_t>(cut));
    ex.context.prompt_text = tts.encode_text(prompt_text);
    ex.context.target_text = tts.encode_text(target_text);
    ex.target.indices.assign(u.codes.indices.begin() + static_cast<std::ptrdiff_t>(cut), u.codes.indices.end());
    out.push_back(std::move(ex));
  }
  return out;
}

double plm_train_step(ProsodyLm& lm, nn::Adam& adam, std::span<const PlmExample> batch) {
  if (batch.empty()) throw InvalidInput("PLM training batch is empty");
  ad::Graph g;
  std::vector<ad::Var> losses;
  losses.reserve(batch.size());
  for (const auto& ex : batch) losses.push_back(lm.loss(g, ex.context, ex.target));
  ad::Var total = ad::scale(ad::sum(ad::concat_rows(losses)), 1.0 / static_cast<double>(batch.size()));
  const double value = total.scalar();
  if (!std::isfinite(value)) return value;
  g.backward(total);
  adam.step(lm.parameters());
  return value;
}

std::vector<PlmLogRecord> train_plm(ProsodyLm& lm, const std::vector<PlmExample>& examples,
                                    const PlmTrainConfig& train, const PlmStepCallback& on_step) {
  if (examples.empty()) throw InvalidInput("PLM training set is empty");
  if (train.steps < 0 || train.batch < 1) throw InvalidInput("invalid training schedule");
  Rng rng = Rng::substream(train.seed, 1);
  nn::Adam adam(nn::AdamOptions{train.learning_rate, 0.9, 0.999, 1e-8, train.clip_norm});
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  std::vector<PlmLogRecord> log;
  for (int step = 0; step < train.steps; ++step) {
    std::vector<PlmExample> batch;
    const auto size = std::min<std::size_t>(static_cast<std::size_t>(train.batch), examples.size());
    for (std::size_t b = 0; b < size; ++b) {
      if (cursor == order.size()) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_int(i)]);
        cursor = 0;
      }
      batch.push_back(examples[order[cursor++]]);
    }
    const double loss = plm_train_step(lm, adam, batch);
    if (!std::isfinite(loss)) throw TrainingDiverged(step, "PLM loss is not finite");
    log.push_back(PlmLogRecord{step, loss});
    if (on_step) on_step(log.back());
  }
  return log;
}

}  // namespace f2v
