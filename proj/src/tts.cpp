#include "f2v/tts.hpp"

#include <cmath>
#include <numeric>

namespace f2v {

Matrix normalize_mel(const Matrix& frames) { return (frames.array() - kMelMean) / kMelScale; }

Matrix denormalize_mel(const Matrix& frames) { return (frames.array() * kMelScale + kMelMean).matrix(); }

// ---------------------------------------------------------------------------
// Config

nlohmann::json TtsConfig::to_json() const {
  return {
      {"vocab_size", vocab_size},
      {"n_mels", n_mels},
      {"n_low", n_low},
      {"text_dim", text_dim},
      {"speech_dim", speech_dim},
      {"prosody_dim", prosody_dim},
      {"decoder_dim", decoder_dim},
      {"n_codes", n_codes},
      {"encoder_blocks", encoder_blocks},
      {"decoder_blocks", decoder_blocks},
      {"heads", heads},
      {"ffn_mult", ffn_mult},
      {"prosody_kernel", prosody_kernel},
      {"prosody_layers", prosody_layers},
      {"duration_kernel", duration_kernel},
      {"commitment", commitment},
      {"ema_decay", ema_decay},
      {"dead_code_threshold", dead_code_threshold},
      {"use_prosody", use_prosody},
      {"decoder_mode", decoder_mode == DecoderMode::kFeedForward ? "feedforward" : "denoise"},
      {"denoise_steps", denoise_steps},
      {"denoise_sigma", denoise_sigma},
  };
}

TtsConfig TtsConfig::from_json(const nlohmann::json& j) {
  TtsConfig c;
  if (!j.is_object()) throw InvalidInput("TTS config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "vocab_size") c.vocab_size = v.get<int>();
    else if (key == "n_mels") c.n_mels = v.get<int>();
    else if (key == "n_low") c.n_low = v.get<int>();
    else if (key == "text_dim") c.text_dim = v.get<int>();
    else if (key == "speech_dim") c.speech_dim = v.get<int>();
    else if (key == "prosody_dim") c.prosody_dim = v.get<int>();
    else if (key == "decoder_dim") c.decoder_dim = v.get<int>();
    else if (key == "n_codes") c.n_codes = v.get<int>();
    else if (key == "encoder_blocks") c.encoder_blocks = v.get<int>();
    else if (key == "decoder_blocks") c.decoder_blocks = v.get<int>();
    else if (key == "heads") c.heads = v.get<int>();
    else if (key == "ffn_mult") c.ffn_mult = v.get<int>();
    else if (key == "prosody_kernel") c.prosody_kernel = v.get<int>();
    else if (key == "prosody_layers") c.prosody_layers = v.get<int>();
    else if (key == "duration_kernel") c.duration_kernel = v.get<int>();
    else if (key == "commitment") c.commitment = v.get<double>();
    else if (key == "ema_decay") c.ema_decay = v.get<double>();
    else if (key == "dead_code_threshold") c.dead_code_threshold = v.get<double>();
    else if (key == "use_prosody") c.use_prosody = v.get<bool>();
    else if (key == "decoder_mode") {
      const auto s = v.get<std::string>();
      if (s == "feedforward") c.decoder_mode = DecoderMode::kFeedForward;
      else if (s == "denoise") c.decoder_mode = DecoderMode::kDenoise;
      else throw InvalidInput("unknown decoder_mode: " + s);
    } else if (key == "denoise_steps") c.denoise_steps = v.get<int>();
    else if (key == "denoise_sigma") c.denoise_sigma = v.get<double>();
    else throw InvalidInput("unknown TTS config key: " + key);
  }
  c.validate();
  return c;
}

void TtsConfig::validate() const {
  if (vocab_size < 1 || n_mels < 1 || text_dim < 1 || speech_dim < 1 || prosody_dim < 1 || decoder_dim < 1) {
    throw InvalidInput("TTS dimensions must be positive");
  }
  if (n_low < 1 || n_low > n_mels) throw InvalidInput("n_low must lie in [1, n_mels]");
  if (n_codes < 2) throw InvalidInput("codebook needs at least 2 codes");
  if (heads < 1 || text_dim % heads || speech_dim % heads || decoder_dim % heads) {
    throw InvalidInput("model widths must divide by the head count");
  }
  if (prosody_kernel % 2 == 0 || duration_kernel % 2 == 0) throw InvalidInput("kernels must be odd");
  if (denoise_steps < 1) throw InvalidInput("denoise_steps must be >= 1");
}

DurationVector durations_from_log(const Vector& log_durations) {
  DurationVector d;
  d.counts.reserve(static_cast<std::size_t>(log_durations.size()));
  for (Index i = 0; i < log_durations.size(); ++i) {
    const double v = std::floor(std::exp(log_durations(i)) + 0.5);
    d.counts.push_back(v < 1.0 ? 1 : static_cast<int>(std::min(v, 1e6)));
  }
  return d;
}

// ---------------------------------------------------------------------------
// Model

TtsModel::TtsModel(const TtsConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(init_seed);
  const int dt = cfg_.text_dim;
  const int ds = cfg_.speech_dim;
  const int dd = cfg_.decoder_dim;

  text_embedding_ = &params_.xavier("text.embedding", cfg_.vocab_size, dt, rng);
  for (int b = 0; b < cfg_.encoder_blocks; ++b) {
    text_blocks_.push_back(nn::TransformerBlock::create(params_, "text.block" + std::to_string(b), dt, cfg_.heads,
                                                        dt * cfg_.ffn_mult, rng));
  }
  text_norm_ = nn::LayerNorm::create(params_, "text.norm", dt);

  speech_in_ = nn::Linear::create(params_, "speech.in", cfg_.n_mels, ds, rng);
  for (int b = 0; b < cfg_.encoder_blocks; ++b) {
    speech_blocks_.push_back(nn::TransformerBlock::create(params_, "speech.block" + std::to_string(b), ds, cfg_.heads,
                                                          ds * cfg_.ffn_mult, rng));
  }
  speech_out_ = nn::Linear::create(params_, "speech.out", ds, ds, rng);

  aligner_ = nn::Linear::create(params_, "align.proj", dt, cfg_.n_mels, rng);

  duration_cond_ = nn::Linear::create(params_, "dur.cond", ds, dt, rng);
  duration_conv_ = nn::Conv1d::create(params_, "dur.conv", dt, dt, cfg_.duration_kernel, rng);
  duration_norm_ = nn::LayerNorm::create(params_, "dur.norm", dt);
  duration_out_ = nn::Linear::create(params_, "dur.out", dt, 1, rng);
  params_.at("dur.out.bias").value.setConstant(std::log(6.0));

  if (cfg_.use_prosody) {
    prosody_encoder_ = ProsodyEncoder::create(params_, "prosody.enc", cfg_.n_low, cfg_.prosody_dim,
                                              cfg_.prosody_kernel, cfg_.prosody_layers, rng);
  }

  decoder_text_in_ = nn::Linear::create(params_, "dec.text_in", dt, dd, rng);
  if (cfg_.use_prosody) decoder_prosody_in_ = nn::Linear::create(params_, "dec.prosody_in", cfg_.prosody_dim, dd, rng);
  if (cfg_.decoder_mode == DecoderMode::kDenoise) {
    decoder_noisy_in_ = nn::Linear::create(params_, "dec.noisy_in", cfg_.n_mels, dd, rng);
  }
  for (int b = 0; b < cfg_.decoder_blocks; ++b) {
    decoder_blocks_.push_back(nn::TransformerBlock::create(params_, "dec.block" + std::to_string(b), dd, cfg_.heads,
                                                           dd * cfg_.ffn_mult, rng, ds));
  }
  decoder_norm_ = nn::ConditionalLayerNorm::create(params_, "dec.norm", dd, ds, rng);
  decoder_out_ = nn::Linear::create(params_, "dec.out", dd, cfg_.n_mels, rng, true, 0.5);

  codebook_ = make_codebook(cfg_.n_codes, cfg_.prosody_dim, rng);
}

ad::Var TtsModel::text_forward(ad::Graph& g, const PhonemeSequence& x) const {
  if (x.ids.empty()) throw InvalidInput("empty phoneme sequence");
  for (int id : x.ids) {
    if (id < 0 || id >= cfg_.vocab_size) throw InvalidInput("phoneme id out of vocabulary: " + std::to_string(id));
  }
  const auto n = static_cast<Index>(x.size());
  ad::Var h = ad::gather_rows(g.param(*text_embedding_), x.ids);
  h = h + g.constant(nn::sinusoid_positions(n, cfg_.text_dim));
  for (const auto& b : text_blocks_) h = b(g, h);
  return text_norm_(g, h);
}

ad::Var TtsModel::speech_forward(ad::Graph& g, ad::Var normalized_mel) const {
  if (normalized_mel.rows() < 1) throw InvalidInput("speech encoder needs at least one frame");
  if (normalized_mel.cols() != cfg_.n_mels) throw InvalidInput("speech encoder mel bin count mismatch");
  ad::Var h = ad::gelu(speech_in_(g, normalized_mel));
  for (const auto& b : speech_blocks_) h = b(g, h);
  return speech_out_(g, ad::mean_rows(h));
}

ad::Var TtsModel::aligner_means(ad::Graph& g, ad::Var text) const { return aligner_(g, text); }

ad::Var TtsModel::duration_forward(ad::Graph& g, ad::Var text, ad::Var s) const {
  ad::Var h = ad::add_row(text, duration_cond_(g, s));
  h = ad::gelu(duration_conv_(g, h));
  h = duration_norm_(g, h);
  return duration_out_(g, h);
}

ad::Var TtsModel::prosody_forward(ad::Graph& g, ad::Var normalized_low, const DurationVector& d) const {
  if (!prosody_encoder_) throw InvalidInput("model was built without a prosody encoder");
  if (normalized_low.cols() != cfg_.n_low) throw InvalidInput("prosody encoder expects the low mel band");
  if (d.total() != normalized_low.rows()) throw InvalidInput("durations do not sum to the frame count");
  return (*prosody_encoder_)(g, normalized_low, d);
}

ad::Var TtsModel::decoder_forward(ad::Graph& g, ad::Var text_frames, std::optional<ad::Var> prosody_frames, ad::Var s,
                                  std::optional<ad::Var> noisy_mel) const {
  const Index m = text_frames.rows();
  if (cfg_.use_prosody != prosody_frames.has_value()) {
    throw InvalidInput(cfg_.use_prosody ? "decoder needs prosody frames" : "prosody-free decoder got prosody frames");
  }
  if (prosody_frames && prosody_frames->rows() != m) throw InvalidInput("text and prosody frame counts differ");
  ad::Var h = decoder_text_in_(g, text_frames);
  if (prosody_frames) h = h + (*decoder_prosody_in_)(g, *prosody_frames);
  if (decoder_noisy_in_) {
    if (!noisy_mel) throw InvalidInput("denoising decoder needs a noisy input");
    h = h + (*decoder_noisy_in_)(g, *noisy_mel);
  }
  h = h + g.constant(nn::sinusoid_positions(m, cfg_.decoder_dim));
  for (const auto& b : decoder_blocks_) h = b(g, h, nullptr, s);
  return decoder_out_(g, decoder_norm_(g, h, s));
}

Matrix TtsModel::encode_text(const PhonemeSequence& x) const {
  ad::Graph g(false);
  return text_forward(g, x).value();
}

SpeechVector TtsModel::encode_speech(const MelSpectrogram& mel) const {
  ad::Graph g(false);
  return SpeechVector{speech_forward(g, g.constant(normalize_mel(mel.frames))).value().row(0)};
}

namespace {

Matrix scores_from_means(const Matrix& means, const Matrix& normalized_mel) {
  Matrix sim = means * normalized_mel.transpose();
  sim.colwise() -= 0.5 * means.rowwise().squaredNorm();
  return sim;
}

}  // namespace

Matrix TtsModel::alignment_scores(const PhonemeSequence& x, const MelSpectrogram& mel) const {
  if (mel.bins() != cfg_.n_mels) throw InvalidInput("mel bin count mismatch");
  ad::Graph g(false);
  const Matrix means = aligner_means(g, text_forward(g, x)).value();
  return scores_from_means(means, normalize_mel(mel.frames));
}

DurationVector TtsModel::align(const PhonemeSequence& x, const MelSpectrogram& mel) const {
  if (mel.frame_count() < static_cast<Index>(x.size())) {
    throw AlignmentInfeasible("cannot align " + std::to_string(x.size()) + " phonemes to " +
                              std::to_string(mel.frame_count()) + " frames");
  }
  return monotonic_align(alignment_scores(x, mel));
}

Vector TtsModel::predict_log_durations(const Matrix& text, const SpeechVector& s) const {
  if (text.cols() != cfg_.text_dim) throw InvalidInput("text representation width mismatch");
  if (s.values.size() != cfg_.speech_dim) throw InvalidInput("speech vector dimension mismatch");
  ad::Graph g(false);
  return duration_forward(g, g.constant(text), g.constant(s.values)).value().col(0);
}

DurationVector TtsModel::predict_durations(const Matrix& text, const SpeechVector& s) const {
  return durations_from_log(predict_log_durations(text, s));
}

Matrix TtsModel::encode_prosody(const MelSpectrogram& low_mel, const DurationVector& d) const {
  ad::Graph g(false);
  return prosody_forward(g, g.constant(normalize_mel(low_mel.frames)), d).value();
}

QuantizeResult TtsModel::quantize_prosody(const Matrix& prosody) const {
  return quantize(prosody, codebook_, cfg_.commitment);
}

MelSpectrogram TtsModel::decode(const Matrix& text_frames, const Matrix* prosody_frames, const SpeechVector& s,
                                std::uint64_t noise_seed) const {
  if (s.values.size() != cfg_.speech_dim) throw InvalidInput("speech vector dimension mismatch");
  if (prosody_frames && prosody_frames->rows() != text_frames.rows()) {
    throw InvalidInput("text and prosody frame counts differ");
  }
  const Index m = text_frames.rows();
  MelSpectrogram out;
  auto run = [&](std::optional<Matrix> noisy) {
    ad::Graph g(false);
    std::optional<ad::Var> pv;
    if (prosody_frames) pv = g.constant(*prosody_frames);
    std::optional<ad::Var> nv;
    if (noisy) nv = g.constant(*noisy);
    return decoder_forward(g, g.constant(text_frames), pv, g.constant(s.values), nv).value();
  };
  if (cfg_.decoder_mode == DecoderMode::kFeedForward) {
    out.frames = denormalize_mel(run(std::nullopt));
  } else {
    Rng rng(noise_seed);
    auto noise = [&] {
      Matrix z(m, cfg_.n_mels);
      for (Index i = 0; i < z.size(); ++i) z.data()[i] = rng.normal();
      return z;
    };
    Matrix y = cfg_.denoise_sigma * noise();
    Matrix pred;
    for (int k = 0; k < cfg_.denoise_steps; ++k) {
      pred = run(y);
      const double next_sigma = cfg_.denoise_sigma * (1.0 - static_cast<double>(k + 1) / cfg_.denoise_steps);
      y = pred + next_sigma * noise();
    }
    out.frames = denormalize_mel(pred);
  }
  return out;
}

Archive TtsModel::to_archive() const {
  Archive a;
  a.config = {{"kind", "tts"}, {"tts", cfg_.to_json()}};
  store_parameters(a, params_);
  a.add("codebook.entries", codebook_.entries);
  a.add("codebook.ema_count", codebook_.ema_count);
  a.add("codebook.ema_sum", codebook_.ema_sum);
  return a;
}

TtsModel TtsModel::from_archive(const Archive& archive) {
  if (archive.config.value("kind", "") != "tts") throw CheckpointError("archive is not a TTS checkpoint");
  TtsModel model(TtsConfig::from_json(archive.config.at("tts")), 0);
  load_parameters(archive, model.params_);
  const Matrix& entries = archive.get("codebook.entries");
  if (entries.rows() != model.cfg_.n_codes || entries.cols() != model.cfg_.prosody_dim) {
    throw CheckpointError("codebook shape does not match config");
  }
  model.codebook_.entries = entries;
  model.codebook_.ema_count = archive.get("codebook.ema_count").col(0);
  model.codebook_.ema_sum = archive.get("codebook.ema_sum");
  return model;
}

// ---------------------------------------------------------------------------
// Training

nlohmann::json TtsLogRecord::to_json() const {
  return {{"step", step}, {"loss_mel", loss_mel}, {"loss_dur", loss_dur}, {"loss_vq", loss_vq},
          {"loss_align", loss_align}};
}

std::vector<TtsExample> prepare_tts_examples(const std::vector<CorpusExample>& corpus, const AudioConfig& audio) {
  std::vector<TtsExample> out;
  out.reserve(corpus.size());
  for (const auto& ex : corpus) {
    if (ex.transcript.ids.empty()) throw InvalidInput("training example without transcript: " + ex.utterance_id);
    out.push_back(TtsExample{ex.transcript, normalize_mel(compute_mel(ex.waveform, audio).frames)});
  }
  return out;
}

TtsLossTerms tts_loss(ad::Graph& g, const TtsModel& model, const TtsExample& ex, const DurationVector* durations,
                      Rng* noise_rng) {
  const TtsConfig& cfg = model.config();
  TtsLossTerms t;
  ad::Var y = g.constant(ex.mel);
  ad::Var text = model.text_forward(g, ex.text);
  ad::Var s = model.speech_forward(g, y);
  ad::Var means = model.aligner_means(g, text);

  DurationVector d;
  if (durations) {
    d = *durations;
  } else {
    if (ex.mel.rows() < static_cast<Index>(ex.text.size())) {
      throw AlignmentInfeasible("utterance shorter than its phoneme count");
    }
    d = monotonic_align(scores_from_means(means.value(), ex.mel));
  }
  if (d.size() != ex.text.size() || d.total() != ex.mel.rows()) throw InvalidInput("durations do not fit utterance");

  t.align = ad::mse_loss(ad::repeat_rows(means, d.counts), y);

  Vector log_d(static_cast<Index>(d.size()));
  for (std::size_t i = 0; i < d.size(); ++i) log_d(static_cast<Index>(i)) = std::log(static_cast<double>(d.counts[i]));
  ad::Var log_pred = model.duration_forward(g, ad::stop_gradient(text), s);
  t.duration = ad::mse_loss(log_pred, g.constant(log_d));

  std::optional<ad::Var> prosody_frames;
  if (cfg.use_prosody) {
    ad::Var h = model.prosody_forward(g, ad::slice_cols(y, 0, cfg.n_low), d);
    VqTerms vq = quantize(h, g.constant(model.codebook().entries), cfg.commitment);
    t.codebook = vq.codebook_loss;
    t.commitment = vq.commitment_loss;
    t.prosody_vectors = h.value();
    t.codes = vq.codes.indices;
    prosody_frames = ad::repeat_rows(vq.quantized, d.counts);
  } else {
    t.codebook = g.constant(Matrix::Zero(1, 1));
    t.commitment = g.constant(Matrix::Zero(1, 1));
  }

  std::optional<ad::Var> noisy;
  if (cfg.decoder_mode == DecoderMode::kDenoise) {
    if (!noise_rng) throw InvalidInput("denoising decoder training needs a noise generator");
    const double sigma = cfg.denoise_sigma * noise_rng->uniform();
    Matrix z(ex.mel.rows(), ex.mel.cols());
    for (Index i = 0; i < z.size(); ++i) z.data()[i] = ex.mel.data()[i] + sigma * noise_rng->normal();
    noisy = g.constant(z);
  }
  ad::Var pred = model.decoder_forward(g, ad::repeat_rows(text, d.counts), prosody_frames, s, noisy);
  // L1 in log-mel units.
  t.mel = ad::scale(ad::l1_loss(pred, y), kMelScale);
  t.total = t.mel + t.duration + t.align + t.commitment;
  return t;
}

std::vector<TtsLogRecord> train_tts_model(TtsModel& model, const std::vector<TtsExample>& data,
                                          const TtsTrainConfig& train, const TtsStepCallback& on_step) {
  if (data.empty()) throw InvalidInput("training corpus is empty");
  if (train.steps < 0 || train.batch < 1) throw InvalidInput("invalid training schedule");
  const TtsConfig& cfg = model.config();
  Rng order_rng = Rng::substream(train.seed, 1);
  Rng codebook_rng = Rng::substream(train.seed, 2);
  Rng noise_rng = Rng::substream(train.seed, 3);
  nn::Adam adam(nn::AdamOptions{train.learning_rate, 0.9, 0.999, 1e-8, train.clip_norm});
  CodebookUpdateOptions cb_opts{cfg.ema_decay, cfg.dead_code_threshold};

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  auto next_index = [&] {
    if (cursor == order.size()) {
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.uniform_int(i)]);
      cursor = 0;
    }
    return order[cursor++];
  };

  std::vector<TtsLogRecord> log;
  log.reserve(static_cast<std::size_t>(train.steps));
  for (int step = 0; step < train.steps; ++step) {
    std::vector<std::size_t> batch;
    for (int b = 0; b < std::min<int>(train.batch, static_cast<int>(data.size())); ++b) batch.push_back(next_index());

    if (step == 0 && cfg.use_prosody) {
      // Seed the codebook with encoder outputs of the first batch.
      std::vector<Matrix> rows;
      Index total = 0;
      for (std::size_t idx : batch) {
        ad::Graph g(false);
        const TtsExample& ex = data[idx];
        ad::Var text = model.text_forward(g, ex.text);
        const DurationVector d = monotonic_align(scores_from_means(model.aligner_means(g, text).value(), ex.mel));
        rows.push_back(model.prosody_forward(g, g.constant(ex.mel.leftCols(cfg.n_low)), d).value());
        total += rows.back().rows();
      }
      Matrix all(total, cfg.prosody_dim);
      Index r = 0;
      for (const auto& m : rows) {
        all.middleRows(r, m.rows()) = m;
        r += m.rows();
      }
      initialize_codebook_from(model.codebook(), all, codebook_rng);
    }

    ad::Graph g;
    TtsLogRecord rec;
    rec.step = step;
    std::vector<ad::Var> losses;
    Matrix assigned(0, cfg.prosody_dim);
    std::vector<int> codes;
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (std::size_t idx : batch) {
      TtsLossTerms t = tts_loss(g, model, data[idx], nullptr, &noise_rng);
      losses.push_back(t.total);
      rec.loss_mel += t.mel.scalar() * inv;
      rec.loss_dur += t.duration.scalar() * inv;
      rec.loss_align += t.align.scalar() * inv;
      rec.loss_vq += (t.codebook.scalar() + t.commitment.scalar()) * inv;
      if (cfg.use_prosody) {
        Matrix grown(assigned.rows() + t.prosody_vectors.rows(), cfg.prosody_dim);
        grown << assigned, t.prosody_vectors;
        assigned = std::move(grown);
        codes.insert(codes.end(), t.codes.begin(), t.codes.end());
      }
    }
    ad::Var total = ad::scale(ad::sum(ad::concat_rows(losses)), inv);
    if (!std::isfinite(total.scalar())) throw TrainingDiverged(step, "loss is not finite");
    g.backward(total);
    adam.step(model.parameters());
    if (cfg.use_prosody) model.codebook() = update_codebook(std::move(model.codebook()), assigned, codes, codebook_rng, cb_opts);
    log.push_back(rec);
    if (on_step) on_step(rec);
  }
  return log;
}

TtsTrainResult train_tts(const std::vector<CorpusExample>& corpus, const TtsConfig& cfg, const TtsTrainConfig& train,
                         const TtsStepCallback& on_step) {
  if (corpus.empty()) throw InvalidInput("training corpus is empty");
  TtsModel model(cfg, train.seed);
  const auto data = prepare_tts_examples(corpus);
  auto log = train_tts_model(model, data, train, on_step);
  return TtsTrainResult{std::move(model), std::move(log)};
}

SynthesisResult synthesize(const TtsModel& model, const PhonemeSequence& x, const SpeechVector& s,
                           const ProsodyCodes* codes, std::uint64_t seed) {
  const Matrix text = model.encode_text(x);
  SynthesisResult r;
  r.durations = model.predict_durations(text, s);
  const Matrix text_frames = expand(text, r.durations);
  if (model.config().use_prosody) {
    if (!codes) throw InvalidInput("prosody codes are required by this checkpoint");
    if (codes->size() != x.size()) throw InvalidInput("one prosody code per phoneme is required");
    const Matrix prosody_frames = expand(dequantize(*codes, model.codebook()), r.durations);
    r.mel = model.decode(text_frames, &prosody_frames, s, seed);
  } else {
    r.mel = model.decode(text_frames, nullptr, s, seed);
  }
  return r;
}

}  // namespace f2v
