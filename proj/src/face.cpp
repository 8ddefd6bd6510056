#include "f2v/face.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

namespace f2v {

Matrix face_pixels(const FaceImage& face) {
  validate_face(face);
  constexpr Index kPixels = static_cast<Index>(kFaceSize) * kFaceSize;
  Matrix out(kPixels, 3);
  for (int c = 0; c < 3; ++c) {
    out.col(c) = ((face.pixels.segment(c * kPixels, kPixels).cast<double>() - 0.5) / 0.25).matrix();
  }
  return out;
}

FaceImage translate_face(const FaceImage& face, int dx, int dy) {
  FaceImage out;
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < kFaceSize; ++y) {
      const int sy = std::clamp(y - dy, 0, kFaceSize - 1);
      for (int x = 0; x < kFaceSize; ++x) out.at(c, y, x) = face.at(c, sy, std::clamp(x - dx, 0, kFaceSize - 1));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Encoder

nlohmann::json FaceEncoderConfig::to_json() const { return {{"speech_dim", speech_dim}, {"channels", channels}}; }

FaceEncoderConfig FaceEncoderConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidInput("face encoder config must be a JSON object");
  FaceEncoderConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "speech_dim") c.speech_dim = v.get<int>();
    else if (key == "channels") c.channels = v.get<std::vector<int>>();
    else throw InvalidInput("unknown face encoder config key: " + key);
  }
  c.validate();
  return c;
}

void FaceEncoderConfig::validate() const {
  if (speech_dim < 1) throw InvalidInput("speech_dim must be positive");
  if (channels.size() != 4) throw InvalidInput("face encoder takes exactly four channel widths");
  for (int ch : channels) {
    if (ch < 1) throw InvalidInput("channel widths must be positive");
  }
}

FaceEncoder::FaceEncoder(const FaceEncoderConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(init_seed);
  ad::Conv2dGeometry geom{kFaceSize, kFaceSize, 3, 4, 4, 0};
  for (std::size_t l = 0; l < cfg_.channels.size(); ++l) {
    convs_.push_back(nn::Conv2d::create(params_, "face.conv" + std::to_string(l), geom, cfg_.channels[l], rng));
    geom = ad::Conv2dGeometry{geom.out_height(), geom.out_width(), cfg_.channels[l], 3, 2, 1};
  }
  head_ = nn::Linear::create(params_, "face.head", cfg_.channels.back(), cfg_.speech_dim, rng);
}

ad::Var FaceEncoder::forward(ad::Graph& g, ad::Var pixels) const {
  const Index expected = static_cast<Index>(kFaceSize) * kFaceSize;
  if (pixels.rows() != expected || pixels.cols() != 3) throw InvalidInput("face input must be 224 x 224 x 3");
  ad::Var h = pixels;
  for (const auto& conv : convs_) h = ad::relu(conv(g, h));
  return head_(g, ad::mean_rows(h));
}

FaceVector FaceEncoder::encode(const FaceImage& face) const {
  ad::Graph g(false);
  return FaceVector{forward(g, g.constant(face_pixels(face))).value().row(0)};
}

Archive FaceEncoder::to_archive() const {
  Archive a;
  a.config = {{"kind", "face"}, {"face", cfg_.to_json()}};
  store_parameters(a, params_);
  return a;
}

FaceEncoder FaceEncoder::from_archive(const Archive& archive) {
  if (archive.config.value("kind", "") != "face") throw CheckpointError("archive is not a face encoder checkpoint");
  FaceEncoder enc(FaceEncoderConfig::from_json(archive.config.at("face")), 0);
  load_parameters(archive, enc.params_);
  return enc;
}

void check_compatible(const FaceEncoder& face, const TtsModel& tts) {
  if (face.config().speech_dim != tts.config().speech_dim) {
    throw CheckpointError("face encoder emits " + std::to_string(face.config().speech_dim) +
                          "-dim vectors but the TTS speech vector has " + std::to_string(tts.config().speech_dim));
  }
}

// ---------------------------------------------------------------------------
// Mapping loss

std::string to_string(MappingVariant v) {
  switch (v) {
    case MappingVariant::kMseCos:
      return "mse_cos";
    case MappingVariant::kMseCosTriplet:
      return "mse_cos_triplet";
    case MappingVariant::kMseCosContrastive:
      return "mse_cos_contrastive";
  }
  return "unknown";
}

MappingVariant parse_mapping_variant(std::string_view name) {
  if (name == "mse_cos") return MappingVariant::kMseCos;
  if (name == "mse_cos_triplet") return MappingVariant::kMseCosTriplet;
  if (name == "mse_cos_contrastive") return MappingVariant::kMseCosContrastive;
  throw InvalidInput("unknown mapping variant: " + std::string(name));
}

void MappingLossConfig::validate() const {
  if (!(temperature > 0.0)) throw InvalidInput("temperature must be positive");
  if (max_negatives < 0) throw InvalidInput("max_negatives must be >= 0");
}

Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> negative_mask(Index batch, std::span<const int> identities,
                                                                 int max_negatives) {
  if (!identities.empty() && static_cast<Index>(identities.size()) != batch) {
    throw InvalidInput("identity labels must match the batch size");
  }
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> mask(batch, batch);
  mask.setConstant(false);
  for (Index i = 0; i < batch; ++i) {
    mask(i, i) = true;
    int taken = 0;
    // Walk forward cyclically so a cap keeps a deterministic, spread-out set.
    for (Index step = 1; step < batch; ++step) {
      const Index j = (i + step) % batch;
      const bool same = !identities.empty() && identities[static_cast<std::size_t>(i)] ==
                                                   identities[static_cast<std::size_t>(j)];
      if (same) continue;
      if (max_negatives > 0 && taken == max_negatives) break;
      mask(i, j) = true;
      ++taken;
    }
  }
  return mask;
}

MappingLossTerms map_loss(ad::Var v, ad::Var s, std::span<const int> identities, const MappingLossConfig& cfg) {
  cfg.validate();
  if (v.rows() < 1) throw InvalidInput("map_loss needs a non-empty batch");
  if (v.rows() != s.rows() || v.cols() != s.cols()) throw InvalidInput("face and speech batches differ in shape");
  ad::Graph& g = v.graph();
  const Index m = v.rows();
  MappingLossTerms t;
  ad::Var vn = ad::row_normalize(v);
  ad::Var sn = ad::row_normalize(s);
  ad::Var positive = ad::sum_cols(ad::mul(vn, sn));  // m x 1
  t.mse = ad::mse_loss(v, s);
  t.cosine = ad::add_scalar(-ad::mean(positive), 1.0);

  if (cfg.variant == MappingVariant::kMseCos) {
    t.contrastive = g.constant(Matrix::Zero(1, 1));
  } else {
    const auto mask = negative_mask(m, identities, cfg.max_negatives);
    ad::Var cosines = ad::matmul_nt(vn, sn);  // m x m
    if (cfg.variant == MappingVariant::kMseCosContrastive) {
      ad::Var logits = ad::scale(cosines, 1.0 / cfg.temperature);
      ad::Var per_row = ad::logsumexp_rows(logits, mask) - ad::scale(positive, 1.0 / cfg.temperature);
      t.contrastive = ad::mean(per_row);
    } else {
      const Matrix& c = cosines.value();
      std::vector<int> hardest(static_cast<std::size_t>(m), 0);
      Matrix has_negative = Matrix::Zero(m, 1);
      for (Index i = 0; i < m; ++i) {
        double best = -std::numeric_limits<double>::infinity();
        for (Index j = 0; j < m; ++j) {
          if (j == i || !mask(i, j)) continue;
          if (c(i, j) > best) {
            best = c(i, j);
            hardest[static_cast<std::size_t>(i)] = static_cast<int>(j);
          }
        }
        if (std::isfinite(best)) has_negative(i, 0) = 1.0;
      }
      ad::Var negative = ad::sum_cols(ad::mul(vn, ad::gather_rows(sn, hardest)));
      ad::Var hinge = ad::relu(ad::add_scalar(negative - positive, cfg.margin));
      t.contrastive = ad::mean(ad::mul(hinge, g.constant(has_negative)));
    }
  }
  t.total = t.mse + t.cosine + t.contrastive;
  return t;
}

double map_loss_value(const Matrix& v, const Matrix& s, std::span<const int> identities,
                      const MappingLossConfig& cfg) {
  ad::Graph g(false);
  return map_loss(g.constant(v), g.constant(s), identities, cfg).total.scalar();
}

// ---------------------------------------------------------------------------
// Training

Matrix speech_vectors(const TtsModel& tts, const std::vector<CorpusExample>& corpus,
                      const std::optional<std::filesystem::path>& cache_dir) {
  std::optional<std::filesystem::path> cache_file;
  if (cache_dir) {
    const std::string bytes = tts.to_archive().serialize();
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
    for (const auto& ex : corpus) {
      crc = crc32(crc, reinterpret_cast<const Bytef*>(ex.utterance_id.data()), static_cast<uInt>(ex.utterance_id.size()));
      crc = crc32(crc, reinterpret_cast<const Bytef*>("\n"), 1);
    }
    char name[64];
    std::snprintf(name, sizeof(name), "speech_vectors_%08lx_%zu.f2v", static_cast<unsigned long>(crc), corpus.size());
    cache_file = *cache_dir / name;
    if (std::filesystem::exists(*cache_file)) {
      const Archive cached = Archive::load(*cache_file);
      const Matrix& s = cached.get("speech_vectors");
      if (s.rows() == static_cast<Index>(corpus.size()) && s.cols() == tts.config().speech_dim) return s;
    }
  }
  Matrix out(static_cast<Index>(corpus.size()), tts.config().speech_dim);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    out.row(static_cast<Index>(i)) = tts.encode_speech(compute_mel(corpus[i].waveform)).values;
  }
  if (cache_file) {
    std::filesystem::create_directories(*cache_dir);
    Archive a;
    a.config = {{"kind", "speech_vectors"}};
    a.add("speech_vectors", out);
    a.save(*cache_file);
  }
  return out;
}

FaceTrainResult train_face_encoder(const std::vector<CorpusExample>& corpus, const Matrix& targets,
                                   const FaceEncoderConfig& model_cfg, const FaceTrainConfig& train,
                                   const FaceStepCallback& on_step) {
  train.loss.validate();
  if (corpus.empty()) throw InvalidInput("face training corpus is empty");
  if (targets.rows() != static_cast<Index>(corpus.size()) || targets.cols() != model_cfg.speech_dim) {
    throw InvalidInput("speech vector targets do not match the corpus");
  }
  if (train.steps < 0 || train.batch < 1 || train.augment_shift < 0) throw InvalidInput("invalid training schedule");
  std::vector<int> identity(corpus.size());
  {
    std::map<std::string, int> ids;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if (!corpus[i].face) throw InvalidInput("example without a face: " + corpus[i].utterance_id);
      identity[i] = ids.try_emplace(corpus[i].speaker_id, static_cast<int>(ids.size())).first->second;
    }
    if (train.loss.variant != MappingVariant::kMseCos && ids.size() < 2) {
      throw InvalidInput("negatives need at least two identities");
    }
  }

  FaceEncoder encoder(model_cfg, train.seed);
  Rng rng = Rng::substream(train.seed, 1);
  nn::Adam adam(nn::AdamOptions{train.learning_rate, 0.9, 0.999, 1e-8, train.clip_norm});
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  std::vector<FaceLogRecord> log;
  double running_min = std::numeric_limits<double>::infinity();
  const auto batch_size = std::min<std::size_t>(static_cast<std::size_t>(train.batch), corpus.size());

  for (int step = 0; step < train.steps; ++step) {
    std::vector<std::size_t> batch;
    for (std::size_t b = 0; b < batch_size; ++b) {
      if (cursor == order.size()) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_int(i)]);
        cursor = 0;
      }
      batch.push_back(order[cursor++]);
    }
    ad::Graph g;
    std::vector<ad::Var> faces;
    Matrix s(static_cast<Index>(batch.size()), targets.cols());
    std::vector<int> labels;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const FaceImage& face = *corpus[batch[b]].face;
      if (train.augment_shift > 0) {
        const auto span = static_cast<std::uint64_t>(2 * train.augment_shift + 1);
        const int dx = static_cast<int>(rng.uniform_int(span)) - train.augment_shift;
        const int dy = static_cast<int>(rng.uniform_int(span)) - train.augment_shift;
        faces.push_back(encoder.forward(g, g.constant(face_pixels(translate_face(face, dx, dy)))));
      } else {
        faces.push_back(encoder.forward(g, g.constant(face_pixels(face))));
      }
      s.row(static_cast<Index>(b)) = targets.row(static_cast<Index>(batch[b]));
      labels.push_back(identity[batch[b]]);
    }
    MappingLossTerms t = map_loss(ad::concat_rows(faces), g.constant(s), labels, train.loss);
    const double loss = t.total.scalar();
    if (!std::isfinite(loss)) throw TrainingDiverged(step, "mapping loss is not finite");
    g.backward(t.total);
    adam.step(encoder.parameters());
    running_min = std::min(running_min, loss);
    log.push_back(FaceLogRecord{step, loss, running_min});
    if (on_step) on_step(log.back());
  }
  return FaceTrainResult{std::move(encoder), std::move(log)};
}

double recall_at_1(const Matrix& queries, const Matrix& keys) {
  if (queries.rows() != keys.rows() || queries.cols() != keys.cols() || queries.rows() == 0) {
    throw InvalidInput("recall needs equally shaped, non-empty query and key sets");
  }
  auto normalized = [](const Matrix& m) {
    Matrix out = m;
    for (Index i = 0; i < m.rows(); ++i) {
      const double n = m.row(i).norm();
      if (n == 0.0) throw DegenerateVector("zero-norm vector in retrieval");
      out.row(i) /= n;
    }
    return out;
  };
  const Matrix sim = normalized(queries) * normalized(keys).transpose();
  int hits = 0;
  for (Index i = 0; i < sim.rows(); ++i) {
    Index best = 0;
    sim.row(i).maxCoeff(&best);
    if (best == i) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(sim.rows());
}

}  // namespace f2v
