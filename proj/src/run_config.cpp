#include "f2v/run_config.hpp"

namespace f2v {

namespace {

using nlohmann::json;

json tts_train_json(const TtsTrainConfig& c) {
  return {{"steps", c.steps}, {"batch", c.batch}, {"learning_rate", c.learning_rate}, {"clip_norm", c.clip_norm}};
}

json plm_train_json(const PlmTrainConfig& c) {
  return {{"steps", c.steps}, {"batch", c.batch}, {"learning_rate", c.learning_rate}, {"clip_norm", c.clip_norm}};
}

json face_train_json(const FaceTrainConfig& c) {
  return {{"steps", c.steps},
          {"batch", c.batch},
          {"learning_rate", c.learning_rate},
          {"clip_norm", c.clip_norm},
          {"augment_shift", c.augment_shift},
          {"variant", to_string(c.loss.variant)},
          {"temperature", c.loss.temperature},
          {"margin", c.loss.margin},
          {"max_negatives", c.loss.max_negatives}};
}

json plm_json(const PlmConfig& c) {
  json j = c.to_json();
  j.erase("text_dim");
  j.erase("n_codes");
  return j;
}

json face_json(const FaceEncoderConfig& c) {
  json j = c.to_json();
  j.erase("speech_dim");
  return j;
}

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return true;
  return a.type() == b.type();
}

}  // namespace

json RunConfig::to_json() const {
  std::vector<std::string> variants;
  for (MappingVariant v : ablation_variants) variants.push_back(to_string(v));
  return {{"seed", seed ? json(*seed) : json(nullptr)},
          {"corpus", corpus},
          {"eval_corpus", eval_corpus},
          {"checkpoint_dir", checkpoint_dir},
          {"out_dir", out_dir},
          {"tts", tts.to_json()},
          {"tts_train", tts_train_json(tts_train)},
          {"plm", plm_json(plm)},
          {"plm_train", plm_train_json(plm_train)},
          {"face", face_json(face)},
          {"face_train", face_train_json(face_train)},
          {"sampling", {{"top_k", sampling.top_k}, {"temperature", sampling.temperature}}},
          {"phase_iterations", phase_iterations},
          {"ablation_variants", variants}};
}

RunConfig RunConfig::from_json(const json& j) {
  // Merging onto the defaults rejects unknown keys at every level.
  const json doc = merge_checked(RunConfig{}.to_json(), j);
  RunConfig c;
  try {
    if (!doc["seed"].is_null()) c.seed = doc["seed"].get<std::uint64_t>();
    c.corpus = doc["corpus"].get<std::string>();
    c.eval_corpus = doc["eval_corpus"].get<std::string>();
    c.checkpoint_dir = doc["checkpoint_dir"].get<std::string>();
    c.out_dir = doc["out_dir"].get<std::string>();
    c.tts = TtsConfig::from_json(doc["tts"]);

    const json& tt = doc["tts_train"];
    c.tts_train.steps = tt["steps"].get<int>();
    c.tts_train.batch = tt["batch"].get<int>();
    c.tts_train.learning_rate = tt["learning_rate"].get<double>();
    c.tts_train.clip_norm = tt["clip_norm"].get<double>();

    json plm = doc["plm"];
    plm["text_dim"] = c.tts.text_dim;
    plm["n_codes"] = c.tts.n_codes;
    c.plm = PlmConfig::from_json(plm);
    const json& pt = doc["plm_train"];
    c.plm_train.steps = pt["steps"].get<int>();
    c.plm_train.batch = pt["batch"].get<int>();
    c.plm_train.learning_rate = pt["learning_rate"].get<double>();
    c.plm_train.clip_norm = pt["clip_norm"].get<double>();

    json face = doc["face"];
    face["speech_dim"] = c.tts.speech_dim;
    c.face = FaceEncoderConfig::from_json(face);
    const json& ft = doc["face_train"];
    c.face_train.steps = ft["steps"].get<int>();
    c.face_train.batch = ft["batch"].get<int>();
    c.face_train.learning_rate = ft["learning_rate"].get<double>();
    c.face_train.clip_norm = ft["clip_norm"].get<double>();
    c.face_train.augment_shift = ft["augment_shift"].get<int>();
    c.face_train.loss.variant = parse_mapping_variant(ft["variant"].get<std::string>());
    c.face_train.loss.temperature = ft["temperature"].get<double>();
    c.face_train.loss.margin = ft["margin"].get<double>();
    c.face_train.loss.max_negatives = ft["max_negatives"].get<int>();

    c.sampling.top_k = doc["sampling"]["top_k"].get<int>();
    c.sampling.temperature = doc["sampling"]["temperature"].get<double>();
    c.phase_iterations = doc["phase_iterations"].get<int>();
    c.ablation_variants.clear();
    for (const json& v : doc["ablation_variants"]) c.ablation_variants.push_back(parse_mapping_variant(v.get<std::string>()));
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("invalid config value: ") + e.what());
  }
  c.validate();
  return c;
}

void RunConfig::validate() const {
  tts.validate();
  plm.validate();
  face.validate();
  face_train.loss.validate();
  auto positive = [](int v, const char* what) {
    if (v < 1) throw InvalidInput(std::string(what) + " must be positive");
  };
  positive(tts_train.steps, "tts_train.steps");
  positive(tts_train.batch, "tts_train.batch");
  positive(plm_train.steps, "plm_train.steps");
  positive(plm_train.batch, "plm_train.batch");
  positive(face_train.steps, "face_train.steps");
  positive(face_train.batch, "face_train.batch");
  positive(sampling.top_k, "sampling.top_k");
  positive(phase_iterations, "phase_iterations");
  if (!(sampling.temperature > 0.0)) throw InvalidInput("sampling.temperature must be positive");
  if (face_train.augment_shift < 0) throw InvalidInput("face_train.augment_shift must be >= 0");
  if (ablation_variants.empty()) throw InvalidInput("ablation_variants is empty");
}

std::uint64_t RunConfig::require_seed() const {
  if (!seed) throw InvalidInput("a seed is required (--seed or \"seed\" in the config file)");
  return *seed;
}

json merge_checked(const json& base, const json& patch, const std::string& where) {
  if (!patch.is_object()) throw InvalidInput("config" + (where.empty() ? "" : " section " + where) + " must be an object");
  json out = base;
  for (const auto& [key, value] : patch.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!base.contains(key)) throw InvalidInput("unknown config key: " + path);
    const json& current = base[key];
    if (current.is_object()) {
      out[key] = merge_checked(current, value, path);
    } else if (current.is_null() || value.is_null() || same_kind(current, value)) {
      out[key] = value;
    } else {
      throw InvalidInput("config key " + path + " expects a " + std::string(current.type_name()) + ", got " +
                         value.type_name());
    }
  }
  return out;
}

std::pair<std::string, json> parse_override(std::string_view assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) throw InvalidInput("override must look like key=value");
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  return {key, value};
}

json apply_override(const json& doc, const std::string& key, const json& value) {
  json patch = value;
  std::size_t end = key.size();
  while (true) {
    const std::size_t dot = key.rfind('.', end - 1);
    const std::size_t begin = dot == std::string::npos ? 0 : dot + 1;
    const std::string part = key.substr(begin, end - begin);
    if (part.empty()) throw InvalidInput("malformed override key: " + key);
    patch = json{{part, patch}};
    if (dot == std::string::npos) break;
    end = dot;
  }
  return merge_checked(doc, patch);
}

RunConfig resolve_run_config(const std::optional<json>& file, const std::vector<std::pair<std::string, json>>& overrides) {
  json doc = RunConfig{}.to_json();
  if (file) doc = merge_checked(doc, *file);
  for (const auto& [key, value] : overrides) doc = apply_override(doc, key, value);
  return RunConfig::from_json(doc);
}

}  // namespace f2v
