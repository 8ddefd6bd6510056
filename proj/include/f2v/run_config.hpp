#pragma once

// Layered command-line configuration: defaults < JSON file < flag overrides.

#include "f2v/face.hpp"
#include "f2v/plm.hpp"
#include "f2v/tts.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace f2v {

struct RunConfig {
  std::optional<std::uint64_t> seed;
  std::string corpus;       // training manifest
  std::string eval_corpus;  // held-out manifest
  std::string checkpoint_dir = "checkpoints";
  std::string out_dir = ".";

  TtsConfig tts;
  TtsTrainConfig tts_train;
  // text_dim and n_codes follow the TTS checkpoint.
  PlmConfig plm;
  PlmTrainConfig plm_train;
  // speech_dim follows the TTS checkpoint.
  FaceEncoderConfig face;
  FaceTrainConfig face_train;
  SamplingConfig sampling;
  int phase_iterations = 64;
  std::vector<MappingVariant> ablation_variants{MappingVariant::kMseCos, MappingVariant::kMseCosTriplet,
                                                MappingVariant::kMseCosContrastive};

  nlohmann::json to_json() const;
  // Throws InvalidInput on unknown keys or ill-typed values.
  static RunConfig from_json(const nlohmann::json& j);
  void validate() const;

  // Per-stage seeds; throws InvalidInput when the seed is unset.
  std::uint64_t require_seed() const;
};

// `patch` must only name keys present in `base`; objects merge recursively and
// other values replace. Throws InvalidInput naming the first unknown key.
nlohmann::json merge_checked(const nlohmann::json& base, const nlohmann::json& patch, const std::string& where = "");

// Parses "dotted.key=value"; the value is JSON when it parses as JSON and a
// string otherwise.
std::pair<std::string, nlohmann::json> parse_override(std::string_view assignment);

// Applies one dotted-key override to a config document.
nlohmann::json apply_override(const nlohmann::json& doc, const std::string& key, const nlohmann::json& value);

// Defaults, then the optional config file, then overrides in order.
RunConfig resolve_run_config(const std::optional<nlohmann::json>& file,
                             const std::vector<std::pair<std::string, nlohmann::json>>& overrides);

}  // namespace f2v
