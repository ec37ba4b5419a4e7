#pragma once

#include <json.hpp>

#include "iclcp/lsa_model.hpp"
#include "iclcp/taskgen.hpp"

namespace iclcp {

// JSON mapping of the configuration structs. Missing keys keep their defaults;
// unknown keys are rejected so typos in config files surface as ConfigError.
void to_json(nlohmann::json& j, const GenConfig& cfg);
void from_json(const nlohmann::json& j, GenConfig& cfg);
void to_json(nlohmann::json& j, const TrainConfig& cfg);
void from_json(const nlohmann::json& j, TrainConfig& cfg);

/// Throws ConfigError naming the first key of `j` not in `allowed`.
void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                         const char* section);

}  // namespace iclcp
