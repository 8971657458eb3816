#pragma once

#include <map>
#include <string>

#include <json.hpp>

#include "arithlm/model.hpp"
#include "arithlm/tasks.hpp"
#include "arithlm/train.hpp"

namespace arithlm {

using Json = nlohmann::ordered_json;

Json to_json(const ModelConfig& c);
Json to_json(const TaskSpec& t);
Json to_json(const TrainConfig& c);
ModelConfig model_config_from_json(const Json& j);
TaskSpec task_from_json(const Json& j);
TrainConfig train_config_from_json(const Json& j);

/// Flat "section.key = value" file; '#' starts a comment.
using KeyValues = std::map<std::string, std::string>;
KeyValues parse_key_values(const std::string& text);
KeyValues read_key_value_file(const std::string& path);

/// Applies "task.*", "model.*" and "train.*" keys. Unknown keys are a ConfigError.
void apply_key_values(const KeyValues& kv, TaskSpec& task, ModelConfig& model, TrainConfig& train,
                      std::string* split = nullptr);

}  // namespace arithlm
