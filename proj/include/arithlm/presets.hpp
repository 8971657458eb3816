#pragma once

#include <string>
#include <vector>

#include "arithlm/config.hpp"
#include "arithlm/model.hpp"
#include "arithlm/tasks.hpp"
#include "arithlm/train.hpp"

namespace arithlm {

enum class SplitKind { Random, VsT, VsV };
std::string to_string(SplitKind k);
SplitKind split_kind_from_string(const std::string& s);

/// A named, fully serializable experiment.
struct ExperimentPreset {
  std::string name;
  std::string description;
  TaskSpec task;
  ModelConfig model;
  TrainConfig train;
  SplitKind split = SplitKind::Random;
  /// Completions replaced with seeded random bits.
  bool random_output = false;
  /// Reports produced after training ("correlation", "amnesic").
  std::vector<std::string> analyses;
};

Json to_json(const ExperimentPreset& p);
ExperimentPreset preset_from_json(const Json& j);

const std::vector<ExperimentPreset>& all_presets();
const ExperimentPreset& find_preset(const std::string& name);

}  // namespace arithlm
