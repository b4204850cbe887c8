#pragma once

#include <string>

#include "hsir/cube_io.hpp"
#include "hsir/degrade.hpp"
#include "hsir/model.hpp"
#include "hsir/train.hpp"

namespace hsir {

// JSON <-> config structs. Unknown keys are rejected nowhere (forward
// compatibility); missing keys fall back to the struct defaults.
std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& json_text);

std::string degradation_spec_to_json(const DegradationSpec& spec);
DegradationSpec degradation_spec_from_json(const std::string& json_text);

/// Full run configuration: {"format_version":1, "model":{...},
/// "train":{...}, "degradation":{...}, "scene":{...}}; every section is
/// optional and defaulted.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    DegradationSpec degradation;
    SyntheticSceneSpec scene;
};
RunConfig run_config_from_json(const std::string& json_text);
std::string run_config_to_json(const RunConfig& rc);

RunConfig load_run_config(const std::string& path);

}  // namespace hsir
