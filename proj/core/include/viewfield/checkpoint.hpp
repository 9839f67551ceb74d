#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "viewfield/field.hpp"

namespace viewfield {

/// Model checkpoint container:
///   8-byte magic "VFCKPT01", u64 little-endian header length, JSON header
///   (config, id, anchor, training frames, array sizes), then for every
///   parameter group the parameters, Adam first and second moments as raw
///   little-endian float64, then 512 bytes of occupancy bits.
std::string serialize_model(const LocalFieldModel& model);
LocalFieldModel deserialize_model(const std::string& bytes);

void write_model_checkpoint(const std::filesystem::path& path, const LocalFieldModel& model);
LocalFieldModel read_model_checkpoint(const std::filesystem::path& path);

nlohmann::json to_json(const GridConfig& c);
nlohmann::json to_json(const FieldConfig& c);
GridConfig grid_config_from_json(const nlohmann::json& j);
FieldConfig field_config_from_json(const nlohmann::json& j);

}  // namespace viewfield
