#include "viewfield/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace viewfield {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'V', 'F', 'C', 'K', 'P', 'T', '0', '1'};

void put_bytes(std::string& out, const void* p, std::size_t n) { out.append(static_cast<const char*>(p), n); }

void put_doubles(std::string& out, std::span<const double> v) { put_bytes(out, v.data(), v.size_bytes()); }

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  void read(void* p, std::size_t n) {
    if (pos_ + n > bytes_.size()) throw std::runtime_error("checkpoint truncated");
    std::memcpy(p, bytes_.data() + pos_, n);
    pos_ += n;
  }
  void read_doubles(std::span<double> v) { read(v.data(), v.size_bytes()); }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

nlohmann::json to_json(const GridConfig& c) {
  return {{"levels", c.levels},
          {"features_per_level", c.features_per_level},
          {"base_resolution", c.base_resolution},
          {"growth", c.growth},
          {"log2_table_size", c.log2_table_size}};
}

nlohmann::json to_json(const FieldConfig& c) {
  return {{"grid", to_json(c.grid)},
          {"proposal_grid", to_json(c.proposal_grid)},
          {"density_hidden", c.density_hidden},
          {"geo_features", c.geo_features},
          {"color_hidden", c.color_hidden},
          {"color_hidden_layers", c.color_hidden_layers},
          {"proposal_hidden", c.proposal_hidden},
          {"init_feature_scale", c.init_feature_scale}};
}

GridConfig grid_config_from_json(const nlohmann::json& j) {
  GridConfig c;
  c.levels = j.at("levels").get<int>();
  c.features_per_level = j.at("features_per_level").get<int>();
  c.base_resolution = j.at("base_resolution").get<int>();
  c.growth = j.at("growth").get<double>();
  c.log2_table_size = j.at("log2_table_size").get<int>();
  return c;
}

FieldConfig field_config_from_json(const nlohmann::json& j) {
  FieldConfig c;
  c.grid = grid_config_from_json(j.at("grid"));
  c.proposal_grid = grid_config_from_json(j.at("proposal_grid"));
  c.density_hidden = j.at("density_hidden").get<int>();
  c.geo_features = j.at("geo_features").get<int>();
  c.color_hidden = j.at("color_hidden").get<int>();
  c.color_hidden_layers = j.at("color_hidden_layers").get<int>();
  c.proposal_hidden = j.at("proposal_hidden").get<int>();
  c.init_feature_scale = j.at("init_feature_scale").get<double>();
  return c;
}

std::string serialize_model(const LocalFieldModel& model) {
  nlohmann::json header;
  header["format"] = "viewfield-model";
  header["version"] = 1;
  header["id"] = model.id;
  header["anchor_keyframe"] = model.anchor_keyframe;
  header["config"] = to_json(model.config);
  header["training_frames"] = std::vector<int>(model.training_frames.begin(), model.training_frames.end());
  header["adam_step"] = model.optimizer.step;
  nlohmann::json groups = nlohmann::json::array();
  for (ParamGroup g : kParamGroups) {
    groups.push_back({{"name", param_group_name(g)}, {"count", model.params(g).size()}});
  }
  header["groups"] = groups;
  header["occupancy_cells"] = OccupancyGrid::kCells;
  const std::string text = header.dump();

  std::string out;
  put_bytes(out, kMagic, sizeof(kMagic));
  const std::uint64_t len = text.size();
  put_bytes(out, &len, sizeof(len));
  out += text;
  for (ParamGroup g : kParamGroups) {
    const int gi = static_cast<int>(g);
    put_doubles(out, model.params(g));
    put_doubles(out, model.optimizer.first[gi]);
    put_doubles(out, model.optimizer.second[gi]);
  }
  std::array<std::uint8_t, OccupancyGrid::kCells / 8> bits{};
  for (int c = 0; c < OccupancyGrid::kCells; ++c) {
    if (model.occupancy.occupied(c)) bits[c / 8] |= static_cast<std::uint8_t>(1u << (c % 8));
  }
  put_bytes(out, bits.data(), bits.size());
  return out;
}

LocalFieldModel deserialize_model(const std::string& bytes) {
  Reader in(bytes);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw std::runtime_error("not a viewfield model checkpoint");
  std::uint64_t len = 0;
  in.read(&len, sizeof(len));
  std::string text(len, '\0');
  in.read(text.data(), len);
  const nlohmann::json header = nlohmann::json::parse(text);

  LocalFieldModel model = init_model(header.at("id").get<int>(), header.at("anchor_keyframe").get<int>(),
                                     field_config_from_json(header.at("config")), 0);
  model.training_frames.clear();
  for (int f : header.at("training_frames")) model.training_frames.insert(f);
  model.optimizer.step = header.at("adam_step").get<std::int64_t>();
  const auto& groups = header.at("groups");
  if (groups.size() != kParamGroups.size()) throw std::runtime_error("checkpoint group count mismatch");
  for (ParamGroup g : kParamGroups) {
    const int gi = static_cast<int>(g);
    if (groups[gi].at("count").get<std::size_t>() != model.params(g).size()) {
      throw std::runtime_error("checkpoint parameter count does not match its config");
    }
    in.read_doubles(model.params(g));
    in.read_doubles(model.optimizer.first[gi]);
    in.read_doubles(model.optimizer.second[gi]);
  }
  std::array<std::uint8_t, OccupancyGrid::kCells / 8> bits{};
  in.read(bits.data(), bits.size());
  model.occupancy.fill(false);
  for (int c = 0; c < OccupancyGrid::kCells; ++c) {
    if (bits[c / 8] & (1u << (c % 8))) model.occupancy.mark(c);
  }
  if (!in.at_end()) throw std::runtime_error("trailing bytes in checkpoint");
  return model;
}

void write_model_checkpoint(const std::filesystem::path& path, const LocalFieldModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const std::string bytes = serialize_model(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

LocalFieldModel read_model_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return deserialize_model(buffer.str());
}

}  // namespace viewfield
