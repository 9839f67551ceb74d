#include "viewfield/field.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace viewfield {

int OccupancyGrid::cell_index(const ContractedPoint& c) {
  auto axis = [](double x) {
    const int i = static_cast<int>(std::floor(x * kResolution));
    return std::clamp(i, 0, kResolution - 1);
  };
  return cell_index(axis(c.theta), axis(c.phi), axis(c.rho));
}

void OccupancyGrid::fill(bool value) {
  if (value) {
    bits_.set();
  } else {
    bits_.reset();
  }
}

std::string_view param_group_name(ParamGroup group) {
  switch (group) {
    case ParamGroup::Grid: return "grid";
    case ParamGroup::ProposalGrid: return "proposal_grid";
    case ParamGroup::DensityMlp: return "density_mlp";
    case ParamGroup::ColorMlp: return "color_mlp";
    case ParamGroup::ProposalMlp: return "proposal_mlp";
  }
  return "unknown";
}

void ParamGradients::set_zero() {
  for (auto& g : groups) std::fill(g.begin(), g.end(), 0.0);
}

bool ParamGradients::all_finite() const {
  for (const auto& g : groups) {
    for (double v : g) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

std::span<double> LocalFieldModel::params(ParamGroup g) {
  switch (g) {
    case ParamGroup::Grid: return grid.params();
    case ParamGroup::ProposalGrid: return proposal_grid.params();
    case ParamGroup::DensityMlp: return density_mlp.params();
    case ParamGroup::ColorMlp: return color_mlp.params();
    case ParamGroup::ProposalMlp: return proposal_mlp.params();
  }
  throw std::invalid_argument("unknown parameter group");
}

std::span<const double> LocalFieldModel::params(ParamGroup g) const {
  return const_cast<LocalFieldModel*>(this)->params(g);
}

ParamGradients LocalFieldModel::zero_gradients() const {
  ParamGradients grads;
  for (ParamGroup g : kParamGroups) grads.groups[static_cast<int>(g)].assign(params(g).size(), 0.0);
  return grads;
}

std::size_t LocalFieldModel::parameter_count() const {
  std::size_t n = 0;
  for (ParamGroup g : kParamGroups) n += params(g).size();
  return n;
}

std::uint64_t LocalFieldModel::parameter_checksum() const {
  std::uint64_t h = 1469598103934665603ull;
  for (ParamGroup g : kParamGroups) {
    const auto p = params(g);
    const auto* bytes = reinterpret_cast<const unsigned char*>(p.data());
    for (std::size_t i = 0; i < p.size_bytes(); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  }
  return h;
}

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

LocalFieldModel init_model(int id, int anchor_keyframe, const FieldConfig& config, std::uint64_t rng_seed) {
  LocalFieldModel m;
  m.id = id;
  m.anchor_keyframe = anchor_keyframe;
  m.config = config;
  m.grid = MultiResGrid(config.grid);
  m.proposal_grid = MultiResGrid(config.proposal_grid);

  m.density_mlp = Mlp({m.grid.output_dim(), config.density_hidden, 1 + config.geo_features});
  std::vector<int> color_dims{config.geo_features + 3};
  for (int i = 0; i < config.color_hidden_layers; ++i) color_dims.push_back(config.color_hidden);
  color_dims.push_back(3);
  m.color_mlp = Mlp(color_dims);
  m.proposal_mlp = Mlp({m.proposal_grid.output_dim(), config.proposal_hidden, 1});

  std::mt19937_64 rng(rng_seed);
  m.grid.init_uniform(rng, config.init_feature_scale);
  m.proposal_grid.init_uniform(rng, config.init_feature_scale);
  m.density_mlp.init_fan_in(rng);
  m.color_mlp.init_fan_in(rng);
  m.proposal_mlp.init_fan_in(rng);

  m.training_frames.insert(anchor_keyframe);
  for (ParamGroup g : kParamGroups) {
    const auto n = m.params(g).size();
    m.optimizer.first[static_cast<int>(g)].assign(n, 0.0);
    m.optimizer.second[static_cast<int>(g)].assign(n, 0.0);
  }
  return m;
}

void main_field_forward(const LocalFieldModel& model, std::span<const ContractedPoint> points,
                        const Matrix& view_dirs, MainFieldPass& pass) {
  const auto n = static_cast<Eigen::Index>(points.size());
  const int enc_dim = model.grid.output_dim();
  const int geo = model.config.geo_features;
  pass.points.assign(points.begin(), points.end());
  pass.encoded.resize(enc_dim, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    model.grid.encode(points[i], std::span<double>(pass.encoded.col(i).data(), enc_dim));
  }
  pass.density_out = model.density_mlp.forward(pass.encoded, &pass.density_cache);
  pass.sigma.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) pass.sigma[i] = softplus(pass.density_out(0, i));

  Matrix color_in(geo + 3, n);
  color_in.topRows(geo) = pass.density_out.bottomRows(geo);
  color_in.bottomRows(3) = view_dirs;
  pass.color_out = model.color_mlp.forward(color_in, &pass.color_cache);
  pass.rgb = pass.color_out.unaryExpr([](double x) { return sigmoid(x); });
}

void main_field_backward(const LocalFieldModel& model, const MainFieldPass& pass,
                         std::span<const double> d_sigma, const Matrix& d_rgb, ParamGradients& grads) {
  const auto n = static_cast<Eigen::Index>(pass.points.size());
  const int enc_dim = model.grid.output_dim();
  const int geo = model.config.geo_features;

  Matrix d_color_out = d_rgb.cwiseProduct(pass.rgb.cwiseProduct((1.0 - pass.rgb.array()).matrix()));
  Matrix d_color_in;
  model.color_mlp.backward(pass.color_cache, d_color_out, grads.of(ParamGroup::ColorMlp), &d_color_in);

  Matrix d_density_out(1 + geo, n);
  for (Eigen::Index i = 0; i < n; ++i) d_density_out(0, i) = d_sigma[i] * sigmoid(pass.density_out(0, i));
  d_density_out.bottomRows(geo) = d_color_in.topRows(geo);
  Matrix d_encoded;
  model.density_mlp.backward(pass.density_cache, d_density_out, grads.of(ParamGroup::DensityMlp), &d_encoded);

  auto d_grid = grads.of(ParamGroup::Grid);
  for (Eigen::Index i = 0; i < n; ++i) {
    model.grid.backward(pass.points[i], std::span<const double>(d_encoded.col(i).data(), enc_dim), d_grid);
  }
}

void proposal_field_forward(const LocalFieldModel& model, std::span<const ContractedPoint> points,
                            ProposalFieldPass& pass) {
  const auto n = static_cast<Eigen::Index>(points.size());
  const int enc_dim = model.proposal_grid.output_dim();
  pass.points.assign(points.begin(), points.end());
  pass.encoded.resize(enc_dim, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    model.proposal_grid.encode(points[i], std::span<double>(pass.encoded.col(i).data(), enc_dim));
  }
  const Matrix out = model.proposal_mlp.forward(pass.encoded, &pass.cache);
  pass.logit = out.row(0).transpose();
  pass.sigma = pass.logit.unaryExpr([](double x) { return softplus(x); });
}

void proposal_field_backward(const LocalFieldModel& model, const ProposalFieldPass& pass,
                             std::span<const double> d_sigma, ParamGradients& grads) {
  const auto n = static_cast<Eigen::Index>(pass.points.size());
  const int enc_dim = model.proposal_grid.output_dim();
  Matrix d_out(1, n);
  for (Eigen::Index i = 0; i < n; ++i) d_out(0, i) = d_sigma[i] * sigmoid(pass.logit[i]);
  Matrix d_encoded;
  model.proposal_mlp.backward(pass.cache, d_out, grads.of(ParamGroup::ProposalMlp), &d_encoded);
  auto d_grid = grads.of(ParamGroup::ProposalGrid);
  for (Eigen::Index i = 0; i < n; ++i) {
    model.proposal_grid.backward(pass.points[i], std::span<const double>(d_encoded.col(i).data(), enc_dim),
                                 d_grid);
  }
}

FieldSample query(const LocalFieldModel& model, const ContractedPoint& c, const Vec3& view_dir) {
  MainFieldPass pass;
  Matrix dirs = view_dir;
  main_field_forward(model, std::span<const ContractedPoint>(&c, 1), dirs, pass);
  return {pass.sigma[0], pass.rgb.col(0)};
}

double query_proposal(const LocalFieldModel& model, const ContractedPoint& c) {
  ProposalFieldPass pass;
  proposal_field_forward(model, std::span<const ContractedPoint>(&c, 1), pass);
  return pass.sigma[0];
}

namespace {

// Where a target vertex lands in the source's contracted space. Vertices on
// the rho = 0 face sit at infinity and only rotate; the rho = 1 face is the
// origin, nudged off it so its direction survives the round trip.
ContractedPoint map_vertex(const ContractedPoint& vertex, const Pose& target_to_source) {
  if (vertex.rho <= 0.0) {
    const Vec3 dir = from_contracted({vertex.theta, vertex.phi, 0.5});
    ContractedPoint out = to_contracted(target_to_source.rotate(dir));
    out.rho = 0.0;
    return out;
  }
  ContractedPoint v = vertex;
  v.rho = std::min(v.rho, 1.0 - 1e-12);
  return to_contracted(target_to_source.transform_point(from_contracted(v)));
}

void propagate_grid(const MultiResGrid& source, MultiResGrid& target, const Pose& relative_pose) {
  if (!(source.config() == target.config())) {
    throw std::invalid_argument("propagate_features: grid configurations differ");
  }
  const int features = target.features_per_level();
  for (int l = 0; l < target.num_levels(); ++l) {
    const GridLevel& level = target.levels()[l];
    if (!level.dense) continue;
    const auto& res = level.resolution;
    auto dst = target.params();
    for (int k = 0; k <= res[2]; ++k) {
      for (int j = 0; j <= res[1]; ++j) {
        for (int i = 0; i < res[0]; ++i) {
          const ContractedPoint src_c = map_vertex(target.vertex_coordinate(l, i, j, k), relative_pose);
          const std::size_t offset = level.offset + target.vertex_slot(l, i, j, k) * features;
          source.encode_level(l, src_c, dst.subspan(offset, features));
        }
      }
    }
  }
}

}  // namespace

void propagate_features(const LocalFieldModel& source, LocalFieldModel& target, const Pose& relative_pose) {
  if (!(source.config == target.config)) {
    throw std::invalid_argument("propagate_features: field configurations differ");
  }
  propagate_grid(source.grid, target.grid, relative_pose);
  propagate_grid(source.proposal_grid, target.proposal_grid, relative_pose);
  target.density_mlp = source.density_mlp;
  target.color_mlp = source.color_mlp;
  target.proposal_mlp = source.proposal_mlp;
}

void mark_occupancy(LocalFieldModel& model, std::span<const WeightedSample> samples, double threshold) {
  for (const auto& s : samples) {
    if (s.weight > threshold) model.occupancy.mark(OccupancyGrid::cell_index(s.point));
  }
}

void adam_step(LocalFieldModel& model, const ParamGradients& grads, const AdamConfig& config) {
  AdamState& st = model.optimizer;
  st.step += 1;
  const double t = static_cast<double>(st.step);
  const double bias1 = 1.0 - std::pow(config.beta1, t);
  const double bias2 = 1.0 - std::pow(config.beta2, t);
  for (ParamGroup g : kParamGroups) {
    const int gi = static_cast<int>(g);
    const double lr = is_grid_group(g) ? config.lr_grid : config.lr_mlp;
    auto p = model.params(g);
    auto grad = grads.of(g);
    auto& m = st.first[gi];
    auto& v = st.second[gi];
    if (grad.size() != p.size() || m.size() != p.size()) {
      throw std::invalid_argument("adam_step: gradient layout mismatch");
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grad[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
      p[i] -= lr * (m[i] / bias1) / (std::sqrt(v[i] / bias2) + config.eps);
    }
  }
}

}  // namespace viewfield
