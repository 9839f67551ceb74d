#include "viewfield/render.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace viewfield {

double RaySpacing::to_metric(double s) const {
  if (s >= 1.0) return far;
  const double t = (1.0 + near) / (1.0 - s) - 1.0;
  return std::min(t, far);
}

double RaySpacing::to_normalized(double t) const { return 1.0 - (1.0 + near) / (1.0 + t); }

namespace {

// Stratified or deterministic positions u_0 = 0 < u_1 < ... < u_n = 1.
std::vector<double> quantiles(int n, std::mt19937_64* jitter) {
  std::vector<double> u(n + 1);
  u[0] = 0.0;
  u[n] = 1.0;
  if (jitter && n >= 2) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int k = 1; k < n; ++k) u[k] = (k - 1 + unit(*jitter)) / (n - 1);
  } else {
    for (int k = 1; k < n; ++k) u[k] = static_cast<double>(k) / n;
  }
  return u;
}

}  // namespace

std::vector<double> sample_uniform_contracted(int n, std::mt19937_64* jitter) {
  if (n < 1) throw std::invalid_argument("sample_uniform_contracted: need at least one interval");
  return quantiles(n, jitter);
}

std::vector<double> resample_from_proposal(std::span<const double> proposal_weights,
                                           std::span<const double> proposal_boundaries, int n, double floor,
                                           std::mt19937_64* jitter) {
  if (n < 1) throw std::invalid_argument("resample_from_proposal: need at least one interval");
  const std::size_t m = proposal_weights.size();
  if (m == 0 || proposal_boundaries.size() != m + 1) {
    throw std::invalid_argument("resample_from_proposal: boundaries must have one more entry than weights");
  }
  const double lo = proposal_boundaries.front();
  const double hi = proposal_boundaries.back();
  const double span = hi - lo;

  std::vector<double> cdf(m + 1, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    const double width = proposal_boundaries[j + 1] - proposal_boundaries[j];
    const double mass = std::max(proposal_weights[j], 0.0) + floor * width / span;
    cdf[j + 1] = cdf[j] + mass;
  }
  const double total = cdf[m];
  if (!(total > 0.0)) throw std::invalid_argument("resample_from_proposal: empty histogram and zero floor");
  for (double& c : cdf) c /= total;

  const std::vector<double> u = quantiles(n, jitter);
  std::vector<double> out(n + 1);
  out[0] = lo;
  out[n] = hi;
  std::size_t j = 0;
  for (int k = 1; k < n; ++k) {
    while (j + 1 < m && cdf[j + 1] <= u[k]) ++j;
    const double mass = cdf[j + 1] - cdf[j];
    const double frac = mass > 0.0 ? std::clamp((u[k] - cdf[j]) / mass, 0.0, 1.0) : 0.0;
    out[k] = proposal_boundaries[j] + frac * (proposal_boundaries[j + 1] - proposal_boundaries[j]);
  }
  return out;
}

RenderOutput composite(const RaySamples& samples, const RaySpacing& spacing, const Vec3& background) {
  const int n = samples.intervals();
  RenderOutput out;
  out.weights.resize(n);
  out.transmittance.resize(n);
  double transmittance = 1.0;
  Vec3 color = Vec3::Zero();
  double depth_sum = 0.0;
  double weight_sum = 0.0;
  double t_lo = spacing.to_metric(samples.boundaries[0]);
  for (int i = 0; i < n; ++i) {
    const double t_hi = spacing.to_metric(samples.boundaries[i + 1]);
    const double delta = t_hi - t_lo;
    t_lo = t_hi;
    const double alpha = -std::expm1(-samples.sigma[i] * delta);
    const double w = transmittance * alpha;
    out.transmittance[i] = transmittance;
    out.weights[i] = w;
    if (!samples.rgb.empty()) color += w * samples.rgb[i];
    depth_sum += w * spacing.to_metric(samples.midpoint(i));
    weight_sum += w;
    transmittance *= 1.0 - alpha;
  }
  out.opacity = weight_sum;
  out.color = color + (1.0 - weight_sum) * background;
  out.depth = depth_sum / std::max(weight_sum, 1e-10);
  return out;
}

void composite_backward(const RaySamples& samples, const RaySpacing& spacing, const Vec3& background,
                        const RenderOutput& out, const Vec3& d_color, double d_depth,
                        std::span<const double> d_weights, std::span<double> d_sigma, std::span<Vec3> d_rgb) {
  const int n = samples.intervals();
  const double weight_sum = out.opacity;
  const double denom = std::max(weight_sum, 1e-10);
  const double depth_sum = out.depth * denom;
  const double d_denom = weight_sum > 1e-10 ? -depth_sum / (denom * denom) : 0.0;

  // Total derivative of the loss w.r.t. each weight.
  std::vector<double> g(n);
  std::vector<double> alpha(n), delta(n);
  double t_lo = spacing.to_metric(samples.boundaries[0]);
  for (int i = 0; i < n; ++i) {
    const double t_hi = spacing.to_metric(samples.boundaries[i + 1]);
    delta[i] = t_hi - t_lo;
    t_lo = t_hi;
    alpha[i] = -std::expm1(-samples.sigma[i] * delta[i]);
    const Vec3 c = samples.rgb.empty() ? Vec3::Zero() : samples.rgb[i];
    double gi = d_color.dot(c - background);
    gi += d_depth * (spacing.to_metric(samples.midpoint(i)) / denom + d_denom);
    if (!d_weights.empty()) gi += d_weights[i];
    g[i] = gi;
    if (!d_rgb.empty()) d_rgb[i] = out.weights[i] * d_color;
  }
  // d w_k / d alpha_i = T_i (k == i), -T_i alpha_k prod_{i<j<k}(1 - alpha_j) (k > i).
  double suffix = 0.0;
  for (int i = n - 1; i >= 0; --i) {
    const double d_alpha = out.transmittance[i] * (g[i] - suffix);
    d_sigma[i] = d_alpha * delta[i] * std::exp(-samples.sigma[i] * delta[i]);
    suffix = g[i] * alpha[i] + (1.0 - alpha[i]) * suffix;
  }
}

double loss_rgb(std::span<const Vec3> predicted, std::span<const Vec3> target, std::span<Vec3> d_predicted) {
  if (predicted.size() != target.size()) throw std::invalid_argument("loss_rgb: batch size mismatch");
  if (predicted.empty()) return 0.0;
  const double inv = 1.0 / static_cast<double>(predicted.size());
  double sum = 0.0;
  for (std::size_t r = 0; r < predicted.size(); ++r) {
    const Vec3 diff = predicted[r] - target[r];
    sum += diff.squaredNorm();
    if (!d_predicted.empty()) d_predicted[r] = 2.0 * inv * diff;
  }
  return sum * inv;
}

double loss_distortion(std::span<const double> weights, std::span<const double> boundaries,
                       std::span<double> d_weights) {
  const std::size_t n = weights.size();
  if (boundaries.size() != n + 1) throw std::invalid_argument("loss_distortion: boundary count mismatch");
  double total_w = 0.0, total_wm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total_w += weights[i];
    total_wm += weights[i] * 0.5 * (boundaries[i] + boundaries[i + 1]);
  }
  // Boundaries are sorted, so |m_i - m_j| splits into prefix and suffix sums.
  double before_w = 0.0, before_wm = 0.0;
  double pairwise = 0.0, self = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weights[i];
    const double m = 0.5 * (boundaries[i] + boundaries[i + 1]);
    const double width = boundaries[i + 1] - boundaries[i];
    const double after_w = total_w - before_w - w;
    const double after_wm = total_wm - before_wm - w * m;
    const double spread = (m * before_w - before_wm) + (after_wm - m * after_w);
    pairwise += w * spread;
    self += w * w * width;
    if (!d_weights.empty()) d_weights[i] = 2.0 * spread + (2.0 / 3.0) * w * width;
    before_w += w;
    before_wm += w * m;
  }
  return pairwise + self / 3.0;
}

namespace {

// Indices [first, last] of proposal intervals overlapping (lo, hi) with positive measure.
std::pair<std::ptrdiff_t, std::ptrdiff_t> overlap_range(std::span<const double> t_hat, double lo, double hi) {
  // Interval j = [t_hat[j], t_hat[j+1]) overlaps iff t_hat[j] < hi and t_hat[j+1] > lo.
  const auto first = std::upper_bound(t_hat.begin() + 1, t_hat.end(), lo) - (t_hat.begin() + 1);
  const auto last = (std::lower_bound(t_hat.begin(), t_hat.end() - 1, hi) - t_hat.begin()) - 1;
  return {first, last};
}

}  // namespace

double bound(std::span<const double> proposal_boundaries, std::span<const double> proposal_weights, double lo,
             double hi) {
  if (proposal_boundaries.size() != proposal_weights.size() + 1) {
    throw std::invalid_argument("bound: boundary count mismatch");
  }
  if (!(hi > lo)) return 0.0;
  const auto [first, last] = overlap_range(proposal_boundaries, lo, hi);
  double sum = 0.0;
  for (auto j = first; j <= last; ++j) sum += proposal_weights[j];
  return sum;
}

double loss_proposal(std::span<const double> boundaries, std::span<const double> weights,
                     std::span<const double> proposal_boundaries, std::span<const double> proposal_weights,
                     std::span<double> d_proposal_weights) {
  const std::size_t n = weights.size();
  const std::size_t m = proposal_weights.size();
  if (boundaries.size() != n + 1 || proposal_boundaries.size() != m + 1) {
    throw std::invalid_argument("loss_proposal: boundary count mismatch");
  }
  std::vector<double> diff;
  if (!d_proposal_weights.empty()) diff.assign(m + 1, 0.0);

  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(boundaries[i + 1] > boundaries[i])) continue;
    const auto [first, last] = overlap_range(proposal_boundaries, boundaries[i], boundaries[i + 1]);
    // Direct sums, not prefix differences, so identical partitions give exactly zero.
    double b = 0.0;
    for (auto j = first; j <= last; ++j) b += proposal_weights[j];
    const double excess = std::max(0.0, weights[i] - b);
    loss += excess * excess;
    if (!diff.empty() && excess > 0.0 && last >= first) {
      diff[first] -= 2.0 * excess;
      diff[last + 1] += 2.0 * excess;
    }
  }
  if (!d_proposal_weights.empty()) {
    double running = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      running += diff[j];
      d_proposal_weights[j] = running;
    }
  }
  return loss;
}

DepthLoss loss_depth(std::span<const double> predicted, std::span<const double> target,
                     std::span<const std::uint8_t> mask, std::span<double> d_predicted) {
  if (predicted.size() != target.size() || predicted.size() != mask.size()) {
    throw std::invalid_argument("loss_depth: batch size mismatch");
  }
  const auto valid = std::count_if(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; });
  if (!d_predicted.empty()) std::fill(d_predicted.begin(), d_predicted.end(), 0.0);
  if (valid == 0) return {0.0, true};
  const double inv = 1.0 / static_cast<double>(valid);
  double sum = 0.0;
  for (std::size_t r = 0; r < predicted.size(); ++r) {
    if (!mask[r]) continue;
    const double diff = predicted[r] - target[r];
    sum += std::abs(diff);
    if (!d_predicted.empty()) d_predicted[r] = diff > 0.0 ? inv : (diff < 0.0 ? -inv : 0.0);
  }
  return {sum * inv, false};
}

double loss_total(const LossParts& parts, const LossWeights& weights) {
  double total = parts.rgb + weights.distortion * parts.distortion + weights.proposal * parts.proposal;
  if (!weights.rgb_only) total += weights.depth * parts.depth;
  return total;
}

namespace {

RaySpacing spacing_of(const RenderConfig& config) { return {config.near, config.far}; }

// Midpoint sample positions of every ray, in contracted coordinates.
void midpoint_samples(std::span<const Ray> rays, std::span<const double> bounds, int intervals,
                      const RaySpacing& spacing, std::vector<ContractedPoint>& points, Matrix* dirs) {
  const std::size_t n = rays.size() * intervals;
  points.resize(n);
  if (dirs) dirs->resize(3, static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < rays.size(); ++r) {
    const double* b = bounds.data() + r * (intervals + 1);
    for (int i = 0; i < intervals; ++i) {
      const double t = spacing.to_metric(0.5 * (b[i] + b[i + 1]));
      const std::size_t idx = r * intervals + i;
      points[idx] = to_contracted(rays[r].origin + t * rays[r].direction);
      if (dirs) dirs->col(static_cast<Eigen::Index>(idx)) = rays[r].direction;
    }
  }
}

RaySamples ray_slice(std::span<const double> bounds, int intervals, std::size_t ray, const Eigen::VectorXd& sigma,
                     const Matrix* rgb) {
  RaySamples s;
  const double* b = bounds.data() + ray * (intervals + 1);
  s.boundaries.assign(b, b + intervals + 1);
  s.sigma.resize(intervals);
  if (rgb) s.rgb.resize(intervals);
  for (int i = 0; i < intervals; ++i) {
    const auto idx = static_cast<Eigen::Index>(ray * intervals + i);
    s.sigma[i] = sigma[idx];
    if (rgb) s.rgb[i] = rgb->col(idx);
  }
  return s;
}

struct ProposalStage {
  ProposalFieldPass pass;
  std::vector<RaySamples> samples;
  std::vector<RenderOutput> outputs;
};

void run_proposal(const LocalFieldModel& model, std::span<const Ray> rays, std::span<const double> bounds,
                  int intervals, const RenderConfig& config, ProposalStage& stage) {
  const RaySpacing spacing = spacing_of(config);
  std::vector<ContractedPoint> points;
  midpoint_samples(rays, bounds, intervals, spacing, points, nullptr);
  proposal_field_forward(model, points, stage.pass);
  stage.samples.resize(rays.size());
  stage.outputs.resize(rays.size());
  for (std::size_t r = 0; r < rays.size(); ++r) {
    stage.samples[r] = ray_slice(bounds, intervals, r, stage.pass.sigma, nullptr);
    stage.outputs[r] = composite(stage.samples[r], spacing, Vec3::Zero());
  }
}

}  // namespace

SampleLayout plan_samples(const LocalFieldModel& model, std::span<const Ray> rays, const RenderConfig& config,
                          std::mt19937_64* jitter) {
  SampleLayout layout;
  layout.proposal_intervals = config.proposal_samples;
  layout.main_intervals = config.main_samples;
  const int mp = config.proposal_samples;
  const int nm = config.main_samples;
  layout.proposal_bounds.resize(rays.size() * (mp + 1));
  for (std::size_t r = 0; r < rays.size(); ++r) {
    const auto b = sample_uniform_contracted(mp, jitter);
    std::copy(b.begin(), b.end(), layout.proposal_bounds.begin() + r * (mp + 1));
  }
  ProposalStage stage;
  run_proposal(model, rays, layout.proposal_bounds, mp, config, stage);
  layout.main_bounds.resize(rays.size() * (nm + 1));
  for (std::size_t r = 0; r < rays.size(); ++r) {
    const auto b = resample_from_proposal(stage.outputs[r].weights, stage.samples[r].boundaries, nm,
                                          config.resample_floor, jitter);
    std::copy(b.begin(), b.end(), layout.main_bounds.begin() + r * (nm + 1));
  }
  return layout;
}

LossEvaluation evaluate_loss(const LocalFieldModel& model, const TrainingRays& batch, const SampleLayout& layout,
                             const RenderConfig& config, const LossWeights& weights, ParamGradients* grads,
                             std::span<const double> detached_main_weights) {
  const std::size_t rays = batch.size();
  const int mp = layout.proposal_intervals;
  const int nm = layout.main_intervals;
  if (rays == 0) throw std::invalid_argument("evaluate_loss: empty batch");
  if (layout.main_bounds.size() != rays * (nm + 1) || layout.proposal_bounds.size() != rays * (mp + 1)) {
    throw std::invalid_argument("evaluate_loss: layout does not match batch");
  }
  const RaySpacing spacing = spacing_of(config);

  ProposalStage proposal;
  run_proposal(model, batch.rays, layout.proposal_bounds, mp, config, proposal);

  std::vector<ContractedPoint> points;
  Matrix dirs;
  midpoint_samples(batch.rays, layout.main_bounds, nm, spacing, points, &dirs);
  MainFieldPass main;
  main_field_forward(model, points, dirs, main);

  LossEvaluation eval;
  std::vector<RaySamples> samples(rays);
  std::vector<RenderOutput> outputs(rays);
  eval.colors.resize(rays);
  eval.depths.resize(rays);
  eval.main_weights.resize(rays * nm);
  eval.weighted_samples.resize(rays * nm);
  for (std::size_t r = 0; r < rays; ++r) {
    samples[r] = ray_slice(layout.main_bounds, nm, r, main.sigma, &main.rgb);
    outputs[r] = composite(samples[r], spacing, config.background);
    eval.colors[r] = outputs[r].color;
    eval.depths[r] = outputs[r].depth;
    for (int i = 0; i < nm; ++i) {
      eval.main_weights[r * nm + i] = outputs[r].weights[i];
      eval.weighted_samples[r * nm + i] = {points[r * nm + i], outputs[r].weights[i]};
    }
  }
  std::span<const double> frozen =
      detached_main_weights.empty() ? std::span<const double>(eval.main_weights) : detached_main_weights;
  if (frozen.size() != rays * nm) throw std::invalid_argument("evaluate_loss: detached weights size mismatch");

  const double inv_rays = 1.0 / static_cast<double>(rays);
  const bool want_grad = grads != nullptr;
  std::vector<Vec3> d_color(want_grad ? rays : 0);
  std::vector<double> d_depth(want_grad ? rays : 0);

  eval.parts.rgb = loss_rgb(eval.colors, batch.rgb, d_color);
  const DepthLoss depth = loss_depth(eval.depths, batch.depth, batch.depth_valid, d_depth);
  eval.parts.depth = depth.value;
  eval.depth_empty = depth.empty;

  std::vector<double> d_w_dist(nm), d_w_hat(mp);
  Eigen::VectorXd d_sigma_main = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rays * nm));
  Matrix d_rgb_main = Matrix::Zero(3, static_cast<Eigen::Index>(rays * nm));
  Eigen::VectorXd d_sigma_prop = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rays * mp));
  std::vector<double> d_sigma_ray(std::max(nm, mp));
  std::vector<Vec3> d_rgb_ray(nm);

  const double depth_scale = weights.rgb_only ? 0.0 : weights.depth;
  for (std::size_t r = 0; r < rays; ++r) {
    const std::span<const double> main_bounds(layout.main_bounds.data() + r * (nm + 1), nm + 1);
    const std::span<const double> w(eval.main_weights.data() + r * nm, nm);
    eval.parts.distortion += loss_distortion(w, main_bounds, want_grad ? std::span<double>(d_w_dist) : std::span<double>());
    eval.parts.proposal += loss_proposal(main_bounds, frozen.subspan(r * nm, nm), proposal.samples[r].boundaries,
                                         proposal.outputs[r].weights,
                                         want_grad ? std::span<double>(d_w_hat) : std::span<double>());
    if (!want_grad) continue;

    for (double& d : d_w_dist) d *= weights.distortion * inv_rays;
    composite_backward(samples[r], spacing, config.background, outputs[r], d_color[r], depth_scale * d_depth[r],
                       d_w_dist, std::span<double>(d_sigma_ray.data(), nm), d_rgb_ray);
    for (int i = 0; i < nm; ++i) {
      d_sigma_main[static_cast<Eigen::Index>(r * nm + i)] = d_sigma_ray[i];
      d_rgb_main.col(static_cast<Eigen::Index>(r * nm + i)) = d_rgb_ray[i];
    }

    for (double& d : d_w_hat) d *= weights.proposal * inv_rays;
    composite_backward(proposal.samples[r], spacing, Vec3::Zero(), proposal.outputs[r], Vec3::Zero(), 0.0, d_w_hat,
                       std::span<double>(d_sigma_ray.data(), mp), {});
    for (int j = 0; j < mp; ++j) d_sigma_prop[static_cast<Eigen::Index>(r * mp + j)] = d_sigma_ray[j];
  }
  eval.parts.distortion *= inv_rays;
  eval.parts.proposal *= inv_rays;
  eval.total = loss_total(eval.parts, weights);

  if (want_grad) {
    main_field_backward(model, main, std::span<const double>(d_sigma_main.data(), d_sigma_main.size()), d_rgb_main,
                        *grads);
    proposal_field_backward(model, proposal.pass,
                            std::span<const double>(d_sigma_prop.data(), d_sigma_prop.size()), *grads);
  }
  return eval;
}

std::vector<RenderOutput> render_rays(const LocalFieldModel& model, std::span<const Ray> rays,
                                      const RenderConfig& config, bool use_skipping) {
  const SampleLayout layout = plan_samples(model, rays, config, nullptr);
  const RaySpacing spacing = spacing_of(config);
  const int nm = layout.main_intervals;

  std::vector<ContractedPoint> points;
  Matrix dirs;
  midpoint_samples(rays, layout.main_bounds, nm, spacing, points, &dirs);

  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::VectorXd sigma = Eigen::VectorXd::Zero(n);
  Matrix rgb = Matrix::Zero(3, n);
  if (use_skipping) {
    std::vector<Eigen::Index> live;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (model.occupancy.occupied(points[i])) live.push_back(i);
    }
    if (!live.empty()) {
      std::vector<ContractedPoint> live_points(live.size());
      Matrix live_dirs(3, static_cast<Eigen::Index>(live.size()));
      for (std::size_t k = 0; k < live.size(); ++k) {
        live_points[k] = points[live[k]];
        live_dirs.col(static_cast<Eigen::Index>(k)) = dirs.col(live[k]);
      }
      MainFieldPass pass;
      main_field_forward(model, live_points, live_dirs, pass);
      for (std::size_t k = 0; k < live.size(); ++k) {
        sigma[live[k]] = pass.sigma[static_cast<Eigen::Index>(k)];
        rgb.col(live[k]) = pass.rgb.col(static_cast<Eigen::Index>(k));
      }
    }
  } else {
    MainFieldPass pass;
    main_field_forward(model, points, dirs, pass);
    sigma = pass.sigma;
    rgb = pass.rgb;
  }

  std::vector<RenderOutput> out(rays.size());
  for (std::size_t r = 0; r < rays.size(); ++r) {
    out[r] = composite(ray_slice(layout.main_bounds, nm, r, sigma, &rgb), spacing, config.background);
  }
  return out;
}

RenderOutput render_ray(const LocalFieldModel& model, const Ray& ray, const RenderConfig& config, RenderMode mode,
                        bool use_skipping, std::mt19937_64* jitter) {
  if (mode == RenderMode::Eval) return render_rays(model, std::span<const Ray>(&ray, 1), config, use_skipping).front();
  if (!jitter) throw std::invalid_argument("render_ray: training mode needs a generator");
  const SampleLayout layout = plan_samples(model, std::span<const Ray>(&ray, 1), config, jitter);
  TrainingRays batch;
  batch.rays = {ray};
  batch.rgb = {Vec3::Zero()};
  batch.depth = {0.0};
  batch.depth_valid = {0};
  const LossEvaluation eval = evaluate_loss(model, batch, layout, config, LossWeights{}, nullptr);
  RenderOutput out;
  out.color = eval.colors.front();
  out.depth = eval.depths.front();
  out.weights = eval.main_weights;
  double transmittance = 1.0;
  for (double w : out.weights) {
    out.transmittance.push_back(transmittance);
    out.opacity += w;
    transmittance -= w;
  }
  return out;
}

}  // namespace viewfield
