#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <doctest.h>

#include "support.hpp"
#include "viewfield/render.hpp"

using namespace viewfield;
using doctest::Approx;

namespace {

struct OracleOut {
  Vec3 color = Vec3::Zero();
  double depth = 0.0;
  double weight_sum = 0.0;
  std::vector<double> weights;
};

// Sequential transmittance written independently of composite().
OracleOut sequential(const RaySamples& s, double near, double far, const Vec3& bg) {
  auto metric = [&](double x) { return x >= 1.0 ? far : std::min((1.0 + near) / (1.0 - x) - 1.0, far); };
  OracleOut o;
  double T = 1.0, wd = 0.0;
  for (int i = 0; i < s.intervals(); ++i) {
    const double delta = metric(s.boundaries[i + 1]) - metric(s.boundaries[i]);
    const double alpha = 1.0 - std::exp(-s.sigma[i] * delta);
    const double w = T * alpha;
    o.weights.push_back(w);
    o.color += w * s.rgb[i];
    wd += w * metric(0.5 * (s.boundaries[i] + s.boundaries[i + 1]));
    o.weight_sum += w;
    T *= 1.0 - alpha;
  }
  o.color += (1.0 - o.weight_sum) * bg;
  o.depth = wd / std::max(o.weight_sum, 1e-10);
  return o;
}

RaySamples random_samples(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RaySamples s;
  s.boundaries = sample_uniform_contracted(n, &rng);
  for (int i = 0; i < n; ++i) {
    s.sigma.push_back(3.0 * u(rng) * u(rng));
    s.rgb.emplace_back(u(rng), u(rng), u(rng));
  }
  return s;
}

double brute_force_bound(const std::vector<double>& tb, const std::vector<double>& w, double lo, double hi) {
  double sum = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    if (std::min(hi, tb[j + 1]) - std::max(lo, tb[j]) > 0.0) sum += w[j];
  }
  return sum;
}

}  // namespace

TEST_CASE("ray spacing maps between normalized and metric distance") {
  const RaySpacing sp{0.05, 1e3};
  CHECK(sp.to_metric(0.0) == Approx(0.05));
  CHECK(sp.to_metric(1.0) == 1e3);
  for (double t : {0.05, 0.3, 1.0, 7.5, 120.0}) CHECK(sp.to_metric(sp.to_normalized(t)) == Approx(t).epsilon(1e-12));
}

TEST_CASE("uniform contracted sampling") {
  const auto one = sample_uniform_contracted(1);
  REQUIRE(one.size() == 2);
  CHECK(one[0] == 0.0);
  CHECK(one[1] == 1.0);
  CHECK_THROWS_AS(sample_uniform_contracted(0), std::invalid_argument);

  const auto four = sample_uniform_contracted(4);
  const RaySpacing sp{0.05, 1e3};
  for (int k = 0; k < 4; ++k) CHECK(four[k + 1] - four[k] == Approx(0.25));
  // Equal steps in 1 / (1 + t) between the interior boundaries.
  const double step = 1.0 / (1.0 + sp.to_metric(four[1])) - 1.0 / (1.0 + sp.to_metric(four[2]));
  CHECK(1.0 / (1.0 + sp.to_metric(four[0])) - 1.0 / (1.0 + sp.to_metric(four[1])) == Approx(step));
  CHECK(1.0 / (1.0 + sp.to_metric(four[2])) - 1.0 / (1.0 + sp.to_metric(four[3])) == Approx(step));
}

TEST_CASE("jittered boundaries are uniform within their strata") {
  std::mt19937_64 rng(1);
  const int n = 4, draws = 10000;
  std::vector<std::vector<double>> values(n + 1);
  for (int d = 0; d < draws; ++d) {
    const auto b = sample_uniform_contracted(n, &rng);
    CHECK(std::is_sorted(b.begin(), b.end()));
    for (int k = 0; k <= n; ++k) values[k].push_back(b[k]);
  }
  CHECK(values[0].front() == 0.0);
  CHECK(values[n].front() == 1.0);
  for (int k = 1; k < n; ++k) {
    const double lo = (k - 1.0) / (n - 1), hi = static_cast<double>(k) / (n - 1);
    double mean = 0.0;
    int below_mid = 0;
    for (double v : values[k]) {
      CHECK(v >= lo);
      CHECK(v < hi);
      mean += v;
      below_mid += v < 0.5 * (lo + hi);
    }
    mean /= draws;
    const double sigma_mean = (hi - lo) / std::sqrt(12.0 * draws);
    CHECK(std::abs(mean - 0.5 * (lo + hi)) < 4 * sigma_mean);
    CHECK(std::abs(below_mid - draws / 2.0) < 4 * std::sqrt(draws / 4.0));
  }
}

TEST_CASE("resampling a uniform histogram reproduces uniform spacing") {
  const auto tb = sample_uniform_contracted(16);
  const std::vector<double> w(16, 1.0 / 16);
  const auto out = resample_from_proposal(w, tb, 8, 1e-5);
  for (int k = 0; k <= 8; ++k) CHECK(out[k] == Approx(k / 8.0).epsilon(1e-12));
}

TEST_CASE("resampling a spike concentrates boundaries in its interval") {
  const auto tb = sample_uniform_contracted(16);
  std::vector<double> w(16, 0.0);
  w[5] = 1.0;
  const auto out = resample_from_proposal(w, tb, 32, 1e-5);
  CHECK(out.front() == 0.0);
  CHECK(out.back() == 1.0);
  for (int k = 1; k < 32; ++k) {
    CHECK(out[k] >= tb[5] - 1e-4);
    CHECK(out[k] <= tb[6] + 1e-4);
  }
  const std::vector<double> zero(16, 0.0);
  const auto fallback = resample_from_proposal(zero, tb, 4, 1e-5);
  for (int k = 0; k <= 4; ++k) CHECK(fallback[k] == Approx(k / 4.0));
}

TEST_CASE("resampled points follow the histogram CDF") {
  std::mt19937_64 rng(2);
  std::vector<double> tb = {0.0, 0.1, 0.35, 0.4, 0.8, 1.0};
  std::vector<double> w = {0.1, 0.4, 0.05, 0.3, 0.15};
  auto cdf = [&](double x) {
    double acc = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
      if (x >= tb[j + 1]) acc += w[j];
      else if (x > tb[j]) acc += w[j] * (x - tb[j]) / (tb[j + 1] - tb[j]);
    }
    return acc;
  };
  std::vector<double> pts;
  while (pts.size() < 100000) {
    const auto out = resample_from_proposal(w, tb, 64, 0.0, &rng);
    pts.insert(pts.end(), out.begin() + 1, out.end() - 1);
  }
  std::sort(pts.begin(), pts.end());
  const double n = static_cast<double>(pts.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < pts.size(); i += 97) worst = std::max(worst, std::abs(cdf(pts[i]) - (i + 0.5) / n));
  CHECK(worst < 2.0 / std::sqrt(n));
}

TEST_CASE("composite analytic cases") {
  const RaySpacing sp{0.05, 1e3};
  const Vec3 bg(0.2, 0.4, 0.6);
  RaySamples empty;
  empty.boundaries = sample_uniform_contracted(4);
  empty.sigma.assign(4, 0.0);
  empty.rgb.assign(4, Vec3(1, 0, 0));
  const auto e = composite(empty, sp, bg);
  CHECK((e.color - bg).norm() < 1e-15);
  CHECK(e.opacity == 0.0);

  RaySamples half;
  half.boundaries = {sp.to_normalized(1.0), sp.to_normalized(3.0)};
  half.sigma = {std::log(2.0) / 2.0};
  half.rgb = {Vec3(1.0, 0.5, 0.0)};
  const auto h = composite(half, sp, bg);
  CHECK(h.weights[0] == Approx(0.5).epsilon(1e-12));
  CHECK((h.color - (0.5 * half.rgb[0] + 0.5 * bg)).norm() < 1e-12);
}

TEST_CASE("composite matches the sequential-transmittance oracle") {
  std::mt19937_64 rng(3);
  const RaySpacing sp{0.05, 1e3};
  const Vec3 bg(0.1, 0.2, 0.3);
  for (int t = 0; t < 200; ++t) {
    const auto s = random_samples(rng, 16);
    const auto out = composite(s, sp, bg);
    const auto o = sequential(s, sp.near, sp.far, bg);
    CHECK((out.color - o.color).norm() < 1e-12);
    CHECK(std::abs(out.depth - o.depth) < 1e-12 * std::max(1.0, o.depth));
    for (int i = 0; i < 16; ++i) CHECK(std::abs(out.weights[i] - o.weights[i]) < 1e-12);
    double sum = 0.0;
    for (double w : out.weights) {
      CHECK(w >= 0.0);
      CHECK(w <= 1.0);
      sum += w;
    }
    CHECK(sum <= 1.0 + 1e-6);
    for (int i = 1; i < 16; ++i) CHECK(out.transmittance[i] <= out.transmittance[i - 1]);
  }
}

TEST_CASE("splitting an interval with the same density and color leaves compositing unchanged") {
  std::mt19937_64 rng(4);
  const RaySpacing sp{0.05, 1e3};
  for (int t = 0; t < 50; ++t) {
    const auto s = random_samples(rng, 8);
    RaySamples split = s;
    const int i = t % 7;
    const double mid = 0.5 * (s.boundaries[i] + s.boundaries[i + 1]);
    split.boundaries.insert(split.boundaries.begin() + i + 1, mid);
    split.sigma.insert(split.sigma.begin() + i, s.sigma[i]);
    split.rgb.insert(split.rgb.begin() + i, s.rgb[i]);
    const auto a = composite(s, sp, Vec3::Zero());
    const auto b = composite(split, sp, Vec3::Zero());
    CHECK((a.color - b.color).norm() < 1e-9);
    CHECK(std::abs(a.opacity - b.opacity) < 1e-9);
  }
}

TEST_CASE("composite backward matches central differences") {
  std::mt19937_64 rng(5);
  const RaySpacing sp{0.05, 1e3};
  const Vec3 bg(0.3, 0.1, 0.7);
  const Vec3 dc(0.7, -0.4, 0.2);
  const double dd = 0.013;
  std::vector<double> dw(12);
  for (auto& v : dw) v = std::uniform_real_distribution<double>(-1, 1)(rng);
  auto s = random_samples(rng, 12);
  auto objective = [&](const RaySamples& x) {
    const auto o = composite(x, sp, bg);
    double f = dc.dot(o.color) + dd * o.depth;
    for (int i = 0; i < 12; ++i) f += dw[i] * o.weights[i];
    return f;
  };
  const auto out = composite(s, sp, bg);
  std::vector<double> d_sigma(12, 0.0);
  std::vector<Vec3> d_rgb(12, Vec3::Zero());
  composite_backward(s, sp, bg, out, dc, dd, dw, d_sigma, d_rgb);
  for (int i = 0; i < 12; ++i) {
    const double h = 1e-6;
    auto x = s;
    x.sigma[i] += h;
    const double up = objective(x);
    x.sigma[i] -= 2 * h;
    const double down = objective(x);
    CHECK((up - down) / (2 * h) == Approx(d_sigma[i]).epsilon(1e-5).scale(1e-3));
    for (int c = 0; c < 3; ++c) {
      auto y = s;
      y.rgb[i][c] += h;
      const double up2 = objective(y);
      y.rgb[i][c] -= 2 * h;
      CHECK((up2 - objective(y)) / (2 * h) == Approx(d_rgb[i][c]).epsilon(1e-6).scale(1e-3));
    }
  }
}

TEST_CASE("rgb loss") {
  const std::vector<Vec3> a = {Vec3(0.1, 0.2, 0.3)};
  CHECK(loss_rgb(a, a) == 0.0);
  const std::vector<Vec3> b = {Vec3(0.0, 0.2, 0.3)};
  CHECK(loss_rgb(a, b) == Approx(0.01));
  std::mt19937_64 rng(6);
  std::vector<Vec3> p(5), t(5), g(5);
  for (int i = 0; i < 5; ++i) {
    p[i] = Vec3::Random();
    t[i] = Vec3::Random();
  }
  loss_rgb(p, t, g);
  for (int i = 0; i < 5; ++i) {
    CHECK((g[i] - 2.0 * (p[i] - t[i]) / 5.0).norm() < 1e-15);
    for (int c = 0; c < 3; ++c) {
      auto q = p;
      q[i][c] += 1e-6;
      const double up = loss_rgb(q, t);
      q[i][c] -= 2e-6;
      CHECK((up - loss_rgb(q, t)) / 2e-6 == Approx(g[i][c]).epsilon(1e-6));
    }
  }
  CHECK_THROWS_AS(loss_rgb(a, std::vector<Vec3>{}), std::invalid_argument);
}

TEST_CASE("distortion loss analytic cases") {
  CHECK(loss_distortion(std::vector<double>{0, 0}, std::vector<double>{0, 0.5, 1}) == 0.0);
  CHECK(loss_distortion(std::vector<double>{1.0}, std::vector<double>{0, 1}) == Approx(1.0 / 3.0));
  CHECK(loss_distortion(std::vector<double>{0.5, 0.5}, std::vector<double>{0, 0.5, 1}) == Approx(1.0 / 3.0));
}

TEST_CASE("distortion loss matches the quadratic definition and its gradient") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    const auto b = sample_uniform_contracted(10, &rng);
    std::vector<double> w(10);
    for (auto& v : w) v = 0.2 * u(rng);
    double direct = 0.0;
    for (int i = 0; i < 10; ++i) {
      for (int j = 0; j < 10; ++j)
        direct += w[i] * w[j] * std::abs(0.5 * (b[i] + b[i + 1]) - 0.5 * (b[j] + b[j + 1]));
      direct += w[i] * w[i] * (b[i + 1] - b[i]) / 3.0;
    }
    std::vector<double> g(10);
    const double value = loss_distortion(w, b, g);
    CHECK(value == Approx(direct).epsilon(1e-12));
    CHECK(value >= 0.0);
    for (int i = 0; i < 10; ++i) {
      auto x = w;
      x[i] += 1e-6;
      const double up = loss_distortion(x, b);
      x[i] -= 2e-6;
      CHECK((up - loss_distortion(x, b)) / 2e-6 == Approx(g[i]).epsilon(1e-6));
    }
  }
}

TEST_CASE("bound counts positive-measure overlaps") {
  const std::vector<double> tb = {0.0, 0.25, 0.5, 0.75, 1.0};
  const std::vector<double> w = {0.1, 0.2, 0.3, 0.4};
  CHECK(bound(tb, w, 0.25, 0.5) == Approx(0.2));
  CHECK(bound(tb, w, 0.0, 1.0) == Approx(1.0));
  CHECK(bound(tb, w, 0.3, 0.6) == Approx(0.5));
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 500; ++t) {
    const auto b = sample_uniform_contracted(12, &rng);
    std::vector<double> ww(12);
    for (auto& v : ww) v = u(rng);
    double lo = u(rng), hi = u(rng);
    if (lo > hi) std::swap(lo, hi);
    CHECK(bound(b, ww, lo, hi) == Approx(brute_force_bound(b, ww, lo, hi)).epsilon(1e-12));
    const int k = t % 12;
    CHECK(bound(b, ww, b[k], b[k + 1]) == Approx(ww[k]).epsilon(1e-12));
  }
}

TEST_CASE("proposal loss cases") {
  const std::vector<double> tb = {0.0, 0.25, 0.5, 0.75, 1.0};
  const std::vector<double> w = {0.1, 0.2, 0.3, 0.4};
  CHECK(loss_proposal(tb, w, tb, w) == 0.0);
  const std::vector<double> spike = {0.0, 0.5, 0.0, 0.0};
  const std::vector<double> zero(4, 0.0);
  CHECK(loss_proposal(tb, spike, tb, zero) == Approx(0.25));
}

TEST_CASE("proposal loss matches direct evaluation and its gradient") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    const auto b = sample_uniform_contracted(6, &rng);
    const auto pb = sample_uniform_contracted(9, &rng);
    std::vector<double> w(6), pw(9);
    for (auto& v : w) v = 0.3 * u(rng);
    for (auto& v : pw) v = 0.1 * u(rng);
    double direct = 0.0;
    for (int i = 0; i < 6; ++i) {
      const double e = std::max(0.0, w[i] - brute_force_bound(pb, pw, b[i], b[i + 1]));
      direct += e * e;
    }
    std::vector<double> g(9);
    CHECK(loss_proposal(b, w, pb, pw, g) == Approx(direct).epsilon(1e-12));
    for (int j = 0; j < 9; ++j) {
      auto x = pw;
      x[j] += 1e-7;
      const double up = loss_proposal(b, w, pb, x);
      x[j] -= 2e-7;
      // Round-off in the difference quotient is about 1e-16 / 1e-7.
      const double fd = (up - loss_proposal(b, w, pb, x)) / 2e-7;
      CHECK(std::abs(fd - g[j]) <= 1e-5 * std::abs(g[j]) + 1e-8);
    }
  }
}

TEST_CASE("depth loss") {
  const std::vector<std::uint8_t> all = {1, 1};
  CHECK(loss_depth(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0, 2.0}, all).value == 0.0);
  const std::vector<std::uint8_t> one = {1};
  CHECK(loss_depth(std::vector<double>{1.2}, std::vector<double>{1.0}, one).value == Approx(0.2));
  const std::vector<std::uint8_t> none = {0, 0};
  const auto e = loss_depth(std::vector<double>{1.0, 2.0}, std::vector<double>{3.0, 0.0}, none);
  CHECK(e.empty);
  CHECK(e.value == 0.0);

  std::vector<double> g(4);
  const std::vector<double> p = {1.0, 2.5, 3.0, 0.5}, t = {1.0, 2.0, 3.5, 0.0};
  const std::vector<std::uint8_t> mask = {1, 1, 1, 0};
  loss_depth(p, t, mask, g);
  CHECK(g[0] == 0.0);
  CHECK(g[1] == Approx(1.0 / 3));
  CHECK(g[2] == Approx(-1.0 / 3));
  CHECK(g[3] == 0.0);
}

TEST_CASE("total loss weights") {
  const LossParts zero{};
  CHECK(loss_total(zero, LossWeights{}) == 0.0);
  const LossParts ones{1, 1, 1, 1};
  CHECK(loss_total(ones, LossWeights{}) == Approx(2.502));
  LossWeights rgb_only;
  rgb_only.rgb_only = true;
  CHECK(loss_total(ones, rgb_only) == Approx(2.002));
}

TEST_CASE("end-to-end loss gradient matches central differences on a small configuration") {
  LocalFieldModel model = init_model(0, 0, testsupport::tiny_field(), 11);
  std::mt19937_64 rng(11);
  model.grid.init_uniform(rng, 0.5);
  model.proposal_grid.init_uniform(rng, 0.5);
  RenderConfig cfg;
  cfg.proposal_samples = 8;
  cfg.main_samples = 8;
  cfg.background = Vec3(0.1, 0.2, 0.3);
  TrainingRays batch;
  batch.rays = {{Vec3(0.1, 0, 0), Vec3(0.2, 0.1, 1).normalized()}, {Vec3(0, 0.2, 0.1), Vec3(-0.3, 0.2, 1).normalized()}};
  batch.rgb = {Vec3(0.8, 0.3, 0.2), Vec3(0.1, 0.6, 0.9)};
  batch.depth = {40.0, 0.01};  // far from any prediction: no L1 kink nearby
  batch.depth_valid = {1, 1};
  const SampleLayout layout = plan_samples(model, batch.rays, cfg, &rng);
  const LossWeights weights;
  const auto first = evaluate_loss(model, batch, layout, cfg, weights, nullptr);
  ParamGradients grads = model.zero_gradients();
  evaluate_loss(model, batch, layout, cfg, weights, &grads, first.main_weights);

  int checked = 0, failed = 0;
  for (ParamGroup g : kParamGroups) {
    auto p = model.params(g);
    const auto an = grads.of(g);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double keep = p[i];
      p[i] = keep + 1e-4;
      const double up = evaluate_loss(model, batch, layout, cfg, weights, nullptr, first.main_weights).total;
      p[i] = keep - 1e-4;
      const double down = evaluate_loss(model, batch, layout, cfg, weights, nullptr, first.main_weights).total;
      p[i] = keep;
      const double fd = (up - down) / 2e-4;
      const double scale = std::max({std::abs(fd), std::abs(an[i]), 1e-7});
      if (std::abs(fd - an[i]) > 1e-3 * scale) ++failed;
      ++checked;
    }
  }
  CHECK(checked == static_cast<int>(model.parameter_count()));
  CHECK(failed == 0);
}

TEST_CASE("render with a fully occupied grid equals the unskipped render exactly") {
  LocalFieldModel model = init_model(0, 0, testsupport::tiny_field(), 12);
  std::mt19937_64 rng(12);
  model.grid.init_uniform(rng, 1.0);
  model.occupancy.fill(true);
  std::vector<Ray> rays;
  for (int i = 0; i < 20; ++i) rays.push_back({Vec3::Zero(), Vec3::Random().normalized()});
  const auto a = render_rays(model, rays, RenderConfig{}, true);
  const auto b = render_rays(model, rays, RenderConfig{}, false);
  for (std::size_t i = 0; i < rays.size(); ++i) {
    CHECK(a[i].color == b[i].color);
    CHECK(a[i].depth == b[i].depth);
  }
  model.occupancy.fill(false);
  RenderConfig cfg;
  cfg.background = Vec3(0.3, 0.6, 0.9);
  const auto c = render_rays(model, rays, cfg, true);
  for (const auto& o : c) CHECK((o.color - cfg.background).norm() < 1e-15);
}

TEST_CASE("skipping treats samples in empty cells as transparent") {
  LocalFieldModel model = init_model(0, 0, testsupport::tiny_field(), 14);
  std::mt19937_64 rng(14);
  model.grid.init_uniform(rng, 1.0);
  std::bernoulli_distribution coin(0.5);
  for (int c = 0; c < OccupancyGrid::kCells; ++c) {
    if (coin(rng)) model.occupancy.mark(c);
  }
  RenderConfig cfg;
  cfg.background = Vec3(0.2, 0.5, 0.1);
  std::vector<Ray> rays;
  for (int i = 0; i < 20; ++i) rays.push_back({0.3 * Vec3::Random(), Vec3::Random().normalized()});
  const auto skipped = render_rays(model, rays, cfg, true);

  // Oracle: query every midpoint, zero the density where the cell is empty, composite sequentially.
  const SampleLayout layout = plan_samples(model, rays, cfg, nullptr);
  const int n = layout.main_intervals;
  int dropped = 0;
  for (std::size_t r = 0; r < rays.size(); ++r) {
    RaySamples s;
    s.boundaries.assign(layout.main_bounds.begin() + r * (n + 1), layout.main_bounds.begin() + (r + 1) * (n + 1));
    for (int i = 0; i < n; ++i) {
      const double t = RaySpacing{cfg.near, cfg.far}.to_metric(s.midpoint(i));
      const ContractedPoint c = to_contracted(rays[r].origin + t * rays[r].direction);
      const FieldSample q = query(model, c, rays[r].direction);
      const bool live = model.occupancy.occupied(c);
      dropped += !live;
      s.sigma.push_back(live ? q.sigma : 0.0);
      s.rgb.push_back(q.rgb);
    }
    const OracleOut o = sequential(s, cfg.near, cfg.far, cfg.background);
    CHECK((skipped[r].color - o.color).norm() < 1e-12);
  }
  CHECK(dropped > 0);
  CHECK(dropped < static_cast<int>(rays.size()) * n);
}

TEST_CASE("render_ray eval mode agrees with batched rendering") {
  LocalFieldModel model = init_model(0, 0, testsupport::tiny_field(), 13);
  std::mt19937_64 rng(13);
  model.grid.init_uniform(rng, 1.0);
  const Ray ray{Vec3(0.1, 0.0, 0.0), Vec3(0.0, 0.6, 0.8)};
  const auto single = render_ray(model, ray, RenderConfig{}, RenderMode::Eval, false);
  const auto batch = render_rays(model, std::span<const Ray>(&ray, 1), RenderConfig{}, false);
  CHECK((single.color - batch[0].color).norm() < 1e-12);
  CHECK(std::abs(single.depth - batch[0].depth) < 1e-9);
}
