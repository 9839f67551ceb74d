#include <algorithm>
#include <cmath>
#include <vector>

#include <doctest.h>

#include "support.hpp"
#include "viewfield/blend.hpp"

using namespace viewfield;
using testsupport::make_keyframe;
using testsupport::translation;
using doctest::Approx;

namespace {

AtlasConfig small_config() {
  AtlasConfig cfg;
  cfg.intrinsics = testsupport::small_intrinsics(8);
  cfg.field = testsupport::tiny_field();
  cfg.render.proposal_samples = 8;
  cfg.render.main_samples = 8;
  cfg.train.rays_per_batch = 16;
  cfg.seed = 2;
  return cfg;
}

}  // namespace

TEST_CASE("inverse distance weights") {
  const std::vector<double> d{1.0, 2.0};
  const auto w = inverse_distance_weights(d, 4.0, 1e-6);
  CHECK(w[0] == Approx(16.0 / 17.0).epsilon(1e-12));
  CHECK(w[1] == Approx(1.0 / 17.0).epsilon(1e-12));

  CHECK(inverse_distance_weights(std::vector<double>{}, 4.0, 1e-6).empty());
  CHECK(inverse_distance_weights(std::vector<double>{3.0}, 4.0, 1e-6)[0] == 1.0);

  // Exact hit: clamped distance dominates but stays finite.
  const auto hit = inverse_distance_weights(std::vector<double>{0.0, 1.0}, 4.0, 1e-6);
  CHECK(std::isfinite(hit[0]));
  CHECK(hit[0] == Approx(1.0));
  CHECK(hit[1] == Approx(1e-24).epsilon(1e-6));

  const auto both = inverse_distance_weights(std::vector<double>{0.0, 0.0}, 4.0, 1e-6);
  CHECK(both[0] == 0.5);
  CHECK(both[1] == 0.5);
}

TEST_CASE("weights are scale invariant and sum to one") {
  const std::vector<double> d{0.3, 0.7, 1.9};
  std::vector<double> scaled;
  for (double v : d) scaled.push_back(v * 13.0);
  for (double p : {1.0, 2.0, 4.0, 8.0}) {
    const auto a = inverse_distance_weights(d, p, 1e-9);
    const auto b = inverse_distance_weights(scaled, p, 1e-9);
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i] == Approx(b[i]).epsilon(1e-12));
      CHECK(a[i] > 0.0);
      sum += a[i];
    }
    CHECK(sum == Approx(1.0).epsilon(1e-14));
    CHECK(a[0] > a[1]);
    CHECK(a[1] > a[2]);
  }
}

TEST_CASE("model selection ranks by proximity to the reference view") {
  Atlas atlas(small_config());
  for (int m = 0; m < 5; ++m) atlas.on_keyframe(make_keyframe(m, translation(m * 1.0), atlas.config().intrinsics), std::set<int>{});
  const auto sel = select_models(atlas, translation(2.2));
  CHECK(sel.reference_keyframe == 2);
  REQUIRE(sel.model_ids.size() == 3);
  CHECK(sel.model_ids[0] == 2);
  // Models 1 and 3 tie against the reference view; the smaller id ranks first.
  CHECK(sel.model_ids[1] == 1);
  CHECK(sel.model_ids[2] == 3);
  CHECK(sel.distances[0] == Approx(0.2));
  CHECK(sel.distances[1] == Approx(1.2));
  CHECK(sel.distances[2] == Approx(0.8));
  CHECK(sel.weights[0] > sel.weights[2]);
  CHECK(sel.weights[2] > sel.weights[1]);

  BlendConfig one;
  one.max_models = 1;
  CHECK(select_models(atlas, translation(2.2), one).model_ids == std::vector<int>{2});

  Atlas empty(small_config());
  CHECK_THROWS_AS(select_models(empty, Pose::identity()), std::logic_error);
}

TEST_CASE("blend stays inside the envelope of its layers") {
  Atlas atlas(small_config());
  atlas.on_keyframe(make_keyframe(0, Pose::identity(), atlas.config().intrinsics), std::set<int>{});
  atlas.on_keyframe(make_keyframe(1, translation(1.0), atlas.config().intrinsics), std::set<int>{});
  const int ids[] = {0, 1};
  for (int s = 0; s < 3; ++s) atlas.train_step(ids);
  const auto nv = render_novel_view(atlas, translation(0.4, 0.1), atlas.config().intrinsics);
  REQUIRE(nv.layers.size() == 2);
  for (std::size_t i = 0; i < nv.image.data.size(); ++i) {
    const double lo = std::min(nv.layers[0].image.data[i], nv.layers[1].image.data[i]);
    const double hi = std::max(nv.layers[0].image.data[i], nv.layers[1].image.data[i]);
    CHECK(nv.image.data[i] >= lo - 1e-12);
    CHECK(nv.image.data[i] <= hi + 1e-12);
    const double expect = nv.selection.weights[0] * nv.layers[0].image.data[i] +
                          nv.selection.weights[1] * nv.layers[1].image.data[i];
    CHECK(nv.image.data[i] == Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("blending identical models equals rendering one") {
  Atlas atlas(small_config());
  atlas.on_keyframe(make_keyframe(0, Pose::identity(), atlas.config().intrinsics), std::set<int>{});
  atlas.on_keyframe(make_keyframe(1, translation(1.0), atlas.config().intrinsics), std::set<int>{});
  // Same parameters and the same anchor pose for both.
  LocalFieldModel copy = atlas.model(0);
  copy.id = 1;
  copy.anchor_keyframe = 1;
  atlas.mutable_model(1) = copy;
  atlas.apply_pose_update({{1, Pose::identity()}});
  const Pose test = translation(0.3, -0.1, 0.2);
  BlendConfig two;
  two.max_models = 2;
  const auto nv = render_novel_view(atlas, test, atlas.config().intrinsics, two);
  REQUIRE(nv.layers.size() == 2);
  const auto single = render_model_view(atlas.model(0), atlas.anchor_pose(0), test, atlas.config().intrinsics,
                                        atlas.config().render, true);
  CHECK(testsupport::max_abs_diff(nv.image, single.image) < 1e-12);
}

TEST_CASE("model view depth is z-depth") {
  Atlas atlas(small_config());
  atlas.on_keyframe(make_keyframe(0, Pose::identity(), atlas.config().intrinsics), std::set<int>{});
  const auto view = render_model_view(atlas.model(0), atlas.anchor_pose(0), Pose::identity(), atlas.config().intrinsics,
                                      atlas.config().render, false);
  CHECK(view.image.width == 8);
  for (std::size_t i = 0; i < view.depth.meters.size(); ++i) {
    CHECK(std::isfinite(view.depth.meters[i]));
    CHECK(view.depth.meters[i] >= 0.0);
  }
}
