#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "gradcheck.hpp"
#include "lfc/synthesis.hpp"
#include "lfc/synthetic.hpp"

using namespace lfc;
using nn::Tensor4;

namespace {

PlaneF smooth_plane(int w, int h, uint64_t seed) {
  const NoiseTexture tex(seed, 5.0, 0.9);
  PlaneF p(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) p.at(x, y) = tex.sample(x, y);
  }
  return p;
}

D2GanConfig small_config() {
  D2GanConfig cfg;
  cfg.patch_size = 32;
  cfg.disparity_levels = 3;
  cfg.d_max = 2.0;
  return cfg;
}

SynthSample smooth_sample(const D2GanConfig& cfg, uint64_t seed) {
  SynthSample s;
  s.positions = quadrant_corners(8, 8, {1, 1});
  s.q = {1, 1};
  for (size_t i = 0; i < 4; ++i) {
    s.ref_patches[i] = smooth_plane(cfg.patch_size, cfg.patch_size, seed + i);
  }
  s.target = smooth_plane(cfg.output_size(), cfg.output_size(), seed + 9);
  return s;
}

}  // namespace

TEST_CASE("zero disparity leaves the view unchanged") {
  const PlaneF ref = smooth_plane(12, 10, 1);
  const PlaneF zero(12, 10, 0.0);
  const PlaneF out = warp_view(ref, {0, 0}, {2, 3}, zero);
  CHECK(out == ref);
}

TEST_CASE("zero baseline leaves the view unchanged for any disparity") {
  const PlaneF ref = smooth_plane(12, 10, 2);
  PlaneF d(12, 10);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> dist(-3.0, 3.0);
  for (double& v : d.data) v = dist(rng);
  const AngularPos p{4, 6};
  const PlaneF out = warp_view(ref, p, p, d);
  CHECK(out == ref);
}

TEST_CASE("integer shift matches the pixel-loop oracle") {
  PlaneF ref(8, 8);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) ref.at(x, y) = y * 8 + x;
  }
  const PlaneF ones(8, 8, 1.0);
  // p - q = (0, 1): columns shift by one, clamped at the right edge.
  const PlaneF out = warp_view(ref, {0, 1}, {0, 0}, ones);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      const int sx = std::min(x + 1, 7);
      CHECK(out.at(x, y) == doctest::Approx(ref.at(sx, y)).epsilon(1e-12));
    }
  }
  // p - q = (2, 0) with disparity 1: rows shift by two.
  const PlaneF out2 = warp_view(ref, {2, 0}, {0, 0}, ones);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      const int sy = std::min(y + 2, 7);
      CHECK(out2.at(x, y) == doctest::Approx(ref.at(x, sy)).epsilon(1e-12));
    }
  }
}

TEST_CASE("warp gradients match finite differences away from integer crossings") {
  const int n = 10;
  PlaneF ref = smooth_plane(n, n, 3);
  PlaneF d(n, n);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> dist(0.2, 0.45);  // fractional offsets
  for (double& v : d.data) v = dist(rng);
  const AngularPos p{2, 1}, q{0, 0};

  PlaneF grad_out(n, n);
  for (double& v : grad_out.data) v = dist(rng) - 0.3;

  PlaneF grad_ref(n, n), grad_d(n, n);
  warp_backward(ref, p, q, d, 0, 0, grad_out, &grad_ref, &grad_d);

  auto loss = [&] {
    const PlaneF out = warp_window(ref, p, q, d, 0, 0);
    double acc = 0;
    for (size_t i = 0; i < out.data.size(); ++i) acc += out.data[i] * grad_out.data[i];
    return acc;
  };
  CHECK(gradcheck::check_gradient(d.data, grad_d.data, loss, 30, 5) < 1e-3);
  CHECK(gradcheck::check_gradient(ref.data, grad_ref.data, loss, 30, 6) < 1e-3);
}

TEST_CASE("feature volume statistics on constant views") {
  D2GanConfig cfg = small_config();
  const auto corners = quadrant_corners(8, 8, {1, 2});

  std::array<PlaneF, 4> same;
  for (PlaneF& p : same) p = PlaneF(16, 16, 0.5);
  const Tensor4 k_same = build_features(same, corners, {1, 2}, cfg, 8, 8);
  CHECK(k_same.c == 2 * cfg.disparity_levels);
  for (int l = 0; l < cfg.disparity_levels; ++l) {
    const double* std_plane = k_same.plane(0, 2 * l + 1);
    for (size_t i = 0; i < k_same.plane_size(); ++i) CHECK(std_plane[i] == 0.0);
  }

  std::array<PlaneF, 4> split = {PlaneF(16, 16, 10.0), PlaneF(16, 16, 10.0), PlaneF(16, 16, 20.0),
                                 PlaneF(16, 16, 20.0)};
  const Tensor4 k_split = build_features(split, corners, {1, 2}, cfg, 8, 8);
  for (int l = 0; l < cfg.disparity_levels; ++l) {
    const double* mean_plane = k_split.plane(0, 2 * l);
    const double* std_plane = k_split.plane(0, 2 * l + 1);
    for (size_t i = 0; i < k_split.plane_size(); ++i) {
      CHECK(mean_plane[i] == doctest::Approx(15.0));
      CHECK(std_plane[i] == doctest::Approx(5.0));
    }
  }
}

TEST_CASE("std channel is minimized at the true disparity level") {
  D2GanConfig cfg;
  cfg.patch_size = 60;
  cfg.disparity_levels = 9;
  cfg.d_max = 4.0;
  // Scene at constant disparity 1.0, which sits exactly on the level grid.
  SyntheticConfig scene;
  scene.view_width = 40;
  scene.view_height = 40;
  scene.disparity = 1.0;
  const LightField lf = generate_synthetic_lf(scene);
  const AngularPos q{1, 1};
  const auto corners = quadrant_corners(8, 8, q);
  std::array<PlaneF, 4> refs;
  for (size_t i = 0; i < 4; ++i) refs[i] = to_unit(lf.at(corners[i]).y);
  const Tensor4 k = build_features(refs, corners, q, cfg, 8, 8);

  double best = 1e18;
  int best_level = -1;
  for (int l = 0; l < 9; ++l) {
    const double* std_plane = k.plane(0, 2 * l + 1);
    double acc = 0;
    for (int y = 12; y < 28; ++y) {
      for (int x = 12; x < 28; ++x) acc += std_plane[y * k.w + x];
    }
    if (acc < best) {
      best = acc;
      best_level = l;
    }
  }
  CHECK(best_level == 5);  // levels -4..4, so index 5 is d = +1
}

TEST_CASE("feature volume is permutation invariant in the references") {
  D2GanConfig cfg = small_config();
  const AngularPos q{2, 1};
  auto corners = quadrant_corners(8, 8, q);
  std::array<PlaneF, 4> refs;
  for (size_t i = 0; i < 4; ++i) refs[i] = smooth_plane(16, 16, 20 + i);

  const Tensor4 a = build_features(refs, corners, q, cfg, 8, 8);
  std::swap(refs[0], refs[2]);
  std::swap(corners[0], corners[2]);
  const Tensor4 b = build_features(refs, corners, q, cfg, 8, 8);
  for (size_t i = 0; i < a.size(); ++i) CHECK(a.v[i] == doctest::Approx(b.v[i]).epsilon(1e-12));
}

TEST_CASE("features reject references from the wrong quadrant") {
  D2GanConfig cfg = small_config();
  std::array<PlaneF, 4> refs;
  for (PlaneF& p : refs) p = PlaneF(8, 8, 0.0);
  const std::array<AngularPos, 4> wrong = {AngularPos{0, 0}, AngularPos{0, 7}, AngularPos{7, 0},
                                           AngularPos{7, 7}};
  CHECK_THROWS_AS(build_features(refs, wrong, {1, 1}, cfg, 8, 8), InvalidArgument);
}

TEST_CASE("feature construction gradient wrt the references") {
  D2GanConfig cfg;
  cfg.patch_size = 25;
  cfg.disparity_levels = 2;
  cfg.d_max = 1.3;  // fractional levels keep samples off integer crossings
  const AngularPos q{1, 1};
  const auto corners = quadrant_corners(8, 8, q);
  std::array<PlaneF, 4> refs;
  for (size_t i = 0; i < 4; ++i) refs[i] = smooth_plane(10, 10, 31 + i);

  const Tensor4 out = build_features(refs, corners, q, cfg, 8, 8);
  const Tensor4 w = gradcheck::projection_like(out, 35);
  const auto grads = build_features_backward(refs, corners, q, cfg, 8, 8, w);
  auto loss = [&] { return gradcheck::project(build_features(refs, corners, q, cfg, 8, 8), w); };
  for (size_t i = 0; i < 4; ++i) {
    CHECK(gradcheck::check_gradient(refs[i].data, grads[i].data, loss, 15, 40 + i) < 1e-3);
  }
}

TEST_CASE("generator stacks shrink 60 to 36 and compose") {
  D2GanConfig cfg;  // defaults: patch 60, L = 9
  nn::Rng rng(50);
  GeneratorPair gen(cfg);
  gen.init(rng);
  SynthSample s;
  s.positions = quadrant_corners(8, 8, {2, 2});
  s.q = {2, 2};
  for (size_t i = 0; i < 4; ++i) s.ref_patches[i] = smooth_plane(60, 60, 51 + i);
  GenForwardCache cache;
  const Tensor4 out = generator_forward(gen, s, cfg, 8, 8, &cache);
  CHECK(cache.features.c == 18);
  CHECK(cache.disparity.h == 48);
  CHECK(cache.disparity.w == 48);
  CHECK(out.h == 36);
  CHECK(out.w == 36);
  for (double v : out.v) {
    CHECK(v > 0.0);  // sigmoid head
    CHECK(v < 1.0);
  }
}

TEST_CASE("adversarial losses match hand-computed values") {
  D2GanConfig cfg;
  cfg.alpha = 0.2;
  cfg.beta = 0.2;
  ScoreBatch scores;
  scores.d1_real = {2.0};
  scores.d1_fake = {1.0};
  scores.d2_real = {3.0};
  scores.d2_fake = {0.5};
  const D2GanLosses l = d2gan_losses(scores, cfg);
  CHECK(l.d1 == doctest::Approx(0.2 * std::log(2.0) - 1.0).epsilon(1e-9));
  CHECK(l.d2 == doctest::Approx(0.2 * std::log(0.5) - 3.0).epsilon(1e-9));
  CHECK(l.generator == doctest::Approx(0.2 * std::log(0.5) - 1.0).epsilon(1e-9));
  CHECK(d2gan_objective(scores, cfg) == doctest::Approx(-4.0).epsilon(1e-9));
}

TEST_CASE("unit fake score removes the log term from the generator loss") {
  D2GanConfig cfg;
  ScoreBatch scores;
  scores.d1_real = {1.0};
  scores.d1_fake = {1.7};
  scores.d2_real = {1.0};
  scores.d2_fake = {1.0};
  const D2GanLosses l = d2gan_losses(scores, cfg);
  CHECK(l.generator == doctest::Approx(-1.7).epsilon(1e-12));
}

TEST_CASE("batch of one equals the unaveraged formula and batches average") {
  D2GanConfig cfg;
  cfg.alpha = 0.3;
  cfg.beta = 0.6;
  ScoreBatch one;
  one.d1_real = {1.5};
  one.d1_fake = {0.7};
  one.d2_real = {2.5};
  one.d2_fake = {1.2};
  const D2GanLosses l1 = d2gan_losses(one, cfg);
  CHECK(l1.d1 == doctest::Approx(0.3 * std::log(1.5) - 0.7).epsilon(1e-12));

  ScoreBatch two = one;
  two.d1_real.push_back(3.0);
  two.d1_fake.push_back(1.4);
  two.d2_real.push_back(5.0);
  two.d2_fake.push_back(2.4);
  ScoreBatch second;
  second.d1_real = {3.0};
  second.d1_fake = {1.4};
  second.d2_real = {5.0};
  second.d2_fake = {2.4};
  const D2GanLosses l2 = d2gan_losses(second, cfg);
  const D2GanLosses lb = d2gan_losses(two, cfg);
  CHECK(lb.d1 == doctest::Approx((l1.d1 + l2.d1) / 2).epsilon(1e-12));
  CHECK(lb.d2 == doctest::Approx((l1.d2 + l2.d2) / 2).epsilon(1e-12));
  CHECK(lb.generator == doctest::Approx((l1.generator + l2.generator) / 2).epsilon(1e-12));
}

TEST_CASE("non-positive scores are a domain error") {
  D2GanConfig cfg;
  ScoreBatch scores;
  scores.d1_real = {0.0};
  scores.d1_fake = {1.0};
  scores.d2_real = {1.0};
  scores.d2_fake = {1.0};
  CHECK_THROWS_AS(d2gan_losses(scores, cfg), std::domain_error);
}

TEST_CASE("discriminator emits strictly positive scores") {
  Discriminator d;
  nn::Rng rng(60);
  d.init(rng);
  Tensor4 x(3, 1, 36, 36);
  gradcheck::fill_random(x, 61, -5, 5);
  const Tensor4 s = d.forward(x);
  CHECK(s.n == 3);
  CHECK(s.c == 1);
  for (double v : s.v) CHECK(v > 0.0);
}

TEST_CASE("discriminator gradient matches finite differences") {
  Discriminator d;
  nn::Rng rng(62);
  d.init(rng);
  Tensor4 x(1, 1, 12, 12);
  gradcheck::fill_random(x, 63);
  Discriminator::Cache cache;
  const Tensor4 s = d.forward(x, &cache);
  CHECK(s.v[0] > 0.0);
  Tensor4 g(1, 1, 1, 1, 1.0);
  nn::zero_grads(d.params());
  const Tensor4 gx = d.backward(g, cache);
  auto loss = [&] { return d.forward(x).v[0]; };
  CHECK(gradcheck::check_gradient(x.v, gx.v, loss, 20, 64) < 1e-4);
  auto params = d.params();
  CHECK(gradcheck::check_gradient(params[0]->value.v, params[0]->grad.v, loss, 20, 65) < 1e-4);
  CHECK(gradcheck::check_gradient(params[9]->value.v, params[9]->grad.v, loss, 10, 66) < 1e-4);
}

TEST_CASE("full generator gradient through both nets and the warp") {
  D2GanConfig cfg = small_config();
  nn::Rng rng(70);
  GeneratorPair gen(cfg);
  gen.init(rng);
  const SynthSample s = smooth_sample(cfg, 71);

  GenForwardCache cache;
  const Tensor4 out = generator_forward(gen, s, cfg, 8, 8, &cache);
  const Tensor4 w = gradcheck::projection_like(out, 72);
  nn::zero_grads(gen.params());
  generator_backward(gen, s, cfg, cache, w);

  auto loss = [&] { return gradcheck::project(generator_forward(gen, s, cfg, 8, 8, nullptr), w); };

  std::vector<nn::Param*> params = gen.params();
  // disparity-net first kernel, disparity-net last bias, color-net first
  // kernel, color-net last bias; the warp sits between the two stacks.
  CHECK(gradcheck::check_gradient(params[0]->value.v, params[0]->grad.v, loss, 8, 73) < 1e-3);
  CHECK(gradcheck::check_gradient(params[10]->value.v, params[10]->grad.v, loss, 1, 74) < 1e-3);
  CHECK(gradcheck::check_gradient(params[11]->value.v, params[11]->grad.v, loss, 8, 75) < 1e-3);
  CHECK(gradcheck::check_gradient(params.back()->value.v, params.back()->grad.v, loss, 1, 76) < 1e-3);
}

TEST_CASE("training is reproducible and ignores the critics when the weight is zero") {
  D2GanConfig cfg = small_config();
  cfg.batch_size = 2;
  cfg.learning_rate = 1e-3;
  cfg.adv_weight = 0.0;
  SynthTrainConfig tc;
  tc.gan = cfg;
  tc.steps = 4;
  tc.log_every = 1;
  tc.jobs = 1;
  std::vector<SynthSample> data;
  for (int i = 0; i < 4; ++i) data.push_back(smooth_sample(cfg, 80 + i));

  SynthTrainResult a = train_d2gan(data, {}, tc, 123);
  SynthTrainResult b = train_d2gan(data, {}, tc, 123);
  REQUIRE(a.log.size() == b.log.size());
  for (size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].l_mse == b.log[i].l_mse);
    CHECK(a.log[i].l_d1 == b.log[i].l_d1);
  }

  // jobs=2 reduces worker gradients in fixed order: identical trajectory.
  SynthTrainConfig tc2 = tc;
  tc2.jobs = 2;
  SynthTrainResult c = train_d2gan(data, {}, tc2, 123);
  for (size_t i = 0; i < a.log.size(); ++i) CHECK(a.log[i].l_mse == c.log[i].l_mse);

  // With a zero adversarial weight the critic config cannot affect the
  // generator: changing alpha/beta leaves its parameters untouched.
  SynthTrainConfig tc3 = tc;
  tc3.gan.alpha = 0.9;
  tc3.gan.beta = 0.9;
  SynthTrainResult d = train_d2gan(data, {}, tc3, 123);
  const auto pa = a.generator.params();
  const auto pd = d.generator.params();
  for (size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value.v == pd[i]->value.v);
}

TEST_CASE("synthesized view dims equal the input view dims") {
  D2GanConfig cfg = small_config();  // output tile 8
  nn::Rng rng(90);
  GeneratorPair gen(cfg);
  gen.init(rng);
  const AngularPos q{1, 2};
  const auto corners = quadrant_corners(8, 8, q);
  for (int size : {8, 13, 20, 33}) {
    std::array<PlaneF, 4> refs;
    for (size_t i = 0; i < 4; ++i) refs[i] = smooth_plane(size, size + 3, 91 + i);
    const SynthesizedView out = synthesize_view(refs, corners, q, gen, cfg, 8, 8);
    CHECK(out.luma.width == size);
    CHECK(out.luma.height == size + 3);
    CHECK(out.disparity.width == size);
    for (double v : out.disparity.data) CHECK(std::fabs(v) <= cfg.d_max);
  }
  // Deterministic, including with tile-level parallelism.
  std::array<PlaneF, 4> refs;
  for (size_t i = 0; i < 4; ++i) refs[i] = smooth_plane(20, 20, 95 + i);
  const SynthesizedView s1 = synthesize_view(refs, corners, q, gen, cfg, 8, 8, 1);
  const SynthesizedView s2 = synthesize_view(refs, corners, q, gen, cfg, 8, 8, 2);
  CHECK(s1.luma == s2.luma);
  CHECK(s1.disparity == s2.disparity);
}

TEST_CASE("views smaller than the output tile are rejected") {
  D2GanConfig cfg = small_config();
  GeneratorPair gen(cfg);
  nn::Rng rng(96);
  gen.init(rng);
  const AngularPos q{1, 1};
  const auto corners = quadrant_corners(8, 8, q);
  std::array<PlaneF, 4> refs;
  for (size_t i = 0; i < 4; ++i) refs[i] = smooth_plane(4, 4, 97);
  CHECK_THROWS_AS(synthesize_view(refs, corners, q, gen, cfg, 8, 8), InvalidArgument);
}

TEST_CASE("synthesis model file round trip") {
  namespace fs = std::filesystem;
  D2GanConfig cfg = small_config();
  nn::Rng rng(100);
  GeneratorPair gen(cfg);
  gen.init(rng);
  Discriminator d1, d2;
  d1.init(rng);
  d2.init(rng);
  const fs::path path = fs::temp_directory_path() / "synth_roundtrip.lfnn";
  save_synthesis_model(gen, &d1, &d2, path);
  GeneratorPair back = load_synthesis_model(path, cfg);
  const SynthSample s = smooth_sample(cfg, 101);
  const Tensor4 a = generator_forward(gen, s, cfg, 8, 8, nullptr);
  const Tensor4 b = generator_forward(back, s, cfg, 8, 8, nullptr);
  CHECK(a.v == b.v);

  // Config mismatch (different feature channel count) is rejected.
  D2GanConfig other = cfg;
  other.disparity_levels = 5;
  CHECK_THROWS_AS(load_synthesis_model(path, other), FormatError);
  fs::remove(path);
}
