#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "reference.hpp"
#include "vpt/backbone.hpp"
#include "vpt/ops.hpp"

using vpt::Backbone;
using vpt::BackboneKind;
using vpt::Tensor;

namespace {

Tensor random_images(std::size_t n, const vpt::ArchSpec& arch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, 1.0f);
  Tensor t({n, arch.in_channels, arch.in_height, arch.in_width});
  for (auto& v : t.mutable_data()) v = g(rng);
  return t;
}

// Two classes: dark images and bright images, with pixel noise.
vpt::LabeledDataset separable_set(std::size_t n, std::size_t side) {
  std::mt19937_64 rng(9);
  std::normal_distribution<float> g(0.0f, 0.3f);
  vpt::LabeledDataset d;
  d.images = Tensor({n, 3, side, side});
  auto px = d.images.mutable_data();
  const std::size_t block = 3 * side * side;
  for (std::size_t i = 0; i < n; ++i) {
    d.labels.push_back(i % 2);
    for (std::size_t k = 0; k < block; ++k) px[i * block + k] = (i % 2 ? 0.7f : 0.3f) + g(rng);
  }
  d.class_names = {"dark", "bright"};
  d.stats = vpt::compute_stats(d.images);
  return d;
}

bool params_equal(const Backbone& a, const Backbone& b) { return a.serialize_params() == b.serialize_params(); }

}  // namespace

TEST_CASE("build is deterministic and seeded") {
  const auto arch = fixtures::tiny_arch(BackboneKind::classifier);
  CHECK(params_equal(Backbone::build(BackboneKind::classifier, arch, 4),
                     Backbone::build(BackboneKind::classifier, arch, 4)));
  CHECK_FALSE(params_equal(Backbone::build(BackboneKind::classifier, arch, 4),
                           Backbone::build(BackboneKind::classifier, arch, 5)));
}

TEST_CASE("output shapes") {
  vpt::ArchSpec arch;  // 16/32/64 on 3x32x32
  arch.head = 10;
  const Tensor x = random_images(3, arch, 1);
  auto cls = Backbone::build(BackboneKind::classifier, arch, 0);
  CHECK(cls.logits(x).dims() == vpt::Shape{3, 10});
  CHECK(cls.features(x).dims() == vpt::Shape{3, cls.feature_dim()});
  CHECK(cls.feature_dim() == 64 * 4 * 4);

  arch.head = 64;
  auto dual = Backbone::build(BackboneKind::dual_encoder, arch, 0);
  CHECK(dual.features(x).dims() == vpt::Shape{3, 64});
  CHECK(dual.logits(x).dims() == vpt::Shape{3, dual.native_classes()});
}

TEST_CASE("inconsistent specs and inputs are rejected") {
  vpt::ArchSpec arch;
  arch.in_height = 30;  // not divisible by 2^3
  CHECK_THROWS_AS(Backbone::build(BackboneKind::classifier, arch, 0), vpt::ConfigError);
  arch = fixtures::tiny_arch(BackboneKind::classifier);
  auto b = Backbone::build(BackboneKind::classifier, arch, 0);
  CHECK_THROWS_AS(b.logits(Tensor({1, 3, 8, 8})), vpt::ShapeError);
  CHECK_THROWS_AS(b.features(Tensor({1, 1, 16, 16})), vpt::ShapeError);
  CHECK_THROWS_AS(b.table(), vpt::ConfigError);
}

TEST_CASE("forward matches the double-precision reference") {
  for (auto kind : {BackboneKind::classifier, BackboneKind::dual_encoder}) {
    const auto arch = fixtures::tiny_arch(kind);
    auto b = Backbone::build(kind, arch, 3);
    const Tensor x = random_images(2, arch, 8);
    const ref::T expected = [&] {
      ref::T h = ref::from(x);
      for (std::size_t s = 0; s < arch.channels.size(); ++s) {
        const std::string stem = "conv" + std::to_string(s + 1);
        h = ref::max_pool2x2(
            ref::relu(ref::conv2d(h, ref::from(b.param(stem + ".weight")), ref::from(b.param(stem + ".bias")), 1, 1)));
      }
      h = ref::flatten(h);
      const std::string head = kind == BackboneKind::classifier ? "head" : "proj";
      return ref::linear(h, ref::from(b.param(head + ".weight")), ref::from(b.param(head + ".bias")));
    }();
    const Tensor got = kind == BackboneKind::classifier ? b.logits(x) : b.features(x);
    REQUIRE(got.numel() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) CHECK(got.at(i) == doctest::Approx(expected.v[i]).epsilon(1e-4));
  }
}

TEST_CASE("dual encoder logits are scaled cosines against the active table") {
  auto b = fixtures::tiny_pretrained(BackboneKind::dual_encoder);
  const Tensor x = random_images(20, b.arch(), 2);
  SUBCASE("self-similarity is maximal") {
    const Tensor feats = b.features(x);
    b.table().embeddings = feats.clone();
    const auto pred = vpt::ops::argmax_rows(b.logits(x));
    for (std::size_t i = 0; i < pred.size(); ++i) CHECK(pred[i] == i);
  }
  SUBCASE("argmax invariant to temperature") {
    std::mt19937_64 rng(12);
    for (int batch = 0; batch < 100; ++batch) {
      const Tensor xb = random_images(4, b.arch(), rng());
      b.table().temperature = 10.0f;
      const auto a = vpt::ops::argmax_rows(b.logits(xb));
      b.table().temperature = 20.0f;
      CHECK(vpt::ops::argmax_rows(b.logits(xb)) == a);
    }
  }
  SUBCASE("loop oracle") {
    const Tensor feats = b.features(x), logits = b.logits(x), table = b.table().active();
    const std::size_t d = b.feature_dim(), k = table.dim(0);
    for (std::size_t n = 0; n < 20; ++n) {
      std::size_t best = 0;
      double best_v = -1e300;
      for (std::size_t j = 0; j < k; ++j) {
        std::vector<double> f(d), r(d);
        for (std::size_t i = 0; i < d; ++i) {
          f[i] = feats.at(n * d + i);
          r[i] = table.at(j * d + i);
        }
        const double c = ref::cosine(f, r);
        CHECK(logits.at(n * k + j) == doctest::Approx(b.table().temperature * c).epsilon(1e-4));
        if (c > best_v) best_v = c, best = j;
      }
      CHECK(vpt::ops::argmax_rows(logits)[n] == best);
    }
  }
}

TEST_CASE("class embedding table noise") {
  auto t = vpt::ClassEmbeddingTable::random(6, 16, 3, 10.0f);
  for (std::size_t r = 0; r < 6; ++r) {
    double norm = 0;
    for (std::size_t j = 0; j < 16; ++j) norm += t.embeddings.at(r * 16 + j) * t.embeddings.at(r * 16 + j);
    CHECK(norm > 0);
  }
  CHECK(vpt::bit_equal(t.active(), t.embeddings));
  t.quality_noise = 0.5;
  const Tensor noisy = t.active();
  CHECK_FALSE(vpt::bit_equal(noisy, t.embeddings));
  CHECK(vpt::bit_equal(noisy, t.active()));
  t.quality_noise = -1;
  CHECK_THROWS_AS(t.active(), vpt::ConfigError);
}

TEST_CASE("pretraining") {
  SUBCASE("separable two-class set") {
    auto arch = fixtures::tiny_arch(BackboneKind::classifier);
    arch.head = 2;
    const auto data = separable_set(64, 16);
    vpt::PretrainOptions opt;
    opt.epochs = 10;
    vpt::PretrainReport report;
    auto b = vpt::pretrain(Backbone::build(BackboneKind::classifier, arch, 0), data, opt, &report);
    CHECK(b.frozen());
    CHECK(report.train_accuracy >= 0.95);
    CHECK(b.class_names == data.class_names);
  }
  SUBCASE("zero epochs only freezes") {
    auto arch = fixtures::tiny_arch(BackboneKind::classifier);
    arch.head = 2;
    const auto fresh = Backbone::build(BackboneKind::classifier, arch, 1);
    vpt::PretrainOptions opt;
    opt.epochs = 0;
    auto b = vpt::pretrain(fresh, separable_set(16, 16), opt);
    CHECK(b.frozen());
    CHECK(params_equal(b, fresh));
    CHECK_THROWS(vpt::pretrain(b, separable_set(16, 16), opt));
  }
  SUBCASE("reproducible to the bit") {
    auto run = [] {
      vpt::PretrainReport r;
      auto suite = vpt::make_suite("pretrain-8", 64, 8, 0, 16, 16);
      vpt::PretrainOptions opt;
      opt.epochs = 2;
      auto b = vpt::pretrain(Backbone::build(BackboneKind::classifier, fixtures::tiny_arch(BackboneKind::classifier), 0),
                             suite.train, opt, &r);
      return std::make_pair(r.epoch_loss, b.serialize_params());
    };
    const auto a = run(), b = run();
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
  }
}

TEST_CASE("freeze and trainable copy") {
  auto b = fixtures::tiny_pretrained(BackboneKind::classifier);
  CHECK(b.frozen());
  CHECK_THROWS(b.trainable_params());
  const auto before = b.serialize_params();
  auto copy = b.trainable_copy();
  CHECK_FALSE(copy.frozen());
  auto params = copy.trainable_params();
  params.front().mutable_data()[0] += 1.0f;
  CHECK(b.serialize_params() == before);

  // Gradients never reach frozen weights.
  const Tensor x = random_images(2, b.arch(), 4);
  const std::vector<std::size_t> y{0, 1};
  Tensor input = x.clone();
  input.set_requires_grad(true);
  vpt::backward(vpt::ops::softmax_cross_entropy(b.logits(input), y));
  CHECK(input.has_grad());
  for (const auto& n : b.param_names())
    for (float g : b.param(n).grad()) CHECK(g == 0.0f);
  CHECK(b.serialize_params() == before);
}

TEST_CASE("features are pure") {
  auto b = fixtures::tiny_pretrained(BackboneKind::classifier);
  Tensor x = random_images(1, b.arch(), 6);
  Tensor twice({2, 3, 16, 16});
  std::copy(x.data().begin(), x.data().end(), twice.mutable_data().begin());
  std::copy(x.data().begin(), x.data().end(), twice.mutable_data().begin() + static_cast<std::ptrdiff_t>(x.numel()));
  const Tensor f = b.features(twice);
  const std::size_t d = b.feature_dim();
  for (std::size_t i = 0; i < d; ++i) CHECK(f.at(i) == f.at(d + i));
  CHECK(vpt::bit_equal(b.features(twice), f));
}

TEST_CASE("checkpoint round trip") {
  for (auto kind : {BackboneKind::classifier, BackboneKind::dual_encoder}) {
    auto b = fixtures::tiny_pretrained(kind);
    if (kind == BackboneKind::dual_encoder) b.table().quality_noise = 0.3;
    const auto dir = fixtures::scratch_dir("ckpt_" + vpt::to_string(kind));
    b.save(dir / "m");
    CHECK_THROWS_AS(b.save(dir / "m"), vpt::DataError);
    const auto loaded = Backbone::load(dir / "m");
    CHECK(loaded.frozen());
    CHECK(loaded.kind() == kind);
    CHECK(loaded.serialize_params() == b.serialize_params());
    CHECK(loaded.class_names == b.class_names);
    CHECK(loaded.stats.mean == b.stats.mean);
    const Tensor x = random_images(3, b.arch(), 1);
    CHECK(vpt::bit_equal(loaded.logits(x), b.logits(x)));
  }
  CHECK_THROWS_AS(Backbone::load("/nonexistent/ckpt"), vpt::DataError);
}
