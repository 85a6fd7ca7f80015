#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "vpt/datasets.hpp"
#include "vpt/tensor_io.hpp"

using vpt::Tensor;

namespace {

std::string message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

vpt::TaskSpec spec(std::vector<std::size_t> classes, std::size_t count, std::uint64_t seed, double jitter = 0.5) {
  vpt::TaskSpec s;
  s.classes = std::move(classes);
  s.count = count;
  s.seed = seed;
  s.jitter = jitter;
  s.height = 16;
  s.width = 16;
  return s;
}

std::vector<float> image_of(const vpt::LabeledDataset& d, std::size_t i) {
  const std::size_t block = d.channels() * d.height() * d.width();
  const auto px = d.images.data();
  return {px.begin() + static_cast<std::ptrdiff_t>(i * block), px.begin() + static_cast<std::ptrdiff_t>((i + 1) * block)};
}

}  // namespace

TEST_CASE("generator") {
  SUBCASE("deterministic per seed") {
    const auto a = vpt::generate_synthetic(spec({0, 3, 5}, 30, 7));
    const auto b = vpt::generate_synthetic(spec({0, 3, 5}, 30, 7));
    const auto c = vpt::generate_synthetic(spec({0, 3, 5}, 30, 8));
    CHECK(vpt::dataset_digest(a) == vpt::dataset_digest(b));
    CHECK(vpt::dataset_digest(a) != vpt::dataset_digest(c));
    CHECK_NOTHROW(a.validate());
    CHECK(a.class_names == std::vector<std::string>{vpt::shape_names()[0], vpt::shape_names()[3], vpt::shape_names()[5]});
  }
  SUBCASE("class balance within one sample") {
    for (std::size_t count : {8, 13, 31}) {
      const auto d = vpt::generate_synthetic(spec({1, 2, 4}, count, 1));
      std::map<std::size_t, std::size_t> hist;
      for (auto y : d.labels) ++hist[y];
      std::size_t lo = count, hi = 0;
      for (auto& [k, v] : hist) lo = std::min(lo, v), hi = std::max(hi, v);
      CHECK(hist.size() == 3);
      CHECK(hi - lo <= 1);
    }
  }
  SUBCASE("zero jitter renders each class identically") {
    const auto d = vpt::generate_synthetic(spec({0, 6}, 12, 3, 0.0));
    for (std::size_t i = 0; i < d.size(); ++i)
      for (std::size_t j = i + 1; j < d.size(); ++j)
        if (d.labels[i] == d.labels[j]) CHECK(image_of(d, i) == image_of(d, j));
    const auto jittered = vpt::generate_synthetic(spec({0, 6}, 12, 3, 0.8));
    CHECK(image_of(jittered, 0) != image_of(jittered, 2));
  }
  SUBCASE("invalid specs") {
    CHECK_THROWS_AS(vpt::generate_synthetic(spec({0, 1, 2}, 2, 0)), vpt::ConfigError);
    CHECK_THROWS_AS(vpt::generate_synthetic(spec({}, 4, 0)), vpt::ConfigError);
    CHECK_THROWS_AS(vpt::generate_synthetic(spec({9}, 4, 0)), vpt::ConfigError);
    CHECK_THROWS_AS(vpt::generate_synthetic(spec({0}, 4, 0, 1.5)), vpt::ConfigError);
  }
}

TEST_CASE("pixel shifts") {
  auto d = vpt::generate_synthetic(spec({0, 1}, 20, 2));
  for (auto kind : {vpt::ShiftKind::color_shift, vpt::ShiftKind::texture_noise}) {
    auto [train, test] = vpt::apply_shift(d, {kind, 0.0, {}, 0.5}, 4);
    auto [train2, test2] = vpt::apply_shift(d, {kind, 0.7, {}, 0.5}, 4);
    CHECK(train.size() + test.size() == d.size());
    CHECK(test.labels == test2.labels);
    CHECK(vpt::bit_equal(train.images, train2.images));
    // magnitude 0 leaves the test rows as they were in the source
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < test.size(); ++i) {
      for (std::size_t j = 0; j < d.size(); ++j)
        if (image_of(d, j) == image_of(test, i)) {
          rows.push_back(j);
          break;
        }
    }
    CHECK(rows.size() == test.size());
    CHECK_FALSE(vpt::bit_equal(test.images, test2.images));
    CHECK(vpt::bit_equal(vpt::shift_pixels(d.images, kind, 0.0, 1), d.images));
  }
  CHECK_THROWS_AS(vpt::apply_shift(d, {vpt::ShiftKind::color_shift, 1.2, {}, 0.5}, 0), vpt::ConfigError);
}

TEST_CASE("domain split") {
  SUBCASE("disjoint for random tag assignments") {
    std::mt19937_64 rng(5);
    const std::vector<std::string> tags{"A", "B", "C", "D"};
    for (int trial = 0; trial < 20; ++trial) {
      auto d = vpt::generate_synthetic(spec({0, 1}, 16, rng()));
      d.domain_tags.clear();
      for (std::size_t i = 0; i < d.size(); ++i) d.domain_tags.push_back(tags[i < 2 ? i : rng() % 4]);
      std::set<std::string> present(d.domain_tags.begin(), d.domain_tags.end());
      const std::string held = *std::next(present.begin(), static_cast<std::ptrdiff_t>(rng() % present.size()));
      auto [train, test] = vpt::apply_shift(d, {vpt::ShiftKind::domain_split, 0.0, {held}, 0.5}, 0);
      for (const auto& t : train.domain_tags) CHECK(t != held);
      for (const auto& t : test.domain_tags) CHECK(t == held);
      CHECK(train.size() + test.size() == d.size());
    }
  }
  SUBCASE("needs two domains") {
    auto d = vpt::generate_synthetic(spec({0, 1}, 6, 1));
    d.domain_tags.assign(6, "A");
    CHECK_THROWS_AS(vpt::apply_shift(d, {vpt::ShiftKind::domain_split, 0.0, {"A"}, 0.5}, 0), vpt::DataError);
  }
  SUBCASE("suite keeps domains apart") {
    const auto s = vpt::make_suite("down-4-domains", 30, 10, 2, 16, 16);
    std::set<std::string> train_tags(s.train.domain_tags.begin(), s.train.domain_tags.end());
    for (const auto& t : s.test.domain_tags) CHECK_FALSE(train_tags.count(t));
  }
}

TEST_CASE("resize") {
  const vpt::NormalizationStats stats{{0.0f}, {1.0f}};
  SUBCASE("same size is a copy") {
    auto d = vpt::generate_synthetic(spec({0, 1}, 4, 1));
    const auto r = vpt::resize_to_model(d, 16, 16, d.stats);
    CHECK(vpt::bit_equal(r.images, d.images));
  }
  SUBCASE("constant stays constant") {
    vpt::LabeledDataset d{Tensor({1, 1, 5, 7}, 0.375f), {0}, {"c"}, stats, {}};
    const auto r = vpt::resize_to_model(d, 12, 3, stats);
    for (float v : r.images.data()) CHECK(v == doctest::Approx(0.375).epsilon(1e-6));
  }
  SUBCASE("2x2 to 1x1 averages") {
    vpt::LabeledDataset d{Tensor({1, 1, 2, 2}, {0.0f, 1.0f, 1.0f, 0.25f}), {0}, {"c"}, stats, {}};
    CHECK(vpt::resize_to_model(d, 1, 1, stats).images.item() == doctest::Approx(0.5625).epsilon(1e-6));
  }
  SUBCASE("adopts model stats") {
    auto d = vpt::generate_synthetic(spec({0, 1}, 4, 1));
    const vpt::NormalizationStats model{{0.1f, 0.2f, 0.3f}, {0.5f, 0.5f, 0.5f}};
    const auto r = vpt::resize_to_model(d, 32, 32, model);
    CHECK(r.stats.mean == model.mean);
    CHECK(r.images.dims() == vpt::Shape{4, 3, 32, 32});
    const Tensor b = r.batch(std::vector<std::size_t>{0});
    CHECK(b.at(0) == doctest::Approx((r.images.at(0) - 0.1f) / 0.5f));
  }
}

TEST_CASE("external manifests") {
  const auto dir = fixtures::scratch_dir("external");
  auto d = vpt::generate_synthetic(spec({2, 4}, 10, 3));
  d.domain_tags.assign(10, "A");
  d.domain_tags[3] = "B";
  vpt::save_external(d, dir, "set");
  SUBCASE("round trip") {
    const auto back = vpt::load_external(dir / "set.manifest");
    CHECK(vpt::bit_equal(back.images, d.images));
    CHECK(back.labels == d.labels);
    CHECK(back.class_names == d.class_names);
    CHECK(back.domain_tags == d.domain_tags);
    CHECK(back.stats.std == d.stats.std);
    CHECK(vpt::read_file_bytes(dir / "set_images.vpt") == vpt::encode_tensor(d.images));
  }
  SUBCASE("truncated images file") {
    auto bytes = vpt::read_file_bytes(dir / "set_images.vpt");
    bytes.resize(bytes.size() - 8);
    vpt::write_file_bytes(dir / "set_images.vpt", bytes);
    const auto msg = message_of([&] { vpt::load_external(dir / "set.manifest"); });
    CHECK(msg.find("expected") != std::string::npos);
    CHECK(msg.find("got " + std::to_string(bytes.size())) != std::string::npos);
  }
  SUBCASE("label count mismatch") {
    vpt::write_tensor(dir / "set_labels.vpt", Tensor({9}, 0.0f));
    CHECK(message_of([&] { vpt::load_external(dir / "set.manifest"); }).find("does not match image count") !=
          std::string::npos);
  }
  SUBCASE("bad magic") {
    auto bytes = vpt::read_file_bytes(dir / "set_labels.vpt");
    bytes[1] = 'Q';
    vpt::write_file_bytes(dir / "set_labels.vpt", bytes);
    CHECK(message_of([&] { vpt::load_external(dir / "set.manifest"); }).find("magic") != std::string::npos);
  }
  SUBCASE("unknown manifest key") {
    vpt::write_text_file(dir / "bad.manifest", "images: set_images.vpt\nlabels: set_labels.vpt\nclass_names: a,b\ncolour: red\n");
    CHECK(message_of([&] { vpt::load_external(dir / "bad.manifest"); }).find("colour") != std::string::npos);
  }
}

TEST_CASE("dataset invariants") {
  auto d = vpt::generate_synthetic(spec({0, 1}, 4, 1));
  auto bad = d;
  bad.labels.pop_back();
  CHECK_THROWS_AS(bad.validate(), vpt::DataError);
  bad = d;
  bad.labels[0] = 2;
  CHECK_THROWS_AS(bad.validate(), vpt::DataError);
  bad = d;
  bad.stats.std[1] = 0.0f;
  CHECK_THROWS_AS(bad.validate(), vpt::DataError);
}

TEST_CASE("suites") {
  for (const auto& name : vpt::suite_names()) {
    const auto s = vpt::make_suite(name, 16, 8, 0, 16, 16);
    CHECK_NOTHROW(s.train.validate());
    CHECK_NOTHROW(s.test.validate());
    CHECK(s.train.class_names == s.test.class_names);
    CHECK(vpt::dataset_digest(s.train) == vpt::dataset_digest(vpt::make_suite(name, 16, 8, 0, 16, 16).train));
  }
  CHECK_THROWS_AS(vpt::make_suite("down-9", 8, 8, 0), vpt::ConfigError);
}
