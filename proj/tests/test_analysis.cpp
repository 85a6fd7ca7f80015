#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "vpt/analysis.hpp"

using vpt::FeatureDistribution;
using vpt::Tensor;

namespace {

Tensor random_features(std::size_t n, std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<float> g(0.0f, 1.0f);
  Tensor t({n, d});
  for (auto& v : t.mutable_data()) v = g(rng) + 0.5f;
  return t;
}

FeatureDistribution dist(std::vector<double> mean, std::vector<double> cov) {
  FeatureDistribution f;
  f.mean = std::move(mean);
  f.cov = std::move(cov);
  f.n_samples = 10;
  return f;
}

// Random SPD matrix L L^T + 0.1 I, row-major.
std::vector<double> random_spd(std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<double> l(d * d), out(d * d, 0.0);
  for (auto& v : l) v = g(rng);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t k = 0; k < d; ++k) out[i * d + j] += l[i * d + k] * l[j * d + k];
      if (i == j) out[i * d + j] += 0.1;
    }
  return out;
}

vpt::LabeledDataset one_class(std::size_t count, std::uint64_t seed, double jitter, const vpt::Backbone& b) {
  vpt::TaskSpec s;
  s.classes = {3};
  s.count = count;
  s.seed = seed;
  s.jitter = jitter;
  s.height = 16;
  s.width = 16;
  return vpt::resize_to_model(vpt::generate_synthetic(s), b.arch().in_height, b.arch().in_width, b.stats);
}

}  // namespace

TEST_CASE("feature moments") {
  SUBCASE("two-pass oracle") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 10; ++trial) {
      const std::size_t n = 2 + rng() % 30, d = 1 + rng() % 6;
      const Tensor f = random_features(n, d, rng);
      const auto m = vpt::feature_moments(f);
      CHECK(m.n_samples == n);
      std::vector<double> mean(d, 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) mean[j] += f.at(i * d + j) / static_cast<double>(n);
      for (std::size_t j = 0; j < d; ++j) CHECK(std::abs(m.mean[j] - mean[j]) <= 1e-6);
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) {
          double c = 0.0;
          for (std::size_t i = 0; i < n; ++i) c += (f.at(i * d + a) - mean[a]) * (f.at(i * d + b) - mean[b]);
          c /= static_cast<double>(n - 1);
          CHECK(std::abs(m.cov[a * d + b] - c) <= 1e-6);
          CHECK(m.cov[a * d + b] == m.cov[b * d + a]);
        }
      for (std::size_t j = 0; j < d; ++j) CHECK(m.cov[j * d + j] >= 0.0);
    }
  }
  SUBCASE("identical rows have zero covariance") {
    const auto m = vpt::feature_moments(Tensor({2, 3}, {1.0f, 2.0f, 3.0f, 1.0f, 2.0f, 3.0f}));
    for (double c : m.cov) CHECK(c == 0.0);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(vpt::feature_moments(Tensor({1, 3}, 1.0f)), vpt::DataError);
    CHECK_THROWS_AS(vpt::feature_moments(Tensor({4}, 1.0f)), vpt::ShapeError);
  }
  SUBCASE("a cap at or above N uses every image") {
    const auto b = fixtures::tiny_pretrained(vpt::BackboneKind::classifier);
    const auto data = fixtures::pretrain_heldout(b, 40);
    std::vector<std::size_t> all(data.size());
    std::iota(all.begin(), all.end(), 0);
    const auto direct = vpt::feature_moments(b.features(data.batch(all)));
    const auto capped = vpt::feature_moments(b, data, 1000, 3);
    CHECK(capped.n_samples == data.size());
    for (std::size_t i = 0; i < direct.mean.size(); ++i) CHECK(std::abs(capped.mean[i] - direct.mean[i]) <= 1e-6);
    CHECK(vpt::feature_moments(b, data, 10, 3).n_samples == 10);
  }
}

TEST_CASE("frechet distance closed forms") {
  SUBCASE("identical inputs") {
    std::mt19937_64 rng(2);
    const auto a = dist({1.0, -2.0, 0.5}, random_spd(3, rng));
    CHECK(vpt::frechet_distance(a, a) <= 1e-6);
  }
  SUBCASE("mean shift with equal covariances") {
    const std::vector<double> cov{2.0, 0.5, 0.5, 1.0};
    CHECK(std::abs(vpt::frechet_distance(dist({0.0, 0.0}, cov), dist({2.0, 0.0}, cov)) - 4.0) <= 1e-6);
  }
  SUBCASE("scalar variances 1 and 4") {
    CHECK(std::abs(vpt::frechet_distance(dist({0.0}, {1.0}), dist({0.0}, {4.0})) - 1.0) <= 1e-6);
  }
  SUBCASE("diagonal covariances reduce to per-axis (sqrt a - sqrt b)^2") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.1, 5.0);
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t d = 1 + rng() % 5;
      std::vector<double> ma(d), mb(d), ca(d * d, 0.0), cb(d * d, 0.0);
      double expected = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        ma[i] = u(rng) - 2.5;
        mb[i] = u(rng) - 2.5;
        ca[i * d + i] = u(rng);
        cb[i * d + i] = u(rng);
        const double s = std::sqrt(ca[i * d + i]) - std::sqrt(cb[i * d + i]);
        expected += (ma[i] - mb[i]) * (ma[i] - mb[i]) + s * s;
      }
      CHECK(std::abs(vpt::frechet_distance(dist(ma, ca), dist(mb, cb)) - expected) <= 1e-6);
    }
  }
  SUBCASE("symmetric and non-negative") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t d = 1 + rng() % 6;
      std::vector<double> ma(d), mb(d);
      std::normal_distribution<double> g;
      for (std::size_t i = 0; i < d; ++i) ma[i] = g(rng), mb[i] = g(rng);
      const auto a = dist(ma, random_spd(d, rng)), b = dist(mb, random_spd(d, rng));
      const double ab = vpt::frechet_distance(a, b), ba = vpt::frechet_distance(b, a);
      CHECK(ab >= 0.0);
      CHECK(std::abs(ab - ba) <= 1e-6 * std::max(1.0, ab));
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(vpt::frechet_distance(dist({0.0}, {1.0}), dist({0.0, 0.0}, {1, 0, 0, 1})), vpt::ShapeError);
    CHECK_THROWS_AS(vpt::frechet_distance(dist({0.0}, {-1.0}), dist({0.0}, {1.0})), vpt::NumericError);
  }
}

TEST_CASE("pair diversity") {
  std::mt19937_64 rng(5);
  SUBCASE("range and repeated rows") {
    for (int trial = 0; trial < 20; ++trial) {
      const Tensor f = random_features(8, 5, rng);
      const double v = vpt::pair_diversity(f, vpt::sample_pairs(8, 30, rng()));
      CHECK(v >= 0.0);
      CHECK(v <= 2.0);
    }
    const Tensor same({3, 2}, {1.0f, 2.0f, 1.0f, 2.0f, 1.0f, 2.0f});
    CHECK(vpt::pair_diversity(same, {{0, 1}, {1, 2}}) == doctest::Approx(0.0).epsilon(1e-12));
    const Tensor opposite({2, 2}, {1.0f, 0.0f, -1.0f, 0.0f});
    CHECK(vpt::pair_diversity(opposite, {{0, 1}}) == doctest::Approx(2.0));
  }
  SUBCASE("same pairs after a shuffle give the same score") {
    const std::size_t n = 12, d = 4;
    const Tensor f = random_features(n, d, rng);
    const auto pairs = vpt::sample_pairs(n, 40, 9);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    // row perm[i] of the shuffled tensor holds original row i
    Tensor shuffled({n, d});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) shuffled.mutable_data()[perm[i] * d + j] = f.at(i * d + j);
    std::vector<vpt::IndexPair> moved;
    for (auto [i, j] : pairs) moved.emplace_back(perm[i], perm[j]);
    CHECK(vpt::pair_diversity(shuffled, moved) == vpt::pair_diversity(f, pairs));
  }
  SUBCASE("sampled pairs are distinct, in range and seeded") {
    const auto p = vpt::sample_pairs(5, 200, 1);
    for (auto [i, j] : p) {
      CHECK(i != j);
      CHECK(i < 5);
      CHECK(j < 5);
    }
    CHECK(p == vpt::sample_pairs(5, 200, 1));
    CHECK(p != vpt::sample_pairs(5, 200, 2));
    CHECK_THROWS_AS(vpt::sample_pairs(1, 3, 0), vpt::DataError);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(vpt::pair_diversity(Tensor({2, 2}, 1.0f), {{0, 2}}), vpt::DataError);
    CHECK_THROWS_AS(vpt::pair_diversity(Tensor({2, 2}, {0.0f, 0.0f, 1.0f, 1.0f}), {{0, 1}}), vpt::NumericError);
  }
}

TEST_CASE("perceptual diversity on images") {
  const auto b = fixtures::tiny_pretrained(vpt::BackboneKind::classifier);
  SUBCASE("one repeated image") {
    const auto data = one_class(6, 1, 0.0, b);
    CHECK(vpt::perceptual_diversity(b, data, 50, 0) == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("jitter raises diversity") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const double flat = vpt::perceptual_diversity(b, one_class(40, seed, 0.0, b), 200, seed);
      const double varied = vpt::perceptual_diversity(b, one_class(40, seed, 1.0, b), 200, seed);
      CHECK(flat < varied);
    }
  }
  SUBCASE("needs two images") { CHECK_THROWS_AS(vpt::perceptual_diversity(b, one_class(1, 0, 0.0, b), 5, 0), vpt::DataError); }
}

TEST_CASE("correlation") {
  SUBCASE("trivial lines") {
    const std::vector<double> x{1, 2, 3, 4, 5}, twice{2, 4, 6, 8, 10}, neg{-1, -2, -3, -4, -5};
    CHECK(vpt::pearson(x, twice) == doctest::Approx(1.0));
    CHECK(vpt::spearman(x, neg) == doctest::Approx(-1.0));
    // monotone but nonlinear
    CHECK(vpt::spearman(x, {1, 8, 27, 64, 125}) == doctest::Approx(1.0));
    CHECK(vpt::pearson(x, {1, 8, 27, 64, 125}) < 1.0);
  }
  SUBCASE("hand-computed five points") {
    // dx = dy-permuted {-2,-1,0,1,2}: sxy = 8, sxx = syy = 10
    const std::vector<double> x{1, 2, 3, 4, 5}, y{2, 1, 4, 3, 5};
    const auto r = vpt::correlation_report(x, y);
    CHECK(std::abs(r.pearson - 0.8) <= 1e-12);
    CHECK(std::abs(r.spearman - 0.8) <= 1e-12);
  }
  SUBCASE("ties take the average rank") {
    // ranks {1,2.5,2.5,4,5} and {1,2,3.5,5,3.5}: 7.25 / 9.5
    const std::vector<double> x{1, 2, 2, 4, 5}, y{5, 6, 7, 8, 7};
    CHECK(std::abs(vpt::spearman(x, y) - 7.25 / 9.5) <= 1e-12);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(vpt::pearson({1, 1, 1}, {1, 2, 3}), vpt::NumericError);
    CHECK_THROWS_AS(vpt::spearman({1, 2, 3}, {4, 4, 4}), vpt::NumericError);
    CHECK_THROWS_AS(vpt::pearson({1, 2}, {1, 2}), vpt::DataError);
    CHECK_THROWS_AS(vpt::correlation_report({1, 2, 3}, {1, 2}), vpt::DataError);
  }
  SUBCASE("paired table") {
    const auto r = vpt::correlation_report({0.5, 1, 2}, {3, 2, 1});
    CHECK(r.table("fid", "gain") == "fid,gain\n0.500000,3.000000\n1.000000,2.000000\n2.000000,1.000000\n");
  }
}

TEST_CASE("report emission") {
  SUBCASE("analysis csv schema") {
    vpt::AnalysisRow row{"down-4-far", 1.5, 0.25, 0.4, 0.7, 0.3};
    const auto csv = vpt::analysis_csv({row});
    CHECK(csv == "dataset,fid_to_pretrain,diversity,zero_shot_acc,vp_acc,gain\n"
                 "down-4-far,1.500000,0.250000,0.400000,0.700000,0.300000\n");
  }
  SUBCASE("scatter svg") {
    const auto svg = vpt::scatter_svg({0, 1, 2}, {1, 0, 1}, {"a", "b<c"}, "title", "x axis", "y axis");
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find(">x axis<") != std::string::npos);
    CHECK(svg.find(">y axis<") != std::string::npos);
    CHECK(svg.find("b&lt;c") != std::string::npos);
    std::size_t circles = 0;
    for (auto pos = svg.find("<circle"); pos != std::string::npos; pos = svg.find("<circle", pos + 1)) ++circles;
    CHECK(circles == 3);
    CHECK(svg == vpt::scatter_svg({0, 1, 2}, {1, 0, 1}, {"a", "b<c"}, "title", "x axis", "y axis"));
    CHECK_THROWS_AS(vpt::scatter_svg({}, {}, {}, "t", "x", "y"), vpt::DataError);
  }
}
