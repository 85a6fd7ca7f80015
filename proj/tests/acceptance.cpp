// Runs every acceptance criterion and prints one PASS/FAIL line per
// criterion. Exit status is nonzero if any criterion fails.
//
//   acceptance [work_dir]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "gradient_suite.hpp"
#include "reference.hpp"
#include "vpt/analysis.hpp"
#include "vpt/commands.hpp"
#include "vpt/ops.hpp"
#include "vpt/optim.hpp"
#include "vpt/tensor_io.hpp"
#include "vpt/training.hpp"

namespace fs = std::filesystem;
using vpt::BackboneKind;
using vpt::TemplateKind;

namespace {

fs::path g_work;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

struct Desk {
  vpt::LabeledDataset train, test;
};

Desk desk_split(const vpt::Backbone& b, const std::string& suite, std::size_t n_train, std::size_t n_test,
                std::uint64_t seed) {
  auto s = vpt::make_suite(suite, n_train, n_test, seed);
  const auto& a = b.arch();
  return {vpt::resize_to_model(s.train, a.in_height, a.in_width, b.stats),
          vpt::resize_to_model(s.test, a.in_height, a.in_width, b.stats)};
}

vpt::TrainOptions vp_options(std::uint64_t seed) {
  vpt::TrainOptions o;  // lr 40, 50 epochs, batch 32, no momentum
  o.seed = seed;
  return o;
}

const vpt::PromptTemplate kDeskPad{TemplateKind::padding, 4, 0, 0};

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = vpt::read_text_file(e.path());
  return out;
}

Verdict param_counts() {
  const auto pad = vpt::param_count({TemplateKind::padding, 30, 0, 0}, 3, 224, 224);
  const auto patch = vpt::param_count({TemplateKind::fixed_patch, 30, 0, 0}, 3, 224, 224);
  const auto pixel = vpt::param_count({TemplateKind::fixed_patch, 1, 0, 0}, 3, 224, 224);
  const auto rnd = vpt::param_count({TemplateKind::random_patch, 30, 0, 0}, 3, 224, 224);
  return {pad == 69840 && patch == 2700 && pixel == 3 && rnd == 2700,
          "padding " + std::to_string(pad) + ", patch " + std::to_string(patch) + ", pixel " + std::to_string(pixel)};
}

Verdict gradient_suite() {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  std::string worst_name;
  std::size_t cases = 0;
  auto all = gradsuite::op_cases();
  for (auto& c : gradsuite::prompted_cases()) all.push_back(std::move(c));
  for (const auto& c : all) {
    ++cases;
    for (int t = 0; t < 20; ++t) {
      const double e = c.run(rng);
      if (!(e <= worst)) worst = e, worst_name = c.name;
    }
  }
  return {worst <= 1e-3, std::to_string(cases) + " cases x 20 trials, worst " + fmt("%.2e", worst) + " (" +
                             worst_name + ")"};
}

Verdict freeze_guarantee() {
  const auto b = fixtures::desk_pretrained(BackboneKind::dual_encoder);
  const fs::path dir = g_work / "freeze";
  fs::remove_all(dir);
  b.save(dir / "before");
  const auto before = snapshot(dir / "before");
  const auto d = desk_split(b, "down-4-far", 64, 64, 3);
  const vpt::OutputTransform t{vpt::make_text_head(b, d.train.class_names)};
  vpt::prompt_tune(b, t, d.train, nullptr, kDeskPad, {}, vpt::PromptSpace::normalized, vp_options(0));
  b.save(dir / "after_vp");
  vpt::TrainOptions lp;
  lp.lr = 0.1;
  lp.momentum = 0.9;
  vpt::linear_probe(b, d.train, nullptr, lp);
  b.save(dir / "after_lp");
  const bool vp_same = snapshot(dir / "after_vp") == before, lp_same = snapshot(dir / "after_lp") == before;
  return {vp_same && lp_same, std::string("50 epochs: VP ") + (vp_same ? "identical" : "CHANGED") + ", LP " +
                                  (lp_same ? "identical" : "CHANGED") + " over " + std::to_string(before.size()) +
                                  " files"};
}

Verdict vp_beats_zero_shot() {
  const auto b = fixtures::desk_pretrained(BackboneKind::dual_encoder);
  bool ok = true;
  std::string detail;
  for (std::uint64_t seed : {0, 1, 2}) {
    const auto d = desk_split(b, "down-4-far", 200, 200, seed);
    const vpt::OutputTransform t{vpt::make_text_head(b, d.train.class_names)};
    const double tp = vpt::evaluate(b, t, nullptr, d.test);
    const double vp =
        vpt::prompt_tune(b, t, d.train, &d.test, kDeskPad, {}, vpt::PromptSpace::normalized, vp_options(seed))
            .result.test_acc;
    ok = ok && vp >= tp + 0.10;
    detail += (detail.empty() ? "" : "; ") + fmt("TP %.3f", tp) + fmt(" VP+TP %.3f", vp);
  }
  return {ok, detail};
}

Verdict mapping_semantics() {
  const auto b = fixtures::desk_pretrained(BackboneKind::classifier);
  const auto heldout = fixtures::pretrain_heldout(b);
  bool ok = true;
  std::string detail;
  for (std::uint64_t seed : {0, 1, 2}) {
    const auto d = desk_split(b, "down-2-pair", 64, 200, seed);
    const auto semantic = vpt::semantic_mapping(vpt::class_similarity(b, d.train, heldout));
    const auto swapped = vpt::swapped_mapping(semantic);
    auto tuned = [&](const vpt::HardCodedMapping& m) {
      const vpt::OutputTransform t{m};
      return vpt::prompt_tune(b, t, d.train, &d.test, kDeskPad, {}, vpt::PromptSpace::normalized, vp_options(seed))
          .result.test_acc;
    };
    const double sem = tuned(semantic), swp = tuned(swapped);
    ok = ok && sem >= swp + 0.10;
    detail += (detail.empty() ? "" : "; ") + fmt("semantic %.3f", sem) + fmt(" swapped %.3f", swp);
  }
  return {ok, detail};
}

Verdict text_quality_compensation() {
  auto b = fixtures::desk_pretrained(BackboneKind::dual_encoder);
  const auto d = desk_split(b, "down-4-near", 64, 200, 0);
  std::vector<double> zero_shot, gain;
  std::string detail;
  for (double sigma : {0.0, 0.2, 0.4, 0.8, 1.6}) {
    b.table().quality_noise = sigma;
    const vpt::OutputTransform t{vpt::make_text_head(b, d.train.class_names)};
    const double zs = vpt::evaluate(b, t, nullptr, d.test);
    double vp = 0.0;
    for (std::uint64_t seed : {0, 1, 2}) {
      vp += vpt::prompt_tune(b, t, d.train, &d.test, kDeskPad, {}, vpt::PromptSpace::normalized, vp_options(seed))
                .result.test_acc /
            3.0;
    }
    zero_shot.push_back(zs);
    gain.push_back(vp - zs);
    detail += fmt("%.1f:", sigma) + fmt("%.2f/", zs) + fmt("%+.2f ", vp - zs);
  }
  const double rho = vpt::spearman(zero_shot, gain);
  return {rho <= -0.7, fmt("spearman %.3f; sigma:zs/gain ", rho) + detail};
}

Verdict template_ablation() {
  const auto b = fixtures::desk_pretrained(BackboneKind::dual_encoder);
  const auto d = desk_split(b, "down-4-far", 64, 600, 0);
  const vpt::OutputTransform t{vpt::make_text_head(b, d.train.class_names)};
  const std::vector<std::size_t> sizes{1, 2, 4, 8, 12, 16};
  std::map<TemplateKind, std::vector<double>> acc;
  for (auto kind : {TemplateKind::padding, TemplateKind::fixed_patch, TemplateKind::random_patch}) {
    for (auto p : sizes) {
      double mean = 0.0;
      for (std::uint64_t seed : {0, 1, 2}) {
        mean += vpt::prompt_tune(b, t, d.train, &d.test, {kind, p, 0, 0}, {}, vpt::PromptSpace::normalized,
                                 vp_options(seed))
                    .result.test_acc /
                3.0;
      }
      acc[kind].push_back(mean);
    }
  }
  bool fixed_wins = true;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    fixed_wins = fixed_wins && acc[TemplateKind::padding][i] > acc[TemplateKind::random_patch][i] &&
                 acc[TemplateKind::fixed_patch][i] > acc[TemplateKind::random_patch][i];
  }
  const auto& pad = acc[TemplateKind::padding];
  const auto best = static_cast<std::size_t>(std::max_element(pad.begin(), pad.end()) - pad.begin());
  const bool interior = best > 0 && best + 1 < pad.size();
  std::string detail = "padding peak at p=" + std::to_string(sizes[best]) + "; p:pad/patch/random";
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    detail += " " + std::to_string(sizes[i]) + ":" + fmt("%.3f/", pad[i]) +
              fmt("%.3f/", acc[TemplateKind::fixed_patch][i]) + fmt("%.3f", acc[TemplateKind::random_patch][i]);
  }
  return {fixed_wins && interior, detail};
}

vpt::FeatureDistribution moments(std::vector<double> mean, std::vector<double> cov) {
  vpt::FeatureDistribution f;
  f.mean = std::move(mean);
  f.cov = std::move(cov);
  f.n_samples = 2;
  return f;
}

Verdict fid_closed_forms() {
  const auto a = moments({0.3, -1.0}, {2.0, 0.5, 0.5, 1.0});
  const double same = vpt::frechet_distance(a, a);
  const double shift = vpt::frechet_distance(a, moments({2.3, -1.0}, {2.0, 0.5, 0.5, 1.0}));
  const double scalar = vpt::frechet_distance(moments({0.0}, {1.0}), moments({0.0}, {4.0}));
  const bool ok = std::abs(same) <= 1e-6 && std::abs(shift - 4.0) <= 1e-6 && std::abs(scalar - 1.0) <= 1e-6;
  return {ok, fmt("identical %.2e", same) + fmt(", shift %.9f", shift) + fmt(", 1-D %.9f", scalar)};
}

Verdict cosine_endpoints() {
  const std::size_t total = 1000;
  const double start = vpt::cosine_lr(40.0, 0, total), end = vpt::cosine_lr(40.0, total, total),
               mid = vpt::cosine_lr(40.0, total / 2, total);
  const bool ok = start == 40.0 && std::abs(end) <= 1e-7 && std::abs(mid - 20.0) <= 1e-6;
  return {ok, fmt("lr(0)=%.9g", start) + fmt(", lr(T)=%.3g", end) + fmt(", lr(T/2)=%.9g", mid)};
}

Verdict run_determinism() {
  const fs::path root = g_work / "determinism";
  fs::remove_all(root);
  auto cfg = vpt::parse_config(R"({
    "backbone": {"channels": [8, 16], "input": [3, 16, 16], "head": 16},
    "pretrain": {"count": 240, "heldout": 40, "epochs": 4},
    "dataset": {"suite": "down-4-far", "train_count": 48, "test_count": 48},
    "prompt": {"p": 2},
    "optim": {"vp": {"epochs": 5}, "lp": {"epochs": 5}, "ft": {"epochs": 2}}
  })");
  cfg.out = root.string();
  vpt::cmd_pretrain(cfg, false);
  bool ok = true;
  std::string detail;
  for (const std::string method : {"tp", "vp", "lp", "ft"}) {
    const auto a = vpt::cmd_run(cfg, method, true);
    std::map<std::string, std::string> first;
    if (method != "tp") first = snapshot(vpt::run_directory(cfg, method));
    const auto b = vpt::cmd_run(cfg, method, true);
    const bool same_dir = method == "tp" || snapshot(vpt::run_directory(cfg, method)) == first;
    const bool same_acc = vpt::csv_row({a.method, a.dataset, a.templ, a.p, a.seed, a.epochs, {}, a.train_acc,
                                        a.test_acc, 0.0, a.config_hash}) ==
                          vpt::csv_row({b.method, b.dataset, b.templ, b.p, b.seed, b.epochs, {}, b.train_acc,
                                        b.test_acc, 0.0, b.config_hash});
    ok = ok && same_dir && same_acc;
    detail += (detail.empty() ? "" : ", ") + method + (same_dir && same_acc ? " identical" : " DIFFERS");
  }
  return {ok, detail};
}

Verdict brute_force_equivalence() {
  std::mt19937_64 rng(11);
  std::normal_distribution<float> g;
  std::size_t samples = 0, mismatches = 0;
  const auto cls = fixtures::tiny_pretrained(BackboneKind::classifier);
  const auto dual = fixtures::tiny_pretrained(BackboneKind::dual_encoder);
  const auto& arch = cls.arch();
  const std::size_t block = arch.in_channels * arch.in_height * arch.in_width;
  for (int batch = 0; batch < 100; ++batch) {
    const std::size_t n = 1 + rng() % 8;
    vpt::Tensor x({n, arch.in_channels, arch.in_height, arch.in_width});
    for (auto& v : x.mutable_data()) v = g(rng);
    auto one = [&](std::size_t i) {
      vpt::Tensor xi({1, arch.in_channels, arch.in_height, arch.in_width});
      std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(i * block), block, xi.mutable_data().begin());
      return xi;
    };

    const std::size_t k_down = 2 + rng() % 3;
    const auto m = vpt::arbitrary_mapping(k_down, cls.native_classes(), rng());
    const auto mapped = vpt::ops::argmax_rows(vpt::transform_logits(cls, {m}, x));
    for (std::size_t i = 0; i < n; ++i) {
      const vpt::Tensor native = cls.logits(one(i));
      std::size_t best = 0;
      for (std::size_t j = 1; j < k_down; ++j)
        if (native.at(m.targets[j]) > native.at(m.targets[best])) best = j;
      ++samples;
      mismatches += mapped[i] != best;
    }

    const auto zero_shot = vpt::ops::argmax_rows(dual.logits(x));
    const vpt::Tensor table = dual.table().active();
    const std::size_t d = table.dim(1);
    for (std::size_t i = 0; i < n; ++i) {
      const vpt::Tensor f = dual.features(one(i));
      const std::vector<double> fv(f.data().begin(), f.data().end());
      std::size_t best = 0;
      double best_c = -2.0;
      for (std::size_t j = 0; j < table.dim(0); ++j) {
        std::vector<double> row(d);
        for (std::size_t k = 0; k < d; ++k) row[k] = table.at(j * d + k);
        const double c = ref::cosine(fv, row);
        if (c > best_c) best_c = c, best = j;
      }
      ++samples;
      mismatches += zero_shot[i] != best;
    }
  }
  return {mismatches == 0, std::to_string(samples) + " predictions over 100 batches, " + std::to_string(mismatches) +
                               " mismatches"};
}

}  // namespace

int main(int argc, char** argv) {
  g_work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "vpt_acceptance";
  fs::create_directories(g_work);
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"parameter counts", param_counts},
      {"gradient suite", gradient_suite},
      {"freeze guarantee", freeze_guarantee},
      {"VP+TP beats TP on down-4-far", vp_beats_zero_shot},
      {"semantic beats swapped mapping", mapping_semantics},
      {"gain vs zero-shot over sigma", text_quality_compensation},
      {"prompt template ablation shape", template_ablation},
      {"FID closed forms", fid_closed_forms},
      {"cosine schedule endpoints", cosine_endpoints},
      {"cmd_run determinism", run_determinism},
      {"loop oracle equivalence", brute_force_equivalence},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s  %2zu. %s: %s [%.1fs]\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                v.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !v.pass;
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
