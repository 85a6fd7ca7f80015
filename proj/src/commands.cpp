#include "vpt/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "vpt/errors.hpp"
#include "vpt/seeding.hpp"
#include "vpt/tensor_io.hpp"
#include "text_kv.hpp"

namespace vpt {

namespace fs = std::filesystem;

namespace {

std::string num(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void fresh_directory(const fs::path& dir, bool force) {
  if (fs::exists(dir)) {
    if (!force) throw DataError("output directory " + dir.string() + " already exists (use --force)");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

Backbone load_frozen(const ExperimentConfig& cfg) {
  const auto dir = cfg.checkpoint_dir();
  if (!fs::exists(dir / "meta.txt")) {
    throw DataError("no checkpoint at " + dir.string() + " (run 'vpt pretrain' first)");
  }
  Backbone b = Backbone::load(dir);
  if (!b.frozen()) throw DataError("checkpoint at " + dir.string() + " is not frozen");
  if (b.has_table()) {
    b.table().quality_noise = cfg.quality_noise;
    b.table().temperature = static_cast<float>(cfg.temperature);
  }
  return b;
}

void append_csv(const fs::path& path, const RunResult& r) {
  fs::create_directories(path.parent_path());
  const bool fresh = !fs::exists(path);
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw DataError("cannot append to " + path.string());
  if (fresh) out << csv_header() << "\n";
  out << csv_row(r) << "\n";
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace

void write_config_copy(const ExperimentConfig& cfg, const fs::path& dir) {
  write_text_file(dir / "config.json", canonical_config(cfg));
  write_text_file(dir / "config.sha256", config_hash(cfg) + "\n");
}

DownstreamData prepare_downstream(const ExperimentConfig& cfg, const Backbone& backbone, const std::string& suite,
                                  std::size_t train_count) {
  DownstreamData d;
  const auto& arch = backbone.arch();
  if (!cfg.train_manifest.empty() && suite == cfg.dataset) {
    d.name = fs::path(cfg.train_manifest).stem().string();
    d.train = load_external(cfg.train_manifest);
    d.test = load_external(cfg.test_manifest);
  } else {
    d.name = suite;
    auto split = make_suite(suite, train_count ? train_count : cfg.train_count, cfg.test_count, cfg.data_seed);
    d.train = std::move(split.train);
    d.test = std::move(split.test);
  }
  if (d.train.channels() != arch.in_channels) {
    throw DataError("dataset has " + std::to_string(d.train.channels()) + " channels, backbone expects " +
                    std::to_string(arch.in_channels));
  }
  d.train = resize_to_model(d.train, arch.in_height, arch.in_width, backbone.stats);
  d.test = resize_to_model(d.test, arch.in_height, arch.in_width, backbone.stats);
  return d;
}

LabeledDataset pretrain_heldout(const ExperimentConfig& cfg, const Backbone& backbone) {
  auto split = make_suite(cfg.pretrain_suite, cfg.pretrain_count, cfg.pretrain_heldout, cfg.backbone_seed);
  const auto& arch = backbone.arch();
  return resize_to_model(split.test, arch.in_height, arch.in_width, backbone.stats);
}

OutputTransform build_transform(const ExperimentConfig& cfg, const Backbone& backbone, const DownstreamData& data,
                                MappingStrategy strategy, std::uint64_t seed) {
  const bool text = cfg.transform == "text" || (cfg.transform == "auto" && backbone.has_table());
  OutputTransform t;
  t.mapping_loss = cfg.mapping_loss;
  if (text) {
    t.kind = make_text_head(backbone, data.train.class_names);
    return t;
  }
  const std::size_t k_down = data.train.class_names.size();
  const std::size_t k_pre = backbone.native_classes();
  HardCodedMapping m;
  if (strategy == MappingStrategy::arbitrary) {
    m = arbitrary_mapping(k_down, k_pre, seed);
  } else {
    m = semantic_mapping(class_similarity(backbone, data.train, pretrain_heldout(cfg, backbone)));
    if (strategy == MappingStrategy::swapped) m = swapped_mapping(m);
  }
  t.kind = m;
  return t;
}

OutputTransform build_transform(const ExperimentConfig& cfg, const Backbone& backbone, const DownstreamData& data) {
  return build_transform(cfg, backbone, data, cfg.mapping, cfg.mapping_seed);
}

fs::path cmd_pretrain(const ExperimentConfig& cfg, bool force) {
  const auto dir = cfg.checkpoint_dir();
  if (fs::exists(dir) && !force) throw DataError("checkpoint directory " + dir.string() + " already exists (use --force)");
  auto split = make_suite(cfg.pretrain_suite, cfg.pretrain_count, cfg.pretrain_heldout, cfg.backbone_seed);
  LabeledDataset train = resize_to_model(split.train, cfg.arch.in_height, cfg.arch.in_width, split.train.stats);
  Backbone b = Backbone::build(cfg.backbone_kind, cfg.arch, cfg.backbone_seed);
  if (b.has_table()) {
    b.table() = ClassEmbeddingTable::random(train.class_names.size(), cfg.arch.head, cfg.backbone_seed,
                                            static_cast<float>(cfg.temperature));
  }
  PretrainOptions po;
  po.epochs = cfg.pretrain_optim.epochs;
  po.lr = cfg.pretrain_optim.lr;
  po.momentum = cfg.pretrain_optim.momentum;
  po.batch_size = cfg.pretrain_optim.batch;
  po.seed = cfg.backbone_seed;
  PretrainReport report;
  b = pretrain(std::move(b), train, po, &report);
  b.save(dir, force);
  write_config_copy(cfg, dir);
  std::string log = "epoch,loss\n";
  for (std::size_t e = 0; e < report.epoch_loss.size(); ++e) log += std::to_string(e + 1) + "," + num(report.epoch_loss[e], 8) + "\n";
  write_text_file(dir / "pretrain_log.csv", log);
  return dir;
}

fs::path run_directory(const ExperimentConfig& cfg, const std::string& method) {
  std::string name = method + "_" + (cfg.train_manifest.empty() ? cfg.dataset : fs::path(cfg.train_manifest).stem().string());
  if (method == "vp") name += "_" + to_string(cfg.templ.kind) + "_p" + std::to_string(cfg.templ.size);
  name += "_s" + std::to_string(cfg.seed());
  return fs::path(cfg.out) / "runs" / name;
}

RunResult cmd_run(const ExperimentConfig& cfg, const std::string& method, bool force) {
  if (method != "tp" && method != "vp" && method != "lp" && method != "ft") {
    throw ConfigError("unknown method '" + method + "' (expected tp, vp, lp or ft)");
  }
  const Backbone backbone = load_frozen(cfg);
  const auto data = prepare_downstream(cfg, backbone, cfg.dataset);
  const std::string hash = config_hash(cfg);
  const std::uint64_t seed = cfg.seed();
  RunResult r;
  fs::path dir;
  if (method != "tp") {
    dir = run_directory(cfg, method);
    if (fs::exists(dir) && !force) throw DataError("run directory " + dir.string() + " already exists (use --force)");
  }
  if (method == "tp") {
    const auto t = build_transform(cfg, backbone, data);
    const auto start = std::chrono::steady_clock::now();
    r.method = "TP";
    r.templ = "-";
    r.seed = seed;
    r.train_acc = evaluate(backbone, t, nullptr, data.train);
    r.test_acc = evaluate(backbone, t, nullptr, data.test);
    r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  } else if (method == "vp") {
    const auto t = build_transform(cfg, backbone, data);
    auto tuned = prompt_tune(backbone, t, data.train, &data.test, cfg.templ, cfg.init, cfg.space, cfg.vp.options(seed));
    r = tuned.result;
    fresh_directory(dir, force);
    save_prompt(tuned.prompt, dir / "prompt");
    NormalizationStats stats = backbone.stats;
    export_prompt_image(tuned.prompt, stats, dir / "prompt.ppm");
    if (const auto* m = std::get_if<HardCodedMapping>(&t.kind)) write_text_file(dir / "mapping.txt", format_mapping(*m));
  } else if (method == "lp") {
    auto probe = linear_probe(backbone, data.train, &data.test, cfg.lp.options(seed));
    r = probe.result;
    fresh_directory(dir, force);
    write_tensor(dir / "probe_weight.vpt", probe.probe.weight);
    write_tensor(dir / "probe_bias.vpt", probe.probe.bias);
  } else {
    const auto t = build_transform(cfg, backbone, data);
    auto tuned = fine_tune(backbone, t, data.train, &data.test, cfg.ft.options(seed));
    r = tuned.result;
    fresh_directory(dir, force);
    tuned.model.save(dir / "model", true);
    if (const auto* m = std::get_if<HardCodedMapping>(&t.kind)) write_text_file(dir / "mapping.txt", format_mapping(*m));
  }
  r.dataset = data.name;
  r.config_hash = hash;
  if (method != "tp") {
    write_config_copy(cfg, dir);
    std::string log = "epoch,loss\n";
    for (std::size_t e = 0; e < r.epoch_loss.size(); ++e) log += std::to_string(e + 1) + "," + num(r.epoch_loss[e], 8) + "\n";
    write_text_file(dir / "train_log.csv", log);
  }
  append_csv(fs::path(cfg.out) / "results.csv", r);
  return r;
}

namespace {

struct Mean {
  double sum = 0.0;
  std::size_t n = 0;
  void add(double v) {
    sum += v;
    ++n;
  }
  double value() const { return n ? sum / static_cast<double>(n) : 0.0; }
};

fs::path ablate_templates(const ExperimentConfig& cfg, const Backbone& backbone, const fs::path& dir) {
  const auto data = prepare_downstream(cfg, backbone, cfg.dataset, cfg.ablate_train_count);
  const auto transform = build_transform(cfg, backbone, data);
  std::string csv = "template,p,params,status,train_acc,test_acc,seeds\n";
  std::vector<double> xs, ys;
  std::vector<std::string> labels;
  for (auto kind : cfg.ablate_templates) {
    for (auto p : cfg.ablate_sizes) {
      PromptTemplate t = cfg.templ;
      t.kind = kind;
      t.size = p;
      const std::string head = to_string(kind) + "," + std::to_string(p) + ",";
      if (!template_in_bounds(t, data.train.height(), data.train.width())) {
        csv += head + "0,out_of_range,,," + std::to_string(cfg.seeds.size()) + "\n";
        continue;
      }
      const std::size_t params = param_count(t, data.train.channels(), data.train.height(), data.train.width());
      Mean train, test;
      for (auto seed : cfg.seeds) {
        auto tuned = prompt_tune(backbone, transform, data.train, &data.test, t, cfg.init, cfg.space, cfg.vp.options(seed));
        train.add(tuned.result.train_acc);
        test.add(tuned.result.test_acc);
      }
      csv += head + std::to_string(params) + ",ok," + num(train.value()) + "," + num(test.value()) + "," +
             std::to_string(cfg.seeds.size()) + "\n";
      xs.push_back(static_cast<double>(p));
      ys.push_back(test.value());
      labels.push_back(to_string(kind).substr(0, 1));
    }
  }
  write_text_file(dir / "report.csv", csv);
  if (!xs.empty()) {
    write_text_file(dir / "plot.svg", scatter_svg(xs, ys, labels, "test accuracy by prompt size (" + data.name + ")",
                                                  "prompt size p", "test accuracy"));
  }
  return dir;
}

fs::path ablate_mappings(const ExperimentConfig& cfg, const Backbone& backbone, const fs::path& dir) {
  const auto data = prepare_downstream(cfg, backbone, cfg.ablate_mapping_dataset);
  ExperimentConfig mcfg = cfg;
  mcfg.transform = "mapping";
  std::string csv = "strategy,targets,zero_shot_acc,train_acc,test_acc,seeds\n";
  std::vector<double> xs, ys;
  std::vector<std::string> labels;
  for (auto strategy : cfg.ablate_mappings) {
    Mean zs, train, test;
    std::string targets;
    for (auto seed : cfg.seeds) {
      const auto t = build_transform(mcfg, backbone, data, strategy, mix_seed(cfg.mapping_seed, seed));
      const auto& m = std::get<HardCodedMapping>(t.kind);
      std::string tg;
      for (std::size_t j = 0; j < m.size(); ++j) tg += (j ? " " : "") + std::to_string(m.targets[j]);
      if (targets.empty()) targets = tg;
      else if (targets != tg) targets = "varies";
      zs.add(evaluate(backbone, t, nullptr, data.test));
      auto tuned = prompt_tune(backbone, t, data.train, &data.test, cfg.templ, cfg.init, cfg.space, cfg.vp.options(seed));
      train.add(tuned.result.train_acc);
      test.add(tuned.result.test_acc);
    }
    csv += to_string(strategy) + "," + targets + "," + num(zs.value()) + "," + num(train.value()) + "," +
           num(test.value()) + "," + std::to_string(cfg.seeds.size()) + "\n";
    xs.push_back(static_cast<double>(xs.size()));
    ys.push_back(test.value());
    labels.push_back(to_string(strategy));
  }
  write_text_file(dir / "report.csv", csv);
  if (!xs.empty()) {
    write_text_file(dir / "plot.svg", scatter_svg(xs, ys, labels, "prompted test accuracy by label mapping (" + data.name + ")",
                                                  "strategy", "test accuracy"));
  }
  return dir;
}

fs::path ablate_sigmas(const ExperimentConfig& cfg, Backbone backbone, const fs::path& dir) {
  if (!backbone.has_table()) throw ConfigError("the sigma sweep needs a dual_encoder backbone");
  const auto data = prepare_downstream(cfg, backbone, cfg.ablate_sigma_dataset);
  std::string csv = "sigma,zero_shot_acc,vp_acc,gain,seeds\n";
  std::vector<double> zs_all, gain_all;
  std::vector<std::string> labels;
  for (double sigma : cfg.ablate_sigmas) {
    if (!(sigma >= 0.0)) throw ConfigError("sigma values must be non-negative");
    backbone.table().quality_noise = sigma;
    ExperimentConfig tcfg = cfg;
    tcfg.transform = "text";
    const auto t = build_transform(tcfg, backbone, data);
    const double zs = evaluate(backbone, t, nullptr, data.test);
    Mean vp;
    for (auto seed : cfg.seeds) {
      vp.add(prompt_tune(backbone, t, data.train, &data.test, cfg.templ, cfg.init, cfg.space, cfg.vp.options(seed))
                 .result.test_acc);
    }
    csv += num(sigma, 4) + "," + num(zs) + "," + num(vp.value()) + "," + num(vp.value() - zs) + "," +
           std::to_string(cfg.seeds.size()) + "\n";
    zs_all.push_back(zs);
    gain_all.push_back(vp.value() - zs);
    labels.push_back("s=" + num(sigma, 2));
  }
  write_text_file(dir / "report.csv", csv);
  if (!zs_all.empty()) {
    write_text_file(dir / "plot.svg", scatter_svg(zs_all, gain_all, labels, "prompting gain vs zero-shot accuracy (" + data.name + ")",
                                                  "zero-shot accuracy", "gain from visual prompt"));
  }
  if (zs_all.size() >= 3) {
    try {
      const auto rep = correlation_report(zs_all, gain_all);
      write_text_file(dir / "correlation.txt",
                      "pearson: " + num(rep.pearson) + "\nspearman: " + num(rep.spearman) + "\n");
    } catch (const NumericError& e) {
      write_text_file(dir / "correlation.txt", std::string("undefined: ") + e.what() + "\n");
    }
  }
  return dir;
}

}  // namespace

fs::path cmd_ablate(const ExperimentConfig& cfg, const std::string& axis, bool force) {
  if (axis != "template" && axis != "mapping" && axis != "sigma") {
    throw ConfigError("unknown ablation axis '" + axis + "' (expected template, mapping or sigma)");
  }
  const Backbone backbone = load_frozen(cfg);
  const fs::path dir = fs::path(cfg.out) / ("ablate-" + axis);
  fresh_directory(dir, force);
  write_config_copy(cfg, dir);
  if (axis == "template") return ablate_templates(cfg, backbone, dir);
  if (axis == "mapping") return ablate_mappings(cfg, backbone, dir);
  return ablate_sigmas(cfg, backbone, dir);
}

namespace {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw DataError("results table has no column '" + name + "'");
  }
};

CsvTable read_csv(const fs::path& path) {
  CsvTable t;
  std::istringstream in(read_text_file(path));
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (first) {
      t.header = cells;
      first = false;
    } else {
      if (cells.size() != t.header.size()) throw DataError(path.string() + ": malformed row '" + line + "'");
      t.rows.push_back(cells);
    }
  }
  return t;
}

}  // namespace

fs::path cmd_analyze(const ExperimentConfig& cfg) {
  const fs::path results = fs::path(cfg.out) / "results.csv";
  std::vector<std::string> missing;
  std::map<std::string, double> zs_acc, vp_acc;
  if (fs::exists(results)) {
    const auto table = read_csv(results);
    const auto c_method = table.column("method"), c_data = table.column("dataset"), c_test = table.column("test_acc");
    for (const auto& row : table.rows) {
      const double acc = std::stod(row[c_test]);
      if (row[c_method] == "TP") zs_acc[row[c_data]] = acc;
      if (row[c_method] == "VP+TP" || row[c_method] == "VP") vp_acc[row[c_data]] = acc;
    }
  }
  for (const auto& suite : cfg.analyze_suites) {
    if (!zs_acc.count(suite)) missing.push_back("run --method tp on " + suite);
    if (!vp_acc.count(suite)) missing.push_back("run --method vp on " + suite);
  }
  if (!missing.empty()) {
    std::string msg = "analysis needs runs recorded in " + results.string() + "; missing:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw DataError(msg);
  }

  const Backbone backbone = load_frozen(cfg);
  const auto reference = feature_moments(backbone, pretrain_heldout(cfg, backbone), cfg.analyze_sample_cap, cfg.seed());
  std::vector<AnalysisRow> rows;
  for (const auto& suite : cfg.analyze_suites) {
    const auto data = prepare_downstream(cfg, backbone, suite);
    AnalysisRow r;
    r.dataset = suite;
    r.fid_to_pretrain = frechet_distance(reference, feature_moments(backbone, data.test, cfg.analyze_sample_cap, cfg.seed()));
    r.diversity = perceptual_diversity(backbone, data.test, cfg.analyze_pairs, cfg.seed());
    r.zero_shot_acc = zs_acc[suite];
    r.vp_acc = vp_acc[suite];
    r.gain = r.vp_acc - r.zero_shot_acc;
    rows.push_back(r);
  }

  const fs::path dir = fs::path(cfg.out) / "analysis";
  fs::create_directories(dir);
  write_config_copy(cfg, dir);
  write_text_file(dir / "analysis.csv", analysis_csv(rows));
  std::vector<double> fid, div, zs, gain;
  std::vector<std::string> names;
  for (const auto& r : rows) {
    fid.push_back(r.fid_to_pretrain);
    div.push_back(r.diversity);
    zs.push_back(r.zero_shot_acc);
    gain.push_back(r.gain);
    names.push_back(r.dataset);
  }
  write_text_file(dir / "gain_vs_fid.svg", scatter_svg(fid, gain, names, "gain vs distance to pretraining data",
                                                       "Frechet distance to pretraining features", "gain"));
  write_text_file(dir / "gain_vs_diversity.svg",
                  scatter_svg(div, gain, names, "gain vs perceptual diversity", "mean feature distance", "gain"));
  write_text_file(dir / "gain_vs_zero_shot.svg",
                  scatter_svg(zs, gain, names, "gain vs zero-shot accuracy", "zero-shot accuracy", "gain"));
  std::string corr = "x,y,pearson,spearman\n";
  const std::vector<std::pair<std::string, const std::vector<double>*>> axes{
      {"fid_to_pretrain", &fid}, {"diversity", &div}, {"zero_shot_acc", &zs}};
  for (const auto& [name, xs] : axes) {
    try {
      const auto rep = correlation_report(*xs, gain);
      corr += name + ",gain," + num(rep.pearson) + "," + num(rep.spearman) + "\n";
    } catch (const Error&) {
      corr += name + ",gain,,\n";
    }
  }
  write_text_file(dir / "correlations.csv", corr);
  return dir;
}

void cmd_export_prompt(const fs::path& prompt_dir, const fs::path& image_path) {
  const PromptParams prompt = load_prompt(prompt_dir);
  NormalizationStats stats;
  stats.std = prompt.channel_std.empty() ? std::vector<float>(prompt.channels, 1.0f) : prompt.channel_std;
  stats.mean.assign(prompt.channels, 0.0f);
  if (image_path.has_parent_path()) fs::create_directories(image_path.parent_path());
  export_prompt_image(prompt, stats, image_path);
}

}  // namespace vpt
