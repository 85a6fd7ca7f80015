#include "vpt/config.hpp"

#include "json.hpp"
#include "vpt/digest.hpp"
#include "vpt/errors.hpp"
#include "vpt/tensor_io.hpp"

namespace vpt {

using nlohmann::json;

TrainOptions OptimConfig::options(std::uint64_t seed) const {
  TrainOptions o;
  o.lr = lr;
  o.epochs = epochs;
  o.batch_size = batch;
  o.momentum = momentum;
  o.seed = seed;
  return o;
}

std::filesystem::path ExperimentConfig::checkpoint_dir() const {
  if (!checkpoint.empty()) return checkpoint;
  return std::filesystem::path(out) / "backbone";
}

ExperimentConfig preset_config(const std::string& preset) {
  ExperimentConfig c;
  if (preset == "desk") return c;
  if (preset != "paper") throw ConfigError("unknown preset '" + preset + "' (expected desk or paper)");
  c.preset = "paper";
  c.arch.in_height = 224;
  c.arch.in_width = 224;
  c.templ.size = 30;
  c.vp.epochs = 1000;
  c.vp.batch = 256;
  return c;
}

namespace {

json optim_json(const OptimConfig& o) {
  return {{"lr", o.lr}, {"epochs", o.epochs}, {"batch", o.batch}, {"momentum", o.momentum}};
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["preset"] = c.preset;
  j["seeds"] = c.seeds;
  j["out"] = c.out;
  j["backbone"] = {{"kind", to_string(c.backbone_kind)},
                   {"channels", c.arch.channels},
                   {"input", {c.arch.in_channels, c.arch.in_height, c.arch.in_width}},
                   {"head", c.arch.head},
                   {"temperature", c.temperature},
                   {"quality_noise", c.quality_noise},
                   {"seed", c.backbone_seed},
                   {"checkpoint", c.checkpoint}};
  j["pretrain"] = optim_json(c.pretrain_optim);
  j["pretrain"]["suite"] = c.pretrain_suite;
  j["pretrain"]["count"] = c.pretrain_count;
  j["pretrain"]["heldout"] = c.pretrain_heldout;
  j["dataset"] = {{"suite", c.dataset},
                  {"train_count", c.train_count},
                  {"test_count", c.test_count},
                  {"seed", c.data_seed},
                  {"train_manifest", c.train_manifest},
                  {"test_manifest", c.test_manifest}};
  j["prompt"] = {{"template", to_string(c.templ.kind)},
                 {"p", c.templ.size},
                 {"offset", {c.templ.offset_y, c.templ.offset_x}},
                 {"init", c.init.kind == PromptInitKind::zeros ? "zeros" : "uniform"},
                 {"init_amplitude", c.init.amplitude},
                 {"space", to_string(c.space)}};
  j["transform"] = {{"kind", c.transform},
                    {"mapping", to_string(c.mapping)},
                    {"mapping_seed", c.mapping_seed},
                    {"mapping_loss", to_string(c.mapping_loss)}};
  j["optim"] = {{"vp", optim_json(c.vp)}, {"lp", optim_json(c.lp)}, {"ft", optim_json(c.ft)}};
  std::vector<std::string> templates, mappings;
  for (auto t : c.ablate_templates) templates.push_back(to_string(t));
  for (auto m : c.ablate_mappings) mappings.push_back(to_string(m));
  j["ablate"] = {{"templates", templates},
                 {"sizes", c.ablate_sizes},
                 {"mappings", mappings},
                 {"mapping_dataset", c.ablate_mapping_dataset},
                 {"sigmas", c.ablate_sigmas},
                 {"sigma_dataset", c.ablate_sigma_dataset},
                 {"train_count", c.ablate_train_count}};
  j["analyze"] = {{"suites", c.analyze_suites}, {"sample_cap", c.analyze_sample_cap}, {"pairs", c.analyze_pairs}};
  return j;
}

bool compatible(const json& base, const json& user) {
  if (base.is_number_float()) return user.is_number();
  if (base.is_number_unsigned() || base.is_number_integer()) return user.is_number_unsigned();
  if (base.is_string()) return user.is_string();
  if (base.is_boolean()) return user.is_boolean();
  if (base.is_array()) return user.is_array();
  if (base.is_object()) return user.is_object();
  return false;
}

void merge(json& base, const json& user, const std::string& prefix) {
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
    json& slot = base[it.key()];
    if (!compatible(slot, it.value())) {
      throw ConfigError("config key '" + key + "' expects " + std::string(slot.type_name()) + ", got " +
                        std::string(it.value().type_name()));
    }
    if (slot.is_array() && !slot.empty()) {
      for (const auto& item : it.value()) {
        if (!compatible(slot.front(), item)) {
          throw ConfigError("config key '" + key + "' expects a list of " + std::string(slot.front().type_name()) +
                            " values, got " + std::string(item.type_name()));
        }
      }
    }
    if (slot.is_object()) {
      merge(slot, it.value(), key);
    } else {
      slot = it.value();
    }
  }
}

template <typename T>
T field(const json& j, const std::string& path) {
  const json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    node = &node->at(path.substr(start, dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  try {
    return node->get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + path + "' has the wrong type");
  }
}

OptimConfig optim_field(const json& j, const std::string& path) {
  OptimConfig o;
  o.lr = field<double>(j, path + ".lr");
  o.epochs = field<std::size_t>(j, path + ".epochs");
  o.batch = field<std::size_t>(j, path + ".batch");
  o.momentum = field<double>(j, path + ".momentum");
  if (!(o.lr >= 0.0)) throw ConfigError("config key '" + path + ".lr' must be non-negative");
  if (o.batch == 0) throw ConfigError("config key '" + path + ".batch' must be positive");
  if (!(o.momentum >= 0.0 && o.momentum < 1.0)) throw ConfigError("config key '" + path + ".momentum' must be in [0,1)");
  return o;
}

ExperimentConfig from_json(const json& j) {
  ExperimentConfig c;
  c.preset = field<std::string>(j, "preset");
  c.seeds = field<std::vector<std::uint64_t>>(j, "seeds");
  if (c.seeds.empty()) throw ConfigError("config key 'seeds' must list at least one seed");
  c.out = field<std::string>(j, "out");

  c.backbone_kind = parse_backbone_kind(field<std::string>(j, "backbone.kind"));
  c.arch.channels = field<std::vector<std::size_t>>(j, "backbone.channels");
  const auto input = field<std::vector<std::size_t>>(j, "backbone.input");
  if (input.size() != 3) throw ConfigError("config key 'backbone.input' must be [C,H,W]");
  c.arch.in_channels = input[0];
  c.arch.in_height = input[1];
  c.arch.in_width = input[2];
  c.arch.head = field<std::size_t>(j, "backbone.head");
  c.arch.validate();
  c.temperature = field<double>(j, "backbone.temperature");
  if (!(c.temperature > 0.0)) throw ConfigError("config key 'backbone.temperature' must be positive");
  c.quality_noise = field<double>(j, "backbone.quality_noise");
  if (!(c.quality_noise >= 0.0)) throw ConfigError("config key 'backbone.quality_noise' must be non-negative");
  c.backbone_seed = field<std::uint64_t>(j, "backbone.seed");
  c.checkpoint = field<std::string>(j, "backbone.checkpoint");

  c.pretrain_suite = field<std::string>(j, "pretrain.suite");
  c.pretrain_count = field<std::size_t>(j, "pretrain.count");
  c.pretrain_heldout = field<std::size_t>(j, "pretrain.heldout");
  c.pretrain_optim = optim_field(j, "pretrain");

  c.dataset = field<std::string>(j, "dataset.suite");
  c.train_count = field<std::size_t>(j, "dataset.train_count");
  c.test_count = field<std::size_t>(j, "dataset.test_count");
  c.data_seed = field<std::uint64_t>(j, "dataset.seed");
  c.train_manifest = field<std::string>(j, "dataset.train_manifest");
  c.test_manifest = field<std::string>(j, "dataset.test_manifest");
  if (c.train_manifest.empty() != c.test_manifest.empty()) {
    throw ConfigError("config keys 'dataset.train_manifest' and 'dataset.test_manifest' must be set together");
  }

  c.templ.kind = parse_template_kind(field<std::string>(j, "prompt.template"));
  c.templ.size = field<std::size_t>(j, "prompt.p");
  const auto offset = field<std::vector<std::size_t>>(j, "prompt.offset");
  if (offset.size() != 2) throw ConfigError("config key 'prompt.offset' must be [y,x]");
  c.templ.offset_y = offset[0];
  c.templ.offset_x = offset[1];
  const auto init = field<std::string>(j, "prompt.init");
  if (init != "zeros" && init != "uniform") throw ConfigError("config key 'prompt.init' must be zeros or uniform");
  c.init.kind = init == "zeros" ? PromptInitKind::zeros : PromptInitKind::uniform;
  c.init.amplitude = field<double>(j, "prompt.init_amplitude");
  c.space = parse_prompt_space(field<std::string>(j, "prompt.space"));

  c.transform = field<std::string>(j, "transform.kind");
  if (c.transform != "auto" && c.transform != "mapping" && c.transform != "text") {
    throw ConfigError("config key 'transform.kind' must be auto, mapping or text");
  }
  c.mapping = parse_mapping_strategy(field<std::string>(j, "transform.mapping"));
  c.mapping_seed = field<std::uint64_t>(j, "transform.mapping_seed");
  c.mapping_loss = parse_mapping_loss(field<std::string>(j, "transform.mapping_loss"));

  c.vp = optim_field(j, "optim.vp");
  c.lp = optim_field(j, "optim.lp");
  c.ft = optim_field(j, "optim.ft");

  c.ablate_templates.clear();
  for (const auto& t : field<std::vector<std::string>>(j, "ablate.templates")) {
    c.ablate_templates.push_back(parse_template_kind(t));
  }
  c.ablate_sizes = field<std::vector<std::size_t>>(j, "ablate.sizes");
  c.ablate_mappings.clear();
  for (const auto& m : field<std::vector<std::string>>(j, "ablate.mappings")) {
    c.ablate_mappings.push_back(parse_mapping_strategy(m));
  }
  c.ablate_mapping_dataset = field<std::string>(j, "ablate.mapping_dataset");
  c.ablate_sigmas = field<std::vector<double>>(j, "ablate.sigmas");
  c.ablate_sigma_dataset = field<std::string>(j, "ablate.sigma_dataset");
  c.ablate_train_count = field<std::size_t>(j, "ablate.train_count");

  c.analyze_suites = field<std::vector<std::string>>(j, "analyze.suites");
  c.analyze_sample_cap = field<std::size_t>(j, "analyze.sample_cap");
  c.analyze_pairs = field<std::size_t>(j, "analyze.pairs");
  return c;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text, const std::optional<std::string>& preset_override) {
  json user;
  try {
    user = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!user.is_object()) throw ConfigError("config must be a JSON object");
  std::string preset = "desk";
  if (user.contains("preset")) {
    if (!user["preset"].is_string()) throw ConfigError("config key 'preset' expects string");
    preset = user["preset"].get<std::string>();
  }
  if (preset_override) preset = *preset_override;
  json base = to_json(preset_config(preset));
  user.erase("preset");
  merge(base, user, "");
  return from_json(base);
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::optional<std::string>& preset_override) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file " + path.string() + " not found");
  return parse_config(read_text_file(path), preset_override);
}

std::string canonical_config(const ExperimentConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

std::string config_hash(const ExperimentConfig& cfg) { return sha256_hex(canonical_config(cfg)); }

}  // namespace vpt
