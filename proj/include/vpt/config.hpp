#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vpt/backbone.hpp"
#include "vpt/output_transform.hpp"
#include "vpt/prompting.hpp"
#include "vpt/training.hpp"

namespace vpt {

struct OptimConfig {
  double lr = 0.0;
  std::size_t epochs = 0;
  std::size_t batch = 32;
  double momentum = 0.0;

  TrainOptions options(std::uint64_t seed) const;
};

struct ExperimentConfig {
  std::string preset = "desk";
  std::vector<std::uint64_t> seeds{0};
  std::string out = "runs";

  // backbone
  BackboneKind backbone_kind = BackboneKind::dual_encoder;
  ArchSpec arch;
  double temperature = 10.0;
  double quality_noise = 0.0;
  std::uint64_t backbone_seed = 0;
  std::string checkpoint;  // empty: <out>/backbone

  // pretraining
  std::string pretrain_suite = "pretrain-8";
  std::size_t pretrain_count = 800;
  std::size_t pretrain_heldout = 400;
  OptimConfig pretrain_optim{0.05, 15, 32, 0.9};

  // downstream data
  std::string dataset = "down-4-far";
  std::size_t train_count = 200;
  std::size_t test_count = 200;
  std::uint64_t data_seed = 0;
  std::string train_manifest;  // set both to use external data instead of a suite
  std::string test_manifest;

  // prompt
  PromptTemplate templ{TemplateKind::padding, 4, 0, 0};
  PromptInit init;
  PromptSpace space = PromptSpace::normalized;

  // output transform: "auto" picks text for dual encoders, mapping otherwise
  std::string transform = "auto";
  MappingStrategy mapping = MappingStrategy::semantic;
  std::uint64_t mapping_seed = 0;
  MappingLoss mapping_loss = MappingLoss::gather_then_softmax;

  OptimConfig vp{40.0, 50, 32, 0.0};
  OptimConfig lp{0.1, 50, 32, 0.9};
  OptimConfig ft{0.01, 20, 32, 0.9};

  // ablations
  std::vector<TemplateKind> ablate_templates{TemplateKind::padding, TemplateKind::fixed_patch,
                                             TemplateKind::random_patch};
  std::vector<std::size_t> ablate_sizes{1, 2, 4, 8, 16, 30, 48};
  std::vector<MappingStrategy> ablate_mappings{MappingStrategy::semantic, MappingStrategy::arbitrary,
                                               MappingStrategy::swapped};
  std::string ablate_mapping_dataset = "down-2-pair";
  std::vector<double> ablate_sigmas{0.0, 0.2, 0.4, 0.8, 1.6};
  std::string ablate_sigma_dataset = "down-4-near";
  std::size_t ablate_train_count = 64;

  // analysis
  std::vector<std::string> analyze_suites{"down-4-near", "down-4-far", "down-4-domains", "down-2-pair"};
  std::size_t analyze_sample_cap = 1000;
  std::size_t analyze_pairs = 500;

  std::filesystem::path checkpoint_dir() const;
  std::uint64_t seed() const { return seeds.front(); }
};

// Defaults for a preset: "desk" (32 px, p=4, 50 prompt epochs) or "paper"
// (224 px, p=30, 1000 prompt epochs, batch 256).
ExperimentConfig preset_config(const std::string& preset);

// Parses a JSON config on top of the preset it names (or `preset_override`).
// Unknown keys and wrongly typed values raise ConfigError naming the key.
ExperimentConfig parse_config(const std::string& json_text, const std::optional<std::string>& preset_override = {});
ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::optional<std::string>& preset_override = {});

// Every field, keys sorted, fixed formatting.
std::string canonical_config(const ExperimentConfig& cfg);
// SHA-256 of canonical_config.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace vpt
