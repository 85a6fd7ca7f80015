#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vpt/analysis.hpp"
#include "vpt/config.hpp"
#include "vpt/training.hpp"

namespace vpt {

struct DownstreamData {
  std::string name;
  LabeledDataset train;
  LabeledDataset test;
};

// Suite (or external manifests) resized to the backbone input and
// normalized with the backbone's stats. train_count 0 keeps the configured
// count.
DownstreamData prepare_downstream(const ExperimentConfig& cfg, const Backbone& backbone, const std::string& suite,
                                  std::size_t train_count = 0);
// Held-out split of the pretraining suite.
LabeledDataset pretrain_heldout(const ExperimentConfig& cfg, const Backbone& backbone);

OutputTransform build_transform(const ExperimentConfig& cfg, const Backbone& backbone, const DownstreamData& data,
                                MappingStrategy strategy, std::uint64_t seed);
OutputTransform build_transform(const ExperimentConfig& cfg, const Backbone& backbone, const DownstreamData& data);

// Builds, pretrains and freezes a backbone; writes it with the config copy.
// Returns the checkpoint directory.
std::filesystem::path cmd_pretrain(const ExperimentConfig& cfg, bool force);

// method: tp, vp, lp or ft. Appends one row to <out>/results.csv. Every
// method but tp writes its artifacts to a fresh run directory.
RunResult cmd_run(const ExperimentConfig& cfg, const std::string& method, bool force);
std::filesystem::path run_directory(const ExperimentConfig& cfg, const std::string& method);

// axis: template, mapping or sigma. Writes report.csv and plot.svg under
// <out>/ablate-<axis>/.
std::filesystem::path cmd_ablate(const ExperimentConfig& cfg, const std::string& axis, bool force);

// Joins results.csv with distribution distance and diversity per suite.
std::filesystem::path cmd_analyze(const ExperimentConfig& cfg);

void cmd_export_prompt(const std::filesystem::path& prompt_dir, const std::filesystem::path& image_path);

// config.json and config.sha256 in `dir`.
void write_config_copy(const ExperimentConfig& cfg, const std::filesystem::path& dir);

}  // namespace vpt
