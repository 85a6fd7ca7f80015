#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "vpt/backbone.hpp"
#include "vpt/datasets.hpp"
#include "vpt/output_transform.hpp"
#include "vpt/prompting.hpp"

namespace vpt {

struct RunResult {
  std::string method;  // TP, VP+TP, VP, LP or FT
  std::string dataset;
  std::string templ;  // template name, "-" when no prompt is involved
  std::size_t p = 0;
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  std::vector<double> epoch_loss;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double wall_ms = 0.0;
  std::string config_hash;
};

std::string csv_header();
std::string csv_row(const RunResult& r);

struct TrainOptions {
  std::size_t epochs = 50;
  double lr = 40.0;
  double momentum = 0.0;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
};

struct PromptTuneResult {
  PromptParams prompt;
  RunResult result;
};

// Optimizes only the prompt values by cross-entropy through the frozen
// backbone and the transform. `test` may be null. Throws if the backbone is
// not frozen.
PromptTuneResult prompt_tune(const Backbone& backbone, const OutputTransform& transform, const LabeledDataset& train,
                             const LabeledDataset* test, const PromptTemplate& templ, const PromptInit& init,
                             PromptSpace space, const TrainOptions& options);

// Top-1 accuracy; no prompt gives the zero-shot / text-prompt baseline.
double evaluate(const Backbone& backbone, const OutputTransform& transform, const PromptParams* prompt,
                const LabeledDataset& data, std::size_t batch_size = 64);

struct LinearProbe {
  Tensor weight;  // [k, D]
  Tensor bias;    // [k]
};

struct ProbeResult {
  LinearProbe probe;
  RunResult result;
};

// Penultimate features of every row, computed once.
Tensor extract_features(const Backbone& backbone, const LabeledDataset& data, std::size_t batch_size = 64);

ProbeResult linear_probe(const Backbone& backbone, const LabeledDataset& train, const LabeledDataset* test,
                         const TrainOptions& options);
double probe_accuracy(const LinearProbe& probe, const Tensor& features, const std::vector<std::size_t>& labels);

struct FineTuneResult {
  Backbone model;  // frozen after training
  RunResult result;
};

// Trains a copy of every backbone parameter through the transform; the
// original is not touched.
FineTuneResult fine_tune(const Backbone& backbone, const OutputTransform& transform, const LabeledDataset& train,
                         const LabeledDataset* test, const TrainOptions& options);

}  // namespace vpt
