#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "vpt/backbone.hpp"
#include "vpt/datasets.hpp"
#include "vpt/tensor.hpp"

namespace vpt {

// Downstream class j is read from native output targets[j]; the other native
// outputs are discarded.
struct HardCodedMapping {
  std::vector<std::size_t> targets;
  std::size_t pretrain_classes = 0;

  std::size_t size() const { return targets.size(); }
  // Injective, every target in [0, pretrain_classes).
  void validate() const;
};

// native [N,K_pre] -> [N,k_down].
Tensor map_logits(const HardCodedMapping& mapping, const Tensor& native_logits);

enum class MappingStrategy { semantic, arbitrary, swapped };

std::string to_string(MappingStrategy s);
MappingStrategy parse_mapping_strategy(const std::string& text);

// similarity[j][k]: downstream class j vs pretrain class k. Repeatedly takes
// the most similar unassigned (j,k) pair; ties go to the lower indices.
HardCodedMapping semantic_mapping(const std::vector<std::vector<double>>& similarity);
// Seeded random injective assignment.
HardCodedMapping arbitrary_mapping(std::size_t downstream_classes, std::size_t pretrain_classes, std::uint64_t seed);
// base with its targets rotated by one place, so no class keeps its target.
HardCodedMapping swapped_mapping(const HardCodedMapping& base);

// Cosine similarity between class-mean penultimate features of the
// downstream classes and of the pretraining classes -> [k_down][K_pre].
std::vector<std::vector<double>> class_similarity(const Backbone& backbone, const LabeledDataset& downstream,
                                                  const LabeledDataset& pretrain_heldout);

// "down -> pretrain" lines.
std::string format_mapping(const HardCodedMapping& mapping);
HardCodedMapping parse_mapping(const std::string& text, std::size_t pretrain_classes);

// Rows of the backbone's (noise-applied) embedding table selected for the
// downstream classes.
struct TextPromptHead {
  Tensor rows;  // [k_down, D]
  float temperature = 10.0f;
  double quality_noise = 0.0;

  std::size_t size() const { return rows.dim(0); }
};

// Downstream class names are looked up among the backbone's class names.
TextPromptHead make_text_head(const Backbone& backbone, const std::vector<std::string>& downstream_classes);
// temperature * cos(feature_n, row_j) -> [N,k_down].
Tensor head_logits(const TextPromptHead& head, const Tensor& features);

// How a hard-coded mapping feeds the loss: softmax over the gathered
// columns only, or softmax over every native output and then read the
// assigned column.
enum class MappingLoss { gather_then_softmax, softmax_then_gather };

std::string to_string(MappingLoss m);
MappingLoss parse_mapping_loss(const std::string& text);

struct OutputTransform {
  std::variant<HardCodedMapping, TextPromptHead> kind;
  MappingLoss mapping_loss = MappingLoss::gather_then_softmax;

  bool is_mapping() const { return std::holds_alternative<HardCodedMapping>(kind); }
  std::size_t classes() const;
};

// images are model inputs (already prompted when a prompt is used).
Tensor transform_logits(const Backbone& backbone, const OutputTransform& transform, const Tensor& images);
Tensor transform_loss(const Backbone& backbone, const OutputTransform& transform, const Tensor& images,
                      std::span<const std::size_t> labels);

}  // namespace vpt
