#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vpt/datasets.hpp"
#include "vpt/tensor.hpp"

namespace vpt {

enum class BackboneKind { classifier, dual_encoder };

std::string to_string(BackboneKind kind);
BackboneKind parse_backbone_kind(const std::string& text);

// Conv(3x3, pad 1) -> ReLU -> MaxPool(2) per stage, then flatten and a
// linear layer: class logits (classifier) or an embedding of width `head`
// (dual encoder).
struct ArchSpec {
  std::vector<std::size_t> channels{16, 32, 64};
  std::size_t in_channels = 3;
  std::size_t in_height = 32;
  std::size_t in_width = 32;
  std::size_t head = 64;  // classifier: number of classes; dual encoder: embedding width

  void validate() const;
  std::size_t flat_features() const;
};

// Frozen stand-in for text-encoder class embeddings. `active()` returns the
// table seen by the head: each clean row plus seeded Gaussian noise whose
// per-coordinate std is quality_noise times that row's norm.
struct ClassEmbeddingTable {
  Tensor embeddings;  // [K_pre, D], clean
  float temperature = 10.0f;
  double quality_noise = 0.0;
  std::uint64_t noise_seed = 0;

  static ClassEmbeddingTable random(std::size_t classes, std::size_t dim, std::uint64_t seed, float temperature);
  Tensor active() const;
  std::size_t rows() const { return embeddings.dim(0); }
  std::size_t dim() const { return embeddings.dim(1); }
};

class Backbone {
 public:
  static Backbone build(BackboneKind kind, const ArchSpec& arch, std::uint64_t seed);

  BackboneKind kind() const { return kind_; }
  const ArchSpec& arch() const { return arch_; }
  std::uint64_t seed() const { return seed_; }
  bool frozen() const { return frozen_; }

  // Locks every parameter (no gradients are recorded for them afterwards).
  void freeze();
  // Deep copy; the copy is unfrozen and trainable.
  Backbone trainable_copy() const;

  // Activations feeding the final head: flattened conv features for the
  // classifier, the projected embedding for the dual encoder.
  Tensor features(const Tensor& images) const;
  // Native head output: classifier logits, or temperature-scaled cosine
  // similarities against the active embedding table.
  Tensor logits(const Tensor& images) const;

  std::size_t feature_dim() const;
  std::size_t native_classes() const;

  const std::vector<std::string>& param_names() const { return names_; }
  const Tensor& param(const std::string& name) const;
  std::vector<Tensor> trainable_params();

  const ClassEmbeddingTable& table() const;
  ClassEmbeddingTable& table();
  bool has_table() const { return kind_ == BackboneKind::dual_encoder; }

  // Pretraining class names (one per native class).
  std::vector<std::string> class_names;
  // Input normalization the backbone was trained with.
  NormalizationStats stats;

  // One VPT1 file per parameter plus meta.txt. Refuses to overwrite an
  // existing directory unless `overwrite` is set.
  void save(const std::filesystem::path& dir, bool overwrite = false) const;
  static Backbone load(const std::filesystem::path& dir);

  // Concatenated VPT1 encodings of every parameter (and the embedding table)
  // in name order; equal bytes mean bit-identical weights.
  std::vector<std::uint8_t> serialize_params() const;

 private:
  Tensor trunk(const Tensor& images) const;
  void check_input(const Tensor& images) const;

  BackboneKind kind_ = BackboneKind::classifier;
  ArchSpec arch_;
  std::uint64_t seed_ = 0;
  bool frozen_ = false;
  std::vector<std::string> names_;
  std::map<std::string, Tensor> params_;
  ClassEmbeddingTable table_;
};

struct PretrainOptions {
  std::size_t epochs = 15;
  double lr = 0.05;
  double momentum = 0.9;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
};

struct PretrainReport {
  std::vector<double> epoch_loss;
  double train_accuracy = 0.0;
};

// SGD cross-entropy training on native logits, then freeze. The dataset's
// class names become the backbone's class names.
Backbone pretrain(Backbone backbone, const LabeledDataset& data, const PretrainOptions& options,
                  PretrainReport* report = nullptr);

// Top-1 accuracy of native logits (no prompt, no transform).
double native_accuracy(const Backbone& backbone, const LabeledDataset& data, std::size_t batch_size = 64);

}  // namespace vpt
