#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vpt/tensor.hpp"

namespace vpt {

struct NormalizationStats {
  std::vector<float> mean;
  std::vector<float> std;
};

// Images are stored as raw pixels; `stats` is the per-channel normalization
// applied when a batch is fed to a model.
struct LabeledDataset {
  Tensor images;  // [N,C,H,W]
  std::vector<std::size_t> labels;
  std::vector<std::string> class_names;
  NormalizationStats stats;
  std::vector<std::string> domain_tags;  // empty, or one tag per image

  std::size_t size() const { return labels.size(); }
  std::size_t channels() const { return images.dim(1); }
  std::size_t height() const { return images.dim(2); }
  std::size_t width() const { return images.dim(3); }

  // Throws DataError when the invariants do not hold.
  void validate() const;

  // Normalized model input for the given rows.
  Tensor batch(std::span<const std::size_t> rows) const;
  std::vector<std::size_t> batch_labels(std::span<const std::size_t> rows) const;
  LabeledDataset subset(std::span<const std::size_t> rows) const;
};

NormalizationStats compute_stats(const Tensor& images);

// The eight parametric shapes the generator can draw; class id == index.
const std::vector<std::string>& shape_names();

struct TaskSpec {
  std::vector<std::size_t> classes;  // indices into shape_names()
  std::size_t count = 0;
  std::uint64_t seed = 0;
  // Perceptual diversity knob in [0,1]: amplitude of position, scale,
  // rotation, hue and background jitter. 0 renders every image of a class
  // identically.
  double jitter = 0.5;
  std::size_t channels = 3;
  std::size_t height = 32;
  std::size_t width = 32;
  // Rendering styles; when non-empty every image gets one of these tags
  // (round-robin) and the background style follows the tag.
  std::vector<std::string> domains;
};

LabeledDataset generate_synthetic(const TaskSpec& spec);

enum class ShiftKind { color_shift, texture_noise, domain_split };

struct ShiftSpec {
  ShiftKind kind = ShiftKind::color_shift;
  double magnitude = 0.0;                 // [0,1]; 0 is the identity for pixel shifts
  std::vector<std::string> test_domains;  // domain_split: tags routed to the test side
  double test_fraction = 0.5;             // pixel shifts: share of rows in the test split
};

// Pixel-level transform used by color_shift / texture_noise.
Tensor shift_pixels(const Tensor& images, ShiftKind kind, double magnitude, std::uint64_t seed);

// Splits into (train, test). Pixel shifts transform only the test split;
// domain_split routes rows by tag with disjoint train/test domains.
std::pair<LabeledDataset, LabeledDataset> apply_shift(const LabeledDataset& data, const ShiftSpec& shift,
                                                      std::uint64_t seed);

// Bilinear resize to [C,target_h,target_w] (half-pixel centers), then adopts
// the model's normalization stats.
LabeledDataset resize_to_model(const LabeledDataset& data, std::size_t target_h, std::size_t target_w,
                               const NormalizationStats& model_stats);

// Manifest: key:value lines (images, labels, class_names, mean, std,
// domain_tags); tensor paths are relative to the manifest directory.
LabeledDataset load_external(const std::filesystem::path& manifest);
void save_external(const LabeledDataset& data, const std::filesystem::path& dir, const std::string& stem);

// Named desk-scale suites.
struct SuiteSplit {
  LabeledDataset train;
  LabeledDataset test;
};

// pretrain-8, down-4-near, down-4-far, down-4-domains, down-2-pair.
const std::vector<std::string>& suite_names();
SuiteSplit make_suite(const std::string& name, std::size_t train_count, std::size_t test_count, std::uint64_t seed,
                      std::size_t height = 32, std::size_t width = 32);

// Digest of images, labels and class names.
std::string dataset_digest(const LabeledDataset& data);

}  // namespace vpt
