#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "vpt/datasets.hpp"
#include "vpt/tensor.hpp"

namespace vpt {

enum class TemplateKind { padding, fixed_patch, random_patch };

std::string to_string(TemplateKind kind);
TemplateKind parse_template_kind(const std::string& text);

struct PromptTemplate {
  TemplateKind kind = TemplateKind::padding;
  std::size_t size = 4;  // p
  // Top-left corner of fixed_patch; ignored by the other kinds.
  std::size_t offset_y = 0;
  std::size_t offset_x = 0;
};

// padding: 1 <= p <= floor(min(H,W)/2); patches: 1 <= p <= min(H,W).
bool template_in_bounds(const PromptTemplate& t, std::size_t height, std::size_t width);

// C*p^2 for patches, 2*C*p*(H+W-2p) for padding. Throws ConfigError when p is
// out of bounds.
std::size_t param_count(const PromptTemplate& t, std::size_t channels, std::size_t height, std::size_t width);

enum class PromptInitKind { zeros, uniform };

struct PromptInit {
  PromptInitKind kind = PromptInitKind::uniform;
  double amplitude = 0.03;
};

// Where the prompt is added: after per-channel normalization (default) or to
// raw pixels, in which case each value is divided by its channel std before
// it reaches the model.
enum class PromptSpace { normalized, raw };

std::string to_string(PromptSpace space);
PromptSpace parse_prompt_space(const std::string& text);

struct PromptParams {
  PromptTemplate templ;
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  PromptInit init;
  std::uint64_t seed = 0;
  PromptSpace space = PromptSpace::normalized;
  std::vector<float> channel_std;  // model input std per channel; divides values when space == raw

  Tensor values;  // [param_count], trainable
  // Fixed templates: flat C*H*W placement map and the offset of every value,
  // in value order. Empty for random_patch.
  std::vector<std::uint8_t> mask;
  std::vector<std::uint32_t> positions;

  // Placement stream for random_patch during training.
  std::mt19937_64 train_stream;

  // Fresh placement stream used for evaluation; identical on every call.
  std::mt19937_64 eval_stream() const;
  std::size_t count() const { return values.numel(); }
};

PromptParams init_prompt(const PromptTemplate& t, std::size_t channels, std::size_t height, std::size_t width,
                         const PromptInit& init, std::uint64_t seed);

enum class ApplyMode { train, eval };

// images [N,C,H,W] (model input) -> images + prompt. Differentiable with
// respect to prompt.values. random_patch draws one location per image from
// the train stream (train) or from a stream reset to the seed (eval).
Tensor apply_prompt(PromptParams& prompt, const Tensor& images, ApplyMode mode);
// Same, drawing random_patch locations from `placement`.
Tensor apply_prompt(const PromptParams& prompt, const Tensor& images, std::mt19937_64& placement);

// Binary P6 image of the prompt: values times the channel std, min-max
// scaled to [0,255] over the placed pixels, everything else mid-gray.
// random_patch is drawn at the top-left corner. Single-channel prompts are
// written as gray.
void export_prompt_image(const PromptParams& prompt, const NormalizationStats& stats,
                         const std::filesystem::path& path);

// values.vpt plus prompt.txt in `dir`.
void save_prompt(const PromptParams& prompt, const std::filesystem::path& dir);
PromptParams load_prompt(const std::filesystem::path& dir);

}  // namespace vpt
