#include "vpt/prompting.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

#include "vpt/errors.hpp"
#include "vpt/ops.hpp"
#include "vpt/seeding.hpp"
#include "vpt/tensor_io.hpp"
#include "text_kv.hpp"

namespace vpt {

std::string to_string(TemplateKind kind) {
  switch (kind) {
    case TemplateKind::padding: return "padding";
    case TemplateKind::fixed_patch: return "fixed_patch";
    case TemplateKind::random_patch: return "random_patch";
  }
  return "?";
}

TemplateKind parse_template_kind(const std::string& text) {
  if (text == "padding") return TemplateKind::padding;
  if (text == "fixed_patch") return TemplateKind::fixed_patch;
  if (text == "random_patch") return TemplateKind::random_patch;
  throw ConfigError("unknown prompt template '" + text + "' (expected padding, fixed_patch or random_patch)");
}

std::string to_string(PromptSpace space) { return space == PromptSpace::normalized ? "normalized" : "raw"; }

PromptSpace parse_prompt_space(const std::string& text) {
  if (text == "normalized") return PromptSpace::normalized;
  if (text == "raw") return PromptSpace::raw;
  throw ConfigError("unknown prompt space '" + text + "' (expected normalized or raw)");
}

bool template_in_bounds(const PromptTemplate& t, std::size_t height, std::size_t width) {
  const std::size_t side = std::min(height, width);
  if (t.size < 1) return false;
  if (t.kind == TemplateKind::padding) return t.size <= side / 2;
  if (t.size > side) return false;
  if (t.kind == TemplateKind::fixed_patch) return t.offset_y + t.size <= height && t.offset_x + t.size <= width;
  return true;
}

std::size_t param_count(const PromptTemplate& t, std::size_t channels, std::size_t height, std::size_t width) {
  if (!template_in_bounds(t, height, width)) {
    const std::size_t side = std::min(height, width);
    const std::size_t limit = t.kind == TemplateKind::padding ? side / 2 : side;
    std::string msg = to_string(t.kind) + " prompt size p=" + std::to_string(t.size) + " is outside [1, " +
                      std::to_string(limit) + "] for a " + std::to_string(height) + "x" + std::to_string(width) +
                      " input";
    if (t.kind == TemplateKind::fixed_patch && t.size >= 1 && t.size <= side) msg += " at the given offset";
    throw ConfigError(msg);
  }
  const std::size_t p = t.size;
  if (t.kind == TemplateKind::padding) return 2 * channels * p * (height + width - 2 * p);
  return channels * p * p;
}

std::mt19937_64 PromptParams::eval_stream() const { return std::mt19937_64(mix_seed(seed, 0xe7a1)); }

PromptParams init_prompt(const PromptTemplate& t, std::size_t channels, std::size_t height, std::size_t width,
                         const PromptInit& init, std::uint64_t seed) {
  if (channels == 0) throw ConfigError("prompt needs at least one channel");
  const std::size_t count = param_count(t, channels, height, width);
  if (init.kind == PromptInitKind::uniform && !(init.amplitude >= 0.0)) {
    throw ConfigError("prompt init amplitude must be non-negative");
  }
  PromptParams pp;
  pp.templ = t;
  pp.channels = channels;
  pp.height = height;
  pp.width = width;
  pp.init = init;
  pp.seed = seed;
  pp.train_stream.seed(mix_seed(seed, 0x7a1));

  std::vector<float> v(count, 0.0f);
  if (init.kind == PromptInitKind::uniform) {
    std::mt19937_64 rng(mix_seed(seed, 0x1417));
    std::uniform_real_distribution<double> u(-init.amplitude, init.amplitude);
    for (auto& x : v) x = static_cast<float>(u(rng));
  }
  pp.values = Tensor({count}, std::move(v));
  pp.values.set_requires_grad(true);

  if (t.kind != TemplateKind::random_patch) {
    const std::size_t p = t.size;
    pp.mask.assign(channels * height * width, 0);
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
          bool on;
          if (t.kind == TemplateKind::padding) {
            on = y < p || y >= height - p || x < p || x >= width - p;
          } else {
            on = y >= t.offset_y && y < t.offset_y + p && x >= t.offset_x && x < t.offset_x + p;
          }
          if (on) {
            const std::size_t off = (c * height + y) * width + x;
            pp.mask[off] = 1;
            pp.positions.push_back(static_cast<std::uint32_t>(off));
          }
        }
      }
    }
    if (pp.positions.size() != count) throw Error("prompt mask does not match the parameter count");
  }
  return pp;
}

namespace {

void check_images(const PromptParams& prompt, const Tensor& images) {
  if (images.rank() != 4 || images.dim(1) != prompt.channels || images.dim(2) != prompt.height ||
      images.dim(3) != prompt.width) {
    throw ShapeError("prompt expects [N," + std::to_string(prompt.channels) + "," + std::to_string(prompt.height) +
                     "," + std::to_string(prompt.width) + "] images, got " + shape_str(images.dims()));
  }
}

std::size_t value_channel(const PromptParams& prompt, std::size_t j) {
  if (prompt.templ.kind == TemplateKind::random_patch) return j / (prompt.templ.size * prompt.templ.size);
  return prompt.positions[j] / (prompt.height * prompt.width);
}

Tensor effective_values(const PromptParams& prompt) {
  if (prompt.space == PromptSpace::normalized) return prompt.values;
  if (prompt.channel_std.size() != prompt.channels) {
    throw ConfigError("raw-space prompt needs one std per channel");
  }
  std::vector<float> scale(prompt.count());
  for (std::size_t j = 0; j < scale.size(); ++j) scale[j] = 1.0f / prompt.channel_std[value_channel(prompt, j)];
  return ops::mul(prompt.values, Tensor(prompt.values.dims(), std::move(scale)));
}

}  // namespace

Tensor apply_prompt(const PromptParams& prompt, const Tensor& images, std::mt19937_64& placement) {
  check_images(prompt, images);
  const Tensor v = effective_values(prompt);
  if (prompt.templ.kind != TemplateKind::random_patch) return ops::scatter_add(images, v, prompt.positions);

  const std::size_t n = images.dim(0), c = prompt.channels, h = prompt.height, w = prompt.width;
  const std::size_t p = prompt.templ.size;
  std::uniform_int_distribution<std::size_t> pick_y(0, h - p), pick_x(0, w - p);
  std::vector<std::uint32_t> positions;
  positions.reserve(n * prompt.count());
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t y0 = pick_y(placement);
    const std::size_t x0 = pick_x(placement);
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t dy = 0; dy < p; ++dy) {
        for (std::size_t dx = 0; dx < p; ++dx) {
          positions.push_back(static_cast<std::uint32_t>((ch * h + y0 + dy) * w + x0 + dx));
        }
      }
    }
  }
  return ops::scatter_add(images, v, positions);
}

Tensor apply_prompt(PromptParams& prompt, const Tensor& images, ApplyMode mode) {
  if (mode == ApplyMode::train) return apply_prompt(prompt, images, prompt.train_stream);
  auto stream = prompt.eval_stream();
  return apply_prompt(prompt, images, stream);
}

void export_prompt_image(const PromptParams& prompt, const NormalizationStats& stats,
                         const std::filesystem::path& path) {
  const std::size_t c = prompt.channels, h = prompt.height, w = prompt.width;
  std::vector<std::uint32_t> positions = prompt.positions;
  if (prompt.templ.kind == TemplateKind::random_patch) {
    const std::size_t p = prompt.templ.size;
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t y = 0; y < p; ++y) {
        for (std::size_t x = 0; x < p; ++x) positions.push_back(static_cast<std::uint32_t>((ch * h + y) * w + x));
      }
    }
  }
  std::vector<double> shown(prompt.count());
  const auto vals = prompt.values.data();
  for (std::size_t j = 0; j < shown.size(); ++j) {
    const std::size_t ch = positions[j] / (h * w);
    double s = ch < stats.std.size() ? stats.std[ch] : 1.0;
    if (prompt.space == PromptSpace::raw) s = 1.0;
    shown[j] = static_cast<double>(vals[j]) * s;
  }
  const auto [lo_it, hi_it] = std::minmax_element(shown.begin(), shown.end());
  const double lo = shown.empty() ? 0.0 : *lo_it;
  const double hi = shown.empty() ? 0.0 : *hi_it;

  std::vector<std::uint8_t> planes(c * h * w, 128);
  for (std::size_t j = 0; j < shown.size(); ++j) {
    if (hi > lo) planes[positions[j]] = static_cast<std::uint8_t>(std::lround(255.0 * (shown[j] - lo) / (hi - lo)));
  }
  std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  out.reserve(out.size() + 3 * h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t k = 0; k < 3; ++k) {
        const std::size_t ch = c >= 3 ? k : 0;
        out.push_back(static_cast<char>(planes[(ch * h + y) * w + x]));
      }
    }
  }
  write_text_file(path, out);
}

void save_prompt(const PromptParams& prompt, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_tensor(dir / "values.vpt", prompt.values);
  detail::KeyValues kv;
  kv.set("template", to_string(prompt.templ.kind));
  kv.set("p", std::to_string(prompt.templ.size));
  kv.set("offset", detail::join_numbers(std::vector<std::size_t>{prompt.templ.offset_y, prompt.templ.offset_x}));
  kv.set("input", detail::join_numbers(std::vector<std::size_t>{prompt.channels, prompt.height, prompt.width}));
  kv.set("seed", std::to_string(prompt.seed));
  kv.set("init", prompt.init.kind == PromptInitKind::zeros ? "zeros" : "uniform");
  kv.set("init_amplitude", detail::format_number(prompt.init.amplitude));
  kv.set("space", to_string(prompt.space));
  if (!prompt.channel_std.empty()) kv.set("channel_std", detail::join_numbers(prompt.channel_std));
  write_text_file(dir / "prompt.txt", kv.str());
}

PromptParams load_prompt(const std::filesystem::path& dir) {
  const auto kv = detail::KeyValues::parse(read_text_file(dir / "prompt.txt"), (dir / "prompt.txt").string());
  PromptTemplate t;
  t.kind = parse_template_kind(kv.get("template"));
  t.size = detail::parse_sizes(kv.get("p"), "p").at(0);
  const auto offset = detail::parse_sizes(kv.get("offset"), "offset");
  if (offset.size() != 2) throw DataError("prompt.txt: offset must list y,x");
  t.offset_y = offset[0];
  t.offset_x = offset[1];
  const auto input = detail::parse_sizes(kv.get("input"), "input");
  if (input.size() != 3) throw DataError("prompt.txt: input must list C,H,W");
  PromptInit init;
  init.kind = kv.get("init") == "zeros" ? PromptInitKind::zeros : PromptInitKind::uniform;
  init.amplitude = std::stod(kv.get("init_amplitude"));
  PromptParams pp = init_prompt(t, input[0], input[1], input[2], init, std::stoull(kv.get("seed")));
  pp.space = parse_prompt_space(kv.get("space"));
  if (kv.has("channel_std")) pp.channel_std = detail::parse_floats(kv.get("channel_std"), "channel_std");
  Tensor values = read_tensor(dir / "values.vpt");
  if (values.dims() != pp.values.dims()) {
    throw DataError("values.vpt has shape " + shape_str(values.dims()) + ", expected " + shape_str(pp.values.dims()));
  }
  values.set_requires_grad(true);
  pp.values = std::move(values);
  return pp;
}

}  // namespace vpt
