#include "vpt/datasets.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "vpt/digest.hpp"
#include "vpt/seeding.hpp"
#include "text_kv.hpp"
#include "vpt/tensor_io.hpp"

namespace vpt {

void LabeledDataset::validate() const {
  if (images.rank() != 4) throw DataError("dataset images must be [N,C,H,W], got " + shape_str(images.dims()));
  const std::size_t n = images.dim(0);
  if (labels.size() != n) {
    throw DataError("dataset has " + std::to_string(n) + " images but " + std::to_string(labels.size()) + " labels");
  }
  for (auto y : labels) {
    if (y >= class_names.size()) {
      throw DataError("label " + std::to_string(y) + " outside " + std::to_string(class_names.size()) + " classes");
    }
  }
  if (stats.mean.size() != images.dim(1) || stats.std.size() != images.dim(1)) {
    throw DataError("normalization stats need one mean/std per channel");
  }
  for (float s : stats.std) {
    if (!(s > 0.0f)) throw DataError("normalization std must be positive");
  }
  if (!domain_tags.empty() && domain_tags.size() != n) {
    throw DataError("domain_tags must be empty or one per image");
  }
}

Tensor LabeledDataset::batch(std::span<const std::size_t> rows) const {
  const std::size_t c = channels(), plane = height() * width(), block = c * plane;
  std::vector<float> out(rows.size() * block);
  const float* src = images.data().data();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= size()) throw DataError("row " + std::to_string(rows[i]) + " out of range");
    const float* img = src + rows[i] * block;
    float* dst = out.data() + i * block;
    for (std::size_t ch = 0; ch < c; ++ch) {
      const float mean = stats.mean[ch];
      const float inv = 1.0f / stats.std[ch];
      for (std::size_t p = 0; p < plane; ++p) dst[ch * plane + p] = (img[ch * plane + p] - mean) * inv;
    }
  }
  return Tensor({rows.size(), c, height(), width()}, std::move(out));
}

std::vector<std::size_t> LabeledDataset::batch_labels(std::span<const std::size_t> rows) const {
  std::vector<std::size_t> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(labels.at(r));
  return out;
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> rows) const {
  if (rows.empty()) throw DataError("empty subset");
  const std::size_t block = channels() * height() * width();
  std::vector<float> px(rows.size() * block);
  LabeledDataset out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= size()) throw DataError("row " + std::to_string(rows[i]) + " out of range");
    std::copy_n(images.data().data() + rows[i] * block, block, px.data() + i * block);
    out.labels.push_back(labels[rows[i]]);
    if (!domain_tags.empty()) out.domain_tags.push_back(domain_tags[rows[i]]);
  }
  out.images = Tensor({rows.size(), channels(), height(), width()}, std::move(px));
  out.class_names = class_names;
  out.stats = stats;
  return out;
}

NormalizationStats compute_stats(const Tensor& images) {
  if (images.rank() != 4) throw DataError("compute_stats needs [N,C,H,W]");
  const std::size_t n = images.dim(0), c = images.dim(1), plane = images.dim(2) * images.dim(3);
  NormalizationStats s;
  for (std::size_t ch = 0; ch < c; ++ch) {
    double sum = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const float* p = images.data().data() + (i * c + ch) * plane;
      for (std::size_t k = 0; k < plane; ++k) {
        sum += p[k];
        sq += static_cast<double>(p[k]) * p[k];
      }
    }
    const double count = static_cast<double>(n * plane);
    const double mean = sum / count;
    const double var = std::max(0.0, sq / count - mean * mean);
    s.mean.push_back(static_cast<float>(mean));
    // Constant channels would divide by zero; fall back to unit scale.
    s.std.push_back(var > 1e-12 ? static_cast<float>(std::sqrt(var)) : 1.0f);
  }
  return s;
}

const std::vector<std::string>& shape_names() {
  static const std::vector<std::string> names{"triangle", "square", "circle", "cross",
                                              "ring",     "diamond", "bar",   "star"};
  return names;
}

namespace {

using Point = std::array<double, 2>;

bool inside_polygon(const std::vector<Point>& poly, double x, double y) {
  bool in = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const auto& a = poly[i];
    const auto& b = poly[j];
    if ((a[1] > y) != (b[1] > y) && x < (b[0] - a[0]) * (y - a[1]) / (b[1] - a[1]) + a[0]) in = !in;
  }
  return in;
}

std::vector<Point> regular_star(std::size_t points, double outer, double inner) {
  std::vector<Point> poly;
  for (std::size_t i = 0; i < 2 * points; ++i) {
    const double r = (i % 2 == 0) ? outer : inner;
    const double a = std::numbers::pi / 2 + std::numbers::pi * static_cast<double>(i) / static_cast<double>(points);
    poly.push_back({r * std::cos(a), -r * std::sin(a)});
  }
  return poly;
}

// (u, v) are object-local coordinates; the shape fits in the unit disc.
bool inside_shape(std::size_t shape, double u, double v) {
  static const std::vector<Point> triangle = [] {
    std::vector<Point> p;
    for (int i = 0; i < 3; ++i) {
      const double a = std::numbers::pi / 2 + 2 * std::numbers::pi * i / 3;
      p.push_back({0.95 * std::cos(a), -0.95 * std::sin(a)});
    }
    return p;
  }();
  static const std::vector<Point> star = regular_star(5, 1.0, 0.42);
  const double au = std::abs(u), av = std::abs(v);
  switch (shape) {
    case 0: return inside_polygon(triangle, u, v);
    case 1: return au <= 0.72 && av <= 0.72;
    case 2: return u * u + v * v <= 0.82 * 0.82;
    case 3: return (au <= 0.28 && av <= 0.92) || (av <= 0.28 && au <= 0.92);
    case 4: {
      const double r2 = u * u + v * v;
      return r2 >= 0.5 * 0.5 && r2 <= 0.9 * 0.9;
    }
    case 5: return au + av <= 0.95;
    case 6: return au <= 0.95 && av <= 0.3;
    case 7: return inside_polygon(star, u, v);
    default: throw ConfigError("unknown shape id " + std::to_string(shape));
  }
}

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  h = h - std::floor(h);
  const double hh = h * 6.0;
  const int sector = static_cast<int>(hh) % 6;
  const double f = hh - std::floor(hh);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (sector) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

struct DomainStyle {
  std::array<double, 3> background;
  double texture;
};

DomainStyle domain_style(std::size_t index) {
  static const std::array<DomainStyle, 4> styles{{
      {{0.12, 0.12, 0.14}, 0.02},
      {{0.05, 0.10, 0.30}, 0.03},
      {{0.30, 0.28, 0.08}, 0.03},
      {{0.34, 0.34, 0.34}, 0.08},
  }};
  return styles[index % styles.size()];
}

// "A".."D" pick the four built-in styles; other tags fold onto them by
// character sum.
std::size_t style_for_tag(const std::string& tag) {
  if (tag.size() == 1 && tag[0] >= 'A' && tag[0] <= 'Z') return static_cast<std::size_t>(tag[0] - 'A');
  std::size_t sum = 0;
  for (unsigned char ch : tag) sum += ch;
  return sum;
}

std::mt19937_64 row_rng(std::uint64_t seed, std::uint64_t row, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(row), static_cast<std::uint32_t>(row >> 32),
                    static_cast<std::uint32_t>(salt)};
  return std::mt19937_64(seq);
}


}  // namespace

LabeledDataset generate_synthetic(const TaskSpec& spec) {
  if (spec.classes.empty()) throw ConfigError("task spec needs at least one class");
  if (spec.count < spec.classes.size()) {
    throw ConfigError("task spec count " + std::to_string(spec.count) + " is below the class count " +
                      std::to_string(spec.classes.size()));
  }
  if (spec.channels != 3 && spec.channels != 1) throw ConfigError("generator renders 1 or 3 channels");
  if (spec.height < 4 || spec.width < 4) throw ConfigError("generator needs images of at least 4x4");
  if (spec.jitter < 0.0 || spec.jitter > 1.0) throw ConfigError("jitter must lie in [0,1]");
  for (auto c : spec.classes) {
    if (c >= shape_names().size()) throw ConfigError("unknown shape id " + std::to_string(c));
  }

  const std::size_t n = spec.count, k = spec.classes.size();
  const std::size_t h = spec.height, w = spec.width, c = spec.channels;
  const double side = static_cast<double>(std::min(h, w));
  const double jit = spec.jitter;
  std::vector<float> px(n * c * h * w);
  LabeledDataset out;
  out.labels.resize(n);
  for (auto id : spec.classes) out.class_names.push_back(shape_names()[id]);

  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % k;
    out.labels[i] = label;
    const std::size_t shape = spec.classes[label];
    std::size_t style_index = 0;
    if (!spec.domains.empty()) {
      const auto& tag = spec.domains[(i / k) % spec.domains.size()];
      out.domain_tags.push_back(tag);
      style_index = style_for_tag(tag);
    }
    const DomainStyle style = domain_style(style_index);

    auto rng = row_rng(spec.seed, i, 0x5eed);
    std::uniform_real_distribution<double> sym(-1.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double cx = 0.5 * static_cast<double>(w) + jit * 0.15 * side * sym(rng);
    const double cy = 0.5 * static_cast<double>(h) + jit * 0.15 * side * sym(rng);
    const double radius = 0.3 * side * (1.0 + 0.25 * jit * sym(rng));
    const double angle = jit * sym(rng) * 25.0 * std::numbers::pi / 180.0;
    const double hue = static_cast<double>(shape) / 8.0 + 0.5 * jit * sym(rng);
    const auto fg = hsv_to_rgb(hue, 0.75, 0.9);
    std::array<double, 3> bg = style.background;
    for (auto& v : bg) v += 0.06 * jit * sym(rng);
    const double texture = style.texture * jit;
    const double ca = std::cos(angle), sa = std::sin(angle);

    float* img = px.data() + i * c * h * w;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        // 2x2 supersampling for soft edges.
        double cover = 0.0;
        for (int sy = 0; sy < 2; ++sy) {
          for (int sx = 0; sx < 2; ++sx) {
            const double dx = static_cast<double>(x) + 0.25 + 0.5 * sx - cx;
            const double dy = static_cast<double>(y) + 0.25 + 0.5 * sy - cy;
            const double u = (ca * dx + sa * dy) / radius;
            const double v = (-sa * dx + ca * dy) / radius;
            if (inside_shape(shape, u, v)) cover += 0.25;
          }
        }
        const double noise = texture > 0.0 ? texture * gauss(rng) : 0.0;
        if (c == 3) {
          for (std::size_t ch = 0; ch < 3; ++ch) {
            img[(ch * h + y) * w + x] = static_cast<float>(cover * fg[ch] + (1.0 - cover) * bg[ch] + noise);
          }
        } else {
          const double lum_fg = (fg[0] + fg[1] + fg[2]) / 3.0, lum_bg = (bg[0] + bg[1] + bg[2]) / 3.0;
          img[y * w + x] = static_cast<float>(cover * lum_fg + (1.0 - cover) * lum_bg + noise);
        }
      }
    }
  }
  out.images = Tensor({n, c, h, w}, std::move(px));
  out.stats = compute_stats(out.images);
  out.validate();
  return out;
}

Tensor shift_pixels(const Tensor& images, ShiftKind kind, double magnitude, std::uint64_t seed) {
  if (magnitude < 0.0 || magnitude > 1.0) throw ConfigError("shift magnitude must lie in [0,1]");
  if (images.rank() != 4) throw ShapeError("shift_pixels needs [N,C,H,W]");
  if (kind == ShiftKind::domain_split) throw ConfigError("domain_split is not a pixel transform");
  Tensor out = images.clone();
  if (magnitude == 0.0) return out;
  const std::size_t n = images.dim(0), c = images.dim(1), plane = images.dim(2) * images.dim(3);
  auto dst = out.mutable_data();
  const auto src = images.data();
  const float m = static_cast<float>(magnitude);
  if (kind == ShiftKind::color_shift) {
    // Rotate the channels, compress contrast and lift toward a warm tint.
    static const std::array<float, 3> tint{0.55f, 0.35f, 0.15f};
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        const std::size_t from = (ch + 1) % c;
        const float t = tint[ch % 3];
        for (std::size_t p = 0; p < plane; ++p) {
          const float x = src[(i * c + ch) * plane + p];
          const float rotated = src[(i * c + from) * plane + p];
          dst[(i * c + ch) * plane + p] = (1.0f - m) * x + m * (0.6f * rotated + t);
        }
      }
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      auto rng = row_rng(seed, i, 0x7e47);
      std::normal_distribution<float> gauss(0.0f, 1.0f);
      for (std::size_t j = 0; j < c * plane; ++j) dst[i * c * plane + j] += m * 0.3f * gauss(rng);
    }
  }
  return out;
}

std::pair<LabeledDataset, LabeledDataset> apply_shift(const LabeledDataset& data, const ShiftSpec& shift,
                                                      std::uint64_t seed) {
  data.validate();
  if (shift.magnitude < 0.0 || shift.magnitude > 1.0) throw ConfigError("shift magnitude must lie in [0,1]");
  if (shift.kind == ShiftKind::domain_split) {
    std::set<std::string> tags(data.domain_tags.begin(), data.domain_tags.end());
    if (tags.size() < 2) throw DataError("domain_split needs at least 2 domains, found " + std::to_string(tags.size()));
    std::set<std::string> test_tags(shift.test_domains.begin(), shift.test_domains.end());
    if (test_tags.empty()) test_tags.insert(*tags.rbegin());
    for (const auto& t : test_tags) {
      if (!tags.count(t)) throw DataError("test domain '" + t + "' not present in dataset");
    }
    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t i = 0; i < data.size(); ++i) {
      (test_tags.count(data.domain_tags[i]) ? test_rows : train_rows).push_back(i);
    }
    if (train_rows.empty()) throw DataError("domain_split leaves no training domains");
    return {data.subset(train_rows), data.subset(test_rows)};
  }
  if (shift.test_fraction <= 0.0 || shift.test_fraction >= 1.0) throw ConfigError("test_fraction must lie in (0,1)");
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(mix_seed(seed, 11));
  std::shuffle(order.begin(), order.end(), rng);
  auto n_test = static_cast<std::size_t>(std::llround(shift.test_fraction * static_cast<double>(data.size())));
  n_test = std::clamp<std::size_t>(n_test, 1, data.size() - 1);
  std::vector<std::size_t> test_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> train_rows(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(test_rows.begin(), test_rows.end());
  std::sort(train_rows.begin(), train_rows.end());
  LabeledDataset test = data.subset(test_rows);
  test.images = shift_pixels(test.images, shift.kind, shift.magnitude, mix_seed(seed, 12));
  return {data.subset(train_rows), std::move(test)};
}

LabeledDataset resize_to_model(const LabeledDataset& data, std::size_t target_h, std::size_t target_w,
                               const NormalizationStats& model_stats) {
  if (target_h == 0 || target_w == 0) throw ConfigError("resize target must be positive");
  const std::size_t n = data.size(), c = data.channels(), h = data.height(), w = data.width();
  LabeledDataset out = data;
  out.stats = model_stats;
  if (h != target_h || w != target_w) {
    std::vector<float> px(n * c * target_h * target_w);
    const double sy = static_cast<double>(h) / static_cast<double>(target_h);
    const double sx = static_cast<double>(w) / static_cast<double>(target_w);
    const float* src = data.images.data().data();
    for (std::size_t y = 0; y < target_h; ++y) {
      const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
      const auto y0 = static_cast<std::size_t>(fy);
      const std::size_t y1 = std::min(y0 + 1, h - 1);
      const double wy = fy - static_cast<double>(y0);
      for (std::size_t x = 0; x < target_w; ++x) {
        const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
        const auto x0 = static_cast<std::size_t>(fx);
        const std::size_t x1 = std::min(x0 + 1, w - 1);
        const double wx = fx - static_cast<double>(x0);
        for (std::size_t pl = 0; pl < n * c; ++pl) {
          const float* p = src + pl * h * w;
          const double top = (1 - wx) * p[y0 * w + x0] + wx * p[y0 * w + x1];
          const double bot = (1 - wx) * p[y1 * w + x0] + wx * p[y1 * w + x1];
          px[(pl * target_h + y) * target_w + x] = static_cast<float>((1 - wy) * top + wy * bot);
        }
      }
    }
    out.images = Tensor({n, c, target_h, target_w}, std::move(px));
  }
  out.validate();
  return out;
}

LabeledDataset load_external(const std::filesystem::path& manifest) {
  static const std::set<std::string> known{"images", "labels", "class_names", "mean", "std", "domain_tags"};
  const auto fields = detail::KeyValues::parse(read_text_file(manifest), "manifest " + manifest.string(), known);
  const auto base = manifest.parent_path();
  LabeledDataset out;
  out.images = read_tensor(base / fields.get("images"));
  if (out.images.rank() != 4) {
    throw DataError("images: expected rank 4 [N,C,H,W], got " + shape_str(out.images.dims()));
  }
  const Tensor labels = read_tensor(base / fields.get("labels"));
  if (labels.rank() != 1) throw DataError("labels: expected rank 1 [N], got " + shape_str(labels.dims()));
  if (labels.dim(0) != out.images.dim(0)) {
    throw DataError("labels: length " + std::to_string(labels.dim(0)) + " does not match image count " +
                    std::to_string(out.images.dim(0)));
  }
  out.class_names = detail::split_strings(fields.get("class_names"));
  for (float v : labels.data()) {
    if (!(v >= 0.0f) || v != std::floor(v)) throw DataError("labels: value " + std::to_string(v) + " is not an index");
    out.labels.push_back(static_cast<std::size_t>(v));
  }
  if (fields.has("mean") && fields.has("std")) {
    out.stats.mean = detail::parse_floats(fields.get("mean"), "manifest mean");
    out.stats.std = detail::parse_floats(fields.get("std"), "manifest std");
  } else {
    out.stats = compute_stats(out.images);
  }
  if (fields.has("domain_tags")) out.domain_tags = detail::split_strings(fields.get("domain_tags"));
  out.validate();
  return out;
}

void save_external(const LabeledDataset& data, const std::filesystem::path& dir, const std::string& stem) {
  data.validate();
  std::filesystem::create_directories(dir);
  write_tensor(dir / (stem + "_images.vpt"), data.images);
  const std::size_t n = data.labels.size();
  write_tensor(dir / (stem + "_labels.vpt"), Tensor({n}, std::vector<float>(data.labels.begin(), data.labels.end())));
  detail::KeyValues kv;
  kv.set("images", stem + "_images.vpt");
  kv.set("labels", stem + "_labels.vpt");
  kv.set("class_names", detail::join_strings(data.class_names));
  kv.set("mean", detail::join_numbers(data.stats.mean));
  kv.set("std", detail::join_numbers(data.stats.std));
  if (!data.domain_tags.empty()) kv.set("domain_tags", detail::join_strings(data.domain_tags));
  write_text_file(dir / (stem + ".manifest"), kv.str());
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"pretrain-8", "down-4-near", "down-4-far", "down-4-domains",
                                              "down-2-pair"};
  return names;
}

SuiteSplit make_suite(const std::string& name, std::size_t train_count, std::size_t test_count, std::uint64_t seed,
                      std::size_t height, std::size_t width) {
  TaskSpec train;
  train.height = height;
  train.width = width;
  train.count = train_count;
  train.seed = mix_seed(seed, 1);
  TaskSpec test = train;
  test.count = test_count;
  test.seed = mix_seed(seed, 2);

  double far_shift = 0.0;
  if (name == "pretrain-8") {
    train.classes = {0, 1, 2, 3, 4, 5, 6, 7};
  } else if (name == "down-4-near") {
    train.classes = {0, 2, 5, 7};
  } else if (name == "down-4-far") {
    train.classes = {1, 3, 4, 6};
    far_shift = 1.0;
  } else if (name == "down-4-domains") {
    train.classes = {0, 1, 2, 3};
    train.domains = {"A", "B", "C"};
    test.domains = {"D"};
  } else if (name == "down-2-pair") {
    train.classes = {1, 2};
  } else {
    throw ConfigError("unknown dataset suite '" + name + "'");
  }
  test.classes = train.classes;
  SuiteSplit out{generate_synthetic(train), generate_synthetic(test)};
  if (far_shift > 0.0) {
    out.train.images = shift_pixels(out.train.images, ShiftKind::color_shift, far_shift, mix_seed(seed, 3));
    out.test.images = shift_pixels(out.test.images, ShiftKind::color_shift, far_shift, mix_seed(seed, 4));
    out.train.stats = compute_stats(out.train.images);
    out.test.stats = compute_stats(out.test.images);
  }
  return out;
}

std::string dataset_digest(const LabeledDataset& data) {
  std::vector<std::uint8_t> bytes = encode_tensor(data.images);
  for (auto y : data.labels) {
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(y) >> (8 * i)));
  }
  for (const auto& n : data.class_names) {
    bytes.insert(bytes.end(), n.begin(), n.end());
    bytes.push_back(0);
  }
  return sha256_hex(bytes);
}

}  // namespace vpt
