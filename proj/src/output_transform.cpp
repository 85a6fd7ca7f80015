#include "vpt/output_transform.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "vpt/errors.hpp"
#include "vpt/ops.hpp"
#include "vpt/seeding.hpp"
#include "text_kv.hpp"

namespace vpt {

void HardCodedMapping::validate() const {
  if (targets.empty()) throw ConfigError("mapping has no downstream classes");
  if (targets.size() > pretrain_classes) {
    throw ConfigError("mapping needs k_down <= K_pre, got " + std::to_string(targets.size()) + " > " +
                      std::to_string(pretrain_classes));
  }
  std::vector<bool> used(pretrain_classes, false);
  for (std::size_t j = 0; j < targets.size(); ++j) {
    if (targets[j] >= pretrain_classes) {
      throw ConfigError("mapping target " + std::to_string(targets[j]) + " for class " + std::to_string(j) +
                        " is outside [0, " + std::to_string(pretrain_classes) + ")");
    }
    if (used[targets[j]]) throw ConfigError("mapping is not injective: target " + std::to_string(targets[j]));
    used[targets[j]] = true;
  }
}

Tensor map_logits(const HardCodedMapping& mapping, const Tensor& native_logits) {
  if (native_logits.rank() != 2) throw ShapeError("map_logits expects [N,K], got " + shape_str(native_logits.dims()));
  mapping.validate();
  if (mapping.pretrain_classes != native_logits.dim(1)) {
    throw ShapeError("mapping was built for " + std::to_string(mapping.pretrain_classes) + " native classes, logits have " +
                     std::to_string(native_logits.dim(1)));
  }
  return ops::gather_columns(native_logits, mapping.targets);
}

std::string to_string(MappingStrategy s) {
  switch (s) {
    case MappingStrategy::semantic: return "semantic";
    case MappingStrategy::arbitrary: return "arbitrary";
    case MappingStrategy::swapped: return "swapped";
  }
  return "?";
}

MappingStrategy parse_mapping_strategy(const std::string& text) {
  if (text == "semantic") return MappingStrategy::semantic;
  if (text == "arbitrary") return MappingStrategy::arbitrary;
  if (text == "swapped") return MappingStrategy::swapped;
  throw ConfigError("unknown mapping strategy '" + text + "' (expected semantic, arbitrary or swapped)");
}

HardCodedMapping semantic_mapping(const std::vector<std::vector<double>>& similarity) {
  if (similarity.empty()) throw ConfigError("semantic mapping needs at least one downstream class");
  const std::size_t k_down = similarity.size();
  const std::size_t k_pre = similarity[0].size();
  for (const auto& row : similarity) {
    if (row.size() != k_pre) throw ShapeError("similarity rows must have equal length");
  }
  if (k_down > k_pre) {
    throw ConfigError("mapping needs k_down <= K_pre, got " + std::to_string(k_down) + " > " + std::to_string(k_pre));
  }
  HardCodedMapping m;
  m.pretrain_classes = k_pre;
  m.targets.assign(k_down, 0);
  std::vector<bool> row_done(k_down, false), col_used(k_pre, false);
  for (std::size_t step = 0; step < k_down; ++step) {
    double best = -std::numeric_limits<double>::infinity();
    std::size_t bj = k_down, bk = k_pre;
    for (std::size_t j = 0; j < k_down; ++j) {
      if (row_done[j]) continue;
      for (std::size_t k = 0; k < k_pre; ++k) {
        if (col_used[k]) continue;
        if (bj == k_down || similarity[j][k] > best) {
          best = similarity[j][k];
          bj = j;
          bk = k;
        }
      }
    }
    row_done[bj] = true;
    col_used[bk] = true;
    m.targets[bj] = bk;
  }
  return m;
}

HardCodedMapping arbitrary_mapping(std::size_t downstream_classes, std::size_t pretrain_classes, std::uint64_t seed) {
  if (downstream_classes > pretrain_classes) {
    throw ConfigError("mapping needs k_down <= K_pre, got " + std::to_string(downstream_classes) + " > " +
                      std::to_string(pretrain_classes));
  }
  std::vector<std::size_t> order(pretrain_classes);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(mix_seed(seed, 0xa4b));
  std::shuffle(order.begin(), order.end(), rng);
  HardCodedMapping m;
  m.pretrain_classes = pretrain_classes;
  m.targets.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(downstream_classes));
  m.validate();
  return m;
}

HardCodedMapping swapped_mapping(const HardCodedMapping& base) {
  base.validate();
  if (base.size() < 2) throw ConfigError("swapping needs at least two downstream classes");
  HardCodedMapping m = base;
  for (std::size_t j = 0; j < base.size(); ++j) m.targets[j] = base.targets[(j + 1) % base.size()];
  return m;
}

namespace {

std::vector<std::vector<double>> class_means(const Backbone& backbone, const LabeledDataset& data) {
  const std::size_t k = data.class_names.size();
  std::vector<std::vector<double>> sums(k, std::vector<double>(backbone.feature_dim(), 0.0));
  std::vector<std::size_t> counts(k, 0);
  for (const auto& rows : sequential_batches(data.size(), 64)) {
    const Tensor f = backbone.features(data.batch(rows));
    const auto fd = f.data();
    const std::size_t d = f.dim(1);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::size_t y = data.labels[rows[i]];
      ++counts[y];
      for (std::size_t t = 0; t < d; ++t) sums[y][t] += fd[i * d + t];
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) throw DataError("class '" + data.class_names[c] + "' has no examples");
    for (auto& v : sums[c]) v /= static_cast<double>(counts[c]);
  }
  return sums;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) throw NumericError("class similarity: zero-norm class mean");
  return ab / std::sqrt(aa * bb);
}

}  // namespace

std::vector<std::vector<double>> class_similarity(const Backbone& backbone, const LabeledDataset& downstream,
                                                  const LabeledDataset& pretrain_heldout) {
  const auto down = class_means(backbone, downstream);
  const auto pre = class_means(backbone, pretrain_heldout);
  std::vector<std::vector<double>> sim(down.size(), std::vector<double>(pre.size()));
  for (std::size_t j = 0; j < down.size(); ++j) {
    for (std::size_t k = 0; k < pre.size(); ++k) sim[j][k] = cosine(down[j], pre[k]);
  }
  return sim;
}

std::string format_mapping(const HardCodedMapping& mapping) {
  std::string out;
  for (std::size_t j = 0; j < mapping.size(); ++j) out += std::to_string(j) + " -> " + std::to_string(mapping.targets[j]) + "\n";
  return out;
}

HardCodedMapping parse_mapping(const std::string& text, std::size_t pretrain_classes) {
  std::istringstream in(text);
  std::string line;
  HardCodedMapping m;
  m.pretrain_classes = pretrain_classes;
  while (std::getline(in, line)) {
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto arrow = line.find("->");
    if (arrow == std::string::npos) throw DataError("mapping line without '->': " + line);
    const auto down = detail::parse_sizes(detail::trim(line.substr(0, arrow)), "mapping index");
    const auto pre = detail::parse_sizes(detail::trim(line.substr(arrow + 2)), "mapping target");
    if (down.size() != 1 || pre.size() != 1) throw DataError("mapping line must hold one index per side: " + line);
    if (down[0] != m.targets.size()) throw DataError("mapping lines must list downstream indices 0,1,2,... in order");
    m.targets.push_back(pre[0]);
  }
  m.validate();
  return m;
}

TextPromptHead make_text_head(const Backbone& backbone, const std::vector<std::string>& downstream_classes) {
  const auto& table = backbone.table();
  const Tensor active = table.active();
  const std::size_t d = table.dim();
  std::vector<float> rows;
  for (const auto& name : downstream_classes) {
    auto it = std::find(backbone.class_names.begin(), backbone.class_names.end(), name);
    if (it == backbone.class_names.end()) {
      throw DataError("class '" + name + "' has no text embedding in the backbone's table");
    }
    const auto k = static_cast<std::size_t>(it - backbone.class_names.begin());
    if (k >= table.rows()) throw DataError("embedding table has no row for class '" + name + "'");
    const auto src = active.data().subspan(k * d, d);
    rows.insert(rows.end(), src.begin(), src.end());
  }
  TextPromptHead head;
  head.rows = Tensor({downstream_classes.size(), d}, std::move(rows));
  head.temperature = table.temperature;
  head.quality_noise = table.quality_noise;
  return head;
}

Tensor head_logits(const TextPromptHead& head, const Tensor& features) {
  return ops::cosine_logits(features, head.rows, head.temperature);
}

std::string to_string(MappingLoss m) {
  return m == MappingLoss::gather_then_softmax ? "gather_then_softmax" : "softmax_then_gather";
}

MappingLoss parse_mapping_loss(const std::string& text) {
  if (text == "gather_then_softmax") return MappingLoss::gather_then_softmax;
  if (text == "softmax_then_gather") return MappingLoss::softmax_then_gather;
  throw ConfigError("unknown mapping loss '" + text + "' (expected gather_then_softmax or softmax_then_gather)");
}

std::size_t OutputTransform::classes() const {
  if (is_mapping()) return std::get<HardCodedMapping>(kind).size();
  return std::get<TextPromptHead>(kind).size();
}

Tensor transform_logits(const Backbone& backbone, const OutputTransform& transform, const Tensor& images) {
  if (const auto* m = std::get_if<HardCodedMapping>(&transform.kind)) return map_logits(*m, backbone.logits(images));
  return head_logits(std::get<TextPromptHead>(transform.kind), backbone.features(images));
}

Tensor transform_loss(const Backbone& backbone, const OutputTransform& transform, const Tensor& images,
                      std::span<const std::size_t> labels) {
  for (auto y : labels) {
    if (y >= transform.classes()) {
      throw DataError("label " + std::to_string(y) + " is outside the " + std::to_string(transform.classes()) +
                      " downstream classes");
    }
  }
  const auto* m = std::get_if<HardCodedMapping>(&transform.kind);
  if (m && transform.mapping_loss == MappingLoss::softmax_then_gather) {
    std::vector<std::size_t> native(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) native[i] = m->targets[labels[i]];
    const Tensor logits = backbone.logits(images);
    m->validate();
    return ops::softmax_cross_entropy(logits, native);
  }
  return ops::softmax_cross_entropy(transform_logits(backbone, transform, images), labels);
}

}  // namespace vpt
