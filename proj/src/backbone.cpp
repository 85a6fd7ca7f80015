#include "vpt/backbone.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "vpt/ops.hpp"
#include "vpt/optim.hpp"
#include "vpt/seeding.hpp"
#include "vpt/tensor_io.hpp"
#include "text_kv.hpp"

namespace vpt {

std::string to_string(BackboneKind kind) {
  return kind == BackboneKind::classifier ? "classifier" : "dual_encoder";
}

BackboneKind parse_backbone_kind(const std::string& text) {
  if (text == "classifier") return BackboneKind::classifier;
  if (text == "dual_encoder") return BackboneKind::dual_encoder;
  throw ConfigError("unknown backbone kind '" + text + "' (expected classifier or dual_encoder)");
}

void ArchSpec::validate() const {
  if (channels.empty()) throw ConfigError("arch: at least one conv stage is required");
  for (auto c : channels) {
    if (c == 0) throw ConfigError("arch: stage channel counts must be positive");
  }
  if (in_channels == 0 || in_height == 0 || in_width == 0) throw ConfigError("arch: input dims must be positive");
  const std::size_t factor = std::size_t{1} << channels.size();
  if (in_height % factor != 0 || in_width % factor != 0) {
    throw ConfigError("arch: input " + std::to_string(in_height) + "x" + std::to_string(in_width) +
                      " is not divisible by 2^" + std::to_string(channels.size()) + " pooling stages");
  }
  if (head == 0) throw ConfigError("arch: head size must be positive");
}

std::size_t ArchSpec::flat_features() const {
  const std::size_t factor = std::size_t{1} << channels.size();
  return channels.back() * (in_height / factor) * (in_width / factor);
}

ClassEmbeddingTable ClassEmbeddingTable::random(std::size_t classes, std::size_t dim, std::uint64_t seed,
                                                float temperature) {
  if (!(temperature > 0.0f)) throw ConfigError("temperature must be positive");
  std::mt19937_64 rng(mix_seed(seed, 0x7ab1e));
  std::normal_distribution<float> gauss(0.0f, 1.0f / std::sqrt(static_cast<float>(dim)));
  Tensor emb({classes, dim});
  for (auto& v : emb.mutable_data()) v = gauss(rng);
  ClassEmbeddingTable t;
  t.embeddings = std::move(emb);
  t.temperature = temperature;
  t.noise_seed = mix_seed(seed, 0x0015e);
  return t;
}

Tensor ClassEmbeddingTable::active() const {
  if (quality_noise < 0.0) throw ConfigError("quality noise must be non-negative");
  if (quality_noise == 0.0) return embeddings;
  const std::size_t k = rows(), d = dim();
  std::mt19937_64 rng(noise_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto src = embeddings.data();
  std::vector<float> out(src.begin(), src.end());
  for (std::size_t r = 0; r < k; ++r) {
    double norm = 0.0;
    for (std::size_t j = 0; j < d; ++j) norm += static_cast<double>(src[r * d + j]) * src[r * d + j];
    const double amp = quality_noise * std::sqrt(norm);
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] = static_cast<float>(src[r * d + j] + amp * gauss(rng));
  }
  return Tensor(embeddings.dims(), std::move(out));
}

Backbone Backbone::build(BackboneKind kind, const ArchSpec& arch, std::uint64_t seed) {
  arch.validate();
  Backbone b;
  b.kind_ = kind;
  b.arch_ = arch;
  b.seed_ = seed;
  std::mt19937_64 rng(mix_seed(seed, 0xbac));
  auto uniform = [&](Shape dims, double bound) {
    std::uniform_real_distribution<float> u(static_cast<float>(-bound), static_cast<float>(bound));
    Tensor t(std::move(dims));
    for (auto& v : t.mutable_data()) v = u(rng);
    return t;
  };
  std::size_t in_ch = arch.in_channels;
  for (std::size_t s = 0; s < arch.channels.size(); ++s) {
    const std::size_t out_ch = arch.channels[s];
    const std::string stem = "conv" + std::to_string(s + 1);
    const double fan_in = static_cast<double>(in_ch * 9);
    b.params_[stem + ".weight"] = uniform({out_ch, in_ch, 3, 3}, std::sqrt(6.0 / fan_in));
    b.params_[stem + ".bias"] = Tensor({out_ch}, 0.0f);
    b.names_.push_back(stem + ".weight");
    b.names_.push_back(stem + ".bias");
    in_ch = out_ch;
  }
  const std::size_t flat = arch.flat_features();
  const std::string head = kind == BackboneKind::classifier ? "head" : "proj";
  b.params_[head + ".weight"] = uniform({arch.head, flat}, std::sqrt(6.0 / static_cast<double>(flat + arch.head)));
  b.params_[head + ".bias"] = Tensor({arch.head}, 0.0f);
  b.names_.push_back(head + ".weight");
  b.names_.push_back(head + ".bias");
  for (auto& [name, t] : b.params_) t.set_requires_grad(true);
  if (kind == BackboneKind::dual_encoder) b.table_ = ClassEmbeddingTable::random(8, arch.head, seed, 10.0f);
  b.stats.mean.assign(arch.in_channels, 0.0f);
  b.stats.std.assign(arch.in_channels, 1.0f);
  return b;
}

void Backbone::freeze() {
  for (auto& [name, t] : params_) {
    t.zero_grad();
    t.set_requires_grad(false);
  }
  frozen_ = true;
}

Backbone Backbone::trainable_copy() const {
  Backbone b = *this;
  for (auto& [name, t] : b.params_) {
    t = params_.at(name).clone();
    t.set_requires_grad(true);
  }
  if (kind_ == BackboneKind::dual_encoder) b.table_.embeddings = table_.embeddings.clone();
  b.frozen_ = false;
  return b;
}

void Backbone::check_input(const Tensor& images) const {
  if (images.rank() != 4 || images.dim(1) != arch_.in_channels || images.dim(2) != arch_.in_height ||
      images.dim(3) != arch_.in_width) {
    throw ShapeError("backbone expects [N," + std::to_string(arch_.in_channels) + "," +
                     std::to_string(arch_.in_height) + "," + std::to_string(arch_.in_width) + "] input, got " +
                     shape_str(images.dims()));
  }
}

Tensor Backbone::trunk(const Tensor& images) const {
  check_input(images);
  Tensor h = images;
  for (std::size_t s = 0; s < arch_.channels.size(); ++s) {
    const std::string stem = "conv" + std::to_string(s + 1);
    h = ops::conv2d(h, params_.at(stem + ".weight"), params_.at(stem + ".bias"), 1, 1);
    h = ops::max_pool2x2(ops::relu(h));
  }
  return ops::flatten(h);
}

Tensor Backbone::features(const Tensor& images) const {
  Tensor flat = trunk(images);
  if (kind_ == BackboneKind::classifier) return flat;
  return ops::linear(flat, params_.at("proj.weight"), params_.at("proj.bias"));
}

Tensor Backbone::logits(const Tensor& images) const {
  if (kind_ == BackboneKind::classifier) {
    return ops::linear(trunk(images), params_.at("head.weight"), params_.at("head.bias"));
  }
  return ops::cosine_logits(features(images), table_.active(), table_.temperature);
}

std::size_t Backbone::feature_dim() const {
  return kind_ == BackboneKind::classifier ? arch_.flat_features() : arch_.head;
}

std::size_t Backbone::native_classes() const {
  return kind_ == BackboneKind::classifier ? arch_.head : table_.rows();
}

const Tensor& Backbone::param(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw DataError("backbone has no parameter '" + name + "'");
  return it->second;
}

std::vector<Tensor> Backbone::trainable_params() {
  if (frozen_) throw Error("backbone is frozen");
  std::vector<Tensor> out;
  for (const auto& n : names_) out.push_back(params_.at(n));
  return out;
}

const ClassEmbeddingTable& Backbone::table() const {
  if (kind_ != BackboneKind::dual_encoder) throw ConfigError("classifier backbones have no embedding table");
  return table_;
}

ClassEmbeddingTable& Backbone::table() {
  if (kind_ != BackboneKind::dual_encoder) throw ConfigError("classifier backbones have no embedding table");
  return table_;
}

std::vector<std::uint8_t> Backbone::serialize_params() const {
  std::vector<std::uint8_t> out;
  for (const auto& n : names_) {
    out.insert(out.end(), n.begin(), n.end());
    out.push_back(0);
    const auto bytes = encode_tensor(params_.at(n));
    out.insert(out.end(), bytes.begin(), bytes.end());
  }
  if (kind_ == BackboneKind::dual_encoder) {
    const auto bytes = encode_tensor(table_.embeddings);
    out.insert(out.end(), bytes.begin(), bytes.end());
  }
  return out;
}

void Backbone::save(const std::filesystem::path& dir, bool overwrite) const {
  namespace fs = std::filesystem;
  if (fs::exists(dir)) {
    if (!overwrite) throw DataError("checkpoint directory " + dir.string() + " already exists (use --force)");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
  for (const auto& n : names_) write_tensor(dir / (n + ".vpt"), params_.at(n));
  detail::KeyValues meta;
  meta.set("kind", to_string(kind_));
  meta.set("input", detail::join_numbers(std::vector<std::size_t>{arch_.in_channels, arch_.in_height, arch_.in_width}));
  meta.set("channels", detail::join_numbers(arch_.channels));
  meta.set("head", std::to_string(arch_.head));
  meta.set("seed", std::to_string(seed_));
  meta.set("frozen", frozen_ ? "true" : "false");
  meta.set("class_names", detail::join_strings(class_names));
  meta.set("mean", detail::join_numbers(stats.mean));
  meta.set("std", detail::join_numbers(stats.std));
  if (kind_ == BackboneKind::dual_encoder) {
    write_tensor(dir / "class_table.vpt", table_.embeddings);
    meta.set("temperature", detail::format_number(table_.temperature));
    meta.set("quality_noise", detail::format_number(table_.quality_noise));
    meta.set("noise_seed", std::to_string(table_.noise_seed));
  }
  write_text_file(dir / "meta.txt", meta.str());
}

Backbone Backbone::load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("checkpoint directory " + dir.string() + " not found");
  const auto meta = detail::KeyValues::parse(read_text_file(dir / "meta.txt"), (dir / "meta.txt").string());
  ArchSpec arch;
  const auto input = detail::parse_sizes(meta.get("input"));
  if (input.size() != 3) throw DataError("meta.txt: input must list C,H,W");
  arch.in_channels = input[0];
  arch.in_height = input[1];
  arch.in_width = input[2];
  arch.channels = detail::parse_sizes(meta.get("channels"));
  arch.head = detail::parse_sizes(meta.get("head")).at(0);
  const auto kind = parse_backbone_kind(meta.get("kind"));
  Backbone b = build(kind, arch, std::stoull(meta.get("seed")));
  for (const auto& n : b.names_) {
    Tensor t = read_tensor(dir / (n + ".vpt"));
    if (t.dims() != b.params_.at(n).dims()) {
      throw DataError("checkpoint parameter " + n + " has shape " + shape_str(t.dims()) + ", expected " +
                      shape_str(b.params_.at(n).dims()));
    }
    t.set_requires_grad(true);
    b.params_[n] = std::move(t);
  }
  b.class_names = detail::split_strings(meta.get("class_names"));
  b.stats.mean = detail::parse_floats(meta.get("mean"));
  b.stats.std = detail::parse_floats(meta.get("std"));
  if (kind == BackboneKind::dual_encoder) {
    b.table_.embeddings = read_tensor(dir / "class_table.vpt");
    if (b.table_.embeddings.rank() != 2 || b.table_.embeddings.dim(1) != arch.head) {
      throw DataError("class_table.vpt must be [K," + std::to_string(arch.head) + "]");
    }
    b.table_.temperature = std::stof(meta.get("temperature"));
    b.table_.quality_noise = std::stod(meta.get("quality_noise"));
    b.table_.noise_seed = std::stoull(meta.get("noise_seed"));
  }
  if (meta.get("frozen") == "true") b.freeze();
  return b;
}

Backbone pretrain(Backbone backbone, const LabeledDataset& data, const PretrainOptions& options,
                  PretrainReport* report) {
  if (backbone.frozen()) throw Error("pretrain: backbone is already frozen");
  data.validate();
  const std::size_t classes = backbone.native_classes();
  if (data.class_names.size() > classes) {
    throw DataError("pretrain: dataset has " + std::to_string(data.class_names.size()) + " classes, head has " +
                    std::to_string(classes));
  }
  backbone.class_names = data.class_names;
  backbone.stats = data.stats;
  if (options.batch_size == 0) throw ConfigError("batch size must be positive");

  auto params = backbone.trainable_params();
  const std::size_t per_epoch = (data.size() + options.batch_size - 1) / options.batch_size;
  CosineSgd opt(options.lr, per_epoch * options.epochs, options.momentum);
  std::mt19937_64 rng(mix_seed(options.seed, 0x9e7));
  PretrainReport rep;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    double total = 0.0;
    for (const auto& rows : shuffled_batches(data.size(), options.batch_size, rng)) {
      const Tensor loss = ops::softmax_cross_entropy(backbone.logits(data.batch(rows)), data.batch_labels(rows));
      require_finite(loss, "pretraining loss");
      backward(loss);
      opt.step(params);
      total += static_cast<double>(loss.item()) * static_cast<double>(rows.size());
    }
    rep.epoch_loss.push_back(total / static_cast<double>(data.size()));
  }
  backbone.freeze();
  rep.train_accuracy = native_accuracy(backbone, data);
  if (report) *report = std::move(rep);
  return backbone;
}

double native_accuracy(const Backbone& backbone, const LabeledDataset& data, std::size_t batch_size) {
  if (data.size() == 0) throw DataError("accuracy on an empty dataset");
  std::size_t correct = 0;
  for (const auto& rows : sequential_batches(data.size(), batch_size)) {
    const auto pred = ops::argmax_rows(backbone.logits(data.batch(rows)));
    for (std::size_t i = 0; i < rows.size(); ++i) correct += pred[i] == data.labels[rows[i]];
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace vpt
