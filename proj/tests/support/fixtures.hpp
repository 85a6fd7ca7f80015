#pragma once

#include <cstdlib>
#include <filesystem>
#include <map>
#include <string>

#include "vpt/backbone.hpp"
#include "vpt/datasets.hpp"

namespace fixtures {

// Fresh empty directory under the test scratch root.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const char* root = std::getenv("VPT_TEST_TMP");
  std::filesystem::path base = root ? std::filesystem::path(root) : std::filesystem::temp_directory_path() / "vpt_tests";
  const auto dir = base / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline vpt::ArchSpec tiny_arch(vpt::BackboneKind kind, std::size_t side = 16) {
  vpt::ArchSpec arch;
  arch.channels = {8, 16};
  arch.in_height = side;
  arch.in_width = side;
  arch.head = kind == vpt::BackboneKind::classifier ? 8 : 16;
  return arch;
}

// Pretrained on pretrain-8 at 16x16; built once per (kind, seed) and cached.
// Copies share weight storage, so callers must not write into parameters.
inline vpt::Backbone tiny_pretrained(vpt::BackboneKind kind, std::uint64_t seed = 0) {
  static std::map<std::pair<int, std::uint64_t>, vpt::Backbone> cache;
  const auto key = std::make_pair(static_cast<int>(kind), seed);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  auto b = vpt::Backbone::build(kind, tiny_arch(kind), seed);
  auto suite = vpt::make_suite("pretrain-8", 320, 16, seed, 16, 16);
  if (kind == vpt::BackboneKind::dual_encoder) b.table() = vpt::ClassEmbeddingTable::random(8, 16, seed, 10.0f);
  vpt::PretrainOptions opt;
  opt.epochs = 8;
  opt.seed = seed;
  return cache.emplace(key, vpt::pretrain(std::move(b), suite.train, opt)).first->second;
}

// Desk-scale model (8/16/32 channels at 32x32) pretrained on 800 images for
// the default 15 epochs; a few seconds per kind.
inline vpt::Backbone desk_pretrained(vpt::BackboneKind kind) {
  static std::map<int, vpt::Backbone> cache;
  if (auto it = cache.find(static_cast<int>(kind)); it != cache.end()) return it->second;
  vpt::ArchSpec arch;
  arch.channels = {8, 16, 32};
  arch.head = kind == vpt::BackboneKind::classifier ? 8 : 64;
  auto b = vpt::Backbone::build(kind, arch, 0);
  if (kind == vpt::BackboneKind::dual_encoder) b.table() = vpt::ClassEmbeddingTable::random(8, 64, 0, 10.0f);
  const auto suite = vpt::make_suite("pretrain-8", 800, 16, 0);
  return cache.emplace(static_cast<int>(kind), vpt::pretrain(std::move(b), suite.train, {})).first->second;
}

// Held-out pretraining images for semantic mappings, normalized like the model.
inline vpt::LabeledDataset pretrain_heldout(const vpt::Backbone& b, std::size_t count = 400) {
  auto held = vpt::make_suite("pretrain-8", 8, count, 1, b.arch().in_height, b.arch().in_width).test;
  return vpt::resize_to_model(held, b.arch().in_height, b.arch().in_width, b.stats);
}

}  // namespace fixtures
