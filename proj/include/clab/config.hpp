#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "clab/augment.hpp"
#include "clab/dataset.hpp"
#include "clab/encoder.hpp"
#include "clab/metrics.hpp"

namespace clab {

// Flat key=value text: '#' starts a comment, blank lines are ignored, dotted
// keys group settings (train.lr=0.03).
using KeyValues = std::map<std::string, std::string>;
KeyValues parse_key_values(const std::string& text);

struct ExperimentConfig {
  DatasetSpec data;
  AugmentSpec aug;
  TrainConfig train;
  MetricConfig metrics;
  std::vector<std::size_t> hidden = {256, 128};
  std::size_t embed_dim = 64;
  std::size_t view_size = 0;  // 0 = dataset image side
  std::size_t probe_max_iters = 10000;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "out";
  bool plots = true;

  // Applies recognized keys; throws on unknown keys or malformed values.
  void apply(const KeyValues& kv);
  void validate() const;
  // Canonical key=value rendering, accepted back by apply().
  std::string to_text() const;
};

ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace clab
