#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vpseg/field.hpp"

namespace vpseg {

// Volume-ratio range of one foreground structure (uniform draw).
struct StructureSpec {
  double ratio_lo = 0.05;
  double ratio_hi = 0.20;
};

// Nested-ellipse phantom generator: class K-1 is the innermost ellipse,
// classes below it concentric rings, class 0 background. Per-class
// constant intensity plus Gaussian noise, quantized to the 8-bit grid so
// PGM round-trips are lossless.
struct SynthConfig {
  int width = 32;
  int height = 32;
  int n_classes = 3;
  std::vector<double> class_means = {0.25, 0.55, 0.85};
  double noise_sigma = 0.08;
  std::vector<StructureSpec> structures = {{0.10, 0.25}, {0.05, 0.18}};
  int count = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticSample {
  Image image;
  HardMask mask;
  VolumeVector volumes;  // exactly the mask's label histogram
};

// Deterministic in (config, seed); per-sample RNG streams derive from
// seed + index so generation order is irrelevant.
std::vector<SyntheticSample> generate(const SynthConfig& config);

// Directory layout: manifest.json, img_%04d.pgm, mask_%04d.pgm,
// volumes.csv (id, v_0..v_{K-1}).
void save_dataset(const std::vector<SyntheticSample>& samples, const SynthConfig& config,
                  const std::string& dir);

struct LoadedDataset {
  std::vector<SyntheticSample> samples;
  SynthConfig config;
};

LoadedDataset load_dataset(const std::string& dir);

}  // namespace vpseg
