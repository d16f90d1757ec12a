#pragma once

#include <string>
#include <vector>

#include "pmafl/rng.hpp"

namespace pmafl {

struct Sample {
  std::vector<double> x;
  int label = 0;
};

struct Dataset {
  std::vector<Sample> samples;
  int num_classes = 0;
  int dim = 0;
};

// Per-device training shards. Shards are disjoint and their union is the
// source dataset; each device holds samples from at most shards_per_device
// distinct classes.
struct ShardedDataset {
  std::vector<std::vector<Sample>> device_data;
  int num_classes = 0;
  int shards_per_device = 0;

  std::size_t total_samples() const;
};

// Label-sorted sharding: split each class into near-equal shards
// (K * shards_per_device shards overall), shuffle, and deal
// shards_per_device shards to every device.
ShardedDataset partition_non_iid(const Dataset& data, int devices,
                                 int shards_per_device, Rng& rng);

// Gaussian-mixture classification task. Class centroids live in a shared
// latent subspace and are embedded into the ambient dimension by a random
// orthonormal map, so good features transfer across devices while isotropic
// noise fills the remaining directions.
struct SyntheticSpec {
  int classes = 10;
  int dim = 30;
  int latent_dim = 5;
  int train_per_class = 600;
  int test_per_class = 100;
  double mean_scale = 3.0;
  double noise_sigma = 1.0;
};

struct SyntheticTask {
  Dataset train;
  Dataset test;
};

SyntheticTask make_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

// IDX-format loaders (big-endian magic 0x803 for images, 0x801 for labels).
// Pixels are scaled to [0, 1].
Dataset load_mnist(const std::string& images_path,
                   const std::string& labels_path);

}  // namespace pmafl
