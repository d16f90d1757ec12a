#include "pmafl/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace pmafl {

std::size_t ShardedDataset::total_samples() const {
  std::size_t n = 0;
  for (const auto& shard : device_data) n += shard.size();
  return n;
}

ShardedDataset partition_non_iid(const Dataset& data, int devices,
                                 int shards_per_device, Rng& rng) {
  if (devices < 1 || shards_per_device < 1) {
    throw std::invalid_argument("partition_non_iid: bad device/shard counts");
  }
  const int classes = data.num_classes;
  if (classes < 1) {
    throw std::invalid_argument("partition_non_iid: dataset has no classes");
  }
  const long total_shards = static_cast<long>(devices) * shards_per_device;
  if (total_shards < classes) {
    throw std::invalid_argument(
        "partition_non_iid: need at least one shard per class");
  }

  std::vector<std::vector<int>> by_class(classes);
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const int label = data.samples[i].label;
    if (label < 0 || label >= classes) {
      throw std::invalid_argument("partition_non_iid: label out of range");
    }
    by_class[label].push_back(static_cast<int>(i));
  }

  // Shards per class: even split, remainder to the most populous classes.
  std::vector<int> shard_count(classes, static_cast<int>(total_shards / classes));
  int remainder = static_cast<int>(total_shards % classes);
  std::vector<int> order(classes);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return by_class[a].size() > by_class[b].size();
  });
  for (int i = 0; i < remainder; ++i) shard_count[order[i]] += 1;

  std::vector<std::vector<int>> shards;
  shards.reserve(total_shards);
  for (int c = 0; c < classes; ++c) {
    auto& members = by_class[c];
    const int m = shard_count[c];
    if (static_cast<int>(members.size()) < m) {
      throw std::invalid_argument(
          "partition_non_iid: class too small for its shard count");
    }
    rng.shuffle(members);
    const std::size_t base = members.size() / m;
    const std::size_t extra = members.size() % m;
    std::size_t pos = 0;
    for (int s = 0; s < m; ++s) {
      const std::size_t len = base + (static_cast<std::size_t>(s) < extra ? 1 : 0);
      shards.emplace_back(members.begin() + pos, members.begin() + pos + len);
      pos += len;
    }
  }

  rng.shuffle(shards);

  ShardedDataset out;
  out.num_classes = classes;
  out.shards_per_device = shards_per_device;
  out.device_data.resize(devices);
  std::size_t next = 0;
  for (int k = 0; k < devices; ++k) {
    for (int s = 0; s < shards_per_device; ++s) {
      for (int idx : shards[next++]) {
        out.device_data[k].push_back(data.samples[idx]);
      }
    }
  }
  return out;
}

namespace {

// Gram-Schmidt columns of a random Gaussian matrix: dim x latent.
std::vector<std::vector<double>> random_orthonormal(int dim, int latent,
                                                    Rng& rng) {
  std::vector<std::vector<double>> cols(latent, std::vector<double>(dim));
  for (auto& c : cols) {
    for (double& v : c) v = rng.normal();
  }
  for (int j = 0; j < latent; ++j) {
    for (int i = 0; i < j; ++i) {
      double dot = 0.0;
      for (int d = 0; d < dim; ++d) dot += cols[j][d] * cols[i][d];
      for (int d = 0; d < dim; ++d) cols[j][d] -= dot * cols[i][d];
    }
    double norm = 0.0;
    for (int d = 0; d < dim; ++d) norm += cols[j][d] * cols[j][d];
    norm = std::sqrt(norm);
    if (norm < 1e-12) {
      throw std::runtime_error("random_orthonormal: degenerate draw");
    }
    for (int d = 0; d < dim; ++d) cols[j][d] /= norm;
  }
  return cols;
}

Dataset sample_mixture(const SyntheticSpec& spec,
                       const std::vector<std::vector<double>>& centroids,
                       int per_class, Rng& rng) {
  Dataset out;
  out.num_classes = spec.classes;
  out.dim = spec.dim;
  out.samples.reserve(static_cast<std::size_t>(per_class) * spec.classes);
  for (int c = 0; c < spec.classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      Sample s;
      s.label = c;
      s.x.resize(spec.dim);
      for (int d = 0; d < spec.dim; ++d) {
        s.x[d] = centroids[c][d] + spec.noise_sigma * rng.normal();
      }
      out.samples.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace

SyntheticTask make_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.classes < 2 || spec.dim < 1 || spec.latent_dim < 1 ||
      spec.latent_dim > spec.dim) {
    throw std::invalid_argument("make_synthetic: bad spec");
  }
  Rng structure = Rng::stream(seed, StreamPurpose::kDataGen, 0, 0);
  const auto basis = random_orthonormal(spec.dim, spec.latent_dim, structure);

  // Latent centroids, embedded into the ambient space.
  std::vector<std::vector<double>> centroids(spec.classes,
                                             std::vector<double>(spec.dim, 0.0));
  for (int c = 0; c < spec.classes; ++c) {
    for (int j = 0; j < spec.latent_dim; ++j) {
      const double g = spec.mean_scale * structure.normal();
      for (int d = 0; d < spec.dim; ++d) centroids[c][d] += g * basis[j][d];
    }
  }

  Rng train_rng = Rng::stream(seed, StreamPurpose::kDataGen, 1, 0);
  Rng test_rng = Rng::stream(seed, StreamPurpose::kDataGen, 2, 0);
  SyntheticTask task;
  task.train = sample_mixture(spec, centroids, spec.train_per_class, train_rng);
  task.test = sample_mixture(spec, centroids, spec.test_per_class, test_rng);
  return task;
}

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char buf[4];
  if (!in.read(reinterpret_cast<char*>(buf), 4)) {
    throw std::runtime_error("IDX read failed: " + path);
  }
  return (static_cast<std::uint32_t>(buf[0]) << 24) |
         (static_cast<std::uint32_t>(buf[1]) << 16) |
         (static_cast<std::uint32_t>(buf[2]) << 8) |
         static_cast<std::uint32_t>(buf[3]);
}

}  // namespace

Dataset load_mnist(const std::string& images_path,
                   const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw std::runtime_error("cannot open " + images_path);
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw std::runtime_error("cannot open " + labels_path);

  if (read_be32(img, images_path) != 0x00000803u) {
    throw std::runtime_error("bad image magic in " + images_path);
  }
  const std::uint32_t n_img = read_be32(img, images_path);
  const std::uint32_t rows = read_be32(img, images_path);
  const std::uint32_t cols = read_be32(img, images_path);

  if (read_be32(lab, labels_path) != 0x00000801u) {
    throw std::runtime_error("bad label magic in " + labels_path);
  }
  const std::uint32_t n_lab = read_be32(lab, labels_path);
  if (n_img != n_lab) {
    throw std::runtime_error("image/label count mismatch");
  }

  const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  Dataset out;
  out.dim = static_cast<int>(pixels);
  out.num_classes = 10;
  out.samples.resize(n_img);
  std::vector<unsigned char> buf(pixels);
  for (std::uint32_t i = 0; i < n_img; ++i) {
    if (!img.read(reinterpret_cast<char*>(buf.data()), pixels)) {
      throw std::runtime_error("truncated image data in " + images_path);
    }
    Sample& s = out.samples[i];
    s.x.resize(pixels);
    for (std::size_t p = 0; p < pixels; ++p) s.x[p] = buf[p] / 255.0;
    char l = 0;
    if (!lab.read(&l, 1)) {
      throw std::runtime_error("truncated label data in " + labels_path);
    }
    s.label = static_cast<unsigned char>(l);
    if (s.label > 9) throw std::runtime_error("label out of range");
  }
  return out;
}

}  // namespace pmafl
