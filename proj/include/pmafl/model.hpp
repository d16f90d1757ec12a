#pragma once

#include <cstddef>
#include <vector>

#include "pmafl/rng.hpp"

namespace pmafl {

enum class Activation { kIdentity, kRelu };

struct DenseLayer {
  int in_dim = 0;
  int out_dim = 0;
  Activation act = Activation::kIdentity;
  std::vector<double> w;  // out_dim x in_dim, row major
  std::vector<double> b;  // out_dim
};

struct LayerGrad {
  std::vector<double> dw;
  std::vector<double> db;
};
using ModelGrad = std::vector<LayerGrad>;

// Dense network split into a shared feature extractor (the first
// `split_depth` layers) and a per-device predictor (the rest).
class SplitModel {
 public:
  SplitModel() = default;

  // ReLU hidden layers, identity logits output. dims = {in, h1, ..., out}.
  static SplitModel mlp(const std::vector<int>& dims, int split_depth);

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  int split_depth() const { return split_depth_; }
  void set_split_depth(int depth);

  std::size_t extractor_size() const;
  std::size_t predictor_size() const;
  std::size_t total_size() const { return extractor_size() + predictor_size(); }

  std::vector<double> extractor_params() const;
  std::vector<double> predictor_params() const;
  void set_extractor_params(const std::vector<double>& flat);
  void set_predictor_params(const std::vector<double>& flat);

  // Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases.
  void init_weights(Rng& rng);

 private:
  std::vector<DenseLayer> layers_;
  int split_depth_ = 0;
};

struct ForwardCache {
  std::vector<std::vector<double>> inputs;   // input to each layer
  std::vector<std::vector<double>> outputs;  // post-activation of each layer
};

std::vector<double> forward(const SplitModel& model, const std::vector<double>& x,
                            ForwardCache* cache = nullptr);

struct CrossEntropy {
  double loss = 0.0;
  std::vector<double> dlogits;  // softmax(logits) - onehot(label)
};

// Log-sum-exp stabilized softmax cross entropy.
CrossEntropy cross_entropy_loss(const std::vector<double>& logits, int label);

ModelGrad zero_grad(const SplitModel& model);

// Accumulates one sample's gradient into grad given the forward cache.
void backward(const SplitModel& model, const ForwardCache& cache,
              const std::vector<double>& dlogits, ModelGrad& grad);

// Flattened extractor / predictor slices of a gradient, matching the
// parameter layout of extractor_params()/predictor_params().
std::vector<double> flatten_extractor(const SplitModel& model, const ModelGrad& g);
std::vector<double> flatten_predictor(const SplitModel& model, const ModelGrad& g);

double sq_norm(const std::vector<double>& v);

}  // namespace pmafl
