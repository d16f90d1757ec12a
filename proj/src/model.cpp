#include "pmafl/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pmafl {

namespace {

std::size_t layer_size(const DenseLayer& l) { return l.w.size() + l.b.size(); }

}  // namespace

SplitModel SplitModel::mlp(const std::vector<int>& dims, int split_depth) {
  if (dims.size() < 2) {
    throw std::invalid_argument("SplitModel::mlp: need at least two dims");
  }
  SplitModel m;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    DenseLayer l;
    l.in_dim = dims[i];
    l.out_dim = dims[i + 1];
    if (l.in_dim < 1 || l.out_dim < 1) {
      throw std::invalid_argument("SplitModel::mlp: dims must be positive");
    }
    l.act = (i + 2 < dims.size()) ? Activation::kRelu : Activation::kIdentity;
    l.w.assign(static_cast<std::size_t>(l.in_dim) * l.out_dim, 0.0);
    l.b.assign(l.out_dim, 0.0);
    m.layers_.push_back(std::move(l));
  }
  m.set_split_depth(split_depth);
  return m;
}

void SplitModel::set_split_depth(int depth) {
  if (depth < 0 || depth > static_cast<int>(layers_.size())) {
    throw std::invalid_argument("SplitModel: split_depth out of range");
  }
  split_depth_ = depth;
}

std::size_t SplitModel::extractor_size() const {
  std::size_t n = 0;
  for (int i = 0; i < split_depth_; ++i) n += layer_size(layers_[i]);
  return n;
}

std::size_t SplitModel::predictor_size() const {
  std::size_t n = 0;
  for (std::size_t i = split_depth_; i < layers_.size(); ++i) {
    n += layer_size(layers_[i]);
  }
  return n;
}

namespace {

std::vector<double> collect(const std::vector<DenseLayer>& layers, int from,
                            int to) {
  std::vector<double> flat;
  for (int i = from; i < to; ++i) {
    flat.insert(flat.end(), layers[i].w.begin(), layers[i].w.end());
    flat.insert(flat.end(), layers[i].b.begin(), layers[i].b.end());
  }
  return flat;
}

void scatter(std::vector<DenseLayer>& layers, int from, int to,
             const std::vector<double>& flat) {
  std::size_t pos = 0;
  for (int i = from; i < to; ++i) {
    std::copy_n(flat.begin() + pos, layers[i].w.size(), layers[i].w.begin());
    pos += layers[i].w.size();
    std::copy_n(flat.begin() + pos, layers[i].b.size(), layers[i].b.begin());
    pos += layers[i].b.size();
  }
  if (pos != flat.size()) {
    throw std::invalid_argument("SplitModel: parameter vector size mismatch");
  }
}

}  // namespace

std::vector<double> SplitModel::extractor_params() const {
  return collect(layers_, 0, split_depth_);
}

std::vector<double> SplitModel::predictor_params() const {
  return collect(layers_, split_depth_, static_cast<int>(layers_.size()));
}

void SplitModel::set_extractor_params(const std::vector<double>& flat) {
  if (flat.size() != extractor_size()) {
    throw std::invalid_argument("SplitModel: extractor size mismatch");
  }
  scatter(layers_, 0, split_depth_, flat);
}

void SplitModel::set_predictor_params(const std::vector<double>& flat) {
  if (flat.size() != predictor_size()) {
    throw std::invalid_argument("SplitModel: predictor size mismatch");
  }
  scatter(layers_, split_depth_, static_cast<int>(layers_.size()), flat);
}

void SplitModel::init_weights(Rng& rng) {
  for (DenseLayer& l : layers_) {
    const double bound = std::sqrt(6.0 / (l.in_dim + l.out_dim));
    for (double& w : l.w) w = rng.uniform(-bound, bound);
    std::fill(l.b.begin(), l.b.end(), 0.0);
  }
}

std::vector<double> forward(const SplitModel& model, const std::vector<double>& x,
                            ForwardCache* cache) {
  if (model.layers().empty()) {
    throw std::invalid_argument("forward: model has no layers");
  }
  if (static_cast<int>(x.size()) != model.layers().front().in_dim) {
    throw std::invalid_argument("forward: input dimension mismatch");
  }
  if (cache) {
    cache->inputs.assign(model.layers().size(), {});
    cache->outputs.assign(model.layers().size(), {});
  }
  std::vector<double> a = x;
  for (std::size_t li = 0; li < model.layers().size(); ++li) {
    const DenseLayer& l = model.layers()[li];
    if (cache) cache->inputs[li] = a;
    std::vector<double> z(l.out_dim);
    for (int o = 0; o < l.out_dim; ++o) {
      const double* row = l.w.data() + static_cast<std::size_t>(o) * l.in_dim;
      double acc = l.b[o];
      for (int i = 0; i < l.in_dim; ++i) acc += row[i] * a[i];
      z[o] = l.act == Activation::kRelu ? std::max(0.0, acc) : acc;
    }
    if (cache) cache->outputs[li] = z;
    a = std::move(z);
  }
  return a;
}

CrossEntropy cross_entropy_loss(const std::vector<double>& logits, int label) {
  if (label < 0 || label >= static_cast<int>(logits.size())) {
    throw std::invalid_argument("cross_entropy_loss: label out of range");
  }
  for (double v : logits) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("cross_entropy_loss: non-finite logit");
    }
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - m);
  const double lse = m + std::log(sum);

  CrossEntropy out;
  out.loss = lse - logits[label];
  out.dlogits.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out.dlogits[i] = std::exp(logits[i] - lse);
  }
  out.dlogits[label] -= 1.0;
  return out;
}

ModelGrad zero_grad(const SplitModel& model) {
  ModelGrad g(model.layers().size());
  for (std::size_t i = 0; i < model.layers().size(); ++i) {
    g[i].dw.assign(model.layers()[i].w.size(), 0.0);
    g[i].db.assign(model.layers()[i].b.size(), 0.0);
  }
  return g;
}

void backward(const SplitModel& model, const ForwardCache& cache,
              const std::vector<double>& dlogits, ModelGrad& grad) {
  std::vector<double> delta = dlogits;
  for (int li = static_cast<int>(model.layers().size()) - 1; li >= 0; --li) {
    const DenseLayer& l = model.layers()[li];
    // ReLU gate on the post-activation (output > 0 iff pre-activation > 0).
    if (l.act == Activation::kRelu) {
      for (int o = 0; o < l.out_dim; ++o) {
        if (cache.outputs[li][o] <= 0.0) delta[o] = 0.0;
      }
    }
    const std::vector<double>& in = cache.inputs[li];
    LayerGrad& g = grad[li];
    for (int o = 0; o < l.out_dim; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      double* drow = g.dw.data() + static_cast<std::size_t>(o) * l.in_dim;
      for (int i = 0; i < l.in_dim; ++i) drow[i] += d * in[i];
      g.db[o] += d;
    }
    if (li > 0) {
      std::vector<double> prev(l.in_dim, 0.0);
      for (int o = 0; o < l.out_dim; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        const double* row = l.w.data() + static_cast<std::size_t>(o) * l.in_dim;
        for (int i = 0; i < l.in_dim; ++i) prev[i] += d * row[i];
      }
      delta = std::move(prev);
    }
  }
}

namespace {

std::vector<double> flatten_range(const ModelGrad& g, int from, int to) {
  std::vector<double> flat;
  for (int i = from; i < to; ++i) {
    flat.insert(flat.end(), g[i].dw.begin(), g[i].dw.end());
    flat.insert(flat.end(), g[i].db.begin(), g[i].db.end());
  }
  return flat;
}

}  // namespace

std::vector<double> flatten_extractor(const SplitModel& model, const ModelGrad& g) {
  return flatten_range(g, 0, model.split_depth());
}

std::vector<double> flatten_predictor(const SplitModel& model, const ModelGrad& g) {
  return flatten_range(g, model.split_depth(),
                       static_cast<int>(model.layers().size()));
}

double sq_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

}  // namespace pmafl
