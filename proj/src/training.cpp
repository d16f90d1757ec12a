#include "pmafl/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace pmafl {

namespace {

int effective_batch(const LearnerOptions& opt, std::size_t shard_size) {
  if (opt.batch_size > 0) {
    return std::min<int>(opt.batch_size, static_cast<int>(shard_size));
  }
  return shard_size <= 64 ? static_cast<int>(shard_size) : 32;
}

void check_learner(const DeviceLearner& learner) {
  if (!learner.shard || learner.shard->empty()) {
    throw std::invalid_argument("local_update: empty device dataset");
  }
  if (!(learner.opt.eta_u > 0.0) || !(learner.opt.eta_v > 0.0)) {
    // Zero learning rates are allowed for no-op rounds but never negative.
    if (learner.opt.eta_u < 0.0 || learner.opt.eta_v < 0.0) {
      throw std::invalid_argument("local_update: negative learning rate");
    }
  }
  if (learner.opt.tau < 1) {
    throw std::invalid_argument("local_update: tau must be >= 1");
  }
}

// Accumulates the mean gradient of the given sample indices.
ModelGrad batch_gradient(SplitModel& model, const std::vector<Sample>& shard,
                         const int* idx, int count, double* mean_loss) {
  ModelGrad grad = zero_grad(model);
  ForwardCache cache;
  double loss = 0.0;
  for (int i = 0; i < count; ++i) {
    const Sample& s = shard[idx[i]];
    const std::vector<double> logits = forward(model, s.x, &cache);
    CrossEntropy ce = cross_entropy_loss(logits, s.label);
    loss += ce.loss;
    backward(model, cache, ce.dlogits, grad);
  }
  const double inv = 1.0 / count;
  for (LayerGrad& g : grad) {
    for (double& v : g.dw) v *= inv;
    for (double& v : g.db) v *= inv;
  }
  if (mean_loss) *mean_loss = loss * inv;
  return grad;
}

}  // namespace

LocalUpdateResult local_update(SplitModel& scratch,
                               const std::vector<double>& u_global,
                               DeviceLearner& learner, Rng& rng) {
  check_learner(learner);
  scratch.set_extractor_params(u_global);
  if (learner.predictor.empty()) {
    learner.predictor = scratch.predictor_params();
  } else {
    scratch.set_predictor_params(learner.predictor);
  }
  const std::vector<Sample>& shard = *learner.shard;

  LocalUpdateResult out;
  {
    std::vector<int> all(shard.size());
    std::iota(all.begin(), all.end(), 0);
    ModelGrad g = batch_gradient(scratch, shard, all.data(),
                                 static_cast<int>(all.size()), nullptr);
    out.stats.u_sq_norm = sq_norm(flatten_extractor(scratch, g));
    out.stats.v_sq_norm = sq_norm(flatten_predictor(scratch, g));
  }

  const int batch = effective_batch(learner.opt, shard.size());
  std::vector<int> perm(shard.size());
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  std::size_t cursor = 0;

  std::vector<double> u_m(scratch.extractor_size(), 0.0);
  if (learner.v_momentum.size() != scratch.predictor_size()) {
    learner.v_momentum.assign(scratch.predictor_size(), 0.0);
  }

  std::vector<double> u = scratch.extractor_params();
  std::vector<double> v = scratch.predictor_params();
  std::vector<int> batch_idx(batch);
  for (int step = 0; step < learner.opt.tau; ++step) {
    for (int i = 0; i < batch; ++i) {
      if (cursor == perm.size()) {
        rng.shuffle(perm);
        cursor = 0;
      }
      batch_idx[i] = perm[cursor++];
    }
    const ModelGrad g =
        batch_gradient(scratch, shard, batch_idx.data(), batch, nullptr);
    const std::vector<double> gu = flatten_extractor(scratch, g);
    const std::vector<double> gv = flatten_predictor(scratch, g);
    for (std::size_t i = 0; i < u.size(); ++i) {
      u_m[i] = learner.opt.momentum * u_m[i] + gu[i];
      u[i] -= learner.opt.eta_u * u_m[i];
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
      learner.v_momentum[i] = learner.opt.momentum * learner.v_momentum[i] + gv[i];
      v[i] -= learner.opt.eta_v * learner.v_momentum[i];
    }
    scratch.set_extractor_params(u);
    scratch.set_predictor_params(v);
  }

  learner.predictor = v;
  out.u = std::move(u);
  return out;
}

std::optional<std::vector<double>> aggregate(std::vector<AggregateUpdate> updates) {
  if (updates.empty()) return std::nullopt;
  std::sort(updates.begin(), updates.end(),
            [](const AggregateUpdate& a, const AggregateUpdate& b) {
              return a.id < b.id;
            });
  for (std::size_t i = 1; i < updates.size(); ++i) {
    if (updates[i].id == updates[i - 1].id) {
      throw std::invalid_argument("aggregate: duplicate device id");
    }
  }
  const std::size_t dim = updates.front().u->size();
  double weight_sum = 0.0;
  std::vector<double> acc(dim, 0.0);
  for (const AggregateUpdate& up : updates) {
    if (!up.u || up.u->size() != dim) {
      throw std::invalid_argument("aggregate: extractor shape mismatch");
    }
    if (!(up.data_size > 0.0)) {
      throw std::invalid_argument("aggregate: data_size must be positive");
    }
    for (std::size_t i = 0; i < dim; ++i) acc[i] += up.data_size * (*up.u)[i];
    weight_sum += up.data_size;
  }
  for (double& v : acc) v /= weight_sum;
  return acc;
}

ModelGrad shard_gradient(SplitModel& scratch, const std::vector<Sample>& shard,
                         double* mean_loss) {
  if (shard.empty()) {
    throw std::invalid_argument("shard_gradient: empty shard");
  }
  std::vector<int> all(shard.size());
  std::iota(all.begin(), all.end(), 0);
  return batch_gradient(scratch, shard, all.data(),
                        static_cast<int>(all.size()), mean_loss);
}

double shard_loss(SplitModel& scratch, const std::vector<Sample>& shard) {
  if (shard.empty()) throw std::invalid_argument("shard_loss: empty shard");
  double loss = 0.0;
  for (const Sample& s : shard) {
    loss += cross_entropy_loss(forward(scratch, s.x), s.label).loss;
  }
  return loss / shard.size();
}

double shard_accuracy(SplitModel& scratch, const std::vector<Sample>& shard) {
  if (shard.empty()) return 0.0;
  int hits = 0;
  for (const Sample& s : shard) {
    const std::vector<double> logits = forward(scratch, s.x);
    const int pred = static_cast<int>(
        std::max_element(logits.begin(), logits.end()) - logits.begin());
    if (pred == s.label) ++hits;
  }
  return static_cast<double>(hits) / shard.size();
}

EvalResult evaluate(SplitModel& scratch, const std::vector<double>& u,
                    const std::vector<DeviceLearner>& learners,
                    const std::vector<std::vector<Sample>>& test_shards,
                    bool include_pooled) {
  if (learners.size() != test_shards.size()) {
    throw std::invalid_argument("evaluate: learners/test shard count mismatch");
  }
  EvalResult out;
  out.per_device_accuracy.resize(learners.size(), 0.0);

  std::vector<Sample> pooled;
  if (include_pooled) {
    for (const auto& shard : test_shards) {
      pooled.insert(pooled.end(), shard.begin(), shard.end());
    }
  }

  double weighted_loss = 0.0;
  double weight = 0.0;
  double pooled_acc = 0.0;
  scratch.set_extractor_params(u);
  for (std::size_t k = 0; k < learners.size(); ++k) {
    if (!learners[k].predictor.empty()) {
      scratch.set_predictor_params(learners[k].predictor);
    }
    const auto& shard = test_shards[k];
    if (!shard.empty()) {
      out.per_device_accuracy[k] = shard_accuracy(scratch, shard);
      weighted_loss += shard.size() * shard_loss(scratch, shard);
      weight += shard.size();
    }
    if (include_pooled && !pooled.empty()) {
      pooled_acc += shard_accuracy(scratch, pooled);
    }
  }
  if (!learners.empty()) {
    double acc = 0.0;
    for (double a : out.per_device_accuracy) acc += a;
    out.mean_accuracy = acc / learners.size();
    if (include_pooled) out.pooled_accuracy = pooled_acc / learners.size();
  }
  if (weight > 0.0) out.global_loss = weighted_loss / weight;
  return out;
}

}  // namespace pmafl
