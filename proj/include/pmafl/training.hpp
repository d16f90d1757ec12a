#pragma once

#include <optional>
#include <vector>

#include "pmafl/data.hpp"
#include "pmafl/model.hpp"
#include "pmafl/rng.hpp"

namespace pmafl {

struct LearnerOptions {
  double eta_u = 0.05;
  double eta_v = 0.05;
  double momentum = 0.9;
  int tau = 5;
  int batch_size = 0;  // 0: full shard up to 64 samples, else 32
};

// Per-device learning state. The predictor and its momentum persist across
// rounds; the extractor is replaced by the broadcast every round.
struct DeviceLearner {
  int id = 0;
  std::vector<double> predictor;
  std::vector<double> v_momentum;
  const std::vector<Sample>* shard = nullptr;
  LearnerOptions opt;
};

struct GradStats {
  double u_sq_norm = 0.0;  // ||grad_u F_k(u_t, v_{k,t})||^2, full shard
  double v_sq_norm = 0.0;
};

struct LocalUpdateResult {
  std::vector<double> u;  // updated local extractor
  GradStats stats;
};

// Runs tau mini-batch SGD-with-momentum steps from (u_global, learner
// predictor), updating extractor and predictor together. The learner's
// predictor and its momentum are updated in place; extractor momentum starts
// fresh each round since the broadcast replaces the extractor.
LocalUpdateResult local_update(SplitModel& scratch,
                               const std::vector<double>& u_global,
                               DeviceLearner& learner, Rng& rng);

struct AggregateUpdate {
  int id = 0;
  const std::vector<double>* u = nullptr;
  double data_size = 0.0;
};

// Data-size weighted average of the scheduled extractors, reduced in
// ascending device-id order. nullopt when nothing was scheduled (round skip).
std::optional<std::vector<double>> aggregate(std::vector<AggregateUpdate> updates);

// Full-shard mean gradient at the scratch model's current parameters.
ModelGrad shard_gradient(SplitModel& scratch, const std::vector<Sample>& shard,
                         double* mean_loss = nullptr);

double shard_loss(SplitModel& scratch, const std::vector<Sample>& shard);
double shard_accuracy(SplitModel& scratch, const std::vector<Sample>& shard);

struct EvalResult {
  std::vector<double> per_device_accuracy;  // own predictor, own test shard
  double mean_accuracy = 0.0;               // unweighted mean over devices
  double global_loss = 0.0;                 // data-size weighted mean loss
  double pooled_accuracy = 0.0;  // mean over devices of accuracy on the pooled set
};

EvalResult evaluate(SplitModel& scratch, const std::vector<double>& u,
                    const std::vector<DeviceLearner>& learners,
                    const std::vector<std::vector<Sample>>& test_shards,
                    bool include_pooled = false);

}  // namespace pmafl
