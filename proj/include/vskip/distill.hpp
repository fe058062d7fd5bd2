#pragma once

// Phase-2 training: fits low-rank adapters to compressed chains under
// autoregressive supervision. The base model stays frozen; only adapter
// matrices receive gradients, computed analytically by a manual reverse pass.

#include <cstdint>
#include <vector>

#include "vskip/toy_model.hpp"

namespace vskip {

struct DistillExample {
  std::vector<std::vector<double>> image_features;  // image_patches x d_model
  std::vector<int> question_ids;                    // non-empty
  std::vector<int> target_ids;                      // compressed chain, non-empty
};

struct TrainConfig {
  int steps = 2000;
  int batch_size = 8;
  double lr = 0.005;
  std::uint64_t seed = 0;
};

struct LoraPairGrad {
  Matrix a, b;
};
struct LoraLayerGrad {
  LoraPairGrad q, k, v, o;
};
struct AdapterGrads {
  std::vector<LoraLayerGrad> layers;
  static AdapterGrads zeros_like(const LoraAdapter& adapter);
};

// Mean token-level NLL of the targets given (image, question). Evaluation
// pass: dropout inactive. adapter == nullptr evaluates the frozen base.
double distill_loss(const ToyReasonerParams& params, const LoraAdapter* adapter,
                    const std::vector<DistillExample>& batch);

// Analytic gradients of distill_loss w.r.t. the adapter, dropout disabled.
AdapterGrads distill_grads(const ToyReasonerParams& params, const LoraAdapter& adapter,
                           const std::vector<DistillExample>& batch,
                           double* loss_out = nullptr);

// One SGD update. dropout_rng enables the adapter's dropout for this training
// pass; gradients reduce over the batch in a fixed order. Throws
// TrainingError naming the matrix if a gradient goes non-finite.
double distill_step(const ToyReasonerParams& params, LoraAdapter& adapter,
                    const std::vector<DistillExample>& batch, double lr,
                    Rng* dropout_rng = nullptr);

struct CurvePoint {
  int step = 0;
  double loss = 0.0;
};

// Deterministic minibatch SGD loop; the curve records each step's batch loss
// before the update.
std::vector<CurvePoint> train_adapter(const ToyReasonerParams& params, LoraAdapter& adapter,
                                      const std::vector<DistillExample>& dataset,
                                      const TrainConfig& cfg);

}  // namespace vskip
