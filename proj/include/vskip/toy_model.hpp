#pragma once

// Desk-scale autoregressive multimodal reasoner: a tiny pre-norm transformer
// whose self-attention runs over image-patch features as a key/value prefix
// followed by the text positions, so a single attention matrix carries the
// cross-modal flow. Emits true log-probs and attention tensors, which is the
// whole point: traces it generates are exact, not approximations.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vskip/linalg.hpp"
#include "vskip/trace.hpp"

namespace vskip {

struct ToyConfig {
  int vocab_size = 64;
  int d_model = 32;
  int layers = 4;
  int heads = 2;
  int image_patches = 4;
  int max_seq = 64;  // maximum text positions (prompt + generated)
  std::uint64_t seed = 0;

  int head_dim() const { return d_model / heads; }
  int ffn_hidden() const { return 4 * d_model; }
};

struct LayerParams {
  Matrix wq, wk, wv, wo;  // d_model x d_model
  Matrix w1;              // ffn_hidden x d_model
  Matrix w2;              // d_model x ffn_hidden
};

struct ToyReasonerParams {
  ToyConfig config;
  Matrix embedding;  // vocab x d_model
  std::vector<LayerParams> layers;
  Matrix head;       // vocab x d_model

  // Gaussian init seeded by config.seed.
  static ToyReasonerParams init(const ToyConfig& cfg);
};

// Low-rank delta for one projection: effective weight = W + (alpha/rank)*B*A.
struct LoraPair {
  Matrix a;  // rank x d_in, random small init
  Matrix b;  // d_out x rank, zero init so the initial delta is exactly zero
};

struct LoraLayer {
  LoraPair q, k, v, o;
};

struct LoraAdapter {
  int rank = 4;
  double alpha = 32.0;
  double dropout = 0.05;
  std::vector<LoraLayer> layers;

  double scale() const { return alpha / rank; }
  static LoraAdapter init(const ToyConfig& cfg, int rank, double alpha, double dropout,
                          std::uint64_t seed);
};

struct ForwardResult {
  std::vector<double> logprobs;     // next-token log-probs, exp sums to 1
  AttentionTensor last_attention;   // [layers][heads][1][S] for the last position
};

// Runs the model over image patches + token prefix and returns the next-token
// distribution. Deterministic; adapter == nullptr runs the frozen base.
ForwardResult forward(const ToyReasonerParams& params, const LoraAdapter* adapter,
                      const std::vector<std::vector<double>>& image_features,
                      const std::vector<int>& token_prefix);

// Greedy decode of max_len tokens conditioned on (image, question). The trace
// stores each emitted token's own log-prob and the attention rows of the
// query position that produced it; the result passes validate_trace.
ReasoningTrace generate_cot(const ToyReasonerParams& params, const LoraAdapter* adapter,
                            const std::vector<std::vector<double>>& image_features,
                            const std::vector<int>& question_ids, int max_len,
                            const std::string& trace_id = "toy",
                            const std::string& image_id = "toy-img");

struct Checkpoint {
  ToyReasonerParams params;
  std::optional<LoraAdapter> adapter;
};

// Versioned JSON container; reload is bit-exact.
void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace vskip
