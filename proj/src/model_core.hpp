#pragma once

// Internal to the library: full forward pass with the caches manual backprop
// needs. Not installed.

#include <vector>

#include "vskip/rng.hpp"
#include "vskip/toy_model.hpp"

namespace vskip::detail {

using Vec = std::vector<double>;
using Mat2 = std::vector<Vec>;  // S rows

constexpr double kRmsEps = 1e-6;

struct LayerCache {
  Mat2 x_in;        // residual stream entering the block, S x D
  Mat2 n1;          // rmsnorm(x_in)
  Mat2 bq, bk, bv;  // adapter branch inputs (n1 after dropout)
  Mat2 zq, zk, zv;  // adapter intermediates, S x r
  Mat2 q, k, v;     // S x D
  std::vector<Mat2> attn;  // [H] S x S probabilities; row i spans keys 0..i
  Mat2 ctx;         // concatenated head outputs, S x D
  Mat2 bo, zo;      // output-projection adapter branch
  Mat2 x_mid;       // after attention residual
  Mat2 n2;          // rmsnorm(x_mid)
  Mat2 tanh_u;      // S x F
  Mat2 mask_q, mask_k, mask_v, mask_o;  // dropout multipliers; empty = identity
};

struct ModelCache {
  int S = 0;        // image patches + text positions
  int n_image = 0;
  Mat2 x0;
  std::vector<LayerCache> layers;
  Mat2 x_final;     // residual stream feeding the output head directly; no
                    // final norm, so the adapter can grow logit confidence
};

// Forward over [image_features | tokens]. dropout_rng, when non-null and the
// adapter has dropout > 0, draws per-branch masks (training passes only).
void run_model(const ToyReasonerParams& params, const LoraAdapter* adapter,
               const std::vector<std::vector<double>>& image_features,
               const std::vector<int>& tokens, Rng* dropout_rng, ModelCache& cache);

// log-softmax of head * h_final[pos].
Vec position_logprobs(const ToyReasonerParams& params, const ModelCache& cache, int pos);

Vec sinusoidal_position(int pos, int d_model);

inline double rms_of(const Vec& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / static_cast<double>(x.size()) + kRmsEps);
}

inline Vec rmsnorm(const Vec& x) {
  const double inv = 1.0 / rms_of(x);
  Vec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * inv;
  return y;
}

// dx for y = x / rms(x), given upstream dy. y is the cached normalized value.
inline Vec rmsnorm_backward(const Vec& x, const Vec& y, const Vec& dy) {
  const double inv = 1.0 / rms_of(x);
  double dot = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) dot += dy[i] * y[i];
  dot /= static_cast<double>(x.size());
  Vec dx(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) dx[i] = inv * (dy[i] - y[i] * dot);
  return dx;
}

}  // namespace vskip::detail
