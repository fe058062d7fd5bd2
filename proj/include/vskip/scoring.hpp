#pragma once

// Dual-path per-token scoring: linguistic surprisal (negative log-likelihood)
// and the visual anchoring score (mean over focus layers of the max-over-heads
// visual attention mass). Pure functions over immutable inputs.

#include <span>
#include <vector>

#include "vskip/trace.hpp"

namespace vskip {

struct ScoringConfig {
  // Fractional depth range of the layers the visual score aggregates over.
  // Head aggregation is max-pooling and layer aggregation is the mean; both
  // are fixed.
  double focus_lo = 0.25;
  double focus_hi = 0.75;
};

struct ScoredTrace {
  ReasoningTrace trace;
  std::vector<double> s_text;  // >= 0
  std::vector<double> s_vis;   // in [0, 1]
};

// Surprisal of one token. Throws DomainError for positive or non-finite input.
double textual_score(double logprob);

// Sum of one attention row over the image key positions.
double visual_mass_of_row(std::span<const double> attn_row,
                          const std::vector<int>& image_keys);

// Maps the fractional depth range to layer indices floor(lo*L) .. ceil(hi*L)-1.
// Falls back to the single middle layer if the window comes out empty.
std::vector<int> select_focus_layers(int total_layers, double lo, double hi);

// mass[l][h] is one token's visual attention mass; returns the mean over the
// focus layers of the per-layer max over heads.
double visual_anchor_score(const std::vector<std::vector<double>>& mass,
                           const std::vector<int>& focus);

// Scores every token of a valid trace. Works off either attention layout;
// both layouts produce identical scores for equivalent data.
ScoredTrace score_trace(ReasoningTrace trace, const ScoringConfig& cfg);

}  // namespace vskip
