#pragma once

// Turns dual-path scores into retention masks: dynamic percentile thresholds,
// the union-of-saliency gate, and the baseline strategies. Deterministic; the
// random strategy derives its stream from (seed, trace_id) so per-trace work
// can run in any order.

#include <cstdint>
#include <string>
#include <vector>

#include "vskip/scoring.hpp"
#include "vskip/trace.hpp"

namespace vskip {

enum class Strategy {
  kUnion,
  kTextOnly,
  kVisionOnly,
  kIntersection,
  kRandom,
  kTruncation,
};

// CLI spellings: union | text | vision | intersection | random | truncation.
Strategy parse_strategy(const std::string& name);
std::string strategy_name(Strategy s);

struct GateConfig {
  double gamma = 0.5;  // target retention ratio, fraction of tokens kept
  Strategy strategy = Strategy::kUnion;
  std::uint64_t seed = 0;               // random strategy only
  std::vector<int> protect_positions;   // forced to 1 after gating
};

// Nearest-rank rule on the descending sort: the score at 1-based rank
// ceil(gamma * n). A single-path gate retains everything >= this value, so
// ties can inflate retention above gamma.
double percentile_threshold(const std::vector<double>& scores, double gamma);

// m_t = 1 iff s_text[t] >= tau_text or s_vis[t] >= tau_vis, each threshold
// taken over its own score distribution for the current sequence.
std::vector<std::uint8_t> union_mask(const std::vector<double>& s_text,
                                     const std::vector<double>& s_vis, double gamma);

std::vector<std::uint8_t> strategy_mask(const ScoredTrace& scored, const GateConfig& cfg);

// Filters the trace with the mask, preserving order.
CompressedChain compress(const ReasoningTrace& trace, const std::vector<std::uint8_t>& mask);

}  // namespace vskip
