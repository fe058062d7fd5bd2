#include "vskip/gating.hpp"

#include <algorithm>
#include <cmath>

#include "vskip/errors.hpp"
#include "vskip/rng.hpp"

namespace vskip {

Strategy parse_strategy(const std::string& name) {
  if (name == "union") return Strategy::kUnion;
  if (name == "text") return Strategy::kTextOnly;
  if (name == "vision") return Strategy::kVisionOnly;
  if (name == "intersection") return Strategy::kIntersection;
  if (name == "random") return Strategy::kRandom;
  if (name == "truncation") return Strategy::kTruncation;
  throw DomainError("unknown strategy \"" + name + "\"");
}

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kUnion: return "union";
    case Strategy::kTextOnly: return "text";
    case Strategy::kVisionOnly: return "vision";
    case Strategy::kIntersection: return "intersection";
    case Strategy::kRandom: return "random";
    case Strategy::kTruncation: return "truncation";
  }
  return "?";
}

namespace {

int keep_count(double gamma, int n) {
  return static_cast<int>(std::ceil(gamma * n));
}

void check_gamma(double gamma) {
  if (!(gamma > 0.0) || gamma > 1.0) throw DomainError("gamma must be in (0, 1]");
}

std::vector<std::uint8_t> single_path_mask(const std::vector<double>& scores, double gamma) {
  const double tau = percentile_threshold(scores, gamma);
  std::vector<std::uint8_t> mask(scores.size(), 0);
  for (std::size_t t = 0; t < scores.size(); ++t) mask[t] = scores[t] >= tau ? 1 : 0;
  return mask;
}

}  // namespace

double percentile_threshold(const std::vector<double>& scores, double gamma) {
  if (scores.empty()) throw DomainError("percentile of empty score list");
  check_gamma(gamma);
  std::vector<double> sorted(scores);
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  const int rank = keep_count(gamma, static_cast<int>(sorted.size()));  // 1-based
  return sorted[static_cast<std::size_t>(rank - 1)];
}

std::vector<std::uint8_t> union_mask(const std::vector<double>& s_text,
                                     const std::vector<double>& s_vis, double gamma) {
  if (s_text.size() != s_vis.size())
    throw DomainError("score arrays differ in length");
  if (s_text.empty()) throw DomainError("empty score arrays");
  const double tau_text = percentile_threshold(s_text, gamma);
  const double tau_vis = percentile_threshold(s_vis, gamma);
  std::vector<std::uint8_t> mask(s_text.size(), 0);
  for (std::size_t t = 0; t < s_text.size(); ++t)
    mask[t] = (s_text[t] >= tau_text || s_vis[t] >= tau_vis) ? 1 : 0;
  return mask;
}

std::vector<std::uint8_t> strategy_mask(const ScoredTrace& scored, const GateConfig& cfg) {
  check_gamma(cfg.gamma);
  const int T = scored.trace.length();
  if (static_cast<int>(scored.s_text.size()) != T ||
      static_cast<int>(scored.s_vis.size()) != T)
    throw DomainError("scored trace arrays do not match token count");

  std::vector<std::uint8_t> mask;
  switch (cfg.strategy) {
    case Strategy::kUnion:
      mask = union_mask(scored.s_text, scored.s_vis, cfg.gamma);
      break;
    case Strategy::kTextOnly:
      mask = single_path_mask(scored.s_text, cfg.gamma);
      break;
    case Strategy::kVisionOnly:
      mask = single_path_mask(scored.s_vis, cfg.gamma);
      break;
    case Strategy::kIntersection: {
      const std::vector<std::uint8_t> a = single_path_mask(scored.s_text, cfg.gamma);
      const std::vector<std::uint8_t> b = single_path_mask(scored.s_vis, cfg.gamma);
      mask.resize(a.size());
      for (std::size_t t = 0; t < a.size(); ++t) mask[t] = a[t] & b[t];
      break;
    }
    case Strategy::kRandom: {
      // Partial Fisher-Yates over [0, T): the first ceil(gamma*T) slots of the
      // shuffle are the kept positions.
      mask.assign(static_cast<std::size_t>(T), 0);
      Rng rng(mix64(cfg.seed ^ fnv1a64(scored.trace.trace_id)));
      std::vector<int> positions(static_cast<std::size_t>(T));
      for (int i = 0; i < T; ++i) positions[static_cast<std::size_t>(i)] = i;
      const int keep = keep_count(cfg.gamma, T);
      for (int i = 0; i < keep; ++i) {
        const std::uint64_t j = i + rng.bounded(static_cast<std::uint64_t>(T - i));
        std::swap(positions[static_cast<std::size_t>(i)], positions[static_cast<std::size_t>(j)]);
        mask[static_cast<std::size_t>(positions[static_cast<std::size_t>(i)])] = 1;
      }
      break;
    }
    case Strategy::kTruncation: {
      mask.assign(static_cast<std::size_t>(T), 0);
      const int keep = keep_count(cfg.gamma, T);
      for (int t = 0; t < keep; ++t) mask[static_cast<std::size_t>(t)] = 1;
      break;
    }
  }

  for (int p : cfg.protect_positions) {
    if (p < 0 || p >= T)
      throw DomainError("protected position out of range: " + std::to_string(p));
    mask[static_cast<std::size_t>(p)] = 1;
  }
  return mask;
}

CompressedChain compress(const ReasoningTrace& trace, const std::vector<std::uint8_t>& mask) {
  if (static_cast<int>(mask.size()) != trace.length())
    throw DomainError("mask length does not match token count");
  CompressedChain chain;
  chain.trace_id = trace.trace_id;
  chain.mask = mask;
  for (std::size_t t = 0; t < mask.size(); ++t)
    if (mask[t]) chain.retained.push_back(trace.tokens[t]);
  chain.actual_ratio =
      trace.length() == 0 ? 0.0
                          : static_cast<double>(chain.retained.size()) / trace.length();
  return chain;
}

}  // namespace vskip
