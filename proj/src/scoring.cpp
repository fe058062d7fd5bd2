#include "vskip/scoring.hpp"

#include <algorithm>
#include <cmath>

#include "vskip/errors.hpp"

namespace vskip {

double textual_score(double logprob) {
  if (!std::isfinite(logprob) || logprob > 0.0)
    throw DomainError("logprob must be finite and <= 0, got " + std::to_string(logprob));
  return -logprob;
}

double visual_mass_of_row(std::span<const double> attn_row,
                          const std::vector<int>& image_keys) {
  double sum = 0.0;
  for (int k : image_keys) {
    if (k < 0 || static_cast<std::size_t>(k) >= attn_row.size())
      throw DomainError("image key index out of bounds: " + std::to_string(k));
    sum += attn_row[static_cast<std::size_t>(k)];
  }
  return sum;
}

std::vector<int> select_focus_layers(int total_layers, double lo, double hi) {
  const int first = static_cast<int>(std::floor(lo * total_layers));
  const int last = static_cast<int>(std::ceil(hi * total_layers)) - 1;
  std::vector<int> out;
  for (int l = std::max(first, 0); l <= std::min(last, total_layers - 1); ++l) out.push_back(l);
  if (out.empty()) out.push_back(total_layers / 2);
  return out;
}

double visual_anchor_score(const std::vector<std::vector<double>>& mass,
                           const std::vector<int>& focus) {
  if (focus.empty()) throw DomainError("focus layer set must be non-empty");
  double sum = 0.0;
  for (int l : focus) {
    if (l < 0 || static_cast<std::size_t>(l) >= mass.size())
      throw DomainError("focus layer out of range: " + std::to_string(l));
    const std::vector<double>& heads = mass[static_cast<std::size_t>(l)];
    if (heads.empty()) throw DomainError("layer has no heads");
    sum += *std::max_element(heads.begin(), heads.end());
  }
  return sum / static_cast<double>(focus.size());
}

ScoredTrace score_trace(ReasoningTrace trace, const ScoringConfig& cfg) {
  if (cfg.focus_lo < 0.0 || cfg.focus_hi > 1.0 || cfg.focus_lo >= cfg.focus_hi)
    throw DomainError("focus range must satisfy 0 <= lo < hi <= 1");

  const int T = trace.length();
  ScoredTrace scored;
  scored.s_text.reserve(T);
  for (const TokenRecord& tok : trace.tokens) scored.s_text.push_back(textual_score(tok.logprob));

  const int layers = trace.attention ? trace.attention->layers : trace.visual_mass->layers;
  const int heads = trace.attention ? trace.attention->heads : trace.visual_mass->heads;
  const std::vector<int> focus = select_focus_layers(layers, cfg.focus_lo, cfg.focus_hi);

  scored.s_vis.reserve(T);
  std::vector<std::vector<double>> mass(layers, std::vector<double>(heads, 0.0));
  for (int t = 0; t < T; ++t) {
    for (int l = 0; l < layers; ++l)
      for (int h = 0; h < heads; ++h) {
        if (trace.attention) {
          const AttentionTensor& a = *trace.attention;
          std::span<const double> row(
              a.w.data() + ((static_cast<std::size_t>(l) * heads + h) * a.queries + t) * a.keys,
              static_cast<std::size_t>(a.keys));
          mass[l][h] = visual_mass_of_row(row, trace.image_key_indices);
        } else {
          mass[l][h] = trace.visual_mass->at(l, h, t);
        }
      }
    // Row sums can overshoot 1 by float noise; keep the score in [0, 1].
    scored.s_vis.push_back(std::min(1.0, visual_anchor_score(mass, focus)));
  }

  scored.trace = std::move(trace);
  return scored;
}

}  // namespace vskip
