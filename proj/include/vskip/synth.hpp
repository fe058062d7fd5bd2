#pragma once

// Planted-anchor synthetic corpora. Each trace plants three token
// populations: anchors (low surprisal, high visual mass: values read off the
// image), one operator token (high surprisal, low visual mass: the
// load-bearing reasoning step), and fillers. The proxy answer is a
// deterministic function of the operator and the anchor values, so dropping
// any of them makes the answer unrecoverable and retention quality becomes
// measurable without a large model.

#include <cstdint>
#include <string>
#include <vector>

#include "vskip/trace.hpp"

namespace vskip {

struct SynthSpec {
  int n_traces = 200;
  int trace_len = 20;
  double anchor_rate = 0.15;  // fraction of positions planted as anchors
  double anchor_surprisal_lo = 0.02, anchor_surprisal_hi = 0.12;
  double filler_surprisal_lo = 0.80, filler_surprisal_hi = 3.20;
  double anchor_visual_mass_lo = 0.70, anchor_visual_mass_hi = 0.90;
  double filler_visual_mass_lo = 0.05, filler_visual_mass_hi = 0.25;
  std::uint64_t seed = 0;
};

// Throws ValidationError for infeasible specs (rate*len < 1, overlapping
// mass intervals, ranges outside their domains).
void validate_synth_spec(const SynthSpec& spec);

// Deterministic in spec.seed; every trace passes validate_trace. Uses the
// visual_mass layout with the toy vocabulary's canonical layers (L=4, H=2).
std::vector<ReasoningTrace> synth_corpus(const SynthSpec& spec);

// The extraction rule: text of the first operator token, ':', then the
// anchor-token texts in order joined by '-'. Total over any id sequence.
std::string proxy_answer(const std::vector<int>& token_ids);
std::string proxy_answer(const std::vector<TokenRecord>& tokens);

// Balanced presence probe over anchor values, derived deterministically from
// the trace: even id-hash traces ask about a present anchor, odd ones about
// an absent one. The prediction answers yes iff the probed value survives in
// the retained ids.
struct PopeProbe {
  bool label_yes = false;
  int anchor_id = 0;
};
PopeProbe pope_probe(const ReasoningTrace& trace);
bool pope_prediction(const PopeProbe& probe, const std::vector<int>& retained_ids);

}  // namespace vskip
