#pragma once

// Evaluation quantities: top-1 accuracy, ANLS over Levenshtein distance,
// token-count statistics, attribute retention rates, and POPE-style
// classification stats. Pure functions; aggregation is order-independent.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace vskip {

struct PopeStats {
  double yes_ratio = 0.0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct EvalReport {
  double accuracy = 0.0;                // [0, 1]
  double anls = 0.0;                    // [0, 100]
  double avg_tokens = 0.0;
  double act_ratio = 0.0;               // [0, 1]
  std::map<std::string, double> varr;   // category -> percentage [0, 100]
  PopeStats pope;
  double wall_clock_s = 0.0;
};

// Whitespace-trimmed, ASCII-case-folded exact match.
std::string canonical_answer(std::string_view s);
double top1_accuracy(const std::vector<std::string>& preds,
                     const std::vector<std::string>& golds);

// Unit-cost edit distance over Unicode scalar values.
std::size_t levenshtein(std::string_view p, std::string_view g);

// 1 - d/M if d < tau*M else 0, with M = max(|p|, |g|) in scalar values.
// Two empty strings are identical and score 1.
double anls_pair(std::string_view p, std::string_view g, double tau = 0.5);

// Length-weighted corpus retention: sum(compressed) / sum(original).
double act_ratio(const std::vector<int>& compressed_lengths,
                 const std::vector<int>& original_lengths);

double avg_tokens(const std::vector<int>& lengths);

// Per category, 100 * retained positions / total positions, counts pooled
// over all traces. Categories with no positions anywhere are omitted.
std::map<std::string, double> varr(
    const std::vector<std::vector<std::uint8_t>>& masks,
    const std::vector<std::map<std::string, std::vector<int>>>& attributes);

// "yes" is the positive class; precision/recall/f1 are 0 when their
// denominators are 0.
PopeStats pope_stats(const std::vector<bool>& pred_yes,
                     const std::vector<bool>& label_yes);

}  // namespace vskip
