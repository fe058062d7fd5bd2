#pragma once

// The canonical 64-token vocabulary of the toy reasoner. Designated anchor
// and operator id ranges let synthetic corpora plant ground truth that the
// proxy answering rule can extract back out.

#include <string>

namespace vskip::toyvocab {

constexpr int kBos = 0;
constexpr int kQuestionBegin = 1, kQuestionEnd = 8;  // q1..q7
constexpr int kAnchorBegin = 8, kAnchorEnd = 24;     // A0..A15
constexpr int kOpBegin = 24, kOpEnd = 32;            // OP0..OP7
constexpr int kFillerBegin = 32, kFillerEnd = 64;    // f0..f31
constexpr int kSize = 64;

constexpr bool is_anchor(int id) { return id >= kAnchorBegin && id < kAnchorEnd; }
constexpr bool is_op(int id) { return id >= kOpBegin && id < kOpEnd; }

// Total over all non-negative ids; ids past kSize render as "t<id>".
std::string token_text(int id);

// Inverse of token_text for the canonical range; -1 for unknown words.
int id_from_text(const std::string& word);

}  // namespace vskip::toyvocab
