#pragma once

// Trace data model for multimodal reasoning chains, plus the JSONL formats
// consumed by every other module. All types are immutable after construction
// and safe for concurrent reads.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vskip {

struct TokenRecord {
  std::string text;
  int token_id = 0;
  double logprob = 0.0;  // natural log of the token's probability, <= 0
};

// Post-softmax attention probabilities, flattened [layer][head][query][key].
// Queries index the rationale tokens; the key axis covers the pre-rationale
// context (image patches, optionally prompt text) followed by the rationale
// positions. Row t is normalized over keys [0, context_keys + t].
struct AttentionTensor {
  int layers = 0;
  int heads = 0;
  int queries = 0;
  int keys = 0;
  std::vector<double> w;

  double at(int l, int h, int t, int k) const {
    return w[((static_cast<std::size_t>(l) * heads + h) * queries + t) * keys + k];
  }
  double& at(int l, int h, int t, int k) {
    return w[((static_cast<std::size_t>(l) * heads + h) * queries + t) * keys + k];
  }
};

// Per-token visual attention mass, flattened [layer][head][query]. Compact
// alternative to the full tensor: the scoring path only needs the mass.
struct VisualMass {
  int layers = 0;
  int heads = 0;
  int queries = 0;
  std::vector<double> m;

  double at(int l, int h, int t) const {
    return m[(static_cast<std::size_t>(l) * heads + h) * queries + t];
  }
  double& at(int l, int h, int t) {
    return m[(static_cast<std::size_t>(l) * heads + h) * queries + t];
  }
};

struct ReasoningTrace {
  std::string trace_id;
  std::string question;
  std::string image_id;
  std::vector<int> image_key_indices;  // key positions of image patches
  std::vector<TokenRecord> tokens;     // the generated rationale, length T
  std::optional<AttentionTensor> attention;  // exactly one of these two
  std::optional<VisualMass> visual_mass;
  std::string answer_gt;
  std::string answer_pred;
  std::map<std::string, std::vector<int>> attributes;  // category -> positions

  int length() const { return static_cast<int>(tokens.size()); }
  // Number of key positions preceding the rationale (image patches + prompt).
  int context_keys() const {
    return attention ? attention->keys - attention->queries : 0;
  }
};

struct CompressedChain {
  std::string trace_id;
  std::vector<std::uint8_t> mask;     // 0/1 per original position
  std::vector<TokenRecord> retained;  // tokens at mask==1, original order
  double actual_ratio = 0.0;          // |retained| / T
};

struct Violation {
  std::string field;
  std::string rule;
  std::string detail;

  std::string str() const { return field + ": " + rule + (detail.empty() ? "" : " (" + detail + ")"); }
};

// Returns an empty list iff every type invariant holds. Violations are data,
// not failures.
std::vector<Violation> validate_trace(const ReasoningTrace& trace);

// Sums attention weights over the image keys for every (layer, head, query).
VisualMass derive_visual_mass(const AttentionTensor& attention,
                              const std::vector<int>& image_key_indices);

// JSONL, one trace per line. Throws ValidationError naming the offending line
// for parse failures, missing fields, or invariant violations.
std::vector<ReasoningTrace> load_traces(const std::string& path);
void save_traces(const std::vector<ReasoningTrace>& traces, const std::string& path);

// Compressed-chain JSONL: trace_id, mask, retained texts, actual_ratio.
void save_compressed(const std::vector<CompressedChain>& chains, const std::string& path);
std::vector<CompressedChain> load_compressed(const std::string& path);

}  // namespace vskip
