#pragma once

#include <json.hpp>

#include "vskip/trace.hpp"

namespace vskip {

// One JSONL line worth of trace. Field names are the wire schema; keys are
// emitted in sorted order so same-seed runs serialize byte-identically.
nlohmann::json trace_to_json(const ReasoningTrace& trace);

// Throws ValidationError on missing/mistyped fields. Does not validate
// invariants; callers run validate_trace.
ReasoningTrace trace_from_json(const nlohmann::json& j);

nlohmann::json chain_to_json(const CompressedChain& chain);
CompressedChain chain_from_json(const nlohmann::json& j);

}  // namespace vskip
