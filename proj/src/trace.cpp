#include "vskip/trace.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "vskip/errors.hpp"
#include "vskip/trace_json.hpp"

namespace vskip {

namespace {

constexpr double kRowSumTol = 1e-5;

std::string pos3(int l, int h, int t) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "(layer=%d, head=%d, token=%d)", l, h, t);
  return buf;
}

}  // namespace

std::vector<Violation> validate_trace(const ReasoningTrace& trace) {
  std::vector<Violation> out;
  const int T = trace.length();

  if (T == 0) out.push_back({"tokens", "non-empty", ""});
  for (int t = 0; t < T; ++t) {
    const TokenRecord& tok = trace.tokens[t];
    if (tok.text.empty())
      out.push_back({"tokens.text", "non-empty", "position " + std::to_string(t)});
    if (!std::isfinite(tok.logprob) || tok.logprob > 0.0)
      out.push_back({"tokens.logprob", "finite and <= 0", "position " + std::to_string(t)});
    if (tok.token_id < 0)
      out.push_back({"tokens.token_id", "non-negative", "position " + std::to_string(t)});
  }

  if (trace.attention.has_value() == trace.visual_mass.has_value()) {
    out.push_back({"attention", "exactly one of attention_full / visual_mass", ""});
    return out;
  }

  if (trace.image_key_indices.empty())
    out.push_back({"image_key_indices", "non-empty", "empty image set"});
  {
    std::unordered_set<int> seen;
    for (int k : trace.image_key_indices) {
      if (k < 0) out.push_back({"image_key_indices", "non-negative", std::to_string(k)});
      if (!seen.insert(k).second)
        out.push_back({"image_key_indices", "unique", "duplicate " + std::to_string(k)});
    }
  }

  if (trace.attention) {
    const AttentionTensor& a = *trace.attention;
    if (a.layers < 1 || a.heads < 1 || a.queries < 1 || a.keys < 1) {
      out.push_back({"attention", "positive dimensions", ""});
      return out;
    }
    if (static_cast<std::size_t>(a.layers) * a.heads * a.queries * a.keys != a.w.size()) {
      out.push_back({"attention", "dimension/size mismatch", ""});
      return out;
    }
    if (a.queries != T)
      out.push_back({"attention", "queries == token count",
                     std::to_string(a.queries) + " vs " + std::to_string(T)});
    const int ctx = a.keys - a.queries;  // image patches + prompt keys
    if (ctx < 1)
      out.push_back({"attention", "keys must cover a pre-rationale context",
                     "keys=" + std::to_string(a.keys) + " queries=" + std::to_string(a.queries)});
    for (int k : trace.image_key_indices)
      if (k >= ctx)
        out.push_back({"image_key_indices", "disjoint from text-token key positions",
                       std::to_string(k) + " >= context " + std::to_string(ctx)});
    if (a.queries == T && ctx >= 1) {
      for (int l = 0; l < a.layers; ++l) {
        for (int h = 0; h < a.heads; ++h) {
          for (int t = 0; t < a.queries; ++t) {
            double sum = 0.0;
            bool in_range = true;
            bool masked_zero = true;
            const int last_valid = ctx + t;  // causal bound for this row
            for (int k = 0; k < a.keys; ++k) {
              const double v = a.at(l, h, t, k);
              if (v < 0.0 || v > 1.0 || !std::isfinite(v)) in_range = false;
              if (k <= last_valid)
                sum += v;
              else if (v != 0.0)
                masked_zero = false;
            }
            if (!in_range)
              out.push_back({"attention", "weights in [0, 1]", pos3(l, h, t)});
            if (std::fabs(sum - 1.0) > kRowSumTol)
              out.push_back({"attention", "row-normalization: valid keys sum to 1", pos3(l, h, t)});
            if (!masked_zero)
              out.push_back({"attention", "masked keys exactly 0", pos3(l, h, t)});
          }
        }
      }
    }
  } else {
    const VisualMass& m = *trace.visual_mass;
    if (m.layers < 1 || m.heads < 1 || m.queries < 1) {
      out.push_back({"visual_mass", "positive dimensions", ""});
      return out;
    }
    if (static_cast<std::size_t>(m.layers) * m.heads * m.queries != m.m.size()) {
      out.push_back({"visual_mass", "dimension/size mismatch", ""});
      return out;
    }
    if (m.queries != T)
      out.push_back({"visual_mass", "queries == token count",
                     std::to_string(m.queries) + " vs " + std::to_string(T)});
    for (std::size_t i = 0; i < m.m.size(); ++i) {
      const double v = m.m[i];
      if (!std::isfinite(v) || v < 0.0 || v > 1.0 + kRowSumTol) {
        out.push_back({"visual_mass", "values in [0, 1]", "flat index " + std::to_string(i)});
        break;
      }
    }
  }

  for (const auto& [category, positions] : trace.attributes) {
    if (category.empty()) out.push_back({"attributes", "non-empty category name", ""});
    for (int p : positions)
      if (p < 0 || p >= T)
        out.push_back({"attributes", "positions within [0, T)",
                       category + " position " + std::to_string(p)});
  }

  return out;
}

VisualMass derive_visual_mass(const AttentionTensor& attention,
                              const std::vector<int>& image_key_indices) {
  VisualMass out;
  out.layers = attention.layers;
  out.heads = attention.heads;
  out.queries = attention.queries;
  out.m.assign(static_cast<std::size_t>(out.layers) * out.heads * out.queries, 0.0);
  for (int k : image_key_indices)
    if (k < 0 || k >= attention.keys)
      throw DomainError("image key index out of bounds: " + std::to_string(k));
  for (int l = 0; l < out.layers; ++l)
    for (int h = 0; h < out.heads; ++h)
      for (int t = 0; t < out.queries; ++t) {
        double s = 0.0;
        for (int k : image_key_indices) s += attention.at(l, h, t, k);
        out.at(l, h, t) = s;
      }
  return out;
}

// ---------------------------------------------------------------------------
// JSON conversion

using nlohmann::json;

namespace {

const json& require(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError(std::string("missing \"") + key + "\"");
  return *it;
}

template <typename T>
std::vector<T> to_vec(const json& j, const char* key) {
  if (!j.is_array()) throw ValidationError(std::string("\"") + key + "\" must be an array");
  std::vector<T> out;
  out.reserve(j.size());
  for (const auto& v : j) out.push_back(v.get<T>());
  return out;
}

}  // namespace

json trace_to_json(const ReasoningTrace& trace) {
  json j;
  j["trace_id"] = trace.trace_id;
  j["question"] = trace.question;
  j["image_id"] = trace.image_id;
  j["image_key_indices"] = trace.image_key_indices;
  json tokens = json::array(), ids = json::array(), lps = json::array();
  for (const TokenRecord& t : trace.tokens) {
    tokens.push_back(t.text);
    ids.push_back(t.token_id);
    lps.push_back(t.logprob);
  }
  j["tokens"] = std::move(tokens);
  j["token_ids"] = std::move(ids);
  j["logprobs"] = std::move(lps);
  j["answer_gt"] = trace.answer_gt;
  j["answer_pred"] = trace.answer_pred;
  if (trace.attention) {
    const AttentionTensor& a = *trace.attention;
    json full = json::array();
    for (int l = 0; l < a.layers; ++l) {
      json jl = json::array();
      for (int h = 0; h < a.heads; ++h) {
        json jh = json::array();
        for (int t = 0; t < a.queries; ++t) {
          json row = json::array();
          for (int k = 0; k < a.keys; ++k) row.push_back(a.at(l, h, t, k));
          jh.push_back(std::move(row));
        }
        jl.push_back(std::move(jh));
      }
      full.push_back(std::move(jl));
    }
    j["attention_full"] = std::move(full);
  } else if (trace.visual_mass) {
    const VisualMass& m = *trace.visual_mass;
    json mass = json::array();
    for (int l = 0; l < m.layers; ++l) {
      json jl = json::array();
      for (int h = 0; h < m.heads; ++h) {
        json row = json::array();
        for (int t = 0; t < m.queries; ++t) row.push_back(m.at(l, h, t));
        jl.push_back(std::move(row));
      }
      mass.push_back(std::move(jl));
    }
    j["visual_mass"] = std::move(mass);
  }
  if (!trace.attributes.empty()) {
    json attrs;
    for (const auto& [category, positions] : trace.attributes) attrs[category] = positions;
    j["attributes"] = std::move(attrs);
  }
  return j;
}

ReasoningTrace trace_from_json(const json& j) {
  ReasoningTrace trace;
  trace.trace_id = require(j, "trace_id").get<std::string>();
  trace.question = require(j, "question").get<std::string>();
  trace.image_id = require(j, "image_id").get<std::string>();
  trace.image_key_indices = to_vec<int>(require(j, "image_key_indices"), "image_key_indices");
  const json& toks = require(j, "tokens");
  const json& ids = require(j, "token_ids");
  const json& lps = require(j, "logprobs");
  if (!toks.is_array() || !ids.is_array() || !lps.is_array() ||
      toks.size() != ids.size() || toks.size() != lps.size())
    throw ValidationError("tokens / token_ids / logprobs must be arrays of equal length");
  trace.tokens.reserve(toks.size());
  for (std::size_t t = 0; t < toks.size(); ++t)
    trace.tokens.push_back({toks[t].get<std::string>(), ids[t].get<int>(), lps[t].get<double>()});
  trace.answer_gt = require(j, "answer_gt").get<std::string>();
  trace.answer_pred = require(j, "answer_pred").get<std::string>();

  const bool has_full = j.contains("attention_full");
  const bool has_mass = j.contains("visual_mass");
  if (has_full == has_mass)
    throw ValidationError("exactly one of \"attention_full\" / \"visual_mass\" required");
  if (has_full) {
    const json& full = j.at("attention_full");
    AttentionTensor a;
    a.layers = static_cast<int>(full.size());
    a.heads = a.layers > 0 ? static_cast<int>(full[0].size()) : 0;
    a.queries = a.heads > 0 ? static_cast<int>(full[0][0].size()) : 0;
    a.keys = a.queries > 0 ? static_cast<int>(full[0][0][0].size()) : 0;
    a.w.reserve(static_cast<std::size_t>(a.layers) * a.heads * a.queries * a.keys);
    for (const auto& jl : full) {
      if (static_cast<int>(jl.size()) != a.heads)
        throw ValidationError("\"attention_full\" is ragged");
      for (const auto& jh : jl) {
        if (static_cast<int>(jh.size()) != a.queries)
          throw ValidationError("\"attention_full\" is ragged");
        for (const auto& row : jh) {
          if (static_cast<int>(row.size()) != a.keys)
            throw ValidationError("\"attention_full\" is ragged");
          for (const auto& v : row) a.w.push_back(v.get<double>());
        }
      }
    }
    trace.attention = std::move(a);
  } else {
    const json& mass = j.at("visual_mass");
    VisualMass m;
    m.layers = static_cast<int>(mass.size());
    m.heads = m.layers > 0 ? static_cast<int>(mass[0].size()) : 0;
    m.queries = m.heads > 0 ? static_cast<int>(mass[0][0].size()) : 0;
    m.m.reserve(static_cast<std::size_t>(m.layers) * m.heads * m.queries);
    for (const auto& jl : mass) {
      if (static_cast<int>(jl.size()) != m.heads) throw ValidationError("\"visual_mass\" is ragged");
      for (const auto& row : jl) {
        if (static_cast<int>(row.size()) != m.queries)
          throw ValidationError("\"visual_mass\" is ragged");
        for (const auto& v : row) m.m.push_back(v.get<double>());
      }
    }
    trace.visual_mass = std::move(m);
  }

  if (j.contains("attributes")) {
    const json& attrs = j.at("attributes");
    if (!attrs.is_object()) throw ValidationError("\"attributes\" must be an object");
    for (auto it = attrs.begin(); it != attrs.end(); ++it)
      trace.attributes[it.key()] = to_vec<int>(it.value(), "attributes");
  }
  return trace;
}

json chain_to_json(const CompressedChain& chain) {
  json j;
  j["trace_id"] = chain.trace_id;
  json mask = json::array();
  for (std::uint8_t b : chain.mask) mask.push_back(static_cast<int>(b));
  j["mask"] = std::move(mask);
  json retained = json::array();
  for (const TokenRecord& t : chain.retained) retained.push_back(t.text);
  j["retained"] = std::move(retained);
  j["actual_ratio"] = chain.actual_ratio;
  return j;
}

CompressedChain chain_from_json(const json& j) {
  CompressedChain c;
  c.trace_id = require(j, "trace_id").get<std::string>();
  for (const auto& v : require(j, "mask")) {
    const int b = v.get<int>();
    if (b != 0 && b != 1) throw ValidationError("mask entries must be 0/1");
    c.mask.push_back(static_cast<std::uint8_t>(b));
  }
  for (const auto& v : require(j, "retained")) c.retained.push_back({v.get<std::string>(), 0, 0.0});
  c.actual_ratio = require(j, "actual_ratio").get<double>();
  std::size_t ones = 0;
  for (std::uint8_t b : c.mask) ones += b;
  if (ones != c.retained.size())
    throw ValidationError("retained length does not match mask popcount");
  if (!c.mask.empty() &&
      std::fabs(c.actual_ratio * static_cast<double>(c.mask.size()) -
                static_cast<double>(ones)) > 1e-6)
    throw ValidationError("actual_ratio inconsistent with mask popcount");
  return c;
}

// ---------------------------------------------------------------------------
// JSONL files

std::vector<ReasoningTrace> load_traces(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<ReasoningTrace> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": JSON parse error: " + e.what());
    }
    ReasoningTrace trace;
    try {
      trace = trace_from_json(j);
    } catch (const ValidationError& e) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const json::exception& e) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    const std::vector<Violation> violations = validate_trace(trace);
    if (!violations.empty()) {
      std::ostringstream msg;
      msg << path << ":" << lineno << ": invalid trace";
      for (const Violation& v : violations) msg << "; " << v.str();
      throw ValidationError(msg.str());
    }
    out.push_back(std::move(trace));
  }
  return out;
}

void save_traces(const std::vector<ReasoningTrace>& traces, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (const ReasoningTrace& t : traces) out << trace_to_json(t).dump() << '\n';
  if (!out) throw IoError("write failed: " + path);
}

void save_compressed(const std::vector<CompressedChain>& chains, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (const CompressedChain& c : chains) out << chain_to_json(c).dump() << '\n';
  if (!out) throw IoError("write failed: " + path);
}

std::vector<CompressedChain> load_compressed(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<CompressedChain> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(chain_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace vskip
