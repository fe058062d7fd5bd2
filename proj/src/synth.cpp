#include "vskip/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "vskip/errors.hpp"
#include "vskip/rng.hpp"
#include "vskip/toy_vocab.hpp"

namespace vskip {

namespace {

// Mass layout dimensions; match the default toy reasoner shape.
constexpr int kLayers = 4;
constexpr int kHeads = 2;
constexpr int kImagePatches = 4;

// Small pools keep the planted chains learnable by a low-rank student.
constexpr int kAnchorPool = 4;
constexpr int kOpPool = 2;
constexpr int kFillerPool = 4;

const char* kRoundRobinCategories[] = {"color", "shape", "object"};

}  // namespace

void validate_synth_spec(const SynthSpec& spec) {
  if (spec.n_traces < 1) throw ValidationError("n_traces must be >= 1");
  if (spec.trace_len < 2) throw ValidationError("trace_len must be >= 2");
  if (!(spec.anchor_rate > 0.0) || spec.anchor_rate >= 1.0)
    throw ValidationError("anchor_rate must be in (0, 1)");
  if (spec.anchor_rate * spec.trace_len < 1.0)
    throw ValidationError("infeasible spec: anchor_rate * trace_len < 1");
  const int n_anchor = static_cast<int>(std::ceil(spec.anchor_rate * spec.trace_len));
  if (n_anchor + 1 > spec.trace_len)
    throw ValidationError("no room for the operator token beside the anchors");
  if (spec.anchor_surprisal_lo < 0.0 || spec.anchor_surprisal_lo > spec.anchor_surprisal_hi ||
      spec.filler_surprisal_lo < 0.0 || spec.filler_surprisal_lo > spec.filler_surprisal_hi)
    throw ValidationError("surprisal ranges must be ordered and non-negative");
  if (spec.anchor_visual_mass_lo > spec.anchor_visual_mass_hi ||
      spec.filler_visual_mass_lo > spec.filler_visual_mass_hi ||
      spec.filler_visual_mass_lo < 0.0 || spec.anchor_visual_mass_hi > 1.0)
    throw ValidationError("visual mass ranges must be ordered and within [0, 1]");
  if (!(spec.anchor_visual_mass_lo > spec.filler_visual_mass_hi))
    throw ValidationError("anchor mass interval must lie strictly above the filler interval");
}

std::string proxy_answer(const std::vector<int>& token_ids) {
  std::string op;
  std::string anchors;
  for (int id : token_ids) {
    if (op.empty() && toyvocab::is_op(id)) op = toyvocab::token_text(id);
    if (toyvocab::is_anchor(id)) {
      if (!anchors.empty()) anchors += '-';
      anchors += toyvocab::token_text(id);
    }
  }
  return op + ":" + anchors;
}

std::string proxy_answer(const std::vector<TokenRecord>& tokens) {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const TokenRecord& t : tokens) ids.push_back(t.token_id);
  return proxy_answer(ids);
}

std::vector<ReasoningTrace> synth_corpus(const SynthSpec& spec) {
  validate_synth_spec(spec);
  const int T = spec.trace_len;
  const int n_anchor = static_cast<int>(std::ceil(spec.anchor_rate * T));
  const std::uint64_t base = mix64(spec.seed ^ 0x73796e7468ull);

  std::vector<ReasoningTrace> corpus;
  corpus.reserve(static_cast<std::size_t>(spec.n_traces));
  for (int idx = 0; idx < spec.n_traces; ++idx) {
    char id_buf[32];
    std::snprintf(id_buf, sizeof(id_buf), "synth-%06d", idx);

    ReasoningTrace trace;
    trace.trace_id = id_buf;
    std::snprintf(id_buf, sizeof(id_buf), "img-%06d", idx);
    trace.image_id = id_buf;
    for (int k = 0; k < kImagePatches; ++k) trace.image_key_indices.push_back(k);

    Rng rng(mix64(base ^ fnv1a64(trace.trace_id)));

    // Partial Fisher-Yates: first n_anchor slots are anchors, the next is the
    // operator position.
    std::vector<int> positions(static_cast<std::size_t>(T));
    for (int i = 0; i < T; ++i) positions[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < n_anchor + 1; ++i) {
      const std::uint64_t j = i + rng.bounded(static_cast<std::uint64_t>(T - i));
      std::swap(positions[static_cast<std::size_t>(i)], positions[static_cast<std::size_t>(j)]);
    }
    std::vector<int> anchor_positions(positions.begin(), positions.begin() + n_anchor);
    std::sort(anchor_positions.begin(), anchor_positions.end());
    const int op_position = positions[static_cast<std::size_t>(n_anchor)];

    std::vector<bool> is_anchor_pos(static_cast<std::size_t>(T), false);
    for (int p : anchor_positions) is_anchor_pos[static_cast<std::size_t>(p)] = true;

    // Token identities.
    std::vector<int> ids(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
      if (is_anchor_pos[static_cast<std::size_t>(t)])
        ids[static_cast<std::size_t>(t)] =
            toyvocab::kAnchorBegin + static_cast<int>(rng.bounded(kAnchorPool));
      else if (t == op_position)
        ids[static_cast<std::size_t>(t)] =
            toyvocab::kOpBegin + static_cast<int>(rng.bounded(kOpPool));
      else
        ids[static_cast<std::size_t>(t)] =
            toyvocab::kFillerBegin + static_cast<int>(rng.bounded(kFillerPool));
    }

    // Question: BOS plus a few question words.
    const int q_words = 3 + static_cast<int>(rng.bounded(3));
    trace.question = toyvocab::token_text(toyvocab::kBos);
    for (int w = 0; w < q_words; ++w) {
      const int qid = toyvocab::kQuestionBegin +
                      static_cast<int>(rng.bounded(toyvocab::kQuestionEnd - toyvocab::kQuestionBegin));
      trace.question += ' ';
      trace.question += toyvocab::token_text(qid);
    }

    // Planted surprisal: anchors are linguistically predictable, the operator
    // is the hardest token in the chain, fillers sit in between. Each filler
    // gets a latent salience shared by its surprisal and visual mass; in real
    // traces the two paths mostly agree on ordinary tokens, and without that
    // correlation the union gate would drift far above gamma.
    std::vector<double> filler_latent(static_cast<std::size_t>(T), 0.0);
    trace.tokens.reserve(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
      double surprisal;
      if (is_anchor_pos[static_cast<std::size_t>(t)]) {
        surprisal = rng.uniform(spec.anchor_surprisal_lo, spec.anchor_surprisal_hi);
      } else if (t == op_position) {
        surprisal = spec.filler_surprisal_hi + 0.5 + rng.uniform01();
      } else {
        const double u = rng.uniform01();
        filler_latent[static_cast<std::size_t>(t)] = u;
        surprisal = spec.filler_surprisal_lo + (spec.filler_surprisal_hi - spec.filler_surprisal_lo) * u;
      }
      const int id = ids[static_cast<std::size_t>(t)];
      trace.tokens.push_back({toyvocab::token_text(id), id, -surprisal});
    }

    // Planted visual mass per (layer, head, token). Anchor mass and the
    // operator's mass are independent draws; the operator is visually
    // unremarkable on purpose.
    VisualMass mass;
    mass.layers = kLayers;
    mass.heads = kHeads;
    mass.queries = T;
    mass.m.resize(static_cast<std::size_t>(kLayers) * kHeads * T);
    for (int l = 0; l < kLayers; ++l)
      for (int h = 0; h < kHeads; ++h)
        for (int t = 0; t < T; ++t) {
          double u;
          if (is_anchor_pos[static_cast<std::size_t>(t)]) {
            mass.at(l, h, t) = rng.uniform(spec.anchor_visual_mass_lo, spec.anchor_visual_mass_hi);
            continue;
          }
          if (t == op_position)
            u = rng.uniform01();
          else
            u = 0.8 * filler_latent[static_cast<std::size_t>(t)] + 0.2 * rng.uniform01();
          mass.at(l, h, t) =
              spec.filler_visual_mass_lo + (spec.filler_visual_mass_hi - spec.filler_visual_mass_lo) * u;
        }
    trace.visual_mass = std::move(mass);

    trace.attributes["anchor"] = anchor_positions;
    for (std::size_t i = 0; i < anchor_positions.size(); ++i)
      trace.attributes[kRoundRobinCategories[i % 3]].push_back(anchor_positions[i]);

    trace.answer_gt = proxy_answer(ids);
    trace.answer_pred = trace.answer_gt;
    corpus.push_back(std::move(trace));
  }
  return corpus;
}

PopeProbe pope_probe(const ReasoningTrace& trace) {
  std::vector<int> present;
  for (const TokenRecord& t : trace.tokens)
    if (toyvocab::is_anchor(t.token_id)) present.push_back(t.token_id);
  std::sort(present.begin(), present.end());
  present.erase(std::unique(present.begin(), present.end()), present.end());

  const std::uint64_t h = fnv1a64(trace.trace_id);
  PopeProbe probe;
  probe.label_yes = (h & 1) != 0 && !present.empty();
  if (probe.label_yes) {
    probe.anchor_id = present[static_cast<std::size_t>((h >> 1) % present.size())];
  } else {
    probe.anchor_id = toyvocab::kAnchorBegin;
    while (std::binary_search(present.begin(), present.end(), probe.anchor_id)) ++probe.anchor_id;
  }
  return probe;
}

bool pope_prediction(const PopeProbe& probe, const std::vector<int>& retained_ids) {
  return std::find(retained_ids.begin(), retained_ids.end(), probe.anchor_id) !=
         retained_ids.end();
}

}  // namespace vskip
