// Acceptance suite: prints one pass/fail line per criterion and exits
// non-zero if any fail. Criteria are property-based plus directional
// reproduction on planted synthetic corpora; every tolerance is pinned here.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "vskip/distill.hpp"
#include "vskip/gating.hpp"
#include "vskip/metrics.hpp"
#include "vskip/mi.hpp"
#include "vskip/pipeline.hpp"
#include "vskip/rng.hpp"
#include "vskip/scoring.hpp"
#include "vskip/synth.hpp"
#include "vskip/toy_model.hpp"
#include "vskip/trace.hpp"

using namespace vskip;

namespace {

int g_failures = 0;

void run_criterion(int number, const char* name, const std::function<bool(std::string&)>& body,
                   double max_seconds = 0.0) {
  std::string detail;
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = false;
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (ok && max_seconds > 0.0 && secs > max_seconds) {
    ok = false;
    detail += (detail.empty() ? "" : "; ") + std::string("runtime limit ") +
              std::to_string(max_seconds) + "s exceeded";
  }
  std::printf("[%s] criterion %2d: %s (%.2fs)%s%s\n", ok ? "PASS" : "FAIL", number, name, secs,
              detail.empty() ? "" : " -- ", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

// --------------------------------------------------------------------------
// shared helpers

ScoredTrace make_scored(const std::vector<double>& s_text, const std::vector<double>& s_vis,
                        const std::string& id) {
  ScoredTrace scored;
  scored.trace.trace_id = id;
  scored.trace.image_id = "i";
  scored.trace.question = "q";
  scored.trace.image_key_indices = {0};
  for (std::size_t i = 0; i < s_text.size(); ++i)
    scored.trace.tokens.push_back({"w" + std::to_string(i), static_cast<int>(i), -s_text[i]});
  VisualMass mass;
  mass.layers = 1;
  mass.heads = 1;
  mass.queries = static_cast<int>(s_vis.size());
  mass.m = s_vis;
  scored.trace.visual_mass = std::move(mass);
  scored.s_text = s_text;
  scored.s_vis = s_vis;
  return scored;
}

std::vector<std::uint8_t> oracle_single(const std::vector<double>& scores, double gamma) {
  std::vector<double> sorted(scores);
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  const int keep = static_cast<int>(std::ceil(gamma * static_cast<double>(scores.size())));
  const double tau = sorted[static_cast<std::size_t>(keep - 1)];
  std::vector<std::uint8_t> m(scores.size(), 0);
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (scores[i] >= tau) m[i] = 1;
  return m;
}

std::vector<std::uint8_t> oracle_strategy(const ScoredTrace& scored, Strategy strategy,
                                          double gamma, std::uint64_t seed) {
  const std::size_t n = scored.s_text.size();
  std::vector<std::uint8_t> m(n, 0);
  switch (strategy) {
    case Strategy::kUnion: {
      const auto a = oracle_single(scored.s_text, gamma);
      const auto b = oracle_single(scored.s_vis, gamma);
      for (std::size_t i = 0; i < n; ++i) m[i] = a[i] | b[i];
      break;
    }
    case Strategy::kTextOnly:
      m = oracle_single(scored.s_text, gamma);
      break;
    case Strategy::kVisionOnly:
      m = oracle_single(scored.s_vis, gamma);
      break;
    case Strategy::kIntersection: {
      const auto a = oracle_single(scored.s_text, gamma);
      const auto b = oracle_single(scored.s_vis, gamma);
      for (std::size_t i = 0; i < n; ++i) m[i] = a[i] & b[i];
      break;
    }
    case Strategy::kRandom: {
      Rng rng(mix64(seed ^ fnv1a64(scored.trace.trace_id)));
      std::vector<int> pos(n);
      std::iota(pos.begin(), pos.end(), 0);
      const int keep = static_cast<int>(std::ceil(gamma * static_cast<double>(n)));
      for (int i = 0; i < keep; ++i) {
        const std::uint64_t j =
            static_cast<std::uint64_t>(i) + rng.bounded(static_cast<std::uint64_t>(n) - i);
        std::swap(pos[static_cast<std::size_t>(i)], pos[j]);
        m[static_cast<std::size_t>(pos[static_cast<std::size_t>(i)])] = 1;
      }
      break;
    }
    case Strategy::kTruncation: {
      const int keep = static_cast<int>(std::ceil(gamma * static_cast<double>(n)));
      for (int i = 0; i < keep; ++i) m[static_cast<std::size_t>(i)] = 1;
      break;
    }
  }
  return m;
}

ReasoningTrace random_full_trace(Rng& rng, int L, int H, int T, int patches) {
  ReasoningTrace t;
  t.trace_id = "r";
  t.question = "q";
  t.image_id = "i";
  for (int k = 0; k < patches; ++k) t.image_key_indices.push_back(k);
  for (int i = 0; i < T; ++i) t.tokens.push_back({"w", i, -rng.uniform(0.0, 3.0)});
  AttentionTensor a;
  a.layers = L;
  a.heads = H;
  a.queries = T;
  a.keys = patches + T;
  a.w.assign(static_cast<std::size_t>(L) * H * T * a.keys, 0.0);
  for (int l = 0; l < L; ++l)
    for (int h = 0; h < H; ++h)
      for (int q = 0; q < T; ++q) {
        double sum = 0.0;
        std::vector<double> row(static_cast<std::size_t>(patches + q + 1));
        for (double& v : row) {
          v = rng.uniform01() + 1e-9;
          sum += v;
        }
        for (int k = 0; k <= patches + q; ++k)
          a.at(l, h, q, k) = row[static_cast<std::size_t>(k)] / sum;
      }
  t.attention = std::move(a);
  t.answer_gt = t.answer_pred = "x";
  return t;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// --------------------------------------------------------------------------
// criteria

bool c1_gating_oracle(std::string& detail) {
  Rng rng(0xC1);
  const Strategy all[] = {Strategy::kUnion,        Strategy::kTextOnly, Strategy::kVisionOnly,
                          Strategy::kIntersection, Strategy::kRandom,   Strategy::kTruncation};
  for (int rep = 0; rep < 1000; ++rep) {
    const int T = 1 + static_cast<int>(rng.bounded(12));
    std::vector<double> s_text(static_cast<std::size_t>(T)), s_vis(static_cast<std::size_t>(T));
    for (double& v : s_text) v = rng.bounded(2) ? rng.uniform(0.0, 4.0) : 2.0;  // include ties
    for (double& v : s_vis) v = rng.bounded(2) ? rng.uniform01() : 0.25;
    const ScoredTrace scored = make_scored(s_text, s_vis, "c1-" + std::to_string(rep));
    const double gamma = rng.uniform(0.05, 1.0);
    for (Strategy s : all) {
      GateConfig cfg;
      cfg.gamma = gamma;
      cfg.strategy = s;
      cfg.seed = rep;
      if (strategy_mask(scored, cfg) != oracle_strategy(scored, s, gamma, rep)) {
        detail = "mismatch at rep " + std::to_string(rep) + " strategy " + strategy_name(s);
        return false;
      }
    }
  }
  return true;
}

bool c2_metrics_oracle(std::string& detail) {
  // Every string of length <= 6 over {a, b, c}, exhaustively.
  std::vector<std::string> nodes{""};
  {
    std::vector<std::string> frontier{""};
    for (int len = 1; len <= 6; ++len) {
      std::vector<std::string> next;
      for (const std::string& s : frontier)
        for (char c : {'a', 'b', 'c'}) next.push_back(s + c);
      nodes.insert(nodes.end(), next.begin(), next.end());
      frontier = std::move(next);
    }
  }
  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < nodes.size(); ++i) index[nodes[i]] = static_cast<int>(i);

  // Single-edit adjacency. An optimal edit script can order deletions first
  // and insertions last, so intermediates stay within length 6 and BFS over
  // this graph is the exact edit distance.
  std::vector<std::vector<int>> adj(nodes.size());
  for (std::size_t u = 0; u < nodes.size(); ++u) {
    const std::string& s = nodes[u];
    for (std::size_t i = 0; i < s.size(); ++i) {
      std::string t = s;
      t.erase(i, 1);
      adj[u].push_back(index.at(t));
    }
    for (std::size_t i = 0; i < s.size(); ++i)
      for (char c : {'a', 'b', 'c'}) {
        if (s[i] == c) continue;
        std::string t = s;
        t[i] = c;
        adj[u].push_back(index.at(t));
      }
    if (s.size() < 6)
      for (std::size_t i = 0; i <= s.size(); ++i)
        for (char c : {'a', 'b', 'c'}) {
          std::string t = s;
          t.insert(t.begin() + static_cast<std::ptrdiff_t>(i), c);
          adj[u].push_back(index.at(t));
        }
  }

  std::vector<int> dist(nodes.size());
  std::vector<int> queue_buf(nodes.size());
  for (std::size_t src = 0; src < nodes.size(); ++src) {
    std::fill(dist.begin(), dist.end(), -1);
    int head = 0, tail = 0;
    dist[src] = 0;
    queue_buf[tail++] = static_cast<int>(src);
    while (head < tail) {
      const int u = queue_buf[head++];
      for (int v : adj[static_cast<std::size_t>(u)])
        if (dist[static_cast<std::size_t>(v)] < 0) {
          dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
          queue_buf[tail++] = v;
        }
    }
    const std::string& p = nodes[src];
    for (std::size_t dst = 0; dst < nodes.size(); ++dst) {
      const std::string& g = nodes[dst];
      const std::size_t d_bfs = static_cast<std::size_t>(dist[dst]);
      if (levenshtein(p, g) != d_bfs) {
        detail = "levenshtein mismatch for \"" + p + "\" vs \"" + g + "\"";
        return false;
      }
      const std::size_t M = std::max(p.size(), g.size());
      const double expect =
          M == 0 ? 1.0
                 : (static_cast<double>(d_bfs) < 0.5 * static_cast<double>(M)
                        ? 1.0 - static_cast<double>(d_bfs) / static_cast<double>(M)
                        : 0.0);
      if (anls_pair(p, g) != expect) {
        detail = "anls mismatch for \"" + p + "\" vs \"" + g + "\"";
        return false;
      }
    }
  }
  detail = std::to_string(nodes.size() * nodes.size()) + " pairs";
  return true;
}

bool c3_c4_traces(bool rescue, std::string& detail) {
  Rng rng(rescue ? 0xC3 : 0xC4);
  for (int rep = 0; rep < 1000; ++rep) {
    const int T = 1 + static_cast<int>(rng.bounded(40));
    std::vector<double> s_text(static_cast<std::size_t>(T)), s_vis(static_cast<std::size_t>(T));
    for (double& v : s_text) v = rng.uniform(0.0, 4.0);
    for (double& v : s_vis) v = rng.bounded(4) ? rng.uniform01() : 0.5;
    const ScoredTrace scored = make_scored(s_text, s_vis, "c34-" + std::to_string(rep));
    const double gamma = rng.uniform(0.05, 1.0);
    const std::vector<std::uint8_t> mask = union_mask(s_text, s_vis, gamma);

    if (rescue) {
      const double tau_vis = percentile_threshold(s_vis, gamma);
      for (int i = 0; i < T; ++i)
        if (s_vis[static_cast<std::size_t>(i)] >= tau_vis && !mask[static_cast<std::size_t>(i)]) {
          detail = "dropped visual-salient position at rep " + std::to_string(rep);
          return false;
        }
    } else {
      const int ones = static_cast<int>(std::count(mask.begin(), mask.end(), 1));
      const double fraction = static_cast<double>(ones) / T;
      if (fraction < gamma - 1.0 / T - 1e-12 || fraction > 1.0) {
        detail = "retention " + std::to_string(fraction) + " outside [gamma-1/T, 1]";
        return false;
      }
    }
  }
  return true;
}

bool c5_layout_equivalence(std::string& detail) {
  Rng rng(0xC5);
  for (int rep = 0; rep < 100; ++rep) {
    const int L = 1 + static_cast<int>(rng.bounded(4));
    const int H = 1 + static_cast<int>(rng.bounded(4));
    const int T = 1 + static_cast<int>(rng.bounded(16));
    ReasoningTrace full = random_full_trace(rng, L, H, T, 2 + static_cast<int>(rng.bounded(3)));
    ReasoningTrace mass = full;
    mass.visual_mass = derive_visual_mass(*full.attention, full.image_key_indices);
    mass.attention.reset();
    const ScoredTrace a = score_trace(std::move(full), {});
    const ScoredTrace b = score_trace(std::move(mass), {});
    for (int i = 0; i < T; ++i)
      if (std::fabs(a.s_vis[static_cast<std::size_t>(i)] - b.s_vis[static_cast<std::size_t>(i)]) >
          1e-9) {
        detail = "layouts disagree at rep " + std::to_string(rep);
        return false;
      }
  }
  return true;
}

bool c6_mi_identity(std::string& detail) {
  Rng rng(0xC6);
  for (int rep = 0; rep < 100; ++rep) {
    JointTable t;
    t.nc = 1 + static_cast<int>(rng.bounded(4));
    t.na = 1 + static_cast<int>(rng.bounded(4));
    t.nv = 1 + static_cast<int>(rng.bounded(4));
    t.nq = 1 + static_cast<int>(rng.bounded(4));
    t.p.resize(static_cast<std::size_t>(t.nc) * t.na * t.nv * t.nq);
    double sum = 0.0;
    for (double& v : t.p) {
      v = rng.uniform01() + 1e-5;
      sum += v;
    }
    for (double& v : t.p) v /= sum;
    const MiReport r = mi_diagnostic(t, 1.0);  // throws if the identity breaks
    if (std::fabs(r.anchoring - (r.h_c_given_q - r.h_c_given_vq)) > 1e-10) {
      detail = "identity residual too large at rep " + std::to_string(rep);
      return false;
    }
  }
  return true;
}

bool c7_gradient_fidelity(std::string& detail) {
  ToyConfig cfg;
  cfg.vocab_size = 12;
  cfg.d_model = 8;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.image_patches = 2;
  cfg.max_seq = 16;
  cfg.seed = 0xC7;
  const ToyReasonerParams params = ToyReasonerParams::init(cfg);

  LoraAdapter adapter = LoraAdapter::init(cfg, 2, 8.0, 0.0, 0xC7);
  Rng brand(0xC70);
  for (LoraLayer& l : adapter.layers)
    for (LoraPair* p : {&l.q, &l.k, &l.v, &l.o})
      for (double& v : p->b.a) v = brand.normal(0.0, 0.05);

  Rng rng(0xC71);
  std::vector<DistillExample> batch;
  for (int b = 0; b < 2; ++b) {
    DistillExample ex;
    ex.image_features.assign(2, std::vector<double>(8));
    for (auto& patch : ex.image_features)
      for (double& v : patch) v = rng.normal(0.0, 0.3);
    for (int i = 0; i < 2; ++i)
      ex.question_ids.push_back(static_cast<int>(rng.bounded(12)));
    for (int i = 0; i < 4; ++i)
      ex.target_ids.push_back(static_cast<int>(rng.bounded(12)));
    batch.push_back(std::move(ex));
  }

  AdapterGrads grads = distill_grads(params, adapter, batch);
  const double eps = 1e-4;
  double worst = 0.0;
  for (std::size_t l = 0; l < adapter.layers.size(); ++l) {
    LoraLayer& al = adapter.layers[l];
    LoraLayerGrad& lg = grads.layers[l];
    const std::pair<Matrix*, Matrix*> mats[] = {
        {&al.q.a, &lg.q.a}, {&al.q.b, &lg.q.b}, {&al.k.a, &lg.k.a}, {&al.k.b, &lg.k.b},
        {&al.v.a, &lg.v.a}, {&al.v.b, &lg.v.b}, {&al.o.a, &lg.o.a}, {&al.o.b, &lg.o.b}};
    for (const auto& [theta, g] : mats)
      for (std::size_t i = 0; i < theta->a.size(); ++i) {
        const double saved = theta->a[i];
        theta->a[i] = saved + eps;
        const double up = distill_loss(params, &adapter, batch);
        theta->a[i] = saved - eps;
        const double down = distill_loss(params, &adapter, batch);
        theta->a[i] = saved;
        const double fd = (up - down) / (2.0 * eps);
        worst = std::max(worst,
                         std::fabs(fd - g->a[i]) / std::max(1e-6, std::fabs(fd) + std::fabs(g->a[i])));
      }
  }
  detail = "max relative error " + std::to_string(worst);
  return worst < 1e-4;
}

bool c8_zero_delta(std::string& detail) {
  ToyConfig cfg;
  cfg.seed = 0xC8;
  const ToyReasonerParams params = ToyReasonerParams::init(cfg);
  const LoraAdapter adapter = LoraAdapter::init(cfg, 4, 32.0, 0.05, 0xC8);  // B stays zero
  Rng rng(0xC81);
  std::vector<std::vector<double>> features(static_cast<std::size_t>(cfg.image_patches),
                                            std::vector<double>(static_cast<std::size_t>(cfg.d_model)));
  for (auto& patch : features)
    for (double& v : patch) v = rng.normal(0.0, 0.3);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<int> prefix;
    const int n = 1 + static_cast<int>(rng.bounded(10));
    for (int i = 0; i < n; ++i)
      prefix.push_back(static_cast<int>(rng.bounded(static_cast<std::uint64_t>(cfg.vocab_size))));
    const ForwardResult base = forward(params, nullptr, features, prefix);
    const ForwardResult with = forward(params, &adapter, features, prefix);
    for (std::size_t v = 0; v < base.logprobs.size(); ++v)
      if (base.logprobs[v] != with.logprobs[v]) {
        detail = "logprob differs at rep " + std::to_string(rep);
        return false;
      }
    for (std::size_t i = 0; i < base.last_attention.w.size(); ++i)
      if (base.last_attention.w[i] != with.last_attention.w[i]) {
        detail = "attention differs at rep " + std::to_string(rep);
        return false;
      }
  }
  return true;
}

bool c9_strategy_ordering(std::string& detail) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SynthSpec spec;
    spec.n_traces = 200;
    spec.trace_len = 20;
    spec.seed = seed;
    const auto corpus = synth_corpus(spec);
    EvalOptions opt;
    opt.timing = false;
    opt.seed = seed;
    const std::vector<SweepPoint> sweep = {{0.5, Strategy::kUnion},
                                           {0.5, Strategy::kVisionOnly},
                                           {0.5, Strategy::kTextOnly},
                                           {0.5, Strategy::kIntersection},
                                           {0.5, Strategy::kRandom}};
    const auto rows = evaluate(corpus, opt, sweep);
    const double uni = rows[0].report.accuracy;
    const double vis = rows[1].report.accuracy;
    const double text = rows[2].report.accuracy;
    const double inter = rows[3].report.accuracy;
    const double random = rows[4].report.accuracy;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "seed %llu: union=%.3f vision=%.3f text=%.3f inter=%.3f random=%.3f",
                  static_cast<unsigned long long>(seed), uni, vis, text, inter, random);
    if (!(uni > vis && vis > text && uni > inter && uni >= random + 0.20)) {
      detail = std::string("ordering violated: ") + buf;
      return false;
    }
    if (seed == 5) detail = buf;  // keep the last seed's numbers visible
  }
  return true;
}

bool c10_varr_gap(std::string& detail) {
  SynthSpec spec;
  spec.n_traces = 250;
  spec.trace_len = 20;
  spec.seed = 0xC10;
  const auto corpus = synth_corpus(spec);
  EvalOptions opt;
  opt.timing = false;
  const auto rows =
      evaluate(corpus, opt, {{0.5, Strategy::kUnion}, {0.5, Strategy::kTextOnly}});
  const double uni = rows[0].report.varr.at("anchor");
  const double text = rows[1].report.varr.at("anchor");
  detail = "union " + std::to_string(uni) + "%, text " + std::to_string(text) + "%";
  return uni >= 95.0 && text <= 70.0;
}

bool c11_distillation(std::string& detail) {
  SynthSpec spec;
  spec.n_traces = 70;
  spec.trace_len = 20;
  spec.seed = 0xC11;
  const auto corpus = synth_corpus(spec);
  const std::vector<ReasoningTrace> train_traces(corpus.begin(), corpus.begin() + 50);
  const std::vector<ReasoningTrace> held_traces(corpus.begin() + 50, corpus.end());

  PipelineConfig pc;  // union gate at gamma 0.5
  const auto train_ds = run_phase1(train_traces, pc);
  const auto held_ds = run_phase1(held_traces, pc);

  ToyConfig mc;
  mc.seed = 0xC11;
  const ToyReasonerParams base = ToyReasonerParams::init(mc);
  const auto train_ex = dataset_to_examples(train_ds, mc);
  const auto held_ex = dataset_to_examples(held_ds, mc);

  TrainConfig tc;
  tc.steps = 2000;
  tc.batch_size = 8;
  tc.lr = 0.005;
  tc.seed = 0xC11;

  LoraAdapter adapter = LoraAdapter::init(mc, 4, 32.0, 0.05, tc.seed);
  const double nll0 = distill_loss(base, &adapter, held_ex);
  const auto curve = train_adapter(base, adapter, train_ex, tc);
  const double nll1 = distill_loss(base, &adapter, held_ex);
  const double drop = (nll0 - nll1) / nll0;

  LoraAdapter adapter2 = LoraAdapter::init(mc, 4, 32.0, 0.05, tc.seed);
  const auto curve2 = train_adapter(base, adapter2, train_ex, tc);
  bool curves_equal = curve.size() == curve2.size();
  for (std::size_t i = 0; curves_equal && i < curve.size(); ++i)
    curves_equal = curve[i].loss == curve2[i].loss;

  char buf[128];
  std::snprintf(buf, sizeof(buf), "held-out NLL %.4f -> %.4f (%.1f%% drop), curves %s", nll0,
                nll1, 100.0 * drop, curves_equal ? "identical" : "DIFFER");
  detail = buf;
  return drop >= 0.30 && curves_equal;
}

bool c12_end_to_end_determinism(std::string& detail) {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "vskip_e2e";
  fs::create_directories(root / "run1");
  fs::create_directories(root / "run2");

  auto run = [&](const fs::path& dir) {
    cmd::SynthArgs synth;
    synth.spec.n_traces = 40;
    synth.spec.seed = 0xC12;
    synth.out = (dir / "traces.jsonl").string();
    cmd::run_synth(synth);

    cmd::PruneArgs prune;
    prune.traces_path = synth.out;
    prune.out = (dir / "dataset.jsonl").string();
    prune.chains_out = (dir / "chains.jsonl").string();
    cmd::run_prune(prune);

    cmd::DistillArgs distill;
    distill.dataset_path = prune.out;
    distill.checkpoint_out = (dir / "checkpoint.json").string();
    distill.curve_out = (dir / "curve.csv").string();
    distill.train.steps = 60;
    distill.train.seed = 0xC12;
    distill.model.seed = 0xC12;
    cmd::run_distill(distill);

    cmd::EvalArgs eval;
    eval.traces_path = synth.out;
    eval.out = (dir / "report.json").string();
    eval.gammas = {1.0, 0.5};
    eval.strategies = {Strategy::kUnion, Strategy::kTextOnly};
    eval.timing = false;
    eval.format = "csv";
    cmd::run_eval(eval);
  };
  run(root / "run1");
  run(root / "run2");

  for (const char* name : {"traces.jsonl", "dataset.jsonl", "chains.jsonl", "checkpoint.json",
                           "curve.csv", "report.json"}) {
    if (slurp(root / "run1" / name) != slurp(root / "run2" / name)) {
      detail = std::string(name) + " differs between same-seed runs";
      return false;
    }
    if (slurp(root / "run1" / name).empty()) {
      detail = std::string(name) + " is empty";
      return false;
    }
  }
  return true;
}

}  // namespace

int main() {
  run_criterion(1, "gating strategies match the brute-force oracle on 1000 random score pairs",
                c1_gating_oracle, 5.0);
  run_criterion(2, "anls matches the edit-graph enumeration oracle on all 3-symbol pairs up to length 6",
                c2_metrics_oracle, 60.0);
  run_criterion(3, "rescue law: top-gamma visual positions always survive the union gate",
                [](std::string& d) { return c3_c4_traces(true, d); });
  run_criterion(4, "retention bound: union keeps a fraction in [gamma - 1/T, 1]",
                [](std::string& d) { return c3_c4_traces(false, d); });
  run_criterion(5, "full-tensor and precomputed-mass scoring agree within 1e-9", c5_layout_equivalence);
  run_criterion(6, "conditional MI equals the entropy difference within 1e-10", c6_mi_identity);
  run_criterion(7, "analytic adapter gradients match central finite differences (< 1e-4)",
                c7_gradient_fidelity, 30.0);
  run_criterion(8, "zero-delta adapters are bit-invisible on 50 random prefixes", c8_zero_delta);
  run_criterion(9, "proxy accuracy orders union > vision > text, union > intersection, union >= random + 20pp",
                c9_strategy_ordering, 120.0);
  run_criterion(10, "anchor retention: union >= 95% while text-only <= 70% at gamma 0.5", c10_varr_gap);
  run_criterion(11, "distillation drops held-out NLL >= 30% with identical same-seed curves",
                c11_distillation, 180.0);
  run_criterion(12, "synth -> prune -> distill -> eval is byte-identical across same-seed runs",
                c12_end_to_end_determinism);

  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all acceptance criteria passed\n");
  return 0;
}
