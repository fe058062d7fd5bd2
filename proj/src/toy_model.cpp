#include "vskip/toy_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "model_core.hpp"
#include "vskip/errors.hpp"
#include "vskip/toy_vocab.hpp"
#include "vskip/trace_json.hpp"

namespace vskip {

namespace {
constexpr double kInitStd = 0.08;
constexpr double kLoraInitStd = 0.02;
}  // namespace

ToyReasonerParams ToyReasonerParams::init(const ToyConfig& cfg) {
  if (cfg.vocab_size < 1 || cfg.d_model < 1 || cfg.layers < 1 || cfg.heads < 1 ||
      cfg.image_patches < 1 || cfg.max_seq < 2)
    throw DomainError("toy config dimensions must be positive");
  if (cfg.d_model % cfg.heads != 0)
    throw DomainError("d_model must be divisible by heads");
  Rng rng(mix64(cfg.seed ^ 0x746f79u));
  ToyReasonerParams p;
  p.config = cfg;
  p.embedding = Matrix::gaussian(cfg.vocab_size, cfg.d_model, kInitStd, rng);
  p.layers.reserve(cfg.layers);
  for (int l = 0; l < cfg.layers; ++l) {
    LayerParams lp;
    lp.wq = Matrix::gaussian(cfg.d_model, cfg.d_model, kInitStd, rng);
    lp.wk = Matrix::gaussian(cfg.d_model, cfg.d_model, kInitStd, rng);
    lp.wv = Matrix::gaussian(cfg.d_model, cfg.d_model, kInitStd, rng);
    lp.wo = Matrix::gaussian(cfg.d_model, cfg.d_model, kInitStd, rng);
    lp.w1 = Matrix::gaussian(cfg.ffn_hidden(), cfg.d_model, kInitStd, rng);
    lp.w2 = Matrix::gaussian(cfg.d_model, cfg.ffn_hidden(), kInitStd, rng);
    p.layers.push_back(std::move(lp));
  }
  p.head = Matrix::gaussian(cfg.vocab_size, cfg.d_model, kInitStd, rng);
  return p;
}

LoraAdapter LoraAdapter::init(const ToyConfig& cfg, int rank, double alpha, double dropout,
                              std::uint64_t seed) {
  if (rank < 1) throw DomainError("adapter rank must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw DomainError("dropout must be in [0, 1)");
  Rng rng(mix64(seed ^ 0x6c6f7261u));
  LoraAdapter ad;
  ad.rank = rank;
  ad.alpha = alpha;
  ad.dropout = dropout;
  ad.layers.reserve(cfg.layers);
  for (int l = 0; l < cfg.layers; ++l) {
    LoraLayer layer;
    for (LoraPair* pair : {&layer.q, &layer.k, &layer.v, &layer.o}) {
      pair->a = Matrix::gaussian(rank, cfg.d_model, kLoraInitStd, rng);
      pair->b = Matrix::zeros(cfg.d_model, rank);
    }
    ad.layers.push_back(std::move(layer));
  }
  return ad;
}

namespace detail {

Vec sinusoidal_position(int pos, int d_model) {
  // Scaled to the embedding magnitude so position does not drown out content.
  constexpr double kPosScale = 0.1;
  Vec pe(static_cast<std::size_t>(d_model));
  for (int i = 0; i < d_model; i += 2) {
    const double freq = std::pow(10000.0, -static_cast<double>(i) / d_model);
    pe[static_cast<std::size_t>(i)] = kPosScale * std::sin(pos * freq);
    if (i + 1 < d_model) pe[static_cast<std::size_t>(i + 1)] = kPosScale * std::cos(pos * freq);
  }
  return pe;
}

namespace {

// y = W x + scale * B (A (x .* mask)); fills branch caches. mask empty = identity.
void project(const Matrix& w, const LoraPair* lp, double scale, const Vec& x,
             const Vec& mask, Vec& branch_in, Vec& z, Vec& y) {
  y.assign(static_cast<std::size_t>(w.rows), 0.0);
  matvec(w, x.data(), y.data());
  if (!lp) return;
  branch_in = x;
  if (!mask.empty())
    for (std::size_t i = 0; i < x.size(); ++i) branch_in[i] = x[i] * mask[i];
  z.assign(static_cast<std::size_t>(lp->a.rows), 0.0);
  matvec(lp->a, branch_in.data(), z.data());
  Vec delta(static_cast<std::size_t>(lp->b.rows), 0.0);
  matvec(lp->b, z.data(), delta.data());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += scale * delta[i];
}

Mat2 draw_masks(int S, int dim, double dropout, Rng* rng) {
  if (!rng || dropout <= 0.0) return {};
  const double keep_scale = 1.0 / (1.0 - dropout);
  Mat2 masks(static_cast<std::size_t>(S), Vec(static_cast<std::size_t>(dim)));
  for (auto& row : masks)
    for (double& v : row) v = rng->uniform01() < dropout ? 0.0 : keep_scale;
  return masks;
}

}  // namespace

void run_model(const ToyReasonerParams& params, const LoraAdapter* adapter,
               const std::vector<std::vector<double>>& image_features,
               const std::vector<int>& tokens, Rng* dropout_rng, ModelCache& cache) {
  const ToyConfig& cfg = params.config;
  const int D = cfg.d_model, H = cfg.heads, Dh = cfg.head_dim(), P = cfg.image_patches;
  if (static_cast<int>(image_features.size()) != P)
    throw DomainError("expected " + std::to_string(P) + " image patches");
  for (const auto& f : image_features)
    if (static_cast<int>(f.size()) != D) throw DomainError("image feature dimension mismatch");
  if (static_cast<int>(tokens.size()) > cfg.max_seq)
    throw DomainError("prefix exceeds max_seq");
  for (int id : tokens)
    if (id < 0 || id >= cfg.vocab_size) throw DomainError("token id out of vocabulary");
  if (adapter && static_cast<int>(adapter->layers.size()) != cfg.layers)
    throw DomainError("adapter layer count does not match model");

  const int S = P + static_cast<int>(tokens.size());
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(Dh));
  const double scale = adapter ? adapter->scale() : 0.0;

  cache.S = S;
  cache.n_image = P;
  cache.x0.assign(static_cast<std::size_t>(S), Vec());
  for (int i = 0; i < S; ++i) {
    Vec x = sinusoidal_position(i, D);
    const double* src = i < P ? image_features[static_cast<std::size_t>(i)].data()
                              : params.embedding.row(tokens[static_cast<std::size_t>(i - P)]);
    for (int d = 0; d < D; ++d) x[static_cast<std::size_t>(d)] += src[d];
    cache.x0[static_cast<std::size_t>(i)] = std::move(x);
  }

  cache.layers.assign(static_cast<std::size_t>(cfg.layers), LayerCache());
  Mat2 x = cache.x0;
  for (int l = 0; l < cfg.layers; ++l) {
    LayerCache& lc = cache.layers[static_cast<std::size_t>(l)];
    const LayerParams& lp = params.layers[static_cast<std::size_t>(l)];
    const LoraLayer* al = adapter ? &adapter->layers[static_cast<std::size_t>(l)] : nullptr;
    const double p_drop = adapter ? adapter->dropout : 0.0;

    lc.x_in = x;
    lc.mask_q = draw_masks(S, D, p_drop, dropout_rng);
    lc.mask_k = draw_masks(S, D, p_drop, dropout_rng);
    lc.mask_v = draw_masks(S, D, p_drop, dropout_rng);
    lc.mask_o = draw_masks(S, D, p_drop, dropout_rng);

    lc.n1.resize(static_cast<std::size_t>(S));
    lc.q.resize(static_cast<std::size_t>(S));
    lc.k.resize(static_cast<std::size_t>(S));
    lc.v.resize(static_cast<std::size_t>(S));
    if (al) {
      lc.bq.resize(static_cast<std::size_t>(S));
      lc.bk.resize(static_cast<std::size_t>(S));
      lc.bv.resize(static_cast<std::size_t>(S));
      lc.zq.resize(static_cast<std::size_t>(S));
      lc.zk.resize(static_cast<std::size_t>(S));
      lc.zv.resize(static_cast<std::size_t>(S));
    }
    const Vec empty;
    Vec scratch_b, scratch_z;
    for (int i = 0; i < S; ++i) {
      const std::size_t si = static_cast<std::size_t>(i);
      lc.n1[si] = rmsnorm(x[si]);
      project(lp.wq, al ? &al->q : nullptr, scale, lc.n1[si],
              lc.mask_q.empty() ? empty : lc.mask_q[si], al ? lc.bq[si] : scratch_b,
              al ? lc.zq[si] : scratch_z, lc.q[si]);
      project(lp.wk, al ? &al->k : nullptr, scale, lc.n1[si],
              lc.mask_k.empty() ? empty : lc.mask_k[si], al ? lc.bk[si] : scratch_b,
              al ? lc.zk[si] : scratch_z, lc.k[si]);
      project(lp.wv, al ? &al->v : nullptr, scale, lc.n1[si],
              lc.mask_v.empty() ? empty : lc.mask_v[si], al ? lc.bv[si] : scratch_b,
              al ? lc.zv[si] : scratch_z, lc.v[si]);
    }

    lc.attn.assign(static_cast<std::size_t>(H),
                   Mat2(static_cast<std::size_t>(S), Vec(static_cast<std::size_t>(S), 0.0)));
    lc.ctx.assign(static_cast<std::size_t>(S), Vec(static_cast<std::size_t>(D), 0.0));
    Vec scores(static_cast<std::size_t>(S));
    for (int h = 0; h < H; ++h) {
      const int off = h * Dh;
      Mat2& amat = lc.attn[static_cast<std::size_t>(h)];
      for (int i = 0; i < S; ++i) {
        double max_score = -1e300;
        for (int j = 0; j <= i; ++j) {
          double s = 0.0;
          const double* qi = lc.q[static_cast<std::size_t>(i)].data() + off;
          const double* kj = lc.k[static_cast<std::size_t>(j)].data() + off;
          for (int d = 0; d < Dh; ++d) s += qi[d] * kj[d];
          s *= inv_sqrt_dh;
          scores[static_cast<std::size_t>(j)] = s;
          max_score = std::max(max_score, s);
        }
        double denom = 0.0;
        for (int j = 0; j <= i; ++j)
          denom += std::exp(scores[static_cast<std::size_t>(j)] - max_score);
        for (int j = 0; j <= i; ++j)
          amat[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
              std::exp(scores[static_cast<std::size_t>(j)] - max_score) / denom;
        double* ctx = lc.ctx[static_cast<std::size_t>(i)].data() + off;
        for (int j = 0; j <= i; ++j) {
          const double a = amat[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
          const double* vj = lc.v[static_cast<std::size_t>(j)].data() + off;
          for (int d = 0; d < Dh; ++d) ctx[d] += a * vj[d];
        }
      }
    }

    lc.x_mid.resize(static_cast<std::size_t>(S));
    if (al) {
      lc.bo.resize(static_cast<std::size_t>(S));
      lc.zo.resize(static_cast<std::size_t>(S));
    }
    for (int i = 0; i < S; ++i) {
      const std::size_t si = static_cast<std::size_t>(i);
      Vec attn_out;
      project(lp.wo, al ? &al->o : nullptr, scale, lc.ctx[si],
              lc.mask_o.empty() ? empty : lc.mask_o[si], al ? lc.bo[si] : scratch_b,
              al ? lc.zo[si] : scratch_z, attn_out);
      lc.x_mid[si] = x[si];
      for (int d = 0; d < D; ++d) lc.x_mid[si][static_cast<std::size_t>(d)] += attn_out[static_cast<std::size_t>(d)];
    }

    lc.n2.resize(static_cast<std::size_t>(S));
    lc.tanh_u.resize(static_cast<std::size_t>(S));
    for (int i = 0; i < S; ++i) {
      const std::size_t si = static_cast<std::size_t>(i);
      lc.n2[si] = rmsnorm(lc.x_mid[si]);
      Vec u(static_cast<std::size_t>(cfg.ffn_hidden()), 0.0);
      matvec(lp.w1, lc.n2[si].data(), u.data());
      for (double& uv : u) uv = std::tanh(uv);
      lc.tanh_u[si] = std::move(u);
      Vec f(static_cast<std::size_t>(D), 0.0);
      matvec(lp.w2, lc.tanh_u[si].data(), f.data());
      x[si] = lc.x_mid[si];
      for (int d = 0; d < D; ++d) x[si][static_cast<std::size_t>(d)] += f[static_cast<std::size_t>(d)];
    }
  }

  cache.x_final = std::move(x);
}

Vec position_logprobs(const ToyReasonerParams& params, const ModelCache& cache, int pos) {
  Vec logits(static_cast<std::size_t>(params.config.vocab_size), 0.0);
  matvec(params.head, cache.x_final[static_cast<std::size_t>(pos)].data(), logits.data());
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (double v : logits) denom += std::exp(v - max_logit);
  const double lse = max_logit + std::log(denom);
  for (double& v : logits) v -= lse;
  return logits;
}

}  // namespace detail

ForwardResult forward(const ToyReasonerParams& params, const LoraAdapter* adapter,
                      const std::vector<std::vector<double>>& image_features,
                      const std::vector<int>& token_prefix) {
  if (static_cast<int>(token_prefix.size()) >= params.config.max_seq)
    throw DomainError("prefix length must be < max_seq");
  detail::ModelCache cache;
  detail::run_model(params, adapter, image_features, token_prefix, nullptr, cache);

  ForwardResult out;
  out.logprobs = detail::position_logprobs(params, cache, cache.S - 1);

  const ToyConfig& cfg = params.config;
  AttentionTensor a;
  a.layers = cfg.layers;
  a.heads = cfg.heads;
  a.queries = 1;
  a.keys = cache.S;
  a.w.assign(static_cast<std::size_t>(a.layers) * a.heads * a.keys, 0.0);
  for (int l = 0; l < a.layers; ++l)
    for (int h = 0; h < a.heads; ++h)
      for (int k = 0; k < a.keys; ++k)
        a.at(l, h, 0, k) = cache.layers[static_cast<std::size_t>(l)]
                               .attn[static_cast<std::size_t>(h)][static_cast<std::size_t>(cache.S - 1)]
                                    [static_cast<std::size_t>(k)];
  out.last_attention = std::move(a);
  return out;
}

ReasoningTrace generate_cot(const ToyReasonerParams& params, const LoraAdapter* adapter,
                            const std::vector<std::vector<double>>& image_features,
                            const std::vector<int>& question_ids, int max_len,
                            const std::string& trace_id, const std::string& image_id) {
  const ToyConfig& cfg = params.config;
  if (question_ids.empty()) throw DomainError("question must be non-empty");
  if (max_len < 1) throw DomainError("max_len must be >= 1");
  if (static_cast<int>(question_ids.size()) + max_len > cfg.max_seq)
    throw DomainError("max_len exceeds max_seq minus prompt length");

  const int P = cfg.image_patches;
  const int Q = static_cast<int>(question_ids.size());
  const int T = max_len;
  const int total_keys = P + Q + T - 1;  // keys seen by the last emission step

  ReasoningTrace trace;
  trace.trace_id = trace_id;
  trace.image_id = image_id;
  for (int i = 0; i < Q; ++i) {
    if (i) trace.question += ' ';
    trace.question += toyvocab::token_text(question_ids[static_cast<std::size_t>(i)]);
  }
  for (int k = 0; k < P; ++k) trace.image_key_indices.push_back(k);

  AttentionTensor attn;
  attn.layers = cfg.layers;
  attn.heads = cfg.heads;
  attn.queries = T;
  attn.keys = total_keys;
  attn.w.assign(static_cast<std::size_t>(cfg.layers) * cfg.heads * T * total_keys, 0.0);

  std::vector<int> prefix = question_ids;
  for (int t = 0; t < T; ++t) {
    const ForwardResult step = forward(params, adapter, image_features, prefix);
    // Greedy pick; ties break toward the lowest id.
    int best = 0;
    for (int v = 1; v < cfg.vocab_size; ++v)
      if (step.logprobs[static_cast<std::size_t>(v)] > step.logprobs[static_cast<std::size_t>(best)])
        best = v;
    trace.tokens.push_back({toyvocab::token_text(best), best,
                            std::min(0.0, step.logprobs[static_cast<std::size_t>(best)])});
    for (int l = 0; l < cfg.layers; ++l)
      for (int h = 0; h < cfg.heads; ++h)
        for (int k = 0; k < step.last_attention.keys; ++k)
          attn.at(l, h, t, k) = step.last_attention.at(l, h, 0, k);
    prefix.push_back(best);
  }

  trace.attention = std::move(attn);
  return trace;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows; ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols; ++c) row.push_back(m.at(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  Matrix m(static_cast<int>(j.size()), j.empty() ? 0 : static_cast<int>(j[0].size()));
  for (int r = 0; r < m.rows; ++r) {
    if (static_cast<int>(j[static_cast<std::size_t>(r)].size()) != m.cols)
      throw ValidationError("ragged matrix in checkpoint");
    for (int c = 0; c < m.cols; ++c)
      m.at(r, c) = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  const ToyConfig& cfg = ck.params.config;
  json j;
  j["version"] = 1;
  j["config"] = {{"vocab_size", cfg.vocab_size}, {"d_model", cfg.d_model},
                 {"layers", cfg.layers},         {"heads", cfg.heads},
                 {"image_patches", cfg.image_patches}, {"max_seq", cfg.max_seq},
                 {"seed", cfg.seed}};
  json layers = json::array();
  for (const LayerParams& lp : ck.params.layers)
    layers.push_back({{"wq", matrix_to_json(lp.wq)}, {"wk", matrix_to_json(lp.wk)},
                      {"wv", matrix_to_json(lp.wv)}, {"wo", matrix_to_json(lp.wo)},
                      {"w1", matrix_to_json(lp.w1)}, {"w2", matrix_to_json(lp.w2)}});
  j["params"] = {{"embedding", matrix_to_json(ck.params.embedding)},
                 {"layers", std::move(layers)},
                 {"head", matrix_to_json(ck.params.head)}};
  if (ck.adapter) {
    json alayers = json::array();
    for (const LoraLayer& al : ck.adapter->layers) {
      json jl;
      const std::pair<const char*, const LoraPair*> pairs[] = {
          {"q", &al.q}, {"k", &al.k}, {"v", &al.v}, {"o", &al.o}};
      for (const auto& [name, pair] : pairs)
        jl[name] = {{"a", matrix_to_json(pair->a)}, {"b", matrix_to_json(pair->b)}};
      alayers.push_back(std::move(jl));
    }
    j["adapter"] = {{"rank", ck.adapter->rank}, {"alpha", ck.adapter->alpha},
                    {"dropout", ck.adapter->dropout}, {"layers", std::move(alayers)}};
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << j.dump() << '\n';
  if (!out) throw IoError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
  try {
    if (j.at("version").get<int>() != 1) throw ValidationError("unsupported checkpoint version");
    Checkpoint ck;
    const json& jc = j.at("config");
    ck.params.config = {jc.at("vocab_size").get<int>(),   jc.at("d_model").get<int>(),
                        jc.at("layers").get<int>(),       jc.at("heads").get<int>(),
                        jc.at("image_patches").get<int>(), jc.at("max_seq").get<int>(),
                        jc.at("seed").get<std::uint64_t>()};
    const json& jp = j.at("params");
    ck.params.embedding = matrix_from_json(jp.at("embedding"));
    for (const json& jl : jp.at("layers"))
      ck.params.layers.push_back({matrix_from_json(jl.at("wq")), matrix_from_json(jl.at("wk")),
                                  matrix_from_json(jl.at("wv")), matrix_from_json(jl.at("wo")),
                                  matrix_from_json(jl.at("w1")), matrix_from_json(jl.at("w2"))});
    ck.params.head = matrix_from_json(jp.at("head"));
    if (j.contains("adapter")) {
      const json& ja = j.at("adapter");
      LoraAdapter ad;
      ad.rank = ja.at("rank").get<int>();
      ad.alpha = ja.at("alpha").get<double>();
      ad.dropout = ja.at("dropout").get<double>();
      for (const json& jl : ja.at("layers")) {
        LoraLayer al;
        al.q = {matrix_from_json(jl.at("q").at("a")), matrix_from_json(jl.at("q").at("b"))};
        al.k = {matrix_from_json(jl.at("k").at("a")), matrix_from_json(jl.at("k").at("b"))};
        al.v = {matrix_from_json(jl.at("v").at("a")), matrix_from_json(jl.at("v").at("b"))};
        al.o = {matrix_from_json(jl.at("o").at("a")), matrix_from_json(jl.at("o").at("b"))};
        ad.layers.push_back(std::move(al));
      }
      ck.adapter = std::move(ad);
    }
    return ck;
  } catch (const json::exception& e) {
    throw ValidationError(path + ": malformed checkpoint: " + e.what());
  }
}

}  // namespace vskip
