#include "vskip/distill.hpp"

#include <cmath>
#include <string>

#include "model_core.hpp"
#include "vskip/errors.hpp"

namespace vskip {

using detail::Mat2;
using detail::ModelCache;
using detail::Vec;

AdapterGrads AdapterGrads::zeros_like(const LoraAdapter& adapter) {
  AdapterGrads g;
  g.layers.reserve(adapter.layers.size());
  for (const LoraLayer& al : adapter.layers) {
    LoraLayerGrad lg;
    const std::pair<const LoraPair*, LoraPairGrad*> pairs[] = {
        {&al.q, &lg.q}, {&al.k, &lg.k}, {&al.v, &lg.v}, {&al.o, &lg.o}};
    for (const auto& [src, dst] : pairs) {
      dst->a = Matrix::zeros(src->a.rows, src->a.cols);
      dst->b = Matrix::zeros(src->b.rows, src->b.cols);
    }
    g.layers.push_back(std::move(lg));
  }
  return g;
}

namespace {

void check_example(const ToyConfig& cfg, const DistillExample& ex) {
  if (ex.question_ids.empty()) throw DomainError("example question must be non-empty");
  if (ex.target_ids.empty()) throw DomainError("example target must be non-empty");
  if (static_cast<int>(ex.question_ids.size() + ex.target_ids.size()) > cfg.max_seq)
    throw DomainError("example exceeds max_seq");
}

// Reverse pass for one example. dlogits[pos] is the upstream gradient at the
// head output for that position (empty vector = no loss there).
void backward_example(const ToyReasonerParams& params, const LoraAdapter& adapter,
                      const ModelCache& cache, const std::vector<Vec>& dlogits,
                      AdapterGrads& grads) {
  const ToyConfig& cfg = params.config;
  const int S = cache.S, D = cfg.d_model, H = cfg.heads, Dh = cfg.head_dim();
  const double sc = adapter.scale();
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(Dh));

  // Through the output head.
  Mat2 g(static_cast<std::size_t>(S), Vec(static_cast<std::size_t>(D), 0.0));
  for (int i = 0; i < S; ++i) {
    const Vec& dl = dlogits[static_cast<std::size_t>(i)];
    if (dl.empty()) continue;
    matvec_t_add(params.head, dl.data(), g[static_cast<std::size_t>(i)].data());
  }

  Vec tmp_r(static_cast<std::size_t>(adapter.rank), 0.0);
  for (int l = cfg.layers - 1; l >= 0; --l) {
    const detail::LayerCache& lc = cache.layers[static_cast<std::size_t>(l)];
    const LayerParams& lp = params.layers[static_cast<std::size_t>(l)];
    const LoraLayer& al = adapter.layers[static_cast<std::size_t>(l)];
    LoraLayerGrad& lg = grads.layers[static_cast<std::size_t>(l)];

    // FFN block: x_out = x_mid + W2 tanh(W1 rmsnorm(x_mid)).
    Mat2 dx_mid(static_cast<std::size_t>(S));
    for (int i = 0; i < S; ++i) {
      const std::size_t si = static_cast<std::size_t>(i);
      Vec dt(static_cast<std::size_t>(cfg.ffn_hidden()), 0.0);
      matvec_t_add(lp.w2, g[si].data(), dt.data());
      for (int f = 0; f < cfg.ffn_hidden(); ++f) {
        const double th = lc.tanh_u[si][static_cast<std::size_t>(f)];
        dt[static_cast<std::size_t>(f)] *= 1.0 - th * th;
      }
      Vec dn2(static_cast<std::size_t>(D), 0.0);
      matvec_t_add(lp.w1, dt.data(), dn2.data());
      dx_mid[si] = detail::rmsnorm_backward(lc.x_mid[si], lc.n2[si], dn2);
      for (int d = 0; d < D; ++d) dx_mid[si][static_cast<std::size_t>(d)] += g[si][static_cast<std::size_t>(d)];
    }

    // Output projection: x_mid = x_in + Wo ctx + sc*Bo(Ao(ctx .* mask)).
    Mat2 dx_in = dx_mid;  // residual branch
    Mat2 dctx(static_cast<std::size_t>(S), Vec(static_cast<std::size_t>(D), 0.0));
    for (int i = 0; i < S; ++i) {
      const std::size_t si = static_cast<std::size_t>(i);
      const Vec& dy = dx_mid[si];
      matvec_t_add(lp.wo, dy.data(), dctx[si].data());
      add_outer(lg.o.b, dy.data(), lc.zo[si].data(), sc);
      std::fill(tmp_r.begin(), tmp_r.end(), 0.0);
      matvec_t_add(al.o.b, dy.data(), tmp_r.data());
      for (double& v : tmp_r) v *= sc;
      add_outer(lg.o.a, tmp_r.data(), lc.bo[si].data(), 1.0);
      Vec dbo(static_cast<std::size_t>(D), 0.0);
      matvec_t_add(al.o.a, tmp_r.data(), dbo.data());
      if (!lc.mask_o.empty())
        for (int d = 0; d < D; ++d) dbo[static_cast<std::size_t>(d)] *= lc.mask_o[si][static_cast<std::size_t>(d)];
      for (int d = 0; d < D; ++d) dctx[si][static_cast<std::size_t>(d)] += dbo[static_cast<std::size_t>(d)];
    }

    // Attention heads.
    Mat2 dq(static_cast<std::size_t>(S), Vec(static_cast<std::size_t>(D), 0.0));
    Mat2 dk(static_cast<std::size_t>(S), Vec(static_cast<std::size_t>(D), 0.0));
    Mat2 dv(static_cast<std::size_t>(S), Vec(static_cast<std::size_t>(D), 0.0));
    Vec da(static_cast<std::size_t>(S), 0.0), ds(static_cast<std::size_t>(S), 0.0);
    for (int h = 0; h < H; ++h) {
      const int off = h * Dh;
      const Mat2& amat = lc.attn[static_cast<std::size_t>(h)];
      for (int i = 0; i < S; ++i) {
        const std::size_t si = static_cast<std::size_t>(i);
        const double* dctx_h = dctx[si].data() + off;
        double dsum = 0.0;
        for (int j = 0; j <= i; ++j) {
          const std::size_t sj = static_cast<std::size_t>(j);
          const double aij = amat[si][sj];
          const double* vj = lc.v[sj].data() + off;
          double dot = 0.0;
          for (int d = 0; d < Dh; ++d) {
            dot += dctx_h[d] * vj[d];
            dv[sj][static_cast<std::size_t>(off + d)] += aij * dctx_h[d];
          }
          da[sj] = dot;
          dsum += dot * aij;
        }
        for (int j = 0; j <= i; ++j) {
          const std::size_t sj = static_cast<std::size_t>(j);
          ds[sj] = amat[si][sj] * (da[sj] - dsum);
        }
        double* dq_h = dq[si].data() + off;
        const double* qi = lc.q[si].data() + off;
        for (int j = 0; j <= i; ++j) {
          const std::size_t sj = static_cast<std::size_t>(j);
          const double w = ds[sj] * inv_sqrt_dh;
          const double* kj = lc.k[sj].data() + off;
          double* dk_h = dk[sj].data() + off;
          for (int d = 0; d < Dh; ++d) {
            dq_h[d] += w * kj[d];
            dk_h[d] += w * qi[d];
          }
        }
      }
    }

    // Input projections: p = W n1 + sc*B(A(n1 .* mask)) for p in {q, k, v}.
    for (int i = 0; i < S; ++i) {
      const std::size_t si = static_cast<std::size_t>(i);
      Vec dn1(static_cast<std::size_t>(D), 0.0);
      const std::tuple<const Matrix*, const LoraPair*, LoraPairGrad*, const Mat2*, const Mat2*,
                       const Mat2*, const Vec*>
          branches[] = {
              {&lp.wq, &al.q, &lg.q, &lc.zq, &lc.bq, &lc.mask_q, &dq[si]},
              {&lp.wk, &al.k, &lg.k, &lc.zk, &lc.bk, &lc.mask_k, &dk[si]},
              {&lp.wv, &al.v, &lg.v, &lc.zv, &lc.bv, &lc.mask_v, &dv[si]},
          };
      for (const auto& [w, pair, pg, z, b, mask, dp] : branches) {
        matvec_t_add(*w, dp->data(), dn1.data());
        add_outer(pg->b, dp->data(), (*z)[si].data(), sc);
        std::fill(tmp_r.begin(), tmp_r.end(), 0.0);
        matvec_t_add(pair->b, dp->data(), tmp_r.data());
        for (double& v : tmp_r) v *= sc;
        add_outer(pg->a, tmp_r.data(), (*b)[si].data(), 1.0);
        Vec dbranch(static_cast<std::size_t>(D), 0.0);
        matvec_t_add(pair->a, tmp_r.data(), dbranch.data());
        if (!mask->empty())
          for (int d = 0; d < D; ++d)
            dbranch[static_cast<std::size_t>(d)] *= (*mask)[si][static_cast<std::size_t>(d)];
        for (int d = 0; d < D; ++d) dn1[static_cast<std::size_t>(d)] += dbranch[static_cast<std::size_t>(d)];
      }
      const Vec dxn = detail::rmsnorm_backward(lc.x_in[si], lc.n1[si], dn1);
      for (int d = 0; d < D; ++d) dx_in[si][static_cast<std::size_t>(d)] += dxn[static_cast<std::size_t>(d)];
    }

    g = std::move(dx_in);
  }
}

// Shared loss/grad loop. grads == nullptr computes the loss only.
double batch_pass(const ToyReasonerParams& params, const LoraAdapter* adapter,
                  const std::vector<DistillExample>& batch, Rng* dropout_rng,
                  AdapterGrads* grads) {
  if (batch.empty()) throw DomainError("empty batch");
  const ToyConfig& cfg = params.config;
  long long n_tokens = 0;
  for (const DistillExample& ex : batch) {
    check_example(cfg, ex);
    n_tokens += static_cast<long long>(ex.target_ids.size());
  }
  const double inv_n = 1.0 / static_cast<double>(n_tokens);

  double loss = 0.0;
  ModelCache cache;
  for (const DistillExample& ex : batch) {
    std::vector<int> tokens = ex.question_ids;
    tokens.insert(tokens.end(), ex.target_ids.begin(), ex.target_ids.end());
    detail::run_model(params, adapter, ex.image_features, tokens, dropout_rng, cache);

    const int base = cfg.image_patches + static_cast<int>(ex.question_ids.size()) - 1;
    std::vector<Vec> dlogits;
    if (grads) dlogits.assign(static_cast<std::size_t>(cache.S), Vec());
    for (std::size_t t = 0; t < ex.target_ids.size(); ++t) {
      const int pos = base + static_cast<int>(t);
      const int y = ex.target_ids[t];
      const Vec lp = detail::position_logprobs(params, cache, pos);
      loss -= lp[static_cast<std::size_t>(y)] * inv_n;
      if (grads) {
        Vec dl(lp.size());
        for (std::size_t v = 0; v < lp.size(); ++v) dl[v] = std::exp(lp[v]) * inv_n;
        dl[static_cast<std::size_t>(y)] -= inv_n;
        dlogits[static_cast<std::size_t>(pos)] = std::move(dl);
      }
    }
    if (grads) backward_example(params, *adapter, cache, dlogits, *grads);
  }
  return loss;
}

const char* pair_name(int which) {
  switch (which) {
    case 0: return "q";
    case 1: return "k";
    case 2: return "v";
    default: return "o";
  }
}

void check_finite(const AdapterGrads& grads) {
  for (std::size_t l = 0; l < grads.layers.size(); ++l) {
    const LoraLayerGrad& lg = grads.layers[l];
    const LoraPairGrad* pairs[] = {&lg.q, &lg.k, &lg.v, &lg.o};
    for (int w = 0; w < 4; ++w) {
      for (const Matrix* m : {&pairs[w]->a, &pairs[w]->b})
        for (double v : m->a)
          if (!std::isfinite(v))
            throw TrainingError("non-finite gradient in adapter layers[" + std::to_string(l) +
                                "]." + pair_name(w) + (m == &pairs[w]->a ? ".a" : ".b"));
    }
  }
}

}  // namespace

double distill_loss(const ToyReasonerParams& params, const LoraAdapter* adapter,
                    const std::vector<DistillExample>& batch) {
  return batch_pass(params, adapter, batch, nullptr, nullptr);
}

AdapterGrads distill_grads(const ToyReasonerParams& params, const LoraAdapter& adapter,
                           const std::vector<DistillExample>& batch, double* loss_out) {
  AdapterGrads grads = AdapterGrads::zeros_like(adapter);
  const double loss = batch_pass(params, &adapter, batch, nullptr, &grads);
  if (loss_out) *loss_out = loss;
  return grads;
}

double distill_step(const ToyReasonerParams& params, LoraAdapter& adapter,
                    const std::vector<DistillExample>& batch, double lr, Rng* dropout_rng) {
  if (lr < 0.0) throw DomainError("learning rate must be >= 0");
  AdapterGrads grads = AdapterGrads::zeros_like(adapter);
  const double loss = batch_pass(params, &adapter, batch, dropout_rng, &grads);
  check_finite(grads);
  for (std::size_t l = 0; l < adapter.layers.size(); ++l) {
    LoraLayer& al = adapter.layers[l];
    LoraLayerGrad& lg = grads.layers[l];
    const std::pair<LoraPair*, LoraPairGrad*> pairs[] = {
        {&al.q, &lg.q}, {&al.k, &lg.k}, {&al.v, &lg.v}, {&al.o, &lg.o}};
    for (const auto& [pair, pg] : pairs) {
      for (std::size_t i = 0; i < pair->a.a.size(); ++i) pair->a.a[i] -= lr * pg->a.a[i];
      for (std::size_t i = 0; i < pair->b.a.size(); ++i) pair->b.a[i] -= lr * pg->b.a[i];
    }
  }
  return loss;
}

std::vector<CurvePoint> train_adapter(const ToyReasonerParams& params, LoraAdapter& adapter,
                                      const std::vector<DistillExample>& dataset,
                                      const TrainConfig& cfg) {
  if (dataset.empty()) throw DomainError("empty training dataset");
  if (cfg.steps < 0 || cfg.batch_size < 1) throw DomainError("bad training configuration");

  Rng dropout_rng(mix64(cfg.seed ^ 0xd40ull));
  std::vector<CurvePoint> curve;
  curve.reserve(static_cast<std::size_t>(cfg.steps));
  std::size_t cursor = 0;
  std::vector<DistillExample> batch;
  for (int step = 0; step < cfg.steps; ++step) {
    batch.clear();
    for (int b = 0; b < cfg.batch_size; ++b) {
      batch.push_back(dataset[cursor]);
      cursor = (cursor + 1) % dataset.size();
    }
    const double loss =
        distill_step(params, adapter, batch, cfg.lr, adapter.dropout > 0.0 ? &dropout_rng : nullptr);
    curve.push_back({step, loss});
  }
  return curve;
}

}  // namespace vskip
