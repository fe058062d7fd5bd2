#include "vskip/mi.hpp"

#include <cmath>
#include <stdexcept>

#include "vskip/errors.hpp"

namespace vskip {

namespace {

constexpr double kNormTol = 1e-9;
constexpr double kIdentityTol = 1e-10;

// 0 log 0 = 0 throughout.
double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

}  // namespace

MiReport mi_diagnostic(const JointTable& joint, double lambda) {
  const int nc = joint.nc, na = joint.na, nv = joint.nv, nq = joint.nq;
  if (nc < 1 || na < 1 || nv < 1 || nq < 1)
    throw DomainError("joint table must have positive alphabet sizes");
  if (static_cast<std::size_t>(nc) * na * nv * nq != joint.p.size())
    throw DomainError("joint table size does not match alphabet sizes");

  double total = 0.0;
  for (double v : joint.p) {
    if (!(v >= 0.0)) throw DomainError("joint table entries must be >= 0");
    total += v;
  }
  if (std::fabs(total - 1.0) > kNormTol)
    throw DomainError("joint table must sum to 1 within 1e-9");

  // Marginals.
  std::vector<double> p_c(static_cast<std::size_t>(nc), 0.0);
  std::vector<double> p_a(static_cast<std::size_t>(na), 0.0);
  std::vector<double> p_q(static_cast<std::size_t>(nq), 0.0);
  std::vector<double> p_ca(static_cast<std::size_t>(nc) * na, 0.0);
  std::vector<double> p_cq(static_cast<std::size_t>(nc) * nq, 0.0);
  std::vector<double> p_vq(static_cast<std::size_t>(nv) * nq, 0.0);
  std::vector<double> p_cvq(static_cast<std::size_t>(nc) * nv * nq, 0.0);
  for (int c = 0; c < nc; ++c)
    for (int a = 0; a < na; ++a)
      for (int v = 0; v < nv; ++v)
        for (int q = 0; q < nq; ++q) {
          const double pv = joint.at(c, a, v, q);
          p_c[c] += pv;
          p_a[a] += pv;
          p_q[q] += pv;
          p_ca[static_cast<std::size_t>(c) * na + a] += pv;
          p_cq[static_cast<std::size_t>(c) * nq + q] += pv;
          p_vq[static_cast<std::size_t>(v) * nq + q] += pv;
          p_cvq[(static_cast<std::size_t>(c) * nv + v) * nq + q] += pv;
        }

  MiReport r;

  // I(C;A) = sum p(c,a) log p(c,a) / (p(c) p(a))
  for (int c = 0; c < nc; ++c)
    for (int a = 0; a < na; ++a) {
      const double pca = p_ca[static_cast<std::size_t>(c) * na + a];
      if (pca > 0.0) r.sufficiency += pca * std::log(pca / (p_c[c] * p_a[a]));
    }

  // I(C;V|Q) = sum p(c,v,q) log [ p(c,v,q) p(q) / (p(c,q) p(v,q)) ]
  for (int c = 0; c < nc; ++c)
    for (int v = 0; v < nv; ++v)
      for (int q = 0; q < nq; ++q) {
        const double pcvq = p_cvq[(static_cast<std::size_t>(c) * nv + v) * nq + q];
        if (pcvq > 0.0) {
          const double pcq = p_cq[static_cast<std::size_t>(c) * nq + q];
          const double pvq = p_vq[static_cast<std::size_t>(v) * nq + q];
          r.anchoring += pcvq * std::log(pcvq * p_q[q] / (pcq * pvq));
        }
      }

  // H(C|Q) = H(C,Q) - H(Q); H(C|V,Q) = H(C,V,Q) - H(V,Q).
  double h_cq = 0.0, h_q = 0.0, h_cvq_joint = 0.0, h_vq = 0.0;
  for (double v : p_cq) h_cq -= xlogx(v);
  for (double v : p_q) h_q -= xlogx(v);
  for (double v : p_cvq) h_cvq_joint -= xlogx(v);
  for (double v : p_vq) h_vq -= xlogx(v);
  r.h_c_given_q = h_cq - h_q;
  r.h_c_given_vq = h_cvq_joint - h_vq;

  if (std::fabs(r.anchoring - (r.h_c_given_q - r.h_c_given_vq)) > kIdentityTol)
    throw std::logic_error("conditional MI / entropy-difference identity violated");

  r.objective = r.sufficiency + lambda * r.anchoring;
  return r;
}

}  // namespace vskip
