#pragma once

// Information-bottleneck diagnostics on explicit joint tables over
// (C, A, V, Q), computed by exact enumeration in nats. Small finite alphabets
// only; this is a measurement tool, not an estimator.

#include <vector>

namespace vskip {

// p(c, a, v, q) flattened with q fastest-varying.
struct JointTable {
  int nc = 0, na = 0, nv = 0, nq = 0;
  std::vector<double> p;

  double at(int c, int a, int v, int q) const {
    return p[((static_cast<std::size_t>(c) * na + a) * nv + v) * nq + q];
  }
  double& at(int c, int a, int v, int q) {
    return p[((static_cast<std::size_t>(c) * na + a) * nv + v) * nq + q];
  }
};

struct MiReport {
  double sufficiency = 0.0;     // I(C; A)
  double anchoring = 0.0;       // I(C; V | Q)
  double objective = 0.0;       // sufficiency + lambda * anchoring
  double h_c_given_q = 0.0;     // H(C | Q)
  double h_c_given_vq = 0.0;    // H(C | V, Q)
};

// Throws DomainError if the table has negative entries or does not sum to 1
// within 1e-9, and asserts anchoring == H(C|Q) - H(C|V,Q) within 1e-10.
MiReport mi_diagnostic(const JointTable& joint, double lambda);

}  // namespace vskip
