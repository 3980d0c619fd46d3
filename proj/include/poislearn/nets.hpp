#pragma once
// One-hidden-layer softplus networks and the three model flavors built from
// them:
//   wj  -- bivector net L(x) + energy net H(x), no structural constraint
//   sj  -- same nets, trained with a soft Jacobi-identity penalty
//   ij  -- 3D only: J(x) = grad C(x) / phi(x), Jacobi identity holds by
//          construction for any C and positive phi
//
// Input gradients and Hessians of the networks have closed forms, recorded
// on the tape as first-order expressions in the parameters, so the training
// loss never needs second-order AD.

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "poislearn/ad.hpp"
#include "poislearn/rng.hpp"
#include "poislearn/tensor.hpp"

namespace poislearn {

enum class Flavor { WJ, SJ, IJ };

inline const char* flavor_name(Flavor f) {
  switch (f) {
    case Flavor::WJ: return "wj";
    case Flavor::SJ: return "sj";
    case Flavor::IJ: return "ij";
  }
  return "?";
}

inline Flavor parse_flavor(const std::string& s) {
  if (s == "wj") return Flavor::WJ;
  if (s == "sj") return Flavor::SJ;
  if (s == "ij") return Flavor::IJ;
  throw std::invalid_argument("unknown flavor '" + s + "' (expected wj, sj, or ij)");
}

// Lower bound added to softplus(phi(x)) so the ij denominator stays positive.
constexpr double kPhiFloor = 1e-3;

struct MlpParams {
  Tensor w1, b1, w2, b2;

  int in() const { return w1.cols; }
  int hidden() const { return w1.rows; }
  int out() const { return w2.rows; }
  bool empty() const { return w1.empty(); }
};

// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and first
// hidden biases; scattering b1 spreads the softplus operating points so units
// differentiate from the start. The output layer is scaled down by out_gain so
// a network can start near zero and grow only the components the loss asks
// for; its bias starts at zero.
inline MlpParams init_mlp(int in, int hidden, int out, Rng& rng, double out_gain = 1.0) {
  MlpParams p;
  p.w1 = Tensor(hidden, in);
  p.b1 = Tensor(hidden, 1);
  p.w2 = Tensor(out, hidden);
  p.b2 = Tensor(out, 1);
  double s1 = 1.0 / std::sqrt(static_cast<double>(in));
  for (auto& v : p.w1.d) v = rng.uniform(-s1, s1);
  for (auto& v : p.b1.d) v = rng.uniform(-s1, s1);
  double s2 = out_gain / std::sqrt(static_cast<double>(hidden));
  for (auto& v : p.w2.d) v = rng.uniform(-s2, s2);
  return p;
}

// Output-layer gain for the bivector net. Starting the bivector close to its
// bias removes the init-shape imprint: skew fields that reproduce the dynamics
// are not unique, and a large random initial bivector anchors training to an
// arbitrary member of that family.
constexpr double kStructGain = 0.01;

// Canonical (Darboux) upper-triangle entries for even dimension: q_i pairs
// with p_i = x_{i+n/2}. Zero for odd dimension, where no nondegenerate
// canonical form exists.
inline Tensor canonical_upper(int n) {
  Tensor u(upper_count(n), 1);
  if (n % 2 != 0) return u;
  int half = n / 2, idx = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j, ++idx)
      if (j == i + half) u.d[static_cast<std::size_t>(idx)] = 1.0;
  return u;
}

inline Tensor mlp_forward(const MlpParams& p, const Tensor& x) {
  return add(matvec(p.w2, softplus(add(matvec(p.w1, x), p.b1))), p.b2);
}

// Gradient of output row `o` w.r.t. the input:
//   d/dx w2[o].softplus(w1 x + b1) = w1^T (sigmoid(z) .* w2[o])
inline Tensor mlp_input_grad(const MlpParams& p, const Tensor& x, int o) {
  Tensor z = add(matvec(p.w1, x), p.b1);
  return matvec_t(p.w1, mul(sigmoid(z), row(p.w2, o)));
}

// Hessian of scalar output row `o`: w1^T diag(sig(z)(1-sig(z)) .* w2[o]) w1.
inline Tensor mlp_input_hessian(const MlpParams& p, const Tensor& x, int o) {
  Tensor z = add(matvec(p.w1, x), p.b1);
  int h = p.hidden();
  int n = p.in();
  Tensor hess(n, n);
  for (int k = 0; k < h; ++k) {
    double s = sigmoid(z.d[static_cast<std::size_t>(k)]);
    double c = s * (1.0 - s) * p.w2(o, k);
    if (c == 0.0) continue;
    for (int i = 0; i < n; ++i) {
      double wki = p.w1(k, i);
      if (wki == 0.0) continue;
      for (int j = 0; j < n; ++j) hess(i, j) += c * wki * p.w1(k, j);
    }
  }
  return hess;
}

struct ModelSet {
  Flavor flavor = Flavor::WJ;
  int n = 0;
  int hidden = 0;
  std::uint64_t seed = 0;
  MlpParams h;         // energy, out = 1
  MlpParams l;         // bivector upper triangle, out = n(n-1)/2 (wj/sj)
  MlpParams c, phi;    // Casimir and scale nets, out = 1 each (ij)
};

inline ModelSet init_models(Flavor flavor, int n, int hidden, std::uint64_t seed) {
  if (flavor == Flavor::IJ && n != 3) {
    throw std::invalid_argument("ij flavor is 3D-only");
  }
  ModelSet ms;
  ms.flavor = flavor;
  ms.n = n;
  ms.hidden = hidden;
  ms.seed = seed;
  Rng rng(seed, Stream::Weights);
  ms.h = init_mlp(n, hidden, 1, rng);
  if (flavor == Flavor::IJ) {
    ms.c = init_mlp(n, hidden, 1, rng);
    ms.phi = init_mlp(n, hidden, 1, rng);
  } else if (n % 2 == 0) {
    // Anchored start for symplectic candidates: bias at the canonical
    // pairing, weights small enough not to perturb det(L) away from one.
    ms.l = init_mlp(n, hidden, upper_count(n), rng, kStructGain);
    ms.l.b2 = canonical_upper(n);
  } else {
    ms.l = init_mlp(n, hidden, upper_count(n), rng);
  }
  return ms;
}

// Ordered parameter list; the order is part of the optimizer/update contract.
inline std::vector<Tensor*> model_params(ModelSet& ms) {
  std::vector<Tensor*> ps{&ms.h.w1, &ms.h.b1, &ms.h.w2, &ms.h.b2};
  auto push = [&](MlpParams& p) {
    ps.push_back(&p.w1);
    ps.push_back(&p.b1);
    ps.push_back(&p.w2);
    ps.push_back(&p.b2);
  };
  if (ms.flavor == Flavor::IJ) {
    push(ms.c);
    push(ms.phi);
  } else {
    push(ms.l);
  }
  return ps;
}

inline double eval_h(const ModelSet& ms, const Vec& x) {
  return mlp_forward(ms.h, Tensor::col_vec(x)).s();
}

inline Vec grad_h(const ModelSet& ms, const Vec& x) {
  return mlp_input_grad(ms.h, Tensor::col_vec(x), 0).to_vec();
}

// 3D correspondence between a vector field J and a skew matrix L with
// L v = J x v: upper triangle (L01, L02, L12) = (-J2, J1, -J0).
inline Vec j_from_bivector(const Tensor& L) {
  return Vec{-L(1, 2), L(0, 2), -L(0, 1)};
}

inline Tensor bivector_from_j(const Vec& j) {
  Tensor u(3, 1);
  u.d = {-j[2], j[1], -j[0]};
  return skew_from_upper(u);
}

// 4D correspondence L <-> (U, V):
// upper triangle (L01,L02,L03,L12,L13,L23) = (-U1,-U2,-U3,-V3,V2,-V1).
inline void uv_from_bivector(const Tensor& L, std::array<double, 3>& u,
                             std::array<double, 3>& v) {
  u = {-L(0, 1), -L(0, 2), -L(0, 3)};
  v = {-L(2, 3), L(1, 3), -L(1, 2)};
}

inline Tensor bivector_from_uv(const std::array<double, 3>& u, const std::array<double, 3>& v) {
  Tensor t(6, 1);
  t.d = {-u[0], -u[1], -u[2], -v[2], v[1], -v[0]};
  return skew_from_upper(t);
}

inline double phi_effective(const ModelSet& ms, const Tensor& x) {
  return softplus(mlp_forward(ms.phi, x).s()) + kPhiFloor;
}

inline Vec eval_ij_jvec(const ModelSet& ms, const Vec& xv) {
  Tensor x = Tensor::col_vec(xv);
  Tensor gc = mlp_input_grad(ms.c, x, 0);
  double ph = phi_effective(ms, x);
  return Vec{gc.d[0] / ph, gc.d[1] / ph, gc.d[2] / ph};
}

inline Tensor eval_bivector(const ModelSet& ms, const Vec& xv) {
  if (ms.flavor == Flavor::IJ) return bivector_from_j(eval_ij_jvec(ms, xv));
  Tensor x = Tensor::col_vec(xv);
  return skew_from_upper(mlp_forward(ms.l, x));
}

// Third-order array of bivector derivatives: at(i,j,k) = dL_ij/dx_k.
struct Rank3 {
  int n = 0;
  std::vector<double> d;

  Rank3() = default;
  explicit Rank3(int nn) : n(nn), d(static_cast<std::size_t>(nn) * nn * nn, 0.0) {}

  double& at(int i, int j, int k) {
    return d[(static_cast<std::size_t>(i) * n + j) * n + k];
  }
  double at(int i, int j, int k) const {
    return d[(static_cast<std::size_t>(i) * n + j) * n + k];
  }
};

// Strict upper-triangle pair (i,j) for each output slot of the bivector net.
inline std::vector<std::pair<int, int>> upper_pairs(int n) {
  std::vector<std::pair<int, int>> ps;
  ps.reserve(static_cast<std::size_t>(upper_count(n)));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) ps.emplace_back(i, j);
  return ps;
}

inline Rank3 bivector_jacobian(const ModelSet& ms, const Vec& xv) {
  Tensor x = Tensor::col_vec(xv);
  int n = ms.n;
  Rank3 r(n);
  if (ms.flavor == Flavor::IJ) {
    // J = grad C / phi; dJ_i/dx_k = Hc_ik/phi - gc_i * dphi_k / phi^2.
    Tensor gc = mlp_input_grad(ms.c, x, 0);
    Tensor hc = mlp_input_hessian(ms.c, x, 0);
    double raw = mlp_forward(ms.phi, x).s();
    double ph = softplus(raw) + kPhiFloor;
    Tensor gphi = scale(mlp_input_grad(ms.phi, x, 0), sigmoid(raw));
    Tensor dj(3, 3);  // dj(i,k) = dJ_i/dx_k
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k)
        dj(i, k) = hc(i, k) / ph - gc.d[static_cast<std::size_t>(i)] * gphi.d[static_cast<std::size_t>(k)] / (ph * ph);
    // (L01, L02, L12) = (-J2, J1, -J0)
    for (int k = 0; k < 3; ++k) {
      r.at(0, 1, k) = -dj(2, k);
      r.at(1, 0, k) = dj(2, k);
      r.at(0, 2, k) = dj(1, k);
      r.at(2, 0, k) = -dj(1, k);
      r.at(1, 2, k) = -dj(0, k);
      r.at(2, 1, k) = dj(0, k);
    }
    return r;
  }
  Tensor z = add(matvec(ms.l.w1, x), ms.l.b1);
  Tensor sig = sigmoid(z);
  auto pairs = upper_pairs(n);
  for (int o = 0; o < static_cast<int>(pairs.size()); ++o) {
    Tensor g = matvec_t(ms.l.w1, mul(sig, row(ms.l.w2, o)));
    auto [i, j] = pairs[static_cast<std::size_t>(o)];
    for (int k = 0; k < n; ++k) {
      r.at(i, j, k) = g.d[static_cast<std::size_t>(k)];
      r.at(j, i, k) = -g.d[static_cast<std::size_t>(k)];
    }
  }
  return r;
}

// Sum over i<j<l of the squared Jacobiator components
//   T^{ijl} = sum_k L^{kl} dL^{ij}/dx_k + L^{ki} dL^{jl}/dx_k + L^{kj} dL^{li}/dx_k.
inline double jacobiator_sq_sum(const Tensor& L, const Rank3& dL) {
  int n = L.rows;
  double total = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int l = j + 1; l < n; ++l) {
        double t = 0.0;
        for (int k = 0; k < n; ++k) {
          t += L(k, l) * dL.at(i, j, k) + L(k, i) * dL.at(j, l, k) + L(k, j) * dL.at(l, i, k);
        }
        total += t * t;
      }
  return total;
}

inline double model_jacobiator_sq(const ModelSet& ms, const Vec& x) {
  return jacobiator_sq_sum(eval_bivector(ms, x), bivector_jacobian(ms, x));
}

inline Vec model_field(const ModelSet& ms, const Vec& xv) {
  Tensor x = Tensor::col_vec(xv);
  Tensor gh = mlp_input_grad(ms.h, x, 0);
  if (ms.flavor == Flavor::IJ) {
    Tensor gc = mlp_input_grad(ms.c, x, 0);
    Tensor j = div(gc, Tensor::scalar(phi_effective(ms, x)));
    return cross3(j, gh).to_vec();
  }
  Tensor L = skew_from_upper(mlp_forward(ms.l, x));
  return matvec(L, gh).to_vec();
}

// Gauge transformation (L, H) -> (aL, H/a); the induced field is unchanged.
inline void apply_gauge(ModelSet& ms, double a) {
  auto scale_out = [](MlpParams& p, double c) {
    for (auto& v : p.w2.d) v *= c;
    for (auto& v : p.b2.d) v *= c;
  };
  scale_out(ms.h, 1.0 / a);
  if (ms.flavor == Flavor::IJ) {
    scale_out(ms.c, a);
  } else {
    scale_out(ms.l, a);
  }
}

// ---- taped evaluation ----

struct MlpOnTape {
  Tape::Id w1 = -1, b1 = -1, w2 = -1, b2 = -1;
};

struct ModelSetOnTape {
  Flavor flavor = Flavor::WJ;
  int n = 0;
  MlpOnTape h, l, c, phi;
  Tape::Id phi_floor = -1;
};

inline MlpOnTape stage_mlp(Tape& t, const MlpParams& p) {
  return MlpOnTape{t.leaf(p.w1), t.leaf(p.b1), t.leaf(p.w2), t.leaf(p.b2)};
}

inline ModelSetOnTape stage_models(Tape& t, const ModelSet& ms) {
  ModelSetOnTape s;
  s.flavor = ms.flavor;
  s.n = ms.n;
  s.h = stage_mlp(t, ms.h);
  if (ms.flavor == Flavor::IJ) {
    s.c = stage_mlp(t, ms.c);
    s.phi = stage_mlp(t, ms.phi);
    s.phi_floor = t.constant(kPhiFloor);
  } else {
    s.l = stage_mlp(t, ms.l);
  }
  return s;
}

// Ids in the same order as model_params().
inline std::vector<Tape::Id> staged_param_ids(const ModelSetOnTape& s) {
  std::vector<Tape::Id> ids{s.h.w1, s.h.b1, s.h.w2, s.h.b2};
  auto push = [&](const MlpOnTape& p) {
    ids.push_back(p.w1);
    ids.push_back(p.b1);
    ids.push_back(p.w2);
    ids.push_back(p.b2);
  };
  if (s.flavor == Flavor::IJ) {
    push(s.c);
    push(s.phi);
  } else {
    push(s.l);
  }
  return ids;
}

inline Tape::Id mlp_forward(Tape& t, const MlpOnTape& p, Tape::Id x) {
  return t.add(t.matvec(p.w2, t.softplus(t.add(t.matvec(p.w1, x), p.b1))), p.b2);
}

inline Tape::Id mlp_input_grad(Tape& t, const MlpOnTape& p, Tape::Id x, int o) {
  Tape::Id z = t.add(t.matvec(p.w1, x), p.b1);
  return t.matvec_t(p.w1, t.mul(t.sigmoid(z), t.row(p.w2, o)));
}

inline Tape::Id field_on_tape(Tape& t, const ModelSetOnTape& s, Tape::Id x) {
  Tape::Id gh = mlp_input_grad(t, s.h, x, 0);
  if (s.flavor == Flavor::IJ) {
    Tape::Id gc = mlp_input_grad(t, s.c, x, 0);
    Tape::Id ph = t.add(t.softplus(mlp_forward(t, s.phi, x)), s.phi_floor);
    return t.cross3(t.div(gc, ph), gh);
  }
  Tape::Id L = t.skew_from_upper(mlp_forward(t, s.l, x));
  return t.matvec(L, gh);
}

// Taped version of jacobiator_sq_sum for the wj/sj bivector net.
inline Tape::Id jacobiator_sq_sum_on_tape(Tape& t, const ModelSetOnTape& s, Tape::Id x) {
  if (s.flavor == Flavor::IJ) {
    throw std::invalid_argument("jacobiator penalty applies to the bivector net only");
  }
  int n = s.n;
  Tape::Id z = t.add(t.matvec(s.l.w1, x), s.l.b1);
  Tape::Id sig = t.sigmoid(z);
  Tape::Id L = t.skew_from_upper(t.add(t.matvec(s.l.w2, t.softplus(z)), s.l.b2));

  auto pairs = upper_pairs(n);
  int m = static_cast<int>(pairs.size());
  std::vector<Tape::Id> grad(static_cast<std::size_t>(m), -1);
  std::vector<Tape::Id> grad_neg(static_cast<std::size_t>(m), -1);
  std::vector<int> slot(static_cast<std::size_t>(n) * n, -1);
  for (int o = 0; o < m; ++o) {
    grad[static_cast<std::size_t>(o)] =
        t.matvec_t(s.l.w1, t.mul(sig, t.row(s.l.w2, o)));
    auto [i, j] = pairs[static_cast<std::size_t>(o)];
    slot[static_cast<std::size_t>(i) * n + j] = o;
  }
  // d(i,j): gradient vector of L_ij, using antisymmetry below the diagonal.
  auto dgrad = [&](int i, int j) {
    if (i < j) return grad[static_cast<std::size_t>(slot[static_cast<std::size_t>(i) * n + j])];
    int o = slot[static_cast<std::size_t>(j) * n + i];
    Tape::Id& ng = grad_neg[static_cast<std::size_t>(o)];
    if (ng < 0) ng = t.neg(grad[static_cast<std::size_t>(o)]);
    return ng;
  };

  std::vector<Tape::Id> cols(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) cols[static_cast<std::size_t>(k)] = t.col(L, k);

  Tape::Id total = -1;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int l = j + 1; l < n; ++l) {
        Tape::Id term = t.add(t.add(t.dot(cols[static_cast<std::size_t>(l)], dgrad(i, j)),
                                    t.dot(cols[static_cast<std::size_t>(i)], dgrad(j, l))),
                              t.dot(cols[static_cast<std::size_t>(j)], dgrad(l, i)));
        Tape::Id sq = t.square(term);
        total = total < 0 ? sq : t.add(total, sq);
      }
  return total;
}

}  // namespace poislearn
