#pragma once
// Geometric error measures over point sets: Jacobiator norm, 3D/4D
// compatibility defects, symplecticity commutator, normalized determinants,
// conserved-quantity drift, gauge normalization, and the verdict classifier.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "poislearn/integrate.hpp"
#include "poislearn/nets.hpp"
#include "poislearn/systems.hpp"
#include "poislearn/tensor.hpp"
#include "poislearn/train.hpp"

namespace poislearn {

inline double median(std::vector<double> xs) {
  if (xs.empty()) throw std::invalid_argument("median of an empty sample set");
  std::sort(xs.begin(), xs.end());
  std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

using BivectorField = std::function<Tensor(const Vec&)>;
using JField = std::function<Vec(const Vec&)>;

constexpr double kMetricFdStep = 1e-4;

inline Vec curl3_fd(const JField& j, const Vec& x, double h = kMetricFdStep) {
  std::array<Vec, 3> jp, jm;
  for (int k = 0; k < 3; ++k) {
    Vec xp = x, xm = x;
    xp[static_cast<std::size_t>(k)] += h;
    xm[static_cast<std::size_t>(k)] -= h;
    jp[static_cast<std::size_t>(k)] = j(xp);
    jm[static_cast<std::size_t>(k)] = j(xm);
  }
  auto d = [&](int comp, int wrt) {
    return (jp[static_cast<std::size_t>(wrt)][static_cast<std::size_t>(comp)] -
            jm[static_cast<std::size_t>(wrt)][static_cast<std::size_t>(comp)]) /
           (2 * h);
  };
  return {d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1)};
}

// Compatibility defect of two 3D Poisson vectors: J1.curl(J2) - J2.curl(J1).
inline double compat3d_defect(const JField& j1, const JField& j2, const Vec& x) {
  Vec a = j1(x), b = j2(x);
  Vec ca = curl3_fd(j1, x), cb = curl3_fd(j2, x);
  double d = 0;
  for (int i = 0; i < 3; ++i)
    d += a[static_cast<std::size_t>(i)] * cb[static_cast<std::size_t>(i)] -
         b[static_cast<std::size_t>(i)] * ca[static_cast<std::size_t>(i)];
  return d;
}

inline std::vector<double> compat3d_sq_residuals(const JField& j1, const JField& j2,
                                                 const std::vector<Vec>& points) {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& x : points) {
    double d = compat3d_defect(j1, j2, x);
    out.push_back(d * d);
  }
  return out;
}

inline double compat3d_error(const JField& j1, const JField& j2,
                             const std::vector<Vec>& points) {
  if (points.empty()) throw std::invalid_argument("compat3d_error needs points");
  auto sq = compat3d_sq_residuals(j1, j2, points);
  double s = 0;
  for (double v : sq) s += v;
  return s / static_cast<double>(sq.size());
}

// Squared Frobenius norm of the commutator with the canonical bivector.
inline double symplecticity_sq_residual(const Tensor& L) {
  if (L.rows != L.cols || L.rows % 2 != 0)
    throw std::invalid_argument("symplecticity residual needs an even square matrix");
  Tensor can = canonical_bivector(L.rows);
  Tensor c = sub(matmul(L, can), matmul(can, L));
  double f = frobenius(c);
  return f * f;
}

inline std::vector<double> symplecticity_sq_residuals(const BivectorField& L,
                                                      const std::vector<Vec>& points) {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& x : points) out.push_back(symplecticity_sq_residual(L(x)));
  return out;
}

inline double symplecticity_error(const BivectorField& L, const std::vector<Vec>& points) {
  if (points.empty()) throw std::invalid_argument("symplecticity_error needs points");
  auto sq = symplecticity_sq_residuals(L, points);
  double s = 0;
  for (double v : sq) s += v;
  return s / static_cast<double>(sq.size());
}

// 4D compatibility defect of a learned bivector against a reference (U,V)
// pair: U_learned.V_ref + V_learned.U_ref.
inline double compat4d_defect(const Tensor& L, const UVPair& ref, const Vec& x) {
  std::array<double, 3> u, v;
  uv_from_bivector(L, u, v);
  auto ur = ref.u(x);
  auto vr = ref.v(x);
  double d = 0;
  for (int i = 0; i < 3; ++i)
    d += u[static_cast<std::size_t>(i)] * vr[static_cast<std::size_t>(i)] +
         v[static_cast<std::size_t>(i)] * ur[static_cast<std::size_t>(i)];
  return d;
}

inline std::vector<double> compat4d_sq_residuals(const BivectorField& L, const UVPair& ref,
                                                 const std::vector<Vec>& points) {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& x : points) {
    double d = compat4d_defect(L(x), ref, x);
    out.push_back(d * d);
  }
  return out;
}

inline double compat4d_error(const BivectorField& L, const UVPair& ref,
                             const std::vector<Vec>& points) {
  if (points.empty()) throw std::invalid_argument("compat4d_error needs points");
  auto sq = compat4d_sq_residuals(L, ref, points);
  double s = 0;
  for (double v : sq) s += v;
  return s / static_cast<double>(sq.size());
}

// dL_ij/dx_k of an arbitrary bivector field by central differences.
inline Rank3 bivector_jacobian_fd(const BivectorField& L, const Vec& x,
                                  double h = kMetricFdStep) {
  int n = static_cast<int>(x.size());
  Rank3 d(n);
  for (int k = 0; k < n; ++k) {
    Vec xp = x, xm = x;
    xp[static_cast<std::size_t>(k)] += h;
    xm[static_cast<std::size_t>(k)] -= h;
    Tensor Lp = L(xp), Lm = L(xm);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) d.at(i, j, k) = (Lp(i, j) - Lm(i, j)) / (2 * h);
  }
  return d;
}

inline double jacobiator_norm(const BivectorField& L, const std::vector<Vec>& points) {
  if (points.empty()) throw std::invalid_argument("jacobiator_norm needs points");
  double s = 0;
  for (const auto& x : points) s += jacobiator_sq_sum(L(x), bivector_jacobian_fd(L, x));
  return std::sqrt(s / static_cast<double>(points.size()));
}

// Closed-form variant for learned models (exact derivatives, works for IJ).
inline double jacobiator_norm(const ModelSet& ms, const std::vector<Vec>& points) {
  if (points.empty()) throw std::invalid_argument("jacobiator_norm needs points");
  double s = 0;
  for (const auto& x : points) s += model_jacobiator_sq(ms, x);
  return std::sqrt(s / static_cast<double>(points.size()));
}

// Single positive constant a with the median Frobenius norm of a*L_learned
// matching the reference over the evaluation points. Medians keep the gauge
// finite when either structure has singular points in the sample.
inline double gauge_scale(const BivectorField& ref, const BivectorField& learned,
                          const std::vector<Vec>& points) {
  if (points.empty()) throw std::invalid_argument("gauge_scale needs points");
  std::vector<double> nr, nl;
  nr.reserve(points.size());
  nl.reserve(points.size());
  for (const auto& x : points) {
    nr.push_back(frobenius(ref(x)));
    nl.push_back(frobenius(learned(x)));
  }
  double a = median(nr) / median(nl);
  if (!std::isfinite(a) || a <= 0) return 1.0;
  return a;
}

struct DetReport {
  double scale = 1.0;                 // divisor applied to raw determinants
  std::vector<double> normalized;     // signed det / scale, per point
  double median_normalized = NAN;     // symplectic-style summary
  double log10_median_abs = NAN;      // degenerate-style summary; -inf when 0
};

// Determinants of the learned bivector normalized so the reference comes out
// at 1. Degenerate references have (numerically) zero determinant and carry
// no determinant scale of their own; the learned determinants are then
// reported unscaled, which is meaningful once the caller has gauge-matched
// the learned bivector to the reference norm.
inline DetReport determinant_report(const BivectorField& learned, const BivectorField& ref,
                                    const std::vector<Vec>& points) {
  if (points.empty()) throw std::invalid_argument("determinant_report needs points");
  std::vector<double> ref_abs, frob_gauge;
  ref_abs.reserve(points.size());
  frob_gauge.reserve(points.size());
  int n = 0;
  for (const auto& x : points) {
    Tensor R = ref(x);
    n = R.rows;
    ref_abs.push_back(std::fabs(determinant(R)));
    double f = frobenius(R);
    frob_gauge.push_back(std::pow(f * f / n, n / 2.0));
  }
  DetReport out;
  double med_ref = median(ref_abs);
  double med_frob = median(frob_gauge);
  out.scale = med_ref > 1e-12 * med_frob ? med_ref : 1.0;
  if (!(out.scale > 0)) out.scale = 1.0;

  out.normalized.reserve(points.size());
  std::vector<double> abs_norm;
  abs_norm.reserve(points.size());
  for (const auto& x : points) {
    double d = determinant(learned(x)) / out.scale;
    out.normalized.push_back(d);
    abs_norm.push_back(std::fabs(d));
  }
  out.median_normalized = median(out.normalized);
  double m = median(abs_norm);
  out.log10_median_abs = m > 0 ? std::log10(m) : -INFINITY;
  return out;
}

// Median over steps of the squared drift of a conserved quantity from its
// initial value along one trajectory.
inline double casimir_drift(const Trajectory& tr, const NamedQuantity& q) {
  if (tr.states.size() < 2)
    throw std::invalid_argument("casimir_drift needs at least two states");
  Vec q0 = q.value(tr.states[0]);
  std::vector<double> sq;
  sq.reserve(tr.states.size() - 1);
  for (std::size_t k = 1; k < tr.states.size(); ++k) {
    Vec qk = q.value(tr.states[k]);
    double s = 0;
    for (std::size_t c = 0; c < qk.size(); ++c) {
      double d = qk[c] - q0[c];
      s += d * d;
    }
    sq.push_back(s);
  }
  return median(sq);
}

enum class Verdict { HamConsistent, NonHamConsistent, Inconclusive };

inline const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::HamConsistent: return "hamiltonian-consistent";
    case Verdict::NonHamConsistent: return "non-hamiltonian-consistent";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

// Orders flavor errors along the structure ladder WJ -> SJ -> IJ. Errors
// shrinking by at least `margin` at every step vote for a Hamiltonian system,
// growing by at least `margin` for a non-Hamiltonian one.
inline Verdict classify_hamiltonianity(const std::map<Flavor, double>& errors,
                                       double margin = 1.5) {
  if (errors.size() < 2)
    throw std::invalid_argument("classification needs at least two flavor errors");
  std::vector<double> ladder;
  for (Flavor f : {Flavor::WJ, Flavor::SJ, Flavor::IJ}) {
    auto it = errors.find(f);
    if (it == errors.end()) continue;
    if (!std::isfinite(it->second)) return Verdict::Inconclusive;
    ladder.push_back(it->second);
  }
  if (ladder.size() < 2)
    throw std::invalid_argument("classification needs at least two flavor errors");
  bool ham = true, non = true;
  for (std::size_t k = 0; k + 1 < ladder.size(); ++k) {
    double less_structured = ladder[k], more_structured = ladder[k + 1];
    if (!(more_structured * margin <= less_structured)) ham = false;
    if (!(less_structured * margin <= more_structured)) non = false;
  }
  if (ham) return Verdict::HamConsistent;
  if (non) return Verdict::NonHamConsistent;
  return Verdict::Inconclusive;
}

struct MetricsReport {
  std::string system, flavor;
  std::uint64_t seed = 0;
  double delta_M = NAN;   // median squared deviation of the M part
  double delta_r = NAN;   // median squared deviation of the r part
  double traj_error = NAN;  // median squared full-state deviation
  double delta_L = NAN;     // log10 of the median squared structure residual
  double det_L = NAN;
  bool det_is_log = false;
  std::map<std::string, double> casimir_drift;  // delta_M2, delta_r2, ...
  double jacobiator_norm = NAN;
  double gauge_scale = 1.0;
  int gt_trajectories = 0;
  int rollout_failures = 0;
};

namespace detail {

inline std::string drift_key(const std::string& invariant_name) {
  if (invariant_name == "Mr") return "delta_Mdotr";
  return "delta_" + invariant_name;
}

constexpr double kLogFloor = -400.0;

inline double log10_or_floor(double v) {
  if (v > 0) return std::log10(v);
  return kLogFloor;
}

}  // namespace detail

// Per-point values behind the report medians, for histogram dumps.
struct MetricsSamples {
  std::vector<double> det_abs;       // gauge-normalized |det L|, one per point
  std::vector<double> structure_sq;  // empty when no reference structure applies
};

// Assembles every applicable table cell for one trained model; deviations
// come from the rollout comparison, structure metrics from the evaluation
// points, and all bivector comparisons apply gauge normalization first.
inline MetricsReport build_report(const ModelSet& models, const EvalResult& ev,
                                  const TrainConfig& cfg, MetricsSamples* samples = nullptr) {
  if (ev.eval_points.empty()) throw std::invalid_argument("report needs evaluation points");
  auto spec = SystemSpec::make(cfg.system);
  auto gt = ground_truth(spec);

  MetricsReport rep;
  rep.system = system_name(cfg.system);
  rep.flavor = flavor_name(cfg.flavor);
  rep.seed = cfg.seed;
  rep.gt_trajectories = ev.gt_trajectories;
  rep.rollout_failures = ev.rollout_failures;

  if (!ev.sq_dev_full.empty()) rep.traj_error = median(ev.sq_dev_full);
  if (ev.part_sq.count("M") && !ev.part_sq.at("M").empty())
    rep.delta_M = median(ev.part_sq.at("M"));
  if (ev.part_sq.count("r") && !ev.part_sq.at("r").empty())
    rep.delta_r = median(ev.part_sq.at("r"));
  for (const auto& [name, samples] : ev.drift_sq)
    if (!samples.empty()) rep.casimir_drift[detail::drift_key(name)] = median(samples);

  BivectorField ref = gt.bivector;
  BivectorField raw = [&models](const Vec& x) { return eval_bivector(models, x); };
  rep.gauge_scale = gauge_scale(ref, raw, ev.eval_points);

  ModelSet gauged = models;
  apply_gauge(gauged, rep.gauge_scale);
  BivectorField learned = [&gauged](const Vec& x) { return eval_bivector(gauged, x); };

  // Structure residual: 3D compatibility with the reference Poisson vector,
  // symplecticity commutator for canonical systems, pairwise 4D compatibility
  // against all reference structures for the superintegrable system.
  std::vector<double> structure_sq;
  switch (cfg.system) {
    case SystemName::RB:
    case SystemName::RBdis: {
      JField j_learned = [&gauged](const Vec& x) {
        return j_from_bivector(eval_bivector(gauged, x));
      };
      JField j_ref = [&gt](const Vec& x) { return j_from_bivector(gt.bivector(x)); };
      structure_sq = compat3d_sq_residuals(j_learned, j_ref, ev.eval_points);
      break;
    }
    case SystemName::P2D:
    case SystemName::P3D:
      structure_sq = symplecticity_sq_residuals(learned, ev.eval_points);
      break;
    case SystemName::Sh: {
      for (const auto& pair : shivamoggi_poisson_pairs()) {
        auto sq = compat4d_sq_residuals(learned, pair, ev.eval_points);
        structure_sq.insert(structure_sq.end(), sq.begin(), sq.end());
      }
      break;
    }
    case SystemName::HT: break;  // no reference structure metric in 6D
  }
  if (!structure_sq.empty()) rep.delta_L = detail::log10_or_floor(median(structure_sq));
  if (samples) samples->structure_sq = structure_sq;

  if (spec.dim % 2 == 1) {
    rep.det_L = 0.0;  // odd-dimensional skew matrices are singular identically
    rep.det_is_log = false;
    if (samples) samples->det_abs.assign(ev.eval_points.size(), 0.0);
  } else {
    DetReport det = determinant_report(learned, ref, ev.eval_points);
    if (gt.symplectic) {
      rep.det_L = det.median_normalized;
      rep.det_is_log = false;
    } else {
      rep.det_L = det.log10_median_abs;
      rep.det_is_log = true;
    }
    if (samples) {
      samples->det_abs.clear();
      for (double d : det.normalized) samples->det_abs.push_back(std::fabs(d));
    }
  }

  rep.jacobiator_norm = jacobiator_norm(gauged, ev.eval_points);
  return rep;
}

}  // namespace poislearn
