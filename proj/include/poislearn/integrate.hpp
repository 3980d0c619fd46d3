#pragma once
// Implicit midpoint rule (IMR): x1 = x0 + dt f((x0+x1)/2).
//
// Ground truth and rollouts solve the implicit equation with damped Newton
// (finite-difference Jacobian) and a fixed-point fallback. Training uses a
// fixed number of unrolled fixed-point iterations recorded on the AD tape so
// the step is differentiable in the model parameters.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "poislearn/ad.hpp"
#include "poislearn/tensor.hpp"

namespace poislearn {

using Field = std::function<Vec(const Vec&)>;
using TapeField = std::function<Tape::Id(Tape&, Tape::Id)>;

class StepFailure : public std::runtime_error {
 public:
  StepFailure(Vec x0_, double dt_, double residual_)
      : std::runtime_error("implicit midpoint step failed to converge (dt=" +
                           std::to_string(dt_) + ", residual=" + std::to_string(residual_) + ")"),
        x0(std::move(x0_)),
        dt(dt_),
        residual(residual_) {}

  Vec x0;
  double dt;
  double residual;
};

namespace detail {

inline Vec imr_residual(const Field& f, const Vec& x0, const Vec& x1, double dt) {
  std::size_t n = x0.size();
  Vec mid(n);
  for (std::size_t i = 0; i < n; ++i) mid[i] = 0.5 * (x0[i] + x1[i]);
  Vec fx = f(mid);
  Vec r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = x1[i] - x0[i] - dt * fx[i];
  return r;
}

}  // namespace detail

inline Vec imr_step(const Field& f, const Vec& x0, double dt, double tol = 1e-12) {
  if (dt <= 0) throw std::invalid_argument("imr_step: dt must be positive");
  const std::size_t n = x0.size();

  // Explicit Euler predictor.
  Vec x1 = x0;
  {
    Vec f0 = f(x0);
    if (all_finite(f0)) {
      for (std::size_t i = 0; i < n; ++i) x1[i] += dt * f0[i];
    }
  }

  Vec r = detail::imr_residual(f, x0, x1, dt);
  double rn = max_abs(r);
  if (all_finite(r) && rn <= tol) return x1;

  // Damped Newton on F(x1) = x1 - x0 - dt f((x0+x1)/2).
  for (int it = 0; it < 50 && all_finite(r); ++it) {
    if (rn <= tol) return x1;
    Vec mid(n);
    for (std::size_t i = 0; i < n; ++i) mid[i] = 0.5 * (x0[i] + x1[i]);
    Tensor jac(static_cast<int>(n), static_cast<int>(n));
    bool jac_ok = true;
    for (std::size_t j = 0; j < n && jac_ok; ++j) {
      double h = 1e-7 * (1.0 + std::fabs(mid[j]));
      Vec mp = mid, mm = mid;
      mp[j] += h;
      mm[j] -= h;
      Vec fp = f(mp), fm = f(mm);
      if (!all_finite(fp) || !all_finite(fm)) {
        jac_ok = false;
        break;
      }
      for (std::size_t i = 0; i < n; ++i) {
        double df = (fp[i] - fm[i]) / (2.0 * h);
        // dF_i/dx1_j = delta_ij - (dt/2) df_i/dmid_j
        jac(static_cast<int>(i), static_cast<int>(j)) =
            (i == j ? 1.0 : 0.0) - 0.5 * dt * df;
      }
    }
    if (!jac_ok) break;

    Vec delta;
    try {
      delta = solve_linear(jac, r);
    } catch (const std::runtime_error&) {
      break;  // singular Jacobian: fall back to fixed point
    }

    double lambda = 1.0;
    bool accepted = false;
    for (int back = 0; back < 8; ++back) {
      Vec cand(n);
      for (std::size_t i = 0; i < n; ++i) cand[i] = x1[i] - lambda * delta[i];
      Vec rc = detail::imr_residual(f, x0, cand, dt);
      double rcn = max_abs(rc);
      if (all_finite(rc) && rcn < rn) {
        x1 = std::move(cand);
        r = std::move(rc);
        rn = rcn;
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!accepted) break;
  }
  if (all_finite(r) && rn <= tol) return x1;

  // Fixed-point fallback.
  x1 = x0;
  double best = INFINITY;
  for (int it = 0; it < 200; ++it) {
    Vec mid(n);
    for (std::size_t i = 0; i < n; ++i) mid[i] = 0.5 * (x0[i] + x1[i]);
    Vec fx = f(mid);
    if (!all_finite(fx)) break;
    Vec next(n);
    for (std::size_t i = 0; i < n; ++i) next[i] = x0[i] + dt * fx[i];
    Vec rr = detail::imr_residual(f, x0, next, dt);
    double rrn = max_abs(rr);
    x1 = std::move(next);
    if (!all_finite(rr)) break;
    best = std::min(best, rrn);
    if (rrn <= tol) return x1;
  }
  throw StepFailure(x0, dt, best);
}

// Fixed-point iteration x <- x0 + dt f((x0 + x)/2), unrolled `iters` times on
// the tape starting from x = x0.
inline Tape::Id imr_step_unrolled(Tape& t, const TapeField& f, Tape::Id x0, double dt,
                                  int iters) {
  if (iters < 1) throw std::invalid_argument("imr_step_unrolled: iters must be >= 1");
  Tape::Id half = t.constant(0.5);
  Tape::Id dtc = t.constant(dt);
  Tape::Id x = x0;
  for (int it = 0; it < iters; ++it) {
    Tape::Id mid = t.mul(t.add(x0, x), half);
    x = t.add(x0, t.mul(f(t, mid), dtc));
  }
  return x;
}

// Plain (untaped) twin of imr_step_unrolled; same arithmetic order.
inline Vec imr_step_unrolled_plain(const Field& f, const Vec& x0, double dt, int iters) {
  Vec x = x0;
  std::size_t n = x0.size();
  for (int it = 0; it < iters; ++it) {
    Vec mid(n);
    for (std::size_t i = 0; i < n; ++i) mid[i] = (x0[i] + x[i]) * 0.5;
    Vec fx = f(mid);
    for (std::size_t i = 0; i < n; ++i) x[i] = x0[i] + fx[i] * dt;
  }
  return x;
}

struct Trajectory {
  std::string system;
  std::uint64_t seed = 0;
  double dt = 0;
  std::vector<Vec> states;
  // Set when stepping failed or a guard truncated the trajectory; the index
  // counts accepted states.
  std::optional<std::size_t> failure_index;
};

// Repeated imr_step from x0. A failing step truncates the trajectory; an
// optional guard predicate drops the first out-of-range state and stops.
inline Trajectory simulate(const Field& f, const Vec& x0, double dt, int steps,
                           const std::function<bool(const Vec&)>& keep = {}) {
  if (steps < 1) throw std::invalid_argument("simulate: steps must be >= 1");
  Trajectory tr;
  tr.dt = dt;
  tr.states.push_back(x0);
  Vec x = x0;
  for (int k = 0; k < steps; ++k) {
    Vec next;
    try {
      next = imr_step(f, x, dt);
    } catch (const StepFailure&) {
      if (k == 0) throw;
      tr.failure_index = tr.states.size();
      break;
    }
    if (keep && !keep(next)) {
      tr.failure_index = tr.states.size();
      break;
    }
    tr.states.push_back(next);
    x = std::move(next);
  }
  return tr;
}

}  // namespace poislearn
