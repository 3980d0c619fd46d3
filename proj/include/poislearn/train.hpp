#pragma once
// Dataset assembly, one-step losses, Adam, the training loop, and rollout
// comparison against ground truth.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "poislearn/ad.hpp"
#include "poislearn/integrate.hpp"
#include "poislearn/nets.hpp"
#include "poislearn/rng.hpp"
#include "poislearn/systems.hpp"
#include "poislearn/tensor.hpp"

namespace poislearn {

// Learning-rate factor for the bivector net relative to the energy net.
constexpr double kBivectorLrFactor = 0.1;

struct TrainConfig {
  SystemName system = SystemName::RB;
  Flavor flavor = Flavor::WJ;
  int n_train_traj = 200;
  int n_gt_traj = 400;
  double dt = 0.05;
  int steps = 100;
  int hidden = 64;
  double lr = 1e-3;
  int batch_size = 128;
  int epochs = 300;
  double jacobi_weight = 1.0;
  int unroll_iters = 10;
  std::uint64_t seed = 0;
  double val_fraction = 0.2;

  static TrainConfig defaults_for(SystemName system, Flavor flavor) {
    TrainConfig c;
    c.system = system;
    c.flavor = flavor;
    if (system == SystemName::HT) c.n_train_traj = 300;
    return c;
  }

  void validate() const {
    if (n_train_traj < 1) throw std::invalid_argument("n_train_traj must be >= 1");
    if (n_gt_traj < 1) throw std::invalid_argument("n_gt_traj must be >= 1");
    if (dt <= 0) throw std::invalid_argument("dt must be positive");
    if (steps < 1) throw std::invalid_argument("steps must be >= 1");
    if (hidden < 1) throw std::invalid_argument("hidden must be >= 1");
    if (lr <= 0) throw std::invalid_argument("lr must be positive");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (jacobi_weight < 0) throw std::invalid_argument("jacobi_weight must be >= 0");
    if (unroll_iters < 1) throw std::invalid_argument("unroll_iters must be >= 1");
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
      throw std::invalid_argument("val_fraction must lie in (0, 1)");
    if (flavor == Flavor::IJ && system_dim(system) != 3)
      throw std::invalid_argument("flavor ij needs a 3-dimensional system");
  }
};

// Guard used for ground-truth simulation; only the Shivamoggi system needs a
// coordinate cap (its solutions can blow up in finite time).
inline std::function<bool(const Vec&)> state_guard(SystemName system) {
  if (system != SystemName::Sh) return {};
  return [](const Vec& x) {
    for (double v : x)
      if (!std::isfinite(v) || std::fabs(v) > kShCoordCap) return false;
    return true;
  };
}

struct StepPair {
  Vec x0, x1;
};

struct Dataset {
  std::vector<StepPair> pairs;
  std::vector<int> train_idx, val_idx;
  int discarded_trajectories = 0;  // failed at the first step
  int truncated_trajectories = 0;  // stopped early by failure or guard
};

inline Dataset build_dataset(const TrainConfig& cfg) {
  cfg.validate();
  auto spec = SystemSpec::make(cfg.system);
  auto gt = ground_truth(spec);
  auto ics =
      sample_initial_conditions(spec, cfg.n_train_traj, derive_seed(cfg.seed, Stream::TrainIc));
  auto keep = state_guard(cfg.system);

  Dataset ds;
  for (const auto& x0 : ics) {
    Trajectory tr;
    try {
      tr = simulate(gt.field, x0, cfg.dt, cfg.steps, keep);
    } catch (const StepFailure&) {
      ++ds.discarded_trajectories;
      continue;
    }
    if (tr.failure_index.has_value()) ++ds.truncated_trajectories;
    for (std::size_t k = 0; k + 1 < tr.states.size(); ++k)
      ds.pairs.push_back({tr.states[k], tr.states[k + 1]});
  }
  if (ds.pairs.empty()) throw std::runtime_error("dataset is empty: every trajectory failed");

  int n = static_cast<int>(ds.pairs.size());
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(cfg.seed, Stream::Split);
  rng.shuffle(idx);
  int n_val = static_cast<int>(std::lround(cfg.val_fraction * n));
  n_val = std::clamp(n_val, 1, n - 1);
  ds.val_idx.assign(idx.begin(), idx.begin() + n_val);
  ds.train_idx.assign(idx.begin() + n_val, idx.end());
  return ds;
}

// One-step prediction loss |x1_hat - x1|^2 on the tape; SJ adds the weighted
// squared Jacobiator at x0.
inline Tape::Id step_loss_on_tape(Tape& t, const ModelSetOnTape& staged, const StepPair& pair,
                                  const TrainConfig& cfg) {
  Tape::Id x0 = t.leaf(Tensor::col_vec(pair.x0));
  Tape::Id x1 = t.leaf(Tensor::col_vec(pair.x1));
  TapeField f = [&staged](Tape& tt, Tape::Id x) { return field_on_tape(tt, staged, x); };
  Tape::Id pred = imr_step_unrolled(t, f, x0, cfg.dt, cfg.unroll_iters);
  Tape::Id loss = t.sum(t.square(t.sub(pred, x1)));
  if (cfg.flavor == Flavor::SJ && cfg.jacobi_weight > 0) {
    Tape::Id jac = jacobiator_sq_sum_on_tape(t, staged, x0);
    loss = t.add(loss, t.mul(jac, t.constant(cfg.jacobi_weight)));
  }
  return loss;
}

// Plain (untaped) twin of step_loss_on_tape, for validation scoring.
inline double step_loss_plain(const ModelSet& ms, const StepPair& pair,
                              const TrainConfig& cfg) {
  Field f = [&ms](const Vec& x) { return model_field(ms, x); };
  Vec pred = imr_step_unrolled_plain(f, pair.x0, cfg.dt, cfg.unroll_iters);
  double loss = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    double d = pred[i] - pair.x1[i];
    loss += d * d;
  }
  if (cfg.flavor == Flavor::SJ && cfg.jacobi_weight > 0)
    loss += cfg.jacobi_weight * model_jacobiator_sq(ms, pair.x0);
  return loss;
}

struct AdamState {
  std::vector<Vec> m, v;
  long step = 0;

  explicit AdamState(const std::vector<Tensor*>& params) {
    for (const Tensor* p : params) {
      m.emplace_back(p->d.size(), 0.0);
      v.emplace_back(p->d.size(), 0.0);
    }
  }
};

// Standard Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8).
// lr_scale, when non-empty, gives a per-parameter-group learning-rate factor
// (parameter groups in the model_params() order).
inline void adam_update(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
                        AdamState& st, double lr, const std::vector<double>& lr_scale = {}) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  if (params.size() != grads.size() || params.size() != st.m.size())
    throw std::invalid_argument("adam_update: parameter/gradient count mismatch");
  if (!lr_scale.empty() && lr_scale.size() != params.size())
    throw std::invalid_argument("adam_update: lr_scale size mismatch");
  st.step += 1;
  double c1 = 1.0 - std::pow(b1, static_cast<double>(st.step));
  double c2 = 1.0 - std::pow(b2, static_cast<double>(st.step));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& w = *params[p];
    const Tensor& g = grads[p];
    if (!w.same_shape(g)) throw std::invalid_argument("adam_update: gradient shape mismatch");
    double lr_p = lr_scale.empty() ? lr : lr * lr_scale[p];
    for (std::size_t i = 0; i < w.d.size(); ++i) {
      double gi = g.d[i];
      st.m[p][i] = b1 * st.m[p][i] + (1 - b1) * gi;
      st.v[p][i] = b2 * st.v[p][i] + (1 - b2) * gi * gi;
      double mhat = st.m[p][i] / c1;
      double vhat = st.v[p][i] / c2;
      w.d[i] -= lr_p * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

struct EpochRow {
  int epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double val_jacobiator = 0;
};

struct TrainResult {
  ModelSet best;
  int best_epoch = -1;
  double best_val_loss = INFINITY;
  std::vector<EpochRow> curve;
  int skipped_samples = 0;  // non-finite per-sample losses excluded from batches
  int skipped_updates = 0;  // batches whose update was dropped (non-finite grads)
  bool aborted = false;     // validation loss non-finite three epochs running
  int dataset_pairs = 0;
  int discarded_trajectories = 0;
  int truncated_trajectories = 0;
};

namespace detail {

struct ValScore {
  double loss = 0;
  double jacobiator = 0;
};

inline ValScore validation_score(const ModelSet& ms, const Dataset& ds,
                                 const TrainConfig& cfg) {
  ValScore out;
  double loss_sum = 0, jac_sum = 0;
  int counted = 0;
  for (int i : ds.val_idx) {
    double l = step_loss_plain(ms, ds.pairs[static_cast<std::size_t>(i)], cfg);
    if (!std::isfinite(l)) {
      out.loss = l;  // poison: a non-finite validation loss must be visible
      continue;
    }
    loss_sum += l;
    jac_sum += model_jacobiator_sq(ms, ds.pairs[static_cast<std::size_t>(i)].x0);
    ++counted;
  }
  if (!std::isfinite(out.loss) || counted == 0) {
    out.loss = NAN;
    out.jacobiator = NAN;
    return out;
  }
  out.loss = loss_sum / counted;
  out.jacobiator = std::sqrt(jac_sum / counted);
  return out;
}

}  // namespace detail

inline TrainResult train(const TrainConfig& cfg) {
  cfg.validate();
  Dataset ds = build_dataset(cfg);

  int n = system_dim(cfg.system);
  ModelSet models = init_models(cfg.flavor, n, cfg.hidden, cfg.seed);

  TrainResult res;
  res.dataset_pairs = static_cast<int>(ds.pairs.size());
  res.discarded_trajectories = ds.discarded_trajectories;
  res.truncated_trajectories = ds.truncated_trajectories;

  AdamState adam(model_params(models));
  // Adam steps have unit scale regardless of gradient magnitude, so a freely
  // trained bivector net wanders while the energy net is still converging.
  // In even dimensions the bivector starts at the canonical pairing and the
  // slower group keeps it anchored until the dynamics itself pushes it; the
  // energy net carries no such ambiguity and trains at full rate. Odd
  // dimensions have no such anchor and train everything at full rate.
  std::vector<double> lr_groups;
  if (models.flavor != Flavor::IJ && models.n % 2 == 0) {
    lr_groups.assign(8, 1.0);
    for (std::size_t p = 4; p < 8; ++p) lr_groups[p] = kBivectorLrFactor;
  }
  Rng batch_rng(cfg.seed, Stream::Batches);
  std::vector<int> order = ds.train_idx;

  int bad_val_streak = 0;
  Tape tape;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    batch_rng.shuffle(order);

    double train_sum = 0;
    int train_count = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      tape.clear();
      ModelSetOnTape staged = stage_models(tape, models);

      Tape::Id total = -1;
      int included = 0;
      for (std::size_t k = start; k < stop; ++k) {
        Tape::Id li =
            step_loss_on_tape(tape, staged, ds.pairs[static_cast<std::size_t>(order[k])], cfg);
        if (!std::isfinite(tape.value(li).s())) {
          ++res.skipped_samples;
          continue;
        }
        total = included == 0 ? li : tape.add(total, li);
        ++included;
      }
      if (included == 0) {
        ++res.skipped_updates;
        continue;
      }
      Tape::Id mean = tape.div(total, tape.constant(static_cast<double>(included)));
      train_sum += tape.value(mean).s() * included;
      train_count += included;

      Gradients grads = tape.backward(mean);
      std::vector<Tape::Id> pids = staged_param_ids(staged);
      std::vector<Tensor> gvals;
      gvals.reserve(pids.size());
      bool finite = true;
      for (Tape::Id id : pids) {
        gvals.push_back(grads.get(id));
        if (!all_finite(gvals.back())) finite = false;
      }
      if (!finite) {
        ++res.skipped_updates;
        continue;
      }
      adam_update(model_params(models), gvals, adam, cfg.lr, lr_groups);
    }

    detail::ValScore val = detail::validation_score(models, ds, cfg);
    EpochRow row;
    row.epoch = epoch;
    row.train_loss = train_count > 0 ? train_sum / train_count : NAN;
    row.val_loss = val.loss;
    row.val_jacobiator = val.jacobiator;
    res.curve.push_back(row);

    if (std::isfinite(val.loss)) {
      bad_val_streak = 0;
      if (val.loss < res.best_val_loss) {
        res.best_val_loss = val.loss;
        res.best_epoch = epoch;
        res.best = models;
      }
    } else {
      ++bad_val_streak;
      if (bad_val_streak >= 3) {
        res.aborted = true;
        break;
      }
    }
  }

  if (res.best_epoch < 0) res.best = models;  // nothing scored finite; keep last state
  return res;
}

// Rollout comparison on a fresh set of initial conditions: pooled per-step
// squared deviations (full state and per part) plus squared drift of each
// conserved quantity along the model rollout.
struct EvalResult {
  std::vector<double> sq_dev_full;
  std::map<std::string, std::vector<double>> part_sq;   // "M" and/or "r"
  std::map<std::string, std::vector<double>> drift_sq;  // invariant name -> samples
  std::vector<Vec> eval_points;                         // subsampled GT states
  int gt_trajectories = 0;
  int rollout_failures = 0;  // model rollouts that truncated or failed outright
};

namespace detail {

inline double part_sq_dev(const Vec& a, const Vec& b, int lo, int hi) {
  double s = 0;
  for (int i = lo; i < hi; ++i) {
    double d = a[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(i)];
    s += d * d;
  }
  return s;
}

// Which slice of the state vector each reported part occupies.
inline std::vector<std::pair<std::string, std::pair<int, int>>> state_parts(SystemName system) {
  int n = system_dim(system);
  switch (system) {
    case SystemName::RB:
    case SystemName::RBdis: return {{"M", {0, n}}};
    case SystemName::Sh: return {{"r", {0, n}}};
    case SystemName::P2D:
    case SystemName::P3D: return {{"r", {0, n / 2}}, {"M", {n / 2, n}}};
    case SystemName::HT: return {{"M", {0, 3}}, {"r", {3, 6}}};
  }
  return {};
}

}  // namespace detail

inline EvalResult evaluate_rollouts(const Field& model, const TrainConfig& cfg) {
  cfg.validate();
  auto spec = SystemSpec::make(cfg.system);
  auto gt = ground_truth(spec);
  auto ics =
      sample_initial_conditions(spec, cfg.n_gt_traj, derive_seed(cfg.seed, Stream::GtIc));
  auto keep = state_guard(cfg.system);

  EvalResult ev;
  auto parts = detail::state_parts(cfg.system);
  std::vector<Vec> gt_states;
  for (const auto& x0 : ics) {
    Trajectory ref;
    try {
      ref = simulate(gt.field, x0, cfg.dt, cfg.steps, keep);
    } catch (const StepFailure&) {
      continue;
    }
    ++ev.gt_trajectories;
    for (const auto& s : ref.states) gt_states.push_back(s);

    Trajectory roll;
    bool failed = false;
    try {
      roll = simulate(model, x0, cfg.dt, cfg.steps, keep);
    } catch (const StepFailure&) {
      failed = true;
    }
    if (failed) {
      ++ev.rollout_failures;
      continue;
    }
    if (roll.failure_index.has_value() || roll.states.size() < ref.states.size())
      ++ev.rollout_failures;

    std::size_t m = std::min(ref.states.size(), roll.states.size());
    for (std::size_t k = 1; k < m; ++k) {
      const Vec& a = roll.states[k];
      const Vec& b = ref.states[k];
      ev.sq_dev_full.push_back(detail::part_sq_dev(a, b, 0, spec.dim));
      for (const auto& part : parts)
        ev.part_sq[part.first].push_back(
            detail::part_sq_dev(a, b, part.second.first, part.second.second));
    }
    for (const auto& q : gt.invariants) {
      Vec q0 = q.value(roll.states[0]);
      for (std::size_t k = 1; k < roll.states.size(); ++k) {
        Vec qk = q.value(roll.states[k]);
        double s = 0;
        for (std::size_t c = 0; c < qk.size(); ++c) {
          double d = qk[c] - q0[c];
          s += d * d;
        }
        ev.drift_sq[q.name].push_back(s);
      }
    }
  }
  if (ev.gt_trajectories == 0)
    throw std::runtime_error("evaluation failed: no ground-truth trajectory survived");

  // Subsample pooled GT states to a bounded set of metric evaluation points.
  const std::size_t cap = 2000;
  std::size_t stride = std::max<std::size_t>(1, gt_states.size() / cap);
  for (std::size_t i = 0; i < gt_states.size(); i += stride)
    ev.eval_points.push_back(std::move(gt_states[i]));
  return ev;
}

inline EvalResult evaluate_gt(const ModelSet& models, const TrainConfig& cfg) {
  if (models.n != system_dim(cfg.system))
    throw std::invalid_argument("checkpoint dimension does not match the system");
  Field model = [&models](const Vec& x) { return model_field(models, x); };
  return evaluate_rollouts(model, cfg);
}

}  // namespace poislearn
