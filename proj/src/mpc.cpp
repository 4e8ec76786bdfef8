#include "mlgp/mpc.hpp"

#include <cmath>
#include <numbers>
#include <limits>
#include <stdexcept>

namespace mlgp {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;
using ad::Tape;
using ad::Var;

// ---------------------------------------------------------------------------
// Planner models

GpPlannerModel::GpPlannerModel(const MlgpModel& model, const Env& env,
                               const LatentPosterior& posterior)
    : model_(&model), env_(&env), cache_(model.make_predictor_cache()),
      latent_mean_(posterior.mean.row(0)) {
  if (posterior.dim() != model.config().latent_dim) {
    throw std::invalid_argument("planner: latent dimension mismatch");
  }
}

const GpPlannerModel::BoundConstants& GpPlannerModel::bound(Tape& t) const {
  if (bound_tape_uid_ == t.uid()) return bound_constants_;
  BoundConstants b;
  b.z = t.constant(model_->inducing().Z);
  b.log_sf2 = t.constant(model_->kernel().log_signal_variance);
  b.log_ls = t.constant(model_->kernel().log_lengthscales);
  b.l = t.constant(cache_.L);
  b.b = t.constant(cache_.B);
  for (const auto& g : cache_.G) b.g.push_back(t.constant(g));
  b.noise = t.constant(model_->log_noise().array().exp().matrix());
  const Standardization& st = model_->stats();
  b.x_mean = t.constant(st.x_mean);
  b.x_inv_std = t.constant(st.x_std.cwiseInverse());
  if (model_->config().control_dim > 0) {
    b.c_mean = t.constant(st.c_mean);
    b.c_inv_std = t.constant(st.c_std.cwiseInverse());
  }
  b.y_mean = t.constant(st.y_mean);
  b.y_std = t.constant(st.y_std);
  if (model_->config().latent_dim > 0) {
    b.latent = t.constant(latent_mean_);
  }
  bound_constants_ = b;
  bound_tape_uid_ = t.uid();
  return bound_constants_;
}

Var GpPlannerModel::propagate(Tape& t, Var states, Var controls,
                              const MatrixXd& noise) const {
  const auto s = static_cast<int>(t.val(states).rows());
  const BoundConstants& c = bound(t);
  const int d_dim = model_->config().state_dim;

  Var x_aug = t.mul(t.sub(states, t.broadcast_row(c.x_mean, s)),
                    t.broadcast_row(c.x_inv_std, s));
  if (model_->config().control_dim > 0) {
    Var cs = t.mul(t.sub(controls, t.broadcast_row(c.c_mean, s)),
                   t.broadcast_row(c.c_inv_std, s));
    x_aug = t.hcat(x_aug, cs);
  }
  if (model_->config().latent_dim > 0) {
    x_aug = t.hcat(x_aug, t.broadcast_row(c.latent, s));
  }

  Var kzx = kernel_matrix_var(t, c.z, x_aug, c.log_sf2, c.log_ls);
  Var a = t.trisolve(c.l, kzx);
  Var mean = t.matmul(t.transpose(a), c.b);  // s x D, standardized
  Var kdiag = kernel_diag_var(t, s, c.log_sf2);
  Var qff = t.transpose(t.col_sum(t.square(a)));
  Var var;
  for (int d = 0; d < d_dim; ++d) {
    Var w = t.matmul(t.transpose(c.g[d]), a);
    Var sterm = t.transpose(t.col_sum(t.square(w)));
    Var vd = t.clamp_min(t.add(t.sub(kdiag, qff), sterm), kVarianceFloor);
    var = var.valid() ? t.hcat(var, vd) : vd;
  }
  Var var_total = t.add(var, t.broadcast_row(c.noise, s));

  Var y_scale = t.broadcast_row(c.y_std, s);
  Var delta =
      t.add(t.mul(mean, y_scale), t.broadcast_row(c.y_mean, s));
  Var std_nat = t.mul(t.sqrt(var_total), y_scale);
  return t.add(states, t.add(delta, t.mul(std_nat, t.constant(noise))));
}

Var GpPlannerModel::step_cost(Tape& t, Var states) const {
  return env_->cost_var(t, states);
}

Var CartPoleOracleModel::propagate(Tape& t, Var states, Var controls,
                                   const MatrixXd& /*noise*/) const {
  return cartpole_step_var(t, states, controls, cfg_, substeps_);
}

Var CartPoleOracleModel::step_cost(Tape& t, Var states) const {
  return env_.cost_var(t, states);
}

// ---------------------------------------------------------------------------
// Rollout and planning

namespace {

struct RolloutVars {
  Var cost;                      // 1 x 1
  std::vector<Var> step_states;  // H entries, S x D each
};

/// Particle rollout over the horizon for natural-unit controls already on
/// the tape (H x K rows).
RolloutVars build_rollout(Tape& t, const PlannerModel& model,
                          const VectorXd& x0, Var controls,
                          const std::vector<MatrixXd>& noise, int particles) {
  const int horizon = static_cast<int>(t.val(controls).rows());
  const int k = model.control_dim();
  Var states = t.constant(x0.transpose().replicate(particles, 1));
  RolloutVars out;
  Var total;
  for (int step = 0; step < horizon; ++step) {
    Var c_row = t.slice(controls, step, 0, 1, k);
    Var c_batch = t.broadcast_row(c_row, particles);
    states = model.propagate(t, states, c_batch, noise[step]);
    out.step_states.push_back(states);
    Var cost_step = t.sum(model.step_cost(t, states));
    total = total.valid() ? t.add(total, cost_step) : cost_step;
  }
  out.cost = t.scale(total, 1.0 / particles);
  return out;
}

std::vector<MatrixXd> draw_noise(int horizon, int particles, int dim,
                                 Rng& rng, double scale) {
  std::vector<MatrixXd> noise(horizon);
  for (auto& n : noise) {
    n.resize(particles, dim);
    for (int i = 0; i < particles; ++i) {
      for (int j = 0; j < dim; ++j) n(i, j) = scale * rng.normal();
    }
  }
  return noise;
}

void extract_moments(const Tape& t, const RolloutVars& vars, MatrixXd& means,
                     MatrixXd& vars_out) {
  const int horizon = static_cast<int>(vars.step_states.size());
  if (horizon == 0) return;
  const auto d = t.val(vars.step_states[0]).cols();
  means.resize(horizon, d);
  vars_out.resize(horizon, d);
  for (int step = 0; step < horizon; ++step) {
    const MatrixXd& s = t.val(vars.step_states[step]);
    means.row(step) = s.colwise().mean();
    vars_out.row(step) = (s.rowwise() - means.row(step).eval())
                             .array()
                             .square()
                             .colwise()
                             .sum() /
                         static_cast<double>(s.rows());
  }
}

double atanh_clamped(double x) {
  const double y = std::clamp(x, -1.0 + 1e-9, 1.0 - 1e-9);
  return 0.5 * std::log((1.0 + y) / (1.0 - y));
}

void check_mpc_config(const MpcConfig& cfg, const PlannerModel& model) {
  if (cfg.horizon < 1 || cfg.particles < 1 || cfg.restarts < 1) {
    throw std::invalid_argument(
        "mpc: horizon, particles, restarts must be >= 1");
  }
  if (cfg.control_lower.size() != model.control_dim() ||
      cfg.control_upper.size() != model.control_dim() ||
      ((cfg.control_upper - cfg.control_lower).array() <= 0).any()) {
    throw std::invalid_argument("mpc: invalid control bounds");
  }
}

}  // namespace

RolloutResult rollout_cost(const PlannerModel& model, const VectorXd& x0,
                           const MatrixXd& controls, const MpcConfig& cfg,
                           Rng& rng) {
  check_mpc_config(cfg, model);
  if (controls.rows() != cfg.horizon ||
      controls.cols() != model.control_dim()) {
    throw std::invalid_argument("mpc: control sequence shape mismatch");
  }
  const auto noise = draw_noise(cfg.horizon, cfg.particles,
                                model.state_dim(), rng, cfg.noise_scale);
  Tape t;
  RolloutVars vars =
      build_rollout(t, model, x0, t.constant(controls), noise, cfg.particles);
  RolloutResult out;
  out.cost = t.val(vars.cost)(0, 0);
  if (!std::isfinite(out.cost)) {
    throw std::runtime_error("mpc: non-finite rollout cost");
  }
  extract_moments(t, vars, out.state_means, out.state_vars);
  return out;
}

Plan plan(const PlannerModel& model, const VectorXd& x0, const MpcConfig& cfg,
          Rng& rng, const Plan* previous) {
  check_mpc_config(cfg, model);
  const int k = model.control_dim();
  const int h = cfg.horizon;
  const RowVectorXd mid =
      0.5 * (cfg.control_upper + cfg.control_lower).transpose();
  const RowVectorXd half =
      0.5 * (cfg.control_upper - cfg.control_lower).transpose();

  // common random numbers shared by every candidate in this planning call
  const auto noise =
      draw_noise(h, cfg.particles, model.state_dim(), rng, cfg.noise_scale);

  Plan best;
  double best_cost = std::numeric_limits<double>::infinity();

  // one descent run from a given unconstrained initialization
  auto descend = [&](MatrixXd u, int iterations, double lr) {
    AdamConfig adam_cfg = cfg.adam;
    adam_cfg.lr = lr;
    Adam optimizer(adam_cfg);
    for (int iter = 0; iter <= iterations; ++iter) {
      Tape t;
      Var u_var = t.leaf(u);
      Var bounded =
          t.add(t.mul(t.tanh(u_var), t.broadcast_row(t.constant(half), h)),
                t.broadcast_row(t.constant(mid), h));
      RolloutVars vars;
      double cost = std::numeric_limits<double>::quiet_NaN();
      try {
        vars = build_rollout(t, model, x0, bounded, noise, cfg.particles);
        cost = t.val(vars.cost)(0, 0);
      } catch (const std::runtime_error&) {
        return;  // diverged candidate; keep the best finite iterate
      }
      if (std::isfinite(cost) && cost < best_cost) {
        best_cost = cost;
        best.controls = t.val(bounded);
        best.expected_cost = cost;
        extract_moments(t, vars, best.state_means, best.state_vars);
      }
      if (iter == iterations || !std::isfinite(cost)) return;
      t.backward(vars.cost);
      const MatrixXd g = t.grad(u_var);
      if (!g.allFinite()) return;
      std::vector<MatrixXd*> params{&u};
      std::vector<const MatrixXd*> grads{&g};
      optimizer.step(params, grads);
    }
  };

  auto to_unconstrained = [&](const MatrixXd& controls) {
    MatrixXd u(h, k);
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < k; ++j) {
        u(i, j) = atanh_clamped((controls(i, j) - mid(j)) / half(j));
      }
    }
    return u;
  };

  const bool warm = cfg.warm_start && previous != nullptr &&
                    previous->controls.rows() == h;
  if (warm) {
    // previous solution shifted one step, last control repeated; already
    // near-optimal, so only a gentle refinement
    MatrixXd shifted(h, k);
    for (int step = 0; step < h; ++step) {
      shifted.row(step) = previous->controls.row(std::min(step + 1, h - 1));
    }
    descend(to_unconstrained(shifted), cfg.warm_iterations, cfg.warm_lr);
  }

  for (int restart = warm ? 1 : 0; restart < cfg.restarts; ++restart) {
    MatrixXd u(h, k);
    if (restart % 2 == 0) {
      for (int i = 0; i < h; ++i) {
        for (int j = 0; j < k; ++j) u(i, j) = rng.normal();
      }
    } else {
      // oscillatory initialization; energy-pumping sequences live here
      for (int j = 0; j < k; ++j) {
        const double amp = rng.uniform(0.5, 2.0);
        const double omega = rng.uniform(2.0, 8.0);
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        for (int i = 0; i < h; ++i) {
          u(i, j) = amp * std::sin(omega * 0.1 * i + phase);
        }
      }
    }
    descend(std::move(u), cfg.iterations, cfg.adam.lr);
  }

  if (std::isfinite(best_cost)) {
    // polish the winner
    descend(to_unconstrained(best.controls), cfg.warm_iterations, cfg.warm_lr);
  }

  if (!std::isfinite(best_cost)) {
    throw std::runtime_error("mpc: no finite candidate found");
  }
  return best;
}

Trajectory run_mpc_episode(const Env& env, const PlannerModel& model,
                           const VectorXd& x0, int episode_steps,
                           const MpcConfig& cfg, Rng& env_rng, Rng& plan_rng,
                           int task_id, const StepHook& after_step) {
  if (episode_steps < 1) {
    throw std::invalid_argument("mpc: episode needs at least one step");
  }
  MatrixXd visited(episode_steps + 1, env.state_dim());
  MatrixXd controls(episode_steps, env.control_dim());
  visited.row(0) = x0.transpose();

  Plan previous;
  bool have_plan = false;
  VectorXd state = x0;
  for (int step = 0; step < episode_steps; ++step) {
    Plan p =
        plan(model, state, cfg, plan_rng, have_plan ? &previous : nullptr);
    const VectorXd control = p.controls.row(0).transpose();
    state = env.step(state, control, env_rng);
    visited.row(step + 1) = state.transpose();
    controls.row(step) = control.transpose();
    previous = std::move(p);
    have_plan = true;
    if (after_step) {
      Trajectory so_far = Trajectory::from_rollout(
          task_id, visited.topRows(step + 2), controls.topRows(step + 1));
      after_step(step, so_far);
    }
  }
  return Trajectory::from_rollout(task_id, visited, controls);
}

}  // namespace mlgp
