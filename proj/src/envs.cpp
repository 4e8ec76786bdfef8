#include "mlgp/envs.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mlgp {

using Eigen::MatrixXd;
using Eigen::Vector4d;
using Eigen::VectorXd;

namespace {

/// Classic RK4 over one control interval with zero-order-hold controls.
template <typename Deriv>
Vector4d rk4(const Vector4d& state, double dt, int substeps, Deriv&& f) {
  const double h = dt / substeps;
  Vector4d s = state;
  for (int i = 0; i < substeps; ++i) {
    const Vector4d k1 = f(s);
    const Vector4d k2 = f(s + 0.5 * h * k1);
    const Vector4d k3 = f(s + 0.5 * h * k2);
    const Vector4d k4 = f(s + h * k3);
    s += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return s;
}

VectorXd add_noise(const Vector4d& s, double std, Rng& rng) {
  VectorXd out = s;
  for (int i = 0; i < 4; ++i) out(i) += std * rng.normal();
  if (!out.allFinite()) {
    throw std::runtime_error("env: integration diverged to non-finite state");
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Cart-pole

VectorXd CartPole::control_lower() const {
  return VectorXd::Constant(1, -cfg_.force_limit);
}
VectorXd CartPole::control_upper() const {
  return VectorXd::Constant(1, cfg_.force_limit);
}

Vector4d CartPole::derivative(const Vector4d& s, double force) const {
  const double xdot = s(1), th = s(2), thdot = s(3);
  const double sth = std::sin(th), cth = std::cos(th);
  const double mc = cfg_.cart_mass, mp = cfg_.pendulum_mass, l = cfg_.length;
  const double a = force - cfg_.friction * xdot + mp * l * thdot * thdot * sth;
  const double b = cfg_.gravity * sth;
  const double xdd = (a - mp * b * cth) / (mc + mp * sth * sth);
  const double thdd = (b - xdd * cth) / l;
  return {xdot, xdd, thdot, thdd};
}

VectorXd CartPole::step(const VectorXd& state, const VectorXd& control,
                        Rng& rng) const {
  if (state.size() != 4 || control.size() != 1) {
    throw std::invalid_argument("cartpole: bad state/control size");
  }
  const double force =
      std::clamp(control(0), -cfg_.force_limit, cfg_.force_limit);
  const Vector4d next = rk4(state, cfg_.dt, cfg_.substeps,
                            [&](const Vector4d& s) { return derivative(s, force); });
  return add_noise(next, cfg_.noise_std, rng);
}

VectorXd CartPole::sample_initial(Rng& rng) const {
  Vector4d mean(0.0, 0.0, std::numbers::pi, 0.0);  // hanging down
  VectorXd s(4);
  for (int i = 0; i < 4; ++i) s(i) = mean(i) + cfg_.init_std * rng.normal();
  return s;
}

double CartPole::tip_distance(const VectorXd& s) const {
  const double l = cfg_.length;
  const double tip_x = s(0) + l * std::sin(s(2));
  const double tip_y = l * std::cos(s(2));
  return std::sqrt(tip_x * tip_x + (tip_y - l) * (tip_y - l));
}

ad::Var CartPole::cost_var(ad::Tape& t, ad::Var states) const {
  const auto n = static_cast<int>(t.val(states).rows());
  const double l = cfg_.length;
  ad::Var x = t.slice(states, 0, 0, n, 1);
  ad::Var th = t.slice(states, 0, 2, n, 1);
  ad::Var dx = t.add(x, t.scale(t.sin(th), l));
  ad::Var dy = t.shift(t.scale(t.cos(th), l), -l);
  return t.add(t.square(dx), t.square(dy));
}

double CartPole::energy(const VectorXd& s) const {
  const double mc = cfg_.cart_mass, mp = cfg_.pendulum_mass, l = cfg_.length;
  const double xd = s(1), th = s(2), thd = s(3);
  const double kinetic = 0.5 * (mc + mp) * xd * xd +
                         mp * l * xd * thd * std::cos(th) +
                         0.5 * mp * l * l * thd * thd;
  return kinetic + mp * cfg_.gravity * l * std::cos(th);
}

// ---------------------------------------------------------------------------
// Double pendulum (two-link arm, absolute angles from upright)

VectorXd DoublePendulum::control_lower() const {
  return VectorXd::Constant(2, -cfg_.torque_limit);
}
VectorXd DoublePendulum::control_upper() const {
  return VectorXd::Constant(2, cfg_.torque_limit);
}

Vector4d DoublePendulum::derivative(const Vector4d& s, double tau1,
                                    double tau2) const {
  const double th1 = s(0), th2 = s(1), w1 = s(2), w2 = s(3);
  const double m1 = cfg_.m1, m2 = cfg_.m2, l1 = cfg_.l1, l2 = cfg_.l2;
  const double g = cfg_.gravity;
  const double d = th1 - th2;
  const double sd = std::sin(d), cd = std::cos(d);

  // mass matrix and generalized forces; the elbow motor reacts on link 1
  const double m11 = (m1 + m2) * l1 * l1;
  const double m12 = m2 * l1 * l2 * cd;
  const double m22 = m2 * l2 * l2;
  const double q1 = tau1 - tau2;
  const double q2 = tau2;
  const double r1 = q1 - m2 * l1 * l2 * w2 * w2 * sd + (m1 + m2) * g * l1 * std::sin(th1);
  const double r2 = q2 + m2 * l1 * l2 * w1 * w1 * sd + m2 * g * l2 * std::sin(th2);

  const double det = m11 * m22 - m12 * m12;
  const double a1 = (m22 * r1 - m12 * r2) / det;
  const double a2 = (m11 * r2 - m12 * r1) / det;
  return {w1, w2, a1, a2};
}

VectorXd DoublePendulum::step(const VectorXd& state, const VectorXd& control,
                              Rng& rng) const {
  if (state.size() != 4 || control.size() != 2) {
    throw std::invalid_argument("double pendulum: bad state/control size");
  }
  const double t1 = std::clamp(control(0), -cfg_.torque_limit, cfg_.torque_limit);
  const double t2 = std::clamp(control(1), -cfg_.torque_limit, cfg_.torque_limit);
  const Vector4d next =
      rk4(state, cfg_.dt, cfg_.substeps,
          [&](const Vector4d& s) { return derivative(s, t1, t2); });
  return add_noise(next, cfg_.noise_std, rng);
}

VectorXd DoublePendulum::sample_initial(Rng& rng) const {
  Vector4d mean(std::numbers::pi, std::numbers::pi, 0.0, 0.0);  // both down
  VectorXd s(4);
  for (int i = 0; i < 4; ++i) s(i) = mean(i) + cfg_.init_std * rng.normal();
  return s;
}

double DoublePendulum::tip_distance(const VectorXd& s) const {
  const double l1 = cfg_.l1, l2 = cfg_.l2;
  const double tip_x = l1 * std::sin(s(0)) + l2 * std::sin(s(1));
  const double tip_y = l1 * std::cos(s(0)) + l2 * std::cos(s(1));
  const double dy = tip_y - (l1 + l2);
  return std::sqrt(tip_x * tip_x + dy * dy);
}

ad::Var DoublePendulum::cost_var(ad::Tape& t, ad::Var states) const {
  const auto n = static_cast<int>(t.val(states).rows());
  ad::Var th1 = t.slice(states, 0, 0, n, 1);
  ad::Var th2 = t.slice(states, 0, 1, n, 1);
  ad::Var dx = t.add(t.scale(t.sin(th1), cfg_.l1), t.scale(t.sin(th2), cfg_.l2));
  ad::Var dy = t.shift(
      t.add(t.scale(t.cos(th1), cfg_.l1), t.scale(t.cos(th2), cfg_.l2)),
      -(cfg_.l1 + cfg_.l2));
  return t.add(t.square(dx), t.square(dy));
}

double DoublePendulum::energy(const VectorXd& s) const {
  const double m1 = cfg_.m1, m2 = cfg_.m2, l1 = cfg_.l1, l2 = cfg_.l2;
  const double w1 = s(2), w2 = s(3);
  const double kinetic = 0.5 * (m1 + m2) * l1 * l1 * w1 * w1 +
                         0.5 * m2 * l2 * l2 * w2 * w2 +
                         m2 * l1 * l2 * w1 * w2 * std::cos(s(0) - s(1));
  const double potential = (m1 + m2) * cfg_.gravity * l1 * std::cos(s(0)) +
                           m2 * cfg_.gravity * l2 * std::cos(s(1));
  return kinetic + potential;
}

// ---------------------------------------------------------------------------
// Differentiable cart-pole transition

namespace {

/// Column-wise cart-pole dynamics on the tape; states n x 4, forces n x 1.
ad::Var cartpole_deriv_var(ad::Tape& t, ad::Var states, ad::Var forces,
                           const CartPoleConfig& cfg) {
  const auto n = static_cast<int>(t.val(states).rows());
  ad::Var xdot = t.slice(states, 0, 1, n, 1);
  ad::Var th = t.slice(states, 0, 2, n, 1);
  ad::Var thdot = t.slice(states, 0, 3, n, 1);
  ad::Var sth = t.sin(th);
  ad::Var cth = t.cos(th);
  const double mc = cfg.cart_mass, mp = cfg.pendulum_mass, l = cfg.length;

  ad::Var a = t.add(t.sub(forces, t.scale(xdot, cfg.friction)),
                    t.scale(t.mul(t.square(thdot), sth), mp * l));
  ad::Var b = t.scale(sth, cfg.gravity);
  ad::Var denom = t.shift(t.scale(t.square(sth), mp), mc);
  ad::Var xdd = t.div(t.sub(a, t.scale(t.mul(b, cth), mp)), denom);
  ad::Var thdd = t.scale(t.sub(b, t.mul(xdd, cth)), 1.0 / l);
  return t.hcat(t.hcat(xdot, xdd), t.hcat(thdot, thdd));
}

}  // namespace

ad::Var cartpole_step_var(ad::Tape& t, ad::Var states, ad::Var forces,
                          const CartPoleConfig& cfg, int substeps) {
  const double h = cfg.dt / substeps;
  ad::Var s = states;
  for (int i = 0; i < substeps; ++i) {
    ad::Var k1 = cartpole_deriv_var(t, s, forces, cfg);
    ad::Var k2 = cartpole_deriv_var(t, t.add(s, t.scale(k1, 0.5 * h)), forces, cfg);
    ad::Var k3 = cartpole_deriv_var(t, t.add(s, t.scale(k2, 0.5 * h)), forces, cfg);
    ad::Var k4 = cartpole_deriv_var(t, t.add(s, t.scale(k3, h)), forces, cfg);
    ad::Var sum = t.add(t.add(k1, t.scale(k2, 2.0)),
                        t.add(t.scale(k3, 2.0), k4));
    s = t.add(s, t.scale(sum, h / 6.0));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Toy task family

double toy_shared_function(double x) {
  return 0.7 * std::sin(2.2 * x) + 0.3 * x;
}

ToyData make_toy_family(const std::vector<double>& offsets,
                        const ToyConfig& cfg, Rng& rng) {
  ToyData data;
  int id = 0;
  for (double offset : offsets) {
    ToyTask task;
    task.task_id = id++;
    task.offset = offset;
    task.train_x.resize(cfg.train_points);
    task.train_y.resize(cfg.train_points);
    for (int i = 0; i < cfg.train_points; ++i) {
      const double x = rng.uniform(cfg.x_lo, cfg.x_hi);
      task.train_x(i) = x;
      task.train_y(i) =
          toy_shared_function(x) + offset + cfg.noise_std * rng.normal();
    }
    task.test_x.setLinSpaced(cfg.test_points, cfg.test_lo, cfg.test_hi);
    task.test_y.resize(cfg.test_points);
    for (int i = 0; i < cfg.test_points; ++i) {
      task.test_y(i) = toy_shared_function(task.test_x(i)) + offset;
    }
    data.tasks.push_back(std::move(task));
  }
  return data;
}

MultiTaskDataset toy_dataset(const ToyData& data, int count) {
  MultiTaskDataset out;
  for (const auto& task : data.tasks) {
    const int n = count < 0 ? static_cast<int>(task.train_x.size())
                            : std::min<int>(count, task.train_x.size());
    MultiTaskDataset frag = toy_fragment(task, n);
    for (const auto& traj : frag.trajectories()) out.add(traj);
  }
  return out;
}

MultiTaskDataset toy_fragment(const ToyTask& task, int count) {
  MultiTaskDataset out;
  const int n = std::min<int>(count, task.train_x.size());
  for (int i = 0; i < n; ++i) {
    Trajectory traj;
    traj.task_id = task.task_id;
    traj.states = MatrixXd::Constant(1, 1, task.train_x(i));
    traj.controls = MatrixXd(1, 0);
    traj.next_states =
        MatrixXd::Constant(1, 1, task.train_x(i) + task.train_y(i));
    out.add(std::move(traj));
  }
  return out;
}

}  // namespace mlgp
