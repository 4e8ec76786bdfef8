#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "mlgp/autodiff.hpp"
#include "mlgp/dataset.hpp"
#include "mlgp/rng.hpp"

namespace mlgp {

enum class EnvKind { CartPole, DoublePendulum };

/// Cart on a track with a freely swinging point-mass pendulum. State is
/// (x, xdot, theta, thetadot) with theta = 0 upright; angles are left
/// unwrapped so model inputs stay continuous.
struct CartPoleConfig {
  double cart_mass = 0.5;      // kg
  double pendulum_mass = 0.5;  // kg
  double length = 0.6;         // m
  double gravity = 9.81;       // m/s^2
  double friction = 0.1;       // N s/m, on the cart
  double noise_std = 0.01;     // per state dimension
  double dt = 0.1;             // s, control interval
  int substeps = 10;
  double force_limit = 15.0;  // N
  double init_std = 0.02;     // std of p(x0) around hanging down
};

/// Two-link arm, torque motors in shoulder and elbow. State is
/// (theta1, theta2, theta1dot, theta2dot), absolute angles from upright.
struct DoublePendulumConfig {
  double m1 = 0.5, l1 = 0.5;  // inner link (varied across tasks)
  double m2 = 0.5, l2 = 0.5;  // outer link (fixed)
  double gravity = 9.81;
  double noise_std = 0.01;
  double dt = 0.1;
  int substeps = 10;
  double torque_limit = 4.0;  // N m per joint
  double init_std = 0.02;
};

class Env {
 public:
  virtual ~Env() = default;
  virtual EnvKind kind() const = 0;
  virtual int state_dim() const = 0;
  virtual int control_dim() const = 0;
  virtual Eigen::VectorXd control_lower() const = 0;
  virtual Eigen::VectorXd control_upper() const = 0;

  /// RK4 over one control interval with clamped controls, then additive
  /// Gaussian process noise. Throws if the state diverges to non-finite.
  virtual Eigen::VectorXd step(const Eigen::VectorXd& state,
                               const Eigen::VectorXd& control,
                               Rng& rng) const = 0;

  virtual Eigen::VectorXd sample_initial(Rng& rng) const = 0;

  /// Euclidean distance in meters from the pendulum tip to the goal tip.
  virtual double tip_distance(const Eigen::VectorXd& state) const = 0;

  /// Immediate cost: squared tip distance. Velocity-invariant.
  double cost(const Eigen::VectorXd& state) const {
    const double d = tip_distance(state);
    return d * d;
  }

  /// Tape version of cost() over a batch of states (rows); returns n x 1.
  virtual ad::Var cost_var(ad::Tape& t, ad::Var states) const = 0;

  /// Total mechanical energy; meaningful for frictionless, unforced motion.
  virtual double energy(const Eigen::VectorXd& state) const = 0;
};

class CartPole : public Env {
 public:
  explicit CartPole(const CartPoleConfig& cfg) : cfg_(cfg) {}
  const CartPoleConfig& config() const { return cfg_; }

  EnvKind kind() const override { return EnvKind::CartPole; }
  int state_dim() const override { return 4; }
  int control_dim() const override { return 1; }
  Eigen::VectorXd control_lower() const override;
  Eigen::VectorXd control_upper() const override;
  Eigen::VectorXd step(const Eigen::VectorXd& state,
                       const Eigen::VectorXd& control, Rng& rng) const override;
  Eigen::VectorXd sample_initial(Rng& rng) const override;
  double tip_distance(const Eigen::VectorXd& state) const override;
  ad::Var cost_var(ad::Tape& t, ad::Var states) const override;
  double energy(const Eigen::VectorXd& state) const override;

  Eigen::Vector4d derivative(const Eigen::Vector4d& state, double force) const;

 private:
  CartPoleConfig cfg_;
};

class DoublePendulum : public Env {
 public:
  explicit DoublePendulum(const DoublePendulumConfig& cfg) : cfg_(cfg) {}
  const DoublePendulumConfig& config() const { return cfg_; }

  EnvKind kind() const override { return EnvKind::DoublePendulum; }
  int state_dim() const override { return 4; }
  int control_dim() const override { return 2; }
  Eigen::VectorXd control_lower() const override;
  Eigen::VectorXd control_upper() const override;
  Eigen::VectorXd step(const Eigen::VectorXd& state,
                       const Eigen::VectorXd& control, Rng& rng) const override;
  Eigen::VectorXd sample_initial(Rng& rng) const override;
  double tip_distance(const Eigen::VectorXd& state) const override;
  ad::Var cost_var(ad::Tape& t, ad::Var states) const override;
  double energy(const Eigen::VectorXd& state) const override;

  Eigen::Vector4d derivative(const Eigen::Vector4d& state, double tau1,
                             double tau2) const;

 private:
  DoublePendulumConfig cfg_;
};

/// Deterministic differentiable cart-pole transition on the tape (no
/// process noise); used to plan against ground-truth dynamics.
ad::Var cartpole_step_var(ad::Tape& t, ad::Var states, ad::Var forces,
                          const CartPoleConfig& cfg, int substeps);

// ---------------------------------------------------------------------------
// Toy task family: y = g(x) + offset_p + noise, one shared nonlinear g and a
// per-task constant offset.

/// The shared structure g(x) = 0.7 sin(2.2 x) + 0.3 x.
double toy_shared_function(double x);

struct ToyConfig {
  int train_points = 30;
  int test_points = 41;
  double x_lo = -3.0, x_hi = 3.0;        // training inputs, uniform
  double test_lo = -2.0, test_hi = 2.0;  // noiseless evaluation grid
  double noise_std = 0.05;
};

struct ToyTask {
  int task_id = 0;
  double offset = 0.0;
  Eigen::VectorXd train_x, train_y;  // noisy observations
  Eigen::VectorXd test_x, test_y;    // noiseless grid targets
};

struct ToyData {
  std::vector<ToyTask> tasks;
};

ToyData make_toy_family(const std::vector<double>& offsets,
                        const ToyConfig& cfg, Rng& rng);

/// Single-transition trajectories (x -> x + y) for the first `count` points
/// of each task; count < 0 takes all points.
MultiTaskDataset toy_dataset(const ToyData& data, int count = -1);
MultiTaskDataset toy_fragment(const ToyTask& task, int count);

}  // namespace mlgp
