#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "mlgp/adam.hpp"
#include "mlgp/autodiff.hpp"
#include "mlgp/dataset.hpp"
#include "mlgp/envs.hpp"
#include "mlgp/model.hpp"
#include "mlgp/rng.hpp"

namespace mlgp {

struct MpcConfig {
  int horizon = 10;
  Eigen::VectorXd control_lower, control_upper;
  int iterations = 40;
  int restarts = 6;
  int particles = 10;
  AdamConfig adam{.lr = 0.15};
  bool warm_start = true;
  // The warm-started candidate is already near a good solution; it gets a
  // gentler refinement so aggressive exploration cannot wreck it.
  int warm_iterations = 15;
  double warm_lr = 0.02;
  // Scale on the common random numbers driving particle spread; 0 plans on
  // deterministic mean rollouts.
  double noise_scale = 1.0;
};

/// Differentiable one-step dynamics plus cost, the planner's view of a
/// model. `states` is an S x D batch of particles in natural units; `noise`
/// carries this step's common random numbers (S x D standard normals), which
/// deterministic models ignore.
class PlannerModel {
 public:
  virtual ~PlannerModel() = default;
  virtual int state_dim() const = 0;
  virtual int control_dim() const = 0;
  virtual ad::Var propagate(ad::Tape& t, ad::Var states, ad::Var controls,
                            const Eigen::MatrixXd& noise) const = 0;
  virtual ad::Var step_cost(ad::Tape& t, ad::Var states) const = 0;
};

/// Plans against the learned dynamics model with the task latent fixed at
/// its posterior mean. The expensive model constants (Cholesky factor and
/// projected variational parameters) are cached at construction.
class GpPlannerModel : public PlannerModel {
 public:
  GpPlannerModel(const MlgpModel& model, const Env& env,
                 const LatentPosterior& posterior);

  void set_latent_mean(const Eigen::RowVectorXd& h) {
    latent_mean_ = h;
    bound_tape_uid_ = 0;
  }

  int state_dim() const override { return model_->config().state_dim; }
  int control_dim() const override { return model_->config().control_dim; }
  ad::Var propagate(ad::Tape& t, ad::Var states, ad::Var controls,
                    const Eigen::MatrixXd& noise) const override;
  ad::Var step_cost(ad::Tape& t, ad::Var states) const override;

 private:
  struct BoundConstants {
    ad::Var z, log_sf2, log_ls, l, b, noise;
    std::vector<ad::Var> g;
    ad::Var x_mean, x_inv_std, c_mean, c_inv_std, y_mean, y_std, latent;
  };
  // model constants are hoisted once per tape; a planning call runs its
  // rollouts sequentially on one tape at a time
  const BoundConstants& bound(ad::Tape& t) const;

  const MlgpModel* model_;
  const Env* env_;
  MlgpModel::PredictorCache cache_;
  Eigen::RowVectorXd latent_mean_;
  mutable std::uint64_t bound_tape_uid_ = 0;
  mutable BoundConstants bound_constants_;
};

/// Ground-truth cart-pole dynamics as a deterministic planner model.
class CartPoleOracleModel : public PlannerModel {
 public:
  explicit CartPoleOracleModel(const CartPoleConfig& cfg, int substeps = 0)
      : cfg_(cfg), env_(cfg),
        substeps_(substeps > 0 ? substeps : cfg.substeps) {}

  int state_dim() const override { return 4; }
  int control_dim() const override { return 1; }
  ad::Var propagate(ad::Tape& t, ad::Var states, ad::Var controls,
                    const Eigen::MatrixXd& noise) const override;
  ad::Var step_cost(ad::Tape& t, ad::Var states) const override;

 private:
  CartPoleConfig cfg_;
  CartPole env_;
  int substeps_;
};

struct Plan {
  Eigen::MatrixXd controls;  // H x K, inside the bounds by construction
  double expected_cost = 0.0;
  Eigen::MatrixXd state_means;  // H x D particle means per step
  Eigen::MatrixXd state_vars;   // H x D particle variances per step
};

struct RolloutResult {
  double cost = 0.0;
  Eigen::MatrixXd state_means;
  Eigen::MatrixXd state_vars;
};

/// Expected finite-horizon cost of a fixed control sequence: S particles
/// propagated with common random numbers drawn once from rng, J the particle
/// mean of the summed per-step costs.
RolloutResult rollout_cost(const PlannerModel& model,
                           const Eigen::VectorXd& x0,
                           const Eigen::MatrixXd& controls,
                           const MpcConfig& cfg, Rng& rng);

/// Receding-horizon planning step: Adam on the expected cost through the
/// differentiable rollout, controls bound-squashed by tanh, multi-restart,
/// optionally warm-started from the previous plan shifted by one step.
/// Returns the best finite candidate seen, so the optimized cost never
/// exceeds the initial one.
Plan plan(const PlannerModel& model, const Eigen::VectorXd& x0,
          const MpcConfig& cfg, Rng& rng, const Plan* previous = nullptr);

/// Full episode: plan, apply the first control to the environment, re-plan.
/// `after_step` runs between execution and the next planning call (online
/// latent inference hooks in here).
using StepHook = std::function<void(int step, const Trajectory& so_far)>;
Trajectory run_mpc_episode(const Env& env, const PlannerModel& model,
                           const Eigen::VectorXd& x0, int episode_steps,
                           const MpcConfig& cfg, Rng& env_rng, Rng& plan_rng,
                           int task_id = 0,
                           const StepHook& after_step = nullptr);

}  // namespace mlgp
