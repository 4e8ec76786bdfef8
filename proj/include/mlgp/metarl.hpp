#pragma once

#include <map>
#include <memory>
#include <vector>

#include "mlgp/envs.hpp"
#include "mlgp/model.hpp"
#include "mlgp/mpc.hpp"
#include "mlgp/rng.hpp"

namespace mlgp {

/// One system specification: which simulator and its varied parameters
/// (pendulum mass/length, or inner-link mass/length for the two-link arm).
struct TaskSpec {
  EnvKind kind = EnvKind::CartPole;
  double mass = 0.5;
  double length = 0.5;
  int task_id = 0;
};

enum class ModelKind { MlGp, SgpMl };

struct RlConfig {
  int latent_dim = 2;  // forced to 0 for SgpMl
  int num_inducing = 50;
  double noise_init = 1e-2;
  FitConfig initial_fit{.steps = 1500, .batch_trajectories = 2};
  FitConfig refit{.steps = 800, .batch_trajectories = 2};
  FitConfig latent_fit{.steps = 30, .batch_trajectories = 1};
  MpcConfig mpc;  // control bounds are filled in per environment
  int episode_steps = 30;  // 3 s at 10 Hz
  int trial_budget = 15;
  double solve_threshold = -1.0;  // < 0 picks the per-env default
  int solve_window = 10;
  double env_noise_std = 0.01;
  int env_substeps = 10;
};

std::unique_ptr<Env> make_env(const TaskSpec& spec, const RlConfig& cfg);

/// Default solve thresholds: pendulum tip within 8 cm (cart-pole) or 22 cm
/// (double pendulum) of the goal.
double default_solve_threshold(EnvKind kind);

/// Solved = tip distance within the threshold on each of the final
/// `window` steps. Throws if the trajectory is shorter than the window.
bool is_solved(const Env& env, const Trajectory& traj, double threshold,
               int window = 10);

struct TaskTally {
  int task_id = 0;
  bool solved = false;
  int trials = 0;    // planner-driven episodes
  int episodes = 0;  // every episode on the system, random rollouts included
  bool single_shot = false;
  double interaction_seconds() const { return 3.0 * episodes; }
};

struct ExperimentState {
  MultiTaskDataset data;
  MlgpModel model;
  std::map<int, TaskTally> tallies;
  std::vector<TaskSpec> tasks;
  int fits_run = 0;
};

/// One planner-driven episode on a task; the model's latent posterior for
/// the task is used at its mean, optionally re-inferred online after every
/// step from the observations so far.
Trajectory model_episode(MlgpModel& model, const Env& env, int task_id,
                         const RlConfig& cfg, bool online_latent, Rng& rng);

Trajectory random_episode(const Env& env, int task_id, int steps, Rng& rng);

/// Multi-task training: one random rollout per task, then passes of
/// (retrain on everything, one trial per unsolved task) until every task is
/// solved or unsolved tasks exhaust the trial budget.
ExperimentState meta_train(const std::vector<TaskSpec>& tasks, ModelKind kind,
                           const RlConfig& cfg, Rng& rng);

struct MetaTestMetrics {
  double single_shot_rate = 0.0;
  double mean_trials_to_solve = 0.0;        // budget counted when unsolved
  double mean_interaction_seconds = 0.0;    // per test task
  double solved_rate = 0.0;
  std::map<int, TaskTally> tallies;
};

/// Test phase: per task one single-shot episode with online latent
/// inference and no global retrain, then regular passes that do retrain.
MetaTestMetrics meta_test(ExperimentState& state,
                          const std::vector<TaskSpec>& test_tasks,
                          const RlConfig& cfg, Rng& rng);

struct SgpIMetrics {
  double single_shot_rate = 0.0;  // mean over (train model, test task) pairs
  double train_interaction_mean = 0.0;
  double test_interaction_mean = 0.0;
  double train_solved_rate = 0.0;
  double test_solved_rate = 0.0;
  std::map<int, TaskTally> train_tallies, test_tallies;
};

/// Independent-model baseline: a fresh sparse GP per task on both task
/// sets; after each training task's run, its model attempts every test task
/// once for the single-shot score.
SgpIMetrics baseline_sgp_i(const std::vector<TaskSpec>& train_tasks,
                           const std::vector<TaskSpec>& test_tasks,
                           const RlConfig& cfg, Rng& rng);

}  // namespace mlgp
