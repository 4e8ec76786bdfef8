#include "mlgp/metarl.hpp"

#include <algorithm>
#include <stdexcept>

namespace mlgp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::unique_ptr<Env> make_env(const TaskSpec& spec, const RlConfig& cfg) {
  if (spec.kind == EnvKind::CartPole) {
    CartPoleConfig c;
    c.pendulum_mass = spec.mass;
    c.length = spec.length;
    c.noise_std = cfg.env_noise_std;
    c.substeps = cfg.env_substeps;
    return std::make_unique<CartPole>(c);
  }
  DoublePendulumConfig c;
  c.m1 = spec.mass;
  c.l1 = spec.length;
  c.noise_std = cfg.env_noise_std;
  c.substeps = cfg.env_substeps;
  return std::make_unique<DoublePendulum>(c);
}

double default_solve_threshold(EnvKind kind) {
  return kind == EnvKind::CartPole ? 0.08 : 0.22;
}

bool is_solved(const Env& env, const Trajectory& traj, double threshold,
               int window) {
  if (traj.transitions() < window) {
    throw std::invalid_argument("is_solved: trajectory shorter than window");
  }
  for (int s = traj.transitions() - window; s < traj.transitions(); ++s) {
    if (env.tip_distance(traj.next_states.row(s).transpose()) > threshold) {
      return false;
    }
  }
  return true;
}

Trajectory random_episode(const Env& env, int task_id, int steps, Rng& rng) {
  const VectorXd lo = env.control_lower();
  const VectorXd hi = env.control_upper();
  MatrixXd visited(steps + 1, env.state_dim());
  MatrixXd controls(steps, env.control_dim());
  VectorXd state = env.sample_initial(rng);
  visited.row(0) = state.transpose();
  for (int s = 0; s < steps; ++s) {
    VectorXd c(env.control_dim());
    for (int j = 0; j < env.control_dim(); ++j) {
      c(j) = rng.uniform(lo(j), hi(j));
    }
    state = env.step(state, c, rng);
    visited.row(s + 1) = state.transpose();
    controls.row(s) = c.transpose();
  }
  return Trajectory::from_rollout(task_id, visited, controls);
}

Trajectory model_episode(MlgpModel& model, const Env& env, int task_id,
                         const RlConfig& cfg, bool online_latent, Rng& rng) {
  GpPlannerModel planner(model, env, model.latents().at(task_id));
  MpcConfig mpc = cfg.mpc;
  mpc.control_lower = env.control_lower();
  mpc.control_upper = env.control_upper();

  StepHook hook;
  if (online_latent && model.config().latent_dim > 0) {
    hook = [&](int /*step*/, const Trajectory& so_far) {
      MultiTaskDataset fragment;
      fragment.add(so_far);
      model.infer_latent(task_id, fragment, cfg.latent_fit, rng);
      planner.set_latent_mean(model.latents().at(task_id).mean.row(0));
    };
  }
  const VectorXd x0 = env.sample_initial(rng);
  return run_mpc_episode(env, planner, x0, cfg.episode_steps, mpc, rng, rng,
                         task_id, hook);
}

namespace {

ModelConfig model_config_for(const Env& env, ModelKind kind,
                             const RlConfig& cfg) {
  ModelConfig mc;
  mc.state_dim = env.state_dim();
  mc.control_dim = env.control_dim();
  mc.latent_dim = kind == ModelKind::MlGp ? cfg.latent_dim : 0;
  mc.num_inducing = cfg.num_inducing;
  mc.noise_init = cfg.noise_init;
  return mc;
}

double threshold_for(const TaskSpec& spec, const RlConfig& cfg) {
  return cfg.solve_threshold > 0 ? cfg.solve_threshold
                                 : default_solve_threshold(spec.kind);
}

/// Passes of (retrain, one trial per unsolved task) over the given tasks.
void trial_passes(ExperimentState& state, const std::vector<TaskSpec>& tasks,
                  const RlConfig& cfg, Rng& rng) {
  auto unsolved_below_budget = [&] {
    for (const auto& spec : tasks) {
      const TaskTally& tally = state.tallies.at(spec.task_id);
      if (!tally.solved && tally.trials < cfg.trial_budget) return true;
    }
    return false;
  };

  while (unsolved_below_budget()) {
    const FitConfig& fit_cfg =
        state.fits_run == 0 ? cfg.initial_fit : cfg.refit;
    state.model.fit(state.data, fit_cfg, rng);
    state.fits_run += 1;
    for (const auto& spec : tasks) {
      TaskTally& tally = state.tallies.at(spec.task_id);
      if (tally.solved || tally.trials >= cfg.trial_budget) continue;
      auto env = make_env(spec, cfg);
      Trajectory traj = model_episode(state.model, *env, spec.task_id, cfg,
                                      /*online_latent=*/false, rng);
      tally.trials += 1;
      tally.episodes += 1;
      tally.solved =
          is_solved(*env, traj, threshold_for(spec, cfg), cfg.solve_window);
      state.data.add(std::move(traj));
    }
  }
}

}  // namespace

ExperimentState meta_train(const std::vector<TaskSpec>& tasks, ModelKind kind,
                           const RlConfig& cfg, Rng& rng) {
  if (tasks.empty()) {
    throw std::invalid_argument("meta_train: no tasks");
  }
  ExperimentState state;
  state.tasks = tasks;
  {
    auto env = make_env(tasks.front(), cfg);
    state.model = MlgpModel(model_config_for(*env, kind, cfg));
  }

  // initial random rollouts
  for (const auto& spec : tasks) {
    auto env = make_env(spec, cfg);
    Trajectory traj =
        random_episode(*env, spec.task_id, cfg.episode_steps, rng);
    TaskTally tally;
    tally.task_id = spec.task_id;
    tally.episodes = 1;
    tally.solved =
        is_solved(*env, traj, threshold_for(spec, cfg), cfg.solve_window);
    state.tallies[spec.task_id] = tally;
    state.data.add(std::move(traj));
    state.model.register_task(spec.task_id);
  }

  trial_passes(state, tasks, cfg, rng);
  return state;
}

MetaTestMetrics meta_test(ExperimentState& state,
                          const std::vector<TaskSpec>& test_tasks,
                          const RlConfig& cfg, Rng& rng) {
  MetaTestMetrics metrics;

  // single-shot phase: online latent inference only, no global retrain
  for (const auto& spec : test_tasks) {
    if (!state.model.latents().has(spec.task_id)) {
      state.model.register_task(spec.task_id);
    }
    auto env = make_env(spec, cfg);
    Trajectory traj = model_episode(state.model, *env, spec.task_id, cfg,
                                    /*online_latent=*/true, rng);
    TaskTally tally;
    tally.task_id = spec.task_id;
    tally.trials = 1;
    tally.episodes = 1;
    tally.single_shot =
        is_solved(*env, traj, threshold_for(spec, cfg), cfg.solve_window);
    tally.solved = tally.single_shot;
    state.tallies[spec.task_id] = tally;
    state.data.add(std::move(traj));
  }

  // few-shot phase: identical to training passes, over the test tasks
  trial_passes(state, test_tasks, cfg, rng);

  double shot = 0.0, trials = 0.0, seconds = 0.0, solved = 0.0;
  for (const auto& spec : test_tasks) {
    const TaskTally& tally = state.tallies.at(spec.task_id);
    metrics.tallies[spec.task_id] = tally;
    shot += tally.single_shot ? 1.0 : 0.0;
    trials += tally.solved ? tally.trials : cfg.trial_budget;
    seconds += tally.interaction_seconds();
    solved += tally.solved ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(test_tasks.size());
  metrics.single_shot_rate = shot / n;
  metrics.mean_trials_to_solve = trials / n;
  metrics.mean_interaction_seconds = seconds / n;
  metrics.solved_rate = solved / n;
  return metrics;
}

SgpIMetrics baseline_sgp_i(const std::vector<TaskSpec>& train_tasks,
                           const std::vector<TaskSpec>& test_tasks,
                           const RlConfig& cfg, Rng& rng) {
  SgpIMetrics metrics;

  // an independent single-task run; returns the tally and the final model
  auto single_task_run = [&](const TaskSpec& spec) {
    std::vector<TaskSpec> one{spec};
    ExperimentState state = meta_train(one, ModelKind::SgpMl, cfg, rng);
    return std::pair<TaskTally, MlgpModel>(state.tallies.at(spec.task_id),
                                           std::move(state.model));
  };

  double shot_acc = 0.0;
  int shot_count = 0;
  for (const auto& spec : train_tasks) {
    auto [tally, model] = single_task_run(spec);
    metrics.train_tallies[spec.task_id] = tally;
    metrics.train_interaction_mean += tally.interaction_seconds();
    metrics.train_solved_rate += tally.solved ? 1.0 : 0.0;

    // single-shot evaluation: this task's model, blind, on every test task
    for (const auto& test_spec : test_tasks) {
      auto env = make_env(test_spec, cfg);
      if (!model.latents().has(test_spec.task_id)) {
        model.register_task(test_spec.task_id);
      }
      Trajectory traj = model_episode(model, *env, test_spec.task_id, cfg,
                                      /*online_latent=*/false, rng);
      shot_acc += is_solved(*env, traj, threshold_for(test_spec, cfg),
                            cfg.solve_window)
                      ? 1.0
                      : 0.0;
      shot_count += 1;
    }
  }
  metrics.train_interaction_mean /= static_cast<double>(train_tasks.size());
  metrics.train_solved_rate /= static_cast<double>(train_tasks.size());
  metrics.single_shot_rate = shot_count > 0 ? shot_acc / shot_count : 0.0;

  for (const auto& spec : test_tasks) {
    auto [tally, model] = single_task_run(spec);
    metrics.test_tallies[spec.task_id] = tally;
    metrics.test_interaction_mean += tally.interaction_seconds();
    metrics.test_solved_rate += tally.solved ? 1.0 : 0.0;
  }
  metrics.test_interaction_mean /= static_cast<double>(test_tasks.size());
  metrics.test_solved_rate /= static_cast<double>(test_tasks.size());
  return metrics;
}

}  // namespace mlgp
