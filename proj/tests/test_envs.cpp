#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <numbers>

#include "mlgp/envs.hpp"
#include "support/testutil.hpp"

using namespace mlgp;
using ad::Mat;
using ad::Tape;
using ad::Var;
using Eigen::Vector4d;
using Eigen::VectorXd;

namespace {

CartPoleConfig quiet_cartpole() {
  CartPoleConfig cfg;
  cfg.noise_std = 0.0;
  return cfg;
}

DoublePendulumConfig quiet_double_pendulum() {
  DoublePendulumConfig cfg;
  cfg.noise_std = 0.0;
  return cfg;
}

}  // namespace

TEST_CASE("cart-pole hanging down is a fixed point") {
  CartPole env(quiet_cartpole());
  VectorXd s(4);
  s << 0.0, 0.0, std::numbers::pi, 0.0;
  Rng rng(0);
  VectorXd next = s;
  for (int i = 0; i < 100; ++i) next = env.step(next, VectorXd::Zero(1), rng);
  CHECK((next - s).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("double pendulum hanging down is a fixed point") {
  DoublePendulum env(quiet_double_pendulum());
  VectorXd s(4);
  s << std::numbers::pi, std::numbers::pi, 0.0, 0.0;
  Rng rng(0);
  VectorXd next = s;
  for (int i = 0; i < 100; ++i) next = env.step(next, VectorXd::Zero(2), rng);
  CHECK((next - s).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("frictionless cart-pole conserves energy at 100 substeps") {
  CartPoleConfig cfg = quiet_cartpole();
  cfg.friction = 0.0;
  cfg.substeps = 100;
  CartPole env(cfg);
  VectorXd s(4);
  s << 0.0, 0.3, 2.0, 1.0;  // swinging freely
  const double e0 = env.energy(s);
  Rng rng(0);
  double max_drift = 0.0;
  for (int i = 0; i < 100; ++i) {
    s = env.step(s, VectorXd::Zero(1), rng);
    max_drift = std::max(max_drift, std::abs(env.energy(s) - e0));
  }
  CHECK(max_drift / std::abs(e0) < 1e-6);
}

TEST_CASE("unforced double pendulum conserves energy at 100 substeps") {
  DoublePendulumConfig cfg = quiet_double_pendulum();
  cfg.substeps = 100;
  DoublePendulum env(cfg);
  VectorXd s(4);
  s << 2.5, 2.0, 0.5, -0.3;
  const double e0 = env.energy(s);
  Rng rng(0);
  double max_drift = 0.0;
  for (int i = 0; i < 100; ++i) {
    s = env.step(s, VectorXd::Zero(2), rng);
    max_drift = std::max(max_drift, std::abs(env.energy(s) - e0));
  }
  CHECK(max_drift / std::abs(e0) < 1e-6);
}

TEST_CASE("default substeps track a 10x finer integration") {
  CartPoleConfig coarse = quiet_cartpole();
  CartPoleConfig fine = quiet_cartpole();
  fine.substeps = 100;
  CartPole env_coarse(coarse), env_fine(fine);
  VectorXd a(4), b(4);
  a << 0.0, 0.0, 2.6, 0.0;
  b = a;
  Rng rng(0);
  VectorXd force = VectorXd::Constant(1, 3.0);
  for (int i = 0; i < 5; ++i) {
    a = env_coarse.step(a, force, rng);
    b = env_fine.step(b, force, rng);
  }
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("out-of-range controls are clamped, exactly") {
  CartPole env(quiet_cartpole());
  VectorXd s(4);
  s << 0.1, -0.2, 2.8, 0.4;
  Rng r1(3), r2(3);
  VectorXd huge = VectorXd::Constant(1, 500.0);
  VectorXd limit = VectorXd::Constant(1, env.config().force_limit);
  CHECK(env.step(s, huge, r1) == env.step(s, limit, r2));
}

TEST_CASE("stepping is deterministic given config, state, control, seed") {
  CartPoleConfig cfg;
  cfg.noise_std = 0.05;
  CartPole env(cfg);
  VectorXd s(4);
  s << 0.0, 0.1, 3.0, -0.2;
  Rng r1(9), r2(9);
  CHECK(env.step(s, VectorXd::Constant(1, 1.0), r1) ==
        env.step(s, VectorXd::Constant(1, 1.0), r2));
}

TEST_CASE("initial-state sampling honors the distribution") {
  CartPoleConfig cfg;
  cfg.init_std = 0.0;
  CartPole env(cfg);
  Rng rng(1);
  VectorXd mu = env.sample_initial(rng);
  CHECK(mu(2) == doctest::Approx(std::numbers::pi).epsilon(1e-15));
  CHECK(mu(0) == 0.0);

  cfg.init_std = 0.3;
  CartPole noisy(cfg);
  Rng r1(5), r2(5);
  CHECK(noisy.sample_initial(r1) == noisy.sample_initial(r2));

  const int n = 10000;
  VectorXd acc = VectorXd::Zero(4);
  for (int i = 0; i < n; ++i) acc += noisy.sample_initial(r1);
  acc /= n;
  const double bound = 3.0 * 0.3 / std::sqrt(double(n));
  CHECK(std::abs(acc(0)) < bound);
  CHECK(std::abs(acc(2) - std::numbers::pi) < bound);
}

TEST_CASE("cost geometry") {
  CartPoleConfig cfg = quiet_cartpole();
  cfg.length = 0.5;
  CartPole env(cfg);
  VectorXd goal(4), down(4);
  goal << 0.0, 0.0, 0.0, 0.0;
  down << 0.0, 0.0, std::numbers::pi, 0.0;
  CHECK(env.cost(goal) == doctest::Approx(0.0));
  CHECK(env.tip_distance(down) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(env.cost(down) == doctest::Approx(1.0).epsilon(1e-12));

  VectorXd fast = down;
  fast(1) = 3.0;
  fast(3) = -2.0;
  CHECK(env.cost(fast) == doctest::Approx(env.cost(down)).epsilon(1e-15));

  DoublePendulum dp(quiet_double_pendulum());
  VectorXd up(4);
  up.setZero();
  CHECK(dp.cost(up) == doctest::Approx(0.0));
  VectorXd dp_down(4);
  dp_down << std::numbers::pi, std::numbers::pi, 0.0, 0.0;
  CHECK(dp.tip_distance(dp_down) ==
        doctest::Approx(2.0 * (dp.config().l1 + dp.config().l2)).epsilon(1e-12));
}

TEST_CASE("tape cost matches the plain cost") {
  CartPole env(quiet_cartpole());
  DoublePendulum dp(quiet_double_pendulum());
  Rng rng(4);
  Mat states = testutil::random_mat(6, 4, rng, 1.5);
  Tape t;
  Var c1 = env.cost_var(t, t.constant(states));
  Var c2 = dp.cost_var(t, t.constant(states));
  for (int i = 0; i < 6; ++i) {
    CHECK(t.val(c1)(i, 0) ==
          doctest::Approx(env.cost(states.row(i))).epsilon(1e-12));
    CHECK(t.val(c2)(i, 0) ==
          doctest::Approx(dp.cost(states.row(i))).epsilon(1e-12));
  }
}

TEST_CASE("differentiable cart-pole step matches the simulator") {
  CartPoleConfig cfg = quiet_cartpole();
  CartPole env(cfg);
  Rng rng(5);
  Mat states = testutil::random_mat(3, 4, rng, 1.0);
  states.col(2).array() += 2.5;
  Mat forces = testutil::random_mat(3, 1, rng, 4.0);

  Tape t;
  Var next = cartpole_step_var(t, t.constant(states), t.constant(forces), cfg,
                               cfg.substeps);
  for (int i = 0; i < 3; ++i) {
    Rng r(0);
    VectorXd plain = env.step(states.row(i), forces.row(i), r);
    CHECK((t.val(next).row(i).transpose() - plain).cwiseAbs().maxCoeff() <
          1e-12);
  }
}

TEST_CASE("toy family reproduces the shared function at zero noise") {
  ToyConfig cfg;
  cfg.noise_std = 0.0;
  cfg.train_points = 10;
  Rng rng(6);
  ToyData data = make_toy_family({0.0, 1.5, -2.0}, cfg, rng);
  for (int i = 0; i < 10; ++i) {
    CHECK(data.tasks[0].train_y(i) ==
          doctest::Approx(toy_shared_function(data.tasks[0].train_x(i)))
              .epsilon(1e-15));
  }
  // pointwise difference of noiseless targets is the offset difference
  for (int i = 0; i < data.tasks[1].test_x.size(); ++i) {
    CHECK(data.tasks[1].test_y(i) - data.tasks[2].test_y(i) ==
          doctest::Approx(1.5 - (-2.0)).epsilon(1e-12));
  }
}

TEST_CASE("toy generation is bit-reproducible under a fixed seed") {
  ToyConfig cfg;
  Rng r1(7), r2(7);
  ToyData a = make_toy_family({0.5, -0.5}, cfg, r1);
  ToyData b = make_toy_family({0.5, -0.5}, cfg, r2);
  CHECK(a.tasks[0].train_x == b.tasks[0].train_x);
  CHECK(a.tasks[1].train_y == b.tasks[1].train_y);
}

TEST_CASE("toy dataset trajectories carry task grouping") {
  ToyConfig cfg;
  cfg.train_points = 4;
  Rng rng(8);
  ToyData data = make_toy_family({0.0, 1.0}, cfg, rng);
  MultiTaskDataset ds = toy_dataset(data);
  CHECK(ds.size() == 8);
  CHECK(ds.task_ids() == std::vector<int>{0, 1});
  CHECK(ds.task_transitions(0) == 4);
  MultiTaskDataset frag = toy_fragment(data.tasks[1], 1);
  CHECK(frag.total_transitions() == 1);
}
