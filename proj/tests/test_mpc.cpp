#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "mlgp/mpc.hpp"
#include "support/testutil.hpp"

using namespace mlgp;
using ad::Mat;
using ad::Tape;
using ad::Var;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

/// Test double: the state never changes, cost is the squared state norm.
class FrozenModel : public PlannerModel {
 public:
  explicit FrozenModel(int d) : d_(d) {}
  int state_dim() const override { return d_; }
  int control_dim() const override { return 1; }
  Var propagate(Tape&, Var states, Var, const MatrixXd&) const override {
    return states;
  }
  Var step_cost(Tape& t, Var states) const override {
    return t.row_sum(t.square(states));
  }

 private:
  int d_;
};

/// Test double: linear-Gaussian dynamics x' = A x + B c + sigma .* eps with
/// quadratic cost |x|^2; expected cost has a closed form.
class LinearModel : public PlannerModel {
 public:
  LinearModel(MatrixXd a, MatrixXd b, VectorXd sigma)
      : a_(std::move(a)), b_(std::move(b)), sigma_(std::move(sigma)) {}
  int state_dim() const override { return static_cast<int>(a_.rows()); }
  int control_dim() const override { return static_cast<int>(b_.cols()); }
  Var propagate(Tape& t, Var states, Var controls,
                const MatrixXd& noise) const override {
    Var lin = t.add(t.matmul(states, t.constant(a_.transpose())),
                    t.matmul(controls, t.constant(b_.transpose())));
    const auto s = static_cast<int>(t.val(states).rows());
    Var spread = t.broadcast_row(t.constant(sigma_.transpose()), s);
    return t.add(lin, t.mul(spread, t.constant(noise)));
  }
  Var step_cost(Tape& t, Var states) const override {
    return t.row_sum(t.square(states));
  }

  /// E[ sum_t |x_t|^2 ] = sum_t (|mu_t|^2 + tr(Sigma_t)) in closed form.
  double expected_cost(const VectorXd& x0, const MatrixXd& controls) const {
    VectorXd mu = x0;
    MatrixXd cov = MatrixXd::Zero(a_.rows(), a_.rows());
    const MatrixXd noise_cov = sigma_.array().square().matrix().asDiagonal();
    double total = 0.0;
    for (Eigen::Index step = 0; step < controls.rows(); ++step) {
      mu = a_ * mu + b_ * controls.row(step).transpose();
      cov = a_ * cov * a_.transpose() + noise_cov;
      total += mu.squaredNorm() + cov.trace();
    }
    return total;
  }

 private:
  MatrixXd a_, b_;
  VectorXd sigma_;
};

MpcConfig scalar_config(int horizon, double lo = -1.0, double hi = 1.0) {
  MpcConfig cfg;
  cfg.horizon = horizon;
  cfg.control_lower = VectorXd::Constant(1, lo);
  cfg.control_upper = VectorXd::Constant(1, hi);
  return cfg;
}

}  // namespace

TEST_CASE("a frozen model accumulates H times the initial cost") {
  FrozenModel model(3);
  VectorXd x0(3);
  x0 << 1.0, -2.0, 0.5;
  MpcConfig cfg = scalar_config(7);
  cfg.particles = 1;
  Rng rng(1);
  RolloutResult r = rollout_cost(model, x0, MatrixXd::Zero(7, 1), cfg, rng);
  CHECK(r.cost == doctest::Approx(7.0 * x0.squaredNorm()).epsilon(1e-12));
}

TEST_CASE("zero cost stays zero for any controls") {
  // frozen model from the origin: every step costs |0|^2
  FrozenModel model(2);
  MpcConfig cfg = scalar_config(5);
  Rng rng(2);
  RolloutResult r = rollout_cost(model, VectorXd::Zero(2),
                                 MatrixXd::Random(5, 1), cfg, rng);
  CHECK(r.cost == 0.0);
}

TEST_CASE("particle estimate matches the linear-Gaussian closed form") {
  Rng rng(3);
  MatrixXd a(2, 2), b(2, 1);
  a << 0.9, 0.2, -0.1, 0.8;
  b << 0.5, 1.0;
  VectorXd sigma(2);
  sigma << 0.3, 0.2;
  LinearModel model(a, b, sigma);

  VectorXd x0(2);
  x0 << 1.0, -0.5;
  MpcConfig cfg = scalar_config(5);
  cfg.particles = 10000;
  MatrixXd controls(5, 1);
  controls << 0.4, -0.2, 0.1, 0.3, -0.5;

  RolloutResult r = rollout_cost(model, x0, controls, cfg, rng);
  const double expected = model.expected_cost(x0, controls);
  CHECK(std::abs(r.cost - expected) / expected < 0.02);
}

TEST_CASE("particle variance shrinks as 1/S") {
  MatrixXd a(1, 1), b(1, 1);
  a << 0.9;
  b << 1.0;
  VectorXd sigma = VectorXd::Constant(1, 0.5);
  LinearModel model(a, b, sigma);
  VectorXd x0 = VectorXd::Constant(1, 1.0);
  MatrixXd controls = MatrixXd::Constant(4, 1, 0.2);

  const int reps = 40;
  std::vector<double> log_s, log_var;
  Rng rng(4);
  for (int particles : {10, 100, 1000, 10000}) {
    MpcConfig cfg = scalar_config(4);
    cfg.particles = particles;
    double mean = 0.0, m2 = 0.0;
    for (int rep = 0; rep < reps; ++rep) {
      const double j = rollout_cost(model, x0, controls, cfg, rng).cost;
      const double delta = j - mean;
      mean += delta / (rep + 1);
      m2 += delta * (j - mean);
    }
    log_s.push_back(std::log(double(particles)));
    log_var.push_back(std::log(m2 / (reps - 1)));
  }
  // least-squares slope over the four points
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < log_s.size(); ++i) {
    sx += log_s[i];
    sy += log_var[i];
    sxx += log_s[i] * log_s[i];
    sxy += log_s[i] * log_var[i];
  }
  const double n = static_cast<double>(log_s.size());
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(slope == doctest::Approx(-1.0).epsilon(0.2));
}

TEST_CASE("planner matches a dense control grid at horizon one") {
  CartPoleConfig cp;
  cp.noise_std = 0.0;
  CartPoleOracleModel model(cp, 5);
  VectorXd x0(4);
  x0 << 0.0, 0.0, 2.5, -0.5;

  MpcConfig cfg;
  cfg.horizon = 1;
  cfg.control_lower = VectorXd::Constant(1, -cp.force_limit);
  cfg.control_upper = VectorXd::Constant(1, cp.force_limit);
  cfg.particles = 1;
  cfg.iterations = 60;
  cfg.restarts = 4;

  double grid_best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 201; ++i) {
    const double c = -cp.force_limit + 2.0 * cp.force_limit * i / 200.0;
    Rng rng(0);
    grid_best = std::min(
        grid_best,
        rollout_cost(model, x0, MatrixXd::Constant(1, 1, c), cfg, rng).cost);
  }
  Rng rng(5);
  Plan p = plan(model, x0, cfg, rng);
  CHECK(p.expected_cost <= grid_best * 1.01 + 1e-12);
}

TEST_CASE("optimization never worsens the best candidate") {
  CartPoleConfig cp;
  cp.noise_std = 0.0;
  CartPoleOracleModel model(cp, 3);
  VectorXd x0(4);
  x0 << 0.2, 0.0, 3.0, 0.0;
  MpcConfig cfg;
  cfg.horizon = 6;
  cfg.control_lower = VectorXd::Constant(1, -cp.force_limit);
  cfg.control_upper = VectorXd::Constant(1, cp.force_limit);
  cfg.particles = 1;
  cfg.iterations = 10;
  cfg.restarts = 2;

  Rng rng(6);
  Plan first = plan(model, x0, cfg, rng);

  // a second call warm-started from the first must not end up worse than
  // the shifted previous plan evaluated as-is
  MatrixXd shifted(6, 1);
  for (int i = 0; i < 6; ++i) shifted.row(i) = first.controls.row(std::min(i + 1, 5));
  Rng rng_eval(7);
  // re-plan from the state the first control leads to
  Rng env_rng(8);
  CartPole env(cp);
  VectorXd x1 = env.step(x0, first.controls.row(0).transpose(), env_rng);
  const double shifted_cost =
      rollout_cost(model, x1, shifted, cfg, rng_eval).cost;
  Plan second = plan(model, x1, cfg, rng_eval, &first);
  CHECK(second.expected_cost <= shifted_cost + 1e-9);
}

TEST_CASE("planned controls always stay inside the bounds") {
  CartPoleConfig cp;
  CartPoleOracleModel model(cp, 3);
  MpcConfig cfg;
  cfg.horizon = 8;
  cfg.control_lower = VectorXd::Constant(1, -cp.force_limit);
  cfg.control_upper = VectorXd::Constant(1, cp.force_limit);
  cfg.particles = 1;
  cfg.iterations = 15;
  cfg.restarts = 3;
  Rng rng(9);
  for (int trial = 0; trial < 3; ++trial) {
    VectorXd x0(4);
    x0 << rng.normal(), rng.normal(), 3.0 + rng.normal(), rng.normal();
    Plan p = plan(model, x0, cfg, rng);
    CHECK((p.controls.array() >= -cp.force_limit).all());
    CHECK((p.controls.array() <= cp.force_limit).all());
    CHECK(p.controls.rows() == 8);
  }
}

TEST_CASE("episodes are bit-reproducible and have exact length") {
  CartPoleConfig cp;
  cp.noise_std = 0.01;
  CartPole env(cp);
  CartPoleOracleModel model(cp, 3);
  MpcConfig cfg;
  cfg.horizon = 5;
  cfg.control_lower = env.control_lower();
  cfg.control_upper = env.control_upper();
  cfg.particles = 1;
  cfg.iterations = 5;
  cfg.restarts = 2;

  VectorXd x0(4);
  x0 << 0.0, 0.0, 3.1, 0.0;
  Rng env1(11), plan1(12), env2(11), plan2(12);
  Trajectory a = run_mpc_episode(env, model, x0, 8, cfg, env1, plan1);
  Trajectory b = run_mpc_episode(env, model, x0, 8, cfg, env2, plan2);
  CHECK(a.transitions() == 8);
  CHECK(a.states == b.states);
  CHECK(a.controls == b.controls);
  CHECK(a.next_states == b.next_states);
}

TEST_CASE("config validation rejects bad bounds and shapes") {
  FrozenModel model(2);
  MpcConfig cfg = scalar_config(3);
  cfg.control_lower = VectorXd::Constant(1, 2.0);  // lower > upper
  cfg.control_upper = VectorXd::Constant(1, -2.0);
  Rng rng(13);
  CHECK_THROWS_AS(plan(model, VectorXd::Zero(2), cfg, rng),
                  std::invalid_argument);
  MpcConfig ok = scalar_config(3);
  CHECK_THROWS_AS(
      rollout_cost(model, VectorXd::Zero(2), MatrixXd::Zero(5, 1), ok, rng),
      std::invalid_argument);
}
