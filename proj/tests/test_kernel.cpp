#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "mlgp/kernel.hpp"
#include "support/testutil.hpp"

using namespace mlgp;
using testutil::check_grads_fd;
using testutil::random_mat;
using ad::Mat;
using ad::Tape;
using ad::Var;

namespace {

KernelParams params_with(double sf2, const Eigen::RowVectorXd& ls) {
  KernelParams p = KernelParams::init(static_cast<int>(ls.size()));
  p.log_signal_variance(0, 0) = std::log(sf2);
  p.log_lengthscales = ls.array().log().matrix();
  return p;
}

}  // namespace

TEST_CASE("zero distance gives the signal variance") {
  Eigen::RowVectorXd x(3);
  x << 0.3, -1.0, 2.0;
  KernelParams p = params_with(2.0, Eigen::RowVectorXd::Ones(3));
  CHECK(kernel_value(x, x, p) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("unit lengthscales and unit offset give exp(-1/2)") {
  Eigen::RowVectorXd xi = Eigen::RowVectorXd::Zero(4);
  Eigen::RowVectorXd xj = Eigen::RowVectorXd::Zero(4);
  xj(0) = 1.0;
  KernelParams p = params_with(1.0, Eigen::RowVectorXd::Ones(4));
  CHECK(kernel_value(xi, xj, p) ==
        doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
}

TEST_CASE("growing a lengthscale never decreases the covariance") {
  Rng rng(1);
  Eigen::RowVectorXd xi(3), xj(3);
  for (int i = 0; i < 3; ++i) {
    xi(i) = rng.normal();
    xj(i) = rng.normal();
  }
  Eigen::RowVectorXd ls = Eigen::RowVectorXd::Ones(3);
  KernelParams p = params_with(1.3, ls);
  double prev = kernel_value(xi, xj, p);
  for (int doubling = 0; doubling < 5; ++doubling) {
    ls(1) *= 2.0;
    p = params_with(1.3, ls);
    const double cur = kernel_value(xi, xj, p);
    CHECK(cur >= prev - 1e-15);
    prev = cur;
  }
}

TEST_CASE("dimension mismatch is rejected") {
  Eigen::RowVectorXd xi(3), xj(3);
  xi.setZero();
  xj.setZero();
  KernelParams p = KernelParams::init(2);
  CHECK_THROWS_AS(kernel_value(xi, xj, p), std::invalid_argument);
  CHECK_THROWS_AS(kernel_matrix(Mat::Zero(2, 3), Mat::Zero(2, 3), p),
                  std::invalid_argument);
}

TEST_CASE("symmetric construction is exactly symmetric with sf2 diagonal") {
  Rng rng(2);
  Mat a = random_mat(8, 3, rng);
  KernelParams p = params_with(1.7, Eigen::RowVectorXd::Constant(3, 0.8));
  Mat k = kernel_matrix_sym(a, p);
  CHECK((k - k.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((k.diagonal().array() - 1.7).abs().maxCoeff() == 0.0);
}

TEST_CASE("three random points match the scalar formula oracle") {
  Rng rng(3);
  Mat a = random_mat(3, 4, rng);
  KernelParams p = params_with(0.9, Eigen::RowVectorXd::Constant(4, 1.4));
  Mat k = kernel_matrix(a, a, p);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double inv_l2 = 1.0 / (1.4 * 1.4);
      const double sq = (a.row(i) - a.row(j)).squaredNorm() * inv_l2;
      const double expect = 0.9 * std::exp(-0.5 * sq);
      CHECK(k(i, j) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("tape kernel agrees with the plain path") {
  Rng rng(4);
  Mat a = random_mat(6, 3, rng);
  Mat b = random_mat(4, 3, rng);
  KernelParams p = params_with(1.2, Eigen::RowVectorXd::Constant(3, 0.7));

  Tape t;
  Var k = kernel_matrix_var(t, t.constant(a), t.constant(b),
                            t.constant(p.log_signal_variance),
                            t.constant(p.log_lengthscales));
  CHECK(t.val(k).isApprox(kernel_matrix(a, b, p), 1e-12));

  Tape t2;
  Var zz = t2.constant(a);
  Var kaa = kernel_matrix_var(t2, zz, zz, t2.constant(p.log_signal_variance),
                              t2.constant(p.log_lengthscales));
  CHECK((t2.val(kaa) - t2.val(kaa).transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(t2.val(kaa).isApprox(kernel_matrix_sym(a, p), 1e-12));
}

TEST_CASE("stationarity: shifting both inputs leaves k unchanged") {
  Rng rng(5);
  KernelParams p = params_with(1.1, Eigen::RowVectorXd::Constant(3, 1.3));
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::RowVectorXd xi(3), xj(3), shift(3);
    for (int i = 0; i < 3; ++i) {
      xi(i) = rng.normal();
      xj(i) = rng.normal();
      shift(i) = rng.normal();
    }
    CHECK(kernel_value(xi, xj, p) ==
          doctest::Approx(kernel_value(xi + shift, xj + shift, p))
              .epsilon(1e-12));
  }
}

TEST_CASE("kernel matrices are positive semi-definite") {
  Rng rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 10 + static_cast<int>(rng.next_u64() % 41);
    Mat a = random_mat(n, 3, rng, 1.5);
    KernelParams p = params_with(1.6, Eigen::RowVectorXd::Constant(3, 0.9));
    Mat k = kernel_matrix_sym(a, p);
    Eigen::SelfAdjointEigenSolver<Mat> es(k);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10 * 1.6);
  }
}

TEST_CASE("kernel gradients match finite differences") {
  Rng rng(7);
  Mat a = random_mat(4, 3, rng);
  Mat b = random_mat(3, 3, rng);
  Mat log_sf2 = Mat::Constant(1, 1, 0.3);
  Mat log_ls = random_mat(1, 3, rng, 0.2);
  check_grads_fd(
      [&](Tape& t, const std::vector<Var>& v) {
        Var k = kernel_matrix_var(t, v[0], v[1], v[2], v[3]);
        // weighted sum makes every entry's adjoint distinct
        Mat w(4, 3);
        for (int i = 0; i < 12; ++i) w(i / 3, i % 3) = 0.1 * (i + 1);
        return t.sum(t.mul(k, t.constant(w)));
      },
      {a, b, log_sf2, log_ls}, 1e-6, 1e-5);
}
