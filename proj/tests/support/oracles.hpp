#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "mlgp/kernel.hpp"

// Test-only reference implementations. These deliberately use explicit dense
// inverses and direct formulas, independent of the Cholesky code paths they
// are used to check.
namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Posterior mean via an explicit inverse of Kzz.
inline VectorXd svgp_mean_dense(const MatrixXd& x_star, const MatrixXd& z,
                                const VectorXd& m,
                                const mlgp::KernelParams& p) {
  const MatrixXd kzz = mlgp::kernel_matrix(z, z, p);
  const MatrixXd kxz = mlgp::kernel_matrix(x_star, z, p);
  return kxz * kzz.inverse() * m;
}

/// Posterior variance diagonal via explicit inverses.
inline VectorXd svgp_var_dense(const MatrixXd& x_star, const MatrixXd& z,
                               const MatrixXd& s,
                               const mlgp::KernelParams& p) {
  const MatrixXd kzz = mlgp::kernel_matrix(z, z, p);
  const MatrixXd kinv = kzz.inverse();
  const MatrixXd kxz = mlgp::kernel_matrix(x_star, z, p);
  const MatrixXd mid = kinv * (kzz - s) * kinv;
  VectorXd out(x_star.rows());
  for (Eigen::Index i = 0; i < x_star.rows(); ++i) {
    out(i) = p.signal_variance() - kxz.row(i) * mid * kxz.row(i).transpose();
  }
  return out;
}

/// KL(N(m0, s0) || N(m1, s1)) between multivariate Gaussians, dense.
inline double gaussian_kl_dense(const VectorXd& m0, const MatrixXd& s0,
                                const VectorXd& m1, const MatrixXd& s1) {
  const Eigen::Index n = m0.size();
  const MatrixXd s1inv = s1.inverse();
  const double trace = (s1inv * s0).trace();
  const VectorXd diff = m1 - m0;
  const double mahal = diff.transpose() * s1inv * diff;
  const double logdet = std::log(s1.determinant() / s0.determinant());
  return 0.5 * (trace + mahal - static_cast<double>(n) + logdet);
}

/// KL between 1-D Gaussians by Simpson quadrature of q log(q/p).
inline double gaussian_kl_quadrature(double mq, double sq, double mp,
                                     double sp) {
  const double lo = mq - 14.0 * sq;
  const double hi = mq + 14.0 * sq;
  const int n = 20001;  // odd
  const double h = (hi - lo) / (n - 1);
  auto log_pdf = [](double x, double m, double s) {
    const double z = (x - m) / s;
    return -0.5 * z * z - std::log(s) -
           0.5 * std::log(2.0 * std::numbers::pi);
  };
  auto integrand = [&](double x) {
    const double lq = log_pdf(x, mq, sq);
    return std::exp(lq) * (lq - log_pdf(x, mp, sp));
  };
  double total = integrand(lo) + integrand(hi);
  for (int i = 1; i + 1 < n; ++i) {
    total += integrand(lo + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  }
  return total * h / 3.0;
}

struct ExactGp {
  MatrixXd x;
  VectorXd y;
  mlgp::KernelParams params;
  double noise_var = 0.0;

  MatrixXd gram() const {
    MatrixXd k = mlgp::kernel_matrix(x, x, params);
    k.diagonal().array() += noise_var;
    return k;
  }

  VectorXd mean_at(const MatrixXd& x_star) const {
    return mlgp::kernel_matrix(x_star, x, params) * gram().inverse() * y;
  }

  VectorXd var_at(const MatrixXd& x_star) const {
    const MatrixXd kinv = gram().inverse();
    const MatrixXd kxt = mlgp::kernel_matrix(x_star, x, params);
    VectorXd out(x_star.rows());
    for (Eigen::Index i = 0; i < x_star.rows(); ++i) {
      out(i) = params.signal_variance() -
               kxt.row(i) * kinv * kxt.row(i).transpose();
    }
    return out;
  }

  double log_marginal_likelihood() const {
    const MatrixXd k = gram();
    const double quad = y.transpose() * k.inverse() * y;
    return -0.5 * quad - 0.5 * std::log(k.determinant()) -
           0.5 * static_cast<double>(y.size()) *
               std::log(2.0 * std::numbers::pi);
  }
};

/// Uncollapsed sparse-GP evidence lower bound for one output dimension,
/// dense-inverse route end to end.
inline double svgp_elbo_dense(const MatrixXd& x, const VectorXd& y,
                              const MatrixXd& z, const VectorXd& m,
                              const MatrixXd& s, double noise_var,
                              const mlgp::KernelParams& p) {
  const VectorXd mu = svgp_mean_dense(x, z, m, p);
  const VectorXd var = svgp_var_dense(x, z, s, p);
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double r = y(i) - mu(i);
    ll += -0.5 * std::log(2.0 * std::numbers::pi * noise_var) -
          0.5 * r * r / noise_var - 0.5 * var(i) / noise_var;
  }
  const MatrixXd kzz = mlgp::kernel_matrix(z, z, p);
  return ll - gaussian_kl_dense(m, s, VectorXd::Zero(m.size()), kzz);
}

}  // namespace oracle
