#include "mlgp/svgp.hpp"

#include <cmath>
#include <stdexcept>

namespace mlgp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

OutputVariational OutputVariational::from_moments(const VectorXd& mean,
                                                  const MatrixXd& cov_factor) {
  if (cov_factor.diagonal().minCoeff() <= 0.0) {
    throw std::invalid_argument(
        "svgp: covariance factor needs a strictly positive diagonal");
  }
  OutputVariational v;
  v.m = mean;
  v.C_param = cov_factor.triangularView<Eigen::StrictlyLower>();
  v.C_param.diagonal() = cov_factor.diagonal().array().log();
  return v;
}

VectorXd posterior_mean(const MatrixXd& x_star, const InducingSet& inducing,
                        const MatrixXd& m, const KernelParams& params) {
  const MatrixXd kzz = kernel_matrix_sym(inducing.Z, params);
  const MatrixXd l = ad::cholesky_jitter(kzz).L;
  const MatrixXd kzx = kernel_matrix(inducing.Z, x_star, params);
  const MatrixXd a = l.triangularView<Eigen::Lower>().solve(kzx);
  const MatrixXd b = l.triangularView<Eigen::Lower>().solve(m);
  return a.transpose() * b;
}

VectorXd posterior_var(const MatrixXd& x_star, const InducingSet& inducing,
                       const OutputVariational& q, const KernelParams& params) {
  const MatrixXd kzz = kernel_matrix_sym(inducing.Z, params);
  const MatrixXd l = ad::cholesky_jitter(kzz).L;
  const MatrixXd kzx = kernel_matrix(inducing.Z, x_star, params);
  const MatrixXd a = l.triangularView<Eigen::Lower>().solve(kzx);
  const MatrixXd g = l.triangularView<Eigen::Lower>().solve(q.factor());
  const MatrixXd w = g.transpose() * a;
  VectorXd v = kernel_diag(static_cast<int>(x_star.rows()), params) -
               a.array().square().colwise().sum().matrix().transpose() +
               w.array().square().colwise().sum().matrix().transpose();
  return v.cwiseMax(kVarianceFloor);
}

double kl_inducing(const std::vector<OutputVariational>& outputs,
                   const InducingSet& inducing, const KernelParams& params) {
  const MatrixXd kzz = kernel_matrix_sym(inducing.Z, params);
  const MatrixXd l = ad::cholesky_jitter(kzz).L;
  const double logdet_k = 2.0 * l.diagonal().array().log().sum();
  const double m_count = inducing.count();

  double kl = 0.0;
  for (const auto& q : outputs) {
    const MatrixXd c = q.factor();
    const MatrixXd g = l.triangularView<Eigen::Lower>().solve(c);
    const MatrixXd b = l.triangularView<Eigen::Lower>().solve(q.m);
    const double logdet_s = 2.0 * c.diagonal().array().log().sum();
    kl += 0.5 * (g.array().square().sum() + b.array().square().sum() -
                 m_count + logdet_k - logdet_s);
  }
  return kl;
}

ad::Var svgp_mean(ad::Tape& t, ad::Var a, ad::Var b) {
  return t.matmul(t.transpose(a), b);
}

ad::Var svgp_var_diag(ad::Tape& t, ad::Var a, ad::Var g, ad::Var kdiag) {
  ad::Var qff = t.transpose(t.col_sum(t.square(a)));  // diag(A^T A)
  ad::Var w = t.matmul(t.transpose(g), a);
  ad::Var sterm = t.transpose(t.col_sum(t.square(w)));
  ad::Var v = t.add(t.sub(kdiag, qff), sterm);
  return t.clamp_min(v, kVarianceFloor);
}

ad::Var svgp_kl(ad::Tape& t, ad::Var b, ad::Var g, ad::Var l, ad::Var c) {
  const auto m = static_cast<double>(t.val(l).rows());
  ad::Var trace = t.sum(t.square(g));
  ad::Var mahal = t.sum(t.square(b));
  ad::Var logdet_k = t.logdet_chol(l);
  ad::Var logdet_s = t.logdet_chol(c);
  ad::Var kl = t.add(t.add(trace, mahal), t.sub(logdet_k, logdet_s));
  return t.scale(t.shift(kl, -m), 0.5);
}

}  // namespace mlgp
