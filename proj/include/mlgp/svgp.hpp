#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mlgp/autodiff.hpp"
#include "mlgp/kernel.hpp"

namespace mlgp {

/// Inducing inputs shared by every output GP.
struct InducingSet {
  Eigen::MatrixXd Z;  // M x dim (standardized augmented inputs)

  int count() const { return static_cast<int>(Z.rows()); }
  int dim() const { return static_cast<int>(Z.cols()); }
};

/// Per-output variational distribution q(u) = N(m, S) with S = C C^T.
/// C is parameterized as an unconstrained square matrix whose strict lower
/// triangle is used as-is and whose diagonal is exponentiated, so S stays
/// positive semi-definite under unconstrained optimization.
struct OutputVariational {
  Eigen::MatrixXd m;        // M x 1
  Eigen::MatrixXd C_param;  // M x M

  static OutputVariational init(int num_inducing) {
    OutputVariational v;
    v.m = Eigen::MatrixXd::Zero(num_inducing, 1);
    v.C_param = Eigen::MatrixXd::Zero(num_inducing, num_inducing);
    return v;  // C = I, so S = I
  }

  /// The lower-triangular factor C.
  Eigen::MatrixXd factor() const {
    Eigen::MatrixXd c = C_param.triangularView<Eigen::StrictlyLower>();
    c.diagonal() = C_param.diagonal().array().exp();
    return c;
  }

  Eigen::MatrixXd covariance() const {
    const Eigen::MatrixXd c = factor();
    return c * c.transpose();
  }

  /// Sets C_param so that factor() reproduces the given lower-triangular
  /// factor (diagonal must be strictly positive).
  static OutputVariational from_moments(const Eigen::VectorXd& mean,
                                        const Eigen::MatrixXd& cov_factor);
};

inline constexpr double kVarianceFloor = 1e-12;

/// Posterior mean at rows of x_star: k_Z(x)^T Kzz^{-1} m, via Cholesky.
Eigen::VectorXd posterior_mean(const Eigen::MatrixXd& x_star,
                               const InducingSet& inducing,
                               const Eigen::MatrixXd& m,
                               const KernelParams& params);

/// Diagonal of the posterior covariance, floored at kVarianceFloor.
Eigen::VectorXd posterior_var(const Eigen::MatrixXd& x_star,
                              const InducingSet& inducing,
                              const OutputVariational& q,
                              const KernelParams& params);

/// KL(q(U) || p(U)) summed over output dimensions.
double kl_inducing(const std::vector<OutputVariational>& outputs,
                   const InducingSet& inducing, const KernelParams& params);

/// Tape builders. The posterior for a batch is assembled from shared pieces:
///   L = chol(Kzz), A = L^{-1} Kzx, b = L^{-1} m, G = L^{-1} C.
ad::Var svgp_mean(ad::Tape& t, ad::Var a, ad::Var b);  // A^T b, n x 1
ad::Var svgp_var_diag(ad::Tape& t, ad::Var a, ad::Var g, ad::Var kdiag);
ad::Var svgp_kl(ad::Tape& t, ad::Var b, ad::Var g, ad::Var l, ad::Var c);

}  // namespace mlgp
