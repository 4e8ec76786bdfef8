#pragma once

#include <Eigen/Dense>

#include "mlgp/autodiff.hpp"

namespace mlgp {

/// Squared-exponential covariance with ARD lengthscales. Both parameters are
/// stored in log space so positivity holds by construction.
struct KernelParams {
  Eigen::MatrixXd log_signal_variance;  // 1 x 1
  Eigen::MatrixXd log_lengthscales;     // 1 x dim

  static KernelParams init(int dim) {
    KernelParams p;
    p.log_signal_variance = Eigen::MatrixXd::Zero(1, 1);
    p.log_lengthscales = Eigen::MatrixXd::Zero(1, dim);
    return p;
  }

  int dim() const { return static_cast<int>(log_lengthscales.cols()); }
  double signal_variance() const { return std::exp(log_signal_variance(0, 0)); }
};

/// k(x_i, x_j) = sf2 * exp(-1/2 sum_d ((x_i - x_j)_d / l_d)^2)
double kernel_value(const Eigen::RowVectorXd& xi, const Eigen::RowVectorXd& xj,
                    const KernelParams& params);

/// Cross-covariance matrix, entrywise application of kernel_value.
Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& a,
                              const Eigen::MatrixXd& b,
                              const KernelParams& params);

/// K_AA with one code path for both triangles, so the result is exactly
/// symmetric and the diagonal is exactly sf2.
Eigen::MatrixXd kernel_matrix_sym(const Eigen::MatrixXd& a,
                                  const KernelParams& params);

Eigen::VectorXd kernel_diag(int n, const KernelParams& params);

/// Tape builders used wherever gradients w.r.t. inputs or hyperparameters
/// are needed. When a and b refer to the same node the result is
/// symmetrized explicitly.
ad::Var kernel_matrix_var(ad::Tape& t, ad::Var a, ad::Var b, ad::Var log_sf2,
                          ad::Var log_ls);

/// n x 1 column of prior variances (sf2 for every point).
ad::Var kernel_diag_var(ad::Tape& t, int n, ad::Var log_sf2);

}  // namespace mlgp
