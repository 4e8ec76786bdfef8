#include "mlgp/kernel.hpp"

#include <stdexcept>

namespace mlgp {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

namespace {

void check_dim(const MatrixXd& x, const KernelParams& p, const char* what) {
  if (x.cols() != p.dim()) {
    throw std::invalid_argument(std::string("kernel: ") + what +
                                " has dimension " + std::to_string(x.cols()) +
                                ", expected " + std::to_string(p.dim()));
  }
}

}  // namespace

double kernel_value(const RowVectorXd& xi, const RowVectorXd& xj,
                    const KernelParams& params) {
  if (xi.size() != params.dim() || xj.size() != params.dim()) {
    throw std::invalid_argument("kernel: input dimension mismatch");
  }
  const Eigen::ArrayXd inv_ls =
      (-params.log_lengthscales.array()).exp().transpose();
  const double sq =
      ((xi - xj).array().transpose() * inv_ls).square().sum();
  return params.signal_variance() * std::exp(-0.5 * sq);
}

MatrixXd kernel_matrix(const MatrixXd& a, const MatrixXd& b,
                       const KernelParams& params) {
  check_dim(a, params, "left input");
  check_dim(b, params, "right input");
  MatrixXd k(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      k(i, j) = kernel_value(a.row(i), b.row(j), params);
    }
  }
  return k;
}

MatrixXd kernel_matrix_sym(const MatrixXd& a, const KernelParams& params) {
  check_dim(a, params, "input");
  const double sf2 = params.signal_variance();
  MatrixXd k(a.rows(), a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    k(i, i) = sf2;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = kernel_value(a.row(i), a.row(j), params);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

VectorXd kernel_diag(int n, const KernelParams& params) {
  return VectorXd::Constant(n, params.signal_variance());
}

ad::Var kernel_matrix_var(ad::Tape& t, ad::Var a, ad::Var b, ad::Var log_sf2,
                          ad::Var log_ls) {
  const auto n = static_cast<int>(t.val(a).rows());
  const auto m = static_cast<int>(t.val(b).rows());
  if (t.val(a).cols() != t.val(log_ls).cols() ||
      t.val(b).cols() != t.val(log_ls).cols()) {
    throw std::invalid_argument("kernel: input dimension mismatch");
  }

  // scaled inputs A diag(1/l), B diag(1/l)
  ad::Var inv_ls = t.exp(t.neg(log_ls));
  ad::Var as = t.mul(a, t.broadcast_row(inv_ls, n));
  ad::Var bs = t.mul(b, t.broadcast_row(inv_ls, m));

  // ||a_i - b_j||^2 = |a_i|^2 + |b_j|^2 - 2 a_i . b_j
  ad::Var an = t.row_sum(t.square(as));  // n x 1
  ad::Var bn = t.row_sum(t.square(bs));  // m x 1
  ad::Var cross = t.matmul(as, t.transpose(bs));
  ad::Var sq = t.sub(t.add(t.broadcast_col(an, m),
                           t.broadcast_row(t.transpose(bn), n)),
                     t.scale(cross, 2.0));
  sq = t.clamp_min(sq, 0.0);

  ad::Var k = t.exp(t.add(t.broadcast_scalar(log_sf2, n, m),
                          t.scale(sq, -0.5)));
  if (a.id == b.id) {
    // floating-point GEMM does not guarantee an exactly symmetric cross term
    k = t.scale(t.add(k, t.transpose(k)), 0.5);
  }
  return k;
}

ad::Var kernel_diag_var(ad::Tape& t, int n, ad::Var log_sf2) {
  return t.exp(t.broadcast_scalar(log_sf2, n, 1));
}

}  // namespace mlgp
