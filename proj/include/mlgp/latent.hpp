#pragma once

#include <Eigen/Dense>
#include <map>
#include <vector>

#include "mlgp/autodiff.hpp"
#include "mlgp/rng.hpp"

namespace mlgp {

/// Diagonal Gaussian posterior over one task's latent vector. The standard
/// deviations are stored as logs so they stay strictly positive.
struct LatentPosterior {
  Eigen::MatrixXd mean;     // 1 x Q
  Eigen::MatrixXd log_std;  // 1 x Q

  static LatentPosterior prior(int q) {
    LatentPosterior p;
    p.mean = Eigen::MatrixXd::Zero(1, q);
    p.log_std = Eigen::MatrixXd::Zero(1, q);
    return p;
  }

  int dim() const { return static_cast<int>(mean.cols()); }
  Eigen::RowVectorXd std() const { return log_std.array().exp(); }
};

/// Per-task latent posteriors under a standard-normal prior. Q = 0 turns the
/// whole mechanism into a no-op (the sparse-GP baseline).
class LatentTable {
 public:
  explicit LatentTable(int q = 0) : q_(q) {}

  int latent_dim() const { return q_; }

  /// Initializes a fresh task at the prior (0, I). Throws on duplicates.
  void register_task(int task_id);
  bool has(int task_id) const { return posteriors_.count(task_id) > 0; }
  LatentPosterior& at(int task_id);
  const LatentPosterior& at(int task_id) const;
  std::vector<int> task_ids() const;
  std::size_t size() const { return posteriors_.size(); }

  /// Reparameterized draw mean + std .* eps with eps ~ N(0, I).
  Eigen::RowVectorXd sample(int task_id, Rng& rng) const;

  /// Sum over tasks and coordinates of KL(N(n, s^2) || N(0, 1)).
  double kl() const;

 private:
  int q_;
  std::map<int, LatentPosterior> posteriors_;
};

/// Tape builders for one task. eps is a fixed noise draw, so the sample is
/// differentiable w.r.t. both variational parameters.
ad::Var latent_sample_var(ad::Tape& t, ad::Var mean, ad::Var log_std,
                          const Eigen::RowVectorXd& eps);
ad::Var latent_kl_var(ad::Tape& t, ad::Var mean, ad::Var log_std);

}  // namespace mlgp
