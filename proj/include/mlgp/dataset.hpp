#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <map>
#include <vector>

namespace mlgp {

/// One episode on one system: time-ordered (state, control, next-state)
/// records. Consecutive records chain exactly: next_states.row(t) equals
/// states.row(t + 1).
struct Trajectory {
  int task_id = 0;
  Eigen::MatrixXd states;       // n x D
  Eigen::MatrixXd controls;     // n x K
  Eigen::MatrixXd next_states;  // n x D

  int transitions() const { return static_cast<int>(states.rows()); }
  void validate() const;

  /// Builds from the visited state sequence x_0..x_n (rows) and the n
  /// controls applied between them.
  static Trajectory from_rollout(int task_id, const Eigen::MatrixXd& visited,
                                 const Eigen::MatrixXd& controls);
};

/// Per-dimension affine rescaling to zero mean / unit variance, computed on
/// the training split and applied consistently afterwards.
struct Standardization {
  Eigen::RowVectorXd x_mean, x_std;
  Eigen::RowVectorXd c_mean, c_std;
  Eigen::RowVectorXd y_mean, y_std;

  bool empty() const { return x_mean.size() == 0; }

  Eigen::MatrixXd standardize_states(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd standardize_controls(const Eigen::MatrixXd& c) const;
  Eigen::MatrixXd standardize_targets(const Eigen::MatrixXd& y) const;
  Eigen::MatrixXd destandardize_targets(const Eigen::MatrixXd& y) const;
};

/// Trajectories grouped by task id. Data only grows; nothing is discarded.
class MultiTaskDataset {
 public:
  void add(Trajectory traj);

  std::size_t size() const { return trajectories_.size(); }
  bool empty() const { return trajectories_.empty(); }
  const Trajectory& at(std::size_t i) const { return trajectories_.at(i); }
  const std::vector<Trajectory>& trajectories() const { return trajectories_; }

  std::vector<int> task_ids() const;  // sorted, unique
  long total_transitions() const;
  long task_transitions(int task_id) const;

  /// Subset containing only the given task's trajectories.
  MultiTaskDataset task_subset(int task_id) const;

  /// Means and stds over every transition; stds floored at 1e-8. Targets are
  /// state differences x_{t+1} - x_t.
  Standardization compute_stats() const;

  void save(std::ostream& out) const;
  static MultiTaskDataset load(std::istream& in);

 private:
  std::vector<Trajectory> trajectories_;
};

}  // namespace mlgp
