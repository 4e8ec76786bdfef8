#include "mlgp/dataset.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "mlgp/io.hpp"

namespace mlgp {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;

void Trajectory::validate() const {
  if (states.rows() != next_states.rows() ||
      states.rows() != controls.rows() ||
      states.cols() != next_states.cols()) {
    throw std::invalid_argument("trajectory: inconsistent record shapes");
  }
  if (!states.allFinite() || !controls.allFinite() ||
      !next_states.allFinite()) {
    throw std::invalid_argument("trajectory: non-finite values");
  }
  for (Eigen::Index t = 0; t + 1 < states.rows(); ++t) {
    if (next_states.row(t) != states.row(t + 1)) {
      throw std::invalid_argument(
          "trajectory: records do not chain at step " + std::to_string(t));
    }
  }
}

Trajectory Trajectory::from_rollout(int task_id, const MatrixXd& visited,
                                    const MatrixXd& controls) {
  if (visited.rows() != controls.rows() + 1) {
    throw std::invalid_argument(
        "trajectory: need one more visited state than controls");
  }
  Trajectory traj;
  traj.task_id = task_id;
  traj.states = visited.topRows(visited.rows() - 1);
  traj.controls = controls;
  traj.next_states = visited.bottomRows(visited.rows() - 1);
  traj.validate();
  return traj;
}

namespace {

MatrixXd apply_affine(const MatrixXd& x, const RowVectorXd& mean,
                      const RowVectorXd& std, bool forward) {
  if (x.cols() != mean.cols()) {
    throw std::invalid_argument("standardization: dimension mismatch");
  }
  if (x.cols() == 0) return x;
  if (forward) {
    return (x.rowwise() - mean).array().rowwise() / std.array();
  }
  return (x.array().rowwise() * std.array()).matrix().rowwise() + mean;
}

}  // namespace

MatrixXd Standardization::standardize_states(const MatrixXd& x) const {
  return apply_affine(x, x_mean, x_std, true);
}
MatrixXd Standardization::standardize_controls(const MatrixXd& c) const {
  return apply_affine(c, c_mean, c_std, true);
}
MatrixXd Standardization::standardize_targets(const MatrixXd& y) const {
  return apply_affine(y, y_mean, y_std, true);
}
MatrixXd Standardization::destandardize_targets(const MatrixXd& y) const {
  return apply_affine(y, y_mean, y_std, false);
}

void MultiTaskDataset::add(Trajectory traj) {
  traj.validate();
  trajectories_.push_back(std::move(traj));
}

std::vector<int> MultiTaskDataset::task_ids() const {
  std::set<int> ids;
  for (const auto& t : trajectories_) ids.insert(t.task_id);
  return {ids.begin(), ids.end()};
}

long MultiTaskDataset::total_transitions() const {
  long n = 0;
  for (const auto& t : trajectories_) n += t.transitions();
  return n;
}

long MultiTaskDataset::task_transitions(int task_id) const {
  long n = 0;
  for (const auto& t : trajectories_) {
    if (t.task_id == task_id) n += t.transitions();
  }
  return n;
}

MultiTaskDataset MultiTaskDataset::task_subset(int task_id) const {
  MultiTaskDataset out;
  for (const auto& t : trajectories_) {
    if (t.task_id == task_id) out.trajectories_.push_back(t);
  }
  return out;
}

Standardization MultiTaskDataset::compute_stats() const {
  if (trajectories_.empty()) {
    throw std::invalid_argument("dataset: cannot standardize empty dataset");
  }
  const long n = total_transitions();
  const auto dim_x = trajectories_.front().states.cols();
  const auto dim_c = trajectories_.front().controls.cols();

  MatrixXd xs(n, dim_x), cs(n, dim_c), ys(n, dim_x);
  long row = 0;
  for (const auto& t : trajectories_) {
    xs.middleRows(row, t.transitions()) = t.states;
    cs.middleRows(row, t.transitions()) = t.controls;
    ys.middleRows(row, t.transitions()) = t.next_states - t.states;
    row += t.transitions();
  }

  auto stats_of = [n](const MatrixXd& data) {
    RowVectorXd mean = data.colwise().mean();
    RowVectorXd var =
        (data.rowwise() - mean).array().square().colwise().sum() /
        static_cast<double>(n);
    RowVectorXd std = var.array().sqrt().max(1e-8);
    return std::pair<RowVectorXd, RowVectorXd>(mean, std);
  };

  Standardization s;
  std::tie(s.x_mean, s.x_std) = stats_of(xs);
  std::tie(s.c_mean, s.c_std) = stats_of(cs);
  // Targets are rescaled but not centered: a zero GP posterior must keep
  // predicting "no state change" in natural units.
  s.y_mean = RowVectorXd::Zero(dim_x);
  s.y_std = (ys.array().square().colwise().sum() / static_cast<double>(n))
                .sqrt()
                .max(1e-8);
  return s;
}

namespace {
constexpr char kDatasetMagic[] = "MLGPDATA";
constexpr std::uint32_t kDatasetVersion = 1;
}  // namespace

void MultiTaskDataset::save(std::ostream& out) const {
  io::Writer w(out);
  w.magic(kDatasetMagic);
  w.u32(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(trajectories_.size()));
  for (const auto& t : trajectories_) {
    w.i32(t.task_id);
    w.mat(t.states);
    w.mat(t.controls);
    w.mat(t.next_states);
  }
}

MultiTaskDataset MultiTaskDataset::load(std::istream& in) {
  io::Reader r(in);
  r.magic(kDatasetMagic);
  io::check_version(r.u32(), kDatasetVersion, "dataset");
  const std::uint32_t count = r.u32();
  MultiTaskDataset d;
  for (std::uint32_t i = 0; i < count; ++i) {
    Trajectory t;
    t.task_id = r.i32();
    t.states = r.mat();
    t.controls = r.mat();
    t.next_states = r.mat();
    d.add(std::move(t));
  }
  return d;
}

}  // namespace mlgp
