#include "mlgp/latent.hpp"

#include <stdexcept>

namespace mlgp {

void LatentTable::register_task(int task_id) {
  if (has(task_id)) {
    throw std::invalid_argument("latent: task " + std::to_string(task_id) +
                                " already registered");
  }
  posteriors_.emplace(task_id, LatentPosterior::prior(q_));
}

LatentPosterior& LatentTable::at(int task_id) {
  auto it = posteriors_.find(task_id);
  if (it == posteriors_.end()) {
    throw std::invalid_argument("latent: unknown task " +
                                std::to_string(task_id));
  }
  return it->second;
}

const LatentPosterior& LatentTable::at(int task_id) const {
  auto it = posteriors_.find(task_id);
  if (it == posteriors_.end()) {
    throw std::invalid_argument("latent: unknown task " +
                                std::to_string(task_id));
  }
  return it->second;
}

std::vector<int> LatentTable::task_ids() const {
  std::vector<int> ids;
  ids.reserve(posteriors_.size());
  for (const auto& [id, _] : posteriors_) ids.push_back(id);
  return ids;
}

Eigen::RowVectorXd LatentTable::sample(int task_id, Rng& rng) const {
  const LatentPosterior& p = at(task_id);
  Eigen::RowVectorXd eps(q_);
  for (int i = 0; i < q_; ++i) eps(i) = rng.normal();
  return p.mean.row(0) + p.std().cwiseProduct(eps);
}

double LatentTable::kl() const {
  double total = 0.0;
  for (const auto& [_, p] : posteriors_) {
    const Eigen::ArrayXXd s2 = (2.0 * p.log_std.array()).exp();
    total +=
        0.5 * (s2 + p.mean.array().square() - 1.0 - 2.0 * p.log_std.array())
                  .sum();
  }
  return total;
}

ad::Var latent_sample_var(ad::Tape& t, ad::Var mean, ad::Var log_std,
                          const Eigen::RowVectorXd& eps) {
  if (t.val(mean).cols() != eps.cols()) {
    throw std::invalid_argument("latent: noise draw dimension mismatch");
  }
  ad::Var noise = t.constant(eps);
  return t.add(mean, t.mul(t.exp(log_std), noise));
}

ad::Var latent_kl_var(ad::Tape& t, ad::Var mean, ad::Var log_std) {
  ad::Var s2 = t.exp(t.scale(log_std, 2.0));
  ad::Var body = t.sub(t.shift(t.add(s2, t.square(mean)), -1.0),
                       t.scale(log_std, 2.0));
  return t.scale(t.sum(body), 0.5);
}

}  // namespace mlgp
