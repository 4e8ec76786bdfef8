#include "mlgp/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

#include "mlgp/io.hpp"

namespace mlgp {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

MlgpModel::MlgpModel(const ModelConfig& cfg)
    : cfg_(cfg), latents_(cfg.latent_dim) {
  if (cfg.state_dim < 1 || cfg.control_dim < 0 || cfg.latent_dim < 0 ||
      cfg.num_inducing < 1) {
    throw std::invalid_argument("model: invalid dimensions");
  }
  kernel_ = KernelParams::init(augmented_dim());
  log_noise_ = MatrixXd::Constant(1, cfg.state_dim, std::log(cfg.noise_init));
  outputs_.assign(cfg.state_dim, OutputVariational::init(cfg.num_inducing));
}

// ---------------------------------------------------------------------------
// ELBO assembly

/// Parameter handles bound onto one tape. Depending on the trainable groups
/// a handle is either a leaf (gradient flows) or a constant.
struct ElboBuilder {
  ad::Var log_sf2, log_ls, log_noise, z;
  std::vector<ad::Var> m, c_param;
  std::map<int, std::pair<ad::Var, ad::Var>> latent;  // mean, log_std
  std::set<int> trainable_latents;
  TrainableGroups groups = TrainableGroups::All;

  static ElboBuilder bind(ad::Tape& t, const MlgpModel& model,
                          TrainableGroups groups,
                          const std::set<int>& fragment_tasks) {
    ElboBuilder b;
    b.groups = groups;
    const bool all = groups == TrainableGroups::All;
    auto inject = [&t](const MatrixXd& v, bool train) {
      return train ? t.leaf(v) : t.constant(v);
    };
    b.log_sf2 = inject(model.kernel().log_signal_variance, all);
    b.log_ls = inject(model.kernel().log_lengthscales, all);
    b.log_noise = inject(model.log_noise(), all);
    b.z = inject(model.inducing().Z, all);
    for (const auto& q : model.outputs()) {
      b.m.push_back(inject(q.m, all));
      b.c_param.push_back(inject(q.C_param, all));
    }
    for (int id : model.latents().task_ids()) {
      const bool train = all || fragment_tasks.count(id) > 0;
      const auto& p = model.latents().at(id);
      b.latent.emplace(id, std::make_pair(inject(p.mean, train),
                                          inject(p.log_std, train)));
      if (train) b.trainable_latents.insert(id);
    }
    return b;
  }

  /// Builds the minibatch ELBO: rescaled expected log-likelihood minus both
  /// KL terms. One latent sample per task, drawn from rng in ascending task
  /// order.
  ad::Var build(ad::Tape& t, const MlgpModel& model,
                const MultiTaskDataset& data,
                const std::vector<std::size_t>& indices,
                long total_transitions, Rng& rng) const {
    if (indices.empty()) {
      throw std::invalid_argument("elbo: empty minibatch");
    }
    if (!model.initialized()) {
      throw std::logic_error("elbo: model not initialized (fit first)");
    }
    const int q_dim = model.config().latent_dim;
    const int d_dim = model.config().state_dim;
    const Standardization& stats = model.stats();

    // group selected trajectories by task
    std::map<int, std::vector<std::size_t>> by_task;
    for (std::size_t i : indices) {
      const int id = data.at(i).task_id;
      if (!model.latents().has(id)) {
        throw std::invalid_argument("elbo: unknown task id " +
                                    std::to_string(id));
      }
      by_task[id].push_back(i);
    }

    ad::Var inputs;  // n x (D + K + Q)
    std::vector<MatrixXd> target_blocks;
    long n_total = 0;
    for (const auto& [task_id, trajs] : by_task) {
      long n_task = 0;
      for (std::size_t i : trajs) n_task += data.at(i).transitions();
      MatrixXd xb(n_task, model.config().state_dim + model.config().control_dim);
      MatrixXd yb(n_task, d_dim);
      long row = 0;
      for (std::size_t i : trajs) {
        const Trajectory& traj = data.at(i);
        const long n = traj.transitions();
        xb.block(row, 0, n, model.config().state_dim) =
            stats.standardize_states(traj.states);
        if (model.config().control_dim > 0) {
          xb.block(row, model.config().state_dim, n,
                   model.config().control_dim) =
              stats.standardize_controls(traj.controls);
        }
        yb.middleRows(row, n) =
            stats.standardize_targets(traj.next_states - traj.states);
        row += n;
      }
      target_blocks.push_back(std::move(yb));

      ad::Var xp = t.constant(xb);
      if (q_dim > 0) {
        RowVectorXd eps(q_dim);
        for (int i = 0; i < q_dim; ++i) eps(i) = rng.normal();
        const auto& [mean, log_std] = latent.at(task_id);
        ad::Var h = latent_sample_var(t, mean, log_std, eps);
        xp = t.hcat(xp, t.broadcast_row(h, static_cast<int>(n_task)));
      }
      inputs = inputs.valid() ? t.vcat(inputs, xp) : xp;
      n_total += n_task;
    }

    MatrixXd targets(n_total, d_dim);
    long row = 0;
    for (const auto& yb : target_blocks) {
      targets.middleRows(row, yb.rows()) = yb;
      row += yb.rows();
    }
    ad::Var y = t.constant(targets);

    // shared sparse-GP pieces
    ad::Var kzz = kernel_matrix_var(t, z, z, log_sf2, log_ls);
    ad::Var l = t.cholesky(kzz);
    ad::Var kzx = kernel_matrix_var(t, z, inputs, log_sf2, log_ls);
    ad::Var a = t.trisolve(l, kzx);
    ad::Var kdiag = kernel_diag_var(t, static_cast<int>(n_total), log_sf2);

    const double log2pi = std::log(2.0 * std::numbers::pi);
    ad::Var loglik, kl_u;
    for (int d = 0; d < d_dim; ++d) {
      ad::Var c = t.tril_exp_diag(c_param[d]);
      ad::Var b = t.trisolve(l, m[d]);
      ad::Var g = t.trisolve(l, c);
      ad::Var mu = svgp_mean(t, a, b);
      ad::Var var = svgp_var_diag(t, a, g, kdiag);

      // E_q[log N(y | f, s2)] = log N(y | mu, s2) - var / (2 s2)
      ad::Var yd = t.slice(y, 0, d, static_cast<int>(n_total), 1);
      ad::Var sq = t.add(t.square(t.sub(yd, mu)), var);
      ad::Var noise_d = t.slice(log_noise, 0, d, 1, 1);
      ad::Var weighted = t.mul(t.sum(sq), t.exp(t.neg(noise_d)));
      ad::Var consts = t.shift(t.scale(noise_d, static_cast<double>(n_total)),
                               static_cast<double>(n_total) * log2pi);
      ad::Var ll_d = t.scale(t.add(weighted, consts), -0.5);
      loglik = loglik.valid() ? t.add(loglik, ll_d) : ll_d;

      ad::Var kl_d = svgp_kl(t, b, g, l, c);
      kl_u = kl_u.valid() ? t.add(kl_u, kl_d) : kl_d;
    }

    const double rescale =
        static_cast<double>(total_transitions) / static_cast<double>(n_total);
    ad::Var bound = t.sub(t.scale(loglik, rescale), kl_u);

    if (q_dim > 0) {
      ad::Var kl_h;
      for (const auto& [id, vars] : latent) {
        ad::Var kl_p = latent_kl_var(t, vars.first, vars.second);
        kl_h = kl_h.valid() ? t.add(kl_h, kl_p) : kl_p;
      }
      if (kl_h.valid()) bound = t.sub(bound, kl_h);
    }
    return bound;
  }
};

namespace {

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

/// Distinct trajectory indices, ascending, chosen uniformly.
std::vector<std::size_t> sample_batch(std::size_t n, int batch, Rng& rng) {
  if (batch <= 0 || static_cast<std::size_t>(batch) >= n) {
    return all_indices(n);
  }
  std::vector<std::size_t> pool = all_indices(n);
  for (int i = 0; i < batch; ++i) {
    const std::size_t j =
        i + static_cast<std::size_t>(rng.next_u64() % (n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(batch);
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::set<int> dataset_tasks(const MultiTaskDataset& data) {
  const auto ids = data.task_ids();
  return {ids.begin(), ids.end()};
}

}  // namespace

double MlgpModel::elbo(const MultiTaskDataset& batch, long total_transitions,
                       Rng& rng) const {
  ad::Tape t;
  ElboBuilder b =
      ElboBuilder::bind(t, *this, TrainableGroups::All, dataset_tasks(batch));
  ad::Var v = b.build(t, *this, batch, all_indices(batch.size()),
                      total_transitions, rng);
  return t.val(v)(0, 0);
}

std::map<std::string, MatrixXd> MlgpModel::elbo_gradients(
    const MultiTaskDataset& batch, long total_transitions, Rng& rng,
    TrainableGroups groups) const {
  ad::Tape t;
  ElboBuilder b = ElboBuilder::bind(t, *this, groups, dataset_tasks(batch));
  ad::Var v = b.build(t, *this, batch, all_indices(batch.size()),
                      total_transitions, rng);
  t.backward(v);

  std::map<std::string, MatrixXd> grads;
  grads["kernel.log_sf2"] = t.grad(b.log_sf2);
  grads["kernel.log_ls"] = t.grad(b.log_ls);
  grads["log_noise"] = t.grad(b.log_noise);
  grads["Z"] = t.grad(b.z);
  for (std::size_t d = 0; d < b.m.size(); ++d) {
    grads["m[" + std::to_string(d) + "]"] = t.grad(b.m[d]);
    grads["C[" + std::to_string(d) + "]"] = t.grad(b.c_param[d]);
  }
  for (const auto& [id, vars] : b.latent) {
    grads["latent[" + std::to_string(id) + "].mean"] = t.grad(vars.first);
    grads["latent[" + std::to_string(id) + "].log_std"] = t.grad(vars.second);
  }
  return grads;
}

FitResult MlgpModel::fit(const MultiTaskDataset& data, const FitConfig& cfg,
                         Rng& rng) {
  if (data.empty()) {
    throw std::invalid_argument("fit: empty dataset");
  }
  for (int id : data.task_ids()) {
    if (!latents_.has(id)) latents_.register_task(id);
  }
  if (cfg.groups == TrainableGroups::All) {
    // Stats freeze at the first full fit: every parameter lives in
    // standardized coordinates, so rescaling mid-training would silently
    // distort the learned model.
    if (stats_.empty()) stats_ = data.compute_stats();
    if (inducing_.count() == 0) init_inducing(data, rng);
  } else if (!initialized()) {
    throw std::logic_error("fit: latent-only fit needs an initialized model");
  }

  const std::set<int> fragment_tasks = dataset_tasks(data);
  const long total = data.total_transitions();
  Adam optimizer(cfg.adam);
  FitResult result;
  result.loss_trace.reserve(cfg.steps);

  for (int step = 0; step < cfg.steps; ++step) {
    const auto indices =
        sample_batch(data.size(), cfg.batch_trajectories, rng);

    ad::Tape t;
    ElboBuilder b = ElboBuilder::bind(t, *this, cfg.groups, fragment_tasks);
    ad::Var bound = b.build(t, *this, data, indices, total, rng);
    ad::Var loss = t.neg(bound);
    const double loss_value = t.val(loss)(0, 0);
    if (!std::isfinite(loss_value)) {
      throw std::runtime_error("fit: non-finite loss at step " +
                               std::to_string(step));
    }
    result.loss_trace.push_back(loss_value);
    t.backward(loss);

    std::vector<MatrixXd*> params;
    std::vector<const MatrixXd*> grads;
    std::vector<MatrixXd> grad_store;
    grad_store.reserve(8 + 2 * outputs_.size() + 2 * b.trainable_latents.size());
    auto push = [&](MatrixXd& p, ad::Var v) {
      params.push_back(&p);
      grad_store.push_back(t.grad(v));
    };
    if (cfg.groups == TrainableGroups::All) {
      push(kernel_.log_signal_variance, b.log_sf2);
      push(kernel_.log_lengthscales, b.log_ls);
      push(log_noise_, b.log_noise);
      push(inducing_.Z, b.z);
      for (std::size_t d = 0; d < outputs_.size(); ++d) {
        push(outputs_[d].m, b.m[d]);
        push(outputs_[d].C_param, b.c_param[d]);
      }
    }
    for (int id : b.trainable_latents) {
      auto& p = latents_.at(id);
      push(p.mean, b.latent.at(id).first);
      push(p.log_std, b.latent.at(id).second);
    }
    grads.reserve(grad_store.size());
    for (const auto& g : grad_store) grads.push_back(&g);
    optimizer.step(params, grads);
  }
  return result;
}

void MlgpModel::infer_latent(int task_id, const MultiTaskDataset& fragment,
                             const FitConfig& cfg, Rng& rng) {
  if (!latents_.has(task_id)) latents_.register_task(task_id);
  if (fragment.empty() || fragment.total_transitions() == 0) return;
  FitConfig latent_cfg = cfg;
  latent_cfg.groups = TrainableGroups::LatentOnly;
  fit(fragment, latent_cfg, rng);
}

// ---------------------------------------------------------------------------
// Inducing-point initialization: k-means++ style seeding over standardized
// (x, c) inputs; latent coordinates drawn from the prior.

void MlgpModel::init_inducing(const MultiTaskDataset& data, Rng& rng) {
  const int m_count = cfg_.num_inducing;
  const long n = data.total_transitions();
  const int dim_xc = cfg_.state_dim + cfg_.control_dim;

  MatrixXd pool(n, dim_xc);
  long row = 0;
  for (const auto& traj : data.trajectories()) {
    const long len = traj.transitions();
    pool.block(row, 0, len, cfg_.state_dim) =
        stats_.standardize_states(traj.states);
    if (cfg_.control_dim > 0) {
      pool.block(row, cfg_.state_dim, len, cfg_.control_dim) =
          stats_.standardize_controls(traj.controls);
    }
    row += len;
  }

  std::vector<long> chosen;
  chosen.reserve(m_count);
  if (n < 3L * m_count) {
    // data-poor regime: random subset, recycling rows when n < M
    std::vector<long> order(n);
    for (long i = 0; i < n; ++i) order[i] = i;
    for (long i = 0; i < std::min<long>(m_count, n); ++i) {
      const long j = i + static_cast<long>(rng.next_u64() % (n - i));
      std::swap(order[i], order[j]);
      chosen.push_back(order[i]);
    }
    while (static_cast<int>(chosen.size()) < m_count) {
      chosen.push_back(static_cast<long>(rng.next_u64() % n));
    }
  } else {
    // k-means++ seeding: spread the centers over the data
    chosen.push_back(static_cast<long>(rng.next_u64() % n));
    VectorXd dist2 =
        (pool.rowwise() - pool.row(chosen[0])).rowwise().squaredNorm();
    while (static_cast<int>(chosen.size()) < m_count) {
      const double total = dist2.sum();
      long pick = 0;
      if (total > 0.0) {
        double target = rng.uniform() * total;
        for (long i = 0; i < n; ++i) {
          target -= dist2(i);
          if (target <= 0.0) {
            pick = i;
            break;
          }
        }
      } else {
        pick = static_cast<long>(rng.next_u64() % n);
      }
      chosen.push_back(pick);
      dist2 = dist2.cwiseMin(
          (pool.rowwise() - pool.row(pick)).rowwise().squaredNorm());
    }
  }

  inducing_.Z.resize(m_count, augmented_dim());
  for (int i = 0; i < m_count; ++i) {
    inducing_.Z.block(i, 0, 1, dim_xc) = pool.row(chosen[i]);
    for (int q = 0; q < cfg_.latent_dim; ++q) {
      inducing_.Z(i, dim_xc + q) = rng.normal();
    }
  }
}

// ---------------------------------------------------------------------------
// Prediction

MlgpModel::PredictorCache MlgpModel::make_predictor_cache() const {
  if (!initialized()) {
    throw std::logic_error("predict: model not initialized");
  }
  PredictorCache cache;
  cache.L = ad::cholesky_jitter(kernel_matrix_sym(inducing_.Z, kernel_)).L;
  cache.B.resize(inducing_.count(), cfg_.state_dim);
  auto lower = cache.L.triangularView<Eigen::Lower>();
  for (int d = 0; d < cfg_.state_dim; ++d) {
    cache.B.col(d) = lower.solve(outputs_[d].m);
    cache.G.push_back(lower.solve(outputs_[d].factor()));
  }
  return cache;
}

Prediction MlgpModel::predict_delta_std(const RowVectorXd& x_aug) const {
  const PredictorCache cache = make_predictor_cache();
  const MatrixXd kzx = kernel_matrix(inducing_.Z, x_aug, kernel_);
  const VectorXd a = cache.L.triangularView<Eigen::Lower>().solve(kzx);
  const double prior = kernel_.signal_variance();
  const double qff = a.squaredNorm();

  Prediction p;
  p.mean.resize(cfg_.state_dim);
  p.var.resize(cfg_.state_dim);
  for (int d = 0; d < cfg_.state_dim; ++d) {
    p.mean(d) = a.dot(cache.B.col(d));
    const double sterm = (cache.G[d].transpose() * a).squaredNorm();
    p.var(d) = std::max(prior - qff + sterm, kVarianceFloor);
  }
  return p;
}

Prediction MlgpModel::predict_delta(const VectorXd& x, const VectorXd& c,
                                    const LatentPosterior& posterior,
                                    LatentMode mode, Rng* rng) const {
  if (x.size() != cfg_.state_dim || c.size() != cfg_.control_dim) {
    throw std::invalid_argument("predict: input dimension mismatch");
  }
  if (posterior.dim() != cfg_.latent_dim) {
    throw std::invalid_argument("predict: latent dimension mismatch");
  }
  if (!x.allFinite() || !c.allFinite()) {
    throw std::invalid_argument("predict: non-finite inputs");
  }

  RowVectorXd x_aug(augmented_dim());
  x_aug.head(cfg_.state_dim) =
      stats_.standardize_states(x.transpose()).row(0);
  if (cfg_.control_dim > 0) {
    x_aug.segment(cfg_.state_dim, cfg_.control_dim) =
        stats_.standardize_controls(c.transpose()).row(0);
  }
  if (cfg_.latent_dim > 0) {
    RowVectorXd h = posterior.mean.row(0);
    if (mode == LatentMode::Sample) {
      if (rng == nullptr) {
        throw std::invalid_argument("predict: sample mode needs an rng");
      }
      for (int q = 0; q < cfg_.latent_dim; ++q) {
        h(q) += posterior.std()(q) * rng->normal();
      }
    }
    x_aug.tail(cfg_.latent_dim) = h;
  }

  Prediction p = predict_delta_std(x_aug);
  const Eigen::ArrayXd y_std = stats_.y_std.transpose().array();
  const Eigen::ArrayXd noise = noise_variances().array();
  p.var = ((p.var.array() + noise) * y_std.square()).matrix();
  p.mean = (p.mean.array() * y_std).matrix() +
           stats_.y_mean.transpose();
  return p;
}

Prediction MlgpModel::predict(const VectorXd& x, const VectorXd& c,
                              const LatentPosterior& posterior,
                              LatentMode mode, Rng* rng) const {
  Prediction p = predict_delta(x, c, posterior, mode, rng);
  p.mean += x;
  return p;
}

Prediction MlgpModel::predict(const VectorXd& x, const VectorXd& c,
                              int task_id, LatentMode mode, Rng* rng) const {
  return predict(x, c, latents_.at(task_id), mode, rng);
}

MlgpModel::TapePredictive MlgpModel::predictive_var(
    ad::Tape& t, ad::Var x_aug, const PredictorCache& cache) const {
  const auto n = static_cast<int>(t.val(x_aug).rows());
  ad::Var z = t.constant(inducing_.Z);
  ad::Var log_sf2 = t.constant(kernel_.log_signal_variance);
  ad::Var log_ls = t.constant(kernel_.log_lengthscales);
  ad::Var l = t.constant(cache.L);
  ad::Var b_all = t.constant(cache.B);

  ad::Var kzx = kernel_matrix_var(t, z, x_aug, log_sf2, log_ls);
  ad::Var a = t.trisolve(l, kzx);
  ad::Var mean = t.matmul(t.transpose(a), b_all);  // n x D

  ad::Var kdiag = kernel_diag_var(t, n, log_sf2);
  ad::Var qff = t.transpose(t.col_sum(t.square(a)));
  ad::Var var;
  for (int d = 0; d < cfg_.state_dim; ++d) {
    ad::Var g = t.constant(cache.G[d]);
    ad::Var w = t.matmul(t.transpose(g), a);
    ad::Var sterm = t.transpose(t.col_sum(t.square(w)));
    ad::Var vd = t.clamp_min(t.add(t.sub(kdiag, qff), sterm), kVarianceFloor);
    var = var.valid() ? t.hcat(var, vd) : vd;
  }
  ad::Var noise = t.broadcast_row(
      t.constant(log_noise_.array().exp().matrix()), n);
  return {mean, t.add(var, noise)};
}

// ---------------------------------------------------------------------------
// Checkpointing

namespace {
constexpr char kModelMagic[] = "MLGPCKPT";
constexpr std::uint32_t kModelVersion = 1;

MatrixXd row_to_mat(const RowVectorXd& v) { return v; }
RowVectorXd mat_to_row(const MatrixXd& m) { return m.row(0); }
}  // namespace

void MlgpModel::save(std::ostream& out, const Rng* rng) const {
  io::Writer w(out);
  w.magic(kModelMagic);
  w.u32(kModelVersion);
  w.i32(cfg_.state_dim);
  w.i32(cfg_.control_dim);
  w.i32(cfg_.latent_dim);
  w.i32(cfg_.num_inducing);
  w.f64(cfg_.noise_init);
  w.mat(kernel_.log_signal_variance);
  w.mat(kernel_.log_lengthscales);
  w.mat(log_noise_);
  w.mat(inducing_.Z);
  w.u32(static_cast<std::uint32_t>(outputs_.size()));
  for (const auto& q : outputs_) {
    w.mat(q.m);
    w.mat(q.C_param);
  }
  const auto ids = latents_.task_ids();
  w.u32(static_cast<std::uint32_t>(ids.size()));
  for (int id : ids) {
    w.i32(id);
    w.mat(latents_.at(id).mean);
    w.mat(latents_.at(id).log_std);
  }
  w.u32(stats_.empty() ? 0 : 1);
  if (!stats_.empty()) {
    w.mat(row_to_mat(stats_.x_mean));
    w.mat(row_to_mat(stats_.x_std));
    w.mat(row_to_mat(stats_.c_mean));
    w.mat(row_to_mat(stats_.c_std));
    w.mat(row_to_mat(stats_.y_mean));
    w.mat(row_to_mat(stats_.y_std));
  }
  w.u32(rng == nullptr ? 0 : 1);
  if (rng != nullptr) {
    for (auto s : rng->state()) w.u64(s);
  }
}

MlgpModel MlgpModel::load(std::istream& in, Rng* rng_out) {
  io::Reader r(in);
  r.magic(kModelMagic);
  io::check_version(r.u32(), kModelVersion, "checkpoint");
  ModelConfig cfg;
  cfg.state_dim = r.i32();
  cfg.control_dim = r.i32();
  cfg.latent_dim = r.i32();
  cfg.num_inducing = r.i32();
  cfg.noise_init = r.f64();

  MlgpModel model(cfg);
  model.kernel_.log_signal_variance = r.mat();
  model.kernel_.log_lengthscales = r.mat();
  model.log_noise_ = r.mat();
  model.inducing_.Z = r.mat();
  const std::uint32_t outputs = r.u32();
  if (outputs != static_cast<std::uint32_t>(cfg.state_dim)) {
    throw std::runtime_error("checkpoint: output count mismatch");
  }
  for (std::uint32_t d = 0; d < outputs; ++d) {
    model.outputs_[d].m = r.mat();
    model.outputs_[d].C_param = r.mat();
  }
  const std::uint32_t tasks = r.u32();
  for (std::uint32_t i = 0; i < tasks; ++i) {
    const int id = r.i32();
    model.latents_.register_task(id);
    model.latents_.at(id).mean = r.mat();
    model.latents_.at(id).log_std = r.mat();
  }
  if (r.u32() == 1) {
    model.stats_.x_mean = mat_to_row(r.mat());
    model.stats_.x_std = mat_to_row(r.mat());
    model.stats_.c_mean = mat_to_row(r.mat());
    model.stats_.c_std = mat_to_row(r.mat());
    model.stats_.y_mean = mat_to_row(r.mat());
    model.stats_.y_std = mat_to_row(r.mat());
  }
  if (r.u32() == 1) {
    std::array<std::uint64_t, 4> state;
    for (auto& s : state) s = r.u64();
    if (rng_out != nullptr) rng_out->set_state(state);
  }
  return model;
}

}  // namespace mlgp
