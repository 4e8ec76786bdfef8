#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "mlgp/adam.hpp"
#include "mlgp/autodiff.hpp"
#include "mlgp/dataset.hpp"
#include "mlgp/kernel.hpp"
#include "mlgp/latent.hpp"
#include "mlgp/rng.hpp"
#include "mlgp/svgp.hpp"

namespace mlgp {

struct ModelConfig {
  int state_dim = 0;
  int control_dim = 0;
  int latent_dim = 2;  // Q = 0 gives the sparse-GP baseline
  int num_inducing = 30;
  double noise_init = 1e-2;  // initial sigma_d^2, standardized units
};

enum class TrainableGroups { All, LatentOnly };

struct FitConfig {
  int steps = 1000;
  int batch_trajectories = 2;
  AdamConfig adam;
  TrainableGroups groups = TrainableGroups::All;
};

struct FitResult {
  std::vector<double> loss_trace;  // negative ELBO per step
};

enum class LatentMode { Sample, MeanLatent };

struct Prediction {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;  // diagonal, includes likelihood noise
};

/// Latent-conditioned sparse-GP dynamics model over augmented inputs
/// (x, c, h). One shared inducing set and kernel; independent q(u^d) per
/// output dimension; one diagonal Gaussian latent posterior per task.
class MlgpModel {
 public:
  MlgpModel() = default;
  explicit MlgpModel(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  int augmented_dim() const {
    return cfg_.state_dim + cfg_.control_dim + cfg_.latent_dim;
  }
  bool initialized() const {
    return inducing_.count() > 0 && !stats_.empty();
  }

  KernelParams& kernel() { return kernel_; }
  const KernelParams& kernel() const { return kernel_; }
  Eigen::MatrixXd& log_noise() { return log_noise_; }
  const Eigen::MatrixXd& log_noise() const { return log_noise_; }
  Eigen::VectorXd noise_variances() const {
    return log_noise_.array().exp().transpose();
  }
  InducingSet& inducing() { return inducing_; }
  const InducingSet& inducing() const { return inducing_; }
  std::vector<OutputVariational>& outputs() { return outputs_; }
  const std::vector<OutputVariational>& outputs() const { return outputs_; }
  LatentTable& latents() { return latents_; }
  const LatentTable& latents() const { return latents_; }
  Standardization& stats() { return stats_; }
  const Standardization& stats() const { return stats_; }

  void register_task(int task_id) { latents_.register_task(task_id); }

  /// Monte-Carlo ELBO of a minibatch, rescaled to the full dataset size.
  /// One latent sample per task per call, drawn from rng.
  double elbo(const MultiTaskDataset& batch, long total_transitions,
              Rng& rng) const;

  /// ELBO gradients by parameter-group name ("kernel.log_ls", "Z", "m[0]",
  /// "latent[3].mean", ...). Consumes rng exactly like elbo().
  std::map<std::string, Eigen::MatrixXd> elbo_gradients(
      const MultiTaskDataset& batch, long total_transitions, Rng& rng,
      TrainableGroups groups = TrainableGroups::All) const;

  /// Adam on the negative ELBO over minibatches of whole trajectories.
  /// groups = All recomputes standardization stats and, on the first call,
  /// initializes the inducing set; LatentOnly touches nothing but the
  /// latent posteriors of tasks present in `data`.
  FitResult fit(const MultiTaskDataset& data, const FitConfig& cfg, Rng& rng);

  /// Latent-only fit on a trajectory fragment (Algorithm-style online
  /// inference). A fragment with zero transitions leaves the posterior
  /// untouched.
  void infer_latent(int task_id, const MultiTaskDataset& fragment,
                    const FitConfig& cfg, Rng& rng);

  /// One-step predictive p(x_next | x, c) with the latent handled by
  /// `mode`; variance includes the learned likelihood noise.
  Prediction predict(const Eigen::VectorXd& x, const Eigen::VectorXd& c,
                     const LatentPosterior& posterior, LatentMode mode,
                     Rng* rng = nullptr) const;
  Prediction predict(const Eigen::VectorXd& x, const Eigen::VectorXd& c,
                     int task_id, LatentMode mode, Rng* rng = nullptr) const;

  /// Predictive over the state difference y (natural units).
  Prediction predict_delta(const Eigen::VectorXd& x, const Eigen::VectorXd& c,
                           const LatentPosterior& posterior, LatentMode mode,
                           Rng* rng = nullptr) const;

  /// Per-call constants for repeated prediction against fixed parameters.
  struct PredictorCache {
    Eigen::MatrixXd L;              // chol(Kzz)
    Eigen::MatrixXd B;              // M x D, column d = L^{-1} m^d
    std::vector<Eigen::MatrixXd> G; // per output, L^{-1} C^d
  };
  PredictorCache make_predictor_cache() const;

  /// Tape predictive at standardized augmented inputs (rows of x_aug). All
  /// model parameters enter as constants; gradients flow only through
  /// x_aug. Returns standardized-target mean and variance (n x D), the
  /// variance including likelihood noise.
  struct TapePredictive {
    ad::Var mean;
    ad::Var var;
  };
  TapePredictive predictive_var(ad::Tape& t, ad::Var x_aug,
                                const PredictorCache& cache) const;

  /// Versioned binary checkpoint; bit-exact round trip. The optional rng
  /// captures the training stream for resumable fits.
  void save(std::ostream& out, const Rng* rng = nullptr) const;
  static MlgpModel load(std::istream& in, Rng* rng_out = nullptr);

 private:
  friend struct ElboBuilder;

  void init_inducing(const MultiTaskDataset& data, Rng& rng);
  Prediction predict_delta_std(const Eigen::RowVectorXd& x_aug) const;

  ModelConfig cfg_;
  KernelParams kernel_;
  Eigen::MatrixXd log_noise_;  // 1 x D
  InducingSet inducing_;
  std::vector<OutputVariational> outputs_;
  LatentTable latents_;
  Standardization stats_;
};

}  // namespace mlgp
