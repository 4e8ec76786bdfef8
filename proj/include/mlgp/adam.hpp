#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

namespace mlgp {

struct AdamConfig {
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Eigen::MatrixXd m;
  Eigen::MatrixXd v;
  long step = 0;
};

/// One Adam update with bias correction. Throws on non-finite gradients.
inline void adam_step(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad,
                      AdamState& state, const AdamConfig& cfg) {
  if (grad.rows() != param.rows() || grad.cols() != param.cols()) {
    throw std::invalid_argument("adam: gradient/parameter shape mismatch");
  }
  if (!grad.allFinite()) {
    throw std::runtime_error("adam: non-finite gradient");
  }
  if (state.m.size() == 0) {
    state.m = Eigen::MatrixXd::Zero(param.rows(), param.cols());
    state.v = Eigen::MatrixXd::Zero(param.rows(), param.cols());
  }
  state.step += 1;
  state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad;
  state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  param.array() -= cfg.lr * (state.m.array() / c1) /
                   ((state.v.array() / c2).sqrt() + cfg.eps);
}

/// Groups several parameter tensors under one shared step counter; the
/// caller passes tensors in the same order on every call.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(const std::vector<Eigen::MatrixXd*>& params,
            const std::vector<const Eigen::MatrixXd*>& grads) {
    if (params.size() != grads.size()) {
      throw std::invalid_argument("adam: params/grads count mismatch");
    }
    if (states_.empty()) states_.resize(params.size());
    if (states_.size() != params.size()) {
      throw std::invalid_argument("adam: parameter group count changed");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      adam_step(*params[i], *grads[i], states_[i], cfg_);
    }
  }

  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::vector<AdamState> states_;
};

}  // namespace mlgp
