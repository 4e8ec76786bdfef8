#pragma once

#include <functional>
#include <vector>

#include "doctest.h"
#include "mlgp/autodiff.hpp"
#include "mlgp/rng.hpp"

namespace testutil {

using mlgp::Rng;
using mlgp::ad::Mat;
using mlgp::ad::Tape;
using mlgp::ad::Var;

inline Mat random_mat(int rows, int cols, Rng& rng, double scale = 1.0) {
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  }
  return m;
}

inline Mat random_spd(int n, Rng& rng, double diag_boost = 0.5) {
  Mat b = random_mat(n, n, rng);
  Mat a = b * b.transpose();
  a.diagonal().array() += diag_boost;
  return a;
}

/// Builds a 1x1 output from leaves created in order from `inputs`.
using ScalarBuilder = std::function<Var(Tape&, const std::vector<Var>&)>;

inline double eval_scalar(const ScalarBuilder& f,
                          const std::vector<Mat>& inputs) {
  Tape t;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const auto& m : inputs) vars.push_back(t.leaf(m));
  return t.val(f(t, vars))(0, 0);
}

inline std::vector<Mat> analytic_grads(const ScalarBuilder& f,
                                       const std::vector<Mat>& inputs) {
  Tape t;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const auto& m : inputs) vars.push_back(t.leaf(m));
  Var out = f(t, vars);
  t.backward(out);
  std::vector<Mat> grads;
  grads.reserve(vars.size());
  for (Var v : vars) grads.push_back(t.grad(v));
  return grads;
}

inline double rel_err(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / scale;
}

/// Central finite differences against the reverse-mode gradients; fails the
/// doctest assertion on the first entry exceeding the tolerance.
inline void check_grads_fd(const ScalarBuilder& f, std::vector<Mat> inputs,
                           double step = 1e-6, double tol = 1e-4) {
  const auto grads = analytic_grads(f, inputs);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (int i = 0; i < inputs[k].rows(); ++i) {
      for (int j = 0; j < inputs[k].cols(); ++j) {
        const double saved = inputs[k](i, j);
        inputs[k](i, j) = saved + step;
        const double up = eval_scalar(f, inputs);
        inputs[k](i, j) = saved - step;
        const double down = eval_scalar(f, inputs);
        inputs[k](i, j) = saved;
        const double fd = (up - down) / (2.0 * step);
        const double analytic = grads[k](i, j);
        if (std::abs(analytic - fd) < 1e-8) continue;  // both ~zero
        INFO("input ", k, " entry (", i, ",", j, "): analytic ", analytic,
             " vs fd ", fd);
        CHECK(rel_err(analytic, fd) < tol);
      }
    }
  }
}

}  // namespace testutil
