#include "mlgp/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mlgp::ad {

namespace {

[[noreturn]] void shape_error(const char* op, const Mat& a, const Mat& b) {
  throw std::invalid_argument(std::string("ad: ") + op + ": shape mismatch (" +
                              std::to_string(a.rows()) + "x" +
                              std::to_string(a.cols()) + " vs " +
                              std::to_string(b.rows()) + "x" +
                              std::to_string(b.cols()) + ")");
}

// Lower triangle with halved diagonal; the projection used by the Cholesky
// reverse rule.
Mat phi(const Mat& x) {
  Mat out = x.triangularView<Eigen::Lower>();
  out.diagonal() *= 0.5;
  return out;
}

Mat solve_lower(const Mat& l, const Mat& b) {
  return l.triangularView<Eigen::Lower>().solve(b);
}

Mat solve_lower_t(const Mat& l, const Mat& b) {
  return l.transpose().triangularView<Eigen::Upper>().solve(b);
}

}  // namespace

void check_finite(const Mat& m, const char* what) {
  if (!m.allFinite()) {
    throw std::invalid_argument(std::string("ad: non-finite entries in ") +
                                what);
  }
}

CholResult cholesky_jitter(const Mat& a) {
  if (a.rows() != a.cols()) {
    throw std::invalid_argument("cholesky: matrix must be square");
  }
  const double diag_mean = std::max(a.diagonal().mean(), 1e-300);
  // jitter 0 first, then 1e-8 * mean(diag) escalating x10 up to 1e-2
  for (int level = -1; level <= 6; ++level) {
    const double jitter =
        level < 0 ? 0.0 : diag_mean * 1e-8 * std::pow(10.0, level);
    Mat work = a;
    work.diagonal().array() += jitter;
    Eigen::LLT<Mat> llt(work);
    if (llt.info() != Eigen::Success) continue;
    Mat l = llt.matrixL();
    if (!l.allFinite() || l.diagonal().minCoeff() <= 0.0) continue;
    return {std::move(l), jitter};
  }
  throw std::runtime_error(
      "cholesky: factorization failed after maximum jitter escalation");
}

std::uint64_t Tape::next_uid() {
  static std::uint64_t counter = 0;
  return ++counter;
}

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || v.id >= static_cast<int>(nodes_.size())) {
    throw std::invalid_argument("ad: invalid Var handle");
  }
  return nodes_[v.id];
}

Var Tape::constant(Mat v) {
  check_finite(v, "constant");
  Node n;
  n.op = Op::Constant;
  n.value = std::move(v);
  n.needs_grad = false;
  return {push(std::move(n))};
}

Var Tape::leaf(Mat v) {
  check_finite(v, "leaf");
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(v);
  n.needs_grad = true;
  return {push(std::move(n))};
}

Var Tape::unary(Op op, Var a, Mat value, double c) {
  Node n;
  n.op = op;
  n.a = a.id;
  n.c = c;
  n.value = std::move(value);
  n.needs_grad = node(a).needs_grad;
  return {push(std::move(n))};
}

Var Tape::binary(Op op, Var a, Var b, Mat value) {
  Node n;
  n.op = op;
  n.a = a.id;
  n.b = b.id;
  n.value = std::move(value);
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  return {push(std::move(n))};
}

Var Tape::add(Var a, Var b) {
  const Mat& va = node(a).value;
  const Mat& vb = node(b).value;
  if (va.rows() != vb.rows() || va.cols() != vb.cols())
    shape_error("add", va, vb);
  return binary(Op::Add, a, b, va + vb);
}

Var Tape::sub(Var a, Var b) {
  const Mat& va = node(a).value;
  const Mat& vb = node(b).value;
  if (va.rows() != vb.rows() || va.cols() != vb.cols())
    shape_error("sub", va, vb);
  return binary(Op::Sub, a, b, va - vb);
}

Var Tape::mul(Var a, Var b) {
  const Mat& va = node(a).value;
  const Mat& vb = node(b).value;
  if (va.rows() != vb.rows() || va.cols() != vb.cols())
    shape_error("mul", va, vb);
  return binary(Op::Mul, a, b, va.cwiseProduct(vb));
}

Var Tape::div(Var a, Var b) {
  const Mat& va = node(a).value;
  const Mat& vb = node(b).value;
  if (va.rows() != vb.rows() || va.cols() != vb.cols())
    shape_error("div", va, vb);
  return binary(Op::Div, a, b, va.cwiseQuotient(vb));
}

Var Tape::matmul(Var a, Var b) {
  const Mat& va = node(a).value;
  const Mat& vb = node(b).value;
  if (va.cols() != vb.rows()) shape_error("matmul", va, vb);
  return binary(Op::MatMul, a, b, va * vb);
}

Var Tape::transpose(Var a) {
  return unary(Op::Transpose, a, node(a).value.transpose());
}

Var Tape::exp(Var a) {
  return unary(Op::Exp, a, node(a).value.array().exp().matrix());
}

Var Tape::log(Var a) {
  return unary(Op::Log, a, node(a).value.array().log().matrix());
}

Var Tape::sqrt(Var a) {
  return unary(Op::Sqrt, a, node(a).value.array().sqrt().matrix());
}

Var Tape::square(Var a) {
  return unary(Op::Square, a, node(a).value.array().square().matrix());
}

Var Tape::tanh(Var a) {
  return unary(Op::Tanh, a, node(a).value.array().tanh().matrix());
}

Var Tape::sin(Var a) {
  return unary(Op::Sin, a, node(a).value.array().sin().matrix());
}

Var Tape::cos(Var a) {
  return unary(Op::Cos, a, node(a).value.array().cos().matrix());
}

Var Tape::neg(Var a) { return unary(Op::Neg, a, -node(a).value); }

Var Tape::scale(Var a, double c) {
  return unary(Op::Scale, a, node(a).value * c, c);
}

Var Tape::shift(Var a, double c) {
  return unary(Op::Shift, a, (node(a).value.array() + c).matrix(), c);
}

Var Tape::clamp_min(Var a, double c) {
  return unary(Op::ClampMin, a, node(a).value.cwiseMax(c), c);
}

Var Tape::sum(Var a) {
  Mat out(1, 1);
  out(0, 0) = node(a).value.sum();
  return unary(Op::Sum, a, std::move(out));
}

Var Tape::row_sum(Var a) {
  return unary(Op::RowSum, a, node(a).value.rowwise().sum());
}

Var Tape::col_sum(Var a) {
  return unary(Op::ColSum, a, node(a).value.colwise().sum());
}

Var Tape::broadcast_row(Var a, int rows) {
  const Mat& va = node(a).value;
  if (va.rows() != 1) {
    throw std::invalid_argument("ad: broadcast_row expects a 1 x m operand");
  }
  Var v = unary(Op::BroadcastRow, a, va.replicate(rows, 1));
  nodes_.back().i0 = rows;
  return v;
}

Var Tape::broadcast_col(Var a, int cols) {
  const Mat& va = node(a).value;
  if (va.cols() != 1) {
    throw std::invalid_argument("ad: broadcast_col expects an n x 1 operand");
  }
  Var v = unary(Op::BroadcastCol, a, va.replicate(1, cols));
  nodes_.back().i1 = cols;
  return v;
}

Var Tape::broadcast_scalar(Var a, int rows, int cols) {
  const Mat& va = node(a).value;
  if (va.rows() != 1 || va.cols() != 1) {
    throw std::invalid_argument("ad: broadcast_scalar expects a 1 x 1 operand");
  }
  Var v = unary(Op::BroadcastScalar, a, Mat::Constant(rows, cols, va(0, 0)));
  nodes_.back().i0 = rows;
  nodes_.back().i1 = cols;
  return v;
}

Var Tape::slice(Var a, int row0, int col0, int rows, int cols) {
  const Mat& va = node(a).value;
  if (row0 < 0 || col0 < 0 || row0 + rows > va.rows() ||
      col0 + cols > va.cols()) {
    throw std::invalid_argument("ad: slice out of range");
  }
  Var v = unary(Op::Slice, a, va.block(row0, col0, rows, cols));
  Node& n = nodes_.back();
  n.i0 = row0;
  n.i1 = col0;
  n.i2 = rows;
  n.i3 = cols;
  return v;
}

Var Tape::hcat(Var a, Var b) {
  const Mat& va = node(a).value;
  const Mat& vb = node(b).value;
  if (va.rows() != vb.rows()) shape_error("hcat", va, vb);
  Mat out(va.rows(), va.cols() + vb.cols());
  out << va, vb;
  return binary(Op::HCat, a, b, std::move(out));
}

Var Tape::vcat(Var a, Var b) {
  const Mat& va = node(a).value;
  const Mat& vb = node(b).value;
  if (va.cols() != vb.cols()) shape_error("vcat", va, vb);
  Mat out(va.rows() + vb.rows(), va.cols());
  out << va, vb;
  return binary(Op::VCat, a, b, std::move(out));
}

Var Tape::cholesky(Var a) {
  CholResult r = cholesky_jitter(node(a).value);
  return unary(Op::Cholesky, a, std::move(r.L), r.jitter);
}

Var Tape::trisolve(Var l, Var b) {
  const Mat& vl = node(l).value;
  const Mat& vb = node(b).value;
  if (vl.rows() != vl.cols() || vl.cols() != vb.rows())
    shape_error("trisolve", vl, vb);
  return binary(Op::TriSolve, l, b, solve_lower(vl, vb));
}

Var Tape::trisolve_t(Var l, Var b) {
  const Mat& vl = node(l).value;
  const Mat& vb = node(b).value;
  if (vl.rows() != vl.cols() || vl.cols() != vb.rows())
    shape_error("trisolve_t", vl, vb);
  return binary(Op::TriSolveT, l, b, solve_lower_t(vl, vb));
}

Var Tape::logdet_chol(Var l) {
  const Mat& vl = node(l).value;
  if (vl.rows() != vl.cols()) {
    throw std::invalid_argument("ad: logdet_chol expects a square factor");
  }
  Mat out(1, 1);
  out(0, 0) = 2.0 * vl.diagonal().array().log().sum();
  return unary(Op::LogDetChol, l, std::move(out));
}

Var Tape::tril_exp_diag(Var p) {
  const Mat& vp = node(p).value;
  if (vp.rows() != vp.cols()) {
    throw std::invalid_argument("ad: tril_exp_diag expects a square operand");
  }
  Mat out = vp.triangularView<Eigen::StrictlyLower>();
  out.diagonal() = vp.diagonal().array().exp();
  return unary(Op::TrilExpDiag, p, std::move(out));
}

const Mat& Tape::val(Var v) const { return node(v).value; }

void Tape::accumulate(int id, const Mat& contribution) {
  if (!nodes_[id].needs_grad) return;
  Mat& g = grads_[id];
  if (g.size() == 0) {
    g = contribution;
  } else {
    g += contribution;
  }
}

void Tape::backward(Var out) {
  if (backward_done_) {
    throw std::logic_error("ad: backward already ran on this tape");
  }
  const Node& o = node(out);
  if (o.value.rows() != 1 || o.value.cols() != 1) {
    throw std::invalid_argument("ad: backward output must be 1x1");
  }
  backward_done_ = true;
  grads_.assign(nodes_.size(), Mat());
  if (nodes_[out.id].needs_grad) {
    grads_[out.id] = Mat::Ones(1, 1);
  }

  for (int id = out.id; id >= 0; --id) {
    const Node& n = nodes_[id];
    if (!n.needs_grad || grads_[id].size() == 0) continue;
    const Mat& g = grads_[id];
    switch (n.op) {
      case Op::Constant:
      case Op::Leaf:
        break;
      case Op::Add:
        accumulate(n.a, g);
        accumulate(n.b, g);
        break;
      case Op::Sub:
        accumulate(n.a, g);
        accumulate(n.b, -g);
        break;
      case Op::Mul:
        accumulate(n.a, g.cwiseProduct(nodes_[n.b].value));
        accumulate(n.b, g.cwiseProduct(nodes_[n.a].value));
        break;
      case Op::Div: {
        const Mat& vb = nodes_[n.b].value;
        accumulate(n.a, g.cwiseQuotient(vb));
        if (nodes_[n.b].needs_grad) {
          accumulate(n.b, -g.cwiseProduct(n.value).cwiseQuotient(vb));
        }
        break;
      }
      case Op::MatMul:
        if (nodes_[n.a].needs_grad) {
          accumulate(n.a, g * nodes_[n.b].value.transpose());
        }
        if (nodes_[n.b].needs_grad) {
          accumulate(n.b, nodes_[n.a].value.transpose() * g);
        }
        break;
      case Op::Transpose:
        accumulate(n.a, g.transpose());
        break;
      case Op::Exp:
        accumulate(n.a, g.cwiseProduct(n.value));
        break;
      case Op::Log:
        accumulate(n.a, g.cwiseQuotient(nodes_[n.a].value));
        break;
      case Op::Sqrt:
        accumulate(n.a, (0.5 * g.array() / n.value.array()).matrix());
        break;
      case Op::Square:
        accumulate(n.a, 2.0 * g.cwiseProduct(nodes_[n.a].value));
        break;
      case Op::Tanh:
        accumulate(n.a,
                   (g.array() * (1.0 - n.value.array().square())).matrix());
        break;
      case Op::Sin:
        accumulate(n.a, g.cwiseProduct(nodes_[n.a].value.array().cos().matrix()));
        break;
      case Op::Cos:
        accumulate(n.a,
                   -g.cwiseProduct(nodes_[n.a].value.array().sin().matrix()));
        break;
      case Op::Neg:
        accumulate(n.a, -g);
        break;
      case Op::Scale:
        accumulate(n.a, g * n.c);
        break;
      case Op::Shift:
        accumulate(n.a, g);
        break;
      case Op::ClampMin: {
        const Mat mask =
            (nodes_[n.a].value.array() > n.c).cast<double>().matrix();
        accumulate(n.a, g.cwiseProduct(mask));
        break;
      }
      case Op::Sum:
        accumulate(n.a, Mat::Constant(nodes_[n.a].value.rows(),
                                      nodes_[n.a].value.cols(), g(0, 0)));
        break;
      case Op::RowSum:
        accumulate(n.a, g.replicate(1, nodes_[n.a].value.cols()));
        break;
      case Op::ColSum:
        accumulate(n.a, g.replicate(nodes_[n.a].value.rows(), 1));
        break;
      case Op::BroadcastRow:
        accumulate(n.a, g.colwise().sum());
        break;
      case Op::BroadcastCol:
        accumulate(n.a, g.rowwise().sum());
        break;
      case Op::BroadcastScalar: {
        Mat s(1, 1);
        s(0, 0) = g.sum();
        accumulate(n.a, s);
        break;
      }
      case Op::Slice: {
        Mat full = Mat::Zero(nodes_[n.a].value.rows(), nodes_[n.a].value.cols());
        full.block(n.i0, n.i1, n.i2, n.i3) = g;
        accumulate(n.a, full);
        break;
      }
      case Op::HCat: {
        const auto ca = nodes_[n.a].value.cols();
        accumulate(n.a, g.leftCols(ca));
        accumulate(n.b, g.rightCols(g.cols() - ca));
        break;
      }
      case Op::VCat: {
        const auto ra = nodes_[n.a].value.rows();
        accumulate(n.a, g.topRows(ra));
        accumulate(n.b, g.bottomRows(g.rows() - ra));
        break;
      }
      case Op::Cholesky: {
        // Reverse rule for A = L L^T with symmetric A (Murray 2016):
        //   S = L^{-T} phi(L^T gL) L^{-1},  gA = (S + S^T) / 2
        const Mat& l = n.value;
        Mat p = phi(l.transpose() * g);
        Mat x = solve_lower_t(l, p);
        Mat s = solve_lower_t(l, x.transpose()).transpose();
        accumulate(n.a, 0.5 * (s + s.transpose()));
        break;
      }
      case Op::TriSolve: {
        // X = L^{-1} B:  gB = L^{-T} gX,  gL = -tril(gB X^T)
        const Mat gb = solve_lower_t(nodes_[n.a].value, g);
        if (nodes_[n.a].needs_grad) {
          Mat gl = -(gb * n.value.transpose());
          accumulate(n.a, Mat(gl.triangularView<Eigen::Lower>()));
        }
        accumulate(n.b, gb);
        break;
      }
      case Op::TriSolveT: {
        // X = L^{-T} B:  gB = L^{-1} gX,  gL = -tril(X gB^T)
        const Mat gb = solve_lower(nodes_[n.a].value, g);
        if (nodes_[n.a].needs_grad) {
          Mat gl = -(n.value * gb.transpose());
          accumulate(n.a, Mat(gl.triangularView<Eigen::Lower>()));
        }
        accumulate(n.b, gb);
        break;
      }
      case Op::LogDetChol: {
        Mat gl = Mat::Zero(nodes_[n.a].value.rows(), nodes_[n.a].value.cols());
        gl.diagonal() =
            2.0 * g(0, 0) * nodes_[n.a].value.diagonal().cwiseInverse();
        accumulate(n.a, gl);
        break;
      }
      case Op::TrilExpDiag: {
        Mat gp = g.triangularView<Eigen::StrictlyLower>();
        gp.diagonal() = g.diagonal().cwiseProduct(n.value.diagonal());
        accumulate(n.a, gp);
        break;
      }
    }
  }

  // unreached leaves get explicit zeros so grad() is total
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].op == Op::Leaf && grads_[i].size() == 0) {
      grads_[i] = Mat::Zero(nodes_[i].value.rows(), nodes_[i].value.cols());
    }
  }
}

const Mat& Tape::grad(Var v) const {
  if (!backward_done_) {
    throw std::logic_error("ad: grad() requires a completed backward pass");
  }
  const Node& n = node(v);
  if (grads_[v.id].size() == 0) {
    // non-leaf node the output does not depend on
    static thread_local Mat zero;
    zero = Mat::Zero(n.value.rows(), n.value.cols());
    return zero;
  }
  return grads_[v.id];
}

}  // namespace mlgp::ad
