#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace mlgp::ad {

using Mat = Eigen::MatrixXd;

enum class Op : std::uint8_t {
  Constant,
  Leaf,
  Add,
  Sub,
  Mul,      // elementwise
  Div,      // elementwise
  MatMul,
  Transpose,
  Exp,
  Log,
  Sqrt,
  Square,
  Tanh,
  Sin,
  Cos,
  Neg,
  Scale,     // a * c
  Shift,     // a + c
  ClampMin,  // max(a, c) elementwise
  Sum,       // all entries -> 1x1
  RowSum,    // n x m -> n x 1
  ColSum,    // n x m -> 1 x m
  BroadcastRow,     // 1 x m -> n x m
  BroadcastCol,     // n x 1 -> n x m
  BroadcastScalar,  // 1 x 1 -> n x m
  Slice,
  HCat,
  VCat,
  Cholesky,     // SPD input -> lower factor (with jitter ladder)
  TriSolve,     // L^{-1} B, L lower triangular
  TriSolveT,    // L^{-T} B
  LogDetChol,   // 2 * sum(log(diag(L)))
  TrilExpDiag,  // lower triangle of P, diagonal exp(diag(P))
};

/// Lightweight handle into a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Cholesky with an escalating jitter ladder: 0, then 1e-8 * mean(diag)
/// growing by factors of 10 up to 1e-2 * mean(diag). Throws std::runtime_error
/// once the ladder is exhausted.
struct CholResult {
  Mat L;
  double jitter = 0.0;
};
CholResult cholesky_jitter(const Mat& A);

void check_finite(const Mat& m, const char* what);

/// Define-by-run reverse-mode differentiation tape over dense matrices.
/// Nodes are appended in topological order; one backward pass per tape.
class Tape {
 public:
  Var constant(Mat v);
  Var leaf(Mat v);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var sqrt(Var a);
  Var square(Var a);
  Var tanh(Var a);
  Var sin(Var a);
  Var cos(Var a);
  Var neg(Var a);
  Var scale(Var a, double c);
  Var shift(Var a, double c);
  Var clamp_min(Var a, double c);
  Var sum(Var a);
  Var row_sum(Var a);
  Var col_sum(Var a);
  Var broadcast_row(Var a, int rows);
  Var broadcast_col(Var a, int cols);
  Var broadcast_scalar(Var a, int rows, int cols);
  Var slice(Var a, int row0, int col0, int rows, int cols);
  Var hcat(Var a, Var b);
  Var vcat(Var a, Var b);
  Var cholesky(Var a);
  Var trisolve(Var l, Var b);    // L^{-1} B
  Var trisolve_t(Var l, Var b);  // L^{-T} B
  Var logdet_chol(Var l);
  Var tril_exp_diag(Var p);

  const Mat& val(Var v) const;

  /// Accumulates adjoints from a 1x1 output node. Single-use: a second call
  /// on the same tape throws std::logic_error.
  void backward(Var out);

  /// Gradient of the backward output w.r.t. a node; all-zero for leaves the
  /// output does not depend on. Only valid after backward().
  const Mat& grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }
  void reserve(std::size_t n) { nodes_.reserve(n); }

  /// Process-unique id; lets callers detect that a cached Var belongs to a
  /// different (possibly same-address) tape.
  std::uint64_t uid() const { return uid_; }

 private:
  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    int i0 = 0, i1 = 0, i2 = 0, i3 = 0;  // slice / broadcast geometry
    double c = 0.0;                      // scalar operand
    Mat value;
    bool needs_grad = false;
  };

  int push(Node n);
  Var unary(Op op, Var a, Mat value, double c = 0.0);
  Var binary(Op op, Var a, Var b, Mat value);
  const Node& node(Var v) const;
  void accumulate(int id, const Mat& contribution);

  static std::uint64_t next_uid();

  std::vector<Node> nodes_;
  std::vector<Mat> grads_;
  bool backward_done_ = false;
  std::uint64_t uid_ = next_uid();
};

}  // namespace mlgp::ad
