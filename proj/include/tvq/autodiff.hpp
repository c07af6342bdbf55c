#pragma once

#include <vector>

#include "tvq/tensor.hpp"

namespace tvq::ad {

/// Handle to a node on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Define-by-run reverse-mode differentiation over a fixed op vocabulary:
/// matmul (with transpose variants), elementwise arithmetic, row broadcasts,
/// exp/log/tanh/relu/clamp, row gathers, softmax, fused softmax-cross-entropy
/// and full reduction. A fresh Tape is built per training step; backward()
/// walks the nodes in reverse creation order, which makes gradient
/// accumulation order deterministic.
class Tape {
 public:
  /// Leaf that receives a gradient.
  Var input(const Tensor& value);
  /// Leaf without gradient.
  Var constant(const Tensor& value);

  // a (m x k) . b (k x n)
  Var matmul(Var a, Var b);
  // a (m x k) . b^T with b (n x k)
  Var matmul_nt(Var a, Var b);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);

  /// Broadcast a length-c row over every row of an (r x c) matrix.
  Var add_row(Var m, Var row);
  Var sub_row(Var m, Var row);
  Var mul_row(Var m, Var row);

  Var scale(Var a, double s);
  Var add_scalar(Var a, double s);

  Var exp(Var a);
  /// log with a 1e-10 floor on the argument.
  Var log(Var a);
  Var tanh(Var a);
  Var relu(Var a);
  /// Identity inside [lo, hi], gradient zero outside.
  Var clamp(Var a, double lo, double hi);

  /// Columns [c0, c1) of a rank-2 tensor.
  Var slice_cols(Var a, int c0, int c1);
  /// Horizontal concatenation of rank-2 tensors with equal row counts.
  Var concat_cols(const std::vector<Var>& parts);

  /// out row i = table row indices[i]; index -1 yields a zero row.
  Var gather_rows(Var table, const std::vector<int>& indices);

  /// Row-wise softmax of a rank-2 tensor.
  Var softmax_rows(Var logits);

  /// sum over rows i of -sum_j targets(i,j) * log softmax(logits row i)_j.
  /// Fused for numerical stability; returns a scalar (shape {1}).
  Var softmax_ce_rows(Var logits, const Tensor& targets);
  /// Same with one-hot targets given as class indices; weight w_i per row.
  /// Index -1 skips the row.
  Var softmax_ce_rows_idx(Var logits, const std::vector<int>& targets,
                          const std::vector<double>& weights = {});

  /// Sum of all entries; returns a scalar (shape {1}).
  Var sum_all(Var a);

  /// Reference is invalidated by any subsequent node creation; copy it if the
  /// tape will keep growing.
  const Tensor& value(Var v) const;
  const Tensor& grad(Var v) const;
  double scalar(Var v) const;

  /// Seeds d(loss)/d(loss) = 1 and accumulates gradients into every node
  /// that requires them. `loss` must be a scalar.
  void backward(Var loss);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op {
    kLeaf,
    kMatmul,
    kMatmulNT,
    kAdd,
    kSub,
    kMul,
    kAddRow,
    kSubRow,
    kMulRow,
    kScale,
    kAddScalar,
    kExp,
    kLog,
    kTanh,
    kRelu,
    kClamp,
    kSliceCols,
    kConcatCols,
    kGatherRows,
    kSoftmaxRows,
    kSoftmaxCE,
    kSoftmaxCEIdx,
    kSumAll,
  };

  struct Node {
    Op op = Op::kLeaf;
    int a = -1;
    int b = -1;
    std::vector<int> extra_inputs;  // concat_cols
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    double s0 = 0.0, s1 = 0.0;      // scalar params (scale, clamp bounds, slice range)
    std::vector<int> indices;       // gather / ce-idx targets
    std::vector<double> weights;    // ce-idx row weights
    Tensor aux;                     // ce targets / cached softmax
  };

  Node& node(Var v) { return nodes_[static_cast<std::size_t>(v.id)]; }
  const Node& node(Var v) const { return nodes_[static_cast<std::size_t>(v.id)]; }
  Var push(Node n);
  void check2d(Var v, const char* what) const;

  std::vector<Node> nodes_;
};

/// C += or = A.B with optional transposes; raw kernel shared with
/// forward-only inference paths.
void gemm_nn(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate);
void gemm_nt(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate);
void gemm_tn(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate);

}  // namespace tvq::ad
