#include "tvq/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace tvq::ad {

namespace {
constexpr double kLogFloor = 1e-10;

void check_matmul_dims(const Tensor& a, const Tensor& b, bool b_transposed, const char* what) {
  if (a.ndim() != 2 || b.ndim() != 2) {
    throw DimensionError(std::string(what) + ": operands must be rank-2");
  }
  int inner_b = b_transposed ? b.dim(1) : b.dim(0);
  if (a.dim(1) != inner_b) {
    throw DimensionError(std::string(what) + ": inner dimensions disagree " + a.shape_str() + " vs " +
                         b.shape_str());
  }
}
}  // namespace

void gemm_nn(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate) {
  int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (!accumulate) c.fill(0.0);
  for (int i = 0; i < m; ++i) {
    const double* arow = a.row_ptr(i);
    double* crow = c.row_ptr(i);
    for (int p = 0; p < k; ++p) {
      double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b.row_ptr(p);
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate) {
  int m = a.dim(0), k = a.dim(1), n = b.dim(0);
  if (!accumulate) c.fill(0.0);
  for (int i = 0; i < m; ++i) {
    const double* arow = a.row_ptr(i);
    double* crow = c.row_ptr(i);
    for (int j = 0; j < n; ++j) {
      const double* brow = b.row_ptr(j);
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

void gemm_tn(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate) {
  int m = a.dim(1), k = a.dim(0), n = b.dim(1);
  if (!accumulate) c.fill(0.0);
  for (int p = 0; p < k; ++p) {
    const double* arow = a.row_ptr(p);
    const double* brow = b.row_ptr(p);
    for (int i = 0; i < m; ++i) {
      double av = arow[i];
      if (av == 0.0) continue;
      double* crow = c.row_ptr(i);
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::check2d(Var v, const char* what) const {
  if (node(v).value.ndim() != 2) {
    throw DimensionError(std::string(what) + ": expected a rank-2 tensor");
  }
}

Var Tape::input(const Tensor& value) {
  Node n;
  n.value = value;
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::constant(const Tensor& value) {
  Node n;
  n.value = value;
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  check_matmul_dims(node(a).value, node(b).value, false, "matmul");
  Node n;
  n.op = Op::kMatmul;
  n.a = a.id;
  n.b = b.id;
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  n.value = Tensor({node(a).value.dim(0), node(b).value.dim(1)});
  gemm_nn(node(a).value, node(b).value, n.value, false);
  return push(std::move(n));
}

Var Tape::matmul_nt(Var a, Var b) {
  check_matmul_dims(node(a).value, node(b).value, true, "matmul_nt");
  Node n;
  n.op = Op::kMatmulNT;
  n.a = a.id;
  n.b = b.id;
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  n.value = Tensor({node(a).value.dim(0), node(b).value.dim(0)});
  gemm_nt(node(a).value, node(b).value, n.value, false);
  return push(std::move(n));
}

namespace {
template <typename F>
Tensor elementwise2(const Tensor& a, const Tensor& b, F f, const char* what) {
  require_same_shape(a, b, what);
  Tensor out(a.shape());
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::int64_t i = 0; i < a.size(); ++i) po[i] = f(pa[i], pb[i]);
  return out;
}
}  // namespace

Var Tape::add(Var a, Var b) {
  Node n;
  n.op = Op::kAdd;
  n.a = a.id;
  n.b = b.id;
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  n.value = elementwise2(node(a).value, node(b).value, [](double x, double y) { return x + y; }, "add");
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  Node n;
  n.op = Op::kSub;
  n.a = a.id;
  n.b = b.id;
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  n.value = elementwise2(node(a).value, node(b).value, [](double x, double y) { return x - y; }, "sub");
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  Node n;
  n.op = Op::kMul;
  n.a = a.id;
  n.b = b.id;
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  n.value = elementwise2(node(a).value, node(b).value, [](double x, double y) { return x * y; }, "mul");
  return push(std::move(n));
}

namespace {
Tensor row_broadcast(const Tensor& m, const Tensor& row, int sign, const char* what) {
  if (m.ndim() != 2 || row.ndim() != 1 || row.dim(0) != m.dim(1)) {
    throw DimensionError(std::string(what) + ": row length must match matrix columns");
  }
  Tensor out = m;
  int r = m.dim(0), c = m.dim(1);
  const double* pr = row.data();
  for (int i = 0; i < r; ++i) {
    double* po = out.row_ptr(i);
    for (int j = 0; j < c; ++j) po[j] += sign * pr[j];
  }
  return out;
}
}  // namespace

Var Tape::add_row(Var m, Var row) {
  Node n;
  n.op = Op::kAddRow;
  n.a = m.id;
  n.b = row.id;
  n.requires_grad = node(m).requires_grad || node(row).requires_grad;
  n.value = row_broadcast(node(m).value, node(row).value, +1, "add_row");
  return push(std::move(n));
}

Var Tape::sub_row(Var m, Var row) {
  Node n;
  n.op = Op::kSubRow;
  n.a = m.id;
  n.b = row.id;
  n.requires_grad = node(m).requires_grad || node(row).requires_grad;
  n.value = row_broadcast(node(m).value, node(row).value, -1, "sub_row");
  return push(std::move(n));
}

Var Tape::mul_row(Var m, Var row) {
  const Tensor& mv = node(m).value;
  const Tensor& rv = node(row).value;
  if (mv.ndim() != 2 || rv.ndim() != 1 || rv.dim(0) != mv.dim(1)) {
    throw DimensionError("mul_row: row length must match matrix columns");
  }
  Node n;
  n.op = Op::kMulRow;
  n.a = m.id;
  n.b = row.id;
  n.requires_grad = node(m).requires_grad || node(row).requires_grad;
  n.value = mv;
  for (int i = 0; i < mv.dim(0); ++i) {
    double* po = n.value.row_ptr(i);
    const double* pr = rv.data();
    for (int j = 0; j < mv.dim(1); ++j) po[j] *= pr[j];
  }
  return push(std::move(n));
}

Var Tape::scale(Var a, double s) {
  Node n;
  n.op = Op::kScale;
  n.a = a.id;
  n.s0 = s;
  n.requires_grad = node(a).requires_grad;
  n.value = node(a).value;
  for (auto& v : n.value.values()) v *= s;
  return push(std::move(n));
}

Var Tape::add_scalar(Var a, double s) {
  Node n;
  n.op = Op::kAddScalar;
  n.a = a.id;
  n.s0 = s;
  n.requires_grad = node(a).requires_grad;
  n.value = node(a).value;
  for (auto& v : n.value.values()) v += s;
  return push(std::move(n));
}

Var Tape::exp(Var a) {
  Node n;
  n.op = Op::kExp;
  n.a = a.id;
  n.requires_grad = node(a).requires_grad;
  n.value = node(a).value;
  for (auto& v : n.value.values()) v = std::exp(v);
  return push(std::move(n));
}

Var Tape::log(Var a) {
  Node n;
  n.op = Op::kLog;
  n.a = a.id;
  n.requires_grad = node(a).requires_grad;
  n.value = node(a).value;
  for (auto& v : n.value.values()) v = std::log(std::max(v, kLogFloor));
  return push(std::move(n));
}

Var Tape::tanh(Var a) {
  Node n;
  n.op = Op::kTanh;
  n.a = a.id;
  n.requires_grad = node(a).requires_grad;
  n.value = node(a).value;
  for (auto& v : n.value.values()) v = std::tanh(v);
  return push(std::move(n));
}

Var Tape::relu(Var a) {
  Node n;
  n.op = Op::kRelu;
  n.a = a.id;
  n.requires_grad = node(a).requires_grad;
  n.value = node(a).value;
  for (auto& v : n.value.values()) v = v > 0.0 ? v : 0.0;
  return push(std::move(n));
}

Var Tape::clamp(Var a, double lo, double hi) {
  Node n;
  n.op = Op::kClamp;
  n.a = a.id;
  n.s0 = lo;
  n.s1 = hi;
  n.requires_grad = node(a).requires_grad;
  n.value = node(a).value;
  for (auto& v : n.value.values()) v = std::min(std::max(v, lo), hi);
  return push(std::move(n));
}

Var Tape::slice_cols(Var a, int c0, int c1) {
  check2d(a, "slice_cols");
  const Tensor& av = node(a).value;
  if (c0 < 0 || c1 > av.dim(1) || c0 >= c1) throw DimensionError("slice_cols: bad column range");
  Node n;
  n.op = Op::kSliceCols;
  n.a = a.id;
  n.s0 = c0;
  n.s1 = c1;
  n.requires_grad = node(a).requires_grad;
  n.value = Tensor({av.dim(0), c1 - c0});
  for (int i = 0; i < av.dim(0); ++i) {
    const double* src = av.row_ptr(i);
    double* dst = n.value.row_ptr(i);
    for (int j = c0; j < c1; ++j) dst[j - c0] = src[j];
  }
  return push(std::move(n));
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no parts");
  int rows = node(parts[0]).value.dim(0);
  int total = 0;
  for (Var p : parts) {
    check2d(p, "concat_cols");
    if (node(p).value.dim(0) != rows) throw DimensionError("concat_cols: row counts disagree");
    total += node(p).value.dim(1);
  }
  Node n;
  n.op = Op::kConcatCols;
  for (Var p : parts) {
    n.extra_inputs.push_back(p.id);
    n.requires_grad = n.requires_grad || node(p).requires_grad;
  }
  n.value = Tensor({rows, total});
  int offset = 0;
  for (Var p : parts) {
    const Tensor& pv = node(p).value;
    for (int i = 0; i < rows; ++i) {
      const double* src = pv.row_ptr(i);
      double* dst = n.value.row_ptr(i) + offset;
      std::copy(src, src + pv.dim(1), dst);
    }
    offset += pv.dim(1);
  }
  return push(std::move(n));
}

Var Tape::gather_rows(Var table, const std::vector<int>& indices) {
  check2d(table, "gather_rows");
  const Tensor& tv = node(table).value;
  for (int idx : indices) {
    if (idx < -1 || idx >= tv.dim(0)) throw DimensionError("gather_rows: index out of range");
  }
  Node n;
  n.op = Op::kGatherRows;
  n.a = table.id;
  n.indices = indices;
  n.requires_grad = node(table).requires_grad;
  n.value = Tensor({static_cast<int>(indices.size()), tv.dim(1)});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0) continue;  // pad row stays zero
    const double* src = tv.row_ptr(indices[i]);
    std::copy(src, src + tv.dim(1), n.value.row_ptr(static_cast<int>(i)));
  }
  return push(std::move(n));
}

namespace {
void softmax_row_stable(const double* x, double* y, int n) {
  double mx = x[0];
  for (int j = 1; j < n; ++j) mx = std::max(mx, x[j]);
  double sum = 0.0;
  for (int j = 0; j < n; ++j) {
    y[j] = std::exp(x[j] - mx);
    sum += y[j];
  }
  for (int j = 0; j < n; ++j) y[j] /= sum;
}

double logsumexp_row(const double* x, int n) {
  double mx = x[0];
  for (int j = 1; j < n; ++j) mx = std::max(mx, x[j]);
  double sum = 0.0;
  for (int j = 0; j < n; ++j) sum += std::exp(x[j] - mx);
  return mx + std::log(sum);
}
}  // namespace

Var Tape::softmax_rows(Var logits) {
  check2d(logits, "softmax_rows");
  const Tensor& lv = node(logits).value;
  Node n;
  n.op = Op::kSoftmaxRows;
  n.a = logits.id;
  n.requires_grad = node(logits).requires_grad;
  n.value = Tensor(lv.shape());
  for (int i = 0; i < lv.dim(0); ++i) softmax_row_stable(lv.row_ptr(i), n.value.row_ptr(i), lv.dim(1));
  return push(std::move(n));
}

Var Tape::softmax_ce_rows(Var logits, const Tensor& targets) {
  check2d(logits, "softmax_ce_rows");
  const Tensor& lv = node(logits).value;
  require_same_shape(lv, targets, "softmax_ce_rows");
  Node n;
  n.op = Op::kSoftmaxCE;
  n.a = logits.id;
  n.requires_grad = node(logits).requires_grad;
  n.aux = targets;
  double total = 0.0;
  for (int i = 0; i < lv.dim(0); ++i) {
    const double* x = lv.row_ptr(i);
    const double* t = targets.row_ptr(i);
    double lse = logsumexp_row(x, lv.dim(1));
    for (int j = 0; j < lv.dim(1); ++j) {
      if (t[j] != 0.0) total += t[j] * (lse - x[j]);
    }
  }
  n.value = Tensor::from({1}, {total});
  return push(std::move(n));
}

Var Tape::softmax_ce_rows_idx(Var logits, const std::vector<int>& targets,
                              const std::vector<double>& weights) {
  check2d(logits, "softmax_ce_rows_idx");
  const Tensor& lv = node(logits).value;
  if (static_cast<int>(targets.size()) != lv.dim(0)) {
    throw DimensionError("softmax_ce_rows_idx: one target per row required");
  }
  if (!weights.empty() && weights.size() != targets.size()) {
    throw DimensionError("softmax_ce_rows_idx: weight count mismatch");
  }
  for (int t : targets) {
    if (t < -1 || t >= lv.dim(1)) throw DimensionError("softmax_ce_rows_idx: target out of range");
  }
  Node n;
  n.op = Op::kSoftmaxCEIdx;
  n.a = logits.id;
  n.requires_grad = node(logits).requires_grad;
  n.indices = targets;
  n.weights = weights;
  double total = 0.0;
  for (int i = 0; i < lv.dim(0); ++i) {
    if (targets[static_cast<std::size_t>(i)] < 0) continue;
    const double* x = lv.row_ptr(i);
    double w = weights.empty() ? 1.0 : weights[static_cast<std::size_t>(i)];
    total += w * (logsumexp_row(x, lv.dim(1)) - x[targets[static_cast<std::size_t>(i)]]);
  }
  n.value = Tensor::from({1}, {total});
  return push(std::move(n));
}

Var Tape::sum_all(Var a) {
  Node n;
  n.op = Op::kSumAll;
  n.a = a.id;
  n.requires_grad = node(a).requires_grad;
  double total = 0.0;
  for (double v : node(a).value.values()) total += v;
  n.value = Tensor::from({1}, {total});
  return push(std::move(n));
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

const Tensor& Tape::grad(Var v) const {
  const Node& n = node(v);
  if (!n.requires_grad) throw ParameterError("grad requested for a node without gradient");
  return n.grad;
}

double Tape::scalar(Var v) const {
  const Tensor& t = node(v).value;
  if (t.size() != 1) throw DimensionError("scalar: tensor has more than one entry");
  return t.at(0);
}

void Tape::backward(Var loss) {
  Node& top = node(loss);
  if (top.value.size() != 1) throw DimensionError("backward: loss must be a scalar");
  for (auto& n : nodes_) {
    if (n.requires_grad) {
      n.grad = Tensor(n.value.shape());
    }
  }
  if (!top.requires_grad) return;
  top.grad.at(0) = 1.0;

  for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || n.op == Op::kLeaf) continue;
    const Tensor& g = n.grad;
    auto want = [&](int child) { return child >= 0 && nodes_[static_cast<std::size_t>(child)].requires_grad; };
    auto cgrad = [&](int child) -> Tensor& { return nodes_[static_cast<std::size_t>(child)].grad; };
    auto cval = [&](int child) -> const Tensor& { return nodes_[static_cast<std::size_t>(child)].value; };

    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kMatmul:
        if (want(n.a)) gemm_nt(g, cval(n.b), cgrad(n.a), true);
        if (want(n.b)) gemm_tn(cval(n.a), g, cgrad(n.b), true);
        break;
      case Op::kMatmulNT:
        // c = a.b^T : da += g.b ; db += g^T.a
        if (want(n.a)) gemm_nn(g, cval(n.b), cgrad(n.a), true);
        if (want(n.b)) gemm_tn(g, cval(n.a), cgrad(n.b), true);
        break;
      case Op::kAdd:
        if (want(n.a)) {
          Tensor& da = cgrad(n.a);
          for (std::int64_t i = 0; i < g.size(); ++i) da.at(i) += g.at(i);
        }
        if (want(n.b)) {
          Tensor& db = cgrad(n.b);
          for (std::int64_t i = 0; i < g.size(); ++i) db.at(i) += g.at(i);
        }
        break;
      case Op::kSub:
        if (want(n.a)) {
          Tensor& da = cgrad(n.a);
          for (std::int64_t i = 0; i < g.size(); ++i) da.at(i) += g.at(i);
        }
        if (want(n.b)) {
          Tensor& db = cgrad(n.b);
          for (std::int64_t i = 0; i < g.size(); ++i) db.at(i) -= g.at(i);
        }
        break;
      case Op::kMul:
        if (want(n.a)) {
          Tensor& da = cgrad(n.a);
          const Tensor& bv = cval(n.b);
          for (std::int64_t i = 0; i < g.size(); ++i) da.at(i) += g.at(i) * bv.at(i);
        }
        if (want(n.b)) {
          Tensor& db = cgrad(n.b);
          const Tensor& av = cval(n.a);
          for (std::int64_t i = 0; i < g.size(); ++i) db.at(i) += g.at(i) * av.at(i);
        }
        break;
      case Op::kAddRow:
      case Op::kSubRow: {
        double sign = n.op == Op::kAddRow ? 1.0 : -1.0;
        if (want(n.a)) {
          Tensor& da = cgrad(n.a);
          for (std::int64_t i = 0; i < g.size(); ++i) da.at(i) += g.at(i);
        }
        if (want(n.b)) {
          Tensor& db = cgrad(n.b);
          int r = g.dim(0), c = g.dim(1);
          for (int i = 0; i < r; ++i) {
            const double* gr = g.row_ptr(i);
            for (int j = 0; j < c; ++j) db.at(j) += sign * gr[j];
          }
        }
        break;
      }
      case Op::kMulRow: {
        const Tensor& row = cval(n.b);
        if (want(n.a)) {
          Tensor& da = cgrad(n.a);
          int r = g.dim(0), c = g.dim(1);
          for (int i = 0; i < r; ++i) {
            const double* gr = g.row_ptr(i);
            double* dr = da.row_ptr(i);
            for (int j = 0; j < c; ++j) dr[j] += gr[j] * row.at(j);
          }
        }
        if (want(n.b)) {
          Tensor& db = cgrad(n.b);
          const Tensor& av = cval(n.a);
          int r = g.dim(0), c = g.dim(1);
          for (int i = 0; i < r; ++i) {
            const double* gr = g.row_ptr(i);
            const double* ar = av.row_ptr(i);
            for (int j = 0; j < c; ++j) db.at(j) += gr[j] * ar[j];
          }
        }
        break;
      }
      case Op::kScale:
        if (want(n.a)) {
          Tensor& da = cgrad(n.a);
          for (std::int64_t i = 0; i < g.size(); ++i) da.at(i) += g.at(i) * n.s0;
        }
        break;
      case Op::kAddScalar:
        if (want(n.a)) {
          Tensor& da = cgrad(n.a);
          for (std::int64_t i = 0; i < g.size(); ++i) da.at(i) += g.at(i);
        }
        break;
      case Op::kExp:
        if (want(n.a)) {
          Tensor& da = cgrad(n.a);
          for (std::int64_t i = 0; i < g.size(); ++i) da.at(i) += g.at(i) * n.value.at(i);
        }
        break;
      case Op::kLog:
        if (want(n.a)) {
          Tensor& da = cgrad(n.a);
          const Tensor& av = cval(n.a);
          for (std::int64_t i = 0; i < g.size(); ++i) {
            double x = std::max(av.at(i), kLogFloor);
            da.at(i) += g.at(i) / x;
          }
        }
        break;
      case Op::kTanh:
        if (want(n.a)) {
          Tensor& da = cgrad(n.a);
          for (std::int64_t i = 0; i < g.size(); ++i) {
            double y = n.value.at(i);
            da.at(i) += g.at(i) * (1.0 - y * y);
          }
        }
        break;
      case Op::kRelu:
        if (want(n.a)) {
          Tensor& da = cgrad(n.a);
          const Tensor& av = cval(n.a);
          for (std::int64_t i = 0; i < g.size(); ++i) {
            if (av.at(i) > 0.0) da.at(i) += g.at(i);
          }
        }
        break;
      case Op::kClamp:
        if (want(n.a)) {
          Tensor& da = cgrad(n.a);
          const Tensor& av = cval(n.a);
          for (std::int64_t i = 0; i < g.size(); ++i) {
            if (av.at(i) > n.s0 && av.at(i) < n.s1) da.at(i) += g.at(i);
          }
        }
        break;
      case Op::kSliceCols:
        if (want(n.a)) {
          Tensor& da = cgrad(n.a);
          int c0 = static_cast<int>(n.s0);
          for (int i = 0; i < g.dim(0); ++i) {
            const double* gr = g.row_ptr(i);
            double* dr = da.row_ptr(i);
            for (int j = 0; j < g.dim(1); ++j) dr[c0 + j] += gr[j];
          }
        }
        break;
      case Op::kConcatCols: {
        int offset = 0;
        for (int child : n.extra_inputs) {
          const Tensor& cv = cval(child);
          if (want(child)) {
            Tensor& dc = cgrad(child);
            for (int i = 0; i < g.dim(0); ++i) {
              const double* gr = g.row_ptr(i) + offset;
              double* dr = dc.row_ptr(i);
              for (int j = 0; j < cv.dim(1); ++j) dr[j] += gr[j];
            }
          }
          offset += cv.dim(1);
        }
        break;
      }
      case Op::kGatherRows:
        if (want(n.a)) {
          Tensor& da = cgrad(n.a);
          int c = g.dim(1);
          for (std::size_t i = 0; i < n.indices.size(); ++i) {
            int idx = n.indices[i];
            if (idx < 0) continue;
            const double* gr = g.row_ptr(static_cast<int>(i));
            double* dr = da.row_ptr(idx);
            for (int j = 0; j < c; ++j) dr[j] += gr[j];
          }
        }
        break;
      case Op::kSoftmaxRows:
        if (want(n.a)) {
          Tensor& da = cgrad(n.a);
          int r = g.dim(0), c = g.dim(1);
          for (int i = 0; i < r; ++i) {
            const double* y = n.value.row_ptr(i);
            const double* gr = g.row_ptr(i);
            double dot = 0.0;
            for (int j = 0; j < c; ++j) dot += y[j] * gr[j];
            double* dr = da.row_ptr(i);
            for (int j = 0; j < c; ++j) dr[j] += y[j] * (gr[j] - dot);
          }
        }
        break;
      case Op::kSoftmaxCE:
        if (want(n.a)) {
          Tensor& da = cgrad(n.a);
          const Tensor& lv = cval(n.a);
          double up = g.at(0);
          int r = lv.dim(0), c = lv.dim(1);
          std::vector<double> sm(static_cast<std::size_t>(c));
          for (int i = 0; i < r; ++i) {
            const double* t = n.aux.row_ptr(i);
            double tsum = 0.0;
            for (int j = 0; j < c; ++j) tsum += t[j];
            softmax_row_stable(lv.row_ptr(i), sm.data(), c);
            double* dr = da.row_ptr(i);
            for (int j = 0; j < c; ++j) dr[j] += up * (tsum * sm[j] - t[j]);
          }
        }
        break;
      case Op::kSoftmaxCEIdx:
        if (want(n.a)) {
          Tensor& da = cgrad(n.a);
          const Tensor& lv = cval(n.a);
          double up = g.at(0);
          int r = lv.dim(0), c = lv.dim(1);
          std::vector<double> sm(static_cast<std::size_t>(c));
          for (int i = 0; i < r; ++i) {
            int t = n.indices[static_cast<std::size_t>(i)];
            if (t < 0) continue;
            double w = n.weights.empty() ? 1.0 : n.weights[static_cast<std::size_t>(i)];
            softmax_row_stable(lv.row_ptr(i), sm.data(), c);
            double* dr = da.row_ptr(i);
            for (int j = 0; j < c; ++j) dr[j] += up * w * sm[j];
            dr[t] -= up * w;
          }
        }
        break;
      case Op::kSumAll:
        if (want(n.a)) {
          Tensor& da = cgrad(n.a);
          double up = g.at(0);
          for (std::int64_t i = 0; i < da.size(); ++i) da.at(i) += up;
        }
        break;
    }
  }
}

}  // namespace tvq::ad
