// SPDX-License-Identifier: Apache-2.0

#include "simg/tensor.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

namespace simg {

namespace detail {

struct TensorNode {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;
  std::vector<double> grad;  // allocated lazily
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward_fn;

  int size() const { return rows * cols; }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

using detail::TensorNode;

namespace {

std::shared_ptr<TensorNode> make_node(int rows, int cols) {
  auto n = std::make_shared<TensorNode>();
  n->rows = rows;
  n->cols = cols;
  n->data.assign(static_cast<size_t>(rows) * cols, 0.0);
  return n;
}


// Result node inheriting grad tracking from its parents.
Tensor make_result(int rows, int cols, std::vector<std::shared_ptr<TensorNode>> parents,
                   std::function<void(TensorNode&)> backward_fn) {
  auto n = make_node(rows, cols);
  for (const auto& p : parents)
    if (p->requires_grad) n->requires_grad = true;
  if (n->requires_grad) {
    n->parents = std::move(parents);
    n->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(n));
}

#ifndef NDEBUG
void check_finite(const Tensor& t) {
  for (double v : t.values()) assert(std::isfinite(v) && "non-finite value in forward op");
}
#else
void check_finite(const Tensor&) {}
#endif

[[noreturn]] void shape_error(const char* op) {
  throw std::invalid_argument(std::string("tensor shape mismatch in ") + op);
}

// Order-canonical summation: accumulate in ascending value order so the sum
// is exactly invariant under permutations of the summands.
double sorted_sum(std::vector<double>& vals) {
  std::sort(vals.begin(), vals.end());
  double s = 0.0;
  for (double v : vals) s += v;
  return s;
}

}  // namespace

// --- Tensor basics ---------------------------------------------------------

Tensor Tensor::zeros(int rows, int cols, bool requires_grad) {
  auto n = make_node(rows, cols);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::constant(int rows, int cols, double value) {
  auto n = make_node(rows, cols);
  std::fill(n->data.begin(), n->data.end(), value);
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double value) { return constant(1, 1, value); }

Tensor Tensor::from(int rows, int cols, std::vector<double> data, bool requires_grad) {
  if (static_cast<int>(data.size()) != rows * cols) shape_error("from");
  auto n = std::make_shared<TensorNode>();
  n->rows = rows;
  n->cols = cols;
  n->data = std::move(data);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::randn(int rows, int cols, Rng& rng, double stddev, bool requires_grad) {
  auto n = make_node(rows, cols);
  for (double& v : n->data) v = rng.normal(0.0, stddev);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

int Tensor::rows() const { return node_ ? node_->rows : 0; }
int Tensor::cols() const { return node_ ? node_->cols : 0; }
int Tensor::size() const { return node_ ? node_->size() : 0; }
bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
const std::vector<double>& Tensor::values() const { return node_->data; }
std::vector<double>& Tensor::raw() { return node_->data; }
const std::vector<double>& Tensor::grad() const {
  node_->ensure_grad();
  return node_->grad;
}
std::vector<double>& Tensor::grad_raw() {
  node_->ensure_grad();
  return node_->grad;
}
void Tensor::zero_grad() {
  node_->grad.assign(node_->data.size(), 0.0);
}
double Tensor::item() const {
  if (size() != 1) shape_error("item");
  return node_->data[0];
}
double Tensor::at(int r, int c) const { return node_->data[static_cast<size_t>(r) * cols() + c]; }

// --- elementwise binary ------------------------------------------------

namespace {

enum class Broadcast { None, Row, Col, Scalar };

Broadcast broadcast_mode(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::None;
  if (b.rows() == 1 && b.cols() == 1) return Broadcast::Scalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::Row;
  if (b.cols() == 1 && b.rows() == a.rows()) return Broadcast::Col;
  shape_error(op);
}

size_t broadcast_index(Broadcast mode, int r, int c, int cols) {
  switch (mode) {
    case Broadcast::None: return static_cast<size_t>(r) * cols + c;
    case Broadcast::Row: return static_cast<size_t>(c);
    case Broadcast::Col: return static_cast<size_t>(r);
    case Broadcast::Scalar: return 0;
  }
  return 0;
}

template <typename FwdOp, typename BwdA, typename BwdB>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, FwdOp fwd, BwdA bwd_a,
                 BwdB bwd_b) {
  Broadcast mode = broadcast_mode(a, b, name);
  const int rows = a.rows(), cols = a.cols();
  auto res = make_result(
      rows, cols, {a.shared_node(), b.shared_node()},
      [a, b, mode, rows, cols, bwd_a, bwd_b](TensorNode& out) {
        TensorNode* na = a.node();
        TensorNode* nb = b.node();
        if (na->requires_grad) na->ensure_grad();
        if (nb->requires_grad) nb->ensure_grad();
        for (int r = 0; r < rows; ++r) {
          for (int c = 0; c < cols; ++c) {
            size_t k = static_cast<size_t>(r) * cols + c;
            size_t kb = broadcast_index(mode, r, c, cols);
            double g = out.grad[k];
            double av = na->data[k], bv = nb->data[kb];
            if (na->requires_grad) na->grad[k] += bwd_a(g, av, bv);
            if (nb->requires_grad) nb->grad[kb] += bwd_b(g, av, bv);
          }
        }
      });
  TensorNode* rn = res.node();
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      size_t k = static_cast<size_t>(r) * cols + c;
      size_t kb = broadcast_index(mode, r, c, cols);
      rn->data[k] = fwd(a.values()[k], b.values()[kb]);
    }
  check_finite(res);
  return res;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double g, double, double) { return g; }, [](double g, double, double) { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double g, double, double) { return g; }, [](double g, double, double) { return -g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double g, double, double y) { return g * y; },
      [](double g, double x, double) { return g * x; });
}

Tensor scale(const Tensor& a, double c) {
  auto res = make_result(a.rows(), a.cols(), {a.shared_node()}, [a, c](TensorNode& out) {
    TensorNode* na = a.node();
    if (!na->requires_grad) return;
    na->ensure_grad();
    for (size_t k = 0; k < out.grad.size(); ++k) na->grad[k] += c * out.grad[k];
  });
  for (size_t k = 0; k < a.values().size(); ++k) res.node()->data[k] = c * a.values()[k];
  check_finite(res);
  return res;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_error("matmul");
  const int m = a.rows(), kdim = a.cols(), n = b.cols();
  auto res = make_result(m, n, {a.shared_node(), b.shared_node()},
                         [a, b, m, kdim, n](TensorNode& out) {
                           TensorNode* na = a.node();
                           TensorNode* nb = b.node();
                           if (na->requires_grad) {
                             na->ensure_grad();
                             // dA = dC * B^T
                             for (int r = 0; r < m; ++r)
                               for (int k = 0; k < kdim; ++k) {
                                 double s = 0;
                                 for (int c = 0; c < n; ++c)
                                   s += out.grad[static_cast<size_t>(r) * n + c] *
                                        nb->data[static_cast<size_t>(k) * n + c];
                                 na->grad[static_cast<size_t>(r) * kdim + k] += s;
                               }
                           }
                           if (nb->requires_grad) {
                             nb->ensure_grad();
                             // dB = A^T * dC
                             for (int k = 0; k < kdim; ++k)
                               for (int c = 0; c < n; ++c) {
                                 double s = 0;
                                 for (int r = 0; r < m; ++r)
                                   s += na->data[static_cast<size_t>(r) * kdim + k] *
                                        out.grad[static_cast<size_t>(r) * n + c];
                                 nb->grad[static_cast<size_t>(k) * n + c] += s;
                               }
                           }
                         });
  TensorNode* rn = res.node();
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < n; ++c) {
      double s = 0;
      for (int k = 0; k < kdim; ++k)
        s += a.values()[static_cast<size_t>(r) * kdim + k] *
             b.values()[static_cast<size_t>(k) * n + c];
      rn->data[static_cast<size_t>(r) * n + c] = s;
    }
  check_finite(res);
  return res;
}

Tensor transpose(const Tensor& a) {
  const int m = a.rows(), n = a.cols();
  auto res = make_result(n, m, {a.shared_node()}, [a, m, n](TensorNode& out) {
    TensorNode* na = a.node();
    if (!na->requires_grad) return;
    na->ensure_grad();
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < n; ++c)
        na->grad[static_cast<size_t>(r) * n + c] += out.grad[static_cast<size_t>(c) * m + r];
  });
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < n; ++c)
      res.node()->data[static_cast<size_t>(c) * m + r] = a.values()[static_cast<size_t>(r) * n + c];
  return res;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) shape_error("concat_cols");
  const int rows = parts[0].rows();
  int cols = 0;
  std::vector<std::shared_ptr<TensorNode>> parents;
  for (const Tensor& p : parts) {
    if (p.rows() != rows) shape_error("concat_cols");
    cols += p.cols();
    parents.push_back(p.shared_node());
  }
  auto ps = parts;
  auto res = make_result(rows, cols, std::move(parents), [ps, rows, cols](TensorNode& out) {
    int off = 0;
    for (const Tensor& p : ps) {
      TensorNode* np = p.node();
      if (np->requires_grad) {
        np->ensure_grad();
        for (int r = 0; r < rows; ++r)
          for (int c = 0; c < p.cols(); ++c)
            np->grad[static_cast<size_t>(r) * p.cols() + c] +=
                out.grad[static_cast<size_t>(r) * cols + off + c];
      }
      off += p.cols();
    }
  });
  int off = 0;
  for (const Tensor& p : ps) {
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < p.cols(); ++c)
        res.node()->data[static_cast<size_t>(r) * cols + off + c] =
            p.values()[static_cast<size_t>(r) * p.cols() + c];
    off += p.cols();
  }
  return res;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) shape_error("concat_rows");
  const int cols = parts[0].cols();
  int rows = 0;
  std::vector<std::shared_ptr<TensorNode>> parents;
  for (const Tensor& p : parts) {
    if (p.cols() != cols) shape_error("concat_rows");
    rows += p.rows();
    parents.push_back(p.shared_node());
  }
  auto ps = parts;
  auto res = make_result(rows, cols, std::move(parents), [ps, cols](TensorNode& out) {
    int roff = 0;
    for (const Tensor& p : ps) {
      TensorNode* np = p.node();
      if (np->requires_grad) {
        np->ensure_grad();
        for (int k = 0; k < p.size(); ++k)
          np->grad[k] += out.grad[static_cast<size_t>(roff) * cols + k];
      }
      roff += p.rows();
    }
  });
  int roff = 0;
  for (const Tensor& p : ps) {
    std::copy(p.values().begin(), p.values().end(),
              res.node()->data.begin() + static_cast<size_t>(roff) * cols);
    roff += p.rows();
  }
  return res;
}

Tensor slice_cols(const Tensor& a, int start, int len) {
  if (start < 0 || len < 0 || start + len > a.cols()) shape_error("slice_cols");
  const int rows = a.rows(), cols = a.cols();
  auto res = make_result(rows, len, {a.shared_node()}, [a, start, len, rows, cols](TensorNode& out) {
    TensorNode* na = a.node();
    if (!na->requires_grad) return;
    na->ensure_grad();
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < len; ++c)
        na->grad[static_cast<size_t>(r) * cols + start + c] +=
            out.grad[static_cast<size_t>(r) * len + c];
  });
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < len; ++c)
      res.node()->data[static_cast<size_t>(r) * len + c] =
          a.values()[static_cast<size_t>(r) * cols + start + c];
  return res;
}

Tensor slice_rows(const Tensor& a, int start, int len) {
  if (start < 0 || len < 0 || start + len > a.rows()) shape_error("slice_rows");
  const int cols = a.cols();
  auto res = make_result(len, cols, {a.shared_node()}, [a, start, len, cols](TensorNode& out) {
    TensorNode* na = a.node();
    if (!na->requires_grad) return;
    na->ensure_grad();
    for (int k = 0; k < len * cols; ++k)
      na->grad[static_cast<size_t>(start) * cols + k] += out.grad[k];
  });
  std::copy(a.values().begin() + static_cast<size_t>(start) * cols,
            a.values().begin() + static_cast<size_t>(start + len) * cols,
            res.node()->data.begin());
  return res;
}

Tensor gather_rows(const Tensor& a, const std::vector<int>& idx) {
  const int cols = a.cols();
  for (int i : idx)
    if (i < 0 || i >= a.rows()) shape_error("gather_rows");
  auto res = make_result(static_cast<int>(idx.size()), cols, {a.shared_node()},
                         [a, idx, cols](TensorNode& out) {
                           TensorNode* na = a.node();
                           if (!na->requires_grad) return;
                           na->ensure_grad();
                           for (size_t r = 0; r < idx.size(); ++r)
                             for (int c = 0; c < cols; ++c)
                               na->grad[static_cast<size_t>(idx[r]) * cols + c] +=
                                   out.grad[r * cols + c];
                         });
  for (size_t r = 0; r < idx.size(); ++r)
    std::copy(a.values().begin() + static_cast<size_t>(idx[r]) * cols,
              a.values().begin() + static_cast<size_t>(idx[r] + 1) * cols,
              res.node()->data.begin() + r * cols);
  return res;
}

Tensor scatter_add_rows(const Tensor& src, const std::vector<int>& idx, int n_rows) {
  if (static_cast<int>(idx.size()) != src.rows()) shape_error("scatter_add_rows");
  return segment_sum(src, idx, n_rows);
}

// --- elementwise unary ---------------------------------------------------

namespace {

template <typename FwdOp, typename BwdOp>
Tensor unary_op(const Tensor& a, FwdOp fwd, BwdOp bwd) {
  auto res = make_result(a.rows(), a.cols(), {a.shared_node()}, [a, bwd](TensorNode& out) {
    TensorNode* na = a.node();
    if (!na->requires_grad) return;
    na->ensure_grad();
    for (size_t k = 0; k < out.grad.size(); ++k)
      na->grad[k] += bwd(out.grad[k], na->data[k], out.data[k]);
  });
  for (size_t k = 0; k < a.values().size(); ++k) res.node()->data[k] = fwd(a.values()[k]);
  check_finite(res);
  return res;
}

}  // namespace

Tensor relu(const Tensor& a) {
  return unary_op(
      a, [](double x) { return x > 0 ? x : 0.0; },
      [](double g, double x, double) { return x > 0 ? g : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary_op(
      a, [slope](double x) { return x > 0 ? x : slope * x; },
      [slope](double g, double x, double) { return x > 0 ? g : slope * g; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(
      a,
      [](double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
      [](double g, double, double y) { return g * y * (1.0 - y); });
}

Tensor exp_t(const Tensor& a) {
  return unary_op(
      a, [](double x) { return std::exp(x); }, [](double g, double, double y) { return g * y; });
}

Tensor log_t(const Tensor& a) {
  return unary_op(
      a, [](double x) { return std::log(x); }, [](double g, double x, double) { return g / x; });
}

Tensor tanh_t(const Tensor& a) {
  return unary_op(
      a, [](double x) { return std::tanh(x); },
      [](double g, double, double y) { return g * (1.0 - y * y); });
}

Tensor square(const Tensor& a) {
  return unary_op(
      a, [](double x) { return x * x; }, [](double g, double x, double) { return 2.0 * g * x; });
}

// --- softmax --------------------------------------------------------------

Tensor softmax_rows(const Tensor& a) {
  const int rows = a.rows(), cols = a.cols();
  auto res = make_result(rows, cols, {a.shared_node()}, [a, rows, cols](TensorNode& out) {
    TensorNode* na = a.node();
    if (!na->requires_grad) return;
    na->ensure_grad();
    for (int r = 0; r < rows; ++r) {
      double dot = 0;
      for (int c = 0; c < cols; ++c) {
        size_t k = static_cast<size_t>(r) * cols + c;
        dot += out.grad[k] * out.data[k];
      }
      for (int c = 0; c < cols; ++c) {
        size_t k = static_cast<size_t>(r) * cols + c;
        na->grad[k] += out.data[k] * (out.grad[k] - dot);
      }
    }
  });
  for (int r = 0; r < rows; ++r) {
    double mx = -1e300;
    for (int c = 0; c < cols; ++c) mx = std::max(mx, a.at(r, c));
    std::vector<double> ex(cols);
    for (int c = 0; c < cols; ++c) ex[c] = std::exp(a.at(r, c) - mx);
    std::vector<double> tmp = ex;
    double z = sorted_sum(tmp);
    for (int c = 0; c < cols; ++c)
      res.node()->data[static_cast<size_t>(r) * cols + c] = ex[c] / z;
  }
  check_finite(res);
  return res;
}

Tensor log_softmax_rows(const Tensor& a) {
  const int rows = a.rows(), cols = a.cols();
  auto res = make_result(rows, cols, {a.shared_node()}, [a, rows, cols](TensorNode& out) {
    TensorNode* na = a.node();
    if (!na->requires_grad) return;
    na->ensure_grad();
    for (int r = 0; r < rows; ++r) {
      double gsum = 0;
      for (int c = 0; c < cols; ++c) gsum += out.grad[static_cast<size_t>(r) * cols + c];
      for (int c = 0; c < cols; ++c) {
        size_t k = static_cast<size_t>(r) * cols + c;
        na->grad[k] += out.grad[k] - std::exp(out.data[k]) * gsum;
      }
    }
  });
  for (int r = 0; r < rows; ++r) {
    double mx = -1e300;
    for (int c = 0; c < cols; ++c) mx = std::max(mx, a.at(r, c));
    std::vector<double> ex(cols);
    for (int c = 0; c < cols; ++c) ex[c] = std::exp(a.at(r, c) - mx);
    std::vector<double> tmp = ex;
    double lz = mx + std::log(sorted_sum(tmp));
    for (int c = 0; c < cols; ++c)
      res.node()->data[static_cast<size_t>(r) * cols + c] = a.at(r, c) - lz;
  }
  check_finite(res);
  return res;
}

// --- reductions ----------------------------------------------------------

Tensor sum_all(const Tensor& a) {
  auto res = make_result(1, 1, {a.shared_node()}, [a](TensorNode& out) {
    TensorNode* na = a.node();
    if (!na->requires_grad) return;
    na->ensure_grad();
    for (double& g : na->grad) g += out.grad[0];
  });
  std::vector<double> tmp = a.values();
  res.node()->data[0] = sorted_sum(tmp);
  return res;
}

Tensor mean_all(const Tensor& a) {
  if (a.size() == 0) shape_error("mean_all");
  return scale(sum_all(a), 1.0 / a.size());
}

Tensor mean_rows(const Tensor& a) {
  const int rows = a.rows(), cols = a.cols();
  if (rows == 0) shape_error("mean_rows");
  auto res = make_result(1, cols, {a.shared_node()}, [a, rows, cols](TensorNode& out) {
    TensorNode* na = a.node();
    if (!na->requires_grad) return;
    na->ensure_grad();
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        na->grad[static_cast<size_t>(r) * cols + c] += out.grad[c] / rows;
  });
  for (int c = 0; c < cols; ++c) {
    std::vector<double> col(rows);
    for (int r = 0; r < rows; ++r) col[r] = a.at(r, c);
    res.node()->data[c] = sorted_sum(col) / rows;
  }
  return res;
}

// --- segment reductions -------------------------------------------------

namespace {

void check_segments(const Tensor& a, const std::vector<int>& seg, int n_segments) {
  if (static_cast<int>(seg.size()) != a.rows()) shape_error("segment op");
  for (int s : seg)
    if (s < 0 || s >= n_segments) shape_error("segment op");
}

}  // namespace

Tensor segment_sum(const Tensor& a, const std::vector<int>& seg, int n_segments) {
  check_segments(a, seg, n_segments);
  const int cols = a.cols();
  auto res = make_result(n_segments, cols, {a.shared_node()}, [a, seg, cols](TensorNode& out) {
    TensorNode* na = a.node();
    if (!na->requires_grad) return;
    na->ensure_grad();
    for (size_t r = 0; r < seg.size(); ++r)
      for (int c = 0; c < cols; ++c)
        na->grad[r * cols + c] += out.grad[static_cast<size_t>(seg[r]) * cols + c];
  });
  std::vector<std::vector<double>> buckets(static_cast<size_t>(n_segments) * cols);
  for (size_t r = 0; r < seg.size(); ++r)
    for (int c = 0; c < cols; ++c)
      buckets[static_cast<size_t>(seg[r]) * cols + c].push_back(a.values()[r * cols + c]);
  for (size_t k = 0; k < buckets.size(); ++k) res.node()->data[k] = sorted_sum(buckets[k]);
  return res;
}

Tensor segment_mean(const Tensor& a, const std::vector<int>& seg, int n_segments) {
  check_segments(a, seg, n_segments);
  std::vector<int> counts(n_segments, 0);
  for (int s : seg) ++counts[s];
  Tensor sums = segment_sum(a, seg, n_segments);
  std::vector<double> inv(static_cast<size_t>(n_segments) * a.cols());
  for (int s = 0; s < n_segments; ++s)
    for (int c = 0; c < a.cols(); ++c)
      inv[static_cast<size_t>(s) * a.cols() + c] = counts[s] > 0 ? 1.0 / counts[s] : 0.0;
  return mul(sums, Tensor::from(n_segments, a.cols(), std::move(inv)));
}

Tensor segment_max(const Tensor& a, const std::vector<int>& seg, int n_segments) {
  check_segments(a, seg, n_segments);
  const int cols = a.cols();
  // argmax per (segment, column); empty segments produce 0.
  std::vector<int> arg(static_cast<size_t>(n_segments) * cols, -1);
  for (size_t r = 0; r < seg.size(); ++r)
    for (int c = 0; c < cols; ++c) {
      size_t k = static_cast<size_t>(seg[r]) * cols + c;
      if (arg[k] < 0 || a.values()[r * cols + c] > a.values()[static_cast<size_t>(arg[k]) * cols + c])
        arg[k] = static_cast<int>(r);
    }
  auto res = make_result(n_segments, cols, {a.shared_node()}, [a, arg, cols](TensorNode& out) {
    TensorNode* na = a.node();
    if (!na->requires_grad) return;
    na->ensure_grad();
    for (size_t k = 0; k < arg.size(); ++k)
      if (arg[k] >= 0)
        na->grad[static_cast<size_t>(arg[k]) * cols + k % cols] += out.grad[k];
  });
  for (size_t k = 0; k < arg.size(); ++k)
    res.node()->data[k] = arg[k] >= 0 ? a.values()[static_cast<size_t>(arg[k]) * cols + k % cols] : 0.0;
  return res;
}

Tensor segment_softmax(const Tensor& scores, const std::vector<int>& seg) {
  if (scores.cols() != 1) shape_error("segment_softmax");
  int n_segments = 0;
  for (int s : seg) n_segments = std::max(n_segments, s + 1);
  check_segments(scores, seg, std::max(n_segments, 1));
  const size_t n = seg.size();

  std::vector<double> seg_max(n_segments, -1e300);
  for (size_t r = 0; r < n; ++r) seg_max[seg[r]] = std::max(seg_max[seg[r]], scores.values()[r]);
  std::vector<std::vector<double>> buckets(n_segments);
  std::vector<double> ex(n);
  for (size_t r = 0; r < n; ++r) {
    ex[r] = std::exp(scores.values()[r] - seg_max[seg[r]]);
    buckets[seg[r]].push_back(ex[r]);
  }
  std::vector<double> z(n_segments, 0.0);
  for (int s = 0; s < n_segments; ++s) z[s] = buckets[s].empty() ? 1.0 : sorted_sum(buckets[s]);

  auto res = make_result(static_cast<int>(n), 1, {scores.shared_node()},
                         [scores, seg, n_segments](TensorNode& out) {
                           TensorNode* ns = scores.node();
                           if (!ns->requires_grad) return;
                           ns->ensure_grad();
                           // dL/ds_e = y_e (g_e - sum_{e' in seg} g_e' y_e')
                           std::vector<double> dot(n_segments, 0.0);
                           for (size_t r = 0; r < seg.size(); ++r)
                             dot[seg[r]] += out.grad[r] * out.data[r];
                           for (size_t r = 0; r < seg.size(); ++r)
                             ns->grad[r] += out.data[r] * (out.grad[r] - dot[seg[r]]);
                         });
  for (size_t r = 0; r < n; ++r) res.node()->data[r] = ex[r] / z[seg[r]];
  check_finite(res);
  return res;
}

Tensor bce_with_logits(const Tensor& logits, const Tensor& targets) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols())
    shape_error("bce_with_logits");
  auto t = targets;  // held by value; never differentiated
  auto res = make_result(logits.rows(), logits.cols(), {logits.shared_node()},
                         [logits, t](TensorNode& out) {
                           TensorNode* nl = logits.node();
                           if (!nl->requires_grad) return;
                           nl->ensure_grad();
                           for (size_t k = 0; k < out.grad.size(); ++k) {
                             double x = nl->data[k];
                             double s = x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                                               : std::exp(x) / (1.0 + std::exp(x));
                             nl->grad[k] += out.grad[k] * (s - t.values()[k]);
                           }
                         });
  for (size_t k = 0; k < logits.values().size(); ++k) {
    double x = logits.values()[k], y = t.values()[k];
    res.node()->data[k] = std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::fabs(x)));
  }
  check_finite(res);
  return res;
}

// --- backward -----------------------------------------------------------

void backward(const Tensor& loss) {
  if (loss.size() != 1) throw std::invalid_argument("backward requires a scalar loss");
  if (!std::isfinite(loss.item())) throw std::invalid_argument("backward: non-finite loss");

  // Iterative topological sort over the parent DAG.
  std::vector<TensorNode*> topo;
  std::unordered_set<TensorNode*> seen;
  std::vector<std::pair<TensorNode*, size_t>> stack;
  stack.emplace_back(loss.node(), 0);
  seen.insert(loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorNode* p = node->parents[next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      topo.push_back(node);
      stack.pop_back();
    }
  }
  // topo is now in dependency-first order; zero every interior grad, then
  // run backward functions output-first. Leaf grads accumulate across calls.
  for (TensorNode* n : topo) {
    if (!n->parents.empty() || n == loss.node()) n->grad.assign(n->data.size(), 0.0);
    else n->ensure_grad();
  }
  loss.node()->grad[0] = 1.0;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    TensorNode* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

// --- Adam ----------------------------------------------------------------

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (const Tensor& p : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void Adam::step() {
  ++step_count_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    const std::vector<double>& g = p.grad();
    std::vector<double>& data = p.raw();
    for (size_t k = 0; k < data.size(); ++k) {
      m_[i][k] = cfg_.beta1 * m_[i][k] + (1.0 - cfg_.beta1) * g[k];
      v_[i][k] = cfg_.beta2 * v_[i][k] + (1.0 - cfg_.beta2) * g[k] * g[k];
      double mhat = m_[i][k] / bc1;
      double vhat = v_[i][k] / bc2;
      data[k] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

// --- batch norm ---------------------------------------------------------

BatchNorm1d::BatchNorm1d(int width)
    : gamma(Tensor::constant(1, width, 1.0)),
      beta(Tensor::zeros(1, width)),
      running_mean(width, 0.0),
      running_var(width, 1.0) {
  gamma.node()->requires_grad = true;
  beta.node()->requires_grad = true;
}

Tensor BatchNorm1d::apply(const Tensor& x, bool train) {
  const int cols = x.cols();
  if (cols != gamma.cols()) shape_error("batch_norm");
  Tensor xhat;
  if (train && x.rows() > 1) {
    Tensor mu = mean_rows(x);
    Tensor centered = sub(x, mu);
    Tensor var = mean_rows(square(centered));
    std::vector<double> inv_std(cols);
    for (int c = 0; c < cols; ++c) {
      running_mean[c] = (1 - momentum) * running_mean[c] + momentum * mu.values()[c];
      running_var[c] = (1 - momentum) * running_var[c] + momentum * var.values()[c];
    }
    // 1/sqrt(var+eps) through the tape: exp(-0.5 log(var+eps)).
    Tensor denom = exp_t(scale(log_t(add(var, Tensor::constant(1, cols, eps))), -0.5));
    xhat = mul(centered, denom);
  } else {
    std::vector<double> shift(cols), sc(cols);
    for (int c = 0; c < cols; ++c) {
      sc[c] = 1.0 / std::sqrt(running_var[c] + eps);
      shift[c] = running_mean[c];
    }
    xhat = mul(sub(x, Tensor::from(1, cols, std::move(shift))),
               Tensor::from(1, cols, std::move(sc)));
  }
  return add(mul(xhat, gamma), beta);
}

// --- checkpoints ----------------------------------------------------------

namespace {

constexpr char kMagic[9] = "SIMGCKPT";  // followed by version byte '1'

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) throw std::runtime_error("truncated checkpoint");
  return v;
}

void write_vec(std::ostream& os, const std::vector<double>& v) {
  write_pod(os, static_cast<uint64_t>(v.size()));
  os.write(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
}

std::vector<double> read_vec(std::istream& is) {
  auto n = read_pod<uint64_t>(is);
  std::vector<double> v(n);
  is.read(reinterpret_cast<char*>(v.data()), n * sizeof(double));
  if (!is) throw std::runtime_error("truncated checkpoint");
  return v;
}

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  os.write(kMagic, 8);
  os.put('1');
  write_pod(os, static_cast<uint64_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    write_pod(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), name.size());
    write_pod(os, static_cast<int32_t>(t.rows()));
    write_pod(os, static_cast<int32_t>(t.cols()));
    os.write(reinterpret_cast<const char*>(t.values().data()),
             t.values().size() * sizeof(double));
  }
  os.put(ckpt.has_optimizer ? 1 : 0);
  if (ckpt.has_optimizer) {
    write_pod(os, ckpt.opt_step);
    write_pod(os, static_cast<uint64_t>(ckpt.opt_m.size()));
    for (const auto& v : ckpt.opt_m) write_vec(os, v);
    for (const auto& v : ckpt.opt_v) write_vec(os, v);
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[9] = {};
  is.read(magic, 8);
  char version = 0;
  is.get(version);
  if (std::strncmp(magic, kMagic, 8) != 0 || version != '1')
    throw std::runtime_error("bad checkpoint magic in " + path);
  Checkpoint ckpt;
  auto count = read_pod<uint64_t>(is);
  for (uint64_t k = 0; k < count; ++k) {
    auto name_len = read_pod<uint32_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    auto rows = read_pod<int32_t>(is);
    auto cols = read_pod<int32_t>(is);
    std::vector<double> data(static_cast<size_t>(rows) * cols);
    is.read(reinterpret_cast<char*>(data.data()), data.size() * sizeof(double));
    if (!is) throw std::runtime_error("truncated checkpoint");
    ckpt.tensors.emplace_back(name, Tensor::from(rows, cols, std::move(data)));
  }
  int has_opt = is.get();
  if (has_opt == 1) {
    ckpt.has_optimizer = true;
    ckpt.opt_step = read_pod<int64_t>(is);
    auto n = read_pod<uint64_t>(is);
    for (uint64_t k = 0; k < n; ++k) ckpt.opt_m.push_back(read_vec(is));
    for (uint64_t k = 0; k < n; ++k) ckpt.opt_v.push_back(read_vec(is));
  }
  return ckpt;
}

}  // namespace simg
