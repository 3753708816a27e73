// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace simg {

// Single seeded generator threaded through every stochastic call site.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  // Inclusive bounds.
  int uniform_int(int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(engine_);
  }
  uint64_t next_u64() { return engine_(); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

namespace detail {
struct TensorNode;
}

// Dense row-major float64 tensor with reverse-mode differentiation. Value
// type: copies share the underlying node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(int rows, int cols, bool requires_grad = false);
  static Tensor constant(int rows, int cols, double value);
  static Tensor scalar(double value);
  static Tensor from(int rows, int cols, std::vector<double> data,
                     bool requires_grad = false);
  static Tensor randn(int rows, int cols, Rng& rng, double stddev,
                      bool requires_grad = false);

  bool empty() const { return !node_; }
  int rows() const;
  int cols() const;
  int size() const;
  bool requires_grad() const;

  const std::vector<double>& values() const;
  std::vector<double>& raw();  // leaf mutation only (initialization, loading)
  const std::vector<double>& grad() const;
  std::vector<double>& grad_raw();
  void zero_grad();
  double item() const;
  double at(int r, int c) const;

  detail::TensorNode* node() const { return node_.get(); }
  std::shared_ptr<detail::TensorNode> shared_node() const { return node_; }

  explicit Tensor(std::shared_ptr<detail::TensorNode> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<detail::TensorNode> node_;
};

// --- primitives ------------------------------------------------------------
// b may broadcast as a 1 x cols row vector, a rows x 1 column vector, or a
// 1 x 1 scalar.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& a, int start, int len);
Tensor slice_rows(const Tensor& a, int start, int len);
Tensor gather_rows(const Tensor& a, const std::vector<int>& idx);
Tensor scatter_add_rows(const Tensor& src, const std::vector<int>& idx, int n_rows);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope = 0.2);
Tensor sigmoid(const Tensor& a);
Tensor exp_t(const Tensor& a);
Tensor log_t(const Tensor& a);
Tensor tanh_t(const Tensor& a);
Tensor square(const Tensor& a);
Tensor softmax_rows(const Tensor& a);
Tensor log_softmax_rows(const Tensor& a);
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor mean_rows(const Tensor& a);  // reduce axis 0 -> 1 x cols

// Segment reductions over rows; seg.size() == a.rows(), values in
// [0, n_segments). Accumulation happens in value-sorted order per component
// so results are exactly invariant under row permutations.
Tensor segment_sum(const Tensor& a, const std::vector<int>& seg, int n_segments);
Tensor segment_mean(const Tensor& a, const std::vector<int>& seg, int n_segments);
Tensor segment_max(const Tensor& a, const std::vector<int>& seg, int n_segments);
// scores: E x 1; softmax within each segment.
Tensor segment_softmax(const Tensor& scores, const std::vector<int>& seg);

// Numerically stable elementwise binary cross-entropy on logits; targets is
// a plain (non-differentiated) tensor of 0/1 labels.
Tensor bce_with_logits(const Tensor& logits, const Tensor& targets);

// Reverse-mode pass from a scalar loss; gradients accumulate into every
// requires_grad leaf reachable from it.
void backward(const Tensor& loss);

// --- optimizer ---------------------------------------------------------
struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig cfg = {});
  void step();
  void zero_grad();
  int64_t step_count() const { return step_count_; }

  const std::vector<Tensor>& params() const { return params_; }
  // Exposed for checkpointing.
  std::vector<std::vector<double>>& first_moments() { return m_; }
  std::vector<std::vector<double>>& second_moments() { return v_; }
  int64_t& step_count_ref() { return step_count_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  std::vector<Tensor> params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  int64_t step_count_ = 0;
};

// --- batch norm -------------------------------------------------------
// Normalizes over rows per column. Train mode uses batch statistics and
// updates the running estimates; eval mode uses the running estimates.
struct BatchNorm1d {
  Tensor gamma;
  Tensor beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  explicit BatchNorm1d(int width);
  Tensor apply(const Tensor& x, bool train);
  std::vector<Tensor> parameters() const { return {gamma, beta}; }
};

// --- checkpoints --------------------------------------------------------
// Versioned container, magic "SIMGCKPT1": named float64 tensors plus
// optional optimizer state.
struct Checkpoint {
  std::vector<std::pair<std::string, Tensor>> tensors;
  bool has_optimizer = false;
  std::vector<std::vector<double>> opt_m;
  std::vector<std::vector<double>> opt_v;
  int64_t opt_step = 0;

  const Tensor* find(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace simg
