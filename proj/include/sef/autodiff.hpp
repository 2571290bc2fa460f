#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sef/common.hpp"
#include "sef/rng.hpp"

namespace sef {

// Reverse-mode automatic differentiation over dense row-major arrays.
// A Tape records executed primitives; backward() replays them in exact
// reverse order, accumulating gradients. Values are double precision.
// Every forward op verifies its output is finite and throws otherwise.

struct Node {
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;  // sized on first use
  bool requires_grad = false;
  const char* op = "leaf";

  std::size_t size() const {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
  }
};

using NodePtr = std::shared_ptr<Node>;

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr n) : node_(std::move(n)) {}

  bool valid() const { return node_ != nullptr; }
  const std::vector<std::size_t>& shape() const { return node_->shape; }
  std::size_t size() const { return node_->size(); }
  std::size_t rows() const { return node_->shape.at(0); }
  std::size_t cols() const { return node_->shape.at(1); }

  std::vector<double>& value() { return node_->value; }
  const std::vector<double>& value() const { return node_->value; }
  std::vector<double>& grad();
  bool requires_grad() const { return node_->requires_grad; }

  double at(std::size_t i) const { return node_->value[i]; }
  double at(std::size_t r, std::size_t c) const {
    return node_->value[r * node_->shape[1] + c];
  }

  NodePtr node() const { return node_; }

 private:
  NodePtr node_;
};

// Trainable parameter (grad persists across tapes until zeroed by the caller).
Tensor make_param(std::vector<std::size_t> shape, std::vector<double> values);
// Non-trainable value.
Tensor make_const(std::vector<std::size_t> shape, std::vector<double> values);
Tensor make_zeros(std::vector<std::size_t> shape, bool requires_grad = false);

void zero_grad(Tensor& t);

class Tape {
 public:
  // grad_enabled=false gives a pure forward evaluator: values are computed,
  // nothing is recorded, backward() is not available.
  explicit Tape(bool grad_enabled = true) : grad_(grad_enabled) {}

  Tensor constant(std::vector<std::size_t> shape, std::vector<double> values) {
    return make_const(std::move(shape), std::move(values));
  }

  // rows: one table row per index; gradient scatters back into the table
  // except for frozen_row (the PAD embedding stays untouched).
  Tensor lookup_rows(const Tensor& table, const std::vector<int>& indices,
                     int frozen_row = -1);
  Tensor concat_cols(std::span<const Tensor> mats);
  Tensor concat_vecs(std::span<const Tensor> vecs);  // 1-d inputs end to end
  Tensor row(const Tensor& mat, std::size_t r);
  Tensor stack_rows(std::span<const Tensor> rows);
  Tensor stack_scalars(std::span<const Tensor> scalars);

  Tensor matvec(const Tensor& w, const Tensor& x);  // {m,n}·{n} -> {m}
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor axpb(const Tensor& x, double a, double b);  // a*x + b elementwise
  Tensor tanh(const Tensor& x);
  Tensor sigmoid(const Tensor& x);
  Tensor softmax(const Tensor& logits);  // {n} -> simplex {n}

  // W*x + b convenience.
  Tensor linear(const Tensor& w, const Tensor& x, const Tensor& b) {
    return add(matvec(w, x), b);
  }

  // seq {n,d}, filters {f,k*d}; zero rows are appended after the sequence so
  // output row i is filter . (x_i || ... || x_{i+k-1}) for every i in [0,n).
  Tensor conv1d(const Tensor& seq, const Tensor& filters);

  // {n,f} -> {f}; gradient routes to the lowest-index argmax per column.
  Tensor global_max_pool(const Tensor& scores);

  // {n,f} -> {3*f}, segment-major. Segments per entity positions:
  //   1: [0 .. end(first)]   2: [start(first) .. end(second)]
  //   3: [start(second) .. n-1]
  // where "first" is the span with the smaller start. Segments overlap on the
  // entity tokens. Ties inside a segment break to the lowest index.
  Tensor piecewise_max_pool(const Tensor& scores, Span e1, Span e2);

  Tensor weighted_sum_rows(const Tensor& weights, const Tensor& mat);  // {n},{n,d} -> {d}
  Tensor scale_rows(const Tensor& mat, const Tensor& weights);         // row t scaled by w_t

  // Inverted dropout: keep with prob 1-rate and scale by 1/(1-rate).
  // Callers only apply this in training mode; eval forwards skip the op.
  Tensor dropout(const Tensor& x, double rate, Rng& rng);

  // Per-sample -log(p[label]) + sum_j (p_j - t_j)^2 with the log argument
  // clamped at 1e-12 (clamp events are counted on the tape).
  Tensor ce_mse_loss(const Tensor& probs, const std::vector<double>& teacher,
                     int label);

  void backward(const Tensor& loss, bool validate_finite = false);

  bool grad_enabled() const { return grad_; }
  std::size_t clamp_events() const { return clamp_events_; }

 private:
  struct Step {
    NodePtr out;
    std::function<void()> back;
  };

  Tensor output(std::vector<std::size_t> shape, std::vector<double> values,
                const char* op, bool requires_grad);
  void record(const Tensor& out, std::function<void()> back);

  std::vector<Step> steps_;
  bool grad_;
  std::size_t clamp_events_ = 0;
};

// Gated recurrent unit. Standard formulation (the update gate keeps history):
//   z_t = sigmoid(Wz x_t + Uz h_{t-1} + bz)
//   r_t = sigmoid(Wr x_t + Ur h_{t-1} + br)
//   c_t = tanh(Wh x_t + Uh (r_t * h_{t-1}) + bh)
//   h_t = z_t * h_{t-1} + (1 - z_t) * c_t
// Initial hidden state is the zero vector.
struct GruCell {
  Tensor w_update, u_update, b_update;
  Tensor w_reset, u_reset, b_reset;
  Tensor w_cand, u_cand, b_cand;

  std::size_t hidden_size() const { return b_update.size(); }
};

enum class GruDirection { kForward, kBackward };

// seq {n,d} -> hidden states {n,h}, row t holding h_t in sentence order for
// either direction.
Tensor gru_sequence(Tape& tape, const Tensor& seq, const GruCell& cell,
                    GruDirection direction);

// Forward and backward passes concatenated to {n,2h}.
Tensor bigru_sequence(Tape& tape, const Tensor& seq, const GruCell& fwd,
                      const GruCell& bwd);

struct NamedParam {
  std::string name;
  Tensor tensor;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
};

// Central finite differences per scalar parameter against tape gradients.
// Relative error is |analytic - numeric| / max(1, |numeric|). The forward
// callable must build a scalar loss on the given tape from the live params.
GradCheckResult check_gradients(std::span<const NamedParam> params,
                                const std::function<Tensor(Tape&)>& forward,
                                double eps = 1e-5);

}  // namespace sef
