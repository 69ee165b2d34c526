#pragma once

// Dense 2-D tensors with tape-based reverse-mode differentiation.
//
// A Tensor is a shared handle: copies alias the same storage, which is what
// lets a recurrent cell reuse one parameter across timesteps and have its
// gradient accumulate. Operations record themselves on the thread's active
// Tape (see TapeScope) whenever at least one input requires a gradient.
// Without an active tape, operations are plain forward evaluations and may
// run concurrently on different threads.

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dgsp {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

namespace diff {

enum class OpKind {
  MatMul,
  Add,
  Subtract,
  Multiply,
  Sigmoid,
  Tanh,
  Relu,
  ConcatColumns,
  SliceColumns,
  MeanRows,
  MeanAll,
  SoftmaxRows,
  Scale,
  Square,
};

std::string_view to_string(OpKind kind);

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Matrix value, bool requires_grad = false);

  static Tensor zeros(Index rows, Index cols, bool requires_grad = false);
  static Tensor filled(Index rows, Index cols, double value);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  std::string shape_string() const;

  const Matrix& value() const { return node_->value; }
  // In-place edits bypass the tape; used by optimizers and finite differences.
  Matrix& mutable_value() { return node_->value; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on);
  const Matrix& grad() const { return node_->grad; }
  Matrix& mutable_grad() { return node_->grad; }
  void zero_grad();

  // Value of a 1x1 tensor.
  double item() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  friend class Tape;
  friend Tensor make_result(Matrix value, bool requires_grad);

  std::shared_ptr<Node> node_;
};

class Tape {
 public:
  // Accumulates into the inputs' grads given the output's grad.
  using Rule = std::function<void(const Node& output)>;

  struct Entry {
    OpKind kind;
    std::vector<std::shared_ptr<Node>> inputs;
    std::shared_ptr<Node> output;
    Rule rule;
  };

  void record(Entry entry);
  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }
  void clear() { entries_.clear(); }

  // Seeds d(output)/d(output) = 1 and runs every recorded rule once, newest
  // first. Intermediate grads are reset on each call; leaf grads accumulate.
  void backward(const Tensor& output);

 private:
  std::vector<Entry> entries_;
};

// Installs a tape as the active one for the current thread until destroyed.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape();

void backward(Tape& tape, const Tensor& output);

// Operations. Shape rules:
//   matmul      (m x k)(k x n)
//   add         same shape, or rhs 1 x c broadcast over lhs rows
//   subtract    same shape
//   multiply    same shape (elementwise)
//   concat      equal row counts
//   mean_rows   (r x c) -> 1 x c column means
//   mean_all    -> 1 x 1
//   softmax     normalizes each row independently
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor subtract(const Tensor& a, const Tensor& b);
Tensor multiply(const Tensor& a, const Tensor& b);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor concat_columns(std::span<const Tensor> parts);
Tensor concat_columns(const Tensor& a, const Tensor& b);
Tensor slice_columns(const Tensor& x, Index begin, Index count);
Tensor mean_rows(const Tensor& x);
Tensor mean_all(const Tensor& x);
Tensor softmax_rows(const Tensor& x);
Tensor scale(const Tensor& x, double factor);
Tensor square(const Tensor& x);

using ScalarFunction = std::function<Tensor(const std::vector<Tensor>&)>;

// Max over every entry of every point tensor of
// |analytic - numeric| / max(1, |analytic| + |numeric|), numeric by central
// differences with step eps. The point tensors are flagged requires_grad and
// their grads are overwritten.
double grad_check(const ScalarFunction& f, const std::vector<Tensor>& point, double eps = 1e-5);

}  // namespace diff
}  // namespace dgsp
