#include "dgsp/tensor.hpp"

#include "dgsp/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace dgsp::diff {

namespace {

thread_local Tape* g_active_tape = nullptr;

std::string shape_of(const Matrix& m) {
  std::ostringstream os;
  os << '(' << m.rows() << 'x' << m.cols() << ')';
  return os.str();
}

[[noreturn]] void dimension_error(OpKind kind, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(to_string(kind)) + ": shape mismatch " + a.shape_string() +
                       " vs " + b.shape_string());
}

void ensure_grad(Node& n) {
  if (n.grad.rows() != n.value.rows() || n.grad.cols() != n.value.cols()) {
    n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  }
}

}  // namespace

Tensor make_result(Matrix value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

namespace {

// Builds the output tensor and records it on the active tape when any input
// participates in differentiation.
Tensor emit(OpKind kind, Matrix value, std::vector<std::shared_ptr<Node>> inputs,
            Tape::Rule rule) {
  Tape* tape = g_active_tape;
  bool track = tape != nullptr &&
               std::any_of(inputs.begin(), inputs.end(),
                           [](const auto& n) { return n->requires_grad; });
  Tensor out = make_result(std::move(value), track);
  if (track) {
    tape->record(Tape::Entry{kind, std::move(inputs), out.node(), std::move(rule)});
  }
  return out;
}

}  // namespace

std::string_view to_string(OpKind kind) {
  switch (kind) {
    case OpKind::MatMul: return "matmul";
    case OpKind::Add: return "add";
    case OpKind::Subtract: return "subtract";
    case OpKind::Multiply: return "multiply";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Tanh: return "tanh";
    case OpKind::Relu: return "relu";
    case OpKind::ConcatColumns: return "concat-columns";
    case OpKind::SliceColumns: return "slice-columns";
    case OpKind::MeanRows: return "mean-rows";
    case OpKind::MeanAll: return "mean-all";
    case OpKind::SoftmaxRows: return "softmax-over-rows";
    case OpKind::Scale: return "scalar-multiply";
    case OpKind::Square: return "square";
  }
  return "unknown";
}

Tensor::Tensor(Matrix value, bool requires_grad) {
  if (value.rows() < 1 || value.cols() < 1) {
    throw DimensionError("tensor: shape components must be >= 1, got " + shape_of(value));
  }
  node_ = std::make_shared<Node>();
  node_->value = std::move(value);
  set_requires_grad(requires_grad);
}

Tensor Tensor::zeros(Index rows, Index cols, bool requires_grad) {
  return Tensor(Matrix::Zero(rows, cols), requires_grad);
}

Tensor Tensor::filled(Index rows, Index cols, double value) {
  return Tensor(Matrix::Constant(rows, cols, value));
}

Tensor Tensor::scalar(double value) { return Tensor(Matrix::Constant(1, 1, value)); }

std::string Tensor::shape_string() const { return shape_of(node_->value); }

void Tensor::set_requires_grad(bool on) {
  node_->requires_grad = on;
  if (on) ensure_grad(*node_);
}

void Tensor::zero_grad() {
  node_->grad = Matrix::Zero(node_->value.rows(), node_->value.cols());
}

double Tensor::item() const {
  if (rows() != 1 || cols() != 1) {
    throw ContractError("item: tensor is " + shape_string() + ", expected (1x1)");
  }
  return node_->value(0, 0);
}

void Tape::record(Entry entry) { entries_.push_back(std::move(entry)); }

void Tape::backward(const Tensor& output) {
  if (!output.defined() || output.rows() != 1 || output.cols() != 1) {
    throw ContractError("backward: output must be a 1x1 scalar, got " +
                        (output.defined() ? output.shape_string() : std::string("undefined")));
  }
  const Node* out = output.node().get();
  auto it = std::find_if(entries_.rbegin(), entries_.rend(),
                         [out](const Entry& e) { return e.output.get() == out; });
  if (it == entries_.rend()) {
    throw ContractError("backward: output was not recorded on this tape");
  }

  std::unordered_set<const Node*> produced;
  produced.reserve(entries_.size());
  for (const Entry& e : entries_) produced.insert(e.output.get());
  for (const Entry& e : entries_) e.output->grad = Matrix::Zero(e.output->value.rows(), e.output->value.cols());
  for (const Entry& e : entries_) {
    for (const auto& in : e.inputs) {
      if (in->requires_grad && !produced.contains(in.get())) ensure_grad(*in);
    }
  }

  it->output->grad(0, 0) = 1.0;
  // Entries after the output's own cannot influence it.
  for (; it != entries_.rend(); ++it) {
    it->rule(*it->output);
  }
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

Tape* active_tape() { return g_active_tape; }

void backward(Tape& tape, const Tensor& output) { tape.backward(output); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) dimension_error(OpKind::MatMul, a, b);
  Matrix value = a.value() * b.value();
  auto na = a.node();
  auto nb = b.node();
  return emit(OpKind::MatMul, std::move(value), {na, nb}, [na, nb](const Node& out) {
    if (na->requires_grad) na->grad.noalias() += out.grad * nb->value.transpose();
    if (nb->requires_grad) nb->grad.noalias() += na->value.transpose() * out.grad;
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  auto na = a.node();
  auto nb = b.node();
  if (a.rows() == b.rows() && a.cols() == b.cols()) {
    return emit(OpKind::Add, a.value() + b.value(), {na, nb}, [na, nb](const Node& out) {
      if (na->requires_grad) na->grad += out.grad;
      if (nb->requires_grad) nb->grad += out.grad;
    });
  }
  if (b.rows() == 1 && a.cols() == b.cols()) {
    Matrix value = a.value().rowwise() + b.value().row(0);
    return emit(OpKind::Add, std::move(value), {na, nb}, [na, nb](const Node& out) {
      if (na->requires_grad) na->grad += out.grad;
      if (nb->requires_grad) nb->grad += out.grad.colwise().sum();
    });
  }
  dimension_error(OpKind::Add, a, b);
}

Tensor subtract(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) dimension_error(OpKind::Subtract, a, b);
  auto na = a.node();
  auto nb = b.node();
  return emit(OpKind::Subtract, a.value() - b.value(), {na, nb}, [na, nb](const Node& out) {
    if (na->requires_grad) na->grad += out.grad;
    if (nb->requires_grad) nb->grad -= out.grad;
  });
}

Tensor multiply(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) dimension_error(OpKind::Multiply, a, b);
  auto na = a.node();
  auto nb = b.node();
  Matrix value = a.value().cwiseProduct(b.value());
  return emit(OpKind::Multiply, std::move(value), {na, nb}, [na, nb](const Node& out) {
    if (na->requires_grad) na->grad += out.grad.cwiseProduct(nb->value);
    if (nb->requires_grad) nb->grad += out.grad.cwiseProduct(na->value);
  });
}

Tensor sigmoid(const Tensor& x) {
  auto nx = x.node();
  Matrix value = x.value().unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  return emit(OpKind::Sigmoid, std::move(value), {nx}, [nx](const Node& out) {
    if (!nx->requires_grad) return;
    nx->grad.array() += out.grad.array() * out.value.array() * (1.0 - out.value.array());
  });
}

Tensor tanh(const Tensor& x) {
  auto nx = x.node();
  Matrix value = x.value().array().tanh().matrix();
  return emit(OpKind::Tanh, std::move(value), {nx}, [nx](const Node& out) {
    if (!nx->requires_grad) return;
    nx->grad.array() += out.grad.array() * (1.0 - out.value.array().square());
  });
}

Tensor relu(const Tensor& x) {
  auto nx = x.node();
  Matrix value = x.value().cwiseMax(0.0);
  return emit(OpKind::Relu, std::move(value), {nx}, [nx](const Node& out) {
    if (!nx->requires_grad) return;
    nx->grad.array() += (nx->value.array() > 0.0).select(out.grad.array(), 0.0);
  });
}

Tensor concat_columns(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat-columns: no inputs");
  Index rows = parts.front().rows();
  Index cols = 0;
  for (const Tensor& p : parts) {
    if (p.rows() != rows) dimension_error(OpKind::ConcatColumns, parts.front(), p);
    cols += p.cols();
  }
  Matrix value(rows, cols);
  std::vector<std::shared_ptr<Node>> inputs;
  std::vector<Index> offsets;
  Index at = 0;
  for (const Tensor& p : parts) {
    value.middleCols(at, p.cols()) = p.value();
    inputs.push_back(p.node());
    offsets.push_back(at);
    at += p.cols();
  }
  auto rule = [inputs, offsets](const Node& out) {
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      Node& in = *inputs[i];
      if (in.requires_grad) in.grad += out.grad.middleCols(offsets[i], in.value.cols());
    }
  };
  return emit(OpKind::ConcatColumns, std::move(value), inputs, std::move(rule));
}

Tensor concat_columns(const Tensor& a, const Tensor& b) {
  const Tensor parts[] = {a, b};
  return concat_columns(std::span<const Tensor>(parts));
}

Tensor slice_columns(const Tensor& x, Index begin, Index count) {
  if (begin < 0 || count < 1 || begin + count > x.cols()) {
    throw DimensionError("slice-columns: columns [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") outside " + x.shape_string());
  }
  auto nx = x.node();
  Matrix value = x.value().middleCols(begin, count);
  return emit(OpKind::SliceColumns, std::move(value), {nx}, [nx, begin, count](const Node& out) {
    if (nx->requires_grad) nx->grad.middleCols(begin, count) += out.grad;
  });
}

Tensor mean_rows(const Tensor& x) {
  auto nx = x.node();
  const double inv = 1.0 / static_cast<double>(x.rows());
  Matrix value = x.value().colwise().sum() * inv;
  return emit(OpKind::MeanRows, std::move(value), {nx}, [nx, inv](const Node& out) {
    if (nx->requires_grad) nx->grad.rowwise() += out.grad.row(0) * inv;
  });
}

Tensor mean_all(const Tensor& x) {
  auto nx = x.node();
  const double inv = 1.0 / static_cast<double>(x.value().size());
  Matrix value = Matrix::Constant(1, 1, x.value().sum() * inv);
  return emit(OpKind::MeanAll, std::move(value), {nx}, [nx, inv](const Node& out) {
    if (nx->requires_grad) nx->grad.array() += out.grad(0, 0) * inv;
  });
}

Tensor softmax_rows(const Tensor& x) {
  auto nx = x.node();
  Matrix value(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    auto row = x.value().row(r);
    double peak = row.maxCoeff();
    auto e = (row.array() - peak).exp();
    value.row(r) = e / e.sum();
  }
  return emit(OpKind::SoftmaxRows, std::move(value), {nx}, [nx](const Node& out) {
    if (!nx->requires_grad) return;
    // dx = s * (g - <g, s>) per row
    Eigen::VectorXd dots = out.grad.cwiseProduct(out.value).rowwise().sum();
    nx->grad.array() +=
        out.value.array() * (out.grad.colwise() - dots).array();
  });
}

Tensor scale(const Tensor& x, double factor) {
  auto nx = x.node();
  return emit(OpKind::Scale, x.value() * factor, {nx}, [nx, factor](const Node& out) {
    if (nx->requires_grad) nx->grad += out.grad * factor;
  });
}

Tensor square(const Tensor& x) {
  auto nx = x.node();
  Matrix value = x.value().array().square().matrix();
  return emit(OpKind::Square, std::move(value), {nx}, [nx](const Node& out) {
    if (nx->requires_grad) nx->grad.array() += 2.0 * out.grad.array() * nx->value.array();
  });
}

double grad_check(const ScalarFunction& f, const std::vector<Tensor>& point, double eps) {
  if (!(eps > 0.0)) throw ContractError("grad_check: eps must be > 0");

  std::vector<Tensor> leaves = point;
  for (Tensor& t : leaves) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  Tape tape;
  {
    TapeScope scope(tape);
    Tensor out = f(leaves);
    if (out.rows() != 1 || out.cols() != 1) {
      throw ContractError("grad_check: function output must be 1x1, got " + out.shape_string());
    }
    if (tape.size() == 0) {
      // Output does not depend on any leaf through a recorded op.
      for (Tensor& t : leaves) t.zero_grad();
    } else {
      tape.backward(out);
    }
  }

  double worst = 0.0;
  for (Tensor& t : leaves) {
    Matrix& v = t.mutable_value();
    for (Index i = 0; i < v.size(); ++i) {
      double saved = v.data()[i];
      v.data()[i] = saved + eps;
      double up = f(leaves).item();
      v.data()[i] = saved - eps;
      double down = f(leaves).item();
      v.data()[i] = saved;
      double numeric = (up - down) / (2.0 * eps);
      double analytic = t.grad().data()[i];
      double err = std::abs(analytic - numeric) /
                   std::max(1.0, std::abs(analytic) + std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace dgsp::diff
