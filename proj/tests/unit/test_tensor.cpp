#include "doctest.h"

#include "dgsp/error.hpp"
#include "dgsp/tensor.hpp"

#include "fixtures.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <string>

using namespace dgsp;
using namespace dgsp::diff;

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
  Index r = 0;
  for (const auto& row : rows) {
    Index c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

// Weighted sum with fixed random weights so every output entry matters.
Tensor reduce(const Tensor& y, const Matrix& weights) {
  return mean_all(multiply(y, Tensor(weights)));
}

Matrix away_from_zero(Matrix m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (Index i = 0; i < m.size(); ++i) {
    if (std::abs(m.data()[i]) < 0.05) m.data()[i] = u(rng);
  }
  return m;
}

}  // namespace

TEST_CASE("tensor: spec examples") {
  Tensor a(mat({{1, 2}, {3, 4}}));
  Tensor b(mat({{1}, {0}}));
  CHECK(matmul(a, b).value() == mat({{1}, {3}}));
  CHECK(sigmoid(Tensor(mat({{0}}))).item() == 0.5);
  CHECK(mean_rows(Tensor(mat({{1, 3}, {5, 7}}))).value() == mat({{3, 5}}));
}

TEST_CASE("tensor: empty shapes are rejected") {
  CHECK_THROWS_AS(Tensor(Matrix(0, 3)), DimensionError);
}

TEST_CASE("tensor: dimension errors name the operation and both shapes") {
  Tensor a = Tensor::zeros(2, 3);
  Tensor b = Tensor::zeros(2, 1);
  try {
    matmul(a, b);
    FAIL("expected a dimension error");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("matmul") != std::string::npos);
    CHECK(msg.find("(2x3)") != std::string::npos);
    CHECK(msg.find("(2x1)") != std::string::npos);
  }
  CHECK_THROWS_AS(add(a, Tensor::zeros(1, 2)), DimensionError);
  CHECK_THROWS_AS(subtract(a, b), DimensionError);
  CHECK_THROWS_AS(multiply(a, b), DimensionError);
  CHECK_THROWS_AS(concat_columns(a, Tensor::zeros(3, 1)), DimensionError);
  CHECK_THROWS_AS(slice_columns(a, 2, 2), DimensionError);
}

TEST_CASE("tensor: add broadcasts a 1 x c row") {
  Tensor x(mat({{1, 2}, {3, 4}}));
  Tensor bias(mat({{10, 20}}));
  CHECK(add(x, bias).value() == mat({{11, 22}, {13, 24}}));
}

TEST_CASE("backward: spec examples") {
  SUBCASE("mean-all of square") {
    Tensor w(mat({{3}}), true);
    Tape tape;
    {
      TapeScope scope(tape);
      backward(tape, mean_all(square(w)));
    }
    CHECK(w.grad()(0, 0) == doctest::Approx(6.0).epsilon(1e-15));
  }
  SUBCASE("sigmoid(w) * x") {
    Tensor w(mat({{0}}), true);
    Tensor x(mat({{1}}));
    Tape tape;
    {
      TapeScope scope(tape);
      backward(tape, multiply(sigmoid(w), x));
    }
    CHECK(w.grad()(0, 0) == doctest::Approx(0.25).epsilon(1e-15));
  }
  SUBCASE("random 3x3 matmul + tanh composite") {
    std::mt19937_64 rng(11);
    Tensor a(fixtures::random_matrix(3, 3, rng));
    Tensor b(fixtures::random_matrix(3, 3, rng));
    auto f = [](const std::vector<Tensor>& p) { return mean_all(tanh(matmul(p[0], p[1]))); };
    CHECK(grad_check(f, {a, b}, 1e-5) < 1e-6);
  }
}

TEST_CASE("backward: non-scalar output is a contract error") {
  Tensor w = Tensor::zeros(2, 2, true);
  Tape tape;
  TapeScope scope(tape);
  Tensor y = square(w);
  CHECK_THROWS_AS(backward(tape, y), ContractError);
  CHECK_THROWS_AS(y.item(), ContractError);
}

TEST_CASE("backward: repeated calls accumulate until grads are zeroed") {
  Tensor w(mat({{2}}), true);
  Tape tape;
  TapeScope scope(tape);
  Tensor y = mean_all(square(w));
  backward(tape, y);
  backward(tape, y);
  CHECK(w.grad()(0, 0) == doctest::Approx(8.0));
  w.zero_grad();
  backward(tape, y);
  CHECK(w.grad()(0, 0) == doctest::Approx(4.0));
}

TEST_CASE("tape: only records when an input requires grad") {
  Tape tape;
  TapeScope scope(tape);
  Tensor a = Tensor::filled(2, 2, 1.0);
  square(a);
  CHECK(tape.size() == 0);
  Tensor w = Tensor::zeros(2, 2, true);
  Tensor y = add(square(w), a);
  CHECK(tape.size() == 2);
  CHECK(y.requires_grad());
  // Topological order: the producer of each input precedes its consumer.
  const auto& entries = tape.entries();
  CHECK(entries[1].inputs[0] == entries[0].output);
}

TEST_CASE("tape: shared parameters accumulate across uses") {
  Tensor w(mat({{1.5}}), true);
  Tensor x(mat({{2.0}}));
  Tape tape;
  TapeScope scope(tape);
  // y = (w x) w = w^2 x; dy/dw = 2 w x
  Tensor y = matmul(matmul(w, x), w);
  backward(tape, y);
  CHECK(w.grad()(0, 0) == doctest::Approx(6.0));
}

TEST_CASE("grad_check: spec examples") {
  std::mt19937_64 rng(5);
  Tensor x(fixtures::random_matrix(4, 3, rng));
  auto f = [](const std::vector<Tensor>& p) { return mean_all(p[0]); };
  CHECK(grad_check(f, {x}, 1e-5) <= 1e-12);
  CHECK_THROWS_AS(grad_check(f, {x}, 0.0), ContractError);
  CHECK_THROWS_AS(grad_check(f, {x}, -1.0), ContractError);
  auto not_scalar = [](const std::vector<Tensor>& p) { return square(p[0]); };
  CHECK_THROWS_AS(grad_check(not_scalar, {x}, 1e-5), ContractError);
}

TEST_CASE("grad_check: every operation kind at 100 random points") {
  std::mt19937_64 rng(2024);
  using Builder = std::function<Tensor(const std::vector<Tensor>&)>;
  struct Case {
    OpKind kind;
    std::vector<std::pair<Index, Index>> shapes;
    Builder op;
    bool avoid_kink = false;
  };
  const std::vector<Case> cases = {
      {OpKind::MatMul, {{3, 4}, {4, 2}}, [](const auto& p) { return matmul(p[0], p[1]); }},
      {OpKind::Add, {{3, 4}, {3, 4}}, [](const auto& p) { return add(p[0], p[1]); }},
      {OpKind::Add, {{3, 4}, {1, 4}}, [](const auto& p) { return add(p[0], p[1]); }},
      {OpKind::Subtract, {{3, 4}, {3, 4}}, [](const auto& p) { return subtract(p[0], p[1]); }},
      {OpKind::Multiply, {{3, 4}, {3, 4}}, [](const auto& p) { return multiply(p[0], p[1]); }},
      {OpKind::Sigmoid, {{3, 4}}, [](const auto& p) { return sigmoid(p[0]); }},
      {OpKind::Tanh, {{3, 4}}, [](const auto& p) { return tanh(p[0]); }},
      {OpKind::Relu, {{3, 4}}, [](const auto& p) { return relu(p[0]); }, true},
      {OpKind::ConcatColumns, {{3, 2}, {3, 3}}, [](const auto& p) { return concat_columns(p[0], p[1]); }},
      {OpKind::SliceColumns, {{3, 5}}, [](const auto& p) { return slice_columns(p[0], 1, 3); }},
      {OpKind::MeanRows, {{3, 4}}, [](const auto& p) { return mean_rows(p[0]); }},
      {OpKind::MeanAll, {{3, 4}}, [](const auto& p) { return mean_all(p[0]); }},
      {OpKind::SoftmaxRows, {{3, 4}}, [](const auto& p) { return softmax_rows(p[0]); }},
      {OpKind::Scale, {{3, 4}}, [](const auto& p) { return scale(p[0], -1.7); }},
      {OpKind::Square, {{3, 4}}, [](const auto& p) { return square(p[0]); }},
  };
  for (const Case& c : cases) {
    CAPTURE(to_string(c.kind));
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<Tensor> point;
      for (auto [r, k] : c.shapes) {
        Matrix m = fixtures::random_matrix(r, k, rng, -2.0, 2.0);
        if (c.avoid_kink) m = away_from_zero(m, rng);
        point.emplace_back(m);
      }
      const Tensor probe = c.op(point);
      const Matrix weights = fixtures::random_matrix(probe.rows(), probe.cols(), rng);
      Builder f = [&](const std::vector<Tensor>& p) { return reduce(c.op(p), weights); };
      worst = std::max(worst, grad_check(f, point, 1e-5));
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("backward: identical inputs and tape give bit-identical grads") {
  std::mt19937_64 rng(3);
  const Matrix a0 = fixtures::random_matrix(4, 4, rng);
  const Matrix b0 = fixtures::random_matrix(4, 3, rng);
  auto run = [&]() {
    Tensor a(a0, true);
    Tensor b(b0, true);
    Tape tape;
    TapeScope scope(tape);
    Tensor y = mean_all(softmax_rows(tanh(matmul(a, b))));
    backward(tape, y);
    return std::make_pair(a.grad(), b.grad());
  };
  const auto first = run();
  const auto second = run();
  CHECK(first.first == second.first);
  CHECK(first.second == second.second);
}

TEST_CASE("concat-columns then slicing back is the identity on values and grads") {
  std::mt19937_64 rng(8);
  Tensor a(fixtures::random_matrix(3, 2, rng), true);
  Tensor b(fixtures::random_matrix(3, 4, rng), true);
  const Matrix wa = fixtures::random_matrix(3, 2, rng);
  const Matrix wb = fixtures::random_matrix(3, 4, rng);

  Tape tape;
  TapeScope scope(tape);
  Tensor joined = concat_columns(a, b);
  Tensor back_a = slice_columns(joined, 0, 2);
  Tensor back_b = slice_columns(joined, 2, 4);
  CHECK(back_a.value() == a.value());
  CHECK(back_b.value() == b.value());
  backward(tape, add(reduce(back_a, wa), reduce(back_b, wb)));

  Tensor a2(a.value(), true);
  Tensor b2(b.value(), true);
  Tape direct;
  {
    TapeScope inner(direct);
    backward(direct, add(reduce(a2, wa), reduce(b2, wb)));
  }
  CHECK(a.grad() == a2.grad());
  CHECK(b.grad() == b2.grad());
}

TEST_CASE("softmax rows are distributions") {
  std::mt19937_64 rng(4);
  Tensor x(fixtures::random_matrix(5, 7, rng, -30.0, 30.0));
  const Matrix s = softmax_rows(x).value();
  CHECK((s.array() >= 0.0).all());
  for (Index r = 0; r < s.rows(); ++r) CHECK(std::abs(s.row(r).sum() - 1.0) < 1e-12);
}

TEST_CASE("operation kinds have stable names") {
  CHECK(to_string(OpKind::MatMul) == "matmul");
  CHECK(to_string(OpKind::SoftmaxRows) == "softmax-over-rows");
}
