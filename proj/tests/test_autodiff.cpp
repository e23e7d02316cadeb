#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "darkfarseer/autodiff.hpp"
#include "oracles.hpp"

using namespace darkfarseer::ad;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -2.0, double hi = 2.0, bool grad = true) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> d(shape_size(shape));
  for (auto& v : d) v = u(rng);
  return Tensor::from(std::move(shape), std::move(d), grad);
}

// Weighted sum so every output entry gets a distinct upstream gradient.
Tensor contract(const Tensor& y, const Tensor& weights) { return sum_all(multiply(y, weights)); }

void expect_matches_fd(const std::function<Tensor(const std::vector<Tensor>&)>& build, std::vector<Tensor> inputs,
                       double tol = 1e-4) {
  const Tensor loss = build(inputs);
  const Gradients grads = backward(loss);
  std::vector<Tensor*> leaves;
  for (auto& t : inputs) leaves.push_back(&t);
  auto numeric = oracle::finite_difference([&] { return build(inputs).item(); }, leaves, 1e-5);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const auto analytic = grads.of(inputs[k]);
    for (std::size_t e = 0; e < analytic.size(); ++e) {
      EXPECT_LT(oracle::relative_error(analytic[e], numeric[k][e]), tol)
          << "input " << k << " entry " << e << " analytic " << analytic[e] << " numeric " << numeric[k][e];
    }
  }
}

}  // namespace

TEST(Autodiff, SigmoidOfZerosIsHalf) {
  const Tensor y = sigmoid(Tensor::zeros({2, 2}));
  for (double v : y.data()) EXPECT_EQ(v, 0.5);
}

TEST(Autodiff, MultiplyByOnesIsIdentity) {
  std::mt19937_64 rng(1);
  const Tensor t = random_tensor({3, 4}, rng, -2, 2, false);
  const Tensor y = multiply(t, Tensor::ones({3, 4}));
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(y[i], t[i]);
}

TEST(Autodiff, CosineOfOrthogonalVectorsIsZero) {
  EXPECT_EQ(cosine_similarity(Tensor::from({2}, {1, 0}), Tensor::from({2}, {0, 1})).item(), 0.0);
}

TEST(Autodiff, CosineOfZeroVectorIsGuarded) {
  const Tensor z = Tensor::zeros({3}, true);
  const Tensor v = Tensor::from({3}, {1, 2, 3}, true);
  const Tensor s = cosine_similarity(z, v);
  EXPECT_EQ(s.item(), 0.0);
  const auto g = backward(s);
  for (double x : g.of(z)) EXPECT_TRUE(std::isfinite(x));
}

TEST(Autodiff, SquareGradient) {
  const Tensor w = Tensor::from({1}, {3.0}, true);
  const auto g = backward(sum_all(multiply(w, w)));
  EXPECT_EQ(g.of(w), std::vector<double>{6.0});
}

TEST(Autodiff, SigmoidGradientAtZero) {
  const Tensor x = Tensor::scalar(0.0, true);
  const auto g = backward(sigmoid(x));
  EXPECT_DOUBLE_EQ(g.of(x)[0], 0.25);
}

TEST(Autodiff, ThreeLayerCompositionMatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  std::vector<Tensor> in = {random_tensor({4, 3}, rng), random_tensor({3, 5}, rng), random_tensor({5, 2}, rng),
                            random_tensor({4, 2}, rng, -1, 1, false)};
  const Tensor target = in[3];
  expect_matches_fd(
      [target](const std::vector<Tensor>& v) {
        const Tensor h1 = sigmoid(matmul(v[0], v[1]));
        const Tensor h2 = matmul(h1, v[2]);
        const Tensor d = subtract(exp(scale(h2, 0.5)), target);
        return sum_all(multiply(d, d));
      },
      {in[0], in[1], in[2]});
}

TEST(Autodiff, GradCheckOnSquare) {
  const Tensor w = Tensor::from({2}, {1.0, 2.0});
  const Tensor in[] = {w};
  const double err = grad_check([](std::span<const Tensor> v) { return sum_all(multiply(v[0], v[0])); }, in, 1e-5);
  EXPECT_LT(err, 1e-6);
}

TEST(Autodiff, GradCheckOnConstantIsExactlyZero) {
  const Tensor w = Tensor::from({2}, {1.0, 2.0});
  const Tensor in[] = {w};
  const auto f = [](std::span<const Tensor> v) { return add(scale(sum_all(v[0]), 0.0), Tensor::scalar(4.0)); };
  EXPECT_EQ(grad_check(f, in, 1e-5), 0.0);
  const Tensor leaf = Tensor::from({2}, {1.0, 2.0}, true);
  const Tensor leaves[] = {leaf};
  for (double g : backward(f(leaves)).of(leaf)) EXPECT_EQ(g, 0.0);
}

TEST(Autodiff, GradCheckRejectsNonScalar) {
  const Tensor in[] = {Tensor::from({2}, {1.0, 2.0})};
  EXPECT_THROW(grad_check([](std::span<const Tensor> v) { return v[0]; }, in, 1e-5), ShapeError);
  EXPECT_THROW(grad_check([](std::span<const Tensor> v) { return sum_all(v[0]); }, in, 0.0), std::invalid_argument);
}

TEST(Autodiff, ShapeMismatchNamesBothShapes) {
  try {
    add(Tensor::zeros({2, 3}), Tensor::zeros({4}));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2, 3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4]"), std::string::npos) << msg;
  }
  EXPECT_THROW(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), ShapeError);
  EXPECT_THROW(cosine_similarity(Tensor::zeros({2}), Tensor::zeros({3})), ShapeError);
  EXPECT_THROW(Tensor::from({2, 2}, {1, 2, 3}), ShapeError);
  EXPECT_THROW(Tensor::zeros({0}), ShapeError);
}

TEST(Autodiff, DomainAndNonFiniteErrors) {
  EXPECT_THROW(log(Tensor::from({2}, {1.0, 0.0})), DomainError);
  EXPECT_THROW(log(Tensor::from({1}, {-1.0})), DomainError);
  EXPECT_THROW(divide(Tensor::from({2}, {1.0, 1.0}), Tensor::from({2}, {1.0, 0.0})), DomainError);
  EXPECT_THROW(exp(Tensor::from({1}, {1000.0})), NonFiniteError);
  EXPECT_THROW(Tensor::from({1}, {std::nan("")}), NonFiniteError);
}

TEST(Autodiff, BackwardErrors) {
  const Tensor w = Tensor::from({2}, {1.0, 2.0}, true);
  EXPECT_THROW(backward(multiply(w, w)), ShapeError);
  const Tensor loss = sum_all(multiply(w, w));
  backward(loss);
  EXPECT_THROW(backward(loss), TapeError);
}

TEST(Autodiff, MutableDataOnlyOnLeaves) {
  Tensor w = Tensor::from({2}, {1.0, 2.0}, true);
  Tensor y = scale(w, 2.0);
  EXPECT_THROW(y.mutable_data(), TapeError);
  w.mutable_data()[0] = 5.0;
  EXPECT_EQ(w[0], 5.0);
  const Tensor d = y.detach();
  EXPECT_TRUE(d.is_leaf());
  EXPECT_FALSE(d.requires_grad());
  EXPECT_EQ(d[1], 4.0);
}

TEST(Autodiff, UnusedLeafGetsZeroGradient) {
  const Tensor a = Tensor::from({2}, {1.0, 2.0}, true);
  const Tensor b = Tensor::from({3}, {1.0, 2.0, 3.0}, true);
  const auto g = backward(sum_all(a));
  EXPECT_EQ(g.of(b), std::vector<double>(3, 0.0));
}

TEST(Autodiff, TapeIsTopologicallyOrdered) {
  std::mt19937_64 rng(3);
  const Tensor a = random_tensor({3, 3}, rng), b = random_tensor({3, 3}, rng);
  const Tensor shared = matmul(a, b);
  const Tensor loss = sum_all(add(sigmoid(shared), relu(transpose(shared))));
  ComputationTape tape(loss);
  EXPECT_TRUE(tape.is_topologically_ordered());
  EXPECT_GE(tape.size(), 5u);
}

TEST(Autodiff, SharedSubexpressionAccumulates) {
  const Tensor x = Tensor::from({1}, {2.0}, true);
  const Tensor y = multiply(x, x);
  const auto g = backward(sum_all(add(y, y)));  // 2x^2 -> 4x
  EXPECT_DOUBLE_EQ(g.of(x)[0], 8.0);
}

// Every primitive, random operands in [-2, 2], 100 seeds, against central differences.
class PrimitiveGradients : public ::testing::TestWithParam<OpKind> {};

TEST_P(PrimitiveGradients, MatchFiniteDifferences) {
  const OpKind kind = GetParam();
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed * 7919 + static_cast<std::uint64_t>(kind));
    std::vector<Tensor> in;
    std::function<Tensor(const std::vector<Tensor>&)> op;
    Shape out_shape{3, 4};
    switch (kind) {
      case OpKind::matmul:
        in = {random_tensor({3, 5}, rng), random_tensor({5, 4}, rng)};
        op = [](const auto& v) { return matmul(v[0], v[1]); };
        break;
      case OpKind::add:
        in = {random_tensor({3, 4}, rng), random_tensor({4}, rng)};
        op = [](const auto& v) { return add(v[0], v[1]); };
        break;
      case OpKind::subtract:
        in = {random_tensor({3, 4}, rng), random_tensor({3, 1}, rng)};
        op = [](const auto& v) { return subtract(v[0], v[1]); };
        break;
      case OpKind::elementwise_multiply:
        in = {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)};
        op = [](const auto& v) { return multiply(v[0], v[1]); };
        break;
      case OpKind::divide:
        in = {random_tensor({3, 4}, rng), random_tensor({4}, rng, 0.5, 2.0)};
        op = [](const auto& v) { return divide(v[0], v[1]); };
        break;
      case OpKind::sigmoid:
        in = {random_tensor({3, 4}, rng)};
        op = [](const auto& v) { return sigmoid(v[0]); };
        break;
      case OpKind::relu:
        in = {random_tensor({3, 4}, rng)};
        op = [](const auto& v) { return relu(v[0]); };
        break;
      case OpKind::exp:
        in = {random_tensor({3, 4}, rng)};
        op = [](const auto& v) { return exp(v[0]); };
        break;
      case OpKind::log:
        in = {random_tensor({3, 4}, rng, 0.1, 2.0)};
        op = [](const auto& v) { return log(v[0]); };
        break;
      case OpKind::mean_over_axis:
        in = {random_tensor({3, 5, 4}, rng)};
        op = [](const auto& v) { return mean_over_axis(v[0], 1); };
        break;
      case OpKind::sum_over_axis:
        in = {random_tensor({5, 3, 4}, rng)};
        op = [](const auto& v) { return sum_over_axis(v[0], 0); };
        break;
      case OpKind::concat:
        in = {random_tensor({3, 1}, rng), random_tensor({3, 3}, rng)};
        op = [](const auto& v) { return concat(std::vector<Tensor>{v[0], v[1]}, 1); };
        break;
      case OpKind::slice:
        in = {random_tensor({3, 7}, rng)};
        op = [](const auto& v) { return slice(v[0], 1, 2, 6); };
        break;
      case OpKind::transpose:
        in = {random_tensor({4, 3}, rng)};
        op = [](const auto& v) { return transpose(v[0]); };
        break;
      case OpKind::scalar_multiply:
        in = {random_tensor({3, 4}, rng)};
        op = [](const auto& v) { return scale(v[0], -1.7); };
        break;
      case OpKind::l2_norm:
        in = {random_tensor({3, 4}, rng)};
        op = [](const auto& v) { return l2_norm(v[0]); };
        out_shape = {1};
        break;
      case OpKind::cosine_similarity:
        in = {random_tensor({12}, rng), random_tensor({12}, rng)};
        op = [](const auto& v) { return cosine_similarity(v[0], v[1]); };
        out_shape = {1};
        break;
      case OpKind::reshape:
        in = {random_tensor({12}, rng)};
        op = [](const auto& v) { return reshape(v[0], {3, 4}); };
        break;
      case OpKind::gather_rows:
        in = {random_tensor({5, 4}, rng)};
        op = [](const auto& v) { return gather_rows(v[0], {4, 0, 4}); };
        break;
      case OpKind::scatter_rows:
        in = {random_tensor({2, 4}, rng)};
        op = [](const auto& v) { return scatter_rows(v[0], {2, 0}, 3); };
        break;
    }
    const Tensor weights = random_tensor(out_shape, rng, -1, 1, false);
    ASSERT_EQ(op(in).shape(), out_shape) << op_name(kind);
    SCOPED_TRACE(std::string(op_name(kind)) + " seed " + std::to_string(seed));
    expect_matches_fd([&](const std::vector<Tensor>& v) { return contract(op(v), weights); }, in);
  }
}

INSTANTIATE_TEST_SUITE_P(
    AllOps, PrimitiveGradients,
    ::testing::Values(OpKind::matmul, OpKind::add, OpKind::subtract, OpKind::elementwise_multiply, OpKind::divide,
                      OpKind::sigmoid, OpKind::relu, OpKind::exp, OpKind::log, OpKind::mean_over_axis,
                      OpKind::sum_over_axis, OpKind::concat, OpKind::slice, OpKind::transpose,
                      OpKind::scalar_multiply, OpKind::l2_norm, OpKind::cosine_similarity, OpKind::reshape,
                      OpKind::gather_rows, OpKind::scatter_rows),
    [](const auto& info) { return std::string(op_name(info.param)); });

TEST(Autodiff, ApplyIsDeterministic) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const Tensor a = random_tensor({6, 6}, rng, -2, 2, false), b = random_tensor({6, 6}, rng, -2, 2, false);
    const Tensor in[] = {a, b};
    for (OpKind k : {OpKind::matmul, OpKind::add, OpKind::elementwise_multiply}) {
      const Tensor x = apply(k, in), y = apply(k, in);
      ASSERT_EQ(std::vector<double>(x.data().begin(), x.data().end()),
                std::vector<double>(y.data().begin(), y.data().end()));
    }
  }
}

TEST(Autodiff, BackwardIsLinear) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-3, 3);
    const double ca = u(rng), cb = u(rng);
    const Tensor w = random_tensor({3, 3}, rng);
    const Tensor x = random_tensor({3, 3}, rng, -2, 2, false);
    auto f = [&] { return sum_all(sigmoid(matmul(w, x))); };
    auto g = [&] { return l2_norm(exp(scale(w, 0.3))); };
    const auto gf = backward(f()).of(w);
    const auto gg = backward(g()).of(w);
    const auto gc = backward(add(scale(f(), ca), scale(g(), cb))).of(w);
    for (std::size_t i = 0; i < gc.size(); ++i) EXPECT_NEAR(gc[i], ca * gf[i] + cb * gg[i], 1e-10);
  }
}
