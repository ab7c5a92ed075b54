#include <cmath>

#include <gtest/gtest.h>

#include "adapto/autodiff.hpp"
#include "adapto/errors.hpp"
#include "adapto/grad_check.hpp"
#include "adapto/layers.hpp"
#include "adapto/ops.hpp"
#include "test_util.hpp"

using namespace adapto;

namespace {

GradientMap grad_of(const std::function<Tensor()>& f) {
  Tape tape;
  Tensor loss;
  {
    RecordScope scope(tape);
    loss = f();
  }
  return tape.backward(loss);
}

}  // namespace

TEST(Tensor, ConstructsFromValues) {
  Tensor t = tensor_new({1, 1, 2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(t.values(), (std::vector<double>{1, 2, 3, 4}));
  EXPECT_EQ(t.at(0, 0, 1, 0), 3.0);
  Tensor z = tensor_new({1, 1, 1, 1}, {0});
  EXPECT_TRUE(z.shape().is_scalar());
  EXPECT_EQ(z.item(), 0.0);
}

TEST(Tensor, RejectsWrongValueCount) {
  try {
    tensor_new({1, 2, 1, 1}, {1});
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("expected 2 values, got 1"), std::string::npos);
  }
}

TEST(Tensor, CopiesShareStorageAndCloneDoesNot) {
  Tensor a = Tensor::full({1, 1, 1, 3}, 2.0);
  Tensor b = a;
  Tensor c = a.clone();
  b.mutable_data()[0] = 9.0;
  EXPECT_EQ(a[0], 9.0);
  EXPECT_EQ(c[0], 2.0);
  EXPECT_TRUE(a.same_storage(b));
  EXPECT_FALSE(a.same_storage(c));
}

TEST(Ops, AddElementwiseAndBroadcast) {
  EXPECT_EQ(add(tensor_new({1, 1, 1, 2}, {1, 2}), tensor_new({1, 1, 1, 2}, {3, 4})).values(),
            (std::vector<double>{4, 6}));
  EXPECT_EQ(add(tensor_new({1, 1, 2, 2}, {1, 2, 3, 4}), tensor_new({1, 1, 1, 1}, {10})).values(),
            (std::vector<double>{11, 12, 13, 14}));
  EXPECT_THROW(add(Tensor::zeros({1, 2, 2, 2}), Tensor::zeros({1, 3, 1, 1})), ShapeError);
}

TEST(Ops, AddBackwardIsOnes) {
  Tensor a = Tensor::full({1, 2, 2, 3}, 0.5).set_requires_grad(true);
  Tensor b = Tensor::full({1, 2, 2, 3}, 1.5);
  const GradientMap g = grad_of([&] { return sum(add(a, b)); });
  for (double v : g.at(a).data()) EXPECT_EQ(v, 1.0);
  EXPECT_FALSE(g.contains(b));
}

TEST(Ops, Scale) {
  EXPECT_EQ(scale(tensor_new({1, 1, 1, 2}, {2, 4}), 0.5).values(), (std::vector<double>{1, 2}));
  std::mt19937_64 rng(1);
  Tensor x = oracle::random_tensor({2, 3, 2, 2}, rng);
  EXPECT_EQ(scale(x, 1.0).values(), x.values());
  const Tensor zero = scale(x, 0.0);
  for (double v : zero.data()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(scale(x, std::nan("")), ArgumentError);
}

TEST(Autodiff, LinearFunction) {
  Tensor x = tensor_new({1, 1, 1, 2}, {0.3, -0.7}).set_requires_grad(true);
  const GradientMap g = grad_of([&] { return sum(scale(x, 2.0)); });
  EXPECT_EQ(g.at(x).values(), (std::vector<double>{2, 2}));
}

TEST(Autodiff, FanOutAccumulates) {
  Tensor x = tensor_new({1, 1, 1, 2}, {0.3, -0.7}).set_requires_grad(true);
  const GradientMap g = grad_of([&] { return sum(add(x, x)); });
  EXPECT_EQ(g.at(x).values(), (std::vector<double>{2, 2}));
}

TEST(Autodiff, FanOutEqualsSumOfBranchGradients) {
  std::mt19937_64 rng(4);
  Tensor x = oracle::random_tensor({1, 2, 3, 3}, rng).set_requires_grad(true);
  Tensor w = oracle::random_tensor({1, 2, 3, 3}, rng);
  const auto branch_a = [&] { return sum(mul(elu(x), w)); };
  const auto branch_b = [&] { return sum(mul(x, x)); };
  const GradientMap ga = grad_of(branch_a);
  const GradientMap gb = grad_of(branch_b);
  const GradientMap both = grad_of([&] { return add(branch_a(), branch_b()); });
  for (std::size_t i = 0; i < x.numel(); ++i) {
    EXPECT_NEAR(both.at(x)[i], ga.at(x)[i] + gb.at(x)[i], 1e-14);
  }
  // k identical identity branches: gradient k.
  const GradientMap g3 = grad_of([&] { return sum(add(add(x, x), x)); });
  for (double v : g3.at(x).data()) EXPECT_EQ(v, 3.0);
}

TEST(Autodiff, EluPositiveBranch) {
  Tensor x = tensor_new({1, 1, 1, 1}, {1.0}).set_requires_grad(true);
  const GradientMap g = grad_of([&] { return sum(elu(x)); });
  EXPECT_EQ(g.at(x).item(), 1.0);
}

TEST(Autodiff, BroadcastAddGradientIsSpatialSum) {
  std::mt19937_64 rng(5);
  Tensor a = oracle::random_tensor({2, 3, 4, 5}, rng);
  Tensor b = oracle::random_tensor({2, 3, 1, 1}, rng).set_requires_grad(true);
  Tensor w = oracle::random_tensor({2, 3, 4, 5}, rng);
  const GradientMap g = grad_of([&] { return sum(mul(add(a, b), w)); });
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t c = 0; c < 3; ++c) {
      double s = 0.0;
      for (std::size_t h = 0; h < 4; ++h)
        for (std::size_t x = 0; x < 5; ++x) s += w.at(n, c, h, x);
      EXPECT_NEAR(g.at(b).at(n, c, 0, 0), s, 1e-12);
    }
  EXPECT_LT(grad_check([&] { return sum(mul(add(a, b), w)); }, {b}, 1e-5), 1e-6);
}

TEST(Autodiff, BackwardContracts) {
  Tape tape;
  Tensor x = Tensor::full({1, 1, 1, 2}, 1.0).set_requires_grad(true);
  Tensor nonscalar;
  {
    RecordScope scope(tape);
    nonscalar = scale(x, 2.0);
  }
  EXPECT_THROW((void)tape.backward(nonscalar), ContractError);
  Tape empty;
  EXPECT_THROW((void)empty.backward(Tensor::scalar(1.0)), ContractError);
  GradientMap g;
  EXPECT_THROW((void)g.at(x), ContractError);
}

TEST(Autodiff, NothingRecordedWithoutScope) {
  Tensor x = Tensor::full({1, 1, 1, 2}, 1.0).set_requires_grad(true);
  Tape tape;
  (void)sum(x);
  EXPECT_EQ(active_tape(), nullptr);
  EXPECT_TRUE(tape.empty());
}

TEST(GradCheck, SquareSum) {
  std::mt19937_64 rng(6);
  Tensor x = oracle::random_tensor({1, 2, 3, 3}, rng);
  EXPECT_LT(grad_check([&] { return sum(mul(x, x)); }, {x}, 1e-5), 1e-6);
}

TEST(GradCheck, ConstantFunction) {
  Tensor x = Tensor::full({1, 1, 1, 3}, 2.0);
  const GradCheckResult r = grad_check([] { return Tensor::scalar(4.0); }, {{"x", x}});
  EXPECT_EQ(r.max_relative_error, 0.0);
  EXPECT_EQ(r.coordinates, 3u);
}

TEST(GradCheck, DetectsWrongGradient) {
  Tensor x = Tensor::full({1, 1, 1, 2}, 0.4);
  // A rule that reports half the true gradient.
  const auto f = [&] {
    Tensor y = Tensor::scalar(x[0] * x[0] + x[1] * x[1]);
    record(y, {x}, [xv = x](std::span<const double> g, GradSlots slots) {
      for (std::size_t i = 0; i < 2; ++i) (*slots[0])[i] += g[0] * xv[i];
    });
    return y;
  };
  EXPECT_GT(grad_check(f, {x}, 1e-5), 0.1);
}

TEST(GradCheck, RejectsNondeterministicFunction) {
  Tensor x = Tensor::full({1, 1, 1, 1}, 1.0);
  int calls = 0;
  EXPECT_THROW(grad_check([&] { return Tensor::scalar(++calls); }, {x}, 1e-5), ContractError);
}

TEST(GradCheck, RestoresParameters) {
  std::mt19937_64 rng(7);
  Tensor x = oracle::random_tensor({1, 1, 2, 2}, rng);
  const auto before = x.values();
  (void)grad_check([&] { return sum(elu(x)); }, {x}, 1e-5);
  EXPECT_EQ(x.values(), before);
}
