#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "guardian/autograd.hpp"
#include "guardian/grad_check.hpp"
#include "guardian/param_store.hpp"
#include "guardian/rng.hpp"
#include "guardian/tensor.hpp"

using namespace guardian;
using namespace guardian::numerics;

namespace {

Tensor2D random_tensor(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Tensor2D t(r, c);
  for (double& v : t.values()) v = n(rng);
  return t;
}

}  // namespace

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  const auto m = Tensor2D::from_rows({{1.5, -2}, {0.25, 7}});
  EXPECT_EQ(matmul(Tensor2D::identity(2), m), m);
}

TEST(Matmul, HandComputedProduct) {
  const auto out = matmul(Tensor2D::from_rows({{1, 2}, {3, 4}}), Tensor2D::from_rows({{5}, {6}}));
  EXPECT_EQ(out, Tensor2D::from_rows({{17}, {39}}));
}

TEST(Matmul, ZeroAnnihilates) {
  const auto m = Tensor2D::from_rows({{1, 2}, {3, 4}});
  EXPECT_EQ(matmul(Tensor2D(2, 2), m), Tensor2D(2, 2));
}

TEST(Matmul, MismatchReportsBothShapes) {
  try {
    matmul(Tensor2D(2, 3), Tensor2D(2, 3));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
  }
}

TEST(Activation, ReluSplitsSign) {
  EXPECT_EQ(activation(Activation::relu, Tensor2D::from_rows({{-1, 2}})), Tensor2D::from_rows({{0, 2}}));
}

TEST(Activation, SigmoidFixedPoints) {
  EXPECT_DOUBLE_EQ(activation(Activation::sigmoid, Tensor2D::from_rows({{0}}))(0, 0), 0.5);
  EXPECT_NEAR(activation(Activation::sigmoid, Tensor2D::from_rows({{std::log(3.0)}}))(0, 0), 0.75, 1e-15);
}

TEST(Activation, SigmoidStaysInsideOpenInterval) {
  const auto out = activation(Activation::sigmoid, Tensor2D::from_rows({{-1e6, 1e6, 40, -40}}));
  for (double v : out.values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Softmax, UniformRow) {
  const auto out = softmax_rows(Tensor2D::from_rows({{0, 0, 0}}));
  for (double v : out.values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Softmax, LogInputsNormalize) {
  const auto out = softmax_rows(Tensor2D::from_rows({{std::log(1.0), std::log(2.0), std::log(3.0)}}));
  EXPECT_NEAR(out(0, 0), 1.0 / 6, 1e-15);
  EXPECT_NEAR(out(0, 1), 2.0 / 6, 1e-15);
  EXPECT_NEAR(out(0, 2), 3.0 / 6, 1e-15);
}

TEST(Softmax, LargeInputsDoNotOverflow) {
  const auto out = softmax_rows(Tensor2D::from_rows({{1000, 1000}}));
  EXPECT_DOUBLE_EQ(out(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(out(0, 1), 0.5);
}

TEST(Softmax, RowsSumToOneForArbitraryInput) {
  Rng rng = make_rng(11, {1});
  for (int trial = 0; trial < 200; ++trial) {
    const auto out = softmax_rows(random_tensor(3, 7, rng, 50.0));
    ASSERT_TRUE(out.all_finite());
    for (std::size_t r = 0; r < out.rows(); ++r) {
      double s = 0;
      for (double v : out.row(r)) {
        EXPECT_GE(v, 0.0);
        s += v;
      }
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
  }
}

TEST(Tensor, ConstructorRejectsWrongValueCount) {
  EXPECT_THROW(Tensor2D(2, 2, std::vector<double>{1, 2, 3}), ShapeError);
}

TEST(Adam, ZeroGradientKeepsValues) {
  ParamStore store;
  store.add("w", Tensor2D::from_rows({{1, -2}, {3, 4}}));
  const auto before = store.at("w").value;
  adam_step(store, {});
  EXPECT_EQ(store.at("w").value, before);
  EXPECT_EQ(store.at("w").step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamStore store;
  store.add("x", Tensor2D(1, 1, 0.0));
  store.at("x").grad(0, 0) = 1.0;
  adam_step(store, AdamOptions{0.1, 0.9, 0.999, 1e-8});
  // frozen from tests/oracles/derive_fixtures.py
  EXPECT_NEAR(store.at("x").value(0, 0), -0.09999999900000002, 1e-15);
  EXPECT_DOUBLE_EQ(store.at("x").grad(0, 0), 1.0);
}

TEST(Adam, IdenticalEntriesStayIdentical) {
  ParamStore store;
  store.add("a", Tensor2D::from_rows({{0.3, -0.1}}));
  store.add("b", Tensor2D::from_rows({{0.3, -0.1}}));
  for (int i = 0; i < 25; ++i) {
    store.at("a").grad = Tensor2D::from_rows({{0.5 * i, -1.0}});
    store.at("b").grad = store.at("a").grad;
    adam_step(store, {});
  }
  EXPECT_EQ(store.at("a").value, store.at("b").value);
}

TEST(Adam, Deterministic) {
  auto run = [] {
    ParamStore s;
    s.add("w", Tensor2D::from_rows({{0.1, 0.2, 0.3}}));
    for (int i = 0; i < 10; ++i) {
      s.at("w").grad = Tensor2D::from_rows({{std::sin(i), std::cos(i), 0.5}});
      adam_step(s, {});
    }
    return s.at("w").value;
  };
  EXPECT_EQ(run(), run());
}

TEST(ParamStore, RejectsDuplicateNames) {
  ParamStore store;
  store.add("w", Tensor2D(1, 1));
  EXPECT_THROW(store.add("w", Tensor2D(1, 1)), std::invalid_argument);
}

TEST(GradCheck, QuadraticIsExact) {
  ParamStore store;
  Rng rng = make_rng(3, {});
  store.add("a", random_tensor(3, 4, rng));
  store.add("b", random_tensor(2, 2, rng));
  auto loss = [](Tape& tape, ParamStore& s) {
    return add(sum(square(tape.parameter(s, "a"))), sum(square(tape.parameter(s, "b"))));
  };
  EXPECT_LT(grad_check(loss, store, {}).max_relative_error, 1e-7);
}

TEST(GradCheck, ConstantLossHasZeroGradients) {
  ParamStore store;
  store.add("a", Tensor2D(2, 2, 1.0));
  auto loss = [](Tape& tape, ParamStore& s) {
    tape.parameter(s, "a");
    return tape.constant(Tensor2D(1, 1, 3.0));
  };
  const auto r = grad_check(loss, store, {});
  EXPECT_LT(r.max_relative_error, 1e-9);
  EXPECT_NEAR(r.worst_analytic, 0.0, 1e-12);
  EXPECT_NEAR(r.worst_numeric, 0.0, 1e-9);
}

TEST(GradCheck, RejectsNonFiniteLoss) {
  ParamStore store;
  store.add("a", Tensor2D(1, 1, 800.0));
  auto loss = [](Tape& tape, ParamStore& s) { return sum(exp(tape.parameter(s, "a"))); };
  EXPECT_ANY_THROW(grad_check(loss, store, {}));
}

TEST(GradCheck, RestoresValues) {
  ParamStore store;
  store.add("a", Tensor2D::from_rows({{0.5, -0.5}}));
  const auto before = store.at("a").value;
  grad_check([](Tape& t, ParamStore& s) { return sum(square(t.parameter(s, "a"))); }, store, {});
  EXPECT_EQ(store.at("a").value, before);
}

// Every tape op against finite differences.
TEST(Autograd, EveryOpMatchesFiniteDifferences) {
  Rng rng = make_rng(5, {});
  ParamStore store;
  store.add("a", random_tensor(3, 4, rng));
  store.add("b", random_tensor(4, 3, rng));
  store.add("c", random_tensor(3, 4, rng));
  store.add("r", random_tensor(1, 4, rng));
  const Tensor2D targets = Tensor2D::from_rows({{1, 0, 1}, {0, 1, 0}, {1, 1, 0}});
  auto loss = [&](Tape& tape, ParamStore& s) {
    Var a = tape.parameter(s, "a");
    Var b = tape.parameter(s, "b");
    Var c = tape.parameter(s, "c");
    Var r = tape.parameter(s, "r");
    Var ab = matmul(a, b);                             // 3x3
    Var sm = softmax_rows(ab);                         // 3x3
    Var mixed = add(mul(a, c), scale(sub(a, c), 0.3));  // 3x4
    Var rowed = add_row(mixed, r);
    Var act = add(relu(rowed), sigmoid(transpose(b)));  // 3x4
    Var clipped = clamp(add_scalar(act, -0.2), -0.5, 0.8);
    Var parts[] = {slice_cols(clipped, 0, 2), slice_cols(exp(scale(c, 0.2)), 2, 4)};
    Var cat = concat_cols(parts);
    const std::size_t pick[] = {2, 0};
    Var rows[] = {gather_rows(cat, pick), sm};
    Var stacked = concat_rows(std::span<const Var>(rows, 1));
    return add(add(sum(square(stacked)), sum(sm)), bce_with_logits_sum(ab, targets));
  };
  GradCheckOptions opts;
  opts.coords_per_entry = 64;
  const auto r = grad_check(loss, store, opts);
  EXPECT_LT(r.max_relative_error, 1e-6) << r.worst_entry << "[" << r.worst_index << "] analytic "
                                        << r.worst_analytic << " numeric " << r.worst_numeric;
}

TEST(Autograd, RejectsNonFiniteIntermediate) {
  Tape tape;
  Var x = tape.constant(Tensor2D(1, 1, 1000.0));
  EXPECT_THROW(exp(x), std::domain_error);
}

TEST(Autograd, BackwardRequiresScalar) {
  ParamStore store;
  store.add("a", Tensor2D(2, 2, 1.0));
  Tape tape;
  Var a = tape.parameter(store, "a");
  EXPECT_ANY_THROW(tape.backward(a));
}
