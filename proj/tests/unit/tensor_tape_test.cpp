#include <gtest/gtest.h>

#include <sstream>

#include "helpers.hpp"
#include "spxnet/errors.hpp"
#include "spxnet/ops.hpp"
#include "spxnet/tape.hpp"

using namespace spxnet;
using spxtest::random_tensor;

TEST(Tensor, ShapeAndIndexing) {
  Tensor t = Tensor::zeros({2, 3, 4, 5});
  EXPECT_EQ(t.numel(), 120u);
  t.at(1, 2, 3, 4) = 7.0f;
  EXPECT_EQ(t.data()[119], 7.0f);
  EXPECT_EQ(t.offset(1, 0, 0, 0), 60u);
}

TEST(Tensor, RejectsBadShapes) {
  EXPECT_THROW(Tensor::zeros({0, 1, 1, 1}), ShapeError);
  EXPECT_THROW(Tensor::from({1, 1, 2, 2}, {1, 2, 3}), ShapeError);
  EXPECT_THROW(Tensor().shape(), ShapeError);
}

TEST(Tensor, HandlesShareStorageCloneDoesNot) {
  Tensor a = Tensor::full({1, 1, 1, 3}, 1.0f);
  Tensor b = a;
  Tensor c = a.clone();
  b.mutable_data()[0] = 5.0f;
  EXPECT_EQ(a.data()[0], 5.0f);
  EXPECT_EQ(c.data()[0], 1.0f);
  EXPECT_TRUE(a.same_storage(b));
  EXPECT_FALSE(a.same_storage(c));
}

TEST(Tensor, DumpRoundTripIsBitExact) {
  Rng rng(3);
  Tensor t = random_tensor({2, 3, 4, 5}, rng, -1e6, 1e6);
  std::stringstream ss;
  t.dump(ss);
  EXPECT_TRUE(bit_equal(t, Tensor::parse_dump(ss)));
}

TEST(Tensor, ParseDumpRejectsGarbage) {
  std::stringstream bad("shape 1 1 1 1\n0");
  EXPECT_THROW(Tensor::parse_dump(bad), FormatError);
  std::stringstream truncated("shape: 1 1 2 2\n0 1 2");
  EXPECT_THROW(Tensor::parse_dump(truncated), FormatError);
}

TEST(Tape, RecordsOpsInOrder) {
  Tape tape;
  Tape::Scope scope(tape);
  Tensor x = Tensor::full({1, 1, 2, 2}, 1.0f).set_requires_grad(true);
  Tensor y = ops::sum(ops::scale(ops::leaky_relu(x, 0.1f), 2.0f));
  EXPECT_EQ(tape.op_names(), (std::vector<std::string>{"leaky_relu", "scale", "sum"}));
  tape.backward(y);
  for (float g : x.grad()) EXPECT_FLOAT_EQ(g, 2.0f);
}

TEST(Tape, NothingRecordedWithoutActiveTape) {
  EXPECT_EQ(Tape::active(), nullptr);
  Tensor x = Tensor::full({1, 1, 1, 1}, 1.0f).set_requires_grad(true);
  Tensor y = ops::scale(x, 3.0f);
  EXPECT_EQ(y.data()[0], 3.0f);
}

TEST(Tape, ScopesNestAndRestore) {
  Tape outer;
  Tape inner;
  {
    Tape::Scope a(outer);
    {
      Tape::Scope b(inner);
      EXPECT_EQ(Tape::active(), &inner);
    }
    EXPECT_EQ(Tape::active(), &outer);
  }
  EXPECT_EQ(Tape::active(), nullptr);
}

TEST(Tape, LeafGradientsAccumulateAcrossBackwardCalls) {
  Tensor x = Tensor::full({1, 1, 1, 1}, 2.0f).set_requires_grad(true);
  for (int i = 0; i < 2; ++i) {
    Tape tape;
    Tape::Scope scope(tape);
    tape.backward(ops::sum(ops::mul(x, x)));
  }
  EXPECT_FLOAT_EQ(x.grad()[0], 8.0f);
  x.zero_grad();
  EXPECT_FLOAT_EQ(x.grad()[0], 0.0f);
}

TEST(Tape, SharedSubexpressionGetsBothContributions) {
  Tape tape;
  Tape::Scope scope(tape);
  Tensor x = Tensor::full({1, 1, 1, 1}, 3.0f).set_requires_grad(true);
  Tensor y = ops::scale(x, 2.0f);
  tape.backward(ops::sum(ops::add(y, y)));
  EXPECT_FLOAT_EQ(x.grad()[0], 4.0f);
}

TEST(Tape, BackwardErrors) {
  Tape tape;
  Tape::Scope scope(tape);
  Tensor x = Tensor::full({1, 1, 2, 1}, 1.0f).set_requires_grad(true);
  EXPECT_THROW(tape.backward(ops::scale(x, 1.0f)), TapeError);  // not scalar
  Tensor c = Tensor::full({1, 1, 1, 1}, 1.0f);
  EXPECT_THROW(tape.backward(ops::sum(c)), TapeError);  // no requires_grad input

  Tape other;
  Tensor foreign;
  {
    Tape::Scope s2(other);
    foreign = ops::sum(x);
  }
  EXPECT_THROW(tape.backward(foreign), TapeError);

  Tensor loss = ops::sum(x);
  tape.reset();
  EXPECT_THROW(tape.backward(loss), TapeError);
}
