#include <gtest/gtest.h>

#include <set>

#include "opekit/multiindex.hpp"
#include "opekit/parser.hpp"

using namespace opekit;

// Counts by hand: d=2 is {phi^2, d_mu phi}; d=3 adds phi^3, phi d_mu phi, d_mu d_nu phi;
// d=4 is phi^4 (1), phi^2 d phi (4), phi dd phi (10), d phi d phi (10), ddd phi (20).
TEST(EnumerateOps, CountsMatchHandEnumeration) {
  const std::vector<std::size_t> expected{1, 1, 5, 15, 45};
  for (int d = 0; d < 5; ++d) EXPECT_EQ(enumerate_ops(d).size(), expected[static_cast<std::size_t>(d)]) << d;
}

TEST(EnumerateOps, DimensionZeroIsIdentityOnly) {
  ASSERT_EQ(enumerate_ops(0).size(), 1U);
  EXPECT_TRUE(enumerate_ops(0)[0].is_identity());
}

TEST(EnumerateOps, EveryOperatorHasRequestedDimensionAndIsUnique) {
  for (int d = 0; d <= 6; ++d) {
    std::set<CompositeOp> seen;
    for (const auto& op : enumerate_ops(d)) {
      EXPECT_EQ(op.dimension(), d);
      EXPECT_TRUE(seen.insert(op).second) << to_string(op);
    }
  }
}

TEST(EnumerateOps, DeterministicOrder) {
  const auto first = enumerate_ops(5);
  const auto again = enumerate_ops(5);
  EXPECT_EQ(first, again);
  for (std::size_t i = 1; i < first.size(); ++i) {
    const bool by_count = first[i - 1].size() < first[i].size();
    const bool same_count = first[i - 1].size() == first[i].size();
    EXPECT_TRUE(by_count || (same_count && first[i - 1] < first[i]));
  }
}

TEST(MultiIndices, OrderCountIsBinomial) {
  // (d+3 choose 3)
  for (int d = 0; d < 8; ++d)
    EXPECT_EQ(multi_indices_of_order(d).size(), static_cast<std::size_t>((d + 1) * (d + 2) * (d + 3) / 6));
}

TEST(CompositeOpTest, FactorOrderIsCanonical) {
  const MultiIndex a{{1, 0, 0, 0}};
  const MultiIndex b{{0, 0, 2, 0}};
  EXPECT_EQ(CompositeOp({a, b}), CompositeOp({b, a}));
  EXPECT_EQ(CompositeOp({a, b}).dimension(), 2 + 3);
}

TEST(CompositeOpTest, SymmetryFactor) {
  EXPECT_DOUBLE_EQ(CompositeOp::phi_power(4).symmetry_factor(), 24.0);
  const MultiIndex a{{1, 0, 0, 0}};
  EXPECT_DOUBLE_EQ(CompositeOp({a, a, MultiIndex{}}).symmetry_factor(), 2.0);
  EXPECT_DOUBLE_EQ(CompositeOp::identity().symmetry_factor(), 1.0);
}

TEST(Parser, Example) {
  const CompositeOp op = parse_op("d[0,1,0,0]phi*phi^2");
  EXPECT_EQ(op, CompositeOp({MultiIndex{{0, 1, 0, 0}}, MultiIndex{}, MultiIndex{}}));
  EXPECT_EQ(op.dimension(), 4);
}

TEST(Parser, IdentityAndPowers) {
  EXPECT_TRUE(parse_op("1").is_identity());
  EXPECT_EQ(parse_op("phi^4"), CompositeOp::phi_power(4));
  EXPECT_EQ(parse_op(" phi * phi "), CompositeOp::phi_power(2));
}

TEST(Parser, RoundTripThroughToString) {
  for (int d = 0; d <= 5; ++d)
    for (const auto& op : enumerate_ops(d)) EXPECT_EQ(parse_op(to_string(op)), op) << to_string(op);
}

TEST(Parser, MalformedDerivativeReportsOffset) {
  try {
    parse_op("d[1,2]phi");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 5U);
    EXPECT_NE(std::string(e.what()).find("byte 5"), std::string::npos);
  }
}

TEST(Parser, RejectsGarbage) {
  EXPECT_THROW(parse_op(""), ParseError);
  EXPECT_THROW(parse_op("psi"), ParseError);
  EXPECT_THROW(parse_op("phi*"), ParseError);
  EXPECT_THROW(parse_op("phi^0"), ParseError);
  EXPECT_THROW(parse_op("1*phi"), ParseError);
}

TEST(Parser, ListWithOffsets) {
  const auto ops = parse_op_list("phi, phi^2 ,d[0,0,0,1]phi");
  ASSERT_EQ(ops.size(), 3U);
  EXPECT_EQ(ops[1], CompositeOp::phi_power(2));
  try {
    parse_op_list("phi,phi,d[1,2]phi");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 13U);
  }
}
