#include <gtest/gtest.h>

#include "support.hpp"

using namespace cltrack;
using namespace testing_support;

TEST(ParseGroundtruth, EightValues) {
  const auto b = parse_vot_groundtruth("0,0,0,2,2,2,2,0\n");
  ASSERT_EQ(b.size(), 1u);
  EXPECT_LT(point_set_deviation(b[0], square(0, 0, 2)), 1e-12);
}

TEST(ParseGroundtruth, CounterWoundInputIsCanonicalised) {
  const auto b = parse_vot_groundtruth("0,0,2,0,2,2,0,2\n");
  EXPECT_LT(signed_area(b[0].corners), 0.0);
  EXPECT_LT(point_set_deviation(b[0], square(0, 0, 2)), 1e-12);
}

TEST(ParseGroundtruth, FourValues) {
  const auto b = parse_vot_groundtruth("10,20,4,2\r\n");
  ASSERT_EQ(b.size(), 1u);
  EXPECT_LT(point_set_deviation(b[0], aabb_to_corners({12, 21, 4, 2})), 1e-12);
}

TEST(ParseGroundtruth, Errors) {
  try {
    parse_vot_groundtruth("1,2,three\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
  try {
    parse_vot_groundtruth("0,0,0,2,2,2,2,0\n0,0,0,2,3,2,2,0\n");
    FAIL();
  } catch (const NotARectangle& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse_vot_groundtruth("1,2,3\n"), ParseError);
}

TEST(ParseGroundtruth, NearRectangleWithinAnnotationTolerance) {
  const auto b = parse_vot_groundtruth("0,0,0,2,2,2.0005,2,0\n");
  EXPECT_NO_THROW(validate(b[0]));
}

TEST(Predictions, EmptyList) {
  EXPECT_EQ(serialize_predictions(std::vector<FiveBB>{}), "");
  EXPECT_TRUE(parse_predictions("").empty());
}

TEST(Predictions, SquareLine) {
  const auto b = parse_predictions("0,0,2,2,0.5");
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(b[0].p2, (Point2{2, 2}));
  EXPECT_EQ(b[0].beta, 0.5);
  EXPECT_EQ(serialize_predictions(b), "0.000000,0.000000,2.000000,2.000000,0.500000\n");
}

TEST(Predictions, RoundTrip) {
  Rng rng(1);
  std::vector<FiveBB> boxes;
  for (int i = 0; i < 100; ++i) boxes.push_back(random_box(rng));
  const auto back = parse_predictions(serialize_predictions(boxes));
  ASSERT_EQ(back.size(), boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const auto a = to_array(boxes[i]), b = to_array(back[i]);
    for (int k = 0; k < 5; ++k) EXPECT_NEAR(a[k], b[k], 1e-6);
  }
}

TEST(Predictions, ParseErrorLine) {
  try {
    parse_predictions("0,0,2,2,0.5\n0,0,2,2\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse_predictions("0,0,2,2,1.5\n"), ParseError);
}

TEST(Groundtruth, SerializeRoundTrip) {
  Rng rng(2);
  std::vector<CornerBB> boxes;
  for (int i = 0; i < 50; ++i) boxes.push_back(five_to_corners(random_box(rng, 5.0)));
  const auto back = parse_vot_groundtruth(serialize_groundtruth(boxes));
  for (std::size_t i = 0; i < boxes.size(); ++i) EXPECT_LT(point_set_deviation(back[i], boxes[i]), 1e-5);
}
