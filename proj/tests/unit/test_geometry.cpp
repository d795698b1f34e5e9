#include <gtest/gtest.h>

#include <random>

#include "eltrack/errors.hpp"
#include "eltrack/geometry.hpp"

using namespace eltrack;

namespace {

BBox random_box(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.05, 0.95);
    std::uniform_real_distribution<double> s(0.01, 0.1);
    return BBox::from_center(u(rng), u(rng), s(rng), s(rng));
}

}  // namespace

TEST(Geometry, CenterToCorners) {
    const CornerBox c = to_corners(BBox::from_center(0.5, 0.5, 0.2, 0.2));
    EXPECT_NEAR(c.x0, 0.4, 1e-15);
    EXPECT_NEAR(c.y0, 0.4, 1e-15);
    EXPECT_NEAR(c.x1, 0.6, 1e-15);
    EXPECT_NEAR(c.y1, 0.6, 1e-15);
}

TEST(Geometry, FullFrameCornersToCenter) {
    const BBox b = to_center({0, 0, 1, 1});
    EXPECT_EQ(b.cx(), 0.5);
    EXPECT_EQ(b.cy(), 0.5);
    EXPECT_EQ(b.w(), 1.0);
    EXPECT_EQ(b.h(), 1.0);
}

TEST(Geometry, RoundTripRandomBoxes) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 1000; ++i) {
        const BBox b = random_box(rng);
        const BBox back = to_center(to_corners(b));
        EXPECT_NEAR(back.cx(), b.cx(), 1e-12);
        EXPECT_NEAR(back.cy(), b.cy(), 1e-12);
        EXPECT_NEAR(back.w(), b.w(), 1e-12);
        EXPECT_NEAR(back.h(), b.h(), 1e-12);
    }
}

TEST(Geometry, RejectsNonFiniteAndEmpty) {
    EXPECT_THROW(BBox::from_center(NAN, 0.5, 0.1, 0.1), ValidationError);
    EXPECT_THROW(BBox::from_center(0.5, 0.5, INFINITY, 0.1), ValidationError);
    EXPECT_THROW(BBox::from_center(0.5, 0.5, 0.0, 0.1), ValidationError);
    EXPECT_THROW(BBox::from_corners({1.2, 0.2, 1.5, 0.4}), ValidationError);
}

TEST(Geometry, ClampsToFrame) {
    const BBox b = BBox::from_center(0.95, 0.5, 0.2, 0.2);
    const CornerBox c = to_corners(b);
    EXPECT_NEAR(c.x1, 1.0, 1e-15);
    EXPECT_NEAR(c.x0, 0.85, 1e-15);
    EXPECT_GE(b.cx(), 0.0);
    EXPECT_LE(b.cx(), 1.0);
}

TEST(Geometry, OverlapIdentity) {
    const BBox b = BBox::from_center(0.3, 0.6, 0.2, 0.1);
    const OverlapMetrics m = box_overlap_metrics(b, b);
    EXPECT_DOUBLE_EQ(m.iou, 1.0);
    EXPECT_DOUBLE_EQ(m.giou, 1.0);
}

TEST(Geometry, DisjointGiouHandEvaluation) {
    // (0,0,1,1) and (2,0,3,1) scaled by 1/3: union 2, enclosing 3.
    const BBox a = to_center({0, 0, 1.0 / 3, 1.0 / 3});
    const BBox b = to_center({2.0 / 3, 0, 1.0, 1.0 / 3});
    const OverlapMetrics m = box_overlap_metrics(a, b);
    EXPECT_NEAR(m.iou, 0.0, 1e-12);
    EXPECT_NEAR(m.giou, -1.0 / 3.0, 1e-12);
}

TEST(Geometry, PartialOverlapHandEvaluation) {
    // (0,0,2,2) and (1,1,3,3) scaled by 1/3: inter 1, union 7, enclosing 9.
    const BBox a = to_center({0, 0, 2.0 / 3, 2.0 / 3});
    const BBox b = to_center({1.0 / 3, 1.0 / 3, 1.0, 1.0});
    const OverlapMetrics m = box_overlap_metrics(a, b);
    EXPECT_NEAR(m.iou, 1.0 / 7.0, 1e-12);
    EXPECT_NEAR(m.giou, 1.0 / 7.0 - 2.0 / 9.0, 1e-12);
}

TEST(Geometry, OverlapProperties) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 500; ++i) {
        const BBox a = random_box(rng);
        const BBox b = random_box(rng);
        const OverlapMetrics ab = box_overlap_metrics(a, b);
        const OverlapMetrics ba = box_overlap_metrics(b, a);
        EXPECT_DOUBLE_EQ(ab.iou, ba.iou);
        EXPECT_DOUBLE_EQ(ab.giou, ba.giou);
        EXPECT_LE(ab.giou, ab.iou + 1e-15);
        EXPECT_GE(ab.iou, 0.0);
        EXPECT_LE(ab.iou, 1.0);
        EXPECT_GT(ab.giou, -1.0);
        EXPECT_LT(ab.iou, 1.0);
    }
}

TEST(Geometry, GiouEqualsIouWhenEnclosingIsUnion) {
    // Nested boxes: the enclosing box is the outer box, which is the union.
    const BBox outer = to_center({0.2, 0.2, 0.6, 0.6});
    const BBox inner = to_center({0.3, 0.3, 0.5, 0.5});
    const OverlapMetrics m = box_overlap_metrics(outer, inner);
    EXPECT_NEAR(m.giou, m.iou, 1e-15);
    EXPECT_NEAR(m.iou, 0.25, 1e-12);
}

TEST(Geometry, BoxCenter) {
    const Point2 p = box_center(BBox::from_center(0.5, 0.5, 0.2, 0.2));
    EXPECT_EQ(p, (Point2{0.5, 0.5}));
    const Point2 q = box_center(BBox::from_center(0.3, 0.7, 0.1, 0.1));
    EXPECT_NEAR(q.x, 0.3, 1e-15);
    EXPECT_NEAR(q.y, 0.7, 1e-15);
}

TEST(Geometry, CenterOfCornerForm) {
    std::mt19937_64 rng(9);
    for (int i = 0; i < 100; ++i) {
        const BBox b = random_box(rng);
        const CornerBox c = to_corners(b);
        const Point2 p = box_center(to_center(c));
        EXPECT_NEAR(p.x, 0.5 * (c.x0 + c.x1), 1e-12);
        EXPECT_NEAR(p.y, 0.5 * (c.y0 + c.y1), 1e-12);
    }
}

TEST(Geometry, PixelConversionsRoundTrip) {
    const PixelBox p{10.5, 20.25, 40.0, 30.0};
    const BBox b = from_pixels(p, 320, 240);
    const PixelBox q = to_pixels(b, 320, 240);
    EXPECT_NEAR(q.x0, p.x0, 1e-9);
    EXPECT_NEAR(q.y0, p.y0, 1e-9);
    EXPECT_NEAR(q.w, p.w, 1e-9);
    EXPECT_NEAR(q.h, p.h, 1e-9);
    EXPECT_NEAR(l1_distance({0.1, 0.2}, {0.4, 0.0}), 0.5, 1e-15);
}
