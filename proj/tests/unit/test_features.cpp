#include <gtest/gtest.h>

#include <cmath>

#include "eltrack/features.hpp"

using namespace eltrack;
using D = double;

TEST(CropTemplate, TargetCoversQuarterOfCrop) {
    Image frame(200, 160, {10, 10, 10});
    // 40 x 20 target centred at (100, 80).
    for (int y = 70; y < 90; ++y)
        for (int x = 80; x < 120; ++x) frame.set(x, y, {250, 250, 250});
    const BBox gt = BBox::from_center(100.0 / 200, 80.0 / 160, 40.0 / 200, 20.0 / 160);
    const Image crop = crop_template(frame, gt, 64);
    ASSERT_EQ(crop.width, 64);
    ASSERT_EQ(crop.height, 64);
    int bright = 0;
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) bright += crop.get(x, y)[0] > 128;
    EXPECT_NEAR(bright / (64.0 * 64.0), 0.25, 0.03);
    EXPECT_GT(crop.get(32, 32)[0], 200);
}

TEST(CropTemplate, PadsOutsideFrameWithChannelMeans) {
    Image frame(50, 50, {100, 60, 20});
    const BBox gt = BBox::from_center(0.02, 0.02, 0.04, 0.04);
    const Image crop = crop_template(frame, gt, 16);
    const Rgb corner = crop.get(0, 0);
    EXPECT_EQ(corner[0], 100);
    EXPECT_EQ(corner[1], 60);
    EXPECT_EQ(corner[2], 20);
}

TEST(CropTemplate, RejectsEmptyFrame) {
    EXPECT_THROW(crop_template(Image(), BBox::from_center(0.5, 0.5, 0.1, 0.1)), ValidationError);
}

TEST(ImageToTensor, AppliesChannelNormalization) {
    Image img(2, 1);
    img.set(0, 0, {0, 128, 255});
    img.set(1, 0, {64, 64, 64});
    NormStats stats;
    stats.mean = {100.0, 100.0, 100.0};
    stats.std = {50.0, 25.0, 10.0};
    const Mat<D> t = image_to_tensor<D>(img, stats).value();
    ASSERT_EQ(t.rows(), 2);
    ASSERT_EQ(t.cols(), 3);
    EXPECT_NEAR(t(0, 0), -2.0, 1e-12);
    EXPECT_NEAR(t(0, 1), 28.0 / 25.0, 1e-12);
    EXPECT_NEAR(t(0, 2), 15.5, 1e-12);
    EXPECT_NEAR(t(1, 0), -36.0 / 50.0, 1e-12);
}

TEST(PositionalEncoding, BoundedAndDistinct) {
    const Mat<D> pe = positional_encoding<D>(6, 8, 16);
    ASSERT_EQ(pe.rows(), 48);
    ASSERT_EQ(pe.cols(), 16);
    EXPECT_LE(pe.cwiseAbs().maxCoeff(), 1.0 + 1e-12);
    for (Index i = 0; i < pe.rows(); ++i)
        for (Index j = i + 1; j < pe.rows(); ++j) EXPECT_GT((pe.row(i) - pe.row(j)).norm(), 1e-3);
}

TEST(Backbone, StrideSixteenAndReducedWidth) {
    InitRng rng(1);
    ParamSet<D> ps;
    Backbone<D> bb(ps, 4, 16, 8, rng);
    const Tensor<D> img(rng.uniform_matrix<D>(96 * 64, 3, 1.0));
    const FeatureMap<D> raw = bb.backbone_features(img, 64, 96);
    EXPECT_EQ(raw.height, 4);
    EXPECT_EQ(raw.width, 6);
    EXPECT_EQ(raw.channels(), 16);
    const FeatureMap<D> red = bb.reduce(raw);
    EXPECT_EQ(red.channels(), 8);
    EXPECT_EQ(red.cells(), 24);
    EXPECT_EQ(red.stride, kFeatureStride);
}

TEST(FusionEncoder, ReturnsSearchGridOnly) {
    InitRng rng(2);
    ParamSet<D> ps;
    FusionEncoder<D> enc(ps, AttentionConfig{8, 2, 2}, 2, 16, rng);
    FeatureMap<D> tmpl{Tensor<D>(rng.uniform_matrix<D>(4, 8, 1.0)), 2, 2};
    FeatureMap<D> search{Tensor<D>(rng.uniform_matrix<D>(12, 8, 1.0)), 3, 4};
    EXPECT_EQ(FusionEncoder<D>::token_count(tmpl, search), 16);
    const FeatureMap<D> out = enc.forward(tmpl, search);
    EXPECT_EQ(out.height, 3);
    EXPECT_EQ(out.width, 4);
    EXPECT_EQ(out.values.rows(), 12);
    EXPECT_EQ(out.values.cols(), 8);
}

TEST(FusionEncoder, SearchOutputDependsOnTemplate) {
    InitRng rng(3);
    ParamSet<D> ps;
    FusionEncoder<D> enc(ps, AttentionConfig{8, 2, 2}, 1, 16, rng);
    FeatureMap<D> search{Tensor<D>(rng.uniform_matrix<D>(6, 8, 1.0)), 2, 3};
    FeatureMap<D> t1{Tensor<D>(rng.uniform_matrix<D>(4, 8, 1.0)), 2, 2};
    FeatureMap<D> t2{Tensor<D>(rng.uniform_matrix<D>(4, 8, 1.0)), 2, 2};
    const Mat<D> a = enc.forward(t1, search).values.value();
    const Mat<D> b = enc.forward(t2, search).values.value();
    EXPECT_GT((a - b).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(TemplatePooler, CentralCellsAndUnitNorm) {
    EXPECT_EQ(TemplatePooler<D>::central_cells(8, 8).size(), 16u);
    EXPECT_EQ(TemplatePooler<D>::central_cells(1, 1).size(), 1u);
    InitRng rng(4);
    ParamSet<D> ps;
    TemplatePooler<D> pool(ps, 8, rng);
    FeatureMap<D> tmpl{Tensor<D>(rng.uniform_matrix<D>(64, 8, 1.0)), 8, 8};
    const Mat<D> v = pool.forward(tmpl).value();
    ASSERT_EQ(v.rows(), 1);
    EXPECT_NEAR(v.norm(), 1.0, 1e-6);  // eps under the root
}
