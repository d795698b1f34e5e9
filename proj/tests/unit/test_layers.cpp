#include <gtest/gtest.h>

#include <cmath>

#include "eltrack/gradcheck.hpp"
#include "eltrack/layers.hpp"
#include "support/oracles.hpp"

using namespace eltrack;
using D = double;

namespace {

void jitter(ParamSet<D>& ps, InitRng& rng, double amount) {
    for (const auto& [name, t] : ps.items()) {
        Tensor<D> p = t;
        p.mutable_value() += rng.uniform_matrix<D>(p.rows(), p.cols(), amount);
    }
}

}  // namespace

TEST(Linear, AffineMap) {
    InitRng rng(1);
    ParamSet<D> ps;
    Linear<D> l(ps, "l", 3, 2, rng);
    const Mat<D> x = rng.uniform_matrix<D>(4, 3, 1.0);
    const Mat<D> y = l.forward(Tensor<D>(x)).value();
    EXPECT_LT((y - oracle::affine(x, l)).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_EQ(ps.count(), 8u);  // 3x2 weight plus 2 bias
    EXPECT_TRUE(ps.find("l.weight").defined());
}

TEST(ParamSet, RejectsDuplicateNames) {
    ParamSet<D> ps;
    ps.create("a", Mat<D>::Zero(1, 1));
    EXPECT_THROW(ps.create("a", Mat<D>::Zero(1, 1)), ValidationError);
}

TEST(LayerNorm, NormalizesRows) {
    ParamSet<D> ps;
    LayerNorm<D> ln(ps, "ln", 6);
    InitRng rng(2);
    const Mat<D> x = rng.uniform_matrix<D>(5, 6, 3.0);
    const Mat<D> y = ln.forward(Tensor<D>(x)).value();
    for (Index i = 0; i < 5; ++i) {
        EXPECT_NEAR(y.row(i).mean(), 0.0, 1e-12);
        const double var = (y.row(i).array() - y.row(i).mean()).square().mean();
        EXPECT_NEAR(var, 1.0, 1e-4);
    }
}

TEST(MultiHeadAttention, MatchesScaledDotProductOracle) {
    InitRng rng(3);
    ParamSet<D> ps;
    const AttentionConfig cfg{8, 2, 1};
    MultiHeadAttention<D> mha(ps, "mha", cfg, rng);
    jitter(ps, rng, 0.2);
    const Mat<D> q = rng.uniform_matrix<D>(3, 8, 1.0);
    const Mat<D> kv = rng.uniform_matrix<D>(5, 8, 1.0);
    const AttentionResult<D> r = mha.forward(Tensor<D>(q), Tensor<D>(kv));

    const Mat<D> qp = oracle::affine(q, mha.q_proj), kp = oracle::affine(kv, mha.k_proj), vp = oracle::affine(kv, mha.v_proj);
    Mat<D> concat(3, 8);
    for (int h = 0; h < 2; ++h) {
        const Mat<D> logits = qp.middleCols(h * 4, 4) * kp.middleCols(h * 4, 4).transpose() / 2.0;
        const Mat<D> w = oracle::softmax_rows(logits);
        EXPECT_LT((w - r.weights[h]).cwiseAbs().maxCoeff(), 1e-12);
        concat.middleCols(h * 4, 4) = w * vp.middleCols(h * 4, 4);
    }
    EXPECT_LT((r.output.value() - oracle::affine(concat, mha.out_proj)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MultiHeadAttention, RejectsWrongWidth) {
    InitRng rng(4);
    ParamSet<D> ps;
    MultiHeadAttention<D> mha(ps, "mha", AttentionConfig{8, 2, 1}, rng);
    EXPECT_THROW(mha.forward(Tensor<D>(Mat<D>::Zero(1, 6)), Tensor<D>(Mat<D>::Zero(2, 8))), ShapeError);
    EXPECT_THROW(mha.forward(Tensor<D>(Mat<D>::Zero(1, 8)), Tensor<D>(Mat<D>::Zero(0, 8))), ShapeError);
}

TEST(AttentionConfig, HeadsMustDivideWidth) {
    EXPECT_THROW((AttentionConfig{10, 4, 4}.validate()), ValidationError);
    EXPECT_NO_THROW((AttentionConfig{8, 4, 4}.validate()));
}

TEST(DeformableAttention, IntegerOffsetsMatchDenseOracle) {
    const int h = 8, w = 8, heads = 2, points = 3, c = 6;
    InitRng rng(5);
    ParamSet<D> ps;
    DeformableCrossAttention<D> dca(ps, "dca", AttentionConfig{c, heads, points}, rng);
    jitter(ps, rng, 0.3);
    // Offsets independent of the query and integral in cell units.
    fill(dca.offset_proj.weight, 0.0);
    std::vector<int> off(2 * heads * points);
    for (std::size_t i = 0; i < off.size(); ++i) {
        off[i] = static_cast<int>(i % 5) - 2;
        dca.offset_proj.bias.mutable_value()(0, static_cast<Index>(i)) = off[i];
    }
    const Index n = 4;
    Mat<D> refs(n, 2);
    const int ref_cells[4][2] = {{2, 3}, {4, 4}, {5, 2}, {3, 5}};
    for (Index i = 0; i < n; ++i) {
        refs(i, 0) = (ref_cells[i][0] + 0.5) / w;
        refs(i, 1) = (ref_cells[i][1] + 0.5) / h;
    }
    const Mat<D> q = rng.uniform_matrix<D>(n, c, 1.0);
    const Mat<D> map = rng.uniform_matrix<D>(h * w, c, 1.0);
    const DeformableResult<D> r = dca.forward(Tensor<D>(q), Tensor<D>(refs), Tensor<D>(map), h, w);

    const Mat<D> value = oracle::affine(map, dca.value_proj);
    const Mat<D> logits = oracle::affine(q, dca.weight_proj);
    const Index d = c / heads;
    Mat<D> gathered = Mat<D>::Zero(n, c);
    for (Index i = 0; i < n; ++i) {
        for (int m = 0; m < heads; ++m) {
            const Mat<D> wts = oracle::softmax_rows(logits.block(i, m * points, 1, points));
            for (int k = 0; k < points; ++k) {
                const int s = m * points + k;
                const int x = ref_cells[i][0] + off[2 * s];
                const int y = ref_cells[i][1] + off[2 * s + 1];
                ASSERT_TRUE(x >= 0 && x < w && y >= 0 && y < h);
                gathered.block(i, m * d, 1, d) += wts(0, k) * value.block(y * w + x, m * d, 1, d);
                EXPECT_NEAR(r.weights.value()(i, s), wts(0, k), 1e-12);
            }
        }
    }
    EXPECT_LT((r.output.value() - oracle::affine(gathered, dca.out_proj)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(DeformableAttention, WeightsSumToOnePerHead) {
    InitRng rng(6);
    ParamSet<D> ps;
    DeformableCrossAttention<D> dca(ps, "dca", AttentionConfig{8, 4, 4}, rng);
    jitter(ps, rng, 0.5);
    Mat<D> refs = rng.uniform_matrix<D>(5, 2, 0.4);
    refs.array() += 0.5;
    const DeformableResult<D> r = dca.forward(Tensor<D>(rng.uniform_matrix<D>(5, 8, 1.0)), Tensor<D>(refs),
                                              Tensor<D>(rng.uniform_matrix<D>(30, 8, 1.0)), 5, 6);
    ASSERT_EQ(r.weights.cols(), 16);
    ASSERT_EQ(r.locations.cols(), 32);
    for (Index i = 0; i < 5; ++i) {
        for (int m = 0; m < 4; ++m) {
            EXPECT_NEAR(r.weights.value().block(i, m * 4, 1, 4).sum(), 1.0, 1e-12);
        }
    }
}

TEST(DeformableAttention, InitialSamplesSurroundReference) {
    InitRng rng(7);
    ParamSet<D> ps;
    DeformableCrossAttention<D> dca(ps, "dca", AttentionConfig{8, 2, 4}, rng);
    Mat<D> refs(1, 2);
    refs << 0.5, 0.5;
    const DeformableResult<D> r = dca.forward(Tensor<D>(rng.uniform_matrix<D>(1, 8, 1.0)), Tensor<D>(refs),
                                              Tensor<D>(rng.uniform_matrix<D>(100, 8, 1.0)), 10, 10);
    for (Index s = 0; s < 8; ++s) {
        const double dx = (r.locations.value()(0, 2 * s) - 0.5) * 10;
        const double dy = (r.locations.value()(0, 2 * s + 1) - 0.5) * 10;
        const double dist = std::hypot(dx, dy);
        EXPECT_GT(dist, 0.5);
        EXPECT_LT(dist, 5.0);
    }
    // Uniform weights at initialization.
    EXPECT_NEAR(r.weights.value()(0, 0), 0.25, 1e-12);
}

TEST(Conv2d, MatchesDirectConvolution) {
    InitRng rng(8);
    ParamSet<D> ps;
    Conv2d<D> conv(ps, "conv", 2, 3, 3, 2, 1, rng);
    jitter(ps, rng, 0.1);
    const int h = 7, w = 6;
    const Mat<D> x = rng.uniform_matrix<D>(h * w, 2, 1.0);
    const auto out = conv.forward(Tensor<D>(x), h, w);
    EXPECT_EQ(out.height, 4);
    EXPECT_EQ(out.width, 3);
    const Mat<D>& wt = conv.weight.value();
    for (int oy = 0; oy < out.height; ++oy) {
        for (int ox = 0; ox < out.width; ++ox) {
            for (int o = 0; o < 3; ++o) {
                double acc = conv.bias.value()(0, o);
                for (int ky = 0; ky < 3; ++ky) {
                    for (int kx = 0; kx < 3; ++kx) {
                        const int iy = oy * 2 - 1 + ky, ix = ox * 2 - 1 + kx;
                        if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                        for (int ci = 0; ci < 2; ++ci) {
                            acc += x(iy * w + ix, ci) * wt((ky * 3 + kx) * 2 + ci, o);
                        }
                    }
                }
                EXPECT_NEAR(out.values.value()(oy * out.width + ox, o), acc, 1e-12);
            }
        }
    }
}

TEST(FeedForward, GradCheck) {
    InitRng rng(9);
    ParamSet<D> ps;
    FeedForward<D> ffn(ps, "ffn", 4, 8, rng);
    jitter(ps, rng, 0.05);
    const Tensor<D> x(rng.uniform_matrix<D>(3, 4, 1.0), true);
    std::vector<Tensor<D>> inputs{x};
    for (const auto& [name, t] : ps.items()) inputs.push_back(t);
    const GradCheckReport rep =
        finite_difference_gradcheck([&] { return project_to_scalar(ffn.forward(x), 1); }, inputs);
    EXPECT_LT(rep.max_rel_err, 1e-4) << rep.worst_entry;
}
