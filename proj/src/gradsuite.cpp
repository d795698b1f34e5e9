#include "eltrack/gradsuite.hpp"

#include <functional>

#include "eltrack/ensemble.hpp"
#include "eltrack/losses.hpp"
#include "eltrack/model.hpp"
#include "eltrack/synthetic.hpp"
#include "eltrack/temporal.hpp"
#include "eltrack/training.hpp"

namespace eltrack {

namespace {

using D = double;

// Moves every parameter off its structured initialization (zeros, ones).
void jitter(ParamSet<D>& params, InitRng& rng, double amount) {
    for (const auto& [name, t] : params.items()) {
        Tensor<D> p = t;
        p.mutable_value() += rng.uniform_matrix<D>(p.rows(), p.cols(), amount);
    }
}

std::vector<Tensor<D>> with_params(const ParamSet<D>& params, std::vector<Tensor<D>> extra) {
    for (const auto& [name, t] : params.items()) extra.push_back(t);
    return extra;
}

Tensor<D> leaf(InitRng& rng, Index rows, Index cols, double bound = 1.0) {
    return Tensor<D>(rng.uniform_matrix<D>(rows, cols, bound), true);
}

GradSuiteEntry check(const std::string& name, const std::function<Tensor<D>()>& fn, std::vector<Tensor<D>> inputs,
                     double tolerance = 1e-4, std::size_t max_entries = 0) {
    GradCheckOptions opt;
    opt.tolerance = tolerance;
    opt.max_entries_per_input = max_entries;
    return {name, tolerance, finite_difference_gradcheck(fn, inputs, opt)};
}

}  // namespace

std::vector<GradSuiteEntry> run_gradient_suite(std::uint64_t seed) {
    std::vector<GradSuiteEntry> out;
    InitRng rng(seed);
    const AttentionConfig att{8, 2, 3};

    {
        const Tensor<D> a = leaf(rng, 4, 6, 2.0);
        out.push_back(check("softmax_rows", [=] { return project_to_scalar(ops::softmax_rows(a), 11); }, {a}));
    }
    {
        ParamSet<D> ps;
        LayerNorm<D> ln(ps, "ln", 6);
        jitter(ps, rng, 0.3);
        const Tensor<D> x = leaf(rng, 3, 6);
        out.push_back(check("layer_norm", [=] { return project_to_scalar(ln.forward(x), 12); }, with_params(ps, {x})));
    }
    {
        const Tensor<D> x = leaf(rng, 3, 5);
        out.push_back(check("l2_normalize",
                            [=] { return project_to_scalar(ops::l2_normalize_rows(x), 13); }, {x}));
    }
    {
        const Tensor<D> map = leaf(rng, 5 * 4, 3);
        Mat<D> pts = rng.uniform_matrix<D>(6, 2, 0.5);
        pts.array() += 0.5;
        const Tensor<D> points(pts, true);
        out.push_back(check("bilinear_sampling",
                            [=] { return project_to_scalar(ops::bilinear_sample(map, 5, 4, points), 14); },
                            {map, points}));
    }
    {
        ParamSet<D> ps;
        Conv2d<D> conv(ps, "conv", 2, 3, 3, 2, 1, rng);
        jitter(ps, rng, 0.1);
        const Tensor<D> x = leaf(rng, 6 * 6, 2);
        out.push_back(check("conv_im2col",
                            [=] { return project_to_scalar(conv.forward(x, 6, 6).values, 15); },
                            with_params(ps, {x})));
    }
    {
        ParamSet<D> ps;
        MultiHeadAttention<D> mha(ps, "mha", att, rng);
        jitter(ps, rng, 0.1);
        const Tensor<D> q = leaf(rng, 3, 8);
        const Tensor<D> kv = leaf(rng, 5, 8);
        out.push_back(check("dense_attention",
                            [=] { return project_to_scalar(mha.forward(q, kv).output, 16); },
                            with_params(ps, {q, kv})));
    }
    {
        ParamSet<D> ps;
        DeformableCrossAttention<D> dca(ps, "dca", att, rng);
        jitter(ps, rng, 0.1);
        const Tensor<D> q = leaf(rng, 3, 8);
        Mat<D> r = rng.uniform_matrix<D>(3, 2, 0.3);
        r.array() += 0.5;
        const Tensor<D> refs(r, true);
        const Tensor<D> map = leaf(rng, 6 * 7, 8);
        out.push_back(check("deformable_attention",
                            [=] { return project_to_scalar(dca.forward(q, refs, map, 6, 7).output, 17); },
                            with_params(ps, {q, refs, map})));
    }
    {
        Mat<D> s(6, 1);
        for (Index i = 0; i < 6; ++i) s(i, 0) = 0.1 + 0.15 * i;
        const Tensor<D> scores(s, true);
        const std::vector<int> labels{1, 0, 0, 1, 0, 1};
        out.push_back(check("focal_loss",
                            [=] { return focal_loss_sum(scores, std::span<const int>(labels), 2.0, 0.25); },
                            {scores}));
    }
    {
        const BBox target = BBox::from_center(0.45, 0.55, 0.3, 0.2);
        Mat<D> b(1, 4);
        b << 0.52, 0.47, 0.27, 0.33;
        const Tensor<D> box(b, true);
        out.push_back(check("box_losses",
                            [=] { return ops::add(box_l1_loss(box, target), giou_loss(box, target)); }, {box}));
    }
    {
        ParamSet<D> ps;
        PredictionHead<D> head(ps, 8, rng);
        jitter(ps, rng, 0.1);
        const Tensor<D> e = leaf(rng, 4, 8);
        const Tensor<D> tv = leaf(rng, 1, 8);
        Mat<D> r = rng.uniform_matrix<D>(4, 2, 0.3);
        r.array() += 0.5;
        const Tensor<D> refs(r, true);
        out.push_back(check("head_networks",
                            [=] {
                                const HeadOutput<D> h = head.forward(e, ops::l2_normalize_rows(tv), refs);
                                const Tensor<D> parts[3] = {project_to_scalar(h.scores, 18),
                                                            project_to_scalar(h.boxes, 19),
                                                            project_to_scalar(h.cosine, 20)};
                                return ops::sum(ops::concat_rows<D>(parts));
                            },
                            with_params(ps, {e, tv, refs})));
    }
    {
        ParamSet<D> ps;
        TcaModel<D> tca(ps, att, 16, rng);
        jitter(ps, rng, 0.1);
        const Tensor<D> e = leaf(rng, 1, 8);
        std::vector<Tensor<D>> entries{leaf(rng, 1, 8), leaf(rng, 1, 8), leaf(rng, 1, 8)};
        out.push_back(check("tca_memory",
                            [=] {
                                QueryMemory<D> mem(5);
                                for (const auto& q : entries) mem.push(q);
                                return project_to_scalar(tca.forward(e, mem), 21);
                            },
                            with_params(ps, {e, entries[0], entries[1], entries[2]})));
        out.push_back(check("tca_cold_start",
                            [=] { return project_to_scalar(tca.forward(e, QueryMemory<D>(5)), 22); },
                            with_params(ps, {e})));
    }
    {
        ModelConfig mc;
        mc.num_trackers = 3;
        mc.memory_length = 2;
        mc.embed_dim = 8;
        mc.backbone_dim = 8;
        mc.backbone_width = 2;
        mc.heads = 2;
        mc.points = 2;
        mc.encoder_layers = 1;
        mc.decoder_layers = 1;
        mc.template_size = 32;
        mc.search_width = 64;
        mc.search_height = 48;
        mc.seed = seed;
        auto model = std::make_shared<TrackerModel<D>>(mc);
        jitter(model->params(), rng, 0.05);

        WorldConfig wc;
        wc.width = 64;
        wc.height = 48;
        wc.length = 3;
        wc.target_min_size = 12;
        wc.target_max_size = 16;
        wc.occlusion_prob = 0.0;
        wc.out_of_view_prob = 0.0;
        wc.distractors = 0;
        wc.seed = seed + 3;
        const SyntheticSequence seq = generate_sequence(wc);
        auto sample = std::make_shared<TrainingSample>();
        sample->template_frame = seq.frames[0].image;
        sample->template_box = seq.frames[0].gt.box;
        for (int t = 1; t < 3; ++t) {
            sample->frames.push_back(seq.frames[t].image);
            sample->labels.push_back(seq.frames[t].gt);
        }
        const LossWeights w;
        std::vector<Tensor<D>> inputs;
        for (const auto& [name, t] : model->params().items()) inputs.push_back(t);
        out.push_back(check("unrolled_sequence_loss",
                            [model, sample, w] { return unroll_sequence(*model, *sample, w).total; }, inputs, 1e-3,
                            4));
    }
    return out;
}

}  // namespace eltrack
