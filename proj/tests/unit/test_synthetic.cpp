#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "eltrack/errors.hpp"
#include "eltrack/synthetic.hpp"

using namespace eltrack;
namespace fs = std::filesystem;

namespace {

WorldConfig small_world(std::uint64_t seed) {
    WorldConfig w;
    w.width = 160;
    w.height = 120;
    w.length = 30;
    w.target_min_size = 16;
    w.target_max_size = 28;
    w.seed = seed;
    return w;
}

bool near_color(const Rgb& a, const Rgb& b, int tol) {
    for (int k = 0; k < 3; ++k)
        if (std::abs(int(a[k]) - int(b[k])) > tol) return false;
    return true;
}

}  // namespace

TEST(Synthetic, SameSeedBitIdentical) {
    const WorldConfig w = small_world(5);
    const SyntheticSequence a = generate_sequence(w), b = generate_sequence(w);
    ASSERT_EQ(a.frames.size(), b.frames.size());
    for (std::size_t i = 0; i < a.frames.size(); ++i) {
        EXPECT_TRUE(a.frames[i].image == b.frames[i].image);
        EXPECT_EQ(a.frames[i].gt.pixels, b.frames[i].gt.pixels);
        EXPECT_EQ(a.frames[i].gt.present, b.frames[i].gt.present);
    }
    const SyntheticSequence c = generate_sequence(small_world(6));
    EXPECT_FALSE(a.frames[0].image == c.frames[0].image);
}

TEST(Synthetic, NoEventsMeansAlwaysPresent) {
    WorldConfig w = small_world(7);
    w.occlusion_prob = 0.0;
    w.out_of_view_prob = 0.0;
    const SequencePlan p = plan_sequence(w);
    EXPECT_TRUE(p.events.empty());
    for (const auto& g : p.labels) EXPECT_TRUE(g.present);
}

TEST(Synthetic, ScriptedEventReappearsDisplaced) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        WorldConfig w = small_world(seed);
        w.occlusion_prob = 0.0;
        w.out_of_view_prob = 0.0;
        w.scripted_event_frame = 10;
        w.scripted_event_length = 4;
        const SequencePlan p = plan_sequence(w);
        ASSERT_EQ(p.events.size(), 1u);
        for (int t = 10; t < 14; ++t) EXPECT_FALSE(p.labels[t].present) << t;
        ASSERT_TRUE(p.labels[9].present);
        ASSERT_TRUE(p.labels[14].present);
        const Point2 before = p.labels[9].center(), after = p.labels[14].center();
        EXPECT_GE(std::hypot(before.x - after.x, before.y - after.y), w.min_displacement - 1e-6);
    }
}

TEST(Synthetic, RandomEventsRespectInvariants) {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        WorldConfig w = small_world(100 + seed);
        w.length = 60;
        w.occlusion_prob = 0.05;
        w.out_of_view_prob = 0.05;
        const SequencePlan p = plan_sequence(w);
        EXPECT_TRUE(p.labels.front().present);
        EXPECT_TRUE(p.labels.back().present);
        for (const auto& ev : p.events) {
            EXPECT_GE(ev.length, w.absent_min);
            EXPECT_LE(ev.length, w.absent_max);
            ASSERT_LT(ev.start + ev.length, w.length);
            for (int t = ev.start; t < ev.start + ev.length; ++t) EXPECT_FALSE(p.labels[t].present);
            EXPECT_TRUE(p.labels[ev.start + ev.length].present);
            EXPECT_TRUE(p.labels[ev.start - 1].present);
        }
        for (const auto& g : p.labels) {
            if (!g.present) continue;
            EXPECT_GE(g.pixels.x0, 0.0);
            EXPECT_GE(g.pixels.y0, 0.0);
            EXPECT_LE(g.pixels.x0 + g.pixels.w, w.width + 1e-6);
            EXPECT_LE(g.pixels.y0 + g.pixels.h, w.height + 1e-6);
        }
        for (const auto& s : p.states) {
            for (const auto& d : s.distractors) EXPECT_FALSE(d.cx == s.target.cx && d.cy == s.target.cy);
        }
    }
}

TEST(Synthetic, LabelsAreQuantized) {
    const SequencePlan p = plan_sequence(small_world(8));
    for (const auto& g : p.labels) {
        if (!g.present) continue;
        EXPECT_EQ(g.pixels.x0, quantize6(g.pixels.x0));
        EXPECT_EQ(g.pixels.w, quantize6(g.pixels.w));
    }
    EXPECT_EQ(quantize6(1.23456749), 1.234567);
}

TEST(Synthetic, RejectsImpossibleConfig) {
    WorldConfig w = small_world(1);
    w.target_max_size = 200;
    EXPECT_THROW(plan_sequence(w), ValidationError);
    w = small_world(1);
    w.scripted_event_frame = 28;
    w.scripted_event_length = 4;
    EXPECT_THROW(plan_sequence(w), ValidationError);
}

TEST(Render, TargetColorInsideBoxAndDimensions) {
    WorldConfig w = small_world(9);
    w.distractors = 0;
    w.texture_noise = 0.0;
    const SequencePlan p = plan_sequence(w);
    const SceneState& s = p.states[0];
    const Image img = render_frame(w, s);
    EXPECT_EQ(img.width, 160);
    EXPECT_EQ(img.height, 120);
    const int cx = static_cast<int>(s.target.cx), cy = static_cast<int>(s.target.cy);
    EXPECT_TRUE(near_color(img.get(cx, cy), s.target.color, 0));
    // A pixel far from the target is background grey.
    const int fx = s.target.cx < 80 ? 155 : 4, fy = s.target.cy < 60 ? 115 : 4;
    const Rgb bg = img.get(fx, fy);
    EXPECT_EQ(bg[0], bg[1]);
    EXPECT_EQ(bg[1], bg[2]);
}

TEST(Render, OccluderCoversTarget) {
    WorldConfig w = small_world(10);
    w.distractors = 0;
    w.texture_noise = 0.0;
    w.occlusion_prob = 1.0;
    w.out_of_view_prob = 0.0;
    const SequencePlan p = plan_sequence(w);
    bool seen = false;
    for (const auto& s : p.states) {
        if (!s.occluded) continue;
        seen = true;
        const Image img = render_frame(w, s);
        for (int dy = -3; dy <= 3; ++dy)
            for (int dx = -3; dx <= 3; ++dx) {
                const Rgb c = img.get(static_cast<int>(s.target.cx) + dx, static_cast<int>(s.target.cy) + dy);
                EXPECT_TRUE(near_color(c, {90, 90, 90}, 0));
            }
    }
    EXPECT_TRUE(seen);
}

TEST(Dataset, WriteReadRoundTrip) {
    const fs::path root = fs::temp_directory_path() / "eltrack_synth_rt";
    fs::remove_all(root);
    WorldConfig w = small_world(11);
    w.length = 6;
    w.scripted_event_frame = 2;
    w.scripted_event_length = 2;
    const SyntheticSequence seq = generate_sequence(w, "seq000");
    write_sequence(root, seq);
    EXPECT_EQ(list_sequences(root), std::vector<std::string>{"seq000"});
    EXPECT_EQ(count_frames(root / "seq000"), 6);
    const Image back = read_ppm(frame_path(root / "seq000", 3));
    EXPECT_TRUE(back == seq.frames[3].image);
    const auto labels = read_annotations(root / "seq000" / "groundtruth.txt", w.width, w.height);
    ASSERT_EQ(labels.size(), 6u);
    for (std::size_t i = 0; i < 6; ++i) {
        EXPECT_EQ(labels[i].present, seq.frames[i].gt.present);
        if (labels[i].present) {
            EXPECT_EQ(labels[i].pixels, seq.frames[i].gt.pixels);
            EXPECT_EQ(labels[i].box, seq.frames[i].gt.box);
        }
    }
    fs::remove_all(root);
}

TEST(Dataset, MissingDirectoryThrows) {
    EXPECT_THROW(list_sequences("/nonexistent/eltrack"), IoError);
    EXPECT_THROW(read_annotations("/nonexistent/gt.txt", 10, 10), IoError);
}

TEST(SequenceSeed, DistinctPerIndex) {
    EXPECT_NE(sequence_seed(1, 0), sequence_seed(1, 1));
    EXPECT_NE(sequence_seed(1, 0), sequence_seed(2, 0));
    EXPECT_EQ(sequence_seed(3, 4), sequence_seed(3, 4));
}
