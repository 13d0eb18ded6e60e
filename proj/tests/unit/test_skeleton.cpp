#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "asma/augment.hpp"
#include "asma/dataset.hpp"
#include "asma/error.hpp"
#include "asma/skeleton.hpp"
#include "asma/synthetic.hpp"

namespace asma {
namespace {

SkeletonSequence ramp(std::size_t T, const GraphPtr& g) {
    SkeletonSequence x(3, T, g);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t v = 0; v < x.joints(); ++v) x.at(c, t, v) = static_cast<real>(c * 100 + t * 10 + v * 0.5);
    return x;
}

TEST(Graph, NtuTopology) {
    const auto g = build_ntu_graph();
    EXPECT_EQ(g->num_joints(), 25u);
    EXPECT_EQ(g->edges().size(), 24u);
    std::size_t sum = 0;
    for (auto d : g->degrees()) sum += d;
    EXPECT_EQ(sum, 48u);
    EXPECT_EQ(g->degree(20), 4u);  // spine shoulder
    EXPECT_EQ(g->degree(0), 3u);   // spine base
    EXPECT_EQ(g->degree(3), 1u);   // head
    EXPECT_FALSE(g->parent(0).has_value());
    EXPECT_EQ(g->parent(1), 0u);
    EXPECT_EQ(g->center(), 20u);
    EXPECT_FALSE(g->mirror_pairs().empty());
}

TEST(Graph, RejectsBadEdges) {
    EXPECT_THROW(SkeletonGraph(3, {{0, 3}}), Error);
    EXPECT_THROW(SkeletonGraph(3, {{1, 1}}), Error);
    EXPECT_THROW(SkeletonGraph(0, {}), Error);
    const SkeletonGraph iso(3, {});
    for (auto d : iso.degrees()) EXPECT_EQ(d, 0u);
}

TEST(Graph, HopDistancesAndParents) {
    const SkeletonGraph g(4, {{0, 1}, {1, 2}}, 0);
    const auto h = g.hop_distances();
    EXPECT_EQ(h[0 * 4 + 2], 2u);
    EXPECT_EQ(h[0 * 4 + 3], 4u);  // unreachable
    EXPECT_EQ(g.parent(2), 1u);
    EXPECT_FALSE(g.parent(3).has_value());
}

TEST(Sequence, ShapeChecks) {
    const auto g = build_ntu_graph();
    EXPECT_THROW(SkeletonSequence(3, 1, g), Error);
    EXPECT_THROW(SkeletonSequence(3, 4, g, std::vector<real>(10)), Error);
    SkeletonSequence x(3, 4, g);
    EXPECT_EQ(x.size(), 300u);
    EXPECT_TRUE(x.all_finite());
    x.at(1, 2, 3) = std::numeric_limits<real>::quiet_NaN();
    EXPECT_FALSE(x.all_finite());
}

TEST(Streams, JointBoneMotion) {
    const auto g = build_ntu_graph();
    const auto x = ramp(5, g);
    EXPECT_TRUE(derive_stream(x, Stream::Joint) == x);
    const auto bone = derive_stream(x, Stream::Bone);
    for (std::size_t v = 0; v < 25; ++v) {
        const auto p = g->parent(v);
        const double want = p ? x.at(1, 2, v) - x.at(1, 2, *p) : 0.0;
        EXPECT_FLOAT_EQ(bone.at(1, 2, v), want);
    }
    const auto motion = derive_stream(x, Stream::Motion);
    EXPECT_FLOAT_EQ(motion.at(0, 0, 7), 10);
    EXPECT_EQ(motion.at(2, 4, 7), 0);
    EXPECT_EQ(parse_stream(stream_name(Stream::Bone)), Stream::Bone);
    EXPECT_THROW(parse_stream("3s"), Error);
}

TEST(Streams, BoneNeedsParents) {
    auto g = std::make_shared<const SkeletonGraph>(3, std::vector<SkeletonGraph::Edge>{{0, 1}});
    try {
        derive_stream(SkeletonSequence(3, 2, g), Stream::Bone);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MissingParents);
    }
}

TEST(Streams, ResampleKeepsEndpoints) {
    const auto g = build_ntu_graph();
    const auto x = ramp(5, g);
    const auto y = resample_frames(x, 9);
    EXPECT_EQ(y.frames(), 9u);
    EXPECT_FLOAT_EQ(y.at(0, 0, 3), x.at(0, 0, 3));
    EXPECT_FLOAT_EQ(y.at(0, 8, 3), x.at(0, 4, 3));
    EXPECT_FLOAT_EQ(y.at(0, 1, 3), 0.5f * (x.at(0, 0, 3) + x.at(0, 1, 3)));
}

TEST(Augment, IdentityAndDeterminism) {
    const auto g = build_ntu_graph();
    const auto x = ramp(8, g);
    Rng a(5), b(5), c(5);
    const auto y = augment(x, AugmentationSpec::identity(), a);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y.data()[i], x.data()[i], 1e-4);
    EXPECT_TRUE(augment(x, AugmentationSpec{}, b) == augment(x, AugmentationSpec{}, c));
    EXPECT_FALSE(augment(x, AugmentationSpec{}, b) == x);
}

TEST(Augment, RotationPreservesNorms) {
    const auto g = build_ntu_graph();
    const auto x = ramp(4, g);
    const auto r = rotate(x, 10, -7, 15);
    for (std::size_t t = 0; t < 4; ++t)
        for (std::size_t v = 0; v < 25; ++v) {
            double n0 = 0, n1 = 0;
            for (std::size_t c = 0; c < 3; ++c) {
                n0 += x.at(c, t, v) * x.at(c, t, v);
                n1 += r.at(c, t, v) * r.at(c, t, v);
            }
            EXPECT_NEAR(std::sqrt(n1), std::sqrt(n0), 1e-3);
        }
}

TEST(Augment, MirrorIsAnInvolution) {
    const auto g = build_ntu_graph();
    const auto x = ramp(3, g);
    const auto m = mirror(x);
    EXPECT_FLOAT_EQ(m.at(0, 0, 0), -x.at(0, 0, 0));
    const auto mm = mirror(m);
    EXPECT_TRUE(mm == x);
}

TEST(Augment, SpecValidation) {
    EXPECT_THROW((AugmentationSpec{0.0, 1.0, 0, 0}.validate()), Error);
    EXPECT_THROW((AugmentationSpec{0.8, 0.5, 0, 0}.validate()), Error);
    EXPECT_THROW((AugmentationSpec{0.5, 1.0, 0, 1.5}.validate()), Error);
    EXPECT_NO_THROW(AugmentationSpec{}.validate());
}

TEST(Synthetic, DeterministicAndLabelled) {
    const auto g = build_ntu_graph();
    const auto a = generate_synthetic(4, 5, 16, g, 3);
    const auto b = generate_synthetic(4, 5, 16, g, 3);
    const auto c = generate_synthetic(4, 5, 16, g, 4);
    ASSERT_EQ(a.size(), 20u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_TRUE(a[i] == b[i]);
        EXPECT_EQ(a[i].label(), static_cast<int>(i / 5));
        EXPECT_TRUE(a[i].all_finite());
    }
    EXPECT_FALSE(a[0] == c[0]);
    EXPECT_THROW(generate_synthetic(1, 5, 16, g, 3), Error);
    EXPECT_THROW(generate_synthetic(4, 5, 4, g, 3), Error);
}

TEST(Synthetic, LimbRootsAreDistinct) {
    const auto g = build_ntu_graph();
    const auto roots = limb_roots(*g);
    EXPECT_GE(roots.size(), 4u);
    EXPECT_EQ(std::set<std::size_t>(roots.begin(), roots.end()).size(), roots.size());
}

TEST(Synthetic, NearestCentroidSeparatesClasses) {
    const auto g = build_ntu_graph();
    Dataset d{generate_synthetic(4, 50, 32, g, 1)};
    const auto split = split_dataset(d);
    const std::size_t F = d.items[0].size();
    std::vector<std::vector<double>> centroid(4, std::vector<double>(F, 0.0));
    std::vector<double> count(4, 0);
    for (const auto& s : split.train.items) {
        const int y = *s.label();
        for (std::size_t i = 0; i < F; ++i) centroid[y][i] += s.data()[i];
        count[y] += 1;
    }
    for (int y = 0; y < 4; ++y)
        for (auto& v : centroid[y]) v /= count[y];
    std::size_t right = 0;
    for (const auto& s : split.test.items) {
        int best = 0;
        double best_d = 1e300;
        for (int y = 0; y < 4; ++y) {
            double dist = 0;
            for (std::size_t i = 0; i < F; ++i) dist += (s.data()[i] - centroid[y][i]) * (s.data()[i] - centroid[y][i]);
            if (dist < best_d) best_d = dist, best = y;
        }
        right += best == *s.label();
    }
    EXPECT_GE(static_cast<double>(right) / split.test.size(), 0.95);
}

}  // namespace
}  // namespace asma
