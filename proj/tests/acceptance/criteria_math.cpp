#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "asma/masking.hpp"
#include "asma/nn/align.hpp"
#include "asma/nn/distill.hpp"
#include "asma/nn/encoder.hpp"
#include "asma/nn/ssl.hpp"
#include "criteria.hpp"
#include "grad_check.hpp"

namespace acceptance {
namespace {

using namespace asma;
using ad::Tensor;
using testing::grad_rel_error;
using testing::random_tensor;
using testing::signed_tensor;
using V = std::vector<Tensor>;

// NTU bone list, 1-based as published with the dataset.
const std::pair<int, int> kNtuBones1[] = {
    {1, 2},   {2, 21},  {3, 21},  {4, 3},   {5, 21},  {6, 5},   {7, 6},   {8, 7},
    {9, 21},  {10, 9},  {11, 10}, {12, 11}, {13, 1},  {14, 13}, {15, 14}, {16, 15},
    {17, 1},  {18, 17}, {19, 18}, {20, 19}, {22, 23}, {23, 8},  {24, 25}, {25, 12}};

std::string fmt(const char* f, double a, double b = 0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

}  // namespace

Verdict masking_math() {
    const auto g = build_ntu_graph();
    std::vector<double> deg(25, 0.0);
    for (auto [a, b] : kNtuBones1) {
        deg[a - 1] += 1;
        deg[b - 1] += 1;
    }
    double total = 0;
    for (double d : deg) total += d;
    const auto hi = joint_mask_distribution(*g, DegreeWeighting::HighDegree);
    const auto lo = joint_mask_distribution(*g, DegreeWeighting::LowDegree);
    double dist_err = 0;
    for (std::size_t v = 0; v < 25; ++v) {
        const double p = deg[v] / total;
        dist_err = std::max(dist_err, std::abs(hi.probs[v] - p));
        dist_err = std::max(dist_err, std::abs(lo.probs[v] - (1 - p) / (25 - 1)));
    }

    Rng rng(2024);
    double motion_rel = 0;
    for (int n = 0; n < 100; ++n) {
        const std::size_t T = 2 + rng.below(60);
        SkeletonSequence x(3, T, g);
        const double amp = std::pow(10.0, rng.uniform(-2, 2));
        for (auto& v : x.data()) v = amp * rng.uniform(-1, 1);
        const auto a = motion_scores(x);
        std::vector<double> want(T);
        for (std::size_t t = 0; t + 1 < T; ++t) {
            double s = 0;
            for (std::size_t c = 0; c < 3; ++c)
                for (std::size_t v = 0; v < 25; ++v) s += std::abs(x.at(c, t + 1, v) - x.at(c, t, v));
            want[t] = s / (3 * 25);
        }
        want[T - 1] = want[T - 2];
        for (std::size_t t = 0; t < T; ++t)
            motion_rel = std::max(motion_rel, std::abs(a[t] - want[t]) / std::max(std::abs(want[t]), 1e-300));
    }
    return {dist_err <= 1e-12 && motion_rel <= 1e-9,
            fmt("distribution max abs err %.3g (tol 1e-12), motion max rel err %.3g (tol 1e-9)", dist_err, motion_rel)};
}

Verdict sampling_fidelity() {
    const auto g = build_ntu_graph();
    constexpr int kTrials = 100000;
    double freq_err = 0;
    for (auto mode : {DegreeWeighting::HighDegree, DegreeWeighting::LowDegree}) {
        const auto dist = joint_mask_distribution(*g, mode);
        std::vector<double> freq(25, 0.0);
        Rng rng(mode == DegreeWeighting::HighDegree ? 11 : 12);
        for (int i = 0; i < kTrials; ++i) freq[sample_masked_joints(dist, 1, rng)[0]] += 1.0 / kTrials;
        for (std::size_t v = 0; v < 25; ++v) freq_err = std::max(freq_err, std::abs(freq[v] - dist.probs[v]));
    }

    // Path 0-1-2-3; every ordered draw sequence enumerated for n = 2 and 3.
    const SkeletonGraph path(4, {{0, 1}, {1, 2}, {2, 3}});
    double worst_tv = 0;
    for (auto mode : {DegreeWeighting::HighDegree, DegreeWeighting::LowDegree}) {
        const auto dist = joint_mask_distribution(path, mode);
        for (std::size_t n : {2u, 3u}) {
            std::map<std::vector<std::size_t>, double> exact;
            std::vector<std::size_t> perm{0, 1, 2, 3};
            do {
                double p = 1, left = 1;
                for (std::size_t i = 0; i < n; ++i) {
                    p *= dist.probs[perm[i]] / left;
                    left -= dist.probs[perm[i]];
                }
                std::vector<std::size_t> subset(perm.begin(), perm.begin() + n);
                std::sort(subset.begin(), subset.end());
                // Each prefix appears (4 - n)! times across the permutations.
                exact[subset] += p / (n == 2 ? 2 : 1);
            } while (std::next_permutation(perm.begin(), perm.end()));
            std::map<std::vector<std::size_t>, double> seen;
            Rng rng(derive_seed(31, n, mode == DegreeWeighting::HighDegree));
            for (int i = 0; i < kTrials; ++i) seen[sample_masked_joints(dist, n, rng)] += 1.0 / kTrials;
            double tv = 0;
            for (const auto& [k, p] : exact) tv += std::abs(p - seen[k]);
            for (const auto& [k, p] : seen)
                if (!exact.count(k)) tv += p;
            worst_tv = std::max(worst_tv, tv / 2);
        }
    }
    return {freq_err <= 0.01 && worst_tv < 0.01,
            fmt("max single-draw freq err %.4f (tol 0.01), max TV %.4f (tol 0.01)", freq_err, worst_tv)};
}

Verdict loss_optima() {
    Rng rng(5);
    std::vector<real> eye(64 * 64, 0.0);
    for (std::size_t i = 0; i < 64; ++i) eye[i * 64 + i] = 1;
    const double barlow = nn::barlow_loss(Tensor::from({64, 64}, eye), 2e-4).item();

    double kd = 0;
    for (double tau : {0.5, 1.0, 2.0, 8.0, 32.0}) {
        nn::DistillConfig cfg;
        cfg.tau = tau;
        const Tensor x = random_tensor({16, 10}, rng, -5, 5, false);
        kd = std::max(kd, std::abs(nn::kd_loss(x, x, cfg).item()));
    }

    nn::FeatureDistill fd(32, 16, rng);
    const Tensor ht = random_tensor({8, 32}, rng, -1, 1, false);
    Tensor hs;
    {
        ad::NoGradGuard g;
        hs = fd.proj.forward(ht).clone();
    }
    const double feat = std::abs(fd.loss(hs, ht).item());
    return {barlow == 0.0 && kd <= 1e-9 && feat <= 1e-9,
            fmt("barlow(I) = %.3g (exact 0), max |kd(x,x)| = %.3g", barlow, kd) + fmt(", feature = %.3g (tol 1e-9)", feat)};
}

Verdict gradient_integrity() {
    using Make = std::function<V(Rng&)>;
    struct Case {
        std::string name;
        Make make;
        testing::Fn f;
    };
    auto t = [](ad::Shape s) { return [s](Rng& r) { return V{random_tensor(s, r)}; }; };
    auto tt = [](ad::Shape a, ad::Shape b) { return [a, b](Rng& r) { return V{random_tensor(a, r), random_tensor(b, r)}; }; };

    std::vector<Case> cases = {
        {"add", tt({3, 4}, {3, 4}), [](const V& v) { return ad::add(v[0], v[1]); }},
        {"sub", tt({3, 4}, {3, 4}), [](const V& v) { return ad::sub(v[0], v[1]); }},
        {"mul", tt({3, 4}, {3, 4}), [](const V& v) { return ad::mul(v[0], v[1]); }},
        {"div", [](Rng& r) { return V{random_tensor({3, 4}, r), signed_tensor({3, 4}, r, 0.5, 2)}; },
         [](const V& v) { return ad::div(v[0], v[1]); }},
        {"scale", t({5, 3}), [](const V& v) { return ad::scale(v[0], -1.7); }},
        {"add_scalar", t({5, 3}), [](const V& v) { return ad::add_scalar(v[0], 0.3); }},
        {"relu", [](Rng& r) { return V{signed_tensor({5, 3}, r, 0.05, 1)}; }, [](const V& v) { return ad::relu(v[0]); }},
        {"exp", t({5, 3}), [](const V& v) { return ad::exp(v[0]); }},
        {"log", [](Rng& r) { return V{random_tensor({5, 3}, r, 0.2, 3)}; }, [](const V& v) { return ad::log(v[0]); }},
        {"sqrt", [](Rng& r) { return V{random_tensor({5, 3}, r, 0.2, 3)}; }, [](const V& v) { return ad::sqrt(v[0]); }},
        {"matmul", tt({3, 5}, {5, 2}), [](const V& v) { return ad::matmul(v[0], v[1]); }},
        {"batched_matmul", tt({2, 3, 4}, {2, 4, 3}), [](const V& v) { return ad::batched_matmul(v[0], v[1]); }},
        {"transpose", t({2, 3, 4}), [](const V& v) { return ad::transpose(v[0], 0, 2); }},
        {"reshape", t({2, 3, 4}), [](const V& v) { return ad::reshape(v[0], {6, 4}); }},
        {"concat", tt({2, 3}, {2, 5}), [](const V& v) { return ad::concat({v[0], v[1]}, 1); }},
        {"slice", t({2, 3, 4}), [](const V& v) { return ad::slice(v[0], 2, 1, 3); }},
        {"sum", t({3, 4, 2}), [](const V& v) { return ad::sum(v[0], {1}); }},
        {"mean", t({3, 4, 2}), [](const V& v) { return ad::mean(v[0], {0, 2}); }},
        {"sum_all", t({3, 4, 2}), [](const V& v) { return ad::sum_all(v[0]); }},
        {"mean_all", t({3, 4, 2}), [](const V& v) { return ad::mean_all(v[0]); }},
        {"softmax", t({3, 4, 2}), [](const V& v) { return ad::softmax(v[0], 1); }},
        {"log_softmax", t({3, 4, 2}), [](const V& v) { return ad::log_softmax(v[0], 2); }},
        {"add_bias", tt({2, 3, 4}, {3}), [](const V& v) { return ad::add_bias(v[0], v[1], 1); }},
        {"mul_along", tt({2, 3, 4}, {4}), [](const V& v) { return ad::mul_along(v[0], v[1], 2); }},
        {"batch_norm_train",
         [](Rng& r) { return V{random_tensor({4, 3, 5}, r, -2, 2), random_tensor({3}, r, 0.5, 1.5), random_tensor({3}, r)}; },
         [](const V& v) {
             ad::BatchNormState st(3);
             return ad::batch_norm(v[0], v[1], v[2], st, true);
         }},
        {"batch_norm_eval",
         [](Rng& r) { return V{random_tensor({4, 3, 5}, r, -2, 2), random_tensor({3}, r, 0.5, 1.5), random_tensor({3}, r)}; },
         [](const V& v) {
             ad::BatchNormState st(3);
             st.running_mean = {0.1, -0.2, 0.3};
             st.running_var = {0.5, 1.5, 2.0};
             return ad::batch_norm(v[0], v[1], v[2], st, false);
         }},
        {"conv_temporal", tt({2, 3, 7, 4}, {2, 3, 3}), [](const V& v) { return ad::conv_temporal(v[0], v[1], 1, 1); }},
        {"conv_temporal_stride2", tt({2, 2, 9, 3}, {3, 2, 5}),
         [](const V& v) { return ad::conv_temporal(v[0], v[1], 2, 2); }},
        {"graph_conv", tt({2, 3, 4, 5}, {5, 5}), [](const V& v) { return ad::graph_conv(v[0], v[1]); }},
        {"cross_entropy", t({4, 5}), [](const V& v) { return nn::cross_entropy(v[0], {0, 3, 1, 4}); }},
        {"attention", [](Rng& r) { return V{random_tensor({2, 3, 4}, r), random_tensor({2, 5, 4}, r), random_tensor({2, 5, 2}, r)}; },
         [](const V& v) { return nn::scaled_dot_attention(v[0], v[1], v[2]); }},
        {"barlow_pair", tt({6, 4}, {6, 4}), [](const V& v) { return nn::barlow_pair_loss(v[0], v[1], {}); }},
        {"barlow_pair_uncentered", tt({6, 4}, {6, 4}),
         [](const V& v) { return nn::barlow_pair_loss(v[0], v[1], {2e-4, 1e-12, false}); }},
        {"asma_total",
         [](Rng& r) {
             V z;
             for (int i = 0; i < 6; ++i) z.push_back(random_tensor({5, 3}, r));
             return z;
         },
         [](const V& v) { return nn::asma_pretrain_loss({v[0], v[1], v[2]}, {v[3], v[4], v[5]}, {}).total; }},
        {"kd_loss",
         [](Rng& r) { return V{random_tensor({3, 4}, r, -2, 2), random_tensor({3, 4}, r, -2, 2, false)}; },
         [](const V& v) {
             nn::DistillConfig cfg;
             cfg.tau = 0.5 + 4 * std::abs(v[1][0]);
             return nn::kd_loss(v[0], v[1], cfg);
         }},
        {"cosine_distance", tt({3, 5}, {3, 5}), [](const V& v) { return nn::cosine_distance(v[0], v[1]); }},
    };

    std::ostringstream worst;
    double max_err = 0;
    std::string max_name;
    std::size_t checked = 0;
    for (const auto& c : cases) {
        for (std::uint64_t k = 0; k < 20; ++k) {
            Rng rng(derive_seed(0xC4, checked, k));
            const double e = grad_rel_error(c.make(rng), c.f, derive_seed(0xC5, checked, k));
            if (!(e <= max_err)) max_err = e, max_name = c.name;
        }
        ++checked;
    }

    // Composed through modules: align head, projector and the pretraining
    // loss through two tiny encoders.
    const SkeletonGraph g(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}}, 0);
    nn::EncoderConfig ec;
    ec.num_layers = 2;
    ec.hidden_channels = 3;
    ec.temporal_kernel = 3;
    ec.embed_dim = 4;
    ec.downsample_layers = {1};
    for (std::uint64_t k = 0; k < 20; ++k) {
        Rng rng(derive_seed(0xC6, k));
        nn::AlignHead head({2, 4, 3, k % 2 == 1}, rng);
        const Tensor a = random_tensor({2, 3, 4}, rng), b = random_tensor({2, 3, 4}, rng);
        V params = head.parameters();
        params.push_back(a);
        params.push_back(b);
        double e = grad_rel_error(params, [&](const V&) { return head.forward(a, b); }, k);
        if (!(e <= max_err)) max_err = e, max_name = "align_head";

        nn::StgcnEncoder th(ec, g, rng), ph(ec, g, rng);
        nn::Projector pt({4, 5, 3, 2}, rng), pp({4, 5, 3, 2}, rng);
        V views;
        for (int i = 0; i < 6; ++i) views.push_back(random_tensor({4, 3, 6, 5}, rng, -1, 1, false));
        V ps = th.parameters();
        for (const auto& m : {ph.parameters(), pt.parameters(), pp.parameters()}) ps.insert(ps.end(), m.begin(), m.end());
        auto f = [&](const V&) {
            auto z = [&](const nn::StgcnEncoder& enc, const nn::Projector& p, const Tensor& x) {
                return p.forward(enc.forward(x, true).pooled, true);
            };
            return nn::asma_pretrain_loss({z(th, pt, views[0]), z(th, pt, views[1]), z(th, pt, views[2])},
                                          {z(ph, pp, views[3]), z(ph, pp, views[4]), z(ph, pp, views[5])}, {})
                .total;
        };
        e = grad_rel_error(ps, f, k);
        if (!(e <= max_err)) max_err = e, max_name = "asma_total_through_encoders";

        nn::FeatureDistill fd(5, 4, rng);
        const Tensor hs = random_tensor({3, 4}, rng), ht = random_tensor({3, 5}, rng);
        e = grad_rel_error({hs, ht, fd.proj.weight, fd.proj.bias}, [&](const V&) { return fd.loss(hs, ht); }, k);
        if (!(e <= max_err)) max_err = e, max_name = "feature_distill";
    }
    checked += 3;
    return {max_err < 1e-4, fmt("%.0f checks x 20 instances, worst rel err %.3g (tol 1e-4)", double(checked), max_err) +
                                " at " + max_name};
}

}  // namespace acceptance
