#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "asma/error.hpp"
#include "asma/nn/distill.hpp"
#include "asma/nn/encoder.hpp"
#include "asma/nn/ssl.hpp"
#include "grad_check.hpp"

namespace asma {
namespace {

using ad::Tensor;
using testing::grad_rel_error;
using testing::random_tensor;
using V = std::vector<Tensor>;

// Direct evaluation of the centered, normalized cross-correlation.
std::vector<double> naive_cross_correlation(const Tensor& z, const Tensor& z2, double eps, bool center) {
    const std::size_t N = z.dim(0), D = z.dim(1);
    auto col = [&](const Tensor& t, std::size_t j) {
        std::vector<double> c(N);
        double m = 0;
        for (std::size_t b = 0; b < N; ++b) m += (c[b] = t[b * D + j]);
        m /= static_cast<double>(N);
        if (center)
            for (auto& x : c) x -= m;
        return c;
    };
    std::vector<double> out(D * D);
    for (std::size_t i = 0; i < D; ++i)
        for (std::size_t j = 0; j < D; ++j) {
            const auto a = col(z, i), b = col(z2, j);
            double num = 0, na = 0, nb = 0;
            for (std::size_t k = 0; k < N; ++k) {
                num += a[k] * b[k];
                na += a[k] * a[k];
                nb += b[k] * b[k];
            }
            out[i * D + j] = num / (std::sqrt(na) * std::sqrt(nb) + eps);
        }
    return out;
}

TEST(CrossCorrelation, MatchesDirectEvaluation) {
    const Tensor z = Tensor::from({2, 2}, {1, 0, -1, 2});
    const Tensor z2 = Tensor::from({2, 2}, {2, 1, 0, -1});
    const Tensor c = nn::cross_correlation(z, z2);
    const auto expect = naive_cross_correlation(z, z2, 1e-12, true);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(c[i], expect[i], 1e-12);
    Rng rng(1);
    for (int rep = 0; rep < 10; ++rep) {
        const Tensor a = random_tensor({6, 5}, rng, -2, 2, false);
        const Tensor b = random_tensor({6, 5}, rng, -2, 2, false);
        for (bool center : {true, false}) {
            const Tensor got = nn::cross_correlation(a, b, 1e-12, center);
            const auto want = naive_cross_correlation(a, b, 1e-12, center);
            for (std::size_t i = 0; i < want.size(); ++i) {
                EXPECT_NEAR(got[i], want[i], 1e-12);
                EXPECT_LE(std::abs(got[i]), 1 + 1e-12);
            }
        }
    }
}

TEST(CrossCorrelation, SelfCorrelationAndDegenerateColumns) {
    Rng rng(2);
    const Tensor z = random_tensor({8, 4}, rng, -1, 1, false);
    const Tensor c = nn::cross_correlation(z, z);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(c[i * 4 + i], 1.0, 1e-6);
    const Tensor zero = nn::cross_correlation(Tensor::from({2, 1}, {1, -1}), Tensor::from({2, 1}, {1, 1}));
    EXPECT_EQ(zero[0], 0.0);
}

TEST(CrossCorrelation, InvariantToPositiveColumnScaling) {
    Rng rng(3);
    const Tensor z = random_tensor({6, 3}, rng, -1, 1, false);
    const Tensor z2 = random_tensor({6, 3}, rng, -1, 1, false);
    const Tensor s = Tensor::from({3}, {0.5, 3.0, 7.0});
    const Tensor a = nn::cross_correlation(z, z2);
    const Tensor b = nn::cross_correlation(ad::mul_along(z, s, 1), ad::mul_along(ad::add_scalar(z2, 4), s, 1));
    for (std::size_t i = 0; i < 9; ++i) EXPECT_NEAR(a[i], b[i], 1e-6);
}

TEST(CrossCorrelation, Errors) {
    try {
        nn::cross_correlation(Tensor::zeros({1, 3}), Tensor::zeros({1, 3}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::BatchTooSmall);
    }
    EXPECT_THROW(nn::cross_correlation(Tensor::zeros({4, 3}), Tensor::zeros({4, 2})), Error);
}

TEST(BarlowLoss, Examples) {
    Tensor eye = Tensor::zeros({4, 4});
    for (std::size_t i = 0; i < 4; ++i) eye[i * 5] = 1;
    EXPECT_EQ(nn::barlow_loss(eye, 2e-4).item(), 0.0);
    EXPECT_DOUBLE_EQ(nn::barlow_loss(Tensor::zeros({4, 4}), 2e-4).item(), 4.0);
    EXPECT_NEAR(nn::barlow_loss(Tensor::full({3, 3}, 1), 2e-4).item(), 1.2e-3, 1e-15);
    EXPECT_THROW(nn::barlow_loss(Tensor::zeros({2, 3}), 2e-4), Error);
    Rng rng(4);
    for (int i = 0; i < 20; ++i) EXPECT_GT(nn::barlow_loss(random_tensor({3, 3}, rng, -1, 1, false), 1e-3).item(), 0);
}

TEST(BarlowLoss, IdenticalViewsLeaveOnlyOffDiagonalEnergy) {
    Rng rng(5);
    const Tensor z = random_tensor({10, 4}, rng, -1, 1, false);
    const nn::BranchProjections p{z, z, z};
    const nn::BarlowLossConfig cfg;
    const auto loss = nn::asma_pretrain_loss(p, p, cfg);
    const Tensor c = nn::cross_correlation(z, z);
    double off = 0;
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            if (i != j) off += c[i * 4 + j] * c[i * 4 + j];
    EXPECT_NEAR(loss.total.item(), 4 * cfg.lambda * off, 1e-9);
}

TEST(AsmaLoss, TotalIsSumOfFourTerms) {
    Rng rng(6);
    auto proj = [&] { return random_tensor({6, 5}, rng, -1, 1, false); };
    const nn::BranchProjections th{proj(), proj(), proj()};
    const nn::BranchProjections ph{proj(), proj(), proj()};
    const nn::BarlowLossConfig cfg;
    const auto loss = nn::asma_pretrain_loss(th, ph, cfg);
    const double l1t = nn::barlow_pair_loss(th.anchor, th.spatial, cfg).item();
    const double l2t = nn::barlow_pair_loss(th.anchor, th.temporal, cfg).item();
    const double l1p = nn::barlow_pair_loss(ph.anchor, ph.spatial, cfg).item();
    const double l2p = nn::barlow_pair_loss(ph.anchor, ph.temporal, cfg).item();
    EXPECT_EQ(loss.theta.spatial.item(), l1t);
    EXPECT_EQ(loss.phi.temporal.item(), l2p);
    EXPECT_EQ(loss.total.item(), (l1t + l2t) + (l1p + l2p));
}

TEST(AsmaLoss, SwappingViewsPermutesTerms) {
    Rng rng(7);
    auto proj = [&] { return random_tensor({6, 3}, rng, -1, 1, false); };
    const Tensor anchor = proj(), s1 = proj(), t1 = proj(), s2 = proj(), t2 = proj();
    const nn::BarlowLossConfig cfg;
    const auto a = nn::asma_pretrain_loss({anchor, s1, t1}, {anchor, s2, t2}, cfg);
    const auto b = nn::asma_pretrain_loss({anchor, s2, t2}, {anchor, s1, t1}, cfg);
    std::vector<double> ta{a.theta.spatial.item(), a.theta.temporal.item(), a.phi.spatial.item(), a.phi.temporal.item()};
    std::vector<double> tb{b.theta.spatial.item(), b.theta.temporal.item(), b.phi.spatial.item(), b.phi.temporal.item()};
    std::sort(ta.begin(), ta.end());
    std::sort(tb.begin(), tb.end());
    EXPECT_EQ(ta, tb);
}

TEST(Gradients, CrossCorrelationAndBarlow) {
    for (bool center : {true, false}) {
        for (int k = 0; k < 20; ++k) {
            Rng rng(derive_seed(100 + center, k));
            const Tensor z = random_tensor({5, 4}, rng), z2 = random_tensor({5, 4}, rng);
            EXPECT_LT(grad_rel_error({z, z2}, [&](const V& v) {
                return nn::barlow_pair_loss(v[0], v[1], {2e-4, 1e-12, center});
            }, k), 1e-4);
        }
    }
}

TEST(Gradients, AsmaTotalLoss) {
    for (int k = 0; k < 20; ++k) {
        Rng rng(derive_seed(200, k));
        V zs;
        for (int i = 0; i < 6; ++i) zs.push_back(random_tensor({4, 3}, rng));
        EXPECT_LT(grad_rel_error(zs, [](const V& v) {
            return nn::asma_pretrain_loss({v[0], v[1], v[2]}, {v[3], v[4], v[5]}, {}).total;
        }, k), 1e-4);
    }
}

TEST(Gradients, AsmaLossThroughEncoders) {
    // Path graph of 5 joints keeps the finite-difference sweep small.
    const SkeletonGraph g(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}}, 0);
    nn::EncoderConfig ec;
    ec.num_layers = 2;
    ec.hidden_channels = 3;
    ec.temporal_kernel = 3;
    ec.embed_dim = 4;
    ec.downsample_layers = {1};
    Rng rng(300);
    nn::StgcnEncoder th(ec, g, rng), ph(ec, g, rng);
    nn::Projector pt({4, 5, 3, 2}, rng), pp({4, 5, 3, 2}, rng);
    V views;
    for (int i = 0; i < 6; ++i) views.push_back(random_tensor({4, 3, 6, 5}, rng, -1, 1, false));
    V params = th.parameters();
    for (const auto& m : {ph.parameters(), pt.parameters(), pp.parameters()}) params.insert(params.end(), m.begin(), m.end());
    auto f = [&](const V&) {
        auto z = [&](const nn::StgcnEncoder& e, const nn::Projector& p, const Tensor& x) {
            return p.forward(e.forward(x, true).pooled, true);
        };
        return nn::asma_pretrain_loss({z(th, pt, views[0]), z(th, pt, views[1]), z(th, pt, views[2])},
                                      {z(ph, pp, views[3]), z(ph, pp, views[4]), z(ph, pp, views[5])}, {})
            .total;
    };
    EXPECT_LT(grad_rel_error(params, f, 301), 1e-4);
}

// ------------------------------------------------------------------ distill

TEST(Soften, Examples) {
    const Tensor p = nn::soften(Tensor::from({1, 2}, {2, 0}), 2);
    const double e = std::exp(1.0);
    EXPECT_NEAR(p[0], e / (e + 1), 1e-12);
    EXPECT_NEAR(p[1], 1 / (e + 1), 1e-12);
    const Tensor u = nn::soften(Tensor::from({1, 3}, {5, -2, 1}), 1e6);
    for (double v : u.values()) EXPECT_NEAR(v, 1.0 / 3, 1e-4);
    const Tensor logits = Tensor::from({1, 3}, {0.3, 1.2, -0.4});
    const Tensor a = nn::soften(logits, 1), b = ad::softmax(logits, 1);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a[i], b[i]);
    EXPECT_THROW(nn::soften(logits, 0), Error);
}

TEST(Soften, PreservesArgmax) {
    Rng rng(8);
    for (int rep = 0; rep < 50; ++rep) {
        const Tensor logits = random_tensor({4, 6}, rng, -10, 10, false);
        const auto want = nn::argmax_rows(logits);
        for (double tau : {0.5, 1.0, 2.0, 8.0, 32.0}) EXPECT_EQ(nn::argmax_rows(nn::soften(logits, tau)), want);
    }
}

TEST(KdLoss, ZeroAtIdentityAndNonNegative) {
    Rng rng(9);
    const nn::DistillConfig cfg;
    const Tensor x = random_tensor({5, 4}, rng, -3, 3, false);
    EXPECT_NEAR(nn::kd_loss(x, x, cfg).item(), 0.0, 1e-9);
    for (int i = 0; i < 1000; ++i) {
        const Tensor s = random_tensor({2, 3}, rng, -5, 5, false);
        const Tensor t = random_tensor({2, 3}, rng, -5, 5, false);
        EXPECT_GE(nn::kd_loss(s, t, cfg).item(), -1e-12);
    }
}

TEST(KdLoss, TwoClassHandValue) {
    nn::DistillConfig cfg;
    cfg.tau = 1;
    const double pt0 = std::exp(2.0) / (std::exp(2.0) + 1), pt1 = 1 - pt0;
    const double kl = pt0 * std::log(pt0 / pt1) + pt1 * std::log(pt1 / pt0);
    EXPECT_NEAR(nn::kd_loss(Tensor::from({1, 2}, {0, 2}), Tensor::from({1, 2}, {2, 0}), cfg).item(), kl, 1e-12);
    cfg.tau = 2;
    cfg.scale_by_tau_sq = true;
    const double q0 = std::exp(1.0) / (std::exp(1.0) + 1), q1 = 1 - q0;
    const double kl2 = q0 * std::log(q0 / q1) + q1 * std::log(q1 / q0);
    EXPECT_NEAR(nn::kd_loss(Tensor::from({1, 2}, {0, 2}), Tensor::from({1, 2}, {2, 0}), cfg).item(), 4 * kl2, 1e-12);
}

TEST(KdLoss, TeacherShiftInvarianceAndShapes) {
    Rng rng(10);
    const nn::DistillConfig cfg;
    const Tensor s = random_tensor({3, 4}, rng, -2, 2, false);
    const Tensor t = random_tensor({3, 4}, rng, -2, 2, false);
    EXPECT_NEAR(nn::kd_loss(s, t, cfg).item(), nn::kd_loss(s, ad::add_scalar(t, 5), cfg).item(), 1e-12);
    EXPECT_THROW(nn::kd_loss(s, Tensor::zeros({3, 5}), cfg), Error);
}

TEST(KdLoss, StudentTemperatureOverride) {
    nn::DistillConfig cfg;
    cfg.tau = 4;
    cfg.student_tau = 1;
    cfg.scale_by_tau_sq = false;
    const Tensor s = Tensor::from({1, 2}, {0.5, -0.5});
    const Tensor t = Tensor::from({1, 2}, {2, 0});
    const Tensor p = nn::soften(t, 4), q = nn::soften(s, 1);
    const double kl = p[0] * std::log(p[0] / q[0]) + p[1] * std::log(p[1] / q[1]);
    EXPECT_NEAR(nn::kd_loss(s, t, cfg).item(), kl, 1e-12);
}

TEST(KdLoss, ScaledGradientStaysOrderOne) {
    Rng rng(11);
    const Tensor t = random_tensor({4, 5}, rng, -2, 2, false);
    const Tensor s0 = random_tensor({4, 5}, rng, -2, 2, false);
    std::vector<double> norms;
    for (double tau : {2.0, 8.0, 32.0}) {
        Tensor s = s0.clone();
        s.set_requires_grad(true);
        nn::DistillConfig cfg;
        cfg.tau = tau;
        {
            ad::Tape tape;
            ad::backward(nn::kd_loss(s, t, cfg));
        }
        double n = 0;
        for (double g : s.grad()) n += g * g;
        norms.push_back(std::sqrt(n));
    }
    // tau^2 cancels the 1/tau^2 of the small-logit expansion.
    for (std::size_t i = 1; i < norms.size(); ++i) {
        EXPECT_LT(norms[i] / norms[i - 1], 2.0);
        EXPECT_GT(norms[i] / norms[i - 1], 0.5);
    }
}

TEST(Cosine, Examples) {
    const Tensor a = Tensor::from({1, 2}, {1, 0});
    EXPECT_NEAR(nn::cosine_distance(a, Tensor::from({1, 2}, {3, 0})).item(), 0, 1e-12);
    EXPECT_NEAR(nn::cosine_distance(a, Tensor::from({1, 2}, {-2, 0})).item(), 2, 1e-12);
    EXPECT_NEAR(nn::cosine_distance(a, Tensor::from({1, 2}, {0, 5})).item(), 1, 1e-12);
    try {
        nn::cosine_distance(a, Tensor::zeros({1, 2}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ZeroVector);
    }
}

TEST(FeatureDistill, ZeroAtPerfectAlignment) {
    Rng rng(12);
    nn::FeatureDistill fd(6, 4, rng);
    fd.proj.bias = random_tensor({4}, rng, -1, 1, true);
    const Tensor ht = random_tensor({5, 6}, rng, -1, 1, false);
    const Tensor hs = fd.proj.forward(ht).clone();
    EXPECT_NEAR(fd.loss(hs, ht).item(), 0.0, 1e-9);
}

TEST(Gradients, KdAndCosine) {
    for (int k = 0; k < 20; ++k) {
        Rng rng(derive_seed(400, k));
        const Tensor s = random_tensor({3, 4}, rng, -2, 2);
        const Tensor t = random_tensor({3, 4}, rng, -2, 2, false);
        nn::DistillConfig cfg;
        cfg.tau = 0.5 + 4 * rng.uniform();
        EXPECT_LT(grad_rel_error({s}, [&](const V& v) { return nn::kd_loss(v[0], t, cfg); }, k), 1e-4);
        const Tensor a = random_tensor({3, 5}, rng, -2, 2), b = random_tensor({3, 5}, rng, -2, 2);
        EXPECT_LT(grad_rel_error({a, b}, [](const V& v) { return nn::cosine_distance(v[0], v[1]); }, k), 1e-4);
        nn::FeatureDistill fd(5, 5, rng);
        EXPECT_LT(grad_rel_error({a, b, fd.proj.weight, fd.proj.bias}, [&](const V&) { return fd.loss(a, b); }, k),
                  1e-4);
    }
}

}  // namespace
}  // namespace asma
