#include "asma/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "asma/error.hpp"

ASMA_NAMESPACE_BEGIN

JointMaskDistribution joint_mask_distribution(const SkeletonGraph& graph, DegreeWeighting mode) {
    const std::size_t V = graph.num_joints();
    JointMaskDistribution dist;
    dist.mode = mode;
    dist.probs.assign(V, 0.0);
    if (mode == DegreeWeighting::Uniform) {
        std::fill(dist.probs.begin(), dist.probs.end(), 1.0 / static_cast<double>(V));
        return dist;
    }
    double total = 0.0;
    for (auto d : graph.degrees()) total += static_cast<double>(d);
    if (total <= 0.0) throw Error(ErrorCode::DegenerateGraph, "all joint degrees are zero");
    for (std::size_t v = 0; v < V; ++v) dist.probs[v] = static_cast<double>(graph.degree(v)) / total;
    if (mode == DegreeWeighting::LowDegree) {
        // 1 - p sums to V - 1; renormalize so it is a distribution.
        double sum = 0.0;
        for (auto& p : dist.probs) {
            p = 1.0 - p;
            sum += p;
        }
        if (sum <= 0.0) throw Error(ErrorCode::DegenerateGraph, "single-joint graph has no low-degree mass");
        for (auto& p : dist.probs) p /= sum;
    }
    return dist;
}

std::vector<std::size_t> sample_masked_joints(const JointMaskDistribution& dist, std::size_t n, Rng& rng) {
    const std::size_t V = dist.probs.size();
    if (n >= V && V > 0)
        throw Error(ErrorCode::InvalidArgument, "cannot mask " + std::to_string(n) + " of " + std::to_string(V) + " joints");
    std::vector<double> w = dist.probs;
    std::vector<std::size_t> chosen;
    chosen.reserve(n);
    for (std::size_t draw = 0; draw < n; ++draw) {
        double total = 0.0;
        for (double p : w) total += p;
        std::size_t pick = V;
        if (total > 0.0) {
            const double u = rng.uniform() * total;
            double acc = 0.0;
            for (std::size_t v = 0; v < V; ++v) {
                if (w[v] <= 0.0) continue;
                acc += w[v];
                pick = v;
                if (u < acc) break;
            }
        } else {
            // Remaining mass is zero: fall back to uniform over unchosen joints.
            std::vector<std::size_t> free;
            for (std::size_t v = 0; v < V; ++v)
                if (std::find(chosen.begin(), chosen.end(), v) == chosen.end()) free.push_back(v);
            pick = free[rng.below(free.size())];
        }
        chosen.push_back(pick);
        w[pick] = 0.0;
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

std::vector<double> motion_scores(const SkeletonSequence& x) {
    const std::size_t C = x.channels(), T = x.frames(), V = x.joints();
    std::vector<double> a(T, 0.0);
    const double norm = 1.0 / static_cast<double>(C * V);
    for (std::size_t t = 0; t + 1 < T; ++t) {
        double sum = 0.0;
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t v = 0; v < V; ++v)
                sum += std::abs(static_cast<double>(x.at(c, t + 1, v)) - static_cast<double>(x.at(c, t, v)));
        a[t] = sum * norm;
    }
    a[T - 1] = a[T - 2];
    return a;
}

std::vector<std::size_t> select_frames(const std::vector<double>& scores, std::size_t k, FrameOrder order) {
    const std::size_t T = scores.size();
    if (k >= T && T > 0)
        throw Error(ErrorCode::InvalidArgument, "cannot select " + std::to_string(k) + " of " + std::to_string(T) + " frames");
    std::vector<std::size_t> idx(T);
    std::iota(idx.begin(), idx.end(), 0);
    auto better = [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return order == FrameOrder::Top ? scores[a] > scores[b] : scores[a] < scores[b];
        return a < b;
    };
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), better);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

SkeletonSequence apply_masks(const SkeletonSequence& x, const std::vector<std::size_t>& joints,
                             const std::vector<std::size_t>& frames) {
    const std::size_t C = x.channels(), T = x.frames(), V = x.joints();
    for (auto v : joints)
        if (v >= V) throw Error(ErrorCode::InvalidArgument, "masked joint " + std::to_string(v) + " out of range");
    for (auto t : frames)
        if (t >= T) throw Error(ErrorCode::InvalidArgument, "masked frame " + std::to_string(t) + " out of range");
    SkeletonSequence out = x;
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t t = 0; t < T; ++t)
            for (auto v : joints) out.at(c, t, v) = real(0);
        for (auto t : frames)
            for (std::size_t v = 0; v < V; ++v) out.at(c, t, v) = real(0);
    }
    return out;
}

std::string to_string(SpatialMode m) {
    switch (m) {
        case SpatialMode::HDSM: return "hdsm";
        case SpatialMode::LDSM: return "ldsm";
        case SpatialMode::Random: return "random";
    }
    return "?";
}

std::string to_string(TemporalMode m) {
    switch (m) {
        case TemporalMode::HMTM: return "hmtm";
        case TemporalMode::LMTM: return "lmtm";
        case TemporalMode::Random: return "random";
    }
    return "?";
}

SpatialMode parse_spatial_mode(const std::string& s) {
    if (s == "hdsm" || s == "HDSM") return SpatialMode::HDSM;
    if (s == "ldsm" || s == "LDSM") return SpatialMode::LDSM;
    if (s == "random") return SpatialMode::Random;
    throw Error(ErrorCode::InvalidArgument, "unknown spatial mode '" + s + "' (hdsm|ldsm|random)");
}

TemporalMode parse_temporal_mode(const std::string& s) {
    if (s == "hmtm" || s == "HMTM") return TemporalMode::HMTM;
    if (s == "lmtm" || s == "LMTM") return TemporalMode::LMTM;
    if (s == "random") return TemporalMode::Random;
    throw Error(ErrorCode::InvalidArgument, "unknown temporal mode '" + s + "' (hmtm|lmtm|random)");
}

void MaskSpec::validate(std::size_t joints, std::size_t frames) const {
    if (n_joints >= joints)
        throw Error(ErrorCode::InvalidArgument, "n_joints must be < V (" + std::to_string(joints) + ")");
    if (k_frames >= frames)
        throw Error(ErrorCode::InvalidArgument, "k_frames must be < T (" + std::to_string(frames) + ")");
}

std::vector<std::size_t> draw_joint_mask(const SkeletonGraph& graph, const MaskSpec& spec, Rng& rng) {
    const auto weighting = spec.spatial == SpatialMode::HDSM   ? DegreeWeighting::HighDegree
                           : spec.spatial == SpatialMode::LDSM ? DegreeWeighting::LowDegree
                                                               : DegreeWeighting::Uniform;
    return sample_masked_joints(joint_mask_distribution(graph, weighting), spec.n_joints, rng);
}

std::vector<std::size_t> draw_frame_mask(const SkeletonSequence& view, const MaskSpec& spec, Rng& rng) {
    const std::size_t T = view.frames();
    if (spec.k_frames >= T) throw Error(ErrorCode::InvalidArgument, "k_frames must be < T");
    if (spec.temporal == TemporalMode::Random) {
        std::vector<std::size_t> idx(T);
        std::iota(idx.begin(), idx.end(), 0);
        for (std::size_t i = 0; i < spec.k_frames; ++i) std::swap(idx[i], idx[i + rng.below(T - i)]);
        idx.resize(spec.k_frames);
        std::sort(idx.begin(), idx.end());
        return idx;
    }
    const auto order = spec.temporal == TemporalMode::HMTM ? FrameOrder::Top : FrameOrder::Bottom;
    return select_frames(motion_scores(view), spec.k_frames, order);
}

AsymmetricViews make_asymmetric_views(const SkeletonSequence& x, const std::vector<MaskSpec>& branches,
                                      const AugmentationSpec& aug, Rng& rng) {
    for (const auto& b : branches) b.validate(x.joints(), x.frames());
    const SkeletonSequence spatial_base = augment(x, aug, rng);
    const SkeletonSequence temporal_base = augment(x, aug, rng);
    AsymmetricViews views{x, {}};
    views.branches.reserve(branches.size());
    for (const auto& spec : branches) {
        auto joints = draw_joint_mask(x.graph(), spec, rng);
        auto frames = draw_frame_mask(temporal_base, spec, rng);
        views.branches.push_back(BranchViews{apply_masks(spatial_base, joints, {}),
                                             apply_masks(temporal_base, {}, frames), std::move(joints),
                                             std::move(frames)});
    }
    return views;
}

AsymmetricViews make_asymmetric_views(const SkeletonSequence& x, const MaskSpec& theta, const MaskSpec& phi,
                                      const AugmentationSpec& aug, Rng& rng) {
    return make_asymmetric_views(x, std::vector<MaskSpec>{theta, phi}, aug, rng);
}

ASMA_NAMESPACE_END
