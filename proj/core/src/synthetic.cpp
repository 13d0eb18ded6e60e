#include "asma/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "asma/error.hpp"
#include "asma/rng.hpp"

ASMA_NAMESPACE_BEGIN

namespace {

using Vec3 = std::array<double, 3>;

std::vector<std::vector<std::size_t>> children_of(const SkeletonGraph& g) {
    std::vector<std::vector<std::size_t>> kids(g.num_joints());
    for (std::size_t v = 0; v < g.num_joints(); ++v)
        if (auto p = g.parent(v)) kids[*p].push_back(v);
    return kids;
}

std::vector<std::size_t> subtree(const std::vector<std::vector<std::size_t>>& kids, std::size_t root) {
    std::vector<std::size_t> out{root};
    for (std::size_t i = 0; i < out.size(); ++i)
        for (auto c : kids[out[i]]) out.push_back(c);
    return out;
}

std::vector<Vec3> rest_pose_for(const SkeletonGraph& g) {
    if (!g.rest_pose().empty()) return g.rest_pose();
    // Unit offsets from the parent, fanned out by joint index.
    std::vector<Vec3> pose(g.num_joints(), Vec3{0, 0, 0});
    std::vector<std::size_t> order;
    std::vector<bool> placed(g.num_joints(), false);
    for (std::size_t v = 0; v < g.num_joints(); ++v)
        if (!g.parent(v)) {
            order.push_back(v);
            placed[v] = true;
        }
    const auto kids = children_of(g);
    for (std::size_t i = 0; i < order.size(); ++i)
        for (auto c : kids[order[i]]) {
            const double a = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(g.num_joints());
            const auto& p = pose[order[i]];
            pose[c] = {p[0] + 0.2 * std::cos(a), p[1] + 0.2 * std::sin(a), p[2]};
            order.push_back(c);
        }
    return pose;
}

Vec3 rotate_about(const Vec3& p, const Vec3& pivot, int axis, double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    Vec3 d{p[0] - pivot[0], p[1] - pivot[1], p[2] - pivot[2]};
    Vec3 r = d;
    if (axis == 0) {
        r[1] = c * d[1] - s * d[2];
        r[2] = s * d[1] + c * d[2];
    } else if (axis == 1) {
        r[0] = c * d[0] + s * d[2];
        r[2] = -s * d[0] + c * d[2];
    } else {
        r[0] = c * d[0] - s * d[1];
        r[1] = s * d[0] + c * d[1];
    }
    return {pivot[0] + r[0], pivot[1] + r[1], pivot[2] + r[2]};
}

struct Swing {
    std::vector<std::size_t> joints;  // joints[0] is the pivot
    int axis;
    double mean_angle;
    double amplitude;
    double cycles;
    double phase;
};

void apply_swing(std::vector<Vec3>& pose, const Swing& s, double t01) {
    const double angle = s.mean_angle + s.amplitude * std::sin(2.0 * std::numbers::pi * s.cycles * t01 + s.phase);
    const Vec3 pivot = pose[s.joints[0]];
    for (std::size_t i = 1; i < s.joints.size(); ++i) pose[s.joints[i]] = rotate_about(pose[s.joints[i]], pivot, s.axis, angle);
}

}  // namespace

std::vector<std::size_t> limb_roots(const SkeletonGraph& graph) {
    if (!graph.has_parents()) throw Error(ErrorCode::MissingParents, "limb detection requires a parent map");
    const auto kids = children_of(graph);
    std::vector<std::pair<std::size_t, std::size_t>> found;  // (size, root)
    for (std::size_t v = 0; v < graph.num_joints(); ++v) {
        if (graph.degree(v) < 3) continue;
        for (auto c : kids[v]) {
            const auto sub = subtree(kids, c);
            const bool branching = std::any_of(sub.begin(), sub.end(), [&](std::size_t u) { return graph.degree(u) >= 3; });
            if (!branching && sub.size() >= 2) found.emplace_back(sub.size(), c);
        }
    }
    std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    std::vector<std::size_t> roots;
    for (const auto& f : found) roots.push_back(f.second);
    if (roots.empty()) {
        // Degenerate topologies (e.g. a chain): swing everything below the first child of a root.
        for (std::size_t v = 0; v < graph.num_joints(); ++v)
            if (!kids[v].empty()) {
                roots.push_back(v);
                break;
            }
    }
    return roots;
}

std::vector<SkeletonSequence> generate_synthetic(std::size_t classes, std::size_t per_class, std::size_t frames,
                                                 const GraphPtr& graph, std::uint64_t seed,
                                                 const SynthOptions& options) {
    if (classes < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 classes");
    if (per_class < 1) throw Error(ErrorCode::InvalidArgument, "need at least 1 sample per class");
    if (frames < 8) throw Error(ErrorCode::InvalidArgument, "need at least 8 frames");

    const auto& g = *graph;
    const auto kids = children_of(g);
    const auto rest = rest_pose_for(g);
    const auto roots = limb_roots(g);
    const std::size_t L = roots.size();

    std::vector<SkeletonSequence> out;
    out.reserve(classes * per_class);
    for (std::size_t c = 0; c < classes; ++c) {
        const std::size_t limb = c % L;
        const std::size_t variant = c / L;
        for (std::size_t i = 0; i < per_class; ++i) {
            Rng rng(derive_seed(seed, c, i));
            Swing main{subtree(kids, roots[limb]),
                       variant % 2 == 0 ? 0 : 2,
                       (variant % 2 == 0 ? -0.9 : 0.7) * (limb % 2 == 0 ? 1.0 : -1.0),
                       0.45 * (1.0 + options.amplitude_jitter * rng.uniform(-1.0, 1.0)),
                       (1.0 + static_cast<double>(variant)) * (1.0 + options.frequency_jitter * rng.uniform(-1.0, 1.0)),
                       rng.uniform(0.0, 2.0 * std::numbers::pi)};
            std::optional<Swing> distractor;
            const std::size_t other = L > 1 ? (limb + 1 + rng.below(L - 1)) % L : limb;
            const int d_axis = static_cast<int>(rng.below(3));
            const double d_amp = options.distractor_amplitude * rng.uniform(0.3, 1.0);
            const double d_cycles = rng.uniform(0.5, 3.0);
            const double d_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
            if (options.distractor_amplitude > 0.0 && other != limb)
                distractor = Swing{subtree(kids, roots[other]), d_axis, 0.0, d_amp, d_cycles, d_phase};
            const Vec3 offset{options.translation_sigma * rng.normal(), options.translation_sigma * rng.normal(),
                              options.translation_sigma * rng.normal()};
            const double sway_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);

            SkeletonSequence seq(3, frames, graph, static_cast<int>(c));
            std::vector<Vec3> pose;
            for (std::size_t t = 0; t < frames; ++t) {
                const double t01 = static_cast<double>(t) / static_cast<double>(frames - 1);
                pose = rest;
                apply_swing(pose, main, t01);
                if (distractor) apply_swing(pose, *distractor, t01);
                const double sway = options.sway_amplitude * std::sin(2.0 * std::numbers::pi * t01 + sway_phase);
                for (std::size_t v = 0; v < g.num_joints(); ++v)
                    for (std::size_t k = 0; k < 3; ++k) {
                        const double jitter = options.noise_sigma * rng.normal();
                        seq.at(k, t, v) = static_cast<real>(pose[v][k] + offset[k] + (k == 0 ? sway : 0.0) + jitter);
                    }
            }
            out.push_back(std::move(seq));
        }
    }
    return out;
}

ASMA_NAMESPACE_END
