#include "asma/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "asma/error.hpp"

ASMA_NAMESPACE_BEGIN

SkeletonGraph::SkeletonGraph(std::size_t num_joints, std::vector<Edge> edges,
                             std::optional<std::size_t> root)
    : num_joints_(num_joints), edges_(std::move(edges)), degrees_(num_joints, 0) {
    if (num_joints_ == 0) throw Error(ErrorCode::InvalidArgument, "graph needs at least one joint");
    for (const auto& [a, b] : edges_) {
        if (a >= num_joints_ || b >= num_joints_) {
            throw Error(ErrorCode::InvalidArgument,
                        "edge (" + std::to_string(a) + "," + std::to_string(b) +
                            ") out of range for " + std::to_string(num_joints_) + " joints");
        }
        if (a == b) throw Error(ErrorCode::InvalidArgument, "self-loop on joint " + std::to_string(a));
        ++degrees_[a];
        ++degrees_[b];
    }
    if (root) {
        if (*root >= num_joints_) throw Error(ErrorCode::InvalidArgument, "root out of range");
        center_ = *root;
        parents_.assign(num_joints_, std::nullopt);
        std::vector<std::vector<std::size_t>> nbrs(num_joints_);
        for (const auto& [a, b] : edges_) {
            nbrs[a].push_back(b);
            nbrs[b].push_back(a);
        }
        std::vector<bool> seen(num_joints_, false);
        auto bfs = [&](std::size_t start) {
            std::deque<std::size_t> queue{start};
            seen[start] = true;
            while (!queue.empty()) {
                const auto u = queue.front();
                queue.pop_front();
                for (auto w : nbrs[u]) {
                    if (!seen[w]) {
                        seen[w] = true;
                        parents_[w] = u;
                        queue.push_back(w);
                    }
                }
            }
        };
        bfs(*root);
        for (std::size_t v = 0; v < num_joints_; ++v)
            if (!seen[v]) bfs(v);
    }
}

std::optional<std::size_t> SkeletonGraph::parent(std::size_t v) const {
    if (parents_.empty()) return std::nullopt;
    return parents_.at(v);
}

void SkeletonGraph::set_center(std::size_t v) {
    if (v >= num_joints_) throw Error(ErrorCode::InvalidArgument, "center out of range");
    center_ = v;
}

void SkeletonGraph::set_mirror_pairs(std::vector<Edge> pairs) {
    for (const auto& [a, b] : pairs)
        if (a >= num_joints_ || b >= num_joints_)
            throw Error(ErrorCode::InvalidArgument, "mirror pair out of range");
    mirror_pairs_ = std::move(pairs);
}

void SkeletonGraph::set_rest_pose(std::vector<std::array<double, 3>> pose) {
    if (pose.size() != num_joints_)
        throw Error(ErrorCode::InvalidArgument, "rest pose needs one row per joint");
    rest_pose_ = std::move(pose);
}

std::vector<double> SkeletonGraph::adjacency() const {
    std::vector<double> a(num_joints_ * num_joints_, 0.0);
    for (const auto& [u, v] : edges_) {
        a[u * num_joints_ + v] = 1.0;
        a[v * num_joints_ + u] = 1.0;
    }
    return a;
}

std::vector<std::size_t> SkeletonGraph::hop_distances() const {
    const std::size_t n = num_joints_;
    std::vector<std::vector<std::size_t>> nbrs(n);
    for (const auto& [a, b] : edges_) {
        nbrs[a].push_back(b);
        nbrs[b].push_back(a);
    }
    std::vector<std::size_t> dist(n * n, n);
    for (std::size_t s = 0; s < n; ++s) {
        std::deque<std::size_t> queue{s};
        dist[s * n + s] = 0;
        while (!queue.empty()) {
            const auto u = queue.front();
            queue.pop_front();
            for (auto w : nbrs[u]) {
                if (dist[s * n + w] == n) {
                    dist[s * n + w] = dist[s * n + u] + 1;
                    queue.push_back(w);
                }
            }
        }
    }
    return dist;
}

GraphPtr build_ntu_graph() {
    // 1-based joint pairs of the Kinect v2 layout used by NTU RGB+D.
    static constexpr std::array<std::pair<int, int>, 24> kEdges1 = {{
        {1, 2},   {2, 21},  {3, 21},  {4, 3},   {5, 21},  {6, 5},   {7, 6},   {8, 7},
        {9, 21},  {10, 9},  {11, 10}, {12, 11}, {13, 1},  {14, 13}, {15, 14}, {16, 15},
        {17, 1},  {18, 17}, {19, 18}, {20, 19}, {22, 23}, {23, 8},  {24, 25}, {25, 12},
    }};
    std::vector<SkeletonGraph::Edge> edges;
    edges.reserve(kEdges1.size());
    for (const auto& [a, b] : kEdges1)
        edges.emplace_back(static_cast<std::size_t>(a - 1), static_cast<std::size_t>(b - 1));

    auto graph = std::make_shared<SkeletonGraph>(25, std::move(edges), 0);
    graph->set_center(20);
    graph->set_mirror_pairs({{4, 8}, {5, 9}, {6, 10}, {7, 11}, {12, 16},
                             {13, 17}, {14, 18}, {15, 19}, {21, 23}, {22, 24}});
    // Standing pose in metres, y up, subject's left on +x.
    graph->set_rest_pose({{
        {0.00, 0.00, 0.00},    // 0 spine base
        {0.00, 0.30, 0.00},    // 1 spine mid
        {0.00, 0.62, 0.00},    // 2 neck
        {0.00, 0.78, 0.02},    // 3 head
        {0.18, 0.55, 0.00},    // 4 left shoulder
        {0.22, 0.30, 0.00},    // 5 left elbow
        {0.23, 0.07, 0.02},    // 6 left wrist
        {0.23, 0.00, 0.03},    // 7 left hand
        {-0.18, 0.55, 0.00},   // 8 right shoulder
        {-0.22, 0.30, 0.00},   // 9 right elbow
        {-0.23, 0.07, 0.02},   // 10 right wrist
        {-0.23, 0.00, 0.03},   // 11 right hand
        {0.10, -0.02, 0.00},   // 12 left hip
        {0.11, -0.42, 0.01},   // 13 left knee
        {0.11, -0.80, 0.00},   // 14 left ankle
        {0.11, -0.85, 0.08},   // 15 left foot
        {-0.10, -0.02, 0.00},  // 16 right hip
        {-0.11, -0.42, 0.01},  // 17 right knee
        {-0.11, -0.80, 0.00},  // 18 right ankle
        {-0.11, -0.85, 0.08},  // 19 right foot
        {0.00, 0.55, 0.00},    // 20 spine shoulder
        {0.23, -0.08, 0.04},   // 21 left hand tip
        {0.21, -0.03, 0.06},   // 22 left thumb
        {-0.23, -0.08, 0.04},  // 23 right hand tip
        {-0.21, -0.03, 0.06},  // 24 right thumb
    }});
    return graph;
}

SkeletonSequence::SkeletonSequence(std::size_t channels, std::size_t frames, GraphPtr graph,
                                   std::optional<int> label)
    : SkeletonSequence(channels, frames, graph,
                       std::vector<real>(channels * frames * (graph ? graph->num_joints() : 0), real(0)),
                       label) {}

SkeletonSequence::SkeletonSequence(std::size_t channels, std::size_t frames, GraphPtr graph,
                                   std::vector<real> data, std::optional<int> label)
    : channels_(channels), frames_(frames), graph_(std::move(graph)), data_(std::move(data)), label_(label) {
    if (!graph_) throw Error(ErrorCode::InvalidArgument, "sequence needs a graph");
    if (channels_ < 1) throw Error(ErrorCode::InvalidArgument, "sequence needs C >= 1");
    if (frames_ < 2) throw Error(ErrorCode::InvalidArgument, "sequence needs T >= 2");
    if (data_.size() != channels_ * frames_ * graph_->num_joints()) {
        throw Error(ErrorCode::ShapeMismatch,
                    "data length " + std::to_string(data_.size()) + " != C*T*V = " +
                        std::to_string(channels_ * frames_ * graph_->num_joints()));
    }
}

bool SkeletonSequence::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](real x) { return std::isfinite(x); });
}

bool SkeletonSequence::operator==(const SkeletonSequence& other) const {
    return channels_ == other.channels_ && frames_ == other.frames_ &&
           joints() == other.joints() && label_ == other.label_ && data_ == other.data_;
}

const char* stream_name(Stream s) {
    switch (s) {
        case Stream::Joint: return "joint";
        case Stream::Bone: return "bone";
        case Stream::Motion: return "motion";
    }
    return "?";
}

Stream parse_stream(const std::string& name) {
    if (name == "joint") return Stream::Joint;
    if (name == "bone") return Stream::Bone;
    if (name == "motion") return Stream::Motion;
    throw Error(ErrorCode::InvalidArgument, "unknown stream '" + name + "' (joint|bone|motion)");
}

SkeletonSequence derive_stream(const SkeletonSequence& x, Stream stream) {
    SkeletonSequence out = x;
    const std::size_t C = x.channels(), T = x.frames(), V = x.joints();
    switch (stream) {
        case Stream::Joint:
            break;
        case Stream::Bone: {
            const auto& g = x.graph();
            if (!g.has_parents())
                throw Error(ErrorCode::MissingParents, "bone stream requires a parent map");
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t t = 0; t < T; ++t)
                    for (std::size_t v = 0; v < V; ++v) {
                        const auto p = g.parent(v);
                        out.at(c, t, v) = p ? x.at(c, t, v) - x.at(c, t, *p) : real(0);
                    }
            break;
        }
        case Stream::Motion:
            for (std::size_t c = 0; c < C; ++c) {
                for (std::size_t t = 0; t + 1 < T; ++t)
                    for (std::size_t v = 0; v < V; ++v) out.at(c, t, v) = x.at(c, t + 1, v) - x.at(c, t, v);
                for (std::size_t v = 0; v < V; ++v) out.at(c, T - 1, v) = real(0);
            }
            break;
    }
    return out;
}

SkeletonSequence resample_frames(const SkeletonSequence& x, std::size_t frames) {
    if (frames < 2) throw Error(ErrorCode::InvalidArgument, "resample target needs >= 2 frames");
    const std::size_t C = x.channels(), T = x.frames(), V = x.joints();
    SkeletonSequence out(C, frames, x.graph_ptr(), x.label());
    for (std::size_t i = 0; i < frames; ++i) {
        const double pos = static_cast<double>(i) * static_cast<double>(T - 1) / static_cast<double>(frames - 1);
        auto lo = static_cast<std::size_t>(std::floor(pos));
        if (lo >= T - 1) lo = T - 2;
        const double w = pos - static_cast<double>(lo);
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t v = 0; v < V; ++v)
                out.at(c, i, v) = static_cast<real>((1.0 - w) * x.at(c, lo, v) + w * x.at(c, lo + 1, v));
    }
    return out;
}

ASMA_NAMESPACE_END
