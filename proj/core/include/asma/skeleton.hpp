#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "asma/precision.hpp"

ASMA_NAMESPACE_BEGIN

/// Joint topology of a skeleton. Immutable after construction.
class SkeletonGraph {
   public:
    using Edge = std::pair<std::size_t, std::size_t>;

    /// Builds a graph from an undirected edge list. When `root` is given the
    /// parent map is the BFS tree from that root; unreachable joints are
    /// roots of their own trees. Throws InvalidArgument on out-of-range or
    /// self-loop edges.
    SkeletonGraph(std::size_t num_joints, std::vector<Edge> edges,
                  std::optional<std::size_t> root = std::nullopt);

    std::size_t num_joints() const { return num_joints_; }
    const std::vector<Edge>& edges() const { return edges_; }
    const std::vector<std::size_t>& degrees() const { return degrees_; }
    std::size_t degree(std::size_t v) const { return degrees_.at(v); }

    bool has_parents() const { return !parents_.empty(); }
    /// Parent of `v`, nullopt for a root. Empty map when no root was given.
    std::optional<std::size_t> parent(std::size_t v) const;
    const std::vector<std::optional<std::size_t>>& parents() const { return parents_; }

    /// Joint used as the center for partitioned adjacency.
    std::size_t center() const { return center_; }
    void set_center(std::size_t v);

    /// Left/right joint pairs swapped by a mirror flip.
    const std::vector<Edge>& mirror_pairs() const { return mirror_pairs_; }
    void set_mirror_pairs(std::vector<Edge> pairs);

    /// Optional rest pose, V rows of xyz.
    const std::vector<std::array<double, 3>>& rest_pose() const { return rest_pose_; }
    void set_rest_pose(std::vector<std::array<double, 3>> pose);

    /// Dense V x V 0/1 adjacency (no self loops), row-major.
    std::vector<double> adjacency() const;

    /// Unweighted hop distance between every pair (V*V, row-major);
    /// unreachable pairs hold num_joints().
    std::vector<std::size_t> hop_distances() const;

   private:
    std::size_t num_joints_;
    std::vector<Edge> edges_;
    std::vector<std::size_t> degrees_;
    std::vector<std::optional<std::size_t>> parents_;
    std::size_t center_ = 0;
    std::vector<Edge> mirror_pairs_;
    std::vector<std::array<double, 3>> rest_pose_;
};

using GraphPtr = std::shared_ptr<const SkeletonGraph>;

/// The 25-joint NTU RGB+D (Kinect v2) skeleton: 24 edges, parents rooted at
/// the spine base (joint 0), center at the shoulder-spine joint (20).
GraphPtr build_ntu_graph();

/// Dense C x T x V coordinates of a single person plus topology.
class SkeletonSequence {
   public:
    SkeletonSequence(std::size_t channels, std::size_t frames, GraphPtr graph,
                     std::optional<int> label = std::nullopt);
    SkeletonSequence(std::size_t channels, std::size_t frames, GraphPtr graph,
                     std::vector<real> data, std::optional<int> label = std::nullopt);

    std::size_t channels() const { return channels_; }
    std::size_t frames() const { return frames_; }
    std::size_t joints() const { return graph_->num_joints(); }
    std::size_t size() const { return data_.size(); }

    const SkeletonGraph& graph() const { return *graph_; }
    const GraphPtr& graph_ptr() const { return graph_; }

    std::optional<int> label() const { return label_; }
    void set_label(std::optional<int> label) { label_ = label; }

    real& at(std::size_t c, std::size_t t, std::size_t v) { return data_[index(c, t, v)]; }
    real at(std::size_t c, std::size_t t, std::size_t v) const { return data_[index(c, t, v)]; }

    std::span<real> data() { return data_; }
    std::span<const real> data() const { return data_; }

    bool all_finite() const;

    bool operator==(const SkeletonSequence& other) const;

   private:
    std::size_t index(std::size_t c, std::size_t t, std::size_t v) const {
        return (c * frames_ + t) * graph_->num_joints() + v;
    }

    std::size_t channels_;
    std::size_t frames_;
    GraphPtr graph_;
    std::vector<real> data_;
    std::optional<int> label_;
};

enum class Stream { Joint, Bone, Motion };

const char* stream_name(Stream s);
Stream parse_stream(const std::string& name);

/// Joint: copy. Bone: child minus parent (root bones are zero). Motion:
/// next-frame minus current frame, last frame zero. Throws MissingParents for
/// a bone stream on a graph without a parent map.
SkeletonSequence derive_stream(const SkeletonSequence& x, Stream stream);

/// Linear-interpolation resample along time to `frames` (endpoints aligned).
SkeletonSequence resample_frames(const SkeletonSequence& x, std::size_t frames);

ASMA_NAMESPACE_END
