#pragma once

#include <string>
#include <vector>

#include "asma/augment.hpp"
#include "asma/rng.hpp"
#include "asma/skeleton.hpp"

ASMA_NAMESPACE_BEGIN

enum class DegreeWeighting { HighDegree, LowDegree, Uniform };

/// Per-joint masking probabilities derived from degree centrality.
struct JointMaskDistribution {
    std::vector<double> probs;
    DegreeWeighting mode = DegreeWeighting::Uniform;
};

/// HighDegree: p_v = d_v / sum d. LowDegree: 1 - p_v renormalized to sum 1.
/// Uniform: 1/V. Throws DegenerateGraph when every degree is zero (for the
/// degree-based modes).
JointMaskDistribution joint_mask_distribution(const SkeletonGraph& graph, DegreeWeighting mode);

/// `n` distinct joints drawn sequentially proportional to `probs`, each drawn
/// joint removed before the next draw. Returned sorted ascending.
std::vector<std::size_t> sample_masked_joints(const JointMaskDistribution& dist, std::size_t n, Rng& rng);

/// a_t = mean over channels and joints of |x[c,t+1,v] - x[c,t,v]|, for
/// t < T-1; the last frame repeats a_{T-2}.
std::vector<double> motion_scores(const SkeletonSequence& x);

enum class FrameOrder { Top, Bottom };

/// Indices of the k largest (Top) or smallest (Bottom) scores; ties go to
/// the lower frame index. Sorted ascending.
std::vector<std::size_t> select_frames(const std::vector<double>& scores, std::size_t k, FrameOrder order);

/// Copy of x with the given joint columns and frames zeroed across all channels.
SkeletonSequence apply_masks(const SkeletonSequence& x, const std::vector<std::size_t>& joints,
                             const std::vector<std::size_t>& frames);

enum class SpatialMode { HDSM, LDSM, Random };
enum class TemporalMode { HMTM, LMTM, Random };

std::string to_string(SpatialMode m);
std::string to_string(TemporalMode m);
SpatialMode parse_spatial_mode(const std::string& s);
TemporalMode parse_temporal_mode(const std::string& s);

/// Masking recipe for one encoder branch.
struct MaskSpec {
    std::size_t n_joints = 9;
    std::size_t k_frames = 10;
    SpatialMode spatial = SpatialMode::HDSM;
    TemporalMode temporal = TemporalMode::LMTM;

    /// Throws InvalidArgument unless n < V and k < T.
    void validate(std::size_t joints, std::size_t frames) const;
};

/// Joint indices for a spatial mask (distribution built from the graph).
std::vector<std::size_t> draw_joint_mask(const SkeletonGraph& graph, const MaskSpec& spec, Rng& rng);

/// Frame indices for a temporal mask chosen from the motion scores of `view`.
std::vector<std::size_t> draw_frame_mask(const SkeletonSequence& view, const MaskSpec& spec, Rng& rng);

/// Masked views of one branch: spatial view of x', temporal view of x^.
struct BranchViews {
    SkeletonSequence spatial;
    SkeletonSequence temporal;
    std::vector<std::size_t> joints;
    std::vector<std::size_t> frames;
};

/// The unmasked anchor plus the spatial/temporal views of every branch.
struct AsymmetricViews {
    SkeletonSequence anchor;
    std::vector<BranchViews> branches;
};

/// anchor = x; x' and x^ are independent augmentations of x; branch k gets
/// spatial mask k on x' and temporal mask k on x^ (frames ranked by the
/// motion of x^). Draw order: x', x^, then each branch's joints and frames.
AsymmetricViews make_asymmetric_views(const SkeletonSequence& x, const std::vector<MaskSpec>& branches,
                                      const AugmentationSpec& aug, Rng& rng);

/// Canonical two-branch form: branches[0] = theta, branches[1] = phi.
AsymmetricViews make_asymmetric_views(const SkeletonSequence& x, const MaskSpec& theta, const MaskSpec& phi,
                                      const AugmentationSpec& aug, Rng& rng);

ASMA_NAMESPACE_END
