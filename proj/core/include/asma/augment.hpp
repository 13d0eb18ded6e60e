#pragma once

#include "asma/rng.hpp"
#include "asma/skeleton.hpp"

ASMA_NAMESPACE_BEGIN

/// Random view transform: temporal crop, 3D rotation, mirror flip.
struct AugmentationSpec {
    double crop_lo = 0.6;  ///< fraction of T kept, lower bound
    double crop_hi = 1.0;
    double rotation_max_deg = 17.0;  ///< per-axis bound
    double flip_probability = 0.5;

    /// Throws InvalidArgument unless 0 < lo <= hi <= 1, rotation >= 0, p in [0,1].
    void validate() const;

    static AugmentationSpec identity() { return {1.0, 1.0, 0.0, 0.0}; }
};

/// Keeps frames [start, start + length) and resizes them back to T frames by
/// linear interpolation with aligned endpoints.
SkeletonSequence temporal_crop_resize(const SkeletonSequence& x, std::size_t start, std::size_t length);

/// Rotates the xyz channels by R = Rz * Ry * Rx (angles in degrees). Needs C == 3.
SkeletonSequence rotate(const SkeletonSequence& x, double ax_deg, double ay_deg, double az_deg);

/// Negates the x channel and swaps the graph's mirror pairs.
SkeletonSequence mirror(const SkeletonSequence& x);

/// crop -> rotation -> flip. Always consumes the same number of draws from
/// `rng`, so downstream draws do not depend on the spec values.
SkeletonSequence augment(const SkeletonSequence& x, const AugmentationSpec& spec, Rng& rng);

ASMA_NAMESPACE_END
