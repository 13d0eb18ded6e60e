#pragma once

#include <cstdint>
#include <vector>

#include "asma/skeleton.hpp"

ASMA_NAMESPACE_BEGIN

/// Nuisance knobs for the synthetic action generator.
struct SynthOptions {
    double noise_sigma = 0.01;          ///< per-coordinate Gaussian jitter
    double amplitude_jitter = 0.15;     ///< relative, uniform +-
    double frequency_jitter = 0.1;      ///< relative, uniform +-
    double distractor_amplitude = 0.35; ///< radians; 0 disables the distractor limb
    double translation_sigma = 0.03;    ///< per-sample global offset
    double sway_amplitude = 0.015;      ///< slow whole-body sway
};

/// Limb roots of a graph: children of branching joints (degree >= 3) whose
/// subtree has no further branching. Ordered by subtree size, then index.
std::vector<std::size_t> limb_roots(const SkeletonGraph& graph);

/// `classes * per_class` labelled sequences of shape 3 x T x V, class-major.
/// Class c swings limb `c mod L` about its root around a class-specific mean
/// angle; classes beyond the limb count use another axis and a higher
/// frequency. Every sample also carries a zero-mean swing of a random other
/// limb, Gaussian jitter and a small global offset. Same seed, same output.
std::vector<SkeletonSequence> generate_synthetic(std::size_t classes, std::size_t per_class, std::size_t frames,
                                                 const GraphPtr& graph, std::uint64_t seed,
                                                 const SynthOptions& options = {});

ASMA_NAMESPACE_END
