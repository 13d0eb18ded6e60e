#include "asma/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "asma/error.hpp"

ASMA_NAMESPACE_BEGIN

void AugmentationSpec::validate() const {
    if (!(crop_lo > 0.0 && crop_lo <= crop_hi && crop_hi <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "crop ratio range must satisfy 0 < lo <= hi <= 1");
    if (!(rotation_max_deg >= 0.0)) throw Error(ErrorCode::InvalidArgument, "rotation_max_deg must be >= 0");
    if (!(flip_probability >= 0.0 && flip_probability <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "flip_probability must be in [0,1]");
}

SkeletonSequence temporal_crop_resize(const SkeletonSequence& x, std::size_t start, std::size_t length) {
    const std::size_t T = x.frames();
    if (length < 2 || start + length > T)
        throw Error(ErrorCode::InvalidArgument, "crop window out of range");
    if (start == 0 && length == T) return x;
    const std::size_t C = x.channels(), V = x.joints();
    SkeletonSequence out(C, T, x.graph_ptr(), x.label());
    for (std::size_t i = 0; i < T; ++i) {
        const double pos = static_cast<double>(start) +
                           static_cast<double>(i) * static_cast<double>(length - 1) / static_cast<double>(T - 1);
        auto lo = static_cast<std::size_t>(std::floor(pos));
        if (lo >= start + length - 1) lo = start + length - 2;
        const double w = pos - static_cast<double>(lo);
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t v = 0; v < V; ++v)
                out.at(c, i, v) = static_cast<real>((1.0 - w) * x.at(c, lo, v) + w * x.at(c, lo + 1, v));
    }
    return out;
}

SkeletonSequence rotate(const SkeletonSequence& x, double ax_deg, double ay_deg, double az_deg) {
    if (x.channels() != 3) throw Error(ErrorCode::InvalidArgument, "rotation needs 3 channels");
    const double k = std::numbers::pi / 180.0;
    const double cx = std::cos(ax_deg * k), sx = std::sin(ax_deg * k);
    const double cy = std::cos(ay_deg * k), sy = std::sin(ay_deg * k);
    const double cz = std::cos(az_deg * k), sz = std::sin(az_deg * k);
    // R = Rz * Ry * Rx
    const double r[3][3] = {
        {cz * cy, cz * sy * sx - sz * cx, cz * sy * cx + sz * sx},
        {sz * cy, sz * sy * sx + cz * cx, sz * sy * cx - cz * sx},
        {-sy, cy * sx, cy * cx},
    };
    SkeletonSequence out = x;
    for (std::size_t t = 0; t < x.frames(); ++t)
        for (std::size_t v = 0; v < x.joints(); ++v) {
            const double p[3] = {x.at(0, t, v), x.at(1, t, v), x.at(2, t, v)};
            for (std::size_t i = 0; i < 3; ++i)
                out.at(i, t, v) = static_cast<real>(r[i][0] * p[0] + r[i][1] * p[1] + r[i][2] * p[2]);
        }
    return out;
}

SkeletonSequence mirror(const SkeletonSequence& x) {
    SkeletonSequence out = x;
    const auto& pairs = x.graph().mirror_pairs();
    for (std::size_t c = 0; c < x.channels(); ++c)
        for (std::size_t t = 0; t < x.frames(); ++t) {
            for (const auto& [a, b] : pairs) std::swap(out.at(c, t, a), out.at(c, t, b));
            if (c == 0)
                for (std::size_t v = 0; v < x.joints(); ++v) out.at(0, t, v) = -out.at(0, t, v);
        }
    return out;
}

SkeletonSequence augment(const SkeletonSequence& x, const AugmentationSpec& spec, Rng& rng) {
    const std::size_t T = x.frames();
    const double ratio = rng.uniform(spec.crop_lo, spec.crop_hi);
    auto length = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(T) - 1e-9));
    length = std::clamp<std::size_t>(length, 2, T);
    const std::size_t start = rng.below(T - length + 1);
    double angles[3];
    for (auto& a : angles) a = rng.uniform(-spec.rotation_max_deg, spec.rotation_max_deg);
    const bool flip = rng.bernoulli(spec.flip_probability);

    SkeletonSequence out = temporal_crop_resize(x, start, length);
    if (spec.rotation_max_deg > 0.0 && x.channels() == 3) out = rotate(out, angles[0], angles[1], angles[2]);
    if (flip) out = mirror(out);
    return out;
}

ASMA_NAMESPACE_END
