#pragma once

// The core library is built once per scalar type. Each build lives in its own
// inline namespace so float and double variants can be linked side by side.

#if defined(ASMA_USE_DOUBLE)
#define ASMA_PRECISION_TAG f64
#else
#define ASMA_PRECISION_TAG f32
#endif

#define ASMA_NAMESPACE_BEGIN \
    namespace asma {         \
    inline namespace ASMA_PRECISION_TAG {
#define ASMA_NAMESPACE_END \
    }                      \
    }

ASMA_NAMESPACE_BEGIN

#if defined(ASMA_USE_DOUBLE)
using real = double;
#else
using real = float;
#endif

inline constexpr const char* kVersion = "0.3.0";

constexpr const char* precision_name() {
    return sizeof(real) == sizeof(double) ? "float64" : "float32";
}

ASMA_NAMESPACE_END
