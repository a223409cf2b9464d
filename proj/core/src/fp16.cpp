#include "h2sim/fp16.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>

#include "h2sim/error.hpp"

namespace h2sim {

float round_to_fp16(float x) noexcept {
    if (!std::isfinite(x)) return x;
    const float mag = std::fabs(x);
    // 65520 is the midpoint between the largest half (65504) and 2^16.
    if (mag >= 65520.0f) return std::copysign(std::numeric_limits<float>::infinity(), x);
    if (mag < 0x1p-14f) {
        // Subnormal half range: fixed quantum of 2^-24. nearbyint honours the
        // default round-to-nearest-even mode.
        const float q = std::nearbyint(mag * 0x1p24f) * 0x1p-24f;
        return std::copysign(q, x);
    }
    std::uint32_t bits = std::bit_cast<std::uint32_t>(x);
    const std::uint32_t lsb = (bits >> 13) & 1u;
    bits += 0x0fffu + lsb;
    bits &= ~0x1fffu;
    return std::bit_cast<float>(bits);
}

Precision parse_precision(std::string_view name) {
    if (name == "fp32") return Precision::fp32;
    if (name == "fp16") return Precision::fp16;
    throw ConfigError("unknown precision '" + std::string(name) + "' (expected fp32 or fp16)");
}

std::string_view to_string(Precision p) noexcept {
    return p == Precision::fp16 ? "fp16" : "fp32";
}

}  // namespace h2sim
