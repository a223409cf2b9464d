#pragma once

#include <string_view>

namespace h2sim {

enum class Precision { fp32, fp16 };

/// Rounds a float to the nearest IEEE binary16 value (ties to even) and
/// returns it widened back to float. Overflow saturates to +/-inf.
float round_to_fp16(float x) noexcept;

inline float quantize(float x, Precision p) noexcept {
    return p == Precision::fp16 ? round_to_fp16(x) : x;
}

Precision parse_precision(std::string_view name);
std::string_view to_string(Precision p) noexcept;

}  // namespace h2sim
