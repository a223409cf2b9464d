#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "h2sim/model.hpp"

namespace h2sim::verify {

/// A small random network with weights and one batch.
struct Fixture {
    NetworkSpec net;
    Weights weights;
    Batch batch;
    /// All operands are small dyadic rationals, so every float sum is exact.
    bool integer_valued = false;
    std::string description() const;
};

struct FixtureLimits {
    int max_weight_layers = 3;
    int max_channels = 8;
    int max_timesteps = 4;
    int max_spatial = 6;
};

/// Random network (conv / pool / FC mix ending in FC), weights and batch.
/// Integer fixtures use alpha = 0.5, T in {1, 2, 4}, half-step weights and a
/// surrogate window wide enough to hold most reachable potentials.
Fixture random_fixture(std::mt19937_64& rng, bool integer_valued, const FixtureLimits& limits = {});

/// Bernoulli(density) bit plane.
BitPlane random_plane(std::mt19937_64& rng, int h, int w, double density);

/// Largest |a - b| divided by max(|b|_inf, 1e-12); infinity on a size mismatch.
double relative_error(std::span<const Real> a, std::span<const double> b);
bool exactly_equal(std::span<const Real> a, std::span<const double> b);

/// Bits of a packed tensor compared with a 0/1 double vector.
bool bits_equal(const BitTensor& a, std::span<const double> b);

}  // namespace h2sim::verify
