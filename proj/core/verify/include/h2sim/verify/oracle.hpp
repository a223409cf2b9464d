#pragma once

#include <span>
#include <vector>

#include "h2sim/model.hpp"

namespace h2sim::verify {

/// Results of the scalar unrolled-graph reference. Every tensor is flat in
/// the same index order as the library tensors.
struct OracleLayer {
    std::vector<double> u;
    std::vector<double> s;
    /// dL/du for every neuron and timestep.
    std::vector<double> grad_u;
    /// dL/dw in (ky, kx, ci, co) order.
    std::vector<double> grad_w;
};

struct OracleResult {
    double loss_sum = 0;
    std::vector<OracleLayer> layers;
};

/// Builds the whole sub-batch computation as a scalar graph (one node per
/// add/multiply/spike), evaluates it in double precision and runs reverse-mode
/// differentiation through it. The firing function's derivative is the
/// rectangular surrogate. `input` is (n, T, C, H, W).
OracleResult oracle_sub_batch(const NetworkSpec& net, const Weights& weights, const ActivationTensor& input,
                              std::span<const int> labels);

}  // namespace h2sim::verify
