#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "h2sim/lif.hpp"
#include "h2sim/lut_engine.hpp"
#include "h2sim/tensor.hpp"

namespace h2sim {

struct BackwardStats {
    std::uint64_t finder_scan_bits = 0;
    std::uint64_t finder_tasks = 0;
    std::uint64_t macs = 0;
    std::uint64_t grad_ops = 0;
    std::uint64_t pool_ops = 0;

    BackwardStats& operator+=(const BackwardStats& o) noexcept;
};

struct PlaneCoord {
    int y = 0;
    int x = 0;
    friend bool operator==(const PlaneCoord&, const PlaneCoord&) = default;
};

/// Output IDs (positions with a valid spike gradient) assigned to one buffer.
struct OutputIdBuffer {
    int index = 0;
    std::vector<PlaneCoord> ids;
};

/// One effectual MAC of the transposed convolution. `w_id` is the position
/// inside the input window (row-major), i.e. the offset in the 180-degree
/// rotated kernel; the original kernel element is (k-1-y, k-1-x).
struct ConvTask {
    PlaneCoord out_id;
    PlaneCoord w_id;
    PlaneCoord in_id;
    friend bool operator==(const ConvTask&, const ConvTask&) = default;
};

struct OutputFinderResult {
    std::vector<OutputIdBuffer> buffers;
    /// Decompressed potential, zero where the mask is clear.
    std::vector<Real> u_dense;
};

/// Row-major scan of the mask; set positions go to the buffers in turn.
std::vector<OutputIdBuffer> split_output_ids(const BitPlane& mask, int num_buffers = 2,
                                             BackwardStats* stats = nullptr);

/// Throws CorruptedStateError when the compressed tile does not match the mask.
OutputFinderResult effectual_output_finder(const BitPlane& mask, const CompressedPotentialTile& cu,
                                           int num_buffers = 2, BackwardStats* stats = nullptr);

/// Window tag of an output position: bit (wy * k + wx) is set when the
/// gradient input feeding rotated-kernel offset (wy, wx) exists and is nonzero.
/// Supports k <= 8.
std::uint64_t window_tag(PlaneCoord out_id, const BitPlane& in_mask, const ConvGeometry& geom);

/// Input coordinate reached from `out_id` through rotated offset (wy, wx),
/// or false when it falls between strided positions or outside the plane.
bool window_input(PlaneCoord out_id, PlaneCoord w_id, int in_h, int in_w, const ConvGeometry& geom,
                  PlaneCoord& in_id) noexcept;

/// Priority-encoded task stream for one output ID (row-major tag order).
std::vector<ConvTask> effectual_io_finder(PlaneCoord out_id, const BitPlane& in_mask, const ConvGeometry& geom);

/// Task streams for every buffer, concatenating each ID's stream in buffer order.
std::vector<std::vector<ConvTask>> generate_tasks(const std::vector<OutputIdBuffer>& buffers, const BitPlane& in_mask,
                                                  const ConvGeometry& geom, BackwardStats* stats = nullptr);

/// ps[out] += w[task] * grad_u[in] over buffer 0 then buffer 1 (and so on).
/// `kernel` is the original k x k row-major kernel of this channel pair;
/// `grad_u` is the gradient plane of the upper layer (in_h x in_w).
std::vector<Real> sparse_conv_execute(const std::vector<std::vector<ConvTask>>& tasks, std::span<const Real> kernel,
                                      const ConvGeometry& geom, std::span<const Real> grad_u, int in_h, int in_w,
                                      int out_h, int out_w, Precision precision = Precision::fp32,
                                      BackwardStats* stats = nullptr);

struct GradUnitResult {
    std::vector<Real> grad_u;
    BitPlane mask;
};

/// Phase 1 forms the spike gradient from `ps` and the temporal term, phase 2
/// the potential gradient and its nonzero mask. `spike_grad_mask` gates the
/// surrogate (u_dense only needs to be valid where it is set).
GradUnitResult grad_unit(std::span<const Real> ps, std::span<const Real> u_dense, std::span<const Real> grad_u_next,
                         const BitPlane& s, const BitPlane& spike_grad_mask, const LifParams& p,
                         Precision precision = Precision::fp32, BackwardStats* stats = nullptr);

/// Dense FC backward: ps[i] = sum_j grad_u[j] * w[i][j], w row-major inputs x outputs.
std::vector<Real> fc_backward_mode(std::span<const Real> grad_u_upper, std::span<const Real> w, int inputs,
                                   Precision precision = Precision::fp32, BackwardStats* stats = nullptr);

}  // namespace h2sim
