#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "h2sim/lut_engine.hpp"
#include "h2sim/model.hpp"

namespace h2sim {

enum class EngineKind { forward, backward, weight_update };
std::string_view to_string(EngineKind kind) noexcept;

/// PE-array geometry and unit rates of one engine.
///
/// FE: rows hold input channels, cols output channels; `parallelism` lanes
/// (tiles) run at once and `t_max` (sample, timestep) pairs are handled per
/// grid iteration. WUE: rows are timesteps of one sample, cols gradient
/// channels. BE: rows are upper-layer gradient channels, cols lower-layer
/// channels, and `parallelism` is the PE-group size.
struct EngineConfig {
    EngineKind kind = EngineKind::forward;
    int pe_rows = 64;
    int pe_cols = 16;
    int parallelism = 4;
    LutPeConfig lut = LutPeConfig::forward_default();
    int t_max = 10;
    double glb_bytes = 503.0 * 1024;
    /// Soma (FE) or Grad (BE) units.
    int element_units = 16;
    /// BE only.
    int finders = 64;
    int scan_width = 16;
    int sync_cycles = 1;

    static EngineConfig forward_default();
    static EngineConfig weight_update_default();
    static EngineConfig backward_default();
    void validate() const;
};

/// One of the three independent external memory spaces.
struct MemoryConfig {
    double bytes_per_second = 128e9;
    double clock_hz = 800e6;
    int spaces = 3;

    double bytes_per_cycle() const noexcept { return bytes_per_second / clock_hz; }
    void validate() const;
};

struct TileSpec {
    int h = 16;
    int w = 16;

    std::size_t binary_bytes() const noexcept { return (static_cast<std::size_t>(h) * w + 7) / 8; }
    std::size_t fp16_bytes() const noexcept { return 2 * static_cast<std::size_t>(h) * w; }
    void validate() const;
};

struct HardwareConfig {
    EngineConfig fe = EngineConfig::forward_default();
    EngineConfig wue = EngineConfig::weight_update_default();
    EngineConfig be = EngineConfig::backward_default();
    MemoryConfig memory{};
    TileSpec tile{};

    void validate() const;
};

struct TileRect {
    int y0 = 0;
    int x0 = 0;
    int h = 0;
    int w = 0;
    std::size_t size() const noexcept { return static_cast<std::size_t>(h) * w; }
    friend bool operator==(const TileRect&, const TileRect&) = default;
};

/// Row-major tiles covering an h x w output plane; edge tiles may be partial.
std::vector<TileRect> tile_feature_map(int h, int w, const TileSpec& tile);

/// Clipped input rectangle (halo included) read by a conv producing `out`.
TileRect conv_input_rect(const TileRect& out, int in_h, int in_w, const ConvGeometry& g);
/// Clipped rectangle of the upper gradient plane feeding the transposed conv
/// that produces `out` on the lower grid.
TileRect transposed_input_rect(const TileRect& out, int upper_h, int upper_w, const ConvGeometry& g);

struct OpCounts {
    std::uint64_t lut_reads = 0;
    std::uint64_t adds = 0;
    std::uint64_t macs = 0;
    std::uint64_t lut_build_adds = 0;
    std::uint64_t soma_ops = 0;
    std::uint64_t grad_ops = 0;
    std::uint64_t pool_ops = 0;
    std::uint64_t finder_scan_bits = 0;
    std::uint64_t finder_tasks = 0;

    OpCounts& operator+=(const OpCounts& o) noexcept;
    std::uint64_t total() const noexcept;
    friend bool operator==(const OpCounts&, const OpCounts&) = default;
};

/// Timing and traffic of one engine on one layer. Every phase is double
/// buffered, so its time is max(compute, memory); `bound` sums phase times.
struct EngineCycles {
    std::uint64_t compute = 0;
    /// PE array and finder cycles alone.
    std::uint64_t array = 0;
    /// Soma / Grad / pooling unit cycles (overlapped with the array).
    std::uint64_t elementwise = 0;
    std::uint64_t memory = 0;
    std::uint64_t bound = 0;
    std::uint64_t grid_iterations = 0;
    std::uint64_t tiles = 0;
    /// FE: grid iterations after which finished outputs leave the chip
    /// (output stationary, one per pass over the input channels).
    std::uint64_t output_writes = 0;
    OpCounts ops;
    /// Off-chip bytes per memory space (Mem0, Mem1, Mem2).
    std::array<double, 3> traffic{};
    /// Largest per-phase working set checked against half the GLB.
    double peak_working_set = 0;
    /// Real-valued input ran as dense MACs (encoding layer or pooled input).
    bool dense_input = false;

    double traffic_total() const noexcept { return traffic[0] + traffic[1] + traffic[2]; }
    EngineCycles& operator+=(const EngineCycles& o) noexcept;
};

struct LayerCycleReport {
    int layer = 0;
    std::string name;
    EngineCycles forward;
    EngineCycles backward;
    EngineCycles weight_update;
};

/// Binary activity of one weight layer over one sub-batch.
struct LayerMasks {
    /// Layer input as spikes; empty (size 0) when the input is real valued.
    SpikeTensor input;
    /// Valid spike gradients of the layer output.
    MaskTensor spike_grad;
    /// Nonzero potential gradients of the layer output.
    MaskTensor potential_grad;
};

struct ActivityTrace {
    int samples = 0;
    int timesteps = 0;
    std::vector<LayerMasks> layers;
};

/// Masks recorded by a functional run (golden or engine) of one sub-batch.
ActivityTrace replay_trace(const NetworkPlan& plan, const std::vector<LayerForward>& forward,
                           const std::vector<LayerBackward>& backward);

/// Densities (fraction of ones) used to draw synthetic masks.
struct LayerDensity {
    double input_spikes = 0.2;
    double spike_grad = 0.5;
    double potential_grad = 0.5;
};

/// Seeded Bernoulli masks with the given per-layer densities.
ActivityTrace synthetic_trace(const NetworkPlan& plan, int samples, int timesteps,
                              std::span<const LayerDensity> densities, std::uint64_t seed);

/// Measured densities of a trace (input density 0 for real-valued inputs).
std::vector<LayerDensity> measure_densities(const ActivityTrace& trace);

/// Forward Engine: conv/FC of weight layer j plus the pooling that follows it.
EngineCycles fe_cycles(const NetworkPlan& plan, int j, const ActivityTrace& trace, const HardwareConfig& hw);
/// Weight Update Engine: gradient of weight layer j.
EngineCycles wue_cycles(const NetworkPlan& plan, int j, const ActivityTrace& trace, const HardwareConfig& hw);
/// Backward Engine: potential gradient of spiking layer j (transposed conv or
/// FC of layer j+1, pool backward and Grad). With `exploit_sparsity` false the
/// finders are off and every in-bounds MAC is executed (dense baseline).
EngineCycles be_cycles(const NetworkPlan& plan, int j, const ActivityTrace& trace, const HardwareConfig& hw,
                       bool exploit_sparsity = true);

/// Functional-equivalent op counts of every engine per layer, derived from
/// the masks alone (LUT build additions excluded).
struct LayerOps {
    OpCounts forward;
    OpCounts backward;
    OpCounts weight_update;
};
std::vector<LayerOps> replay_counters(const NetworkPlan& plan, const ActivityTrace& trace,
                                      const LutPeConfig& fe_lut = LutPeConfig::forward_default(),
                                      const LutPeConfig& wue_lut = LutPeConfig::weight_update_default());

/// All engines over all layers.
std::vector<LayerCycleReport> simulate_layers(const NetworkPlan& plan, const ActivityTrace& trace,
                                              const HardwareConfig& hw, bool exploit_sparsity = true);

}  // namespace h2sim
