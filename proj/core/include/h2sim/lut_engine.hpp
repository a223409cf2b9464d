#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "h2sim/fp16.hpp"
#include "h2sim/lif.hpp"
#include "h2sim/tensor.hpp"

namespace h2sim {

/// Functional counters kept by the LUT engines.
struct LutStats {
    std::uint64_t lut_reads = 0;
    std::uint64_t adds = 0;
    std::uint64_t macs = 0;
    std::uint64_t lut_build_adds = 0;
    std::uint64_t soma_ops = 0;
    std::uint64_t pool_ops = 0;

    LutStats& operator+=(const LutStats& o) noexcept;
};

/// Subset-sum table over m values: entries[b] = sum of value[i] for set bits i.
class SubLut {
public:
    static constexpr int kMaxBits = 8;

    int bits() const noexcept { return m_; }
    std::size_t size() const noexcept { return entries_.size(); }
    Real operator[](std::uint32_t address) const noexcept { return entries_[address]; }
    std::span<const Real> entries() const noexcept { return entries_; }

    /// Additions spent building a table of m entries incrementally.
    static std::uint64_t build_cost(int m) noexcept { return m <= 0 ? 0 : (std::uint64_t{1} << m) - m - 1; }

private:
    friend SubLut build_sublut(std::span<const Real> values, Precision precision);
    int m_ = 0;
    std::vector<Real> entries_;
};

/// Throws ConfigError when values.size() > 8.
SubLut build_sublut(std::span<const Real> values, Precision precision = Precision::fp32);

struct LutPeConfig {
    int subluts_per_pe = 3;
    /// Address bits per sub-LUT (entries = 2^m).
    int sublut_bits = 3;
    int bytes_per_entry = 2;
    int window_h = 3;
    int window_w = 3;

    static LutPeConfig forward_default() { return {3, 3, 2, 3, 3}; }
    static LutPeConfig weight_update_default() { return {2, 4, 2, 1, 8}; }

    int entries() const noexcept { return 1 << sublut_bits; }
    int bytes_per_sublut() const noexcept { return entries() * bytes_per_entry; }
    int bytes_per_pe() const noexcept { return subluts_per_pe * bytes_per_sublut(); }
    /// Throws unless subluts_per_pe * m equals the window element count.
    void validate() const;
};

/// Sub-LUT partition of one k x k kernel: every kernel row is cut into
/// segments of at most `segment` elements, each segment is one sub-LUT.
struct KernelPartition {
    int k = 3;
    int segment = 3;

    int segments_per_row() const noexcept { return (k + segment - 1) / segment; }
    int segments() const noexcept { return k * segments_per_row(); }
    /// Logical PEs needed when each holds `subluts_per_pe` sub-LUTs.
    int logical_pes(int subluts_per_pe) const noexcept { return (segments() + subluts_per_pe - 1) / subluts_per_pe; }
};

KernelPartition forward_partition(int k, const LutPeConfig& cfg);

/// Sub-LUTs of one (cin, cout) kernel, in row-major segment order.
struct KernelLuts {
    KernelPartition partition;
    std::vector<SubLut> segments;
};

KernelLuts build_kernel_luts(std::span<const Real> kernel, int k, const LutPeConfig& cfg,
                             Precision precision = Precision::fp32, LutStats* stats = nullptr);

/// Running sums for one output channel, tagged with how many input channels
/// have been folded in so far.
class PartialSumTile {
public:
    PartialSumTile() = default;
    PartialSumTile(int h, int w, int channels_expected)
        : h_(h), w_(w), expected_(channels_expected), values_(static_cast<std::size_t>(h) * w, 0) {}

    int height() const noexcept { return h_; }
    int width() const noexcept { return w_; }
    int channels_expected() const noexcept { return expected_; }
    int channels_accumulated() const noexcept { return accumulated_; }
    bool complete() const noexcept { return accumulated_ == expected_; }

    std::span<const Real> values() const noexcept { return values_; }
    Real at(int y, int x) const noexcept { return values_[static_cast<std::size_t>(y) * w_ + x]; }

    /// Acc adder tree: adds one input channel's contribution.
    void accumulate(std::span<const Real> contribution, Precision precision = Precision::fp32);

private:
    int h_ = 0;
    int w_ = 0;
    int expected_ = 0;
    int accumulated_ = 0;
    std::vector<Real> values_;
};

/// LUT convolution of one spike plane with one kernel. Returns the output
/// plane (size from geometry) of per-window sums of sub-LUT lookups.
std::vector<Real> lut_conv_forward(const BitPlane& spikes, const KernelLuts& luts, const ConvGeometry& geom,
                                   Precision precision = Precision::fp32, LutStats* stats = nullptr);

/// Convenience: builds the sub-LUTs from a k x k row-major kernel first.
std::vector<Real> lut_conv_forward(const BitPlane& spikes, std::span<const Real> kernel, const ConvGeometry& geom,
                                   const LutPeConfig& cfg = LutPeConfig::forward_default(),
                                   Precision precision = Precision::fp32, LutStats* stats = nullptr);

/// Real-valued input path (encoding layer or pooled input): plain MACs.
std::vector<Real> dense_conv_forward(std::span<const Real> input, int h, int w, std::span<const Real> kernel,
                                     const ConvGeometry& geom, Precision precision = Precision::fp32,
                                     LutStats* stats = nullptr);

/// Weight-gradient contribution of one (spike channel, gradient channel)
/// pair: k x k row-major. `grad_u` is the output-plane potential gradient
/// (oh x ow), `spikes` the input plane. Sub-LUTs hold consecutive
/// `cfg.window_w`-wide row segments of grad_u split into `cfg.subluts_per_pe`
/// parts and are reused across all k x k kernel offsets.
std::vector<Real> lut_conv_weightgrad(const BitPlane& spikes, std::span<const Real> grad_u, int oh, int ow, int k,
                                      const ConvGeometry& geom,
                                      const LutPeConfig& cfg = LutPeConfig::weight_update_default(),
                                      Precision precision = Precision::fp32, LutStats* stats = nullptr);

/// Real-valued input variant of the weight gradient (plain MACs).
std::vector<Real> dense_conv_weightgrad(std::span<const Real> input, int h, int w, std::span<const Real> grad_u,
                                        int oh, int ow, int k, const ConvGeometry& geom,
                                        Precision precision = Precision::fp32, LutStats* stats = nullptr);

/// FC mode: sub-LUTs act as value buffers and export v[i][j] when s[i] = 1.
/// `values` is row-major inputs x outputs.
std::vector<Real> fc_lut_mode(const BitPlane& spikes, std::span<const Real> values, int outputs,
                              Precision precision = Precision::fp32, LutStats* stats = nullptr);

/// FC weight-update mode: the sub-LUTs hold grad_u (one element per output)
/// and export it into grad_w[i][j] for every input i whose spike is 1.
/// `grad_w` is row-major inputs x outputs and is accumulated in place.
void fc_lut_weightgrad(const BitPlane& spikes, std::span<const Real> grad_u, std::span<Real> grad_w,
                       Precision precision = Precision::fp32, LutStats* stats = nullptr);

/// Potentials of one output plane kept only where th_l < u < th_r, in
/// row-major mask order.
struct CompressedPotentialTile {
    BitPlane mask;
    std::vector<Real> values;

    /// Throws CorruptedStateError when popcount(mask) != values.size().
    void check() const;
    std::vector<Real> decompress() const;
};

CompressedPotentialTile compress_potential(std::span<const Real> u, int h, int w, const LifParams& p);

struct SomaResult {
    BitPlane spikes;
    BitPlane mask;
    /// Dense post-integration potential, kept for the next timestep.
    std::vector<Real> u;
    /// Absent in FC mode, which stores u uncompressed.
    std::optional<CompressedPotentialTile> compressed;
};

/// Temporal update, firing and compression for one output plane. Throws
/// SequencingError if the partial sums are incomplete.
SomaResult soma(const PartialSumTile& ps, std::span<const Real> u_prev, const BitPlane& s_prev, const LifParams& p,
                bool fc_mode = false, Precision precision = Precision::fp32, LutStats* stats = nullptr);

}  // namespace h2sim
