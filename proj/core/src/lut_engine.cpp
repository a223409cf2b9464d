#include "h2sim/lut_engine.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

namespace h2sim {

LutStats& LutStats::operator+=(const LutStats& o) noexcept {
    lut_reads += o.lut_reads;
    adds += o.adds;
    macs += o.macs;
    lut_build_adds += o.lut_build_adds;
    soma_ops += o.soma_ops;
    pool_ops += o.pool_ops;
    return *this;
}

SubLut build_sublut(std::span<const Real> values, Precision precision) {
    const int m = static_cast<int>(values.size());
    if (m > SubLut::kMaxBits)
        throw ConfigError("sub-LUT covers " + std::to_string(m) + " elements, at most " +
                          std::to_string(SubLut::kMaxBits) + " supported");
    SubLut lut;
    lut.m_ = m;
    lut.entries_.assign(std::size_t{1} << m, 0);
    for (std::uint32_t b = 1; b < lut.entries_.size(); ++b) {
        const std::uint32_t rest = b & (b - 1);
        const Real v = values[static_cast<std::size_t>(std::countr_zero(b))];
        lut.entries_[b] = rest == 0 ? v : quantize(lut.entries_[rest] + v, precision);
    }
    return lut;
}

void LutPeConfig::validate() const {
    if (subluts_per_pe < 1 || sublut_bits < 1 || bytes_per_entry < 1 || window_h < 1 || window_w < 1)
        throw ConfigError("lut: all PE parameters must be positive");
    if (sublut_bits > SubLut::kMaxBits) throw ConfigError("lut: sub-LUT address wider than 8 bits");
    if (subluts_per_pe * sublut_bits != window_h * window_w)
        throw ConfigError("lut: subluts_per_pe x bits must equal the window element count");
}

KernelPartition forward_partition(int k, const LutPeConfig& cfg) {
    cfg.validate();
    if (k < 1) throw ConfigError("lut: kernel must be >= 1");
    return {k, std::min(k, cfg.sublut_bits)};
}

KernelLuts build_kernel_luts(std::span<const Real> kernel, int k, const LutPeConfig& cfg, Precision precision,
                             LutStats* stats) {
    if (kernel.size() != static_cast<std::size_t>(k) * k) throw ConfigError("lut: kernel size does not match k");
    KernelLuts luts{forward_partition(k, cfg), {}};
    const int seg = luts.partition.segment;
    for (int ky = 0; ky < k; ++ky)
        for (int x0 = 0; x0 < k; x0 += seg) {
            const int len = std::min(seg, k - x0);
            luts.segments.push_back(
                build_sublut(kernel.subspan(static_cast<std::size_t>(ky) * k + x0, static_cast<std::size_t>(len)),
                             precision));
            if (stats) stats->lut_build_adds += SubLut::build_cost(len);
        }
    return luts;
}

void PartialSumTile::accumulate(std::span<const Real> contribution, Precision precision) {
    if (contribution.size() != values_.size()) throw ConfigError("acc: contribution size mismatch");
    if (accumulated_ >= expected_) throw SequencingError("acc: more input channels than expected");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] = quantize(values_[i] + contribution[i], precision);
    ++accumulated_;
}

std::vector<Real> lut_conv_forward(const BitPlane& spikes, const KernelLuts& luts, const ConvGeometry& geom,
                                   Precision precision, LutStats* stats) {
    geom.validate();
    const KernelPartition& part = luts.partition;
    if (part.k != geom.k || static_cast<int>(luts.segments.size()) != part.segments())
        throw ConfigError("lut: kernel partition does not match geometry");
    const int oh = geom.out_size(spikes.height());
    const int ow = geom.out_size(spikes.width());
    if (oh < 1 || ow < 1) throw ConfigError("lut: kernel larger than padded input");
    std::vector<Real> out(static_cast<std::size_t>(oh) * ow, 0);
    const int per_row = part.segments_per_row();
    for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
            Real acc = 0;
            for (int ky = 0; ky < part.k; ++ky) {
                const int iy = oy * geom.stride - geom.pad + ky;
                for (int sg = 0; sg < per_row; ++sg) {
                    const SubLut& lut = luts.segments[static_cast<std::size_t>(ky * per_row + sg)];
                    const int x0 = ox * geom.stride - geom.pad + sg * part.segment;
                    std::uint32_t address = 0;
                    for (int e = 0; e < lut.bits(); ++e)
                        if (spikes.get(iy, x0 + e)) address |= 1u << e;
                    acc = quantize(acc + lut[address], precision);
                }
            }
            out[static_cast<std::size_t>(oy) * ow + ox] = acc;
        }
    if (stats) {
        const std::uint64_t reads = static_cast<std::uint64_t>(oh) * ow * part.segments();
        stats->lut_reads += reads;
        stats->adds += reads;
    }
    return out;
}

std::vector<Real> lut_conv_forward(const BitPlane& spikes, std::span<const Real> kernel, const ConvGeometry& geom,
                                   const LutPeConfig& cfg, Precision precision, LutStats* stats) {
    return lut_conv_forward(spikes, build_kernel_luts(kernel, geom.k, cfg, precision, stats), geom, precision, stats);
}

std::vector<Real> dense_conv_forward(std::span<const Real> input, int h, int w, std::span<const Real> kernel,
                                     const ConvGeometry& geom, Precision precision, LutStats* stats) {
    geom.validate();
    const int k = geom.k;
    if (input.size() != static_cast<std::size_t>(h) * w || kernel.size() != static_cast<std::size_t>(k) * k)
        throw ConfigError("dense conv: operand size mismatch");
    const int oh = geom.out_size(h);
    const int ow = geom.out_size(w);
    std::vector<Real> out(static_cast<std::size_t>(oh) * ow, 0);
    for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
            Real acc = 0;
            for (int ky = 0; ky < k; ++ky) {
                const int iy = oy * geom.stride - geom.pad + ky;
                if (iy < 0 || iy >= h) continue;
                for (int kx = 0; kx < k; ++kx) {
                    const int ix = ox * geom.stride - geom.pad + kx;
                    if (ix < 0 || ix >= w) continue;
                    const Real x = input[static_cast<std::size_t>(iy) * w + ix];
                    acc = quantize(acc + quantize(x * kernel[static_cast<std::size_t>(ky) * k + kx], precision),
                                   precision);
                }
            }
            out[static_cast<std::size_t>(oy) * ow + ox] = acc;
        }
    if (stats) stats->macs += static_cast<std::uint64_t>(oh) * ow * k * k;
    return out;
}

std::vector<Real> lut_conv_weightgrad(const BitPlane& spikes, std::span<const Real> grad_u, int oh, int ow, int k,
                                      const ConvGeometry& geom, const LutPeConfig& cfg, Precision precision,
                                      LutStats* stats) {
    cfg.validate();
    geom.validate();
    if (geom.k != k) throw ConfigError("weightgrad: kernel does not match geometry");
    if (grad_u.size() != static_cast<std::size_t>(oh) * ow) throw ConfigError("weightgrad: gradient plane size");
    if (geom.out_size(spikes.height()) != oh || geom.out_size(spikes.width()) != ow)
        throw ConfigError("weightgrad: gradient plane does not match the spike plane");
    const int part_w = cfg.sublut_bits;
    std::vector<Real> out(static_cast<std::size_t>(k) * k, 0);
    for (int oy = 0; oy < oh; ++oy)
        for (int x0 = 0; x0 < ow; x0 += part_w) {
            const int len = std::min(part_w, ow - x0);
            const SubLut lut = build_sublut(
                grad_u.subspan(static_cast<std::size_t>(oy) * ow + x0, static_cast<std::size_t>(len)), precision);
            if (stats) stats->lut_build_adds += SubLut::build_cost(len);
            for (int ky = 0; ky < k; ++ky) {
                const int iy = oy * geom.stride - geom.pad + ky;
                for (int kx = 0; kx < k; ++kx) {
                    std::uint32_t address = 0;
                    for (int e = 0; e < len; ++e)
                        if (spikes.get(iy, (x0 + e) * geom.stride - geom.pad + kx)) address |= 1u << e;
                    Real& o = out[static_cast<std::size_t>(ky) * k + kx];
                    o = quantize(o + lut[address], precision);
                }
            }
            if (stats) {
                stats->lut_reads += static_cast<std::uint64_t>(k) * k;
                stats->adds += static_cast<std::uint64_t>(k) * k;
            }
        }
    return out;
}

std::vector<Real> dense_conv_weightgrad(std::span<const Real> input, int h, int w, std::span<const Real> grad_u,
                                        int oh, int ow, int k, const ConvGeometry& geom, Precision precision,
                                        LutStats* stats) {
    geom.validate();
    if (input.size() != static_cast<std::size_t>(h) * w || grad_u.size() != static_cast<std::size_t>(oh) * ow)
        throw ConfigError("dense weightgrad: operand size mismatch");
    std::vector<Real> out(static_cast<std::size_t>(k) * k, 0);
    for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
            const Real g = grad_u[static_cast<std::size_t>(oy) * ow + ox];
            for (int ky = 0; ky < k; ++ky) {
                const int iy = oy * geom.stride - geom.pad + ky;
                if (iy < 0 || iy >= h) continue;
                for (int kx = 0; kx < k; ++kx) {
                    const int ix = ox * geom.stride - geom.pad + kx;
                    if (ix < 0 || ix >= w) continue;
                    Real& o = out[static_cast<std::size_t>(ky) * k + kx];
                    o = quantize(o + quantize(g * input[static_cast<std::size_t>(iy) * w + ix], precision), precision);
                }
            }
        }
    if (stats) stats->macs += static_cast<std::uint64_t>(oh) * ow * k * k;
    return out;
}

std::vector<Real> fc_lut_mode(const BitPlane& spikes, std::span<const Real> values, int outputs, Precision precision,
                              LutStats* stats) {
    const std::size_t inputs = spikes.size();
    if (outputs < 0 || values.size() != inputs * static_cast<std::size_t>(outputs))
        throw ConfigError("fc: value matrix does not match inputs x outputs");
    std::vector<Real> out(static_cast<std::size_t>(outputs), 0);
    std::uint64_t exported = 0;
    for (std::size_t i = 0; i < inputs; ++i) {
        if (!spikes.test(i)) continue;
        const Real* row = values.data() + i * static_cast<std::size_t>(outputs);
        for (int j = 0; j < outputs; ++j) out[static_cast<std::size_t>(j)] = quantize(out[static_cast<std::size_t>(j)] + row[j], precision);
        exported += static_cast<std::uint64_t>(outputs);
    }
    if (stats) {
        stats->lut_reads += exported;
        stats->adds += exported;
    }
    return out;
}

void fc_lut_weightgrad(const BitPlane& spikes, std::span<const Real> grad_u, std::span<Real> grad_w,
                       Precision precision, LutStats* stats) {
    const std::size_t inputs = spikes.size();
    const std::size_t outputs = grad_u.size();
    if (grad_w.size() != inputs * outputs) throw ConfigError("fc weightgrad: gradient matrix size mismatch");
    std::uint64_t exported = 0;
    for (std::size_t i = 0; i < inputs; ++i) {
        if (!spikes.test(i)) continue;
        Real* row = grad_w.data() + i * outputs;
        for (std::size_t j = 0; j < outputs; ++j) row[j] = quantize(row[j] + grad_u[j], precision);
        exported += outputs;
    }
    if (stats) {
        stats->lut_reads += exported;
        stats->adds += exported;
    }
}

void CompressedPotentialTile::check() const {
    if (mask.popcount() != values.size())
        throw CorruptedStateError("compressed potential: mask popcount " + std::to_string(mask.popcount()) +
                                  " != stored values " + std::to_string(values.size()));
}

std::vector<Real> CompressedPotentialTile::decompress() const {
    check();
    std::vector<Real> dense(mask.size(), 0);
    std::size_t next = 0;
    for (std::size_t i = 0; i < dense.size(); ++i)
        if (mask.test(i)) dense[i] = values[next++];
    return dense;
}

CompressedPotentialTile compress_potential(std::span<const Real> u, int h, int w, const LifParams& p) {
    if (u.size() != static_cast<std::size_t>(h) * w) throw ConfigError("compress: plane size mismatch");
    CompressedPotentialTile tile{BitPlane(h, w), {}};
    for (std::size_t i = 0; i < u.size(); ++i)
        if (p.in_window(u[i])) {
            tile.mask.set(i);
            tile.values.push_back(u[i]);
        }
    return tile;
}

SomaResult soma(const PartialSumTile& ps, std::span<const Real> u_prev, const BitPlane& s_prev, const LifParams& p,
                bool fc_mode, Precision precision, LutStats* stats) {
    if (!ps.complete())
        throw SequencingError("soma: partial sums cover " + std::to_string(ps.channels_accumulated()) + " of " +
                              std::to_string(ps.channels_expected()) + " input channels");
    const int h = ps.height();
    const int w = ps.width();
    const std::size_t size = static_cast<std::size_t>(h) * w;
    if (u_prev.size() != size || s_prev.height() != h || s_prev.width() != w)
        throw ConfigError("soma: state size mismatch");
    SomaResult r{BitPlane(h, w), BitPlane(h, w), std::vector<Real>(size), std::nullopt};
    const Real alpha = static_cast<Real>(p.alpha);
    const auto sums = ps.values();
    for (std::size_t i = 0; i < size; ++i) {
        const Real temporal = s_prev.test(i) ? Real{0} : quantize(alpha * u_prev[i], precision);
        const Real u = quantize(temporal + sums[i], precision);
        if (!std::isfinite(u)) throw DataError("soma: potential became non-finite");
        r.u[i] = u;
        if (u >= p.th_f) r.spikes.set(i);
        if (p.in_window(u)) r.mask.set(i);
    }
    if (!fc_mode) r.compressed = compress_potential(r.u, h, w, p);
    if (stats) stats->soma_ops += size;
    return r;
}

}  // namespace h2sim
