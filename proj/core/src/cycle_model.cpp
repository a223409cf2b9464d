#include "h2sim/cycle_model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace h2sim {

namespace {

using u64 = std::uint64_t;

u64 ceil_div(u64 a, u64 b) { return (a + b - 1) / b; }

struct Block {
    int first = 0;
    int count = 0;
};

std::vector<Block> blocks(int total, int size) {
    std::vector<Block> out;
    for (int first = 0; first < total; first += size) out.push_back({first, std::min(size, total - first)});
    return out;
}

/// Off-chip size of `elems` activations: packed bits or FP16.
double act_bytes(bool binary, double elems) { return binary ? std::ceil(elems / 8.0) : 2.0 * elems; }

double bits_bytes(double elems) { return std::ceil(elems / 8.0); }


class PhaseLog {
public:
    PhaseLog(EngineCycles& r, double bytes_per_cycle, const EngineConfig& cfg, int layer)
        : r_(r), bpc_(bytes_per_cycle), limit_(cfg.glb_bytes / 2), kind_(cfg.kind), layer_(layer) {}

    /// `array` runs on the PE array (and finders), `elementwise` on the
    /// Soma/Grad units alongside it.
    void add(u64 array, u64 elementwise, std::array<double, 3> bytes, double working_set = 0) {
        const u64 compute = std::max(array, elementwise);
        r_.array += array;
        r_.elementwise += elementwise;
        u64 memory = 0;
        for (int s = 0; s < 3; ++s) {
            r_.traffic[static_cast<std::size_t>(s)] += bytes[static_cast<std::size_t>(s)];
            memory = std::max(memory, static_cast<u64>(std::ceil(bytes[static_cast<std::size_t>(s)] / bpc_)));
        }
        r_.compute += compute;
        r_.memory += memory;
        r_.bound += std::max(compute, memory);
        if (working_set > limit_)
            throw ConfigError(std::string(to_string(kind_)) + " engine, layer " + std::to_string(layer_) +
                              ": tile working set of " + std::to_string(static_cast<u64>(working_set)) +
                              " B exceeds half the GLB (" + std::to_string(static_cast<u64>(limit_)) + " B)");
        r_.peak_working_set = std::max(r_.peak_working_set, working_set);
    }

private:
    EngineCycles& r_;
    double bpc_;
    double limit_;
    EngineKind kind_;
    int layer_;
};

std::vector<const ResolvedLayer*> pools_after(const NetworkPlan& plan, int j) {
    std::vector<const ResolvedLayer*> pools;
    if (j + 1 >= plan.num_weight_layers()) return pools;
    for (int i = plan.weight_layers[static_cast<std::size_t>(j)] + 1; i < plan.weight_layers[static_cast<std::size_t>(j + 1)]; ++i)
        pools.push_back(&plan.layers[static_cast<std::size_t>(i)]);
    return pools;
}

int pool_factor(const std::vector<const ResolvedLayer*>& pools) {
    int p = 1;
    for (const ResolvedLayer* pool : pools) p *= pool->spec.pool;
    return p;
}

u64 flat_size(const Shape& s) { return static_cast<u64>(s.c) * s.h * s.w; }

double density(const BitTensor& t) {
    return t.size() == 0 ? 0.0 : static_cast<double>(t.popcount()) / static_cast<double>(t.size());
}

bool binary_input(const ResolvedLayer& layer) { return !layer.real_input; }

/// Popcount of the flattened input of one (n, t) pair.
u64 input_popcount(const SpikeTensor& in, int n, int t) {
    const Shape& s = in.shape();
    const std::size_t first = s.index(n, t, 0, 0, 0);
    const std::size_t count = flat_size(s);
    u64 total = 0;
    for (std::size_t i = first; i < first + count; ++i) total += in.test(i) ? 1 : 0;
    return total;
}

void check_trace(const NetworkPlan& plan, const ActivityTrace& trace, int j) {
    if (j < 0 || j >= plan.num_weight_layers()) throw ConfigError("cycle model: layer index out of range");
    if (trace.layers.size() != static_cast<std::size_t>(plan.num_weight_layers()))
        throw ConfigError("cycle model: trace does not match the network");
    if (trace.samples < 1 || trace.timesteps < 1) throw ConfigError("cycle model: empty trace");
    const ResolvedLayer& layer = plan.weight_layer(j);
    const LayerMasks& m = trace.layers[static_cast<std::size_t>(j)];
    const Shape out{trace.samples, trace.timesteps, layer.out.c, layer.out.h, layer.out.w};
    require_shape(m.spike_grad.shape(), out, "spike-grad mask");
    require_shape(m.potential_grad.shape(), out, "potential-grad mask");
    if (binary_input(layer))
        require_shape(m.input.shape(), Shape{trace.samples, trace.timesteps, layer.in.c, layer.in.h, layer.in.w},
                      "input spikes");
}

std::uint64_t forward_build_adds(int k, const LutPeConfig& cfg) {
    const KernelPartition part = forward_partition(k, cfg);
    u64 adds = 0;
    for (int sg = 0; sg < part.segments_per_row(); ++sg)
        adds += SubLut::build_cost(std::min(part.segment, k - sg * part.segment));
    return adds * static_cast<u64>(k);
}

OpCounts forward_ops(const NetworkPlan& plan, int j, const ActivityTrace& trace, const LutPeConfig& lut) {
    const ResolvedLayer& layer = plan.weight_layer(j);
    const u64 NT = static_cast<u64>(trace.samples) * trace.timesteps;
    OpCounts ops;
    const u64 cout = static_cast<u64>(layer.out.c);
    if (layer.op.kind == WeightKind::conv) {
        const ConvGeometry& g = layer.op.geom;
        const u64 per_pair = static_cast<u64>(layer.out.h) * layer.out.w;
        const u64 pairs = NT * static_cast<u64>(layer.in.c) * cout;
        if (binary_input(layer)) {
            const u64 reads = pairs * per_pair * static_cast<u64>(forward_partition(g.k, lut).segments());
            ops.lut_reads = reads;
            ops.adds = reads;
        } else {
            ops.macs = pairs * per_pair * static_cast<u64>(g.k) * g.k;
        }
    } else {
        const u64 inputs = flat_size(layer.in);
        if (binary_input(layer)) {
            const SpikeTensor& in = trace.layers[static_cast<std::size_t>(j)].input;
            u64 reads = 0;
            for (int n = 0; n < trace.samples; ++n)
                for (int t = 0; t < trace.timesteps; ++t) reads += input_popcount(in, n, t) * cout;
            ops.lut_reads = reads;
            ops.adds = reads;
        } else {
            ops.macs = NT * inputs * cout;
        }
    }
    ops.soma_ops = NT * flat_size(layer.out);
    for (const ResolvedLayer* pool : pools_after(plan, j)) ops.pool_ops += NT * flat_size(pool->in);
    return ops;
}

OpCounts weight_update_ops(const NetworkPlan& plan, int j, const ActivityTrace& trace, const LutPeConfig& lut) {
    const ResolvedLayer& layer = plan.weight_layer(j);
    const u64 NT = static_cast<u64>(trace.samples) * trace.timesteps;
    const u64 cout = static_cast<u64>(layer.out.c);
    OpCounts ops;
    if (layer.op.kind == WeightKind::conv) {
        const u64 k2 = static_cast<u64>(layer.op.geom.k) * layer.op.geom.k;
        const u64 pairs = NT * static_cast<u64>(layer.in.c) * cout;
        const u64 oh = static_cast<u64>(layer.out.h);
        const u64 ow = static_cast<u64>(layer.out.w);
        if (binary_input(layer)) {
            const u64 reads = pairs * oh * ceil_div(ow, static_cast<u64>(lut.sublut_bits)) * k2;
            ops.lut_reads = reads;
            ops.adds = reads;
        } else {
            ops.macs = pairs * oh * ow * k2;
        }
    } else {
        if (binary_input(layer)) {
            const SpikeTensor& in = trace.layers[static_cast<std::size_t>(j)].input;
            u64 reads = 0;
            for (int n = 0; n < trace.samples; ++n)
                for (int t = 0; t < trace.timesteps; ++t) reads += input_popcount(in, n, t) * cout;
            ops.lut_reads = reads;
            ops.adds = reads;
        } else {
            ops.macs = NT * flat_size(layer.in) * cout;
        }
    }
    return ops;
}

/// Taps of the transposed conv landing on grid position (y, x): upper-plane
/// positions whose forward window covers it.
template <typename F>
void for_each_upper(int y, int x, int upper_h, int upper_w, const ConvGeometry& g, F&& f) {
    for (int ky = 0; ky < g.k; ++ky) {
        const int ny = y + g.pad - ky;
        if (ny < 0 || ny % g.stride != 0 || ny / g.stride >= upper_h) continue;
        for (int kx = 0; kx < g.k; ++kx) {
            const int nx = x + g.pad - kx;
            if (nx < 0 || nx % g.stride != 0 || nx / g.stride >= upper_w) continue;
            f(ny / g.stride, nx / g.stride);
        }
    }
}

int tap_count(int y, int x, int upper_h, int upper_w, const ConvGeometry& g) {
    int taps = 0;
    for_each_upper(y, x, upper_h, upper_w, g, [&](int, int) { ++taps; });
    return taps;
}

/// Lower-layer rectangle covered by a grid tile when pools intervene.
TileRect lower_region(const TileRect& grid_tile, int factor, int h, int w) {
    TileRect r;
    r.y0 = grid_tile.y0 * factor;
    r.x0 = grid_tile.x0 * factor;
    r.h = std::min((grid_tile.y0 + grid_tile.h) * factor, h) - r.y0;
    r.w = std::min((grid_tile.x0 + grid_tile.w) * factor, w) - r.x0;
    return r;
}

struct BackwardShared {
    const ResolvedLayer& lower;
    int NT;
    int npools;
    bool sparse;
    bool compressed_u;
    double stored;
    const EngineConfig& cfg;

    /// Per element of the lower layer: u, s and (sparse) the spike-grad mask.
    double load_bytes(double elems) const {
        const double u = compressed_u && sparse ? 2.0 * elems * stored : 2.0 * elems;
        return u + bits_bytes(elems) + (sparse ? bits_bytes(elems) : 0.0);
    }
    double store_bytes(double elems) const { return 2.0 * elems + (sparse ? bits_bytes(elems) : 0.0); }
    u64 grad_cycles(double elems) const {
        return static_cast<u64>(std::ceil(elems * (1 + npools) / cfg.element_units));
    }
};

EngineCycles be_top(const NetworkPlan& plan, int j, const ActivityTrace& trace, const HardwareConfig& hw,
                    const BackwardShared& sh) {
    (void)trace;
    EngineCycles r;
    PhaseLog log(r, hw.memory.bytes_per_cycle(), sh.cfg, j);
    const ResolvedLayer& layer = plan.weight_layer(j);
    const double plane = static_cast<double>(layer.out.h) * layer.out.w;
    for (const Block& tb : blocks(sh.NT, sh.cfg.t_max))
        for (const Block& cb : blocks(layer.out.c, sh.cfg.pe_cols)) {
            const double elems = plane * cb.count * tb.count;
            const double in = sh.load_bytes(elems);
            log.add(0, sh.grad_cycles(elems), {0, in + sh.store_bytes(elems), 0}, in + sh.store_bytes(elems));
            ++r.grid_iterations;
        }
    return r;
}

EngineCycles be_fc(const NetworkPlan& plan, int j, const ActivityTrace& trace, const HardwareConfig& hw,
                   const BackwardShared& sh) {
    (void)trace;
    EngineCycles r;
    const EngineConfig& cfg = sh.cfg;
    PhaseLog log(r, hw.memory.bytes_per_cycle(), cfg, j);
    const ResolvedLayer& upper = plan.weight_layer(j + 1);
    const int inputs = static_cast<int>(flat_size(upper.in));
    const int outputs = upper.out.c;
    const double lower_per_input = static_cast<double>(flat_size(sh.lower.out)) / inputs;
    const auto rbs = blocks(outputs, cfg.pe_rows * cfg.parallelism);
    const auto tbs = blocks(sh.NT, cfg.t_max);
    for (const Block& cb : blocks(inputs, cfg.pe_cols))
        for (std::size_t ri = 0; ri < rbs.size(); ++ri)
            for (std::size_t ti = 0; ti < tbs.size(); ++ti) {
                const Block& rb = rbs[ri];
                const Block& tb = tbs[ti];
                const u64 compute = static_cast<u64>(tb.count) + static_cast<u64>(cfg.sync_cycles);
                u64 grad = 0;
                double bytes = 2.0 * rb.count * tb.count;
                if (ti == 0) bytes += 2.0 * rb.count * cb.count;
                const double region = std::ceil(cb.count * lower_per_input) * tb.count;
                double ws = bytes + 2.0 * cb.count * tb.count;
                if (ri == 0) {
                    bytes += sh.load_bytes(region);
                    ws += sh.load_bytes(region);
                }
                if (ri + 1 == rbs.size()) {
                    grad = sh.grad_cycles(region);
                    bytes += sh.store_bytes(region);
                }
                log.add(compute, grad, {0, bytes, 0}, ws);
                ++r.grid_iterations;
            }
    r.ops.macs = static_cast<u64>(sh.NT) * static_cast<u64>(inputs) * static_cast<u64>(outputs);
    return r;
}

EngineCycles be_conv(const NetworkPlan& plan, int j, const ActivityTrace& trace, const HardwareConfig& hw,
                     const BackwardShared& sh, const std::vector<const ResolvedLayer*>& pools) {
    EngineCycles r;
    const EngineConfig& cfg = sh.cfg;
    PhaseLog log(r, hw.memory.bytes_per_cycle(), cfg, j);
    const ResolvedLayer& upper = plan.weight_layer(j + 1);
    const ConvGeometry& g = upper.op.geom;
    const int Cg = upper.in.c;
    const int Hg = upper.in.h;
    const int Wg = upper.in.w;
    const int Cu = upper.out.c;
    const int Hu = upper.out.h;
    const int Wu = upper.out.w;
    const int P = Hg * Wg;
    const int gsz = cfg.parallelism;
    const int factor = pool_factor(pools);
    const double k2 = static_cast<double>(g.k) * g.k;

    const auto tiles = tile_feature_map(Hg, Wg, hw.tile);
    const auto cbs = blocks(Cg, cfg.pe_cols);
    const auto rbs = blocks(Cu, cfg.pe_rows);
    const std::size_t nrb = rbs.size();
    const std::size_t ncb = cbs.size();
    r.tiles = tiles.size();

    std::vector<int> taps(static_cast<std::size_t>(P));
    u64 taps_total = 0;
    for (int y = 0; y < Hg; ++y)
        for (int x = 0; x < Wg; ++x) {
            taps[static_cast<std::size_t>(y * Wg + x)] = tap_count(y, x, Hu, Wu, g);
            taps_total += static_cast<u64>(taps[static_cast<std::size_t>(y * Wg + x)]);
        }

    // Per tile, cycles of one (n, t) pair in the dense baseline (no masks).
    std::vector<u64> dense_pair(tiles.size(), 0);
    for (std::size_t ti = 0; ti < tiles.size(); ++ti) {
        const TileRect& tile = tiles[ti];
        std::vector<u64> per_pe(static_cast<std::size_t>(gsz), 0);
        int m = 0;
        for (int y = tile.y0; y < tile.y0 + tile.h; ++y)
            for (int x = tile.x0; x < tile.x0 + tile.w; ++x)
                per_pe[static_cast<std::size_t>(m++ % gsz)] += static_cast<u64>(taps[static_cast<std::size_t>(y * Wg + x)]);
        dense_pair[ti] = *std::max_element(per_pe.begin(), per_pe.end()) + static_cast<u64>(cfg.sync_cycles);
    }

    MaskTensor out_mask;
    if (sh.sparse) {
        out_mask = trace.layers[static_cast<std::size_t>(j)].spike_grad;
        for (const ResolvedLayer* pool : pools) out_mask = pool_or_mask(out_mask, pool->spec.pool);
    }
    const MaskTensor& in_mask = trace.layers[static_cast<std::size_t>(j + 1)].potential_grad;

    std::vector<std::uint16_t> wc(static_cast<std::size_t>(P) * Cu);
    std::vector<std::uint32_t> acc(static_cast<std::size_t>(Cg) * gsz * Cu);
    std::vector<u64> pair_cycles(tiles.size() * ncb * nrb);

    for (const Block& tb : blocks(sh.NT, cfg.t_max)) {
        std::fill(pair_cycles.begin(), pair_cycles.end(), 0);
        for (int p = tb.first; p < tb.first + tb.count; ++p) {
            const int n = p / trace.timesteps;
            const int t = p % trace.timesteps;
            if (!sh.sparse) {
                for (std::size_t ti = 0; ti < tiles.size(); ++ti)
                    for (std::size_t b = 0; b < ncb * nrb; ++b) pair_cycles[ti * ncb * nrb + b] += dense_pair[ti];
                continue;
            }
            // wc[x][co]: in-bounds window taps of grid position x with a nonzero upper gradient.
            std::fill(wc.begin(), wc.end(), 0);
            for (int co = 0; co < Cu; ++co) {
                const std::size_t base = in_mask.shape().plane_offset(n, t, co);
                for (int oy = 0; oy < Hu; ++oy)
                    for (int ox = 0; ox < Wu; ++ox) {
                        if (!in_mask.test(base + static_cast<std::size_t>(oy * Wu + ox))) continue;
                        for (int ky = 0; ky < g.k; ++ky) {
                            const int y = oy * g.stride - g.pad + ky;
                            if (y < 0 || y >= Hg) continue;
                            for (int kx = 0; kx < g.k; ++kx) {
                                const int x = ox * g.stride - g.pad + kx;
                                if (x < 0 || x >= Wg) continue;
                                ++wc[static_cast<std::size_t>(y * Wg + x) * Cu + co];
                            }
                        }
                    }
            }
            for (std::size_t ti = 0; ti < tiles.size(); ++ti) {
                const TileRect& tile = tiles[ti];
                std::fill(acc.begin(), acc.end(), 0);
                for (int ci = 0; ci < Cg; ++ci) {
                    const std::size_t base = out_mask.shape().plane_offset(n, t, ci);
                    int m = 0;
                    for (int y = tile.y0; y < tile.y0 + tile.h; ++y)
                        for (int x = tile.x0; x < tile.x0 + tile.w; ++x) {
                            const std::size_t pos = static_cast<std::size_t>(y * Wg + x);
                            if (!out_mask.test(base + pos)) continue;
                            std::uint32_t* dst = &acc[(static_cast<std::size_t>(ci) * gsz + m++ % gsz) * Cu];
                            const std::uint16_t* src = &wc[pos * Cu];
                            for (int co = 0; co < Cu; ++co) dst[co] += src[co];
                        }
                }
                for (std::uint32_t v : acc) r.ops.finder_tasks += v;
                const u64 scan = ceil_div(tile.size(), static_cast<u64>(cfg.scan_width));
                for (std::size_t ci_b = 0; ci_b < ncb; ++ci_b)
                    for (std::size_t ri = 0; ri < nrb; ++ri) {
                        std::uint32_t worst = 0;
                        for (int ci = cbs[ci_b].first; ci < cbs[ci_b].first + cbs[ci_b].count; ++ci)
                            for (int pe = 0; pe < gsz; ++pe) {
                                const std::uint32_t* row = &acc[(static_cast<std::size_t>(ci) * gsz + pe) * Cu];
                                for (int co = rbs[ri].first; co < rbs[ri].first + rbs[ri].count; ++co)
                                    worst = std::max(worst, row[co]);
                            }
                        pair_cycles[(ti * ncb + ci_b) * nrb + ri] +=
                            scan + (worst > 0 ? worst + static_cast<u64>(cfg.sync_cycles) : 0);
                    }
            }
        }
        for (std::size_t ti = 0; ti < tiles.size(); ++ti) {
            const TileRect& tile = tiles[ti];
            const TileRect halo = transposed_input_rect(tile, Hu, Wu, g);
            const TileRect region = lower_region(tile, factor, sh.lower.out.h, sh.lower.out.w);
            for (std::size_t ci_b = 0; ci_b < ncb; ++ci_b)
                for (std::size_t ri = 0; ri < nrb; ++ri) {
                    const Block& cb = cbs[ci_b];
                    const Block& rb = rbs[ri];
                    const u64 compute = pair_cycles[(ti * ncb + ci_b) * nrb + ri];
                    u64 grad = 0;
                    const double upper_in =
                        static_cast<double>(rb.count) * tb.count *
                        (2.0 * halo.size() + (sh.sparse ? bits_bytes(static_cast<double>(halo.size())) : 0.0));
                    double bytes = upper_in + k2 * rb.count * cb.count * 2;
                    double ws = bytes + 2.0 * cb.count * tb.count * tile.size();
                    const double lower = static_cast<double>(region.size()) * cb.count * tb.count;
                    if (ri == 0) {
                        bytes += sh.load_bytes(lower);
                        ws += sh.load_bytes(lower);
                    }
                    if (ri + 1 == nrb) {
                        grad = sh.grad_cycles(lower);
                        bytes += sh.store_bytes(lower);
                    }
                    log.add(compute, grad, {0, bytes, 0}, ws);
                }
        }
        r.grid_iterations += ncb * nrb;
    }
    if (sh.sparse) {
        r.ops.finder_scan_bits = static_cast<u64>(sh.NT) * static_cast<u64>(Cg) * static_cast<u64>(P);
        r.ops.macs = r.ops.finder_tasks;
    } else {
        r.ops.macs = static_cast<u64>(sh.NT) * static_cast<u64>(Cg) * static_cast<u64>(Cu) * taps_total;
    }
    return r;
}

void fill_bernoulli(BitTensor& t, double p, std::mt19937_64& rng) {
    if (p <= 0) return;
    const double clamped = std::min(p, 1.0);
    // Compare 53 random bits against the probability; exact for p = 1.
    const auto threshold = static_cast<u64>(std::ldexp(clamped, 53));
    for (std::size_t i = 0; i < t.size(); ++i)
        if ((rng() >> 11) < threshold) t.set(i);
}

}  // namespace

std::string_view to_string(EngineKind kind) noexcept {
    switch (kind) {
        case EngineKind::forward: return "forward";
        case EngineKind::backward: return "backward";
        case EngineKind::weight_update: return "weight_update";
    }
    return "unknown";
}

EngineConfig EngineConfig::forward_default() { return EngineConfig{}; }

EngineConfig EngineConfig::weight_update_default() {
    EngineConfig c;
    c.kind = EngineKind::weight_update;
    c.pe_rows = 10;
    c.pe_cols = 128;
    c.lut = LutPeConfig::weight_update_default();
    c.glb_bytes = 2684.0 * 1024;
    c.element_units = 0;
    c.finders = 0;
    return c;
}

EngineConfig EngineConfig::backward_default() {
    EngineConfig c;
    c.kind = EngineKind::backward;
    c.pe_rows = 16;
    c.pe_cols = 64;
    c.glb_bytes = 4840.5 * 1024;
    c.element_units = 64;
    c.finders = 64;
    return c;
}

void EngineConfig::validate() const {
    const std::string who = std::string(to_string(kind)) + " engine: ";
    if (pe_rows < 1 || pe_cols < 1) throw ConfigError(who + "PE array must be at least 1x1");
    if (parallelism < 1) throw ConfigError(who + "parallelism must be positive");
    if (t_max < 1) throw ConfigError(who + "t_max must be positive");
    if (!(glb_bytes > 0) || !std::isfinite(glb_bytes)) throw ConfigError(who + "GLB size must be positive");
    if (kind != EngineKind::backward) lut.validate();
    if (kind != EngineKind::weight_update && element_units < 1)
        throw ConfigError(who + "element-wise unit count must be positive");
    if (kind == EngineKind::backward) {
        if (scan_width < 1) throw ConfigError(who + "scan width must be positive");
        if (sync_cycles < 0) throw ConfigError(who + "sync cycles must be non-negative");
        if (finders < pe_cols) throw ConfigError(who + "need one output finder per column");
    }
}

void MemoryConfig::validate() const {
    if (!(bytes_per_second > 0) || !std::isfinite(bytes_per_second))
        throw ConfigError("memory: bandwidth must be positive");
    if (!(clock_hz > 0) || !std::isfinite(clock_hz)) throw ConfigError("memory: clock must be positive");
    if (spaces != 3) throw ConfigError("memory: the schedule needs exactly 3 memory spaces");
}

void TileSpec::validate() const {
    if (h < 1 || w < 1) throw ConfigError("tile: dimensions must be positive");
}

void HardwareConfig::validate() const {
    if (fe.kind != EngineKind::forward || wue.kind != EngineKind::weight_update || be.kind != EngineKind::backward)
        throw ConfigError("hardware: engine kinds are mixed up");
    fe.validate();
    wue.validate();
    be.validate();
    memory.validate();
    tile.validate();
}

std::vector<TileRect> tile_feature_map(int h, int w, const TileSpec& tile) {
    tile.validate();
    if (h < 1 || w < 1) throw ConfigError("tile: feature map must be non-empty");
    std::vector<TileRect> out;
    for (int y = 0; y < h; y += tile.h)
        for (int x = 0; x < w; x += tile.w) out.push_back({y, x, std::min(tile.h, h - y), std::min(tile.w, w - x)});
    return out;
}

TileRect conv_input_rect(const TileRect& out, int in_h, int in_w, const ConvGeometry& g) {
    const int y0 = std::max(0, out.y0 * g.stride - g.pad);
    const int x0 = std::max(0, out.x0 * g.stride - g.pad);
    const int y1 = std::min(in_h, (out.y0 + out.h - 1) * g.stride - g.pad + g.k);
    const int x1 = std::min(in_w, (out.x0 + out.w - 1) * g.stride - g.pad + g.k);
    return {y0, x0, std::max(0, y1 - y0), std::max(0, x1 - x0)};
}

TileRect transposed_input_rect(const TileRect& out, int upper_h, int upper_w, const ConvGeometry& g) {
    auto first = [&](int v) {
        const int num = v + g.pad - g.k + 1;
        return std::max(0, num <= 0 ? 0 : (num + g.stride - 1) / g.stride);
    };
    auto last = [&](int v, int size) { return std::min(size - 1, (v + g.pad) / g.stride); };
    const int y0 = first(out.y0);
    const int x0 = first(out.x0);
    const int y1 = last(out.y0 + out.h - 1, upper_h);
    const int x1 = last(out.x0 + out.w - 1, upper_w);
    return {y0, x0, std::max(0, y1 - y0 + 1), std::max(0, x1 - x0 + 1)};
}

OpCounts& OpCounts::operator+=(const OpCounts& o) noexcept {
    lut_reads += o.lut_reads;
    adds += o.adds;
    macs += o.macs;
    lut_build_adds += o.lut_build_adds;
    soma_ops += o.soma_ops;
    grad_ops += o.grad_ops;
    pool_ops += o.pool_ops;
    finder_scan_bits += o.finder_scan_bits;
    finder_tasks += o.finder_tasks;
    return *this;
}

std::uint64_t OpCounts::total() const noexcept {
    return lut_reads + adds + macs + lut_build_adds + soma_ops + grad_ops + pool_ops + finder_scan_bits +
           finder_tasks;
}

EngineCycles& EngineCycles::operator+=(const EngineCycles& o) noexcept {
    compute += o.compute;
    array += o.array;
    elementwise += o.elementwise;
    memory += o.memory;
    bound += o.bound;
    grid_iterations += o.grid_iterations;
    tiles += o.tiles;
    output_writes += o.output_writes;
    ops += o.ops;
    for (std::size_t s = 0; s < traffic.size(); ++s) traffic[s] += o.traffic[s];
    peak_working_set = std::max(peak_working_set, o.peak_working_set);
    dense_input = dense_input || o.dense_input;
    return *this;
}

ActivityTrace replay_trace(const NetworkPlan& plan, const std::vector<LayerForward>& forward,
                           const std::vector<LayerBackward>& backward) {
    const auto L = static_cast<std::size_t>(plan.num_weight_layers());
    if (forward.size() != L || backward.size() != L) throw ConfigError("replay: record does not match the network");
    ActivityTrace trace;
    trace.samples = forward.front().u.shape().n;
    trace.timesteps = forward.front().u.shape().t;
    for (std::size_t j = 0; j < L; ++j) {
        LayerMasks m;
        if (binary_input(plan.weight_layer(static_cast<int>(j)))) {
            const ActivationTensor& in = forward[j].input;
            m.input = SpikeTensor(in.shape());
            for (std::size_t i = 0; i < in.size(); ++i)
                if (in[i] != 0) m.input.set(i);
        }
        m.spike_grad = forward[j].spike_grad_mask;
        m.potential_grad = backward[j].potential_grad_mask;
        trace.layers.push_back(std::move(m));
    }
    return trace;
}

ActivityTrace synthetic_trace(const NetworkPlan& plan, int samples, int timesteps,
                              std::span<const LayerDensity> densities, std::uint64_t seed) {
    if (samples < 1 || timesteps < 1) throw ConfigError("synthetic: samples and timesteps must be positive");
    if (densities.size() != static_cast<std::size_t>(plan.num_weight_layers()))
        throw ConfigError("synthetic: need one density entry per weight layer");
    for (const LayerDensity& d : densities)
        for (double v : {d.input_spikes, d.spike_grad, d.potential_grad})
            if (!(v >= 0 && v <= 1)) throw ConfigError("synthetic: densities must lie in [0, 1]");
    std::mt19937_64 rng(seed);
    ActivityTrace trace{samples, timesteps, {}};
    for (int j = 0; j < plan.num_weight_layers(); ++j) {
        const ResolvedLayer& layer = plan.weight_layer(j);
        const LayerDensity& d = densities[static_cast<std::size_t>(j)];
        LayerMasks m;
        if (binary_input(layer)) {
            m.input = SpikeTensor(Shape{samples, timesteps, layer.in.c, layer.in.h, layer.in.w});
            fill_bernoulli(m.input, d.input_spikes, rng);
        }
        const Shape out{samples, timesteps, layer.out.c, layer.out.h, layer.out.w};
        m.spike_grad = MaskTensor(out, MaskKind::spike_grad);
        fill_bernoulli(m.spike_grad, d.spike_grad, rng);
        m.potential_grad = MaskTensor(out, MaskKind::potential_grad);
        fill_bernoulli(m.potential_grad, d.potential_grad, rng);
        trace.layers.push_back(std::move(m));
    }
    return trace;
}

std::vector<LayerDensity> measure_densities(const ActivityTrace& trace) {
    std::vector<LayerDensity> out;
    for (const LayerMasks& m : trace.layers)
        out.push_back({density(m.input), density(m.spike_grad), density(m.potential_grad)});
    return out;
}

EngineCycles fe_cycles(const NetworkPlan& plan, int j, const ActivityTrace& trace, const HardwareConfig& hw) {
    check_trace(plan, trace, j);
    const EngineConfig& cfg = hw.fe;
    const ResolvedLayer& layer = plan.weight_layer(j);
    const bool binary = binary_input(layer);
    const int NT = trace.samples * trace.timesteps;
    EngineCycles r;
    r.dense_input = !binary;
    r.ops = forward_ops(plan, j, trace, cfg.lut);
    PhaseLog log(r, hw.memory.bytes_per_cycle(), cfg, j);
    const int soma_rate = cfg.element_units * cfg.parallelism;

    if (layer.op.kind == WeightKind::conv) {
        const ConvGeometry& g = layer.op.geom;
        const double k2 = static_cast<double>(g.k) * g.k;
        const double stored = density(trace.layers[static_cast<std::size_t>(j)].spike_grad);
        const int lpes = forward_partition(g.k, cfg.lut).logical_pes(cfg.lut.subluts_per_pe);
        const u64 kernel_build = forward_build_adds(g.k, cfg.lut);
        const u64 build_cycles = binary ? static_cast<u64>(lpes) * SubLut::build_cost(cfg.lut.sublut_bits) : 0;
        const auto tiles = tile_feature_map(layer.out.h, layer.out.w, hw.tile);
        const auto ibs = blocks(layer.in.c, cfg.pe_rows);
        const auto cbs = blocks(layer.out.c, cfg.pe_cols);
        // FP16 inputs are 16x the size of spikes; fewer (sample, timestep)
        // pairs per grid iteration when t_max of them do not fit.
        std::size_t tile_max = 0;
        std::size_t halo_max = 0;
        for (const TileRect& tile : tiles) {
            tile_max = std::max(tile_max, tile.size());
            halo_max = std::max(halo_max, conv_input_rect(tile, layer.in.h, layer.in.w, g).size());
        }
        const double rows = std::min(cfg.pe_rows, layer.in.c);
        const double cols = std::min(cfg.pe_cols, layer.out.c);
        const double e_max = static_cast<double>(tile_max);
        const double per_t = rows * act_bytes(binary, static_cast<double>(halo_max)) + 2.0 * cols * e_max +
                             cols * (2 * bits_bytes(e_max) + 2 * e_max * stored);
        const double t_fit = std::floor((cfg.glb_bytes / 2 - k2 * rows * cols * 2) / per_t);
        if (t_fit < 1) throw ConfigError("forward engine: GLB too small for a single timestep at layer " + std::to_string(j));
        const auto tbs = blocks(NT, static_cast<int>(std::min<double>(t_fit, cfg.t_max)));
        r.tiles = tiles.size();
        r.grid_iterations = cbs.size() * tbs.size() * ibs.size();
        r.output_writes = cbs.size() * tbs.size();
        for (const Block& cb : cbs)
            for (const Block& tb : tbs)
                for (const TileRect& tile : tiles) {
                    const TileRect halo = conv_input_rect(tile, layer.in.h, layer.in.w, g);
                    const double elems = static_cast<double>(tile.size());
                    for (std::size_t bi = 0; bi < ibs.size(); ++bi) {
                        const Block& ib = ibs[bi];
                        const u64 windows = ceil_div(tile.size(), static_cast<u64>(cfg.parallelism));
                        const u64 compute = static_cast<u64>(tb.count) * windows *
                                          (binary ? static_cast<u64>(lpes) : static_cast<u64>(k2)) +
                                      build_cycles;
                        double bytes = static_cast<double>(ib.count) * tb.count *
                                           act_bytes(binary, static_cast<double>(halo.size())) +
                                       k2 * ib.count * cb.count * 2;
                        double ws = bytes + 2.0 * cb.count * tb.count * elems;
                        u64 soma = 0;
                        if (binary) r.ops.lut_build_adds += kernel_build * static_cast<u64>(ib.count) * cb.count;
                        if (bi + 1 == ibs.size()) {
                            const double out = cb.count * tb.count * (2 * bits_bytes(elems) + 2 * elems * stored);
                            bytes += out;
                            ws += out;
                            soma = ceil_div(static_cast<u64>(cb.count) * tb.count * tile.size(),
                                            static_cast<u64>(soma_rate));
                        }
                        log.add(compute, soma, {bytes, 0, 0}, ws);
                    }
                }
    } else {
        const int inputs = static_cast<int>(flat_size(layer.in));
        const int per_pe = cfg.lut.subluts_per_pe * cfg.lut.entries();
        const auto ibs = blocks(inputs, cfg.pe_rows * per_pe);
        const auto cbs = blocks(layer.out.c, cfg.pe_cols);
        const auto tbs = blocks(NT, cfg.t_max);
        r.tiles = 1;
        r.grid_iterations = cbs.size() * tbs.size() * ibs.size();
        r.output_writes = cbs.size() * tbs.size();
        const u64 per_pair = static_cast<u64>(cfg.lut.entries()) * (binary ? 1 : cfg.lut.subluts_per_pe);
        for (const Block& cb : cbs)
            for (std::size_t bi = 0; bi < ibs.size(); ++bi)
                for (std::size_t ti = 0; ti < tbs.size(); ++ti) {
                    const Block& ib = ibs[bi];
                    const Block& tb = tbs[ti];
                    const u64 compute = ceil_div(static_cast<u64>(tb.count), static_cast<u64>(cfg.parallelism)) * per_pair;
                    u64 soma = 0;
                    double bytes = tb.count * act_bytes(binary, ib.count);
                    if (ti == 0) bytes += 2.0 * ib.count * cb.count;
                    const double ws = bytes + 2.0 * ib.count * cb.count + 2.0 * cb.count * NT;
                    if (bi + 1 == ibs.size()) {
                        const double outs = static_cast<double>(cb.count) * tb.count;
                        bytes += 2 * outs + 2 * bits_bytes(outs);
                        soma = ceil_div(static_cast<u64>(outs), static_cast<u64>(soma_rate));
                    }
                    log.add(compute, soma, {bytes, 0, 0}, ws);
                }
    }

    bool first = true;
    for (const ResolvedLayer* pool : pools_after(plan, j)) {
        const double in = static_cast<double>(NT) * flat_size(pool->in);
        const double out = static_cast<double>(NT) * flat_size(pool->out);
        const double bytes = (first ? bits_bytes(in) : 2 * in) + 2 * out;
        log.add(0, ceil_div(static_cast<u64>(in), static_cast<u64>(soma_rate)), {bytes, 0, 0});
        first = false;
    }
    return r;
}

EngineCycles wue_cycles(const NetworkPlan& plan, int j, const ActivityTrace& trace, const HardwareConfig& hw) {
    check_trace(plan, trace, j);
    const EngineConfig& cfg = hw.wue;
    const ResolvedLayer& layer = plan.weight_layer(j);
    const bool binary = binary_input(layer);
    const int N = trace.samples;
    const int T = trace.timesteps;
    EngineCycles r;
    r.dense_input = !binary;
    r.ops = weight_update_ops(plan, j, trace, cfg.lut);
    PhaseLog log(r, hw.memory.bytes_per_cycle(), cfg, j);
    const double half = cfg.glb_bytes / 2;
    const auto tbs = blocks(T, cfg.pe_rows);
    const auto cbs = blocks(layer.out.c, cfg.pe_cols);
    const int rows = std::min(cfg.pe_rows, T);

    if (layer.op.kind == WeightKind::conv) {
        const ConvGeometry& g = layer.op.geom;
        const double k2 = static_cast<double>(g.k) * g.k;
        const auto tiles = tile_feature_map(layer.out.h, layer.out.w, hw.tile);
        std::size_t tile_max = 0;
        std::size_t halo_max = 0;
        for (const TileRect& tile : tiles) {
            tile_max = std::max(tile_max, tile.size());
            halo_max = std::max(halo_max, conv_input_rect(tile, layer.in.h, layer.in.w, g).size());
        }
        const double cols = std::min(cfg.pe_cols, layer.out.c);
        const double base = cols * rows * static_cast<double>(tile_max) * 2.0;
        const double per_channel = rows * act_bytes(binary, static_cast<double>(halo_max)) + k2 * cols * 2;
        const double fit = std::floor((half - base) / per_channel);
        if (fit < 1) throw ConfigError("weight update engine: GLB too small for a single input channel");
        const auto ibs = blocks(layer.in.c, static_cast<int>(std::min<double>(fit, layer.in.c)));
        r.tiles = tiles.size();
        r.grid_iterations = cbs.size() * ibs.size() * static_cast<u64>(N) * tbs.size();
        const int part = cfg.lut.sublut_bits;
        for (const Block& cb : cbs)
            for (const Block& ib : ibs) {
                for (const TileRect& tile : tiles) {
                    const TileRect halo = conv_input_rect(tile, layer.in.h, layer.in.w, g);
                    const u64 segs = static_cast<u64>(tile.h) * ceil_div(static_cast<u64>(tile.w), static_cast<u64>(cfg.lut.window_w));
                    const u64 parts = static_cast<u64>(tile.h) * ceil_div(static_cast<u64>(tile.w), static_cast<u64>(part));
                    u64 compute = 0;
                    if (binary)
                        compute = static_cast<u64>(ib.count) * ceil_div(segs * static_cast<u64>(k2), static_cast<u64>(cfg.parallelism)) +
                                  segs * SubLut::build_cost(part);
                    else
                        compute = static_cast<u64>(ib.count) * ceil_div(tile.size() * static_cast<u64>(k2), static_cast<u64>(cfg.parallelism));
                    for (int n = 0; n < N; ++n)
                        for (const Block& tb : tbs) {
                            const double grads = 2.0 * cb.count * tb.count * tile.size();
                            const double spikes = static_cast<double>(ib.count) * tb.count * act_bytes(binary, static_cast<double>(halo.size()));
                            if (binary) r.ops.lut_build_adds += parts * SubLut::build_cost(part) * static_cast<u64>(cb.count) * tb.count;
                            log.add(compute, 0, {0, grads + spikes, 0}, grads + spikes + k2 * ib.count * cb.count * 2);
                        }
                }
                log.add(0, 0, {0, 0, k2 * ib.count * cb.count * 2});
            }
    } else {
        const int inputs = static_cast<int>(flat_size(layer.in));
        const double cols = std::min(cfg.pe_cols, layer.out.c);
        const double base = cols * rows * 2.0;
        const double per_input = cols * 2.0 + rows * (binary ? 0.125 : 2.0);
        const double fit = std::floor((half - base) / per_input);
        if (fit < 1) throw ConfigError("weight update engine: GLB too small for a single input");
        const auto ibs = blocks(inputs, static_cast<int>(std::min<double>(fit, inputs)));
        r.tiles = 1;
        r.grid_iterations = cbs.size() * ibs.size() * static_cast<u64>(N) * tbs.size();
        for (const Block& cb : cbs)
            for (const Block& ib : ibs) {
                for (int n = 0; n < N; ++n)
                    for (const Block& tb : tbs) {
                        const double bytes = 2.0 * cb.count * tb.count + tb.count * act_bytes(binary, ib.count);
                        log.add(ceil_div(static_cast<u64>(ib.count), static_cast<u64>(cfg.parallelism)), 0, {0, bytes, 0},
                                bytes + 2.0 * ib.count * cb.count);
                    }
                log.add(0, 0, {0, 0, 2.0 * ib.count * cb.count});
            }
    }
    return r;
}

EngineCycles be_cycles(const NetworkPlan& plan, int j, const ActivityTrace& trace, const HardwareConfig& hw,
                       bool exploit_sparsity) {
    check_trace(plan, trace, j);
    const bool top = j + 1 == plan.num_weight_layers();
    if (!top) check_trace(plan, trace, j + 1);
    const ResolvedLayer& lower = plan.weight_layer(j);
    const auto pools = pools_after(plan, j);
    const BackwardShared sh{lower,
                            trace.samples * trace.timesteps,
                            static_cast<int>(pools.size()),
                            exploit_sparsity,
                            lower.op.kind == WeightKind::conv,
                            density(trace.layers[static_cast<std::size_t>(j)].spike_grad),
                            hw.be};
    EngineCycles r;
    if (top)
        r = be_top(plan, j, trace, hw, sh);
    else if (plan.weight_layer(j + 1).op.kind == WeightKind::fc)
        r = be_fc(plan, j, trace, hw, sh);
    else
        r = be_conv(plan, j, trace, hw, sh, pools);
    const u64 NT = static_cast<u64>(sh.NT);
    r.ops.grad_ops = NT * flat_size(lower.out);
    for (const ResolvedLayer* pool : pools) r.ops.pool_ops += NT * flat_size(pool->in);
    return r;
}

std::vector<LayerOps> replay_counters(const NetworkPlan& plan, const ActivityTrace& trace, const LutPeConfig& fe_lut,
                                      const LutPeConfig& wue_lut) {
    std::vector<LayerOps> out;
    const int L = plan.num_weight_layers();
    const u64 NT = static_cast<u64>(trace.samples) * trace.timesteps;
    for (int j = 0; j < L; ++j) check_trace(plan, trace, j);
    for (int j = 0; j < L; ++j) {
        LayerOps ops;
        ops.forward = forward_ops(plan, j, trace, fe_lut);
        ops.weight_update = weight_update_ops(plan, j, trace, wue_lut);
        const ResolvedLayer& lower = plan.weight_layer(j);
        const auto pools = pools_after(plan, j);
        OpCounts& be = ops.backward;
        be.grad_ops = NT * flat_size(lower.out);
        for (const ResolvedLayer* pool : pools) be.pool_ops += NT * flat_size(pool->in);
        if (j + 1 < L) {
            const ResolvedLayer& upper = plan.weight_layer(j + 1);
            if (upper.op.kind == WeightKind::fc) {
                be.macs = NT * flat_size(upper.in) * static_cast<u64>(upper.out.c);
            } else {
                // Direct definition: every (output id, nonzero input) pair inside a window.
                MaskTensor out_mask = trace.layers[static_cast<std::size_t>(j)].spike_grad;
                for (const ResolvedLayer* pool : pools) out_mask = pool_or_mask(out_mask, pool->spec.pool);
                const MaskTensor& in_mask = trace.layers[static_cast<std::size_t>(j + 1)].potential_grad;
                const Shape& gs = out_mask.shape();
                const Shape& us = in_mask.shape();
                const ConvGeometry& g = upper.op.geom;
                be.finder_scan_bits = NT * flat_size(gs);
                for (int n = 0; n < gs.n; ++n)
                    for (int t = 0; t < gs.t; ++t) {
                        std::vector<u64> window(gs.plane(), 0);
                        for (int y = 0; y < gs.h; ++y)
                            for (int x = 0; x < gs.w; ++x)
                                for (int co = 0; co < us.c; ++co)
                                    for_each_upper(y, x, us.h, us.w, g, [&](int oy, int ox) {
                                        if (in_mask.test(n, t, co, oy, ox)) ++window[static_cast<std::size_t>(y * gs.w + x)];
                                    });
                        for (int ci = 0; ci < gs.c; ++ci)
                            for (std::size_t i = 0; i < gs.plane(); ++i)
                                if (out_mask.test(gs.plane_offset(n, t, ci) + i)) be.finder_tasks += window[i];
                    }
                be.macs = be.finder_tasks;
            }
        }
        out.push_back(ops);
    }
    return out;
}

std::vector<LayerCycleReport> simulate_layers(const NetworkPlan& plan, const ActivityTrace& trace,
                                              const HardwareConfig& hw, bool exploit_sparsity) {
    hw.validate();
    std::vector<LayerCycleReport> out;
    for (int j = 0; j < plan.num_weight_layers(); ++j) {
        LayerCycleReport rep;
        rep.layer = j;
        rep.name = plan.weight_layer(j).spec.to_string();
        rep.forward = fe_cycles(plan, j, trace, hw);
        rep.backward = be_cycles(plan, j, trace, hw, exploit_sparsity);
        rep.weight_update = wue_cycles(plan, j, trace, hw);
        out.push_back(std::move(rep));
    }
    return out;
}

}  // namespace h2sim
