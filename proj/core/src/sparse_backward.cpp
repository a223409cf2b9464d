#include "h2sim/sparse_backward.hpp"

#include <bit>
#include <string>

namespace h2sim {

BackwardStats& BackwardStats::operator+=(const BackwardStats& o) noexcept {
    finder_scan_bits += o.finder_scan_bits;
    finder_tasks += o.finder_tasks;
    macs += o.macs;
    grad_ops += o.grad_ops;
    pool_ops += o.pool_ops;
    return *this;
}

std::vector<OutputIdBuffer> split_output_ids(const BitPlane& mask, int num_buffers, BackwardStats* stats) {
    if (num_buffers < 1) throw ConfigError("finder: need at least one output buffer");
    std::vector<OutputIdBuffer> buffers(static_cast<std::size_t>(num_buffers));
    for (int b = 0; b < num_buffers; ++b) buffers[static_cast<std::size_t>(b)].index = b;
    std::size_t next = 0;
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x)
            if (mask.get(y, x)) {
                buffers[next].ids.push_back({y, x});
                next = (next + 1) % buffers.size();
            }
    if (stats) stats->finder_scan_bits += mask.size();
    return buffers;
}

OutputFinderResult effectual_output_finder(const BitPlane& mask, const CompressedPotentialTile& cu, int num_buffers,
                                           BackwardStats* stats) {
    if (cu.mask.height() != mask.height() || cu.mask.width() != mask.width())
        throw CorruptedStateError("finder: compressed tile size differs from the mask");
    if (!(cu.mask == mask)) throw CorruptedStateError("finder: compressed tile mask differs from the spike-grad mask");
    cu.check();
    return {split_output_ids(mask, num_buffers, stats), cu.decompress()};
}

bool window_input(PlaneCoord out_id, PlaneCoord w_id, int in_h, int in_w, const ConvGeometry& geom,
                  PlaneCoord& in_id) noexcept {
    const int ky = geom.k - 1 - w_id.y;
    const int kx = geom.k - 1 - w_id.x;
    const int ny = out_id.y + geom.pad - ky;
    const int nx = out_id.x + geom.pad - kx;
    if (ny < 0 || nx < 0 || ny % geom.stride != 0 || nx % geom.stride != 0) return false;
    in_id = {ny / geom.stride, nx / geom.stride};
    return in_id.y < in_h && in_id.x < in_w;
}

std::uint64_t window_tag(PlaneCoord out_id, const BitPlane& in_mask, const ConvGeometry& geom) {
    if (geom.k > 8) throw ConfigError("finder: window tags support kernels up to 8x8");
    std::uint64_t tag = 0;
    PlaneCoord in_id;
    for (int wy = 0; wy < geom.k; ++wy)
        for (int wx = 0; wx < geom.k; ++wx)
            if (window_input(out_id, {wy, wx}, in_mask.height(), in_mask.width(), geom, in_id) &&
                in_mask.get(in_id.y, in_id.x))
                tag |= std::uint64_t{1} << (wy * geom.k + wx);
    return tag;
}

std::vector<ConvTask> effectual_io_finder(PlaneCoord out_id, const BitPlane& in_mask, const ConvGeometry& geom) {
    std::uint64_t tag = window_tag(out_id, in_mask, geom);
    std::vector<ConvTask> tasks;
    tasks.reserve(static_cast<std::size_t>(std::popcount(tag)));
    while (tag != 0) {
        const int bit = std::countr_zero(tag);
        tag &= tag - 1;
        const PlaneCoord w_id{bit / geom.k, bit % geom.k};
        PlaneCoord in_id;
        window_input(out_id, w_id, in_mask.height(), in_mask.width(), geom, in_id);
        tasks.push_back({out_id, w_id, in_id});
    }
    return tasks;
}

std::vector<std::vector<ConvTask>> generate_tasks(const std::vector<OutputIdBuffer>& buffers, const BitPlane& in_mask,
                                                  const ConvGeometry& geom, BackwardStats* stats) {
    std::vector<std::vector<ConvTask>> streams(buffers.size());
    for (std::size_t b = 0; b < buffers.size(); ++b)
        for (const PlaneCoord& id : buffers[b].ids) {
            auto tasks = effectual_io_finder(id, in_mask, geom);
            if (stats) stats->finder_tasks += tasks.size();
            streams[b].insert(streams[b].end(), tasks.begin(), tasks.end());
        }
    return streams;
}

std::vector<Real> sparse_conv_execute(const std::vector<std::vector<ConvTask>>& tasks, std::span<const Real> kernel,
                                      const ConvGeometry& geom, std::span<const Real> grad_u, int in_h, int in_w,
                                      int out_h, int out_w, Precision precision, BackwardStats* stats) {
    const int k = geom.k;
    if (kernel.size() != static_cast<std::size_t>(k) * k) throw ConfigError("sparse conv: kernel size mismatch");
    if (grad_u.size() != static_cast<std::size_t>(in_h) * in_w) throw ConfigError("sparse conv: gradient plane size");
    std::vector<Real> ps(static_cast<std::size_t>(out_h) * out_w, 0);
    std::uint64_t macs = 0;
    for (const auto& stream : tasks)
        for (const ConvTask& task : stream) {
            if (task.out_id.y < 0 || task.out_id.y >= out_h || task.out_id.x < 0 || task.out_id.x >= out_w ||
                task.in_id.y < 0 || task.in_id.y >= in_h || task.in_id.x < 0 || task.in_id.x >= in_w)
                throw CorruptedStateError("sparse conv: task coordinates out of range");
            const Real w = kernel[static_cast<std::size_t>(k - 1 - task.w_id.y) * k + (k - 1 - task.w_id.x)];
            const Real g = grad_u[static_cast<std::size_t>(task.in_id.y) * in_w + task.in_id.x];
            Real& o = ps[static_cast<std::size_t>(task.out_id.y) * out_w + task.out_id.x];
            o = quantize(o + quantize(w * g, precision), precision);
            ++macs;
        }
    if (stats) stats->macs += macs;
    return ps;
}

GradUnitResult grad_unit(std::span<const Real> ps, std::span<const Real> u_dense, std::span<const Real> grad_u_next,
                         const BitPlane& s, const BitPlane& spike_grad_mask, const LifParams& p, Precision precision,
                         BackwardStats* stats) {
    const std::size_t size = s.size();
    if (ps.size() != size || u_dense.size() != size || grad_u_next.size() != size || spike_grad_mask.size() != size)
        throw ConfigError("grad unit: operand size mismatch");
    GradUnitResult r{std::vector<Real>(size, 0), BitPlane(s.height(), s.width())};
    const Real alpha = static_cast<Real>(p.alpha);
    const Real beta = static_cast<Real>(p.beta);
    for (std::size_t i = 0; i < size; ++i) {
        const Real gn = grad_u_next[i];
        const Real keep = s.test(i) ? Real{0} : quantize(gn * alpha, precision);
        Real gu = keep;
        if (spike_grad_mask.test(i)) {
            const Real gs = quantize(quantize(gn * quantize(-alpha * u_dense[i], precision), precision) + ps[i],
                                     precision);
            gu = quantize(keep + quantize(gs * beta, precision), precision);
        }
        r.grad_u[i] = gu;
        if (gu != 0) r.mask.set(i);
    }
    if (stats) stats->grad_ops += size;
    return r;
}

std::vector<Real> fc_backward_mode(std::span<const Real> grad_u_upper, std::span<const Real> w, int inputs,
                                   Precision precision, BackwardStats* stats) {
    const std::size_t outputs = grad_u_upper.size();
    if (inputs < 0 || w.size() != static_cast<std::size_t>(inputs) * outputs)
        throw ConfigError("fc backward: weight matrix does not match inputs x outputs");
    std::vector<Real> ps(static_cast<std::size_t>(inputs), 0);
    for (int i = 0; i < inputs; ++i) {
        Real acc = 0;
        const Real* row = w.data() + static_cast<std::size_t>(i) * outputs;
        for (std::size_t j = 0; j < outputs; ++j) acc = quantize(acc + quantize(grad_u_upper[j] * row[j], precision), precision);
        ps[static_cast<std::size_t>(i)] = acc;
    }
    if (stats) stats->macs += static_cast<std::uint64_t>(inputs) * outputs;
    return ps;
}

}  // namespace h2sim
