#include "h2sim/tensor.hpp"

#include <sstream>

namespace h2sim {

std::string Shape::to_string() const {
    std::ostringstream out;
    out << '(' << n << ',' << t << ',' << c << ',' << h << ',' << w << ')';
    return out.str();
}

void require_shape(const Shape& actual, const Shape& expected, const char* what) {
    if (!(actual == expected))
        throw ConfigError(std::string(what) + ": shape " + actual.to_string() + " does not match expected " +
                          expected.to_string());
}

std::vector<Real> WeightTensor::kernel_slice(int ci, int co) const {
    std::vector<Real> out(static_cast<std::size_t>(k_) * k_);
    for (int ky = 0; ky < k_; ++ky)
        for (int kx = 0; kx < k_; ++kx) out[static_cast<std::size_t>(ky) * k_ + kx] = at(ky, kx, ci, co);
    return out;
}

BitPlane extract_plane(const BitTensor& tensor, int n, int t, int c) {
    const Shape& s = tensor.shape();
    BitPlane plane(s.h, s.w);
    const std::size_t base = s.plane_offset(n, t, c);
    for (std::size_t i = 0; i < s.plane(); ++i)
        if (tensor.test(base + i)) plane.set(i);
    return plane;
}

void store_plane(BitTensor& tensor, int n, int t, int c, const BitPlane& plane) {
    const Shape& s = tensor.shape();
    if (plane.height() != s.h || plane.width() != s.w) throw ConfigError("store_plane: plane size mismatch");
    const std::size_t base = s.plane_offset(n, t, c);
    for (std::size_t i = 0; i < s.plane(); ++i) tensor.set(base + i, plane.test(i));
}

namespace {

template <typename Bits>
Bits slice_bits(const Bits& src, int t, Bits out) {
    const Shape& s = src.shape();
    const std::size_t block = static_cast<std::size_t>(s.c) * s.plane();
    for (int n = 0; n < s.n; ++n) {
        const std::size_t from = s.index(n, t, 0, 0, 0);
        const std::size_t to = out.shape().index(n, 0, 0, 0, 0);
        for (std::size_t i = 0; i < block; ++i)
            if (src.test(from + i)) out.set(to + i);
    }
    return out;
}

}  // namespace

SpikeTensor slice_t(const SpikeTensor& src, int t) {
    return slice_bits(src, t, SpikeTensor(src.shape().with_t(1)));
}

MaskTensor slice_t(const MaskTensor& src, int t) {
    return slice_bits(src, t, MaskTensor(src.shape().with_t(1), src.kind()));
}

void assign_t(BitTensor& dst, int t, const BitTensor& src) {
    const Shape& s = dst.shape();
    require_shape(src.shape(), s.with_t(1), "timestep slice");
    const std::size_t block = static_cast<std::size_t>(s.c) * s.plane();
    for (int n = 0; n < s.n; ++n) {
        const std::size_t to = s.index(n, t, 0, 0, 0);
        const std::size_t from = src.shape().index(n, 0, 0, 0, 0);
        for (std::size_t i = 0; i < block; ++i) dst.set(to + i, src.test(from + i));
    }
}

ActivationTensor to_activation(const SpikeTensor& spikes) {
    ActivationTensor out(spikes.shape());
    for (std::size_t i = 0; i < spikes.size(); ++i)
        if (spikes.test(i)) out[i] = 1;
    return out;
}

}  // namespace h2sim
