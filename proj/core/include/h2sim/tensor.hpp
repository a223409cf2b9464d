#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "h2sim/error.hpp"

namespace h2sim {

using Real = float;

/// Index space shared by every activation-like tensor: (sample, timestep,
/// channel, row, col), row-major with col fastest.
struct Shape {
    int n = 1;
    int t = 1;
    int c = 1;
    int h = 1;
    int w = 1;

    std::size_t size() const noexcept {
        return static_cast<std::size_t>(n) * t * c * h * w;
    }
    std::size_t plane() const noexcept { return static_cast<std::size_t>(h) * w; }
    std::size_t index(int in, int it, int ic, int iy, int ix) const noexcept {
        return (((static_cast<std::size_t>(in) * t + it) * c + ic) * h + iy) * w + ix;
    }
    /// Offset of the (n, t, c) plane.
    std::size_t plane_offset(int in, int it, int ic) const noexcept { return index(in, it, ic, 0, 0); }

    Shape with_t(int timesteps) const noexcept { return {n, timesteps, c, h, w}; }
    bool valid() const noexcept { return n > 0 && t > 0 && c > 0 && h > 0 && w > 0; }

    friend bool operator==(const Shape&, const Shape&) = default;
    std::string to_string() const;
};

void require_shape(const Shape& actual, const Shape& expected, const char* what);

/// Packed bit payload, 64 elements per word, element i in bit (i % 64) of
/// word (i / 64). Padding bits past size() are always zero.
class BitTensor {
public:
    static constexpr int kWordBits = 64;

    BitTensor() = default;
    explicit BitTensor(Shape shape)
        : shape_(shape), words_((shape.size() + kWordBits - 1) / kWordBits, 0) {}

    const Shape& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return shape_.size(); }
    std::span<const std::uint64_t> words() const noexcept { return words_; }

    bool test(std::size_t i) const noexcept { return (words_[i / kWordBits] >> (i % kWordBits)) & 1u; }
    bool test(int in, int it, int ic, int iy, int ix) const noexcept {
        return test(shape_.index(in, it, ic, iy, ix));
    }
    void set(std::size_t i, bool value = true) noexcept {
        const std::uint64_t bit = std::uint64_t{1} << (i % kWordBits);
        if (value)
            words_[i / kWordBits] |= bit;
        else
            words_[i / kWordBits] &= ~bit;
    }

    std::size_t popcount() const noexcept {
        std::size_t total = 0;
        for (auto word : words_) total += static_cast<std::size_t>(std::popcount(word));
        return total;
    }
    /// Fraction of zero elements.
    double sparsity() const noexcept {
        return size() == 0 ? 0.0 : 1.0 - static_cast<double>(popcount()) / static_cast<double>(size());
    }

    friend bool operator==(const BitTensor& a, const BitTensor& b) {
        return a.shape_ == b.shape_ && a.words_ == b.words_;
    }

protected:
    Shape shape_;
    std::vector<std::uint64_t> words_;
};

class SpikeTensor : public BitTensor {
public:
    using BitTensor::BitTensor;
};

enum class MaskKind { spike_grad, potential_grad };

/// Gradient bitmap: spike_grad marks neurons whose potential fell inside the
/// surrogate window, potential_grad marks nonzero potential gradients.
class MaskTensor : public BitTensor {
public:
    MaskTensor() = default;
    MaskTensor(Shape shape, MaskKind kind) : BitTensor(shape), kind_(kind) {}

    MaskKind kind() const noexcept { return kind_; }

    friend bool operator==(const MaskTensor& a, const MaskTensor& b) {
        return a.kind_ == b.kind_ && static_cast<const BitTensor&>(a) == static_cast<const BitTensor&>(b);
    }

private:
    MaskKind kind_ = MaskKind::spike_grad;
};

/// Real-valued tensor over the activation index space. The tag keeps
/// potentials, gradients and real activations from being mixed up.
template <typename Tag>
class DenseTensor {
public:
    DenseTensor() = default;
    explicit DenseTensor(Shape shape, Real fill = 0) : shape_(shape), data_(shape.size(), fill) {}

    const Shape& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return data_.size(); }

    Real& operator[](std::size_t i) noexcept { return data_[i]; }
    Real operator[](std::size_t i) const noexcept { return data_[i]; }
    Real& at(int in, int it, int ic, int iy, int ix) noexcept { return data_[shape_.index(in, it, ic, iy, ix)]; }
    Real at(int in, int it, int ic, int iy, int ix) const noexcept {
        return data_[shape_.index(in, it, ic, iy, ix)];
    }

    std::span<Real> values() noexcept { return data_; }
    std::span<const Real> values() const noexcept { return data_; }

    bool all_finite() const noexcept {
        for (Real v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    friend bool operator==(const DenseTensor&, const DenseTensor&) = default;

private:
    Shape shape_;
    std::vector<Real> data_;
};

struct PotentialTag {};
struct GradTag {};
struct ActivationTag {};

using PotentialTensor = DenseTensor<PotentialTag>;
using GradTensor = DenseTensor<GradTag>;
/// Real-valued layer input (encoded image or pooled spikes).
using ActivationTensor = DenseTensor<ActivationTag>;

/// Weights (or weight gradients) laid out as k x k x Cin x Cout, Cout fastest.
/// FC layers use k = 1.
class WeightTensor {
public:
    WeightTensor() = default;
    WeightTensor(int k, int cin, int cout, Real fill = 0)
        : k_(k), cin_(cin), cout_(cout), data_(static_cast<std::size_t>(k) * k * cin * cout, fill) {}

    int kernel() const noexcept { return k_; }
    int in_channels() const noexcept { return cin_; }
    int out_channels() const noexcept { return cout_; }
    std::size_t size() const noexcept { return data_.size(); }

    std::size_t index(int ky, int kx, int ci, int co) const noexcept {
        return ((static_cast<std::size_t>(ky) * k_ + kx) * cin_ + ci) * cout_ + co;
    }
    Real& at(int ky, int kx, int ci, int co) noexcept { return data_[index(ky, kx, ci, co)]; }
    Real at(int ky, int kx, int ci, int co) const noexcept { return data_[index(ky, kx, ci, co)]; }
    Real& operator[](std::size_t i) noexcept { return data_[i]; }
    Real operator[](std::size_t i) const noexcept { return data_[i]; }

    std::span<Real> values() noexcept { return data_; }
    std::span<const Real> values() const noexcept { return data_; }

    /// Row-major k x k kernel for one (ci, co) pair.
    std::vector<Real> kernel_slice(int ci, int co) const;

    bool all_finite() const noexcept {
        for (Real v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }
    bool same_layout(const WeightTensor& o) const noexcept {
        return k_ == o.k_ && cin_ == o.cin_ && cout_ == o.cout_;
    }

    friend bool operator==(const WeightTensor&, const WeightTensor&) = default;

private:
    int k_ = 0;
    int cin_ = 0;
    int cout_ = 0;
    std::vector<Real> data_;
};

/// One h x w bit plane (a single (n, t, c) slice). Reads outside the plane
/// return 0, which models zero padding.
class BitPlane {
public:
    BitPlane() = default;
    BitPlane(int h, int w) : h_(h), w_(w), bits_((static_cast<std::size_t>(h) * w + 63) / 64, 0) {}

    int height() const noexcept { return h_; }
    int width() const noexcept { return w_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(h_) * w_; }

    bool get(int y, int x) const noexcept {
        if (y < 0 || x < 0 || y >= h_ || x >= w_) return false;
        return test(static_cast<std::size_t>(y) * w_ + x);
    }
    bool test(std::size_t i) const noexcept { return (bits_[i / 64] >> (i % 64)) & 1u; }
    void set(int y, int x, bool value = true) noexcept { set(static_cast<std::size_t>(y) * w_ + x, value); }
    void set(std::size_t i, bool value = true) noexcept {
        const std::uint64_t bit = std::uint64_t{1} << (i % 64);
        if (value)
            bits_[i / 64] |= bit;
        else
            bits_[i / 64] &= ~bit;
    }
    std::size_t popcount() const noexcept {
        std::size_t total = 0;
        for (auto word : bits_) total += static_cast<std::size_t>(std::popcount(word));
        return total;
    }

    friend bool operator==(const BitPlane&, const BitPlane&) = default;

private:
    int h_ = 0;
    int w_ = 0;
    std::vector<std::uint64_t> bits_;
};

BitPlane extract_plane(const BitTensor& tensor, int n, int t, int c);
void store_plane(BitTensor& tensor, int n, int t, int c, const BitPlane& plane);

template <typename Tag>
std::span<const Real> plane_view(const DenseTensor<Tag>& tensor, int n, int t, int c) {
    return tensor.values().subspan(tensor.shape().plane_offset(n, t, c), tensor.shape().plane());
}
template <typename Tag>
std::span<Real> plane_view(DenseTensor<Tag>& tensor, int n, int t, int c) {
    return tensor.values().subspan(tensor.shape().plane_offset(n, t, c), tensor.shape().plane());
}

/// Copies timestep t out of a (N, T, ...) tensor as an (N, 1, ...) tensor.
template <typename Tag>
DenseTensor<Tag> slice_t(const DenseTensor<Tag>& src, int t) {
    const Shape& s = src.shape();
    DenseTensor<Tag> out(s.with_t(1));
    const std::size_t block = static_cast<std::size_t>(s.c) * s.plane();
    for (int n = 0; n < s.n; ++n) {
        const std::size_t from = s.index(n, t, 0, 0, 0);
        const std::size_t to = out.shape().index(n, 0, 0, 0, 0);
        for (std::size_t i = 0; i < block; ++i) out[to + i] = src[from + i];
    }
    return out;
}

template <typename Tag>
void assign_t(DenseTensor<Tag>& dst, int t, const DenseTensor<Tag>& src) {
    const Shape& s = dst.shape();
    require_shape(src.shape(), s.with_t(1), "timestep slice");
    const std::size_t block = static_cast<std::size_t>(s.c) * s.plane();
    for (int n = 0; n < s.n; ++n) {
        const std::size_t to = s.index(n, t, 0, 0, 0);
        const std::size_t from = src.shape().index(n, 0, 0, 0, 0);
        for (std::size_t i = 0; i < block; ++i) dst[to + i] = src[from + i];
    }
}

SpikeTensor slice_t(const SpikeTensor& src, int t);
MaskTensor slice_t(const MaskTensor& src, int t);
void assign_t(BitTensor& dst, int t, const BitTensor& src);

/// Real-valued view of a spike tensor (1.0 where a spike is present).
ActivationTensor to_activation(const SpikeTensor& spikes);

/// Largest |a - b| over all elements divided by max(|b|_inf, floor).
template <typename A, typename B>
double max_relative_error(const A& a, const B& b, double floor = 1e-12) {
    const auto va = a.values();
    const auto vb = b.values();
    if (va.size() != vb.size()) return std::numeric_limits<double>::infinity();
    double diff = 0.0;
    double scale = floor;
    for (std::size_t i = 0; i < va.size(); ++i) {
        diff = std::max(diff, std::fabs(static_cast<double>(va[i]) - vb[i]));
        scale = std::max(scale, std::fabs(static_cast<double>(vb[i])));
    }
    return diff / scale;
}

}  // namespace h2sim
