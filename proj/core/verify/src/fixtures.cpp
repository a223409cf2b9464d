#include "h2sim/verify/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace h2sim::verify {

namespace {

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

bool coin(std::mt19937_64& rng, double p) { return std::bernoulli_distribution(p)(rng); }

// Half steps; zero with probability `sparse` so that wide layers stay near threshold.
Real half_step(std::mt19937_64& rng, double sparse) {
    if (coin(rng, sparse)) return 0.0f;
    return static_cast<Real>(uniform_int(rng, -2, 3)) * 0.5f;
}

}  // namespace

std::string Fixture::description() const {
    return format_network(net.layers) + " in " + std::to_string(net.in_c) + "x" + std::to_string(net.in_h) + "x" +
           std::to_string(net.in_w) + " T=" + std::to_string(net.timesteps) +
           " batch=" + std::to_string(net.sub_batch) + "x" + std::to_string(net.batch_group) +
           (integer_valued ? " (integer)" : " (float)");
}

Fixture random_fixture(std::mt19937_64& rng, bool integer_valued, const FixtureLimits& limits) {
    Fixture f;
    f.integer_valued = integer_valued;
    NetworkSpec& net = f.net;
    net.in_c = uniform_int(rng, 1, 3);
    net.in_h = uniform_int(rng, 2, limits.max_spatial);
    net.in_w = uniform_int(rng, 2, limits.max_spatial);
    if (integer_valued) {
        const int choices[] = {1, 2, 4};
        net.timesteps = choices[uniform_int(rng, 0, 2)];
        while (net.timesteps > limits.max_timesteps) net.timesteps /= 2;
        net.lif = LifParams{0.5, 1.0, -1.0, 2.0, 1.0};
    } else {
        net.timesteps = uniform_int(rng, 1, limits.max_timesteps);
        LifParams p;
        p.alpha = uniform(rng, 0.3, 1.0);
        p.th_f = uniform(rng, 0.3, 0.8);
        p.th_l = uniform(rng, -0.2, 0.1);
        p.th_r = p.th_l + uniform(rng, 0.8, 1.6);
        p.beta = uniform(rng, 0.5, 1.5);
        net.lif = p;
    }
    net.sub_batch = uniform_int(rng, 1, 2);
    net.batch_group = uniform_int(rng, 1, 2);

    const int weight_layers = uniform_int(rng, 1, limits.max_weight_layers);
    const bool encoding = weight_layers > 1 && coin(rng, 0.3);
    // Deep or real-input nets over four timesteps push the first layer's
    // weight-gradient sums past 24 significant bits, where float accumulation
    // stops being exact.
    if (integer_valued && (weight_layers >= 3 || encoding)) net.timesteps = std::min(net.timesteps, 2);
    int h = net.in_h;
    int w = net.in_w;
    for (int l = 0; l + 1 < weight_layers; ++l) {
        const int ks[] = {1, 3, 3, 5};
        const int k = ks[uniform_int(rng, 0, 3)];
        const int stride = (std::min(h, w) >= 4 && coin(rng, 0.2)) ? 2 : 1;
        net.layers.push_back(LayerSpec::conv(uniform_int(rng, 1, limits.max_channels), k, stride, l == 0 && encoding));
        const ConvGeometry g = same_geometry(k, stride);
        h = g.out_size(h);
        w = g.out_size(w);
        if (std::min(h, w) >= 2 && coin(rng, 0.3)) {
            net.layers.push_back(LayerSpec::avg_pool(2));
            h = pooled_size(h, 2);
            w = pooled_size(w, 2);
        }
    }
    net.layers.push_back(LayerSpec::fc(uniform_int(rng, 2, 4)));

    const NetworkPlan plan = resolve(net);
    for (int j = 0; j < plan.num_weight_layers(); ++j) {
        const ResolvedLayer& layer = plan.weight_layer(j);
        const int k = layer.op.geom.k;
        const int cin = layer.spec.kind == LayerKind::fc ? layer.in.c * layer.in.h * layer.in.w : layer.in.c;
        WeightTensor wt(k, cin, layer.spec.out_channels);
        const double fan_in = static_cast<double>(k * k * cin);
        const double scale = 1.5 / std::sqrt(fan_in);
        const double sparse = std::clamp(1.0 - 4.0 / fan_in, 0.0, 0.9);
        for (std::size_t i = 0; i < wt.size(); ++i)
            wt[i] = integer_valued ? half_step(rng, sparse) : static_cast<Real>(uniform(rng, -0.8, 1.2) * scale);
        f.weights.push_back(std::move(wt));
    }

    const bool real_input = net.layers.front().is_encoding;
    const int B = net.batch_size();
    const Shape in{B, real_input ? 1 : net.timesteps, net.in_c, net.in_h, net.in_w};
    f.batch.input = ActivationTensor(in);
    const double density = uniform(rng, 0.2, 0.7);
    for (std::size_t i = 0; i < f.batch.input.size(); ++i) {
        if (real_input)
            f.batch.input[i] = integer_valued ? static_cast<Real>(uniform_int(rng, 0, 2)) * 0.5f
                                              : static_cast<Real>(uniform(rng, 0.0, 1.0));
        else
            f.batch.input[i] = coin(rng, density) ? 1.0f : 0.0f;
    }
    for (int n = 0; n < B; ++n) f.batch.labels.push_back(uniform_int(rng, 0, plan.num_classes - 1));
    return f;
}

BitPlane random_plane(std::mt19937_64& rng, int h, int w, double density) {
    BitPlane plane(h, w);
    std::bernoulli_distribution bit(density);
    for (std::size_t i = 0; i < plane.size(); ++i)
        if (bit(rng)) plane.set(i);
    return plane;
}

double relative_error(std::span<const Real> a, std::span<const double> b) {
    if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
    double diff = 0.0;
    double scale = 1e-12;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff = std::max(diff, std::fabs(static_cast<double>(a[i]) - b[i]));
        scale = std::max(scale, std::fabs(b[i]));
    }
    return diff / scale;
}

bool exactly_equal(std::span<const Real> a, std::span<const double> b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (static_cast<double>(a[i]) != b[i]) return false;
    return true;
}

bool bits_equal(const BitTensor& a, std::span<const double> b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < b.size(); ++i)
        if (a.test(i) != (b[i] != 0.0)) return false;
    return true;
}

}  // namespace h2sim::verify
