#include "h2sim/verify/oracle.hpp"

#include <string>

namespace h2sim::verify {

namespace {

class Tape {
public:
    int leaf(double v) { return push({v, -1, -1, 0, 0}); }
    int add(int a, int b) { return push({value(a) + value(b), a, b, 1, 1}); }
    int mul(int a, int b) { return push({value(a) * value(b), a, b, value(b), value(a)}); }
    int scale(int a, double c) { return push({value(a) * c, a, -1, c, 0}); }
    int one_minus(int a) { return push({1.0 - value(a), a, -1, -1, 0}); }
    /// Heaviside step with a caller-supplied surrogate derivative.
    int step(int u, double threshold, double surrogate) {
        return push({value(u) >= threshold ? 1.0 : 0.0, u, -1, surrogate, 0});
    }

    double value(int i) const { return nodes_[static_cast<std::size_t>(i)].v; }

    std::vector<double> gradient(int output) const {
        std::vector<double> g(nodes_.size(), 0.0);
        g[static_cast<std::size_t>(output)] = 1.0;
        for (std::size_t i = nodes_.size(); i-- > 0;) {
            const Node& n = nodes_[i];
            if (g[i] == 0.0) continue;
            if (n.a >= 0) g[static_cast<std::size_t>(n.a)] += n.da * g[i];
            if (n.b >= 0) g[static_cast<std::size_t>(n.b)] += n.db * g[i];
        }
        return g;
    }

private:
    struct Node {
        double v;
        int a, b;
        double da, db;
    };
    int push(Node n) {
        nodes_.push_back(n);
        return static_cast<int>(nodes_.size() - 1);
    }
    std::vector<Node> nodes_;
};

/// Node ids of an activation block (n, T, C, H, W), flat.
struct Block {
    int n, t, c, h, w;
    std::vector<int> ids;
    int& at(int in, int it, int ic, int iy, int ix) {
        return ids[static_cast<std::size_t>((((in * t + it) * c + ic) * h + iy) * w + ix)];
    }
};

}  // namespace

OracleResult oracle_sub_batch(const NetworkSpec& net, const Weights& weights, const ActivationTensor& input,
                              std::span<const int> labels) {
    const LifParams& p = net.lif;
    const int N = input.shape().n;
    const int T = net.timesteps;
    Tape tape;
    const int zero = tape.leaf(0.0);

    Block x{N, T, net.in_c, net.in_h, net.in_w, {}};
    for (std::size_t i = 0; i < input.size(); ++i) x.ids.push_back(tape.leaf(input[i]));

    std::vector<std::vector<int>> weight_ids;
    std::vector<std::vector<int>> u_ids;
    std::vector<Block> spikes;

    std::size_t wi = 0;
    for (const LayerSpec& layer : net.layers) {
        if (layer.kind == LayerKind::avg_pool) {
            const int P = layer.pool;
            Block y{N, T, x.c, (x.h + P - 1) / P, (x.w + P - 1) / P, {}};
            y.ids.resize(static_cast<std::size_t>(N) * T * y.c * y.h * y.w);
            for (int n = 0; n < N; ++n)
                for (int t = 0; t < T; ++t)
                    for (int c = 0; c < y.c; ++c)
                        for (int oy = 0; oy < y.h; ++oy)
                            for (int ox = 0; ox < y.w; ++ox) {
                                int sum = zero;
                                for (int dy = 0; dy < P; ++dy)
                                    for (int dx = 0; dx < P; ++dx) {
                                        const int iy = oy * P + dy;
                                        const int ix = ox * P + dx;
                                        if (iy < x.h && ix < x.w) sum = tape.add(sum, x.at(n, t, c, iy, ix));
                                    }
                                y.at(n, t, c, oy, ox) = tape.scale(sum, 1.0 / (P * P));
                            }
            x = std::move(y);
            continue;
        }

        // FC sees the input as a C*H*W vector on a 1x1 map.
        if (layer.kind == LayerKind::fc) x = Block{x.n, x.t, x.c * x.h * x.w, 1, 1, std::move(x.ids)};
        const int k = layer.kind == LayerKind::fc ? 1 : layer.kernel;
        const int stride = layer.kind == LayerKind::fc ? 1 : layer.stride;
        const int pad = layer.kind == LayerKind::fc ? 0 : (k - 1) / 2;
        const int cout = layer.out_channels;
        const int oh = (x.h + 2 * pad - k) / stride + 1;
        const int ow = (x.w + 2 * pad - k) / stride + 1;

        const WeightTensor& w = weights.at(wi++);
        if (w.kernel() != k || w.in_channels() != x.c || w.out_channels() != cout)
            throw ConfigError("oracle: weight tensor does not match layer " + layer.to_string());
        std::vector<int> wid(w.size());
        for (std::size_t i = 0; i < w.size(); ++i) wid[i] = tape.leaf(w[i]);
        auto w_at = [&](int ky, int kx, int ci, int co) {
            return wid[static_cast<std::size_t>(((ky * k + kx) * x.c + ci) * cout + co)];
        };

        Block u{N, T, cout, oh, ow, {}};
        Block s{N, T, cout, oh, ow, {}};
        u.ids.resize(static_cast<std::size_t>(N) * T * cout * oh * ow);
        s.ids.resize(u.ids.size());
        for (int n = 0; n < N; ++n)
            for (int t = 0; t < T; ++t)
                for (int co = 0; co < cout; ++co)
                    for (int oy = 0; oy < oh; ++oy)
                        for (int ox = 0; ox < ow; ++ox) {
                            int spatial = zero;
                            for (int ci = 0; ci < x.c; ++ci)
                                for (int ky = 0; ky < k; ++ky)
                                    for (int kx = 0; kx < k; ++kx) {
                                        const int iy = oy * stride - pad + ky;
                                        const int ix = ox * stride - pad + kx;
                                        if (iy < 0 || ix < 0 || iy >= x.h || ix >= x.w) continue;
                                        spatial = tape.add(spatial, tape.mul(x.at(n, t, ci, iy, ix), w_at(ky, kx, ci, co)));
                                    }
                            int pot = spatial;
                            if (t > 0) {
                                const int u_prev = u.at(n, t - 1, co, oy, ox);
                                const int s_prev = s.at(n, t - 1, co, oy, ox);
                                const int temporal = tape.mul(tape.scale(u_prev, p.alpha), tape.one_minus(s_prev));
                                pot = tape.add(temporal, spatial);
                            }
                            const double uv = tape.value(pot);
                            const double surrogate = (p.th_l < uv && uv < p.th_r) ? p.beta : 0.0;
                            u.at(n, t, co, oy, ox) = pot;
                            s.at(n, t, co, oy, ox) = tape.step(pot, p.th_f, surrogate);
                        }
        weight_ids.push_back(std::move(wid));
        u_ids.push_back(u.ids);
        spikes.push_back(s);
        x = std::move(s);
    }

    // Rate-coded squared error summed over samples and classes.
    Block& out = spikes.back();
    if (out.h != 1 || out.w != 1) throw ConfigError("oracle: last layer must be FC");
    int loss = zero;
    for (int n = 0; n < N; ++n) {
        const int label = labels[static_cast<std::size_t>(n)];
        for (int c = 0; c < out.c; ++c) {
            int count = zero;
            for (int t = 0; t < T; ++t)
                count = tape.add(count, out.at(n, t, c, 0, 0));
            const int rate = tape.scale(count, 1.0 / T);
            const int diff = tape.add(rate, tape.leaf(c == label ? -1.0 : 0.0));
            loss = tape.add(loss, tape.mul(diff, diff));
        }
    }

    const std::vector<double> g = tape.gradient(loss);
    OracleResult r;
    r.loss_sum = tape.value(loss);
    for (std::size_t l = 0; l < u_ids.size(); ++l) {
        OracleLayer layer;
        for (int id : u_ids[l]) {
            layer.u.push_back(tape.value(id));
            layer.grad_u.push_back(g[static_cast<std::size_t>(id)]);
        }
        for (int id : spikes[l].ids) layer.s.push_back(tape.value(id));
        for (int id : weight_ids[l]) layer.grad_w.push_back(g[static_cast<std::size_t>(id)]);
        r.layers.push_back(std::move(layer));
    }
    return r;
}

}  // namespace h2sim::verify
