#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "h2sim/lif.hpp"

namespace h2sim {

enum class LayerKind { conv, fc, avg_pool };

struct LayerSpec {
    LayerKind kind = LayerKind::conv;
    int out_channels = 0;
    int kernel = 1;
    int stride = 1;
    bool is_encoding = false;
    /// Pool size, AvgPool only.
    int pool = 0;

    static LayerSpec conv(int channels, int k, int stride = 1, bool encoding = false) {
        return {LayerKind::conv, channels, k, stride, encoding, 0};
    }
    static LayerSpec fc(int outputs) { return {LayerKind::fc, outputs, 1, 1, false, 0}; }
    static LayerSpec avg_pool(int size) { return {LayerKind::avg_pool, 0, 1, 1, false, size}; }

    bool has_weights() const noexcept { return kind != LayerKind::avg_pool; }
    std::string to_string() const;
    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// netspec := layer ("-" layer)*
/// layer   := INT "C" INT ["S" INT] ["(Encoding)"] | "AP" INT | INT "FC"
std::vector<LayerSpec> parse_network(std::string_view text);
std::string format_network(const std::vector<LayerSpec>& layers);

struct NetworkSpec {
    int in_c = 1;
    int in_h = 1;
    int in_w = 1;
    int timesteps = 1;
    std::vector<LayerSpec> layers;
    LifParams lif{};
    int sub_batch = 4;
    int batch_group = 1;

    int batch_size() const noexcept { return sub_batch * batch_group; }
};

/// A layer with its concrete per-sample shapes (n = t = 1).
struct ResolvedLayer {
    LayerSpec spec;
    Shape in;
    Shape out;
    WeightOp op{};
    /// Index among weight layers, -1 for pooling.
    int weight_index = -1;
    /// Input is real valued (encoded image or pooled spikes) rather than spikes.
    bool real_input = false;
};

struct NetworkPlan {
    std::vector<ResolvedLayer> layers;
    /// Positions in `layers` of the weight (spiking) layers, in order.
    std::vector<int> weight_layers;
    int num_classes = 0;

    const ResolvedLayer& weight_layer(int j) const { return layers[static_cast<std::size_t>(weight_layers[j])]; }
    int num_weight_layers() const noexcept { return static_cast<int>(weight_layers.size()); }
    /// Pool sizes applied between weight layer j-1's spikes and weight layer j's input, in forward order.
    std::vector<int> pools_before(int j) const;
};

/// Validates the spec and chains shapes through every layer. The last layer
/// must be FC (it carries the classes).
NetworkPlan resolve(const NetworkSpec& net);

}  // namespace h2sim
