#include "h2sim/network.hpp"

#include <cctype>
#include <limits>

namespace h2sim {

std::string LayerSpec::to_string() const {
    switch (kind) {
        case LayerKind::avg_pool:
            return "AP" + std::to_string(pool);
        case LayerKind::fc:
            return std::to_string(out_channels) + "FC";
        case LayerKind::conv: {
            std::string s = std::to_string(out_channels) + "C" + std::to_string(kernel);
            if (stride != 1) s += "S" + std::to_string(stride);
            if (is_encoding) s += "(Encoding)";
            return s;
        }
    }
    return {};
}

namespace {

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    std::vector<LayerSpec> run() {
        if (text_.empty()) throw ParseError("empty network string", 0);
        std::vector<LayerSpec> layers;
        layers.push_back(layer());
        while (pos_ < text_.size()) {
            expect('-');
            layers.push_back(layer());
        }
        for (std::size_t i = 1; i < layers.size(); ++i)
            if (layers[i].is_encoding)
                throw ParseError("(Encoding) is only allowed on the first layer", encoding_pos_[i]);
        return layers;
    }

private:
    LayerSpec layer() {
        const std::size_t start = pos_;
        encoding_pos_.push_back(start);
        if (peek_word("AP")) {
            pos_ += 2;
            const int size = integer();
            if (size < 1) throw ParseError("pool size must be >= 1", start + 2);
            return LayerSpec::avg_pool(size);
        }
        const int channels = integer();
        if (channels < 1) throw ParseError("channel count must be >= 1", start);
        if (peek_word("FC")) {
            pos_ += 2;
            return LayerSpec::fc(channels);
        }
        expect('C');
        const std::size_t kpos = pos_;
        const int k = integer();
        if (k < 1) throw ParseError("kernel size must be >= 1", kpos);
        int stride = 1;
        if (pos_ < text_.size() && text_[pos_] == 'S') {
            ++pos_;
            const std::size_t spos = pos_;
            stride = integer();
            if (stride < 1) throw ParseError("stride must be >= 1", spos);
        }
        bool encoding = false;
        if (peek_word("(Encoding)")) {
            encoding_pos_.back() = pos_;
            pos_ += 10;
            encoding = true;
        }
        return LayerSpec::conv(channels, k, stride, encoding);
    }

    int integer() {
        const std::size_t start = pos_;
        long long value = 0;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
            value = value * 10 + (text_[pos_] - '0');
            if (value > std::numeric_limits<int>::max()) throw ParseError("integer too large", start);
            ++pos_;
        }
        if (pos_ == start) throw ParseError(describe("expected an integer"), pos_);
        return static_cast<int>(value);
    }

    void expect(char c) {
        if (pos_ >= text_.size() || text_[pos_] != c)
            throw ParseError(describe(std::string("expected '") + c + "'"), pos_);
        ++pos_;
    }

    bool peek_word(std::string_view word) const { return text_.substr(pos_, word.size()) == word; }

    std::string describe(const std::string& what) const {
        if (pos_ >= text_.size()) return what + ", found end of input";
        return what + ", found '" + text_[pos_] + "'";
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    std::vector<std::size_t> encoding_pos_;
};

}  // namespace

std::vector<LayerSpec> parse_network(std::string_view text) { return Parser(text).run(); }

std::string format_network(const std::vector<LayerSpec>& layers) {
    std::string out;
    for (const auto& l : layers) {
        if (!out.empty()) out += '-';
        out += l.to_string();
    }
    return out;
}

std::vector<int> NetworkPlan::pools_before(int j) const {
    std::vector<int> pools;
    const int end = weight_layers[static_cast<std::size_t>(j)];
    const int begin = j == 0 ? 0 : weight_layers[static_cast<std::size_t>(j - 1)] + 1;
    for (int i = begin; i < end; ++i) pools.push_back(layers[static_cast<std::size_t>(i)].spec.pool);
    return pools;
}

NetworkPlan resolve(const NetworkSpec& net) {
    if (net.in_c < 1 || net.in_h < 1 || net.in_w < 1) throw ConfigError("network: input dims must be positive");
    if (net.timesteps < 1) throw ConfigError("network: T must be >= 1");
    if (net.sub_batch < 1 || net.batch_group < 1) throw ConfigError("network: sub_batch and batch_group must be >= 1");
    if (net.layers.empty()) throw ConfigError("network: no layers");
    net.lif.validate();

    NetworkPlan plan;
    Shape cur{1, 1, net.in_c, net.in_h, net.in_w};
    bool real = net.layers.front().is_encoding;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const LayerSpec& spec = net.layers[i];
        if (spec.is_encoding && i != 0) throw ConfigError("network: only the first layer may be an encoding layer");
        ResolvedLayer r;
        r.spec = spec;
        r.in = cur;
        r.real_input = real;
        switch (spec.kind) {
            case LayerKind::avg_pool:
                if (spec.pool < 1) throw ConfigError("network: pool size must be >= 1");
                if (i == 0) throw ConfigError("network: the first layer must carry weights");
                r.out = {1, 1, cur.c, pooled_size(cur.h, spec.pool), pooled_size(cur.w, spec.pool)};
                real = true;
                break;
            case LayerKind::conv:
            case LayerKind::fc: {
                if (spec.out_channels < 1) throw ConfigError("network: output channels must be >= 1");
                if (spec.kind == LayerKind::conv) {
                    if (spec.kernel < 1 || spec.stride < 1) throw ConfigError("network: bad kernel or stride");
                    r.op = WeightOp::conv(same_geometry(spec.kernel, spec.stride));
                } else {
                    r.op = WeightOp::fc();
                }
                r.out = r.op.output_shape(cur, spec.out_channels);
                r.weight_index = static_cast<int>(plan.weight_layers.size());
                plan.weight_layers.push_back(static_cast<int>(i));
                real = false;
                break;
            }
        }
        cur = r.out;
        plan.layers.push_back(r);
    }
    if (net.layers.back().kind != LayerKind::fc) throw ConfigError("network: the last layer must be FC");
    plan.num_classes = net.layers.back().out_channels;
    return plan;
}

}  // namespace h2sim
