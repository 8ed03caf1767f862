// Model families assembled from the tensor ops: the CNN classifier, the
// convolutional auto-encoder (encoder + shape-mirrored decoder), the raw
// series MLP baseline, and the small MLP that classifies latent attributes.
//
// Encoder block k follows conv -> batch norm -> PReLU -> max pool; the
// decoder mirrors with transposed conv -> batch norm -> PReLU -> unpool,
// the final decoder layer staying linear. Layer geometry comes from a fixed
// six-row table; input feature maps are 1x24x168.

#pragma once

#include <array>
#include <optional>
#include <random>
#include <string>

#include "hrd/adam.hpp"
#include "hrd/losses.hpp"
#include "hrd/ops.hpp"

namespace hrd {

constexpr int64_t kMapRows = 24;
constexpr int64_t kMapCols = 168;
constexpr int64_t kSegmentLen = kMapRows * kMapCols;  // 4032

struct ConvSpec {
    int64_t kernel, stride, pad, channels;
    int64_t pool_kernel, pool_stride;  // pool_kernel == 0 means no pool
};

// Six-row layer table shared by the CNN and the CAE encoder.
inline const std::array<ConvSpec, 6>& layer_table() {
    static const std::array<ConvSpec, 6> t = {{
        {5, 1, 2, 32, 2, 2},
        {5, 1, 2, 64, 2, 2},
        {5, 1, 2, 128, 2, 2},
        {5, 1, 2, 256, 3, 3},
        {3, 1, 1, 512, 0, 0},
        {3, 1, 1, 1024, 0, 0},
    }};
    return t;
}

struct SpatialDims {
    int64_t c, h, w;
    int64_t flat() const { return c * h * w; }
};

// Spatial size after `depth` encoder blocks on a 1x24x168 input.
inline SpatialDims encoder_dims(int num_layers) {
    if (num_layers < 1 || num_layers > 6)
        throw ValidationError("num_layers must be in 1..6, got " + std::to_string(num_layers));
    SpatialDims d{1, kMapRows, kMapCols};
    for (int k = 0; k < num_layers; ++k) {
        const auto& spec = layer_table()[k];
        d.h = (d.h + 2 * spec.pad - spec.kernel) / spec.stride + 1;
        d.w = (d.w + 2 * spec.pad - spec.kernel) / spec.stride + 1;
        d.c = spec.channels;
        if (spec.pool_kernel) {
            d.h = (d.h - spec.pool_kernel) / spec.pool_stride + 1;
            d.w = (d.w - spec.pool_kernel) / spec.pool_stride + 1;
        }
    }
    return d;
}

// ---------------------------------------------------------------------------
// Configs (match the architecture-config JSON interface)
// ---------------------------------------------------------------------------

enum class Family { cnn, cae, contrastive_cae, mlp };

inline std::string family_name(Family f) {
    switch (f) {
        case Family::cnn: return "cnn";
        case Family::cae: return "cae";
        case Family::contrastive_cae: return "contrastive_cae";
        case Family::mlp: return "mlp";
    }
    return "?";
}

inline Family family_from(const std::string& s) {
    if (s == "cnn") return Family::cnn;
    if (s == "cae") return Family::cae;
    if (s == "contrastive_cae") return Family::contrastive_cae;
    if (s == "mlp") return Family::mlp;
    throw ValidationError("unknown model family '" + s + "'");
}

struct ModelConfig {
    Family family = Family::contrastive_cae;
    int num_layers = 4;
    int64_t latent_dim = 100;  // 0 = no bottleneck, flatten feeds the decoder
    int classifier_hidden = 32;
    double margin = 5.0;
};

// ---------------------------------------------------------------------------
// Layer modules
// ---------------------------------------------------------------------------

template <typename T>
struct NamedParam {
    std::string name;
    TensorT<T> t;
};

template <typename T>
struct NamedBuffer {
    std::string name;
    std::vector<T>* v;
};

namespace init {

template <typename T>
void kaiming_uniform(TensorT<T>& w, int64_t fan_in, std::mt19937& rng, double slope = 0.25) {
    const double bound = std::sqrt(6.0 / ((1.0 + slope * slope) * static_cast<double>(fan_in)));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : w.data()) v = static_cast<T>(dist(rng));
}

}  // namespace init

template <typename T>
struct Conv2dLayer {
    TensorT<T> w, b;
    std::pair<int64_t, int64_t> stride{1, 1}, pad{0, 0};

    void build(int64_t in_ch, int64_t out_ch, int64_t k, int64_t s, int64_t p, std::mt19937& rng) {
        w = TensorT<T>::zeros({out_ch, in_ch, k, k});
        b = TensorT<T>::zeros({out_ch});
        init::kaiming_uniform(w, in_ch * k * k, rng);
        w.set_requires_grad(true);
        b.set_requires_grad(true);
        stride = {s, s};
        pad = {p, p};
    }
    TensorT<T> forward(const TensorT<T>& x) const { return conv2d(x, w, b, stride, pad); }
};

template <typename T>
struct ConvT2dLayer {
    TensorT<T> w, b;
    std::pair<int64_t, int64_t> stride{1, 1}, pad{0, 0};

    void build(int64_t in_ch, int64_t out_ch, int64_t k, int64_t s, int64_t p, std::mt19937& rng) {
        w = TensorT<T>::zeros({in_ch, out_ch, k, k});
        b = TensorT<T>::zeros({out_ch});
        // true fan-in of a stride-1 transposed conv per output element
        init::kaiming_uniform(w, in_ch * k * k, rng);
        w.set_requires_grad(true);
        b.set_requires_grad(true);
        stride = {s, s};
        pad = {p, p};
    }
    TensorT<T> forward(const TensorT<T>& x) const { return conv_transpose2d(x, w, b, stride, pad); }
};

template <typename T>
struct BatchNorm2dLayer {
    TensorT<T> gamma, beta;
    std::vector<T> running_mean, running_var;
    bool ready = false;

    void build(int64_t channels) {
        gamma = TensorT<T>::full({channels}, T(1));
        beta = TensorT<T>::zeros({channels});
        gamma.set_requires_grad(true);
        beta.set_requires_grad(true);
    }
    TensorT<T> forward(const TensorT<T>& x, bool train) {
        return batch_norm2d(x, gamma, beta, running_mean, running_var, ready, train);
    }
};

template <typename T>
struct PReLULayer {
    TensorT<T> slope;

    void build(int64_t channels) {
        slope = TensorT<T>::full({channels}, T(0.25));
        slope.set_requires_grad(true);
    }
    TensorT<T> forward(const TensorT<T>& x) const { return prelu(x, slope); }
};

template <typename T>
struct LinearLayer {
    TensorT<T> w, b;

    void build(int64_t in_dim, int64_t out_dim, std::mt19937& rng) {
        w = TensorT<T>::zeros({in_dim, out_dim});
        b = TensorT<T>::zeros({out_dim});
        init::kaiming_uniform(w, in_dim, rng);
        w.set_requires_grad(true);
        b.set_requires_grad(true);
    }
    TensorT<T> forward(const TensorT<T>& x) const { return fully_connected(x, w, b); }
};

// conv -> bn -> prelu -> optional max pool
template <typename T>
struct EncoderBlock {
    Conv2dLayer<T> conv;
    BatchNorm2dLayer<T> bn;
    PReLULayer<T> act;
    int64_t pool_kernel = 0, pool_stride = 0;

    void build(int64_t in_ch, const ConvSpec& spec, std::mt19937& rng) {
        conv.build(in_ch, spec.channels, spec.kernel, spec.stride, spec.pad, rng);
        bn.build(spec.channels);
        act.build(spec.channels);
        pool_kernel = spec.pool_kernel;
        pool_stride = spec.pool_stride;
    }
    TensorT<T> forward(const TensorT<T>& x, bool train) {
        auto y = act.forward(bn.forward(conv.forward(x), train));
        if (pool_kernel) y = max_pool2d(y, {pool_kernel, pool_kernel}, {pool_stride, pool_stride});
        return y;
    }
    void collect(const std::string& prefix, std::vector<NamedParam<T>>& params,
                 std::vector<NamedBuffer<T>>& buffers) {
        params.push_back({prefix + ".conv.w", conv.w});
        params.push_back({prefix + ".conv.b", conv.b});
        params.push_back({prefix + ".bn.gamma", bn.gamma});
        params.push_back({prefix + ".bn.beta", bn.beta});
        params.push_back({prefix + ".act.slope", act.slope});
        buffers.push_back({prefix + ".bn.rm", &bn.running_mean});
        buffers.push_back({prefix + ".bn.rv", &bn.running_var});
    }
};

// transposed conv -> bn -> prelu -> optional unpool; final layer is linear
template <typename T>
struct DecoderBlock {
    ConvT2dLayer<T> deconv;
    BatchNorm2dLayer<T> bn;
    PReLULayer<T> act;
    bool linear_out = false;
    int64_t unpool_kernel = 0;

    void build(int64_t in_ch, int64_t out_ch, const ConvSpec& spec, bool final_layer,
               std::mt19937& rng) {
        deconv.build(in_ch, out_ch, spec.kernel, spec.stride, spec.pad, rng);
        linear_out = final_layer;
        if (!final_layer) {
            bn.build(out_ch);
            act.build(out_ch);
        }
        unpool_kernel = spec.pool_kernel;
    }
    TensorT<T> forward(const TensorT<T>& x, bool train) {
        auto y = deconv.forward(x);
        if (!linear_out) y = act.forward(bn.forward(y, train));
        if (unpool_kernel) y = upsample_unpool(y, {unpool_kernel, unpool_kernel});
        return y;
    }
    void collect(const std::string& prefix, std::vector<NamedParam<T>>& params,
                 std::vector<NamedBuffer<T>>& buffers) {
        params.push_back({prefix + ".deconv.w", deconv.w});
        params.push_back({prefix + ".deconv.b", deconv.b});
        if (!linear_out) {
            params.push_back({prefix + ".bn.gamma", bn.gamma});
            params.push_back({prefix + ".bn.beta", bn.beta});
            params.push_back({prefix + ".act.slope", act.slope});
            buffers.push_back({prefix + ".bn.rm", &bn.running_mean});
            buffers.push_back({prefix + ".bn.rv", &bn.running_var});
        }
    }
};

// ---------------------------------------------------------------------------
// CNN classifier: encoder blocks -> global average pool -> fc(100) -> fc(2)
// ---------------------------------------------------------------------------

template <typename T>
struct CnnModel {
    ModelConfig cfg;
    std::vector<EncoderBlock<T>> blocks;
    LinearLayer<T> fc1, fc2;
    PReLULayer<T> fc1_act;

    void build(const ModelConfig& config, uint64_t seed) {
        cfg = config;
        std::mt19937 rng(static_cast<uint32_t>(seed));
        blocks.resize(cfg.num_layers);
        int64_t in_ch = 1;
        for (int k = 0; k < cfg.num_layers; ++k) {
            blocks[k].build(in_ch, layer_table()[k], rng);
            in_ch = layer_table()[k].channels;
        }
        fc1.build(in_ch, 100, rng);
        fc1_act.build(100);
        fc2.build(100, 2, rng);
    }

    TensorT<T> forward(const TensorT<T>& batch, bool train) {
        if (batch.ndim() != 4 || batch.dim(1) != 1 || batch.dim(2) != kMapRows ||
            batch.dim(3) != kMapCols)
            throw ValidationError("cnn_forward: expected [N,1,24,168], got " +
                                  shape_str(batch.shape()));
        auto y = batch;
        for (auto& b : blocks) y = b.forward(y, train);
        y = global_avg_pool(y);
        y = fc1_act.forward(fc1.forward(y));
        return fc2.forward(y);
    }

    std::vector<NamedParam<T>> named_params() {
        std::vector<NamedParam<T>> p;
        std::vector<NamedBuffer<T>> b;
        for (size_t k = 0; k < blocks.size(); ++k)
            blocks[k].collect("enc" + std::to_string(k + 1), p, b);
        p.push_back({"fc1.w", fc1.w});
        p.push_back({"fc1.b", fc1.b});
        p.push_back({"fc1.act.slope", fc1_act.slope});
        p.push_back({"fc2.w", fc2.w});
        p.push_back({"fc2.b", fc2.b});
        return p;
    }
    std::vector<NamedBuffer<T>> named_buffers() {
        std::vector<NamedParam<T>> p;
        std::vector<NamedBuffer<T>> b;
        for (size_t k = 0; k < blocks.size(); ++k)
            blocks[k].collect("enc" + std::to_string(k + 1), p, b);
        return b;
    }
    void mark_stats_ready() {
        for (auto& blk : blocks)
            if (!blk.bn.running_mean.empty()) blk.bn.ready = true;
    }
};

// ---------------------------------------------------------------------------
// CAE: encoder blocks -> flatten -> [fc -> latent] ; [fc ->] unflatten ->
// mirrored decoder
// ---------------------------------------------------------------------------

template <typename T>
struct CaeModel {
    ModelConfig cfg;
    std::vector<EncoderBlock<T>> enc_blocks;
    std::vector<DecoderBlock<T>> dec_blocks;  // ordered k = depth .. 1
    LinearLayer<T> enc_fc, dec_fc;            // absent when latent_dim == 0
    SpatialDims enc_out{};

    bool has_bottleneck() const { return cfg.latent_dim > 0; }
    int64_t latent_len() const { return has_bottleneck() ? cfg.latent_dim : enc_out.flat(); }

    void build(const ModelConfig& config, uint64_t seed) {
        cfg = config;
        std::mt19937 rng(static_cast<uint32_t>(seed));
        enc_out = encoder_dims(cfg.num_layers);

        enc_blocks.resize(cfg.num_layers);
        int64_t in_ch = 1;
        for (int k = 0; k < cfg.num_layers; ++k) {
            enc_blocks[k].build(in_ch, layer_table()[k], rng);
            in_ch = layer_table()[k].channels;
        }
        if (has_bottleneck()) {
            enc_fc.build(enc_out.flat(), cfg.latent_dim, rng);
            dec_fc.build(cfg.latent_dim, enc_out.flat(), rng);
        }
        dec_blocks.resize(cfg.num_layers);
        for (int k = cfg.num_layers; k >= 1; --k) {
            const int64_t dec_in = layer_table()[k - 1].channels;
            const int64_t dec_out = (k == 1) ? 1 : layer_table()[k - 2].channels;
            dec_blocks[cfg.num_layers - k].build(dec_in, dec_out, layer_table()[k - 1], k == 1,
                                                 rng);
        }
    }

    TensorT<T> encode(const TensorT<T>& batch, bool train) {
        if (batch.ndim() != 4 || batch.dim(1) != 1 || batch.dim(2) != kMapRows ||
            batch.dim(3) != kMapCols)
            throw ValidationError("cae_encode: expected [N,1,24,168], got " +
                                  shape_str(batch.shape()));
        auto y = batch;
        for (auto& b : enc_blocks) y = b.forward(y, train);
        y = reshape(y, {batch.dim(0), enc_out.flat()});
        if (has_bottleneck()) y = enc_fc.forward(y);
        return y;
    }

    TensorT<T> decode(const TensorT<T>& latent, bool train) {
        if (latent.ndim() != 2 || latent.dim(1) != latent_len())
            throw ValidationError("cae_decode: expected [N," + std::to_string(latent_len()) +
                                  "], got " + shape_str(latent.shape()));
        auto y = latent;
        if (has_bottleneck()) y = dec_fc.forward(y);
        y = reshape(y, {latent.dim(0), enc_out.c, enc_out.h, enc_out.w});
        for (auto& b : dec_blocks) y = b.forward(y, train);
        return y;
    }

    TensorT<T> reconstruct(const TensorT<T>& batch, bool train) {
        return decode(encode(batch, train), train);
    }

    std::vector<NamedParam<T>> named_params() {
        std::vector<NamedParam<T>> p;
        std::vector<NamedBuffer<T>> b;
        collect(p, b);
        return p;
    }
    std::vector<NamedBuffer<T>> named_buffers() {
        std::vector<NamedParam<T>> p;
        std::vector<NamedBuffer<T>> b;
        collect(p, b);
        return b;
    }
    void mark_stats_ready() {
        for (auto& blk : enc_blocks)
            if (!blk.bn.running_mean.empty()) blk.bn.ready = true;
        for (auto& blk : dec_blocks)
            if (!blk.linear_out && !blk.bn.running_mean.empty()) blk.bn.ready = true;
    }

private:
    void collect(std::vector<NamedParam<T>>& p, std::vector<NamedBuffer<T>>& b) {
        for (size_t k = 0; k < enc_blocks.size(); ++k)
            enc_blocks[k].collect("enc" + std::to_string(k + 1), p, b);
        if (has_bottleneck()) {
            p.push_back({"enc_fc.w", enc_fc.w});
            p.push_back({"enc_fc.b", enc_fc.b});
            p.push_back({"dec_fc.w", dec_fc.w});
            p.push_back({"dec_fc.b", dec_fc.b});
        }
        for (size_t i = 0; i < dec_blocks.size(); ++i) {
            const size_t k = dec_blocks.size() - i;  // block i mirrors encoder layer k
            dec_blocks[i].collect("dec" + std::to_string(k), p, b);
        }
    }
};

// ---------------------------------------------------------------------------
// MLP baseline on the raw 4032-value series
// ---------------------------------------------------------------------------

struct MlpConfig {
    std::vector<int64_t> hidden = {1000, 250, 50, 20};
};

template <typename T>
struct MlpModel {
    MlpConfig cfg;
    std::vector<LinearLayer<T>> fcs;
    std::vector<PReLULayer<T>> acts;

    void build(const MlpConfig& config, uint64_t seed) {
        cfg = config;
        std::mt19937 rng(static_cast<uint32_t>(seed));
        std::vector<int64_t> widths;
        widths.push_back(kSegmentLen);
        widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
        widths.push_back(2);
        fcs.resize(widths.size() - 1);
        acts.resize(cfg.hidden.size());
        for (size_t i = 0; i + 1 < widths.size(); ++i) {
            fcs[i].build(widths[i], widths[i + 1], rng);
            if (i < acts.size()) acts[i].build(widths[i + 1]);
        }
    }

    TensorT<T> forward(const TensorT<T>& batch) {
        if (batch.ndim() != 2 || batch.dim(1) != kSegmentLen)
            throw ValidationError("mlp_forward: expected [N,4032], got " +
                                  shape_str(batch.shape()));
        auto y = batch;
        for (size_t i = 0; i < fcs.size(); ++i) {
            y = fcs[i].forward(y);
            if (i < acts.size()) y = acts[i].forward(y);
        }
        return y;
    }

    int64_t param_count() {
        int64_t n = 0;
        for (auto& np : named_params()) n += np.t.numel();
        return n;
    }

    std::vector<NamedParam<T>> named_params() {
        std::vector<NamedParam<T>> p;
        for (size_t i = 0; i < fcs.size(); ++i) {
            p.push_back({"fc" + std::to_string(i + 1) + ".w", fcs[i].w});
            p.push_back({"fc" + std::to_string(i + 1) + ".b", fcs[i].b});
            if (i < acts.size())
                p.push_back({"fc" + std::to_string(i + 1) + ".act.slope", acts[i].slope});
        }
        return p;
    }
    std::vector<NamedBuffer<T>> named_buffers() { return {}; }
    void mark_stats_ready() {}
};

// ---------------------------------------------------------------------------
// Two-layer MLP over latent attributes
// ---------------------------------------------------------------------------

template <typename T>
struct AttrClassifier {
    LinearLayer<T> fc1, fc2;
    PReLULayer<T> act;

    void build(int64_t latent_dim, int hidden, uint64_t seed) {
        std::mt19937 rng(static_cast<uint32_t>(seed));
        fc1.build(latent_dim, hidden, rng);
        act.build(hidden);
        fc2.build(hidden, 2, rng);
    }

    TensorT<T> forward(const TensorT<T>& latent) {
        return fc2.forward(act.forward(fc1.forward(latent)));
    }

    std::vector<NamedParam<T>> named_params() {
        return {{"fc1.w", fc1.w}, {"fc1.b", fc1.b}, {"act.slope", act.slope},
                {"fc2.w", fc2.w}, {"fc2.b", fc2.b}};
    }
};

template <typename T>
std::vector<TensorT<T>> param_tensors(std::vector<NamedParam<T>> named) {
    std::vector<TensorT<T>> out;
    out.reserve(named.size());
    for (auto& np : named) out.push_back(np.t);
    return out;
}

}  // namespace hrd
