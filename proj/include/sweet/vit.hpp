#pragma once

// Miniature ViT encoder and lightweight MAE decoder built on the autodiff
// tape. The encoder's main matrices arrive as tape variables (reconstructed
// from the template during constrained training, free parameters otherwise);
// everything else is a "direct" parameter held in a ParamMap.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sweet/autodiff.hpp"
#include "sweet/errors.hpp"
#include "sweet/masking.hpp"
#include "sweet/rng.hpp"
#include "sweet/tensor.hpp"
#include "sweet/weight_template.hpp"

namespace sweet {

struct ViTConfig {
    std::size_t layers = 4;
    std::size_t heads = 4;
    std::size_t head_dim = 8;
    std::size_t width = 32;  // D, must equal heads * head_dim
    std::size_t mlp_ratio = 4;
    std::size_t patch = 4;
    std::size_t image = 32;
    std::size_t channels = 3;
    bool swiglu = false;
    bool rmsnorm = false;
    bool rope = false;
    std::size_t decoder_layers = 1;
    std::size_t decoder_width = 32;
    std::size_t decoder_heads = 4;

    [[nodiscard]] std::size_t hidden() const noexcept { return mlp_ratio * width; }
    [[nodiscard]] std::size_t grid() const noexcept { return image / patch; }
    [[nodiscard]] std::size_t patches() const noexcept { return grid() * grid(); }
    [[nodiscard]] std::size_t patch_dim() const noexcept { return patch * patch * channels; }
    [[nodiscard]] LayoutDescriptor layout() const { return LayoutDescriptor(layers, width, mlp_ratio, swiglu); }

    void validate() const {
        if (heads == 0 || head_dim == 0 || width != heads * head_dim)
            throw ArgumentError("ViT config: width " + std::to_string(width) + " must equal heads*head_dim = " +
                                std::to_string(heads) + "*" + std::to_string(head_dim));
        if (mlp_ratio == 0) throw ArgumentError("ViT config: mlp_ratio must be positive");
        if (patch == 0 || image == 0 || image % patch != 0)
            throw ArgumentError("ViT config: image size must be a positive multiple of the patch size");
        if (channels == 0) throw ArgumentError("ViT config: channels must be positive");
        if (decoder_heads == 0 || decoder_width == 0 || decoder_width % decoder_heads != 0)
            throw ArgumentError("ViT config: decoder width must be divisible by decoder heads");
        if (rope && (head_dim % 2 != 0 || (decoder_width / decoder_heads) % 2 != 0))
            throw ArgumentError("ViT config: rotary embeddings need even head dimensions");
    }

    // Same architecture at another depth/width; head dimension is kept.
    [[nodiscard]] ViTConfig resized(std::size_t new_layers, std::size_t new_heads) const {
        ViTConfig c = *this;
        c.layers = new_layers;
        c.heads = new_heads;
        c.width = new_heads * head_dim;
        return c;
    }

    friend bool operator==(const ViTConfig&, const ViTConfig&) = default;
};

// Per-layer parameter names of the direct (non-template) parameters.
namespace names {
inline std::string block(std::size_t i, const char* leaf) { return "blocks." + std::to_string(i) + "." + leaf; }
inline std::string dec_block(std::size_t i, const char* leaf) {
    return "decoder.blocks." + std::to_string(i) + "." + leaf;
}
}  // namespace names

namespace detail {

inline void xavier(DenseTensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    fill_uniform(t.data(), rng, -a, a);
}

inline DenseTensor xavier_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    DenseTensor t({rows, cols});
    xavier(t, rows, cols, rng);
    return t;
}

inline DenseTensor normal_tensor(Shape shape, double stddev, Rng& rng) {
    DenseTensor t(std::move(shape));
    fill_normal(t.data(), rng, 0.0, stddev);
    return t;
}

inline void add_norm_params(ParamMap& p, const std::string& prefix, std::size_t width, bool rms) {
    p[prefix + ".g"] = DenseTensor({width}, 1.0);
    if (!rms) p[prefix + ".b"] = DenseTensor({width}, 0.0);
}

inline void add_block_biases(ParamMap& p, const std::function<std::string(const char*)>& name, std::size_t width,
                             std::size_t hidden, const ViTConfig& cfg) {
    add_norm_params(p, name("norm1"), width, cfg.rmsnorm);
    add_norm_params(p, name("norm2"), width, cfg.rmsnorm);
    for (const char* b : {"attn.bq", "attn.bk", "attn.bv", "attn.bo"}) p[name(b)] = DenseTensor({width}, 0.0);
    if (!cfg.swiglu) p[name("mlp.b1")] = DenseTensor({hidden}, 0.0);
    p[name("mlp.b2")] = DenseTensor({width}, 0.0);
}

}  // namespace detail

// Everything except the encoder's main matrices: patch embedding, positional
// embeddings, norms, biases, and the whole decoder.
inline ParamMap init_direct_params(const ViTConfig& cfg, Rng& rng) {
    cfg.validate();
    ParamMap p;
    const std::size_t d = cfg.width, dd = cfg.decoder_width, n = cfg.patches(), pd = cfg.patch_dim();
    p["patch_embed.w"] = detail::xavier_matrix(pd, d, rng);
    p["patch_embed.b"] = DenseTensor({d}, 0.0);
    if (!cfg.rope) p["pos_embed"] = detail::normal_tensor({n, d}, 0.02, rng);
    for (std::size_t i = 0; i < cfg.layers; ++i)
        detail::add_block_biases(p, [i](const char* leaf) { return names::block(i, leaf); }, d, cfg.hidden(), cfg);
    detail::add_norm_params(p, "norm", d, cfg.rmsnorm);

    p["decoder.embed.w"] = detail::xavier_matrix(d, dd, rng);
    p["decoder.embed.b"] = DenseTensor({dd}, 0.0);
    p["decoder.mask_token"] = detail::normal_tensor({1, dd}, 0.02, rng);
    if (!cfg.rope) p["decoder.pos_embed"] = detail::normal_tensor({n, dd}, 0.02, rng);
    const std::size_t dh = cfg.mlp_ratio * dd;
    for (std::size_t i = 0; i < cfg.decoder_layers; ++i) {
        auto name = [i](const char* leaf) { return names::dec_block(i, leaf); };
        for (const char* w : {"attn.wq", "attn.wk", "attn.wv", "attn.wo"}) p[name(w)] = detail::xavier_matrix(dd, dd, rng);
        p[name("mlp.win")] = detail::xavier_matrix(dd, dh, rng);
        if (cfg.swiglu) p[name("mlp.wgate")] = detail::xavier_matrix(dd, dh, rng);
        p[name("mlp.wout")] = detail::xavier_matrix(dh, dd, rng);
        detail::add_block_biases(p, name, dd, dh, cfg);
    }
    detail::add_norm_params(p, "decoder.norm", dd, cfg.rmsnorm);
    p["decoder.head.w"] = detail::xavier_matrix(dd, pd, rng);
    p["decoder.head.b"] = DenseTensor({pd}, 0.0);
    return p;
}

// Fresh encoder matrices with Xavier-uniform entries.
inline std::vector<LayerWeights> init_layer_weights(const ViTConfig& cfg, Rng& rng) {
    const std::size_t d = cfg.width, h = cfg.hidden();
    auto mat = [&rng](std::size_t r, std::size_t c) { return DenseMatrix::from_tensor(detail::xavier_matrix(r, c, rng)); };
    std::vector<LayerWeights> theta(cfg.layers);
    for (auto& lw : theta) {
        lw.wq = mat(d, d);
        lw.wk = mat(d, d);
        lw.wv = mat(d, d);
        lw.wo = mat(d, d);
        lw.win = mat(d, h);
        if (cfg.swiglu) lw.wgate = mat(d, h);
        lw.wout = mat(h, d);
    }
    return theta;
}

// A concrete, standalone model: realized encoder matrices plus direct parameters.
struct ModelParams {
    ViTConfig config;
    std::vector<LayerWeights> theta;
    ParamMap direct;
};

// ---- tape-level building blocks ------------------------------------------

// Tape variables of one transformer block.
struct BlockVars {
    ad::Var norm1_g, norm1_b, norm2_g, norm2_b;
    ad::Var wq, wk, wv, wo, bq, bk, bv, bo;
    ad::Var win, wgate, wout, b1, b2;
};

// Binds a ParamMap onto a tape; names for which `trainable` is true become
// differentiable parameters, the rest constants.
class VarMap {
public:
    VarMap(ad::Tape& tape, const ParamMap& params, const std::function<bool(const std::string&)>& trainable) {
        for (const auto& [name, value] : params)
            vars_[name] = trainable(name) ? tape.parameter(name, value) : tape.constant(value);
    }
    [[nodiscard]] ad::Var at(const std::string& name) const {
        auto it = vars_.find(name);
        if (it == vars_.end()) throw ArgumentError("missing parameter: " + name);
        return it->second;
    }
    [[nodiscard]] ad::Var get_or(const std::string& name) const {
        auto it = vars_.find(name);
        return it == vars_.end() ? ad::Var{} : it->second;
    }
    [[nodiscard]] bool contains(const std::string& name) const { return vars_.count(name) != 0; }

private:
    std::map<std::string, ad::Var> vars_;
};

struct SequenceInfo {
    std::size_t groups = 1;            // sequences stacked along the rows
    std::vector<double> positions;     // per row, used by rotary embeddings
};

inline ad::Var apply_norm(ad::Tape& t, ad::Var x, ad::Var g, ad::Var b, bool rms) {
    return rms ? ad::rms_norm(t, x, g) : ad::layer_norm(t, x, g, b);
}

// concat_h softmax(Q_h K_h^T / sqrt(d)) V_h  W_o  (+ biases), Q = x Wq + bq, ...
inline ad::Var msa_forward(ad::Tape& t, ad::Var x, const BlockVars& bv, std::size_t heads, const SequenceInfo& seq,
                           bool rope) {
    const std::size_t width = t.value(x).extent(1);
    if (t.value(bv.wq).extent(0) != width)
        throw ShapeError("msa_forward: token width " + std::to_string(width) + " vs projection rows " +
                         std::to_string(t.value(bv.wq).extent(0)));
    ad::Var q = ad::add_bias(t, ad::matmul(t, x, bv.wq), bv.bq);
    ad::Var k = ad::add_bias(t, ad::matmul(t, x, bv.wk), bv.bk);
    ad::Var v = ad::add_bias(t, ad::matmul(t, x, bv.wv), bv.bv);
    if (rope) {
        q = ad::rope(t, q, seq.positions, heads);
        k = ad::rope(t, k, seq.positions, heads);
    }
    ad::Var a = ad::attention(t, q, k, v, seq.groups, heads);
    return ad::add_bias(t, ad::matmul(t, a, bv.wo), bv.bo);
}

// GELU(x Win + b1) Wout + b2, or (SiLU(x Wgate) * x Win) Wout + b2 when gated.
inline ad::Var mlp_forward(ad::Tape& t, ad::Var x, const BlockVars& bv, bool swiglu) {
    ad::Var h;
    if (swiglu) {
        h = ad::mul(t, ad::silu(t, ad::matmul(t, x, bv.wgate)), ad::matmul(t, x, bv.win));
    } else {
        h = ad::gelu(t, ad::add_bias(t, ad::matmul(t, x, bv.win), bv.b1));
    }
    return ad::add_bias(t, ad::matmul(t, h, bv.wout), bv.b2);
}

// Pre-norm block: x + MSA(norm(x)), then x + MLP(norm(x)).
inline ad::Var block_forward(ad::Tape& t, ad::Var x, const BlockVars& bv, std::size_t heads, const SequenceInfo& seq,
                             const ViTConfig& cfg) {
    ad::Var h = apply_norm(t, x, bv.norm1_g, bv.norm1_b, cfg.rmsnorm);
    x = ad::add(t, x, msa_forward(t, h, bv, heads, seq, cfg.rope));
    h = apply_norm(t, x, bv.norm2_g, bv.norm2_b, cfg.rmsnorm);
    return ad::add(t, x, mlp_forward(t, h, bv, cfg.swiglu));
}

// Encoder matrices of one layer as tape variables.
struct LayerVars {
    ad::Var wq, wk, wv, wo, win, wgate, wout;
};

// Per-layer matrices carved out of a unified (S*L, D, D) tensor variable.
inline std::vector<LayerVars> split_unified(ad::Tape& t, ad::Var unified, const LayoutDescriptor& layout) {
    std::vector<LayerVars> out(layout.layers());
    for (std::size_t l = 0; l < layout.layers(); ++l) {
        LayerVars& lv = out[l];
        lv.wq = ad::take_slice(t, unified, layout.slice_index(l, Role::wq));
        lv.wk = ad::take_slice(t, unified, layout.slice_index(l, Role::wk));
        lv.wv = ad::take_slice(t, unified, layout.slice_index(l, Role::wv));
        lv.wo = ad::take_slice(t, unified, layout.slice_index(l, Role::wo));
        std::vector<ad::Var> in, gate, outb;
        for (std::size_t b = 0; b < layout.mlp_blocks(); ++b) {
            in.push_back(ad::take_slice(t, unified, layout.slice_index(l, Role::win, b)));
            if (layout.gated()) gate.push_back(ad::take_slice(t, unified, layout.slice_index(l, Role::wgate, b)));
            outb.push_back(ad::take_slice(t, unified, layout.slice_index(l, Role::wout, b)));
        }
        lv.win = ad::concat_cols(t, in);
        if (layout.gated()) lv.wgate = ad::concat_cols(t, gate);
        lv.wout = ad::concat_rows(t, outb);
    }
    return out;
}

inline std::vector<LayerVars> constant_layers(ad::Tape& t, const std::vector<LayerWeights>& theta) {
    std::vector<LayerVars> out;
    for (const auto& lw : theta) {
        LayerVars lv;
        lv.wq = t.constant(lw.wq.to_tensor());
        lv.wk = t.constant(lw.wk.to_tensor());
        lv.wv = t.constant(lw.wv.to_tensor());
        lv.wo = t.constant(lw.wo.to_tensor());
        lv.win = t.constant(lw.win.to_tensor());
        if (!lw.wgate.empty()) lv.wgate = t.constant(lw.wgate.to_tensor());
        lv.wout = t.constant(lw.wout.to_tensor());
        out.push_back(lv);
    }
    return out;
}

inline BlockVars encoder_block_vars(const VarMap& vm, const LayerVars& lv, std::size_t i) {
    auto g = [&](const char* leaf) { return vm.get_or(names::block(i, leaf)); };
    BlockVars b;
    b.norm1_g = g("norm1.g");
    b.norm1_b = g("norm1.b");
    b.norm2_g = g("norm2.g");
    b.norm2_b = g("norm2.b");
    b.wq = lv.wq;
    b.wk = lv.wk;
    b.wv = lv.wv;
    b.wo = lv.wo;
    b.bq = g("attn.bq");
    b.bk = g("attn.bk");
    b.bv = g("attn.bv");
    b.bo = g("attn.bo");
    b.win = lv.win;
    b.wgate = lv.wgate;
    b.wout = lv.wout;
    b.b1 = g("mlp.b1");
    b.b2 = g("mlp.b2");
    return b;
}

inline BlockVars decoder_block_vars(const VarMap& vm, std::size_t i) {
    auto g = [&](const char* leaf) { return vm.get_or(names::dec_block(i, leaf)); };
    BlockVars b;
    b.norm1_g = g("norm1.g");
    b.norm1_b = g("norm1.b");
    b.norm2_g = g("norm2.g");
    b.norm2_b = g("norm2.b");
    b.wq = g("attn.wq");
    b.wk = g("attn.wk");
    b.wv = g("attn.wv");
    b.wo = g("attn.wo");
    b.bq = g("attn.bq");
    b.bk = g("attn.bk");
    b.bv = g("attn.bv");
    b.bo = g("attn.bo");
    b.win = g("mlp.win");
    b.wgate = g("mlp.wgate");
    b.wout = g("mlp.wout");
    b.b1 = g("mlp.b1");
    b.b2 = g("mlp.b2");
    return b;
}

// Patch vectors -> token embeddings (+ absolute positions unless rotary).
// `patches` is (rows x patch_dim); `indices` gives each row's patch position.
inline ad::Var embed_patches(ad::Tape& t, const ViTConfig& cfg, const VarMap& vm, ad::Var patches,
                             const std::vector<std::size_t>& indices) {
    ad::Var x = ad::add_bias(t, ad::matmul(t, patches, vm.at("patch_embed.w")), vm.at("patch_embed.b"));
    if (!cfg.rope) x = ad::add(t, x, ad::gather_rows(t, vm.at("pos_embed"), indices));
    return x;
}

// L pre-norm blocks followed by the final norm.
inline ad::Var encoder_forward(ad::Tape& t, const ViTConfig& cfg, const VarMap& vm, const std::vector<LayerVars>& layers,
                               ad::Var tokens, const SequenceInfo& seq) {
    if (layers.size() != cfg.layers)
        throw ShapeError("encoder_forward: " + std::to_string(layers.size()) + " layer weight sets for " +
                         std::to_string(cfg.layers) + " layers");
    ad::Var x = tokens;
    for (std::size_t i = 0; i < cfg.layers; ++i)
        x = block_forward(t, x, encoder_block_vars(vm, layers[i], i), cfg.heads, seq, cfg);
    return apply_norm(t, x, vm.at("norm.g"), vm.get_or("norm.b"), cfg.rmsnorm);
}

// Latents of the visible patches of each image -> predicted patch vectors for
// all N positions of every image ((images*N) x patch_dim), image-major.
inline ad::Var decoder_forward(ad::Tape& t, const ViTConfig& cfg, const VarMap& vm, ad::Var latents,
                               const std::vector<MaskSpec>& masks) {
    const std::size_t n = cfg.patches();
    std::vector<ad::RowSource> sources;
    std::vector<std::size_t> pos_index;
    std::vector<double> positions;
    std::size_t latent_row = 0;
    for (const MaskSpec& m : masks) {
        if (m.patches != n) throw ArgumentError("decoder_forward: mask built for a different patch count");
        std::vector<bool> masked = m.masked_flags();
        for (std::size_t i = 0; i < n; ++i) {
            if (masked[i]) {
                sources.push_back({true, 0});
            } else {
                sources.push_back({false, latent_row++});
            }
            pos_index.push_back(i);
            positions.push_back(static_cast<double>(i));
        }
    }
    ad::Var x;
    if (latent_row == 0) {
        // Everything masked: the decoder sees mask tokens only; `latents` may be invalid.
        x = ad::gather_rows(t, vm.at("decoder.mask_token"), std::vector<std::size_t>(sources.size(), 0));
    } else {
        if (!latents.valid() || latent_row != t.value(latents).extent(0))
            throw ShapeError("decoder_forward: latent rows do not match the visible patch count");
        ad::Var z = ad::add_bias(t, ad::matmul(t, latents, vm.at("decoder.embed.w")), vm.at("decoder.embed.b"));
        x = ad::merge_rows(t, z, vm.at("decoder.mask_token"), sources);
    }
    if (!cfg.rope) x = ad::add(t, x, ad::gather_rows(t, vm.at("decoder.pos_embed"), pos_index));
    const SequenceInfo seq{masks.size(), std::move(positions)};
    for (std::size_t i = 0; i < cfg.decoder_layers; ++i)
        x = block_forward(t, x, decoder_block_vars(vm, i), cfg.decoder_heads, seq, cfg);
    x = apply_norm(t, x, vm.at("decoder.norm.g"), vm.get_or("decoder.norm.b"), cfg.rmsnorm);
    return ad::add_bias(t, ad::matmul(t, x, vm.at("decoder.head.w")), vm.at("decoder.head.b"));
}

// Input rows for a batch: patch vectors of the visible patches and the
// matching position indices, image-major.
struct VisibleInput {
    DenseTensor patches;  // (sum visible) x patch_dim
    std::vector<std::size_t> indices;
    std::vector<double> positions;
};

inline VisibleInput gather_visible(const DenseTensor& all_patches, std::size_t n, const std::vector<MaskSpec>& masks) {
    const std::size_t pd = all_patches.extent(1);
    std::size_t rows = 0;
    for (const auto& m : masks) rows += m.visible.size();
    if (rows == 0) throw ArgumentError("every patch is masked; the encoder needs at least one visible patch");
    VisibleInput in{DenseTensor({rows, pd}), {}, {}};
    std::size_t r = 0;
    for (std::size_t b = 0; b < masks.size(); ++b)
        for (std::size_t i : masks[b].visible) {
            std::copy_n(all_patches.data().begin() + (b * n + i) * pd, pd, in.patches.data().begin() + r * pd);
            in.indices.push_back(i);
            in.positions.push_back(static_cast<double>(i));
            ++r;
        }
    return in;
}

// Full masked-autoencoder forward: visible patches through the encoder,
// decoder predictions for every patch. Returns the prediction variable.
// Requires the same number of visible patches in every image.
inline ad::Var mae_forward(ad::Tape& t, const ViTConfig& cfg, const VarMap& vm, const std::vector<LayerVars>& layers,
                           const DenseTensor& patches, const std::vector<MaskSpec>& masks) {
    const std::size_t n = cfg.patches();
    if (patches.rank() != 2 || patches.extent(0) != masks.size() * n || patches.extent(1) != cfg.patch_dim())
        throw ShapeError("mae_forward: patches " + shape_string(patches.shape()) + " do not match " +
                         std::to_string(masks.size()) + " images of " + std::to_string(n) + " patches");
    for (const auto& m : masks)
        if (m.visible.size() != masks.front().visible.size())
            throw ArgumentError("mae_forward: images in a batch must share the visible patch count");
    VisibleInput in = gather_visible(patches, n, masks);
    ad::Var x = embed_patches(t, cfg, vm, t.constant(std::move(in.patches)), in.indices);
    const SequenceInfo seq{masks.size(), std::move(in.positions)};
    ad::Var latent = encoder_forward(t, cfg, vm, layers, x, seq);
    return decoder_forward(t, cfg, vm, latent, masks);
}

// Masked rows of the batch, image-major, for the masked loss.
inline std::vector<bool> masked_rows(const std::vector<MaskSpec>& masks) {
    std::vector<bool> rows;
    for (const auto& m : masks) {
        auto f = m.masked_flags();
        rows.insert(rows.end(), f.begin(), f.end());
    }
    return rows;
}

// Encoder features of whole (unmasked) images, mean-pooled over patches.
inline DenseMatrix encode_pooled(const ViTConfig& cfg, const std::vector<LayerWeights>& theta, const ParamMap& direct,
                                 const DenseTensor& patches, std::size_t images) {
    ad::Tape t;
    VarMap vm(t, direct, [](const std::string&) { return false; });
    const std::size_t n = cfg.patches();
    std::vector<std::size_t> idx;
    std::vector<double> pos;
    for (std::size_t b = 0; b < images; ++b)
        for (std::size_t i = 0; i < n; ++i) {
            idx.push_back(i);
            pos.push_back(static_cast<double>(i));
        }
    ad::Var x = embed_patches(t, cfg, vm, t.constant(patches), idx);
    ad::Var z = encoder_forward(t, cfg, vm, constant_layers(t, theta), x, SequenceInfo{images, pos});
    const DenseTensor& zv = t.value(z);
    DenseMatrix out(images, cfg.width);
    for (std::size_t b = 0; b < images; ++b)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < cfg.width; ++c) out(b, c) += zv[(b * n + i) * cfg.width + c] / static_cast<double>(n);
    return out;
}

// ---- analytic size and cost ------------------------------------------------

struct CountOptions {
    bool include_head = true;
    std::size_t classes = 1000;
    bool class_token = true;  // counts a [CLS] token and its positional slot
};

// Encoder parameter count (patch embedding, positions, blocks, final norm, optional head).
inline std::uint64_t count_params(const ViTConfig& cfg, const CountOptions& opt = {}) {
    cfg.validate();
    const std::uint64_t d = cfg.width, h = cfg.hidden(), pd = cfg.patch_dim();
    const std::uint64_t tokens = cfg.patches() + (opt.class_token ? 1 : 0);
    const std::uint64_t norm = cfg.rmsnorm ? d : 2 * d;
    std::uint64_t total = pd * d + d;
    if (!cfg.rope) total += tokens * d;
    if (opt.class_token) total += d;
    std::uint64_t block = 4 * d * d + 4 * d + 2 * norm;
    block += cfg.swiglu ? (3 * d * h + d) : (2 * d * h + h + d);
    total += cfg.layers * block + norm;
    if (opt.include_head) total += d * opt.classes + opt.classes;
    return total;
}

struct FlopBreakdown {
    std::uint64_t patch_embed = 0;        // multiply-accumulates
    std::uint64_t projections = 0;        // Q, K, V, output projection and MLP
    std::uint64_t attention_scores = 0;   // Q K^T and A V
    std::uint64_t head = 0;

    [[nodiscard]] std::uint64_t block_macs() const noexcept { return projections + attention_scores; }
    [[nodiscard]] std::uint64_t total_macs() const noexcept {
        return patch_embed + projections + attention_scores + head;
    }
    // 2 x (multiply-accumulates of the linear layers); the convention behind
    // the commonly quoted ViT model-size table.
    [[nodiscard]] std::uint64_t linear_flops() const noexcept { return 2 * (patch_embed + projections); }
};

// Multiply-accumulate counts for one forward pass of one image.
inline FlopBreakdown count_flops(const ViTConfig& cfg, const CountOptions& opt = {}) {
    cfg.validate();
    const std::uint64_t d = cfg.width, h = cfg.hidden(), n = cfg.patches();
    const std::uint64_t tokens = n + (opt.class_token ? 1 : 0);
    FlopBreakdown f;
    f.patch_embed = n * cfg.patch_dim() * d;
    const std::uint64_t mlp = cfg.swiglu ? 3 * d * h : 2 * d * h;
    f.projections = cfg.layers * tokens * (4 * d * d + mlp);
    f.attention_scores = cfg.layers * 2 * tokens * tokens * d;
    if (opt.include_head) f.head = d * opt.classes;
    return f;
}

}  // namespace sweet
