#pragma once

// Masked-autoencoder training of a factorized (or plain) ViT encoder.
//
// Every trainable tensor of a run lives in one ParamMap. The encoder matrices
// are never stored directly under the Tucker or Kronecker constraints; each
// step rebuilds the unified weight tensor on the tape from its factors, so
// gradients reach only the factors.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "sweet/autodiff.hpp"
#include "sweet/data.hpp"
#include "sweet/errors.hpp"
#include "sweet/masking.hpp"
#include "sweet/rng.hpp"
#include "sweet/tensor.hpp"
#include "sweet/vit.hpp"
#include "sweet/weight_template.hpp"

namespace sweet {

// ---- optimizer ----------------------------------------------------------------

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.95;
    double eps = 1e-8;
    double weight_decay = 0.05;
};

struct AdamWState {
    ParamMap m;
    ParamMap v;
    std::uint64_t t = 0;
};

// Decoupled weight decay: p <- p*(1 - lr*wd) - lr * mhat / (sqrt(vhat) + eps).
// `decays(name)` selects the tensors that receive weight decay.
inline void adamw_step(ParamMap& params, const ParamMap& grads, AdamWState& st, double lr, const AdamWConfig& c,
                       const std::function<bool(const std::string&)>& decays = {}) {
    st.t += 1;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(st.t));
    for (const auto& [name, g] : grads) {
        auto pit = params.find(name);
        if (pit == params.end()) throw ArgumentError("adamw_step: gradient for unknown parameter " + name);
        DenseTensor& p = pit->second;
        if (p.shape() != g.shape())
            throw ShapeError("adamw_step: " + name + " has shape " + shape_string(p.shape()) + " but gradient " +
                             shape_string(g.shape()));
        auto [mit, m_new] = st.m.try_emplace(name, p.shape(), 0.0);
        auto [vit, v_new] = st.v.try_emplace(name, p.shape(), 0.0);
        auto m = mit->second.data();
        auto v = vit->second.data();
        auto pd = p.data();
        const auto gd = g.data();
        const double wd = (c.weight_decay != 0.0 && (!decays || decays(name))) ? c.weight_decay : 0.0;
        for (std::size_t i = 0; i < pd.size(); ++i) {
            m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gd[i];
            v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gd[i] * gd[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            pd[i] = pd[i] * (1.0 - lr * wd) - lr * mhat / (std::sqrt(vhat) + c.eps);
        }
    }
}

// ---- schedule --------------------------------------------------------------------

// Linear warmup from 0 to `peak` over `warmup` steps, then cosine decay
// reaching 0 at `total` (or constant `peak` when cosine is off).
inline double lr_schedule(std::size_t step, std::size_t total, std::size_t warmup, double peak, bool cosine = true) {
    if (warmup > 0 && step < warmup) return peak * static_cast<double>(step) / static_cast<double>(warmup);
    if (!cosine) return peak;
    if (step >= total) return 0.0;
    if (total <= warmup) return peak;
    const double progress = static_cast<double>(step - warmup) / static_cast<double>(total - warmup);
    return peak * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

// ---- configuration ------------------------------------------------------------

enum class Constraint { none, kronecker, tucker };

inline const char* constraint_name(Constraint c) {
    switch (c) {
        case Constraint::none: return "none";
        case Constraint::kronecker: return "kronecker";
        case Constraint::tucker: return "tucker";
    }
    return "?";
}

inline Constraint parse_constraint(const std::string& s) {
    if (s == "none") return Constraint::none;
    if (s == "kronecker") return Constraint::kronecker;
    if (s == "tucker") return Constraint::tucker;
    throw UsageError("unknown constraint '" + s + "' (expected none, kronecker or tucker)");
}

struct TrainConfig {
    std::size_t steps = 200;
    std::size_t batch = 16;
    double lr = 1.5e-3;
    std::optional<std::size_t> warmup;  // default: 5% of steps
    bool cosine = true;
    double mask_ratio = 0.75;
    WidthDistribution widths;           // empty: always full width
    AdamWConfig adamw;
    bool normalize_targets = true;
    std::uint64_t seed = 0;

    [[nodiscard]] std::size_t warmup_steps() const { return warmup ? *warmup : steps / 20; }

    void validate() const {
        if (batch == 0) throw UsageError("batch size must be at least 1");
        if (!(lr > 0.0) && lr != 0.0) throw UsageError("learning rate must be non-negative");
        if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) throw UsageError("mask ratio must lie in (0, 1)");
        if (adamw.weight_decay < 0.0) throw UsageError("weight decay must be non-negative");
    }
};

struct TrainStats {
    std::size_t step = 0;
    double loss = 0.0;
    double lr = 0.0;
    std::size_t keep_u = 0;
    std::size_t keep_v = 0;
    double grad_norm = 0.0;
    double wall_seconds = 0.0;  // not written to logs, which must be reproducible
};

// Tab-separated log record. Wall time is left out so logs are byte-stable.
inline std::string format_stats(const TrainStats& s) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%zu\t%.9g\t%.9g\t%zu\t%zu\t%.9g", s.step, s.loss, s.lr, s.keep_u, s.keep_v,
                  s.grad_norm);
    return buf;
}
inline constexpr const char* kStatsHeader = "step\tloss\tlr\tkeep_u\tkeep_v\tgrad_norm";

// ---- state ---------------------------------------------------------------------

namespace pnames {
inline const std::string core = "template.core";
inline const std::string x = "scalers.x";
inline const std::string u = "scalers.u";
inline const std::string v = "scalers.v";
inline const std::string unified = "weights.unified";
inline const std::string kron_a = "kron.a";
inline const std::string kron_b = "kron.b";

inline bool is_factor(const std::string& n) {
    return n == core || n == x || n == u || n == v || n == unified || n == kron_a || n == kron_b;
}
}  // namespace pnames

// Shape of the sum-of-Kronecker parameterization: every D x D slice is
// sum_t A[s,t] (x) B[t], A[s,t] of size m x m and B[t] of size (D/m) x (D/m).
struct KroneckerShape {
    std::size_t outer = 2;  // m
    std::size_t terms = 8;  // shared B factors
};

struct TrainState {
    ViTConfig cfg;
    Constraint constraint = Constraint::tucker;
    KroneckerShape kron;
    ParamMap params;  // factors (or free unified weights) plus direct parameters
    std::set<std::string> frozen;
    AdamWState opt;
    std::size_t step = 0;

    [[nodiscard]] bool trainable(const std::string& name) const { return frozen.count(name) == 0; }

    [[nodiscard]] ParamMap direct() const {
        ParamMap out;
        for (const auto& [n, t] : params)
            if (!pnames::is_factor(n)) out.emplace(n, t);
        return out;
    }

    [[nodiscard]] Template tmpl() const {
        require(Constraint::tucker);
        return {params.at(pnames::core)};
    }
    [[nodiscard]] Scalers scalers() const {
        require(Constraint::tucker);
        return {DenseMatrix::from_tensor(params.at(pnames::x)), DenseMatrix::from_tensor(params.at(pnames::u)),
                DenseMatrix::from_tensor(params.at(pnames::v))};
    }
    void set_scalers(const Scalers& s) {
        require(Constraint::tucker);
        params[pnames::x] = s.x.to_tensor();
        params[pnames::u] = s.u.to_tensor();
        params[pnames::v] = s.v.to_tensor();
    }

private:
    void require(Constraint c) const {
        if (constraint != c)
            throw UsageError(std::string("operation needs a ") + constraint_name(c) + " state, this one is " +
                             constraint_name(constraint));
    }
};

// Rounds every stored value to the nearest 32-bit float, the storage precision.
inline void quantize_f32(DenseTensor& t) {
    for (double& v : t.data()) v = static_cast<double>(static_cast<float>(v));
}
inline void quantize_f32(ParamMap& p) {
    for (auto& [n, t] : p) quantize_f32(t);
}
inline void quantize_f32(Scalers& s) {
    for (DenseMatrix* m : {&s.x, &s.u, &s.v})
        for (double& v : m->data()) v = static_cast<double>(static_cast<float>(v));
}

// Target standard deviation of a freshly realized D x D weight block.
inline double init_weight_std(std::size_t width) { return 1.0 / std::sqrt(static_cast<double>(width)); }

inline DenseTensor kronecker_unified(const DenseTensor& a, const DenseTensor& b, const KroneckerShape& k) {
    // (R, b, b) x1 A  ->  (S*L*m*m, b, b)  ->  (S*L, m*b, m*b)
    return kronecker_flatten(mode_n_product(b, DenseMatrix::from_tensor(a), 1), k.outer, k.outer);
}

// Fresh state. Factor initialization draws before the direct parameters,
// both from the run's init stream.
inline TrainState make_state(const ViTConfig& cfg, Constraint constraint, std::array<std::size_t, 3> ranks,
                             std::uint64_t seed, KroneckerShape kron = {}) {
    cfg.validate();
    Rng rng = make_rng(seed, streams::init);
    TrainState st;
    st.cfg = cfg;
    st.constraint = constraint;
    st.kron = kron;
    const LayoutDescriptor layout = cfg.layout();
    const double target_std = init_weight_std(cfg.width);
    switch (constraint) {
        case Constraint::tucker: {
            check_ranks(layout, ranks);
            Template tmpl{DenseTensor({ranks[0], ranks[1], ranks[2]})};
            fill_normal(tmpl.core.data(), rng);
            Scalers s = random_scalers(rng, layout, tmpl, target_std);
            st.params[pnames::core] = tmpl.core;
            st.set_scalers(s);
            break;
        }
        case Constraint::none: {
            st.params[pnames::unified] = concat_weights(init_layer_weights(cfg, rng), layout).w;
            break;
        }
        case Constraint::kronecker: {
            if (kron.outer == 0 || kron.terms == 0 || cfg.width % kron.outer != 0)
                throw ArgumentError("Kronecker outer size must divide the width");
            const std::size_t b = cfg.width / kron.outer;
            DenseTensor a({layout.slice_count() * kron.outer * kron.outer, kron.terms});
            DenseTensor bt({kron.terms, b, b});
            fill_normal(a.data(), rng);
            fill_normal(bt.data(), rng);
            const double measured = population_std(kronecker_unified(a, bt, kron).data());
            const double f = std::sqrt(target_std / measured);
            for (double& v : a.data()) v *= f;
            for (double& v : bt.data()) v *= f;
            st.params[pnames::kron_a] = std::move(a);
            st.params[pnames::kron_b] = std::move(bt);
            break;
        }
    }
    for (auto& [n, t] : init_direct_params(cfg, rng)) st.params.emplace(n, std::move(t));
    return st;
}

// Plain (unconstrained) state holding a concrete model, for post-initialization training.
inline TrainState make_model_state(const ModelParams& m) {
    TrainState st;
    st.cfg = m.config;
    st.constraint = Constraint::none;
    st.params = m.direct;
    st.params[pnames::unified] = concat_weights(m.theta, m.config.layout()).w;
    return st;
}

// Realized unified weights of the current state, outside any tape.
inline UnifiedWeightTensor realized_unified(const TrainState& st) {
    const LayoutDescriptor layout = st.cfg.layout();
    switch (st.constraint) {
        case Constraint::tucker: return reconstruct(st.tmpl(), st.scalers(), layout);
        case Constraint::none: return {st.params.at(pnames::unified), layout};
        case Constraint::kronecker:
            return {kronecker_unified(st.params.at(pnames::kron_a), st.params.at(pnames::kron_b), st.kron), layout};
    }
    throw UsageError("unknown constraint");
}

inline ModelParams realized_model(const TrainState& st) {
    return {st.cfg, split_weights(realized_unified(st)), st.direct()};
}

// Unified weights as a tape variable, width mask applied.
inline ad::Var unified_var(ad::Tape& t, const TrainState& st, const VarMap& vm, const WidthMask& mask) {
    const std::size_t d = st.cfg.width;
    const bool full = mask.is_full(d);
    switch (st.constraint) {
        case Constraint::tucker: {
            ad::Var u = vm.at(pnames::u), v = vm.at(pnames::v);
            if (!full) {
                const auto& uv = t.value(u);
                u = ad::mul(t, u, t.constant(mask.mask_u(d, uv.extent(1)).to_tensor()));
                v = ad::mul(t, v, t.constant(mask.mask_v(d, t.value(v).extent(1)).to_tensor()));
            }
            ad::Var w = ad::mode_product(t, vm.at(pnames::core), vm.at(pnames::x), 1);
            w = ad::mode_product(t, w, u, 2);
            return ad::mode_product(t, w, v, 3);
        }
        case Constraint::none:
        case Constraint::kronecker: {
            ad::Var w = st.constraint == Constraint::none
                            ? vm.at(pnames::unified)
                            : ad::kronecker_flatten(
                                  t, ad::mode_product(t, vm.at(pnames::kron_b), vm.at(pnames::kron_a), 1),
                                  st.kron.outer, st.kron.outer);
            if (full) return w;
            const std::size_t slices = t.value(w).extent(0);
            DenseTensor m({slices, d, d});
            for (std::size_t s = 0; s < slices; ++s)
                for (std::size_t i = 0; i < mask.keep_u; ++i)
                    for (std::size_t j = 0; j < mask.keep_v; ++j) m(s, i, j) = 1.0;
            return ad::mul(t, w, t.constant(std::move(m)));
        }
    }
    throw UsageError("unknown constraint");
}

// ---- data --------------------------------------------------------------------

// A dataset patchified once, with the reconstruction targets precomputed.
struct TrainData {
    std::size_t images = 0;
    std::size_t patches = 0;  // N
    DenseTensor inputs;       // (images*N) x patch_dim
    DenseTensor targets;      // same shape; per-patch normalized when requested
    std::vector<int> labels;

    [[nodiscard]] std::size_t patch_dim() const { return inputs.extent(1); }
};

inline TrainData prepare_data(const ImageBatch& images, const ViTConfig& cfg, bool normalize_targets = true) {
    if (images.height != cfg.image || images.width != cfg.image || images.channels != cfg.channels)
        throw ArgumentError("dataset images are " + std::to_string(images.height) + "x" +
                            std::to_string(images.width) + "x" + std::to_string(images.channels) +
                            " but the model expects " + std::to_string(cfg.image) + "x" + std::to_string(cfg.image) +
                            "x" + std::to_string(cfg.channels));
    PatchBatch pb = patchify(images, cfg.patch);
    TrainData d;
    d.images = images.count;
    d.patches = pb.patches;
    d.targets = normalize_targets ? normalize_patches(pb.data) : pb.data;
    d.inputs = std::move(pb.data);
    d.labels = images.labels;
    return d;
}

inline DenseTensor gather_images(const DenseTensor& rows, std::size_t n, const std::vector<std::size_t>& images) {
    const std::size_t pd = rows.extent(1);
    DenseTensor out({images.size() * n, pd});
    for (std::size_t b = 0; b < images.size(); ++b)
        std::copy_n(rows.data().begin() + images[b] * n * pd, n * pd, out.data().begin() + b * n * pd);
    return out;
}

// Image order for training: a fresh seeded permutation per epoch, consumed
// in fixed-size batches. Epoch boundaries wrap without short batches.
class BatchStream {
public:
    BatchStream(std::size_t dataset_size, std::size_t batch, std::uint64_t seed)
        : size_(dataset_size), batch_(batch), rng_(make_rng(seed, streams::data)) {
        if (dataset_size == 0) throw ArgumentError("training data is empty");
        if (batch == 0) throw ArgumentError("batch size must be at least 1");
    }

    std::vector<std::size_t> next() {
        std::vector<std::size_t> out;
        out.reserve(batch_);
        while (out.size() < batch_) {
            if (cursor_ == order_.size()) {
                order_.resize(size_);
                std::iota(order_.begin(), order_.end(), std::size_t{0});
                std::shuffle(order_.begin(), order_.end(), rng_);
                cursor_ = 0;
            }
            out.push_back(order_[cursor_++]);
        }
        return out;
    }

    // Restart support: advance past the first `batches` batches.
    void skip(std::size_t batches) {
        for (std::size_t i = 0; i < batches; ++i) next();
    }

private:
    std::size_t size_, batch_;
    Rng rng_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
};

// FNV-1a over the image indices and masked positions of one batch.
inline std::uint64_t batch_hash(const std::vector<std::size_t>& images, const std::vector<MaskSpec>& masks) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xffu;
            h *= 1099511628211ull;
        }
    };
    for (auto i : images) mix(i);
    for (const auto& m : masks) {
        mix(m.masked.size());
        for (auto i : m.masked) mix(i);
    }
    return h;
}

// ---- one optimization step ------------------------------------------------------

struct StepInput {
    DenseTensor inputs;   // (B*N) x patch_dim
    DenseTensor targets;  // (B*N) x patch_dim
    std::vector<MaskSpec> masks;
    WidthMask width;
};

struct LossAndGrads {
    double loss = 0.0;
    ParamMap grads;
};

// Masked reconstruction loss of the state on one batch; gradients for every
// trainable parameter when `with_grads`.
inline LossAndGrads mae_objective(const TrainState& st, const StepInput& in, bool with_grads) {
    ad::Tape t;
    VarMap vm(t, st.params, [&](const std::string& n) { return with_grads && st.trainable(n); });
    const LayoutDescriptor layout = st.cfg.layout();
    ad::Var w = unified_var(t, st, vm, in.width);
    auto layers = split_unified(t, w, layout);
    ad::Var pred = mae_forward(t, st.cfg, vm, layers, in.inputs, in.masks);
    ad::Var loss = ad::masked_squared_error(t, pred, in.targets, masked_rows(in.masks));
    LossAndGrads out{t.value(loss)[0], {}};
    if (with_grads) out.grads = ad::backward(t, loss);
    return out;
}

inline bool decays(const std::string& name, const DenseTensor& value) {
    if (value.rank() < 2) return false;
    return name.find("pos_embed") == std::string::npos && name.find("mask_token") == std::string::npos;
}

inline double global_norm(const ParamMap& grads) {
    double s = 0.0;
    for (const auto& [n, g] : grads)
        for (double v : g.data()) s += v * v;
    return std::sqrt(s);
}

inline std::string numeric_snapshot(const TrainState& st, const StepInput& in, double loss, double lr) {
    std::string msg = "non-finite loss " + std::to_string(loss) + " at step " + std::to_string(st.step) +
                      " (lr " + std::to_string(lr) + ", keep_u " + std::to_string(in.width.keep_u) + ", keep_v " +
                      std::to_string(in.width.keep_v) + "); parameter norms:";
    for (const auto& [n, t] : st.params) msg += " " + n + "=" + std::to_string(frobenius_norm(t.data()));
    return msg;
}

// Forward, backward, and one AdamW update at learning rate `lr`.
inline TrainStats train_step(TrainState& st, const StepInput& in, double lr, const AdamWConfig& adamw) {
    const auto t0 = std::chrono::steady_clock::now();
    LossAndGrads lg = mae_objective(st, in, true);
    const double gn = global_norm(lg.grads);
    if (!std::isfinite(lg.loss) || !std::isfinite(gn)) throw NumericError(numeric_snapshot(st, in, lg.loss, lr));
    for (auto it = lg.grads.begin(); it != lg.grads.end();)
        it = st.trainable(it->first) ? std::next(it) : lg.grads.erase(it);
    adamw_step(st.params, lg.grads, st.opt, lr, adamw,
               [&](const std::string& n) { return decays(n, st.params.at(n)); });
    TrainStats s{st.step, lg.loss, lr, in.width.keep_u, in.width.keep_v, gn, 0.0};
    st.step += 1;
    s.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return s;
}

// ---- validation -------------------------------------------------------------------

// A fixed held-out set with fixed masks, evaluated at full width.
struct ValidationSet {
    TrainData data;
    std::vector<MaskSpec> masks;  // one per image
    std::size_t chunk = 16;
};

inline ValidationSet make_validation_set(TrainData data, double ratio, std::uint64_t seed) {
    Rng rng = make_rng(seed, streams::validation);
    ValidationSet v;
    for (std::size_t i = 0; i < data.images; ++i) v.masks.push_back(mask_patches(data.patches, ratio, rng));
    v.data = std::move(data);
    return v;
}

// Mean over all masked patches of the held-out set.
inline double validation_loss(const TrainState& st, const ValidationSet& v) {
    const std::size_t n = v.data.patches;
    double total = 0.0;
    std::size_t masked = 0;
    for (std::size_t b0 = 0; b0 < v.data.images; b0 += v.chunk) {
        std::vector<std::size_t> idx;
        for (std::size_t b = b0; b < std::min(v.data.images, b0 + v.chunk); ++b) idx.push_back(b);
        StepInput in{gather_images(v.data.inputs, n, idx), gather_images(v.data.targets, n, idx), {},
                     WidthMask{st.cfg.width, st.cfg.width}};
        std::size_t count = 0;
        for (auto b : idx) {
            in.masks.push_back(v.masks[b]);
            count += v.masks[b].masked.size();
        }
        total += mae_objective(st, in, false).loss * static_cast<double>(count);
        masked += count;
    }
    return total / static_cast<double>(masked);
}

// ---- training loop ------------------------------------------------------------

// Owns the data order, mask and width generators of one run. All three are
// separate streams of the run seed, so enabling width sampling does not
// change the image order or the masks.
class Trainer {
public:
    Trainer(TrainState& state, TrainConfig cfg, const TrainData& data)
        : st_(state),
          cfg_(std::move(cfg)),
          data_(data),
          batches_(data.images, cfg_.batch, cfg_.seed),
          mask_rng_(make_rng(cfg_.seed, streams::mask)),
          width_rng_(make_rng(cfg_.seed, streams::width)) {
        cfg_.validate();
        if (data.patches != st_.cfg.patches()) throw ArgumentError("training data patch count does not match model");
        if (!cfg_.widths.widths.empty()) cfg_.widths.validate(st_.cfg.width);
    }

    // Draws the next batch, masks and width configuration.
    StepInput next_input() {
        std::vector<std::size_t> idx = batches_.next();
        StepInput in{gather_images(data_.inputs, data_.patches, idx), gather_images(data_.targets, data_.patches, idx),
                     {}, WidthMask{st_.cfg.width, st_.cfg.width}};
        for (std::size_t b = 0; b < idx.size(); ++b) in.masks.push_back(mask_patches(data_.patches, cfg_.mask_ratio, mask_rng_));
        if (!cfg_.widths.widths.empty()) in.width = sample_width_config(width_rng_, cfg_.widths, st_.cfg.width);
        hashes_.push_back(batch_hash(idx, in.masks));
        return in;
    }

    TrainStats step() {
        StepInput in = next_input();
        const double lr = lr_schedule(step_, cfg_.steps, cfg_.warmup_steps(), cfg_.lr, cfg_.cosine);
        ++step_;
        return train_step(st_, in, lr, cfg_.adamw);
    }

    // Runs the configured number of steps; `on_step` sees every record.
    std::vector<TrainStats> run(const std::function<void(const TrainStats&)>& on_step = {}) {
        std::vector<TrainStats> out;
        while (step_ < cfg_.steps) {
            out.push_back(step());
            if (on_step) on_step(out.back());
        }
        return out;
    }

    [[nodiscard]] const std::vector<std::uint64_t>& batch_hashes() const noexcept { return hashes_; }
    [[nodiscard]] const TrainConfig& config() const noexcept { return cfg_; }

private:
    TrainState& st_;
    TrainConfig cfg_;
    const TrainData& data_;
    BatchStream batches_;
    Rng mask_rng_;
    Rng width_rng_;
    std::size_t step_ = 0;
    std::vector<std::uint64_t> hashes_;
};

inline void write_log(std::ostream& os, const std::vector<TrainStats>& stats) {
    os << kStatsHeader << '\n';
    for (const auto& s : stats) os << format_stats(s) << '\n';
}

}  // namespace sweet
