#pragma once

// Target-model initialization from a trained template: inherit (slice),
// random, or adapt (inherit/random followed by scaler-only MAE training with
// the core frozen). The result is a standalone model with materialized weights.

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sweet/errors.hpp"
#include "sweet/pretrain.hpp"
#include "sweet/vit.hpp"
#include "sweet/weight_template.hpp"

namespace sweet {

enum class InitMode { inherit, random, adapt };
enum class DirectInit { fresh, inherit };

inline const char* init_mode_name(InitMode m) {
    switch (m) {
        case InitMode::inherit: return "inherit";
        case InitMode::random: return "random";
        case InitMode::adapt: return "adapt";
    }
    return "?";
}

inline InitMode parse_init_mode(const std::string& s) {
    if (s == "inherit") return InitMode::inherit;
    if (s == "random") return InitMode::random;
    if (s == "adapt") return InitMode::adapt;
    throw UsageError("unknown mode '" + s + "' (expected inherit, random or adapt)");
}

inline DepthStrategy parse_depth_strategy(const std::string& s) {
    if (s == "first") return DepthStrategy::first_layers;
    if (s == "stride") return DepthStrategy::even_stride;
    throw UsageError("unknown depth strategy '" + s + "' (expected first or stride)");
}

inline DirectInit parse_direct_init(const std::string& s) {
    if (s == "fresh") return DirectInit::fresh;
    if (s == "inherit") return DirectInit::inherit;
    throw UsageError("unknown direct-parameter mode '" + s + "' (expected fresh or inherit)");
}

struct TargetConfig {
    std::size_t layers = 2;
    std::size_t heads = 2;
    InitMode mode = InitMode::inherit;
    DepthStrategy depth = DepthStrategy::first_layers;
    DirectInit direct = DirectInit::fresh;
    // Adaptation: steps and optimizer settings; starts from inherited scalers
    // when the target fits inside the source, random ones otherwise.
    TrainConfig adapt = [] {
        TrainConfig c;
        c.steps = 200;
        return c;
    }();
    std::size_t adapt_eval_every = 10;

    [[nodiscard]] ViTConfig config(const ViTConfig& source) const { return source.resized(layers, heads); }
};

struct InitReport {
    InitMode mode = InitMode::inherit;
    std::size_t adapt_steps = 0;
    std::optional<double> initial_loss;
    std::optional<double> final_loss;
    std::size_t best_step = 0;
    std::size_t template_params = 0;
    std::size_t scaler_params = 0;
    std::size_t model_params = 0;

    [[nodiscard]] std::string to_text() const {
        std::ostringstream os;
        os << "mode=" << init_mode_name(mode) << "\nadapt_steps=" << adapt_steps << "\nbest_step=" << best_step;
        if (initial_loss) os << "\ninitial_loss=" << *initial_loss;
        if (final_loss) os << "\nfinal_loss=" << *final_loss;
        os << "\ntemplate_params=" << template_params << "\nscaler_params=" << scaler_params
           << "\nmodel_params=" << model_params << '\n';
        return os.str();
    }
};

// A pretrained factorized source: template, scalers and direct parameters.
struct SourceModel {
    ViTConfig cfg;
    Template tmpl;
    Scalers scalers;
    ParamMap direct;
};

inline SourceModel source_from_state(const TrainState& st) { return {st.cfg, st.tmpl(), st.scalers(), st.direct()}; }

inline std::size_t model_param_count(const ModelParams& m) {
    std::size_t n = 0;
    for (const auto& lw : m.theta)
        n += lw.wq.size() + lw.wk.size() + lw.wv.size() + lw.wo.size() + lw.win.size() + lw.wgate.size() +
             lw.wout.size();
    for (const auto& [name, t] : m.direct) n += t.size();
    return n;
}

// ---- width/depth slicing of concrete tensors ----------------------------------

namespace detail {

// Index map from a target axis onto a source axis.
inline std::vector<std::size_t> axis_map(std::size_t src_extent, std::size_t tgt_extent, const ViTConfig& src,
                                         const ViTConfig& tgt, const std::string& name) {
    std::vector<std::size_t> map(tgt_extent);
    if (src_extent == tgt_extent) {
        std::iota(map.begin(), map.end(), std::size_t{0});
    } else if (src_extent == src.hidden() && tgt_extent == tgt.hidden()) {
        // Hidden axis: mlp_ratio blocks of width D, each sliced to its prefix.
        for (std::size_t j = 0; j < tgt_extent; ++j) map[j] = (j / tgt.width) * src.width + j % tgt.width;
    } else if (src_extent == src.width && tgt_extent == tgt.width) {
        std::iota(map.begin(), map.end(), std::size_t{0});
    } else {
        throw LayoutError("cannot map axis of " + name + " from extent " + std::to_string(src_extent) + " to " +
                          std::to_string(tgt_extent));
    }
    return map;
}

inline std::string source_name(const std::string& name, const std::vector<std::size_t>& layers) {
    static const std::string prefix = "blocks.";
    if (name.rfind(prefix, 0) != 0) return name;
    const std::size_t dot = name.find('.', prefix.size());
    const std::size_t i = std::stoul(name.substr(prefix.size(), dot - prefix.size()));
    return prefix + std::to_string(layers.at(i)) + name.substr(dot);
}

}  // namespace detail

// Gathers `src` through per-axis index maps into a tensor of `shape`.
inline DenseTensor gather_axes(const DenseTensor& src, const Shape& shape,
                               const std::vector<std::vector<std::size_t>>& maps) {
    DenseTensor out(shape);
    const std::size_t rank = shape.size();
    std::vector<std::size_t> idx(rank, 0), src_stride(rank, 1);
    for (std::size_t k = rank - 1; k-- > 0;) src_stride[k] = src_stride[k + 1] * src.extent(k + 1);
    for (std::size_t flat = 0; flat < out.size(); ++flat) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < rank; ++k) off += maps[k][idx[k]] * src_stride[k];
        out.data()[flat] = src.data()[off];
        for (std::size_t k = rank; k-- > 0;) {
            if (++idx[k] < shape[k]) break;
            idx[k] = 0;
        }
    }
    return out;
}

// Direct parameters of a smaller target copied from the source: width axes
// keep their prefix (block-wise on the MLP hidden axis), blocks come from the
// selected source layers.
inline ParamMap slice_direct_params(const ViTConfig& src_cfg, const ParamMap& src, const ViTConfig& tgt_cfg,
                                    const std::vector<std::size_t>& layers) {
    Rng shape_rng(0);
    const ParamMap shapes = init_direct_params(tgt_cfg, shape_rng);
    ParamMap out;
    for (const auto& [name, proto] : shapes) {
        const std::string sname = detail::source_name(name, layers);
        auto it = src.find(sname);
        if (it == src.end()) throw LayoutError("source model has no parameter " + sname);
        const DenseTensor& s = it->second;
        if (s.rank() != proto.rank()) throw LayoutError("rank mismatch for " + name);
        std::vector<std::vector<std::size_t>> maps;
        for (std::size_t k = 0; k < proto.rank(); ++k)
            maps.push_back(detail::axis_map(s.extent(k), proto.extent(k), src_cfg, tgt_cfg, name));
        out.emplace(name, gather_axes(s, proto.shape(), maps));
    }
    return out;
}

// Top-left (D* x D*) block of every slice of the selected layers.
inline UnifiedWeightTensor slice_unified(const UnifiedWeightTensor& src, const LayoutDescriptor& tgt,
                                         DepthStrategy strategy) {
    const LayoutDescriptor& sl = src.layout;
    if (tgt.width() > sl.width() || tgt.layers() > sl.layers())
        throw CapabilityError("target is larger than the source model; selection needs a smaller target");
    if (tgt.slices_per_layer() != sl.slices_per_layer()) throw LayoutError("layouts differ in slices per layer");
    const auto layers = select_layers(sl.layers(), tgt.layers(), strategy);
    const std::size_t per = sl.slices_per_layer(), d = tgt.width(), sd = sl.width();
    DenseTensor w({tgt.slice_count(), d, d});
    for (std::size_t l = 0; l < layers.size(); ++l)
        for (std::size_t k = 0; k < per; ++k)
            for (std::size_t i = 0; i < d; ++i)
                std::copy_n(src.w.data().begin() + ((layers[l] * per + k) * sd + i) * sd, d,
                            w.data().begin() + ((l * per + k) * d + i) * d);
    return {std::move(w), tgt};
}

// Baseline: reuse prefix sub-blocks of a trained full model's weights.
inline ModelParams weight_selection_baseline(const ModelParams& full, const TargetConfig& tgt) {
    const ViTConfig tcfg = tgt.config(full.config);
    tcfg.validate();
    const UnifiedWeightTensor u = concat_weights(full.theta, full.config.layout());
    const UnifiedWeightTensor sliced = slice_unified(u, tcfg.layout(), tgt.depth);
    const auto layers = select_layers(full.config.layers, tcfg.layers, tgt.depth);
    return {tcfg, split_weights(sliced), slice_direct_params(full.config, full.direct, tcfg, layers)};
}

// ---- adaptation ---------------------------------------------------------------

struct AdaptResult {
    Scalers scalers;
    ParamMap direct;
    double initial_loss = 0.0;
    double best_loss = 0.0;
    std::size_t best_step = 0;
    std::size_t steps = 0;
};

// Scaler-only MAE training with the core frozen. Target direct parameters
// train jointly. The iterate with the lowest loss on a fixed held-out batch
// (checked every `eval_every` steps and at the end) is returned.
inline AdaptResult adapt_scalers(const Template& tmpl, const Scalers& scalers, const ViTConfig& tcfg,
                                 const ParamMap& direct, const TrainData& data, const ValidationSet& probe,
                                 const TrainConfig& cfg, std::size_t eval_every = 10) {
    TrainState st;
    st.cfg = tcfg;
    st.constraint = Constraint::tucker;
    st.params = direct;
    st.params[pnames::core] = tmpl.core;
    st.set_scalers(scalers);
    st.frozen = {pnames::core};
    AdaptResult r{scalers, direct, validation_loss(st, probe), 0.0, 0, 0};
    r.best_loss = r.initial_loss;
    TrainConfig c = cfg;
    c.widths = {};
    Trainer tr(st, c, data);
    for (std::size_t k = 1; k <= c.steps; ++k) {
        tr.step();
        if ((eval_every && k % eval_every == 0) || k == c.steps) {
            const double l = validation_loss(st, probe);
            if (l < r.best_loss) {
                r.best_loss = l;
                r.best_step = k;
                r.scalers = st.scalers();
                r.direct = st.direct();
            }
        }
    }
    r.steps = c.steps;
    return r;
}

// Data for adaptation: the training images and a fixed held-out probe set.
struct AdaptData {
    const TrainData* train = nullptr;
    const ValidationSet* probe = nullptr;
};

// Builds a standalone target. Factors are rounded to f32 before the weights
// are materialized, so recomputing the weights from a saved checkpoint
// reproduces them exactly.
inline std::pair<ModelParams, InitReport> initialize_target(const SourceModel& src, const TargetConfig& tgt, Rng& rng,
                                                            const AdaptData& data = {}) {
    const ViTConfig tcfg = tgt.config(src.cfg);
    tcfg.validate();
    if (tcfg.layers == 0) throw ArgumentError("target depth must be at least 1");
    const LayoutDescriptor tl = tcfg.layout();
    const bool fits = tcfg.layers <= src.cfg.layers && tcfg.width <= src.cfg.width;
    if (tgt.mode == InitMode::inherit && !fits)
        throw CapabilityError("cannot inherit scalers: target (L=" + std::to_string(tcfg.layers) +
                              ", D=" + std::to_string(tcfg.width) + ") exceeds the source (L=" +
                              std::to_string(src.cfg.layers) + ", D=" + std::to_string(src.cfg.width) +
                              "); use --mode random or --mode adapt");
    if (tgt.direct == DirectInit::inherit && !fits)
        throw CapabilityError("cannot inherit direct parameters into a larger target; use fresh direct parameters");

    Template tmpl = src.tmpl;
    quantize_f32(tmpl.core);
    Scalers s = (tgt.mode == InitMode::random || !fits)
                    ? random_scalers(rng, tl, tmpl, init_weight_std(tcfg.width))
                    : slice_scalers(src.scalers, src.cfg.layout(), tcfg.layers, tcfg.width, tgt.depth);
    ParamMap direct = tgt.direct == DirectInit::inherit
                          ? slice_direct_params(src.cfg, src.direct, tcfg,
                                                select_layers(src.cfg.layers, tcfg.layers, tgt.depth))
                          : init_direct_params(tcfg, rng);

    InitReport rep;
    rep.mode = tgt.mode;
    if (tgt.mode == InitMode::adapt && tgt.adapt.steps > 0) {
        if (!data.train || !data.probe) throw UsageError("adapt mode needs adaptation data");
        AdaptResult ar = adapt_scalers(tmpl, s, tcfg, direct, *data.train, *data.probe, tgt.adapt,
                                       tgt.adapt_eval_every);
        s = std::move(ar.scalers);
        direct = std::move(ar.direct);
        rep.adapt_steps = ar.steps;
        rep.initial_loss = ar.initial_loss;
        rep.final_loss = ar.best_loss;
        rep.best_step = ar.best_step;
    }
    quantize_f32(s);
    ModelParams m{tcfg, split_weights(reconstruct(tmpl, s, tl)), std::move(direct)};
    rep.template_params = template_param_count(tmpl);
    rep.scaler_params = scaler_param_count(s);
    rep.model_params = model_param_count(m);
    return {std::move(m), rep};
}

}  // namespace sweet
