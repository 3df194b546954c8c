#pragma once

// Comparison of target initializations under a fixed post-initialization
// training budget, plus a linear probe on synthetic latent classes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "sweet/errors.hpp"
#include "sweet/init_adapt.hpp"
#include "sweet/pretrain.hpp"
#include "sweet/vit.hpp"

namespace sweet {

// Decoder predictions for every patch of `images` images under `masks`.
inline DenseTensor mae_predictions(const ModelParams& m, const DenseTensor& inputs, const std::vector<MaskSpec>& masks) {
    ad::Tape t;
    VarMap vm(t, m.direct, [](const std::string&) { return false; });
    return t.value(mae_forward(t, m.config, vm, constant_layers(t, m.theta), inputs, masks));
}

// ---- linear probe -----------------------------------------------------------

struct ProbeOptions {
    std::size_t iterations = 300;
    double lr = 0.05;
    double l2 = 1e-4;
};

// Multinomial logistic regression on standardized features, trained with
// full-batch Adam; returns held-out accuracy.
inline double linear_probe_features(const DenseMatrix& train_x, const std::vector<int>& train_y,
                                    const DenseMatrix& test_x, const std::vector<int>& test_y,
                                    const ProbeOptions& opt = {}) {
    if (train_x.rows() != train_y.size() || test_x.rows() != test_y.size() || train_x.cols() != test_x.cols())
        throw ShapeError("linear_probe: feature and label counts disagree");
    if (train_y.empty() || test_y.empty()) throw ArgumentError("linear_probe: empty split");
    const int classes = 1 + std::max(*std::max_element(train_y.begin(), train_y.end()),
                                     *std::max_element(test_y.begin(), test_y.end()));
    if (std::all_of(train_y.begin(), train_y.end(), [&](int y) { return y == train_y.front(); }))
        throw ArgumentError("linear_probe: degenerate task, the training labels contain a single class");
    const std::size_t f = train_x.cols(), n = train_x.rows();
    std::vector<double> mean(f, 0.0), inv_sd(f, 0.0);
    for (std::size_t c = 0; c < f; ++c) {
        double s = 0.0, s2 = 0.0;
        for (std::size_t r = 0; r < n; ++r) s += train_x(r, c);
        mean[c] = s / static_cast<double>(n);
        for (std::size_t r = 0; r < n; ++r) s2 += (train_x(r, c) - mean[c]) * (train_x(r, c) - mean[c]);
        const double sd = std::sqrt(s2 / static_cast<double>(n));
        inv_sd[c] = sd > 1e-12 ? 1.0 / sd : 0.0;
    }
    auto standardized = [&](const DenseMatrix& x) {
        DenseMatrix z(x.rows(), f + 1);
        for (std::size_t r = 0; r < x.rows(); ++r) {
            for (std::size_t c = 0; c < f; ++c) z(r, c) = (x(r, c) - mean[c]) * inv_sd[c];
            z(r, f) = 1.0;
        }
        return z;
    };
    const DenseMatrix ztr = standardized(train_x), zte = standardized(test_x);
    const std::size_t k = static_cast<std::size_t>(classes);
    DenseMatrix w(f + 1, k), m(f + 1, k), v(f + 1, k);
    for (std::size_t it = 1; it <= opt.iterations; ++it) {
        DenseMatrix logits = matmul(ztr, w);
        DenseMatrix g(n, k);
        for (std::size_t r = 0; r < n; ++r) {
            double mx = logits(r, 0);
            for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, logits(r, c));
            double z = 0.0;
            for (std::size_t c = 0; c < k; ++c) z += std::exp(logits(r, c) - mx);
            for (std::size_t c = 0; c < k; ++c)
                g(r, c) = (std::exp(logits(r, c) - mx) / z - (static_cast<int>(c) == train_y[r] ? 1.0 : 0.0)) /
                          static_cast<double>(n);
        }
        DenseMatrix gw = matmul(ztr.transpose(), g);
        const double b1 = 0.9, b2 = 0.999;
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double gi = gw.storage()[i] + opt.l2 * w.storage()[i];
            m.storage()[i] = b1 * m.storage()[i] + (1 - b1) * gi;
            v.storage()[i] = b2 * v.storage()[i] + (1 - b2) * gi * gi;
            const double mh = m.storage()[i] / (1 - std::pow(b1, static_cast<double>(it)));
            const double vh = v.storage()[i] / (1 - std::pow(b2, static_cast<double>(it)));
            w.storage()[i] -= opt.lr * mh / (std::sqrt(vh) + 1e-8);
        }
    }
    const DenseMatrix logits = matmul(zte, w);
    std::size_t correct = 0;
    for (std::size_t r = 0; r < zte.rows(); ++r) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < k; ++c)
            if (logits(r, c) > logits(r, best)) best = c;
        correct += static_cast<int>(best) == test_y[r];
    }
    return static_cast<double>(correct) / static_cast<double>(zte.rows());
}

// Mean-pooled encoder features in chunks.
inline DenseMatrix encoder_features(const ModelParams& m, const TrainData& d, std::size_t chunk = 32) {
    DenseMatrix out(d.images, m.config.width);
    for (std::size_t b0 = 0; b0 < d.images; b0 += chunk) {
        std::vector<std::size_t> idx;
        for (std::size_t b = b0; b < std::min(d.images, b0 + chunk); ++b) idx.push_back(b);
        DenseMatrix f = encode_pooled(m.config, m.theta, m.direct, gather_images(d.inputs, d.patches, idx), idx.size());
        for (std::size_t r = 0; r < idx.size(); ++r)
            for (std::size_t c = 0; c < f.cols(); ++c) out(b0 + r, c) = f(r, c);
    }
    return out;
}

// Raw pixels of every image as one feature row.
inline DenseMatrix pixel_features(const TrainData& d) {
    const std::size_t per = d.patches * d.patch_dim();
    DenseMatrix out(d.images, per);
    std::copy(d.inputs.data().begin(), d.inputs.data().end(), out.storage().begin());
    return out;
}

inline double linear_probe(const ModelParams& m, const TrainData& train, const TrainData& test,
                           const ProbeOptions& opt = {}) {
    return linear_probe_features(encoder_features(m, train), train.labels, encoder_features(m, test), test.labels, opt);
}

// ---- strategy comparison ----------------------------------------------------

// One initialization strategy: builds a target model for a (target, seed).
struct EvalArm {
    std::string id;
    std::function<ModelParams(const TargetConfig&, std::uint64_t seed)> init;
    std::size_t budget = 0;  // 0: the shared budget
};

struct EvalData {
    const TrainData* train = nullptr;
    const ValidationSet* val = nullptr;    // final metric
    const ValidationSet* probe = nullptr;  // best-iterate selection during adaptation
};

struct EvalOptions {
    std::size_t budget = 500;
    TrainConfig train;                 // post-initialization training; steps are set from the budget
    std::vector<std::uint64_t> seeds;  // at least 3 for an unflagged summary
    std::size_t record_every = 100;
};

struct EvalRun {
    std::string arm;
    std::string target;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::size_t, double>> curve;  // (step, validation loss)
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::uint64_t data_hash = 0;  // over the whole batch sequence
};

struct EvalSummary {
    std::string target;
    std::string arm;
    std::size_t seeds = 0;
    double mean = 0.0;
    double stddev = 0.0;
    bool flagged = false;  // fewer than 3 seeds
};

struct EvalTable {
    std::vector<EvalRun> runs;
    std::vector<EvalSummary> summary;

    [[nodiscard]] const EvalSummary& row(const std::string& target, const std::string& arm) const {
        for (const auto& s : summary)
            if (s.target == target && s.arm == arm) return s;
        throw ArgumentError("no summary row for " + target + "/" + arm);
    }
};

inline std::string target_label(const TargetConfig& t) {
    return "L" + std::to_string(t.layers) + "H" + std::to_string(t.heads);
}

inline std::uint64_t fold_hash(std::uint64_t h, std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return h;
}

// Trains an initialized target for `budget` steps and records validation loss.
inline EvalRun train_target(const ModelParams& m, const EvalData& d, const TrainConfig& base, std::size_t budget,
                            std::uint64_t seed, std::size_t record_every) {
    TrainState st = make_model_state(m);
    TrainConfig c = base;
    c.steps = budget;
    c.seed = seed;
    c.widths = {};
    EvalRun r;
    r.seed = seed;
    r.initial_loss = validation_loss(st, *d.val);
    r.curve.emplace_back(0, r.initial_loss);
    Trainer tr(st, c, *d.train);
    for (std::size_t k = 1; k <= budget; ++k) {
        tr.step();
        if (k == budget || (record_every && k % record_every == 0)) r.curve.emplace_back(k, validation_loss(st, *d.val));
    }
    r.final_loss = r.curve.back().second;
    for (auto h : tr.batch_hashes()) r.data_hash = fold_hash(r.data_hash, h);
    return r;
}

inline EvalSummary summarize(const std::string& target, const std::string& arm, const std::vector<double>& v) {
    EvalSummary s{target, arm, v.size(), 0.0, 0.0, v.size() < 3};
    for (double x : v) s.mean += x;
    s.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        for (double x : v) s.stddev += (x - s.mean) * (x - s.mean);
        s.stddev = std::sqrt(s.stddev / static_cast<double>(v.size() - 1));
    }
    return s;
}

// Every (target, arm, seed) trains on the same batch and mask sequence for a
// given seed; the harness checks this through per-run data hashes.
inline EvalTable compare_inits(const std::vector<EvalArm>& arms, const std::vector<TargetConfig>& targets,
                               const EvalData& data, const EvalOptions& opt,
                               const std::function<void(const EvalRun&)>& on_run = {}) {
    if (arms.size() < 2) throw ProtocolError("compare_inits: at least two strategies are required");
    if (opt.seeds.empty()) throw ProtocolError("compare_inits: no seeds");
    if (!data.train || !data.val) throw ProtocolError("compare_inits: training and validation data are required");
    for (const auto& a : arms)
        if (a.budget != 0 && a.budget != opt.budget)
            throw ProtocolError("compare_inits: strategy " + a.id + " requests a budget of " +
                                std::to_string(a.budget) + " steps, the comparison uses " +
                                std::to_string(opt.budget));
    EvalTable table;
    for (const auto& tgt : targets) {
        const std::string label = target_label(tgt);
        std::map<std::uint64_t, std::uint64_t> seed_hash;
        for (const auto& arm : arms) {
            std::vector<double> finals;
            for (auto seed : opt.seeds) {
                EvalRun r = train_target(arm.init(tgt, seed), data, opt.train, opt.budget, seed, opt.record_every);
                r.arm = arm.id;
                r.target = label;
                auto [it, fresh] = seed_hash.emplace(seed, r.data_hash);
                if (!fresh && it->second != r.data_hash)
                    throw ProtocolError("compare_inits: strategy " + arm.id + " saw a different batch sequence for seed " +
                                        std::to_string(seed));
                finals.push_back(r.final_loss);
                if (on_run) on_run(r);
                table.runs.push_back(std::move(r));
            }
            table.summary.push_back(summarize(label, arm.id, finals));
        }
    }
    return table;
}

inline void write_eval_table(std::ostream& os, const EvalTable& t) {
    char buf[256];
    os << "target\tstrategy\tseeds\tmean_final_loss\tstd_final_loss\tflag\n";
    for (const auto& s : t.summary) {
        std::snprintf(buf, sizeof buf, "%s\t%s\t%zu\t%.9g\t%.9g\t%s\n", s.target.c_str(), s.arm.c_str(), s.seeds,
                      s.mean, s.stddev, s.flagged ? "FEWER_THAN_3_SEEDS" : "ok");
        os << buf;
    }
}

inline void write_eval_runs(std::ostream& os, const EvalTable& t) {
    char buf[256];
    os << "target\tstrategy\tseed\tstep\tval_loss\n";
    for (const auto& r : t.runs)
        for (const auto& [step, loss] : r.curve) {
            std::snprintf(buf, sizeof buf, "%s\t%s\t%llu\t%zu\t%.9g\n", r.target.c_str(), r.arm.c_str(),
                          static_cast<unsigned long long>(r.seed), step, loss);
            os << buf;
        }
}

// ---- standard arms -------------------------------------------------------------

inline ModelParams random_model(const ViTConfig& cfg, std::uint64_t seed) {
    Rng rng = make_rng(seed, streams::init);
    std::vector<LayerWeights> theta = init_layer_weights(cfg, rng);
    ParamMap direct = init_direct_params(cfg, rng);
    return {cfg, std::move(theta), std::move(direct)};
}

// Fresh target of the source's architecture family.
inline EvalArm random_arm(const ViTConfig& source, std::string id = "random") {
    return {std::move(id), [source](const TargetConfig& t, std::uint64_t seed) { return random_model(t.config(source), seed); }};
}

// Template-based initialization with the given mode.
inline EvalArm sweet_arm(std::string id, SourceModel src, InitMode mode, DirectInit direct, EvalData adapt,
                         TrainConfig adapt_cfg, std::size_t adapt_steps) {
    return {std::move(id),
            [src = std::move(src), mode, direct, adapt, adapt_cfg, adapt_steps](const TargetConfig& t, std::uint64_t seed) {
                TargetConfig tc = t;
                tc.mode = mode;
                tc.direct = direct;
                tc.adapt = adapt_cfg;
                tc.adapt.steps = adapt_steps;
                tc.adapt.seed = seed;
                Rng rng = make_rng(seed, streams::init);
                return initialize_target(src, tc, rng, AdaptData{adapt.train, adapt.probe}).first;
            }};
}

// Prefix sub-block selection from a concrete full-size model.
inline EvalArm select_arm(std::string id, ModelParams full) {
    return {std::move(id), [full = std::move(full)](const TargetConfig& t, std::uint64_t) {
                return weight_selection_baseline(full, t);
            }};
}

}  // namespace sweet
