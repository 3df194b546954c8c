// sweet: command-line front end.
//
//   sweet pretrain      train a weight template with masked autoencoding
//   sweet init          build a standalone target model from a template
//   sweet adapt         init --mode adapt
//   sweet eval          compare initialization strategies
//   sweet verify        run the built-in oracle checks
//   sweet export-images dump masked-autoencoder reconstructions
//
// Every command takes --seed (falling back to $SWEET_SEED) and --config FILE
// with key=value lines naming long options. Flags given on the command line
// take precedence over the file.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "sweet/sweet.hpp"

namespace {

using namespace sweet;

// ---- shared option groups -------------------------------------------------------

struct ModelFlags {
    ViTConfig cfg;
    void add(CLI::App* app) {
        app->add_option("--layers", cfg.layers, "encoder depth L")->capture_default_str();
        app->add_option("--heads", cfg.heads, "attention heads h")->capture_default_str();
        app->add_option("--head-dim", cfg.head_dim, "per-head dimension d")->capture_default_str();
        app->add_option("--mlp-ratio", cfg.mlp_ratio, "MLP hidden width / D")->capture_default_str();
        app->add_option("--patch", cfg.patch, "patch edge length")->capture_default_str();
        app->add_option("--image", cfg.image, "image edge length")->capture_default_str();
        app->add_option("--channels", cfg.channels, "image channels")->capture_default_str();
        app->add_flag("--swiglu", cfg.swiglu, "gated SiLU MLP");
        app->add_flag("--rmsnorm", cfg.rmsnorm, "RMS normalization");
        app->add_flag("--rope", cfg.rope, "rotary position embeddings");
        app->add_option("--decoder-layers", cfg.decoder_layers)->capture_default_str();
        app->add_option("--decoder-width", cfg.decoder_width)->capture_default_str();
        app->add_option("--decoder-heads", cfg.decoder_heads)->capture_default_str();
    }
    ViTConfig resolved() {
        cfg.width = cfg.heads * cfg.head_dim;
        cfg.validate();
        return cfg;
    }
};

struct TrainFlags {
    TrainConfig tc;
    std::size_t warmup = std::numeric_limits<std::size_t>::max();
    bool no_cosine = false;
    bool raw_targets = false;
    void add(CLI::App* app, const char* prefix = "") {
        const std::string p = prefix;
        app->add_option("--" + p + "batch", tc.batch, "images per step")->capture_default_str();
        app->add_option("--" + p + "lr", tc.lr, "peak learning rate")->capture_default_str();
        app->add_option("--" + p + "warmup", warmup, "warmup steps (default 5% of steps)");
        app->add_option("--" + p + "weight-decay", tc.adamw.weight_decay)->capture_default_str();
        app->add_option("--" + p + "mask-ratio", tc.mask_ratio)->capture_default_str();
        app->add_flag("--" + p + "no-cosine", no_cosine, "constant learning rate after warmup");
        app->add_flag("--" + p + "raw-targets", raw_targets, "reconstruct raw pixels instead of normalized patches");
    }
    TrainConfig resolved(std::size_t steps, std::uint64_t seed) {
        TrainConfig c = tc;
        c.steps = steps;
        c.seed = seed;
        if (warmup != std::numeric_limits<std::size_t>::max()) c.warmup = warmup;
        c.cosine = !no_cosine;
        c.normalize_targets = !raw_targets;
        c.validate();
        return c;
    }
};

Json train_json(const TrainConfig& c) {
    Json j{{"steps", c.steps},       {"batch", c.batch},   {"lr", c.lr},
           {"warmup", c.warmup_steps()}, {"cosine", c.cosine}, {"mask_ratio", c.mask_ratio},
           {"weight_decay", c.adamw.weight_decay}, {"beta1", c.adamw.beta1}, {"beta2", c.adamw.beta2},
           {"adam_eps", c.adamw.eps}, {"normalize_targets", c.normalize_targets}, {"seed", c.seed}};
    j["widths"] = c.widths.widths;
    j["width_probs"] = c.widths.probs;
    return j;
}

std::vector<std::size_t> parse_list(const std::string& s, const char* what) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t pos = 0;
            const unsigned long long v = std::stoull(item, &pos);
            if (pos != item.size()) throw std::invalid_argument(item);
            out.push_back(static_cast<std::size_t>(v));
        } catch (const std::exception&) {
            throw UsageError(std::string("invalid ") + what + " list '" + s + "'");
        }
    }
    if (out.empty()) throw UsageError(std::string("empty ") + what + " list");
    return out;
}

std::vector<std::string> split_names(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

// --data: a SWTD file path, or synthetic:N[:SEED].
ImageBatch load_images(const std::string& spec, const ViTConfig& cfg, std::uint64_t seed) {
    const std::string prefix = "synthetic:";
    if (spec.rfind(prefix, 0) == 0) {
        std::string fields = spec.substr(prefix.size());
        std::replace(fields.begin(), fields.end(), ':', ',');
        const auto parts = parse_list(fields, "synthetic dataset");
        if (parts.size() > 2 || parts[0] == 0) throw UsageError("--data synthetic:N[:SEED] needs N >= 1");
        Rng rng = make_rng(parts.size() == 2 ? parts[1] : seed, streams::synth);
        return synth_dataset(rng, parts[0], cfg.image, SynthOptions{cfg.channels, 4});
    }
    return load_raw_dataset(spec);
}

// Splits off the last `holdout` images.
std::pair<ImageBatch, ImageBatch> split_holdout(const ImageBatch& all, std::size_t holdout) {
    if (all.count < 2) throw UsageError("the dataset needs at least two images to hold some out");
    holdout = std::clamp<std::size_t>(holdout, 1, all.count - 1);
    std::vector<std::size_t> a, b;
    for (std::size_t i = 0; i < all.count; ++i) (i < all.count - holdout ? a : b).push_back(i);
    return {all.subset(a), all.subset(b)};
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for writing", path);
    os << text;
    if (!os) throw IoError("write failed", path);
}

SourceModel load_source(const std::string& path) {
    TrainState st = state_from_checkpoint(load_checkpoint(path));
    if (st.constraint != Constraint::tucker)
        throw CapabilityError("checkpoint " + path + " holds a " + constraint_name(st.constraint) +
                              " state; template initialization needs a Tucker template");
    return source_from_state(st);
}

// ---- configuration files -------------------------------------------------------------

// Replaces `--config FILE` with the long options it lists. Options already
// present on the command line are not overridden. Keys may sit at top level
// or in a section named after the subcommand.
std::vector<std::string> expand_config(std::vector<std::string> args) {
    std::string file;
    for (std::size_t k = 0; k < args.size(); ++k) {
        if (args[k] == "--config" && k + 1 < args.size()) {
            file = args[k + 1];
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(k), args.begin() + static_cast<std::ptrdiff_t>(k) + 2);
            break;
        }
        if (args[k].rfind("--config=", 0) == 0) {
            file = args[k].substr(9);
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(k));
            break;
        }
    }
    if (file.empty()) return args;
    std::set<std::string> given;
    for (const auto& a : args)
        if (a.rfind("--", 0) == 0) given.insert(a.substr(2, a.find('=') - 2));
    const auto sub = std::find_if(args.begin(), args.end(), [](const std::string& a) { return a.rfind('-', 0) != 0; });
    const std::string command = sub == args.end() ? "" : *sub;
    std::vector<std::string> extra;
    for (const CLI::ConfigItem& item : CLI::ConfigINI().from_file(file)) {
        const bool in_scope = item.parents.empty() || (item.parents.size() == 1 && item.parents[0] == command);
        if (!in_scope || item.inputs.empty() || given.count(item.name)) continue;
        std::string value;
        for (const auto& v : item.inputs) value += (value.empty() ? "" : ",") + v;
        extra.push_back("--" + item.name + "=" + value);
    }
    // Insert right after the subcommand name.
    args.insert(sub == args.end() ? sub : sub + 1, extra.begin(), extra.end());
    return args;
}

// ---- pretrain ------------------------------------------------------------------

struct PretrainCmd {
    ModelFlags model;
    TrainFlags train;
    std::string data, out, log, constraint = "tucker", ranks, widths;
    std::size_t steps = 200;
    std::size_t kron_outer = 2, kron_terms = 8;
    std::string inject;

    void add(CLI::App* app) {
        model.add(app);
        train.add(app);
        app->add_option("--data", data, "SWTD file or synthetic:N[:SEED]")->required();
        app->add_option("--out", out, "output checkpoint")->required();
        app->add_option("--log", log, "step log (default: <out>.log)");
        app->add_option("--steps", steps)->capture_default_str();
        app->add_option("--constraint", constraint, "tucker, none or kronecker")->capture_default_str();
        app->add_option("--ranks", ranks, "r1,r2,r3 (default S,D/2,D/2)");
        app->add_option("--widths", widths,
                        "kept widths for stochastic scaling, comma list or 'full' (default: multiples of head-dim)");
        app->add_option("--kron-outer", kron_outer)->capture_default_str();
        app->add_option("--kron-terms", kron_terms)->capture_default_str();
        app->add_option("--inject-fault", inject, "testing aid: 'nonfinite' poisons the first step")->group("");
    }

    int run(std::uint64_t seed) {
        const ViTConfig cfg = model.resolved();
        TrainConfig tc = train.resolved(steps, seed);
        if (widths == "full") {
            tc.widths = {};
        } else if (widths.empty()) {
            std::vector<std::size_t> w;
            for (std::size_t k = cfg.head_dim; k <= cfg.width; k += cfg.head_dim) w.push_back(k);
            tc.widths = WidthDistribution::uniform(w);
        } else {
            tc.widths = WidthDistribution::uniform(parse_list(widths, "width"));
        }
        if (!tc.widths.widths.empty()) tc.widths.validate(cfg.width);
        const Constraint c = parse_constraint(constraint);
        const LayoutDescriptor layout = cfg.layout();
        std::array<std::size_t, 3> r{layout.slices_per_layer(), cfg.width / 2, cfg.width / 2};
        if (!ranks.empty()) {
            auto v = parse_list(ranks, "rank");
            if (v.size() != 3) throw UsageError("--ranks needs three values r1,r2,r3");
            r = {v[0], v[1], v[2]};
        }
        TrainData data_set = prepare_data(load_images(data, cfg, seed), cfg, tc.normalize_targets);
        TrainState st = make_state(cfg, c, r, seed, KroneckerShape{kron_outer, kron_terms});
        if (inject == "nonfinite") st.params.begin()->second[0] = std::numeric_limits<double>::quiet_NaN();
        else if (!inject.empty()) throw UsageError("unknown fault '" + inject + "'");

        Json run{{"command", "pretrain"}, {"seed", seed}, {"data", data}, {"constraint", constraint_name(c)},
                 {"ranks", r}, {"train", train_json(tc)}};
        if (c == Constraint::kronecker) run["kronecker"] = Json{{"outer", kron_outer}, {"terms", kron_terms}};

        std::ostringstream logtext;
        logtext << "# " << run.dump() << '\n' << kStatsHeader << '\n';
        Trainer trainer(st, tc, data_set);
        trainer.run([&](const TrainStats& s) { logtext << format_stats(s) << '\n'; });
        quantize_f32(st.params);
        save_checkpoint(out, state_checkpoint(st, run));
        write_text(log.empty() ? out + ".log" : log, logtext.str());
        std::cout << "wrote " << out << " (" << st.params.size() << " tensors, " << tc.steps << " steps)\n";
        return 0;
    }
};

// ---- init / adapt ----------------------------------------------------------------

struct InitCmd {
    TrainFlags train;
    std::string tmpl, out, report, data, mode = "inherit", depth_strategy = "first", direct = "fresh";
    std::size_t depth = 0, heads = 0, adapt_steps = 200, holdout = 64;

    void add(CLI::App* app, bool adapt_alias) {
        train.add(app, "adapt-");
        app->add_option("--template", tmpl, "template checkpoint from pretrain")->required();
        app->add_option("--depth", depth, "target depth L*")->required();
        app->add_option("--heads", heads, "target heads h* (D* = h* x head-dim)")->required();
        if (!adapt_alias) app->add_option("--mode", mode, "inherit, random or adapt")->capture_default_str();
        app->add_option("--adapt-steps", adapt_steps, "adaptation budget")->capture_default_str();
        app->add_option("--data", data, "adaptation data: SWTD file or synthetic:N[:SEED]");
        app->add_option("--holdout", holdout, "images held out for best-iterate selection")->capture_default_str();
        app->add_option("--depth-strategy", depth_strategy, "first or stride")->capture_default_str();
        app->add_option("--direct", direct, "fresh or inherit direct parameters")->capture_default_str();
        app->add_option("--out", out, "output model checkpoint")->required();
        app->add_option("--report", report, "write the init report here (default: stdout)");
        if (adapt_alias) mode = "adapt";
    }

    int run(std::uint64_t seed) {
        SourceModel src = load_source(tmpl);
        TargetConfig tgt;
        tgt.layers = depth;
        tgt.heads = heads;
        tgt.mode = parse_init_mode(mode);
        tgt.depth = parse_depth_strategy(depth_strategy);
        tgt.direct = parse_direct_init(direct);
        tgt.adapt = train.resolved(adapt_steps, seed);
        Rng rng = make_rng(seed, streams::init);
        TrainData train_data;
        ValidationSet probe;
        AdaptData ad;
        if (tgt.mode == InitMode::adapt && adapt_steps > 0) {
            if (data.empty()) throw UsageError("--data is required for adapt mode");
            const ViTConfig tcfg = tgt.config(src.cfg);
            auto [tr, ho] = split_holdout(load_images(data, tcfg, seed), holdout);
            train_data = prepare_data(tr, tcfg, tgt.adapt.normalize_targets);
            probe = make_validation_set(prepare_data(ho, tcfg, tgt.adapt.normalize_targets), tgt.adapt.mask_ratio, seed);
            ad = {&train_data, &probe};
        }
        auto [model, rep] = initialize_target(src, tgt, rng, ad);
        Json run{{"command", "init"},
                 {"seed", seed},
                 {"template", tmpl},
                 {"mode", init_mode_name(tgt.mode)},
                 {"depth", depth},
                 {"heads", heads},
                 {"depth_strategy", depth_strategy},
                 {"direct", direct},
                 {"data", data},
                 {"adapt", train_json(tgt.adapt)}};
        export_model(model, out, run);
        if (report.empty()) std::cout << rep.to_text();
        else write_text(report, rep.to_text());
        return 0;
    }
};

// ---- eval ------------------------------------------------------------------------

struct EvalCmd {
    TrainFlags train;
    std::string tmpl, data, val_data, strategies = "sweet,random", out, runs, direct = "inherit";
    std::vector<std::string> extra;
    std::size_t seeds = 3, budget = 500, depth = 2, heads = 2, adapt_steps = 200, holdout = 128;

    void add(CLI::App* app) {
        train.add(app);
        app->add_option("--template", tmpl, "Tucker template checkpoint")->required();
        app->add_option("--data", data, "training data: SWTD file or synthetic:N[:SEED]")->required();
        app->add_option("--val-data", val_data, "validation data (default: hold out from --data)");
        app->add_option("--holdout", holdout, "validation images held out of --data")->capture_default_str();
        app->add_option("--strategies", strategies,
                        "comma list of sweet, sweet-adapt, sweet-inherit, sweet-random, random, select")
            ->capture_default_str();
        app->add_option("--extra-template", extra, "additional state checkpoints compared by selection");
        app->add_option("--seeds", seeds, "number of seeds")->capture_default_str();
        app->add_option("--budget", budget, "post-initialization training steps")->capture_default_str();
        app->add_option("--depth", depth, "target depth L*")->capture_default_str();
        app->add_option("--heads", heads, "target heads h*")->capture_default_str();
        app->add_option("--adapt-steps", adapt_steps)->capture_default_str();
        app->add_option("--direct", direct, "direct parameters for template arms: fresh or inherit")
            ->capture_default_str();
        app->add_option("--out", out, "summary table (default: stdout)");
        app->add_option("--runs", runs, "per-run validation curves");
    }

    int run(std::uint64_t seed) {
        if (seeds == 0) throw UsageError("--seeds must be at least 1");
        if (seeds < 3)
            std::cerr << "warning: fewer than 3 seeds; summary rows are flagged and carry no spread estimate\n";
        TrainState st = state_from_checkpoint(load_checkpoint(tmpl));
        SourceModel src = source_from_state(st);
        const ViTConfig& cfg = src.cfg;
        TrainConfig tc = train.resolved(budget, seed);
        ImageBatch all = load_images(data, cfg, seed);
        ImageBatch train_images, val_images;
        if (val_data.empty()) {
            std::tie(train_images, val_images) = split_holdout(all, holdout);
        } else {
            train_images = std::move(all);
            val_images = load_images(val_data, cfg, seed + 1);
        }
        auto [tr_img, probe_img] = split_holdout(train_images, std::max<std::size_t>(1, train_images.count / 16));
        TrainData train_data = prepare_data(tr_img, cfg, tc.normalize_targets);
        ValidationSet val = make_validation_set(prepare_data(val_images, cfg, tc.normalize_targets), tc.mask_ratio, seed);
        ValidationSet probe =
            make_validation_set(prepare_data(probe_img, cfg, tc.normalize_targets), tc.mask_ratio, seed + 1);
        const EvalData ed{&train_data, &val, &probe};
        const DirectInit di = parse_direct_init(direct);

        std::vector<EvalArm> arms;
        for (const auto& s : split_names(strategies)) {
            if (s == "sweet" || s == "sweet-adapt")
                arms.push_back(sweet_arm(s, src, InitMode::adapt, di, ed, tc, adapt_steps));
            else if (s == "sweet-inherit")
                arms.push_back(sweet_arm(s, src, InitMode::inherit, di, ed, tc, 0));
            else if (s == "sweet-random")
                arms.push_back(sweet_arm(s, src, InitMode::random, DirectInit::fresh, ed, tc, 0));
            else if (s == "random")
                arms.push_back(random_arm(cfg));
            else if (s == "select")
                arms.push_back(select_arm(s, realized_model(st)));
            else
                throw UsageError("unknown strategy '" + s + "'");
        }
        for (const auto& path : extra) {
            TrainState other = state_from_checkpoint(load_checkpoint(path));
            if (other.cfg.width != cfg.width || other.cfg.layers != cfg.layers)
                throw UsageError("--extra-template " + path + " has a different architecture");
            arms.push_back(select_arm("select:" + path, realized_model(other)));
        }
        EvalOptions opt;
        opt.budget = budget;
        opt.train = tc;
        for (std::size_t k = 0; k < seeds; ++k) opt.seeds.push_back(seed + k);
        TargetConfig tgt;
        tgt.layers = depth;
        tgt.heads = heads;
        EvalTable table = compare_inits(arms, {tgt}, ed, opt, [](const EvalRun& r) {
            std::cerr << r.target << ' ' << r.arm << " seed " << r.seed << ": final " << r.final_loss << '\n';
        });
        std::ostringstream os;
        Json run{{"command", "eval"},   {"seed", seed},       {"template", tmpl},      {"data", data},
                 {"val_data", val_data}, {"strategies", strategies}, {"seeds", seeds}, {"budget", budget},
                 {"depth", depth},      {"heads", heads},     {"adapt_steps", adapt_steps}, {"direct", direct},
                 {"train", train_json(tc)}};
        run["extra"] = extra;
        os << "# " << run.dump() << '\n';
        write_eval_table(os, table);
        if (out.empty()) std::cout << os.str();
        else write_text(out, os.str());
        if (!runs.empty()) {
            std::ostringstream rs;
            rs << "# " << run.dump() << '\n';
            write_eval_runs(rs, table);
            write_text(runs, rs.str());
        }
        return 0;
    }
};

// ---- verify -----------------------------------------------------------------------

struct VerifyCmd {
    bool list = false;
    std::vector<std::string> poison;

    void add(CLI::App* app) {
        app->add_flag("--list", list, "print the check names without running them");
        app->add_option("--poison", poison, "deliberately break the named check");
    }

    int run(std::uint64_t seed) {
        const auto checks = verify_checks();
        CheckContext ctx{seed, {}};
        for (const auto& p : poison) {
            bool known = false;
            for (const auto& c : checks) known = known || c.name == p;
            if (!known) throw UsageError("unknown check '" + p + "' for --poison");
            ctx.poison.insert(p);
        }
        if (list) {
            for (const auto& c : checks) std::cout << c.name << '\t' << c.description << '\n';
            return 0;
        }
        bool ok = true;
        for (const auto& c : checks) {
            const CheckResult r = c.run(ctx);
            char buf[256];
            std::snprintf(buf, sizeof buf, "%s %-10s tol=%.3g observed=%.3g", r.passed ? "PASS" : "FAIL",
                          r.name.c_str(), r.tolerance, r.observed);
            std::cout << buf << "  (" << r.detail << ")\n";
            ok = ok && r.passed;
        }
        std::cout << (ok ? "all checks passed\n" : "some checks FAILED\n");
        return ok ? 0 : static_cast<int>(ExitCode::numeric);
    }
};

// ---- export-images -------------------------------------------------------------------

struct ExportCmd {
    std::string model, data, out, masked_out;
    std::size_t count = 8;
    double ratio = 0.75;
    bool raw_targets = false;

    void add(CLI::App* app) {
        app->add_option("--model", model, "state or model checkpoint")->required();
        app->add_option("--data", data, "SWTD file or synthetic:N[:SEED]")->required();
        app->add_option("--count", count, "images to reconstruct")->capture_default_str();
        app->add_option("--mask-ratio", ratio)->capture_default_str();
        app->add_flag("--raw-targets", raw_targets, "the model predicts raw pixels, not normalized patches");
        app->add_option("--out", out, "reconstructions (SWTD)")->required();
        app->add_option("--masked-out", masked_out, "masked inputs with hidden patches greyed out (SWTD)");
    }

    int run(std::uint64_t seed) {
        Checkpoint ck = load_checkpoint(model);
        ModelParams m = ck.kind == CheckpointKind::model ? model_from_checkpoint(ck) : realized_model(state_from_checkpoint(ck));
        ImageBatch imgs = load_images(data, m.config, seed);
        if (count == 0) throw UsageError("--count must be at least 1");
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < std::min(count, imgs.count); ++i) idx.push_back(i);
        imgs = imgs.subset(idx);
        PatchBatch pb = patchify(imgs, m.config.patch);
        Rng rng = make_rng(seed, streams::mask);
        std::vector<MaskSpec> masks;
        for (std::size_t i = 0; i < imgs.count; ++i) masks.push_back(mask_patches(pb.patches, ratio, rng));
        DenseTensor pred = mae_predictions(m, pb.data, masks);
        const std::size_t pd = pb.patch_dim();
        PatchBatch recon = pb, masked = pb;
        for (std::size_t b = 0; b < imgs.count; ++b)
            for (std::size_t i : masks[b].masked) {
                const std::size_t row = b * pb.patches + i;
                const double* x = pb.data.data().data() + row * pd;
                double mean = 0.0, var = 0.0;
                for (std::size_t c = 0; c < pd; ++c) mean += x[c];
                mean /= static_cast<double>(pd);
                for (std::size_t c = 0; c < pd; ++c) var += (x[c] - mean) * (x[c] - mean);
                const double sd = std::sqrt(var / static_cast<double>(pd) + 1e-6);
                for (std::size_t c = 0; c < pd; ++c) {
                    const double p = pred[row * pd + c];
                    recon.data[row * pd + c] = std::clamp(raw_targets ? p : p * sd + mean, 0.0, 1.0);
                    masked.data[row * pd + c] = 0.5;
                }
            }
        write_raw_dataset(out, unpatchify(recon, imgs.height, imgs.width));
        if (!masked_out.empty()) write_raw_dataset(masked_out, unpatchify(masked, imgs.height, imgs.width));
        std::cout << "wrote " << imgs.count << " reconstructions to " << out << '\n';
        return 0;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Size-agnostic ViT weight templates: pretrain, initialize, adapt, evaluate"};
    app.require_subcommand(1);
    std::uint64_t seed = 0;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--seed", seed, "run seed")->envname("SWEET_SEED")->capture_default_str();
        sub->add_option("--config", "key=value configuration file (long option names as keys)");
    };

    PretrainCmd pretrain;
    InitCmd init, adapt;
    EvalCmd eval;
    VerifyCmd verify;
    ExportCmd exporter;
    auto* p = app.add_subcommand("pretrain", "train a weight template");
    pretrain.add(p);
    add_common(p);
    auto* i = app.add_subcommand("init", "build a target model from a template");
    init.add(i, false);
    add_common(i);
    auto* a = app.add_subcommand("adapt", "init --mode adapt");
    adapt.add(a, true);
    add_common(a);
    auto* e = app.add_subcommand("eval", "compare initialization strategies");
    eval.add(e);
    add_common(e);
    auto* v = app.add_subcommand("verify", "run the oracle checks");
    verify.add(v);
    add_common(v);
    auto* x = app.add_subcommand("export-images", "dump masked-autoencoder reconstructions");
    exporter.add(x);
    add_common(x);

    try {
        std::vector<std::string> args = expand_config(std::vector<std::string>(argv + 1, argv + argc));
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp& err) {
        return app.exit(err);
    } catch (const CLI::CallForAllHelp& err) {
        return app.exit(err);
    } catch (const CLI::ParseError& err) {
        app.exit(err);
        return static_cast<int>(ExitCode::usage);
    }

    try {
        if (p->parsed()) return pretrain.run(seed);
        if (i->parsed()) return init.run(seed);
        if (a->parsed()) return adapt.run(seed);
        if (e->parsed()) return eval.run(seed);
        if (v->parsed()) return verify.run(seed);
        if (x->parsed()) return exporter.run(seed);
    } catch (const sweet::Error& err) {
        std::cerr << "error: " << err.what() << '\n';
        return static_cast<int>(err.exit_code());
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return static_cast<int>(ExitCode::other);
    }
    return static_cast<int>(ExitCode::usage);
}
