#pragma once

// Self-checks run by `sweet verify`: brute-force and closed-form oracles for
// the tensor algebra, finite-difference gradients, layout round trips and
// masking. A named "poison" deliberately corrupts one check's computation so
// the failure path can be exercised.

#include <cmath>
#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "sweet/autodiff.hpp"
#include "sweet/init_adapt.hpp"
#include "sweet/masking.hpp"
#include "sweet/pretrain.hpp"
#include "sweet/tensor.hpp"
#include "sweet/weight_template.hpp"

namespace sweet {

struct CheckResult {
    std::string name;
    double tolerance = 0.0;
    double observed = 0.0;
    bool passed = false;
    std::string detail;
};

struct CheckContext {
    std::uint64_t seed = 0;
    std::set<std::string> poison;
    [[nodiscard]] bool poisoned(const std::string& n) const { return poison.count(n) != 0; }
};

struct Check {
    std::string name;
    std::string description;
    std::function<CheckResult(const CheckContext&)> run;
};

// Quadruple-loop Tucker sum, independent of the unfold/fold machinery.
inline DenseTensor brute_force_tucker(const DenseTensor& g, const DenseMatrix& x, const DenseMatrix& u,
                                      const DenseMatrix& v) {
    const std::size_t r1 = g.extent(0), r2 = g.extent(1), r3 = g.extent(2);
    DenseTensor w({x.rows(), u.rows(), v.rows()});
    for (std::size_t s = 0; s < x.rows(); ++s)
        for (std::size_t i = 0; i < u.rows(); ++i)
            for (std::size_t j = 0; j < v.rows(); ++j) {
                double acc = 0.0;
                for (std::size_t a = 0; a < r1; ++a)
                    for (std::size_t b = 0; b < r2; ++b)
                        for (std::size_t c = 0; c < r3; ++c) acc += g(a, b, c) * x(s, a) * u(i, b) * v(j, c);
                w(s, i, j) = acc;
            }
    return w;
}

inline DenseMatrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
    DenseMatrix m(r, c);
    fill_normal(m.data(), rng);
    return m;
}

inline DenseTensor random_tensor(Rng& rng, Shape s) {
    DenseTensor t(std::move(s));
    fill_normal(t.data(), rng);
    return t;
}

// Toy masked-autoencoder objective over a Tucker state, for gradient checks.
struct ToyObjective {
    TrainState state;
    StepInput input;

    [[nodiscard]] Objective objective() const {
        return [this](const ParamMap& p, ParamMap* grads) {
            TrainState st = state;
            st.params = p;
            LossAndGrads lg = mae_objective(st, input, grads != nullptr);
            if (grads) *grads = std::move(lg.grads);
            return lg.loss;
        };
    }
};

// L=2, D=16, 8x8 images, patch 4, two images per batch, half the patches masked.
inline ToyObjective make_toy_objective(std::uint64_t seed, WidthMask width = {16, 16}) {
    ViTConfig cfg;
    cfg.layers = 2;
    cfg.heads = 2;
    cfg.head_dim = 8;
    cfg.width = 16;
    cfg.image = 8;
    cfg.patch = 4;
    cfg.decoder_width = 16;
    cfg.decoder_heads = 2;
    ToyObjective t{make_state(cfg, Constraint::tucker, {12, 8, 8}, seed), {}};
    Rng rng = make_rng(seed, streams::synth);
    TrainData d = prepare_data(synth_dataset(rng, 2, cfg.image), cfg);
    Rng mrng = make_rng(seed, streams::mask);
    t.input = StepInput{d.inputs, d.targets, {}, width};
    for (int b = 0; b < 2; ++b) t.input.masks.push_back(mask_patches(cfg.patches(), 0.5, mrng));
    return t;
}

inline std::vector<Check> verify_checks() {
    std::vector<Check> checks;

    checks.push_back({"tucker", "Tucker reconstruction vs quadruple-loop sum (50 instances)", [](const CheckContext& c) {
        Rng rng = make_rng(c.seed, 0x71);
        std::uniform_int_distribution<std::size_t> core(1, 8), out(1, 24);
        double worst = 0.0;
        for (int k = 0; k < 50; ++k) {
            const std::size_t r1 = core(rng), r2 = core(rng), r3 = core(rng);
            DenseTensor g = random_tensor(rng, {r1, r2, r3});
            DenseMatrix x = random_matrix(rng, out(rng), r1), u = random_matrix(rng, out(rng), r2),
                        v = random_matrix(rng, out(rng), r3);
            DenseTensor w = tucker_reconstruct(g, x, u, v);
            if (c.poisoned("tucker")) w[0] += 1e-3 * (1.0 + std::abs(w[0]));
            worst = std::max(worst, relative_frobenius_error(w.data(), brute_force_tucker(g, x, u, v).data()));
        }
        return CheckResult{"tucker", 1e-10, worst, worst <= 1e-10, "max relative Frobenius error"};
    }});

    checks.push_back({"kronecker", "Kronecker product as a Tucker special case (20 pairs)", [](const CheckContext& c) {
        Rng rng = make_rng(c.seed, 0x72);
        std::uniform_int_distribution<std::size_t> ext(1, 6);
        double worst = 0.0;
        for (int k = 0; k < 20; ++k) {
            DenseMatrix a = random_matrix(rng, ext(rng), ext(rng)), b = random_matrix(rng, ext(rng), ext(rng));
            DenseMatrix viaT = kronecker_from_tucker(kronecker_as_tucker(a, b), a.rows(), a.cols());
            if (c.poisoned("kronecker")) viaT(0, 0) += 1e-3;
            worst = std::max(worst, relative_frobenius_error(viaT.data(), kronecker(a, b).data()));
        }
        return CheckResult{"kronecker", 1e-10, worst, worst <= 1e-10, "max relative error"};
    }});

    checks.push_back({"unfold", "fold(unfold(T, n), n) == T for every mode", [](const CheckContext& c) {
        Rng rng = make_rng(c.seed, 0x73);
        double worst = 0.0;
        for (int k = 0; k < 20; ++k) {
            std::uniform_int_distribution<std::size_t> ext(1, 7);
            DenseTensor t = random_tensor(rng, {ext(rng), ext(rng), ext(rng)});
            for (int mode = 1; mode <= 3; ++mode) {
                DenseTensor back = fold(unfold(t, mode), mode, t.shape());
                if (c.poisoned("unfold")) back[0] += 1.0;
                worst = std::max(worst, max_abs_difference(back.data(), t.data()));
            }
        }
        return CheckResult{"unfold", 0.0, worst, worst == 0.0, "max abs difference (must be exact)"};
    }});

    checks.push_back({"gradcheck", "analytic vs central-difference gradients of the masked loss (eps 1e-5)",
                      [](const CheckContext& c) {
                          ToyObjective toy = make_toy_objective(c.seed);
                          GradCheckOptions opt;
                          opt.eps = 1e-5;
                          opt.min_abs_grad = 1e-8;
                          opt.max_coords_per_param = 40;
                          opt.seed = c.seed;
                          Objective f = toy.objective();
                          if (c.poisoned("gradcheck")) {
                              f = [inner = toy.objective()](const ParamMap& p, ParamMap* g) {
                                  const double v = inner(p, g);
                                  if (g)
                                      for (auto& [n, t] : *g) t.data()[0] *= 1.5;
                                  return v;
                              };
                          }
                          GradCheckResult r = grad_check(f, toy.state.params, opt);
                          return CheckResult{"gradcheck", 1e-4, r.max_rel_error, r.max_rel_error <= 1e-4,
                                             std::to_string(r.coords_checked) + " coordinates, worst in " +
                                                 r.worst_param};
                      }});

    checks.push_back({"layout", "split(concat(theta)) round trip and slice indexing", [](const CheckContext& c) {
        Rng rng = make_rng(c.seed, 0x74);
        ViTConfig cfg;
        cfg.swiglu = true;
        auto theta = init_layer_weights(cfg, rng);
        UnifiedWeightTensor u = concat_weights(theta, cfg.layout());
        auto back = split_weights(u);
        double worst = 0.0;
        for (std::size_t l = 0; l < theta.size(); ++l) {
            worst = std::max(worst, max_abs_difference(back[l].wq.data(), theta[l].wq.data()));
            worst = std::max(worst, max_abs_difference(back[l].win.data(), theta[l].win.data()));
            worst = std::max(worst, max_abs_difference(back[l].wgate.data(), theta[l].wgate.data()));
            worst = std::max(worst, max_abs_difference(back[l].wout.data(), theta[l].wout.data()));
        }
        if (c.poisoned("layout")) worst += 1.0;
        const bool count_ok = u.w.extent(0) == 16 * cfg.layers;
        return CheckResult{"layout", 0.0, worst, worst == 0.0 && count_ok, "max abs difference (must be exact)"};
    }});

    checks.push_back({"slice", "inherited narrow weights equal prefix sub-blocks of full weights", [](const CheckContext& c) {
        Rng rng = make_rng(c.seed, 0x75);
        ViTConfig cfg;
        Template tmpl{random_tensor(rng, {12, 16, 16})};
        const LayoutDescriptor layout = cfg.layout();
        Scalers s = random_scalers(rng, layout, tmpl, 0.1);
        UnifiedWeightTensor full = reconstruct(tmpl, s, layout);
        const LayoutDescriptor narrow(2, 16, cfg.mlp_ratio, false);
        UnifiedWeightTensor sub = reconstruct(tmpl, slice_scalers(s, layout, 2, 16), narrow);
        UnifiedWeightTensor oracle = slice_unified(full, narrow, DepthStrategy::first_layers);
        double err = max_abs_difference(sub.w.data(), oracle.w.data());
        if (c.poisoned("slice")) err += 1.0;
        return CheckResult{"slice", 1e-12, err, err <= 1e-12, "max abs difference"};
    }});

    checks.push_back({"mask", "|M| = round(0.75 N), loss blind to visible predictions, L(x, x) = 0",
                      [](const CheckContext& c) {
                          Rng rng = make_rng(c.seed, 0x76);
                          double bad = 0.0;
                          for (std::size_t n : {16u, 64u, 196u}) {
                              MaskSpec m = mask_patches(n, 0.75, rng);
                              if (m.masked.size() != masked_count(n, 0.75)) bad += 1.0;
                              DenseMatrix target = random_matrix(rng, n, 5), pred = random_matrix(rng, n, 5);
                              const double l0 = mae_loss(pred, target, m);
                              for (auto i : m.visible) pred(i, 0) += 10.0;
                              bad += std::abs(mae_loss(pred, target, m) - l0);
                              bad += mae_loss(target, target, m);
                          }
                          if (c.poisoned("mask")) bad += 1.0;
                          return CheckResult{"mask", 0.0, bad, bad == 0.0, "accumulated violations (must be exact)"};
                      }});

    return checks;
}

}  // namespace sweet
