#include <gtest/gtest.h>

#include "sweet/data.hpp"
#include "sweet/init_adapt.hpp"

using namespace sweet;

namespace {

ViTConfig source_config() {
    ViTConfig c;
    c.layers = 2;
    c.heads = 2;
    c.head_dim = 4;
    c.width = 8;
    c.image = 8;
    c.patch = 4;
    c.decoder_width = 8;
    c.decoder_heads = 2;
    return c;
}

TrainData small_data(std::size_t count, std::uint64_t seed) {
    Rng rng = make_rng(seed, streams::synth);
    return prepare_data(synth_dataset(rng, count, 8), source_config());
}

// A briefly pretrained source whose parameters sit at storage precision.
TrainState trained_source() {
    TrainData data = small_data(8, 1);
    TrainState st = make_state(source_config(), Constraint::tucker, {12, 4, 4}, 1);
    TrainConfig tc;
    tc.steps = 4;
    tc.batch = 4;
    Trainer tr(st, tc, data);
    tr.run();
    quantize_f32(st.params);
    return st;
}

std::uint64_t checksum(const DenseTensor& t) {
    std::uint64_t h = 1469598103934665603ull;
    for (double v : t.data()) {
        h ^= std::bit_cast<std::uint64_t>(v);
        h *= 1099511628211ull;
    }
    return h;
}

// Row/column index of a narrow-model weight inside the full model's matrix.
std::size_t wide_index(std::size_t j, std::size_t narrow, std::size_t wide) { return (j / narrow) * wide + j % narrow; }

void expect_prefix_block(const DenseMatrix& small, const DenseMatrix& big, std::size_t d, std::size_t full_d,
                         const char* what) {
    for (std::size_t i = 0; i < small.rows(); ++i)
        for (std::size_t j = 0; j < small.cols(); ++j)
            EXPECT_NEAR(small(i, j), big(wide_index(i, d, full_d), wide_index(j, d, full_d)), 1e-12)
                << what << " (" << i << "," << j << ")";
}

}  // namespace

TEST(InitializeTarget, SourceSizedInheritReproducesTrainedWeights) {
    TrainState st = trained_source();
    SourceModel src = source_from_state(st);
    TargetConfig tgt;
    tgt.layers = 2;
    tgt.heads = 2;
    tgt.direct = DirectInit::inherit;
    Rng rng = make_rng(9);
    auto [m, rep] = initialize_target(src, tgt, rng);
    const ModelParams want = realized_model(st);
    ASSERT_EQ(m.theta.size(), want.theta.size());
    for (std::size_t l = 0; l < m.theta.size(); ++l) EXPECT_EQ(m.theta[l], want.theta[l]) << l;
    EXPECT_EQ(m.direct, want.direct);
    EXPECT_EQ(rep.adapt_steps, 0u);
    EXPECT_FALSE(rep.initial_loss.has_value());
}

TEST(InitializeTarget, HalfWidthInheritEqualsPrefixSubBlocks) {
    TrainState st = trained_source();
    const ModelParams full = realized_model(st);
    TargetConfig tgt;
    tgt.layers = 2;
    tgt.heads = 1;
    Rng rng = make_rng(10);
    auto [m, rep] = initialize_target(source_from_state(st), tgt, rng);
    ASSERT_EQ(m.config.width, 4u);
    for (std::size_t l = 0; l < 2; ++l) {
        expect_prefix_block(m.theta[l].wq, full.theta[l].wq, 4, 8, "wq");
        expect_prefix_block(m.theta[l].wk, full.theta[l].wk, 4, 8, "wk");
        expect_prefix_block(m.theta[l].wv, full.theta[l].wv, 4, 8, "wv");
        expect_prefix_block(m.theta[l].wo, full.theta[l].wo, 4, 8, "wo");
        expect_prefix_block(m.theta[l].win, full.theta[l].win, 4, 8, "win");
        expect_prefix_block(m.theta[l].wout, full.theta[l].wout, 4, 8, "wout");
    }
}

TEST(InitializeTarget, ShallowInheritTakesLeadingOrStridedLayers) {
    ViTConfig cfg = source_config();
    cfg.layers = 4;
    TrainState st = make_state(cfg, Constraint::tucker, {12, 4, 4}, 2);
    quantize_f32(st.params);
    const ModelParams full = realized_model(st);
    for (DepthStrategy d : {DepthStrategy::first_layers, DepthStrategy::even_stride}) {
        TargetConfig tgt;
        tgt.layers = 2;
        tgt.heads = 2;
        tgt.depth = d;
        Rng rng = make_rng(11);
        const ModelParams m = initialize_target(source_from_state(st), tgt, rng).first;
        const auto layers = select_layers(4, 2, d);
        for (std::size_t l = 0; l < 2; ++l) EXPECT_EQ(m.theta[l], full.theta[layers[l]]);
    }
}

TEST(InitializeTarget, RandomModeIsReproducible) {
    SourceModel src = source_from_state(trained_source());
    TargetConfig tgt;
    tgt.mode = InitMode::random;
    tgt.layers = 3;
    tgt.heads = 3;
    Rng a = make_rng(12), b = make_rng(12), c = make_rng(13);
    const ModelParams ma = initialize_target(src, tgt, a).first;
    const ModelParams mb = initialize_target(src, tgt, b).first;
    const ModelParams mc = initialize_target(src, tgt, c).first;
    ASSERT_EQ(ma.theta.size(), 3u);
    for (std::size_t l = 0; l < 3; ++l) EXPECT_EQ(ma.theta[l], mb.theta[l]);
    EXPECT_EQ(ma.direct, mb.direct);
    EXPECT_NE(ma.theta[0], mc.theta[0]);
}

TEST(InitializeTarget, OversizeInheritIsACapabilityError) {
    SourceModel src = source_from_state(trained_source());
    TargetConfig tgt;
    tgt.layers = 3;
    tgt.heads = 2;
    Rng rng = make_rng(14);
    EXPECT_THROW((void)initialize_target(src, tgt, rng), CapabilityError);
    tgt.layers = 2;
    tgt.heads = 4;
    EXPECT_THROW((void)initialize_target(src, tgt, rng), CapabilityError);
    tgt.mode = InitMode::random;
    EXPECT_NO_THROW((void)initialize_target(src, tgt, rng));
}

TEST(InitializeTarget, ReportCountsParameters) {
    SourceModel src = source_from_state(trained_source());
    TargetConfig tgt;
    tgt.layers = 1;
    tgt.heads = 1;
    Rng rng = make_rng(15);
    auto [m, rep] = initialize_target(src, tgt, rng);
    EXPECT_EQ(rep.template_params, 12u * 4u * 4u);
    EXPECT_EQ(rep.scaler_params, 12u * 12u + 4u * 4u + 4u * 4u);
    EXPECT_EQ(rep.model_params, model_param_count(m));
    EXPECT_NE(rep.to_text().find("mode=inherit"), std::string::npos);
}

TEST(AdaptScalers, ZeroLearningRateKeepsScalersAndTemplate) {
    TrainState st = trained_source();
    const TrainData data = small_data(8, 2);
    const ValidationSet probe = make_validation_set(small_data(4, 3), 0.75, 4);
    const Template tmpl = st.tmpl();
    const std::uint64_t before = checksum(tmpl.core);
    TrainConfig tc;
    tc.steps = 5;
    tc.batch = 4;
    tc.lr = 0.0;
    const AdaptResult r = adapt_scalers(tmpl, st.scalers(), st.cfg, st.direct(), data, probe, tc, 1);
    EXPECT_EQ(r.scalers, st.scalers());
    EXPECT_EQ(r.direct, st.direct());
    EXPECT_EQ(r.best_loss, r.initial_loss);
    EXPECT_EQ(checksum(tmpl.core), before);
}

TEST(AdaptScalers, BestIterateImprovesOnRandomScalersAndLeavesCoreAlone) {
    TrainState st = trained_source();
    const TrainData data = small_data(32, 5);
    const ValidationSet probe = make_validation_set(small_data(8, 6), 0.75, 7);
    const Template tmpl = st.tmpl();
    const std::uint64_t before = checksum(tmpl.core);
    Rng rng = make_rng(16);
    const Scalers start = random_scalers(rng, st.cfg.layout(), tmpl, init_weight_std(st.cfg.width));
    TrainConfig tc;
    tc.steps = 60;
    tc.batch = 8;
    tc.lr = 3e-3;
    const AdaptResult r = adapt_scalers(tmpl, start, st.cfg, st.direct(), data, probe, tc, 10);
    EXPECT_LT(r.best_loss, r.initial_loss);
    EXPECT_GT(r.best_step, 0u);
    EXPECT_EQ(checksum(tmpl.core), before);
    EXPECT_EQ(r.steps, 60u);
}

TEST(AdaptScalers, InitializeTargetReportsAdaptation) {
    TrainState st = trained_source();
    const TrainData data = small_data(16, 5);
    const ValidationSet probe = make_validation_set(small_data(8, 6), 0.75, 7);
    TargetConfig tgt;
    tgt.layers = 1;
    tgt.heads = 1;
    tgt.mode = InitMode::adapt;
    tgt.adapt.steps = 20;
    tgt.adapt.batch = 4;
    tgt.adapt_eval_every = 5;
    Rng rng = make_rng(17);
    const InitReport rep = initialize_target(source_from_state(st), tgt, rng, {&data, &probe}).second;
    ASSERT_TRUE(rep.initial_loss && rep.final_loss);
    EXPECT_LE(*rep.final_loss, *rep.initial_loss);
    EXPECT_EQ(rep.adapt_steps, 20u);
    Rng rng2 = make_rng(17);
    EXPECT_THROW((void)initialize_target(source_from_state(st), tgt, rng2), UsageError);
}

TEST(AdaptScalers, ZeroStepAdaptEqualsInherit) {
    TrainState st = trained_source();
    TargetConfig tgt;
    tgt.layers = 1;
    tgt.heads = 1;
    tgt.direct = DirectInit::inherit;
    Rng a = make_rng(18), b = make_rng(18);
    const ModelParams inherit = initialize_target(source_from_state(st), tgt, a).first;
    tgt.mode = InitMode::adapt;
    tgt.adapt.steps = 0;
    const ModelParams adapt0 = initialize_target(source_from_state(st), tgt, b).first;
    EXPECT_EQ(inherit.theta, adapt0.theta);
    EXPECT_EQ(inherit.direct, adapt0.direct);
}

TEST(ScalerSize, DefaultConfigNeedsOnlyAFewThousandEntries) {
    ViTConfig cfg;
    TrainState st = make_state(cfg, Constraint::tucker, {12, 16, 16}, 3);
    const std::size_t n = scaler_param_count(st.scalers());
    EXPECT_EQ(n, 48u * 12u + 32u * 16u * 2u);
    EXPECT_LT(n, 5000u);
    EXPECT_LT(n, template_param_count(st.tmpl()));
}

TEST(DirectSlicing, NarrowDirectParamsArePrefixes) {
    TrainState st = trained_source();
    const ViTConfig narrow = st.cfg.resized(1, 1);
    const ParamMap d = slice_direct_params(st.cfg, st.direct(), narrow, {1});
    const DenseTensor& src = st.params.at(names::block(1, "mlp.b1"));
    const DenseTensor& got = d.at(names::block(0, "mlp.b1"));
    ASSERT_EQ(got.size(), narrow.hidden());
    for (std::size_t j = 0; j < got.size(); ++j) EXPECT_EQ(got[j], src[wide_index(j, 4, 8)]);
}
