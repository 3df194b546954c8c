#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "sweet/checkpoint.hpp"
#include "sweet/data.hpp"
#include "sweet/eval.hpp"
#include "sweet/init_adapt.hpp"

using namespace sweet;
namespace fs = std::filesystem;

namespace {

ViTConfig small_config() {
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

std::string temp_path(const std::string& name) {
    return (fs::temp_directory_path() /
            ("sweet_ckpt_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()) + "_" + name))
        .string();
}

std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void expect_format_error_at(const std::string& bytes, std::uint64_t offset) {
    try {
        (void)decode_checkpoint(bytes);
        ADD_FAILURE() << "corrupt checkpoint accepted";
    } catch (const FormatError& e) {
        EXPECT_EQ(e.offset(), offset) << e.what();
    }
}

}  // namespace

TEST(Checkpoint, StateRoundTripAtStoragePrecision) {
    TrainState st = make_state(small_config(), Constraint::tucker, {12, 4, 4}, 1);
    Checkpoint c = state_checkpoint(st, Json{{"seed", 1}});
    const Checkpoint back = decode_checkpoint(encode_checkpoint(c));
    quantize_f32(st.params);
    EXPECT_EQ(back.tensors, st.params);
    EXPECT_EQ(back.cfg, st.cfg);
    EXPECT_EQ(back.run.at("seed").get<int>(), 1);
    const TrainState restored = state_from_checkpoint(back);
    EXPECT_EQ(restored.constraint, Constraint::tucker);
    EXPECT_EQ(restored.tmpl().core, st.tmpl().core);
}

TEST(Checkpoint, KroneckerShapeSurvives) {
    TrainState st = make_state(small_config(), Constraint::kronecker, {}, 2, KroneckerShape{4, 3});
    const TrainState back = state_from_checkpoint(decode_checkpoint(encode_checkpoint(state_checkpoint(st))));
    EXPECT_EQ(back.constraint, Constraint::kronecker);
    EXPECT_EQ(back.kron.outer, 4u);
    EXPECT_EQ(back.kron.terms, 3u);
}

TEST(Checkpoint, EncodingIsDeterministic) {
    TrainState st = make_state(small_config(), Constraint::tucker, {12, 4, 4}, 3);
    EXPECT_EQ(encode_checkpoint(state_checkpoint(st)), encode_checkpoint(state_checkpoint(st)));
}

TEST(ExportModel, LoadReproducesModelAndExportsAreByteIdentical) {
    TrainState st = make_state(small_config(), Constraint::tucker, {12, 4, 4}, 4);
    TargetConfig tgt;
    tgt.layers = 1;
    tgt.heads = 1;
    Rng rng = make_rng(5);
    ModelParams m = initialize_target(source_from_state(st), tgt, rng).first;
    const std::string a = temp_path("a.ckpt"), b = temp_path("b.ckpt");
    export_model(m, a);
    export_model(m, b);
    EXPECT_EQ(read_file(a), read_file(b));
    const ModelParams back = load_model(a);
    fs::remove(a);
    fs::remove(b);
    quantize_f32(m.direct);
    for (auto& lw : m.theta)
        for (DenseMatrix* w : {&lw.wq, &lw.wk, &lw.wv, &lw.wo, &lw.win, &lw.wout})
            for (double& v : w->data()) v = static_cast<double>(static_cast<float>(v));
    EXPECT_EQ(back.config, m.config);
    EXPECT_EQ(back.theta, m.theta);
    EXPECT_EQ(back.direct, m.direct);
}

TEST(ExportModel, LoadedModelRunsWithoutTemplate) {
    ModelParams m;
    {
        TrainState st = make_state(small_config(), Constraint::tucker, {12, 4, 4}, 6);
        TargetConfig tgt;
        Rng rng = make_rng(6);
        m = initialize_target(source_from_state(st), tgt, rng).first;
    }
    const std::string path = temp_path("m.ckpt");
    export_model(m, path);
    const ModelParams back = load_model(path);
    fs::remove(path);
    Rng drng = make_rng(7);
    const TrainData d = prepare_data(synth_dataset(drng, 2, 8), small_config());
    Rng mrng = make_rng(8);
    const std::vector<MaskSpec> masks{mask_patches(4, 0.5, mrng), mask_patches(4, 0.5, mrng)};
    const DenseTensor pred = mae_predictions(back, d.inputs, masks);
    EXPECT_EQ(pred.extent(0), 8u);
    for (double v : pred.data()) EXPECT_TRUE(std::isfinite(v));
}

TEST(ExportModel, UnwritableLocationIsAnIoError) {
    TrainState st = make_state(small_config(), Constraint::tucker, {12, 4, 4}, 9);
    const std::string path = "/nonexistent-sweet-dir/sub/model.ckpt";
    try {
        export_model(realized_model(st), path);
        FAIL() << "export succeeded";
    } catch (const IoError& e) {
        EXPECT_EQ(e.path(), path);
    }
    EXPECT_THROW((void)load_checkpoint("/nonexistent-sweet-dir/model.ckpt"), IoError);
}

TEST(Checkpoint, KindMismatchIsAUsageError) {
    TrainState st = make_state(small_config(), Constraint::tucker, {12, 4, 4}, 10);
    EXPECT_THROW((void)model_from_checkpoint(state_checkpoint(st)), UsageError);
    EXPECT_THROW((void)state_from_checkpoint(model_checkpoint(realized_model(st))), UsageError);
}

TEST(Checkpoint, CorruptionReportsByteOffsets) {
    TrainState st = make_state(small_config(), Constraint::tucker, {12, 4, 4}, 11);
    const std::string good = encode_checkpoint(state_checkpoint(st));
    const std::uint64_t hlen = static_cast<unsigned char>(good[4]) | static_cast<unsigned>(static_cast<unsigned char>(good[5])) << 8 |
                               static_cast<unsigned>(static_cast<unsigned char>(good[6])) << 16;

    std::string bad = good;
    bad[0] = 'X';
    expect_format_error_at(bad, 0);

    expect_format_error_at(good.substr(0, 6), 6);

    bad = good;
    bad[4] = '\xff';
    bad[5] = '\xff';
    bad[6] = '\xff';
    expect_format_error_at(bad, good.size());

    bad = good;
    bad[8] = '[';
    bad[9] = '}';
    EXPECT_THROW((void)decode_checkpoint(bad), FormatError);

    expect_format_error_at(good.substr(0, good.size() - 4), good.size() - 4);
    expect_format_error_at(good + "xxxx", good.size());

    // Payload shorter by a whole tensor still fails inside the directory walk.
    EXPECT_THROW((void)decode_checkpoint(good.substr(0, 8 + hlen + 4)), FormatError);
}

TEST(Checkpoint, HeaderIsSortedCompactJson) {
    TrainState st = make_state(small_config(), Constraint::tucker, {12, 4, 4}, 12);
    const std::string bytes = encode_checkpoint(state_checkpoint(st, Json{{"seed", 12}}));
    const std::uint32_t hlen = static_cast<unsigned char>(bytes[4]) | static_cast<unsigned>(static_cast<unsigned char>(bytes[5])) << 8;
    const Json h = Json::parse(bytes.substr(8, hlen));
    EXPECT_EQ(h.dump(), bytes.substr(8, hlen));
    EXPECT_EQ(h.at("format"), "SWT1");
    EXPECT_EQ(h.at("constraint"), "tucker");
    EXPECT_EQ(h.at("run").at("seed"), 12);
    EXPECT_TRUE(h.contains("layout"));
}
