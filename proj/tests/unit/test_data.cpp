#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "sweet/data.hpp"

using namespace sweet;
namespace fs = std::filesystem;

namespace {

ImageBatch counting_batch(std::size_t count, std::size_t h, std::size_t w, std::size_t ch) {
    ImageBatch b{count, h, w, ch, std::vector<double>(count * h * w * ch), {}};
    for (std::size_t i = 0; i < b.pixels.size(); ++i) b.pixels[i] = static_cast<double>(i);
    return b;
}

class TempDir {
public:
    TempDir() {
        path_ = fs::temp_directory_path() /
                ("sweet_data_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
                 ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    [[nodiscard]] std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    fs::path path_;
};

void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream os(path, std::ios::binary);
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<unsigned char> header(std::uint32_t count, std::uint32_t h, std::uint32_t w, std::uint32_t c) {
    std::vector<unsigned char> out{'S', 'W', 'T', 'D'};
    for (std::uint32_t v : {count, h, w, c})
        for (int k = 0; k < 4; ++k) out.push_back(static_cast<unsigned char>(v >> (8 * k)));
    return out;
}

}  // namespace

TEST(Patchify, WholeImageIsOnePatch) {
    ImageBatch b = counting_batch(1, 4, 4, 1);
    PatchBatch p = patchify(b, 4);
    ASSERT_EQ(p.patches, 1u);
    ASSERT_EQ(p.data.shape(), (Shape{1, 16}));
    for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(p.data[i], b.pixels[i]);
}

TEST(Patchify, RowMajorGridMatchesIndexOracle) {
    ImageBatch b = counting_batch(2, 8, 8, 3);
    PatchBatch p = patchify(b, 4);
    ASSERT_EQ(p.patches, 4u);
    ASSERT_EQ(p.patch_dim(), 48u);
    for (std::size_t img = 0; img < 2; ++img)
        for (std::size_t k = 0; k < 4; ++k) {
            const std::size_t gy = k / 2, gx = k % 2;
            std::size_t e = 0;
            for (std::size_t y = 0; y < 4; ++y)
                for (std::size_t x = 0; x < 4; ++x)
                    for (std::size_t c = 0; c < 3; ++c, ++e) {
                        const double want =
                            static_cast<double>(((img * 8 + gy * 4 + y) * 8 + gx * 4 + x) * 3 + c);
                        EXPECT_EQ(p.data[((img * 4 + k) * 48) + e], want);
                    }
        }
}

TEST(Patchify, RoundTripBitExactForAllSizesUpTo64) {
    Rng rng = make_rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t size = 1; size <= 64; ++size)
        for (std::size_t patch = 1; patch <= size; ++patch) {
            if (size % patch != 0) continue;
            ImageBatch b{1, size, size, 2, std::vector<double>(size * size * 2), {}};
            for (auto& v : b.pixels) v = u(rng);
            ASSERT_EQ(unpatchify(patchify(b, patch), size, size), b) << size << "/" << patch;
        }
}

TEST(Patchify, RejectsIndivisibleSizes) {
    ImageBatch b = counting_batch(1, 6, 6, 1);
    EXPECT_THROW((void)patchify(b, 4), ArgumentError);
    EXPECT_THROW((void)patchify(b, 0), ArgumentError);
    PatchBatch p = patchify(b, 3);
    EXPECT_THROW((void)unpatchify(p, 9, 6), ArgumentError);
}

TEST(NormalizePatches, ZeroMeanUnitVariancePerRow) {
    DenseTensor t({2, 4}, std::vector<double>{1, 2, 3, 4, 5, 5, 5, 5});
    DenseTensor n = normalize_patches(t);
    double mean = 0.0, var = 0.0;
    for (int c = 0; c < 4; ++c) mean += n[c];
    for (int c = 0; c < 4; ++c) var += n[c] * n[c];
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(var / 4.0, 1.25 / (1.25 + 1e-6), 1e-12);
    for (int c = 4; c < 8; ++c) EXPECT_EQ(n[c], 0.0);
}

TEST(RawDataset, HandWrittenBytesAreRead) {
    TempDir dir;
    auto bytes = header(2, 2, 2, 1);
    for (unsigned char v : {0, 255, 51, 102, 1, 2, 3, 4}) bytes.push_back(v);
    write_bytes(dir.file("two.swtd"), bytes);
    ImageBatch b = load_raw_dataset(dir.file("two.swtd"));
    ASSERT_EQ(b.count, 2u);
    const std::vector<double> want{0.0, 1.0, 0.2, 0.4, 1 / 255.0, 2 / 255.0, 3 / 255.0, 4 / 255.0};
    for (std::size_t i = 0; i < 8; ++i) EXPECT_DOUBLE_EQ(b.pixels[i], want[i]);
}

TEST(RawDataset, WriteThenReadQuantizesTo255Levels) {
    TempDir dir;
    Rng rng = make_rng(2);
    ImageBatch b = synth_dataset(rng, 3, 8);
    write_raw_dataset(dir.file("s.swtd"), b);
    ImageBatch r = load_raw_dataset(dir.file("s.swtd"));
    ASSERT_EQ(r.pixels.size(), b.pixels.size());
    for (std::size_t i = 0; i < b.pixels.size(); ++i) EXPECT_NEAR(r.pixels[i], b.pixels[i], 0.5 / 255.0 + 1e-12);
    write_raw_dataset(dir.file("r.swtd"), r);
    EXPECT_EQ(load_raw_dataset(dir.file("r.swtd")).pixels, r.pixels);
}

TEST(RawDataset, EmptyFileGivesEmptyStream) {
    TempDir dir;
    write_bytes(dir.file("e.swtd"), header(0, 4, 4, 3));
    RawDataset ds(dir.file("e.swtd"));
    EXPECT_EQ(ds.size(), 0u);
    EXPECT_EQ(ds.batch_count(8), 0u);
    EXPECT_EQ(load_raw_dataset(dir.file("e.swtd")).count, 0u);
}

TEST(RawDataset, CorruptionReportsByteOffset) {
    TempDir dir;
    auto good = header(2, 2, 2, 1);
    good.insert(good.end(), 8, 7);

    auto bad_magic = good;
    bad_magic[1] = 'X';
    write_bytes(dir.file("m.swtd"), bad_magic);
    try {
        RawDataset ds(dir.file("m.swtd"));
        FAIL() << "bad magic accepted";
    } catch (const FormatError& e) {
        EXPECT_EQ(e.offset(), 0u);
    }

    write_bytes(dir.file("h.swtd"), std::vector<unsigned char>(good.begin(), good.begin() + 10));
    try {
        RawDataset ds(dir.file("h.swtd"));
        FAIL() << "short header accepted";
    } catch (const FormatError& e) {
        EXPECT_EQ(e.offset(), 10u);
    }

    write_bytes(dir.file("p.swtd"), std::vector<unsigned char>(good.begin(), good.end() - 3));
    try {
        RawDataset ds(dir.file("p.swtd"));
        FAIL() << "short payload accepted";
    } catch (const FormatError& e) {
        EXPECT_EQ(e.offset(), good.size() - 3);
    }

    EXPECT_THROW(RawDataset(dir.file("missing.swtd")), IoError);
}

TEST(RawDataset, RestartableFromAnyBatchIndex) {
    TempDir dir;
    Rng rng = make_rng(3);
    write_raw_dataset(dir.file("s.swtd"), synth_dataset(rng, 11, 4));
    const ImageBatch all = load_raw_dataset(dir.file("s.swtd"));
    RawDataset ds(dir.file("s.swtd"));
    ASSERT_EQ(ds.batch_count(4), 3u);
    for (std::size_t i : {2u, 0u, 1u, 2u}) {
        const ImageBatch b = ds.read_batch(i, 4);
        std::vector<std::size_t> idx;
        for (std::size_t k = i * 4; k < std::min<std::size_t>(11, i * 4 + 4); ++k) idx.push_back(k);
        EXPECT_EQ(b.pixels, all.subset(idx).pixels) << i;
    }
    EXPECT_EQ(ds.read_batch(2, 4).count, 3u);
    EXPECT_THROW((void)ds.read_batch(3, 4), ArgumentError);
}

TEST(Synth, SameSeedIsByteIdentical) {
    Rng a = make_rng(4, streams::synth), b = make_rng(4, streams::synth);
    EXPECT_EQ(synth_dataset(a, 5, 16), synth_dataset(b, 5, 16));
}

TEST(Synth, PixelsClampedToUnitInterval) {
    Rng rng = make_rng(5);
    const ImageBatch b = synth_dataset(rng, 20, 16);
    for (double v : b.pixels) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(Synth, DifferentSeedsDifferAlmostEverywhere) {
    Rng a = make_rng(6, streams::synth), b = make_rng(7, streams::synth);
    const ImageBatch x = synth_dataset(a, 16, 32), y = synth_dataset(b, 16, 32);
    std::size_t differ = 0;
    for (std::size_t i = 0; i < x.pixels.size(); ++i) differ += x.pixels[i] != y.pixels[i];
    EXPECT_GE(static_cast<double>(differ) / static_cast<double>(x.pixels.size()), 0.99);
}

TEST(Synth, LabelsCoverEveryClass) {
    Rng rng = make_rng(8);
    const ImageBatch b = synth_dataset(rng, 200, 8);
    std::vector<int> seen(4, 0);
    for (int l : b.labels) ++seen.at(static_cast<std::size_t>(l));
    for (int s : seen) EXPECT_GT(s, 20);
    EXPECT_THROW((void)synth_dataset(rng, 0, 8), ArgumentError);
}
