#pragma once

// Images, patches, the raw "SWTD" dataset file, and a procedural texture
// generator used in place of a natural-image corpus.
//
// SWTD layout: "SWTD", u32 count, u32 height, u32 width, u32 channels (all
// little-endian), then count*height*width*channels u8 pixels, row-major and
// channel-last. Pixels map to [0, 1] by /255.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "sweet/errors.hpp"
#include "sweet/rng.hpp"
#include "sweet/tensor.hpp"

namespace sweet {

struct ImageBatch {
    std::size_t count = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    std::vector<double> pixels;  // [image][row][col][channel], values in [0, 1]
    std::vector<int> labels;     // optional latent class per image

    [[nodiscard]] std::size_t image_size() const noexcept { return height * width * channels; }
    [[nodiscard]] double at(std::size_t img, std::size_t y, std::size_t x, std::size_t c) const {
        return pixels[((img * height + y) * width + x) * channels + c];
    }

    // Images [begin, begin + n) as a new batch.
    [[nodiscard]] ImageBatch subset(const std::vector<std::size_t>& indices) const {
        ImageBatch out{indices.size(), height, width, channels, {}, {}};
        out.pixels.reserve(indices.size() * image_size());
        for (auto i : indices) {
            out.pixels.insert(out.pixels.end(), pixels.begin() + i * image_size(), pixels.begin() + (i + 1) * image_size());
            if (!labels.empty()) out.labels.push_back(labels[i]);
        }
        return out;
    }

    friend bool operator==(const ImageBatch&, const ImageBatch&) = default;
};

struct PatchBatch {
    std::size_t images = 0;
    std::size_t patches = 0;     // N per image
    std::size_t patch = 0;       // patch edge length
    std::size_t channels = 0;
    DenseTensor data;            // (images*N) x (patch*patch*channels), image-major

    [[nodiscard]] std::size_t patch_dim() const noexcept { return patch * patch * channels; }
};

// Non-overlapping patches in row-major grid order; each patch vector is
// [row within patch][col within patch][channel].
inline PatchBatch patchify(const ImageBatch& b, std::size_t patch) {
    if (patch == 0 || b.height % patch != 0 || b.width % patch != 0)
        throw ArgumentError("patchify: image " + std::to_string(b.height) + "x" + std::to_string(b.width) +
                            " is not divisible by patch size " + std::to_string(patch));
    if (b.count == 0) throw ArgumentError("patchify: empty batch");
    const std::size_t gh = b.height / patch, gw = b.width / patch, pd = patch * patch * b.channels;
    PatchBatch out{b.count, gh * gw, patch, b.channels, DenseTensor({b.count * gh * gw, pd})};
    for (std::size_t img = 0; img < b.count; ++img)
        for (std::size_t py = 0; py < gh; ++py)
            for (std::size_t px = 0; px < gw; ++px) {
                double* dst = out.data.data().data() + ((img * gh + py) * gw + px) * pd;
                for (std::size_t y = 0; y < patch; ++y)
                    for (std::size_t x = 0; x < patch; ++x)
                        for (std::size_t c = 0; c < b.channels; ++c)
                            *dst++ = b.at(img, py * patch + y, px * patch + x, c);
            }
    return out;
}

inline ImageBatch unpatchify(const PatchBatch& p, std::size_t height, std::size_t width) {
    if (p.patch == 0 || height % p.patch != 0 || width % p.patch != 0 ||
        (height / p.patch) * (width / p.patch) != p.patches)
        throw ArgumentError("unpatchify: image size does not match the patch grid");
    const std::size_t gw = width / p.patch, pd = p.patch_dim();
    ImageBatch out{p.images, height, width, p.channels, std::vector<double>(p.images * height * width * p.channels), {}};
    for (std::size_t img = 0; img < p.images; ++img)
        for (std::size_t k = 0; k < p.patches; ++k) {
            const std::size_t py = k / gw, px = k % gw;
            const double* src = p.data.data().data() + (img * p.patches + k) * pd;
            for (std::size_t y = 0; y < p.patch; ++y)
                for (std::size_t x = 0; x < p.patch; ++x)
                    for (std::size_t c = 0; c < p.channels; ++c)
                        out.pixels[((img * height + py * p.patch + y) * width + px * p.patch + x) * p.channels + c] =
                            *src++;
        }
    return out;
}

// Per-patch standardization of reconstruction targets: (x - mean) / sqrt(var + eps).
inline DenseTensor normalize_patches(const DenseTensor& patches, double eps = 1e-6) {
    DenseTensor out = patches;
    const std::size_t pd = patches.extent(1);
    for (std::size_t r = 0; r < patches.extent(0); ++r) {
        double* row = out.data().data() + r * pd;
        double mean = 0.0;
        for (std::size_t c = 0; c < pd; ++c) mean += row[c];
        mean /= static_cast<double>(pd);
        double var = 0.0;
        for (std::size_t c = 0; c < pd; ++c) var += (row[c] - mean) * (row[c] - mean);
        var /= static_cast<double>(pd);
        const double inv = 1.0 / std::sqrt(var + eps);
        for (std::size_t c = 0; c < pd; ++c) row[c] = (row[c] - mean) * inv;
    }
    return out;
}

// ---- raw dataset file --------------------------------------------------------

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                       static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    os.write(b, 4);
}

inline std::uint32_t get_u32(const unsigned char* b) {
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint8_t quantize_pixel(double v) {
    const double c = std::clamp(v, 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

}  // namespace detail

inline constexpr std::array<char, 4> kDatasetMagic = {'S', 'W', 'T', 'D'};
inline constexpr std::size_t kDatasetHeaderBytes = 20;

inline void write_raw_dataset(const std::string& path, const ImageBatch& b) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open dataset for writing", path);
    os.write(kDatasetMagic.data(), 4);
    detail::put_u32(os, static_cast<std::uint32_t>(b.count));
    detail::put_u32(os, static_cast<std::uint32_t>(b.height));
    detail::put_u32(os, static_cast<std::uint32_t>(b.width));
    detail::put_u32(os, static_cast<std::uint32_t>(b.channels));
    std::vector<char> bytes(b.pixels.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = static_cast<char>(detail::quantize_pixel(b.pixels[i]));
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("write failed", path);
}

// Random-access reader over an SWTD file; batches are read by index so a
// stream can restart from any batch.
class RawDataset {
public:
    explicit RawDataset(std::string path) : path_(std::move(path)), in_(path_, std::ios::binary) {
        if (!in_) throw IoError("cannot open dataset", path_);
        in_.seekg(0, std::ios::end);
        const auto file_size = static_cast<std::uint64_t>(in_.tellg());
        in_.seekg(0);
        unsigned char header[kDatasetHeaderBytes] = {};
        in_.read(reinterpret_cast<char*>(header), kDatasetHeaderBytes);
        const auto got = static_cast<std::uint64_t>(in_.gcount());
        if (got < 4 || std::memcmp(header, kDatasetMagic.data(), 4) != 0)
            throw FormatError("bad dataset magic in " + path_ + " (expected SWTD)", 0);
        if (got < kDatasetHeaderBytes) throw FormatError("truncated dataset header in " + path_, got);
        count_ = detail::get_u32(header + 4);
        height_ = detail::get_u32(header + 8);
        width_ = detail::get_u32(header + 12);
        channels_ = detail::get_u32(header + 16);
        if (count_ > 0 && (height_ == 0 || width_ == 0 || channels_ == 0))
            throw FormatError("dataset " + path_ + " declares a zero image extent", 8);
        const std::uint64_t expected = kDatasetHeaderBytes + static_cast<std::uint64_t>(count_) * image_bytes();
        if (file_size < expected)
            throw FormatError("truncated dataset payload in " + path_ + ": expected " + std::to_string(expected) +
                                  " bytes, file has " + std::to_string(file_size),
                              file_size);
    }

    [[nodiscard]] std::size_t size() const noexcept { return count_; }
    [[nodiscard]] std::size_t height() const noexcept { return height_; }
    [[nodiscard]] std::size_t width() const noexcept { return width_; }
    [[nodiscard]] std::size_t channels() const noexcept { return channels_; }
    [[nodiscard]] std::size_t batch_count(std::size_t batch_size) const {
        return batch_size ? (count_ + batch_size - 1) / batch_size : 0;
    }

    // Images [index*batch_size, ...), the final batch may be short.
    ImageBatch read_batch(std::size_t index, std::size_t batch_size) {
        const std::size_t begin = index * batch_size;
        if (batch_size == 0 || begin >= count_) throw ArgumentError("read_batch: batch index out of range");
        return read_range(begin, std::min(batch_size, count_ - begin));
    }

    ImageBatch read_range(std::size_t begin, std::size_t n) {
        ImageBatch b{n, height_, width_, channels_, std::vector<double>(n * image_bytes()), {}};
        if (n == 0) return b;
        std::vector<unsigned char> bytes(n * image_bytes());
        const std::uint64_t offset = kDatasetHeaderBytes + static_cast<std::uint64_t>(begin) * image_bytes();
        in_.clear();
        in_.seekg(static_cast<std::streamoff>(offset));
        in_.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (static_cast<std::size_t>(in_.gcount()) != bytes.size())
            throw FormatError("truncated dataset payload in " + path_, offset + static_cast<std::uint64_t>(in_.gcount()));
        for (std::size_t i = 0; i < bytes.size(); ++i) b.pixels[i] = static_cast<double>(bytes[i]) / 255.0;
        return b;
    }

private:
    [[nodiscard]] std::uint64_t image_bytes() const noexcept {
        return static_cast<std::uint64_t>(height_) * width_ * channels_;
    }

    std::string path_;
    std::ifstream in_;
    std::size_t count_ = 0, height_ = 0, width_ = 0, channels_ = 0;
};

inline ImageBatch load_raw_dataset(const std::string& path) {
    RawDataset ds(path);
    ImageBatch all = ds.read_range(0, ds.size());
    return all;
}

// ---- synthetic textures ------------------------------------------------------

struct SynthOptions {
    std::size_t channels = 3;
    int classes = 4;  // latent class = orientation bucket of the dominant sinusoid
};

// Mixtures of oriented sinusoids and soft colour blobs. The dominant
// sinusoid's orientation bucket is stored as the image label.
inline ImageBatch synth_dataset(Rng& rng, std::size_t count, std::size_t size, const SynthOptions& opt = {}) {
    if (count == 0) throw ArgumentError("synth_dataset: count must be at least 1");
    if (size == 0 || opt.channels == 0 || opt.classes < 1) throw ArgumentError("synth_dataset: bad extents");
    using std::numbers::pi;
    const std::size_t ch = opt.channels;
    ImageBatch b{count, size, size, ch, std::vector<double>(count * size * size * ch), std::vector<int>(count)};
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uni = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
    std::uniform_int_distribution<int> cls_dist(0, opt.classes - 1);
    const double sz = static_cast<double>(size);
    for (std::size_t img = 0; img < count; ++img) {
        const int cls = cls_dist(rng);
        b.labels[img] = cls;
        const double bucket = pi / opt.classes;
        const double th1 = cls * bucket + uni(-0.25, 0.25) * bucket;
        const double f1 = uni(2.0, 5.0), ph1 = uni(0.0, 2 * pi);
        const double th2 = uni(0.0, pi), f2 = uni(1.0, 3.0), ph2 = uni(0.0, 2 * pi);
        std::vector<double> base(ch), amp(ch);
        for (std::size_t c = 0; c < ch; ++c) {
            base[c] = uni(0.4, 0.6);
            amp[c] = uni(0.5, 1.0);
        }
        struct Blob {
            double cx, cy, sigma;
            std::vector<double> color;
        };
        std::vector<Blob> blobs(2);
        for (auto& bl : blobs) {
            bl.cx = uni(0.0, sz);
            bl.cy = uni(0.0, sz);
            bl.sigma = uni(sz / 10.0, sz / 5.0);
            bl.color.resize(ch);
            for (auto& c : bl.color) c = uni(-1.0, 1.0);
        }
        for (std::size_t y = 0; y < size; ++y)
            for (std::size_t x = 0; x < size; ++x) {
                const double u = static_cast<double>(x) / sz, v = static_cast<double>(y) / sz;
                const double s1 = std::sin(2 * pi * f1 * (u * std::cos(th1) + v * std::sin(th1)) + ph1);
                const double s2 = std::sin(2 * pi * f2 * (u * std::cos(th2) + v * std::sin(th2)) + ph2);
                for (std::size_t c = 0; c < ch; ++c) {
                    double val = base[c] + 0.2 * amp[c] * s1 + 0.07 * s2;
                    for (const auto& bl : blobs) {
                        const double dx = static_cast<double>(x) - bl.cx, dy = static_cast<double>(y) - bl.cy;
                        val += 0.06 * bl.color[c] * std::exp(-(dx * dx + dy * dy) / (2 * bl.sigma * bl.sigma));
                    }
                    b.pixels[((img * size + y) * size + x) * ch + c] = std::clamp(val, 0.0, 1.0);
                }
            }
    }
    return b;
}

}  // namespace sweet
