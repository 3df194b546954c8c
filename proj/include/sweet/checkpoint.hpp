#pragma once

// Single-file checkpoints.
//
//   bytes 0..3   "SWT1"
//   bytes 4..7   u32 little-endian header length H
//   next H bytes UTF-8 JSON header (keys sorted, compact)
//   payload      f32 little-endian tensors, in directory order
//
// The header records the format version, the model configuration, the
// unified-weight layout, the factorization, a tensor directory (name, dtype,
// shape, byte offset within the payload, byte length) and the resolved run
// configuration including the seed. Values are f64 in memory and f32 on disk.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "sweet/errors.hpp"
#include "sweet/pretrain.hpp"
#include "sweet/vit.hpp"

namespace sweet {

using Json = nlohmann::json;

inline constexpr char kCheckpointMagic[4] = {'S', 'W', 'T', '1'};
inline constexpr int kCheckpointVersion = 1;

enum class CheckpointKind { state, model };

struct Checkpoint {
    CheckpointKind kind = CheckpointKind::state;
    ViTConfig cfg;
    Constraint constraint = Constraint::tucker;  // state checkpoints only
    KroneckerShape kron;
    ParamMap tensors;
    Json run = Json::object();  // resolved run configuration, including the seed
};

inline Json to_json(const ViTConfig& c) {
    return Json{{"layers", c.layers},         {"heads", c.heads},
                {"head_dim", c.head_dim},     {"width", c.width},
                {"mlp_ratio", c.mlp_ratio},   {"patch", c.patch},
                {"image", c.image},           {"channels", c.channels},
                {"swiglu", c.swiglu},         {"rmsnorm", c.rmsnorm},
                {"rope", c.rope},             {"decoder_layers", c.decoder_layers},
                {"decoder_width", c.decoder_width}, {"decoder_heads", c.decoder_heads}};
}

inline ViTConfig vit_from_json(const Json& j) {
    ViTConfig c;
    c.layers = j.at("layers").get<std::size_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.head_dim = j.at("head_dim").get<std::size_t>();
    c.width = j.at("width").get<std::size_t>();
    c.mlp_ratio = j.at("mlp_ratio").get<std::size_t>();
    c.patch = j.at("patch").get<std::size_t>();
    c.image = j.at("image").get<std::size_t>();
    c.channels = j.at("channels").get<std::size_t>();
    c.swiglu = j.at("swiglu").get<bool>();
    c.rmsnorm = j.at("rmsnorm").get<bool>();
    c.rope = j.at("rope").get<bool>();
    c.decoder_layers = j.at("decoder_layers").get<std::size_t>();
    c.decoder_width = j.at("decoder_width").get<std::size_t>();
    c.decoder_heads = j.at("decoder_heads").get<std::size_t>();
    return c;
}

namespace detail {

inline void append_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::uint32_t read_u32(const char* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
}

}  // namespace detail

// Serialized bytes; identical inputs give identical bytes.
inline std::string encode_checkpoint(const Checkpoint& c) {
    Json dir = Json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, t] : c.tensors) {
        const std::uint64_t len = 4ull * t.size();
        dir.push_back(Json{{"name", name}, {"dtype", "f32"}, {"shape", t.shape()}, {"offset", offset}, {"length", len}});
        offset += len;
    }
    const LayoutDescriptor layout = c.cfg.layout();
    Json h{{"format", "SWT1"},
           {"version", kCheckpointVersion},
           {"kind", c.kind == CheckpointKind::state ? "state" : "model"},
           {"vit", to_json(c.cfg)},
           {"layout",
            {{"layers", layout.layers()},
             {"width", layout.width()},
             {"mlp_blocks", layout.mlp_blocks()},
             {"gated", layout.gated()},
             {"slices", layout.slice_count()}}},
           {"tensors", dir},
           {"payload_bytes", offset},
           {"run", c.run}};
    if (c.kind == CheckpointKind::state) {
        h["constraint"] = constraint_name(c.constraint);
        if (c.constraint == Constraint::tucker) {
            const auto it = c.tensors.find(pnames::core);
            if (it == c.tensors.end()) throw ArgumentError("Tucker checkpoint without a template core");
            h["ranks"] = it->second.shape();
        }
        if (c.constraint == Constraint::kronecker)
            h["kronecker"] = Json{{"outer", c.kron.outer}, {"terms", c.kron.terms}};
    }
    const std::string header = h.dump();
    std::string out(kCheckpointMagic, 4);
    detail::append_u32(out, static_cast<std::uint32_t>(header.size()));
    out += header;
    out.reserve(out.size() + offset);
    for (const auto& [name, t] : c.tensors)
        for (double v : t.data()) detail::append_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    return out;
}

inline Checkpoint decode_checkpoint(const std::string& bytes, const std::string& origin = "<memory>") {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
        throw FormatError("bad checkpoint magic in " + origin + " (expected SWT1)", 0);
    if (bytes.size() < 8) throw FormatError("truncated checkpoint header length in " + origin, bytes.size());
    const std::uint64_t hlen = detail::read_u32(bytes.data() + 4);
    if (8 + hlen > bytes.size())
        throw FormatError("checkpoint header of " + std::to_string(hlen) + " bytes runs past the end of " + origin,
                          bytes.size());
    Json h;
    try {
        h = Json::parse(bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(hlen));
    } catch (const Json::parse_error& e) {
        throw FormatError(std::string("malformed checkpoint header in ") + origin + ": " + e.what(), 8 + e.byte);
    }
    const std::uint64_t base = 8 + hlen;
    Checkpoint c;
    try {
        if (h.at("format").get<std::string>() != "SWT1" || h.at("version").get<int>() != kCheckpointVersion)
            throw FormatError("unsupported checkpoint version in " + origin, 8);
        const std::string kind = h.at("kind").get<std::string>();
        if (kind != "state" && kind != "model") throw FormatError("unknown checkpoint kind '" + kind + "'", 8);
        c.kind = kind == "state" ? CheckpointKind::state : CheckpointKind::model;
        c.cfg = vit_from_json(h.at("vit"));
        c.run = h.value("run", Json::object());
        if (c.kind == CheckpointKind::state) {
            c.constraint = parse_constraint(h.at("constraint").get<std::string>());
            if (c.constraint == Constraint::kronecker) {
                c.kron.outer = h.at("kronecker").at("outer").get<std::size_t>();
                c.kron.terms = h.at("kronecker").at("terms").get<std::size_t>();
            }
        }
        std::uint64_t expect = 0;
        for (const Json& e : h.at("tensors")) {
            const std::string name = e.at("name").get<std::string>();
            if (e.at("dtype").get<std::string>() != "f32") throw FormatError("tensor " + name + " is not f32", 8);
            const Shape shape = e.at("shape").get<Shape>();
            const std::uint64_t off = e.at("offset").get<std::uint64_t>();
            const std::uint64_t len = e.at("length").get<std::uint64_t>();
            if (off != expect)
                throw FormatError("tensor " + name + " offset " + std::to_string(off) +
                                      " breaks the contiguous directory (expected " + std::to_string(expect) + ")",
                                  base + off);
            if (shape.empty() || len != 4ull * shape_product(shape))
                throw FormatError("tensor " + name + " length does not match its shape", base + off);
            if (base + off + len > bytes.size())
                throw FormatError("checkpoint payload truncated inside tensor " + name, bytes.size());
            DenseTensor t(shape);
            const char* p = bytes.data() + base + off;
            for (std::size_t i = 0; i < t.size(); ++i)
                t.data()[i] = static_cast<double>(std::bit_cast<float>(detail::read_u32(p + 4 * i)));
            if (!c.tensors.emplace(name, std::move(t)).second)
                throw FormatError("duplicate tensor " + name, base + off);
            expect = off + len;
        }
        if (base + expect != bytes.size())
            throw FormatError("checkpoint payload has " + std::to_string(bytes.size() - base) + " bytes, directory covers " +
                                  std::to_string(expect),
                              base + expect);
    } catch (const Json::exception& e) {
        throw FormatError(std::string("invalid checkpoint header in ") + origin + ": " + e.what(), 8);
    } catch (const Error& e) {
        if (dynamic_cast<const FormatError*>(&e)) throw;
        throw FormatError(std::string("invalid checkpoint header in ") + origin + ": " + e.what(), 8);
    }
    return c;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& c) {
    const std::string bytes = encode_checkpoint(c);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open checkpoint for writing", path);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    os.close();
    if (!os) throw IoError("failed writing checkpoint", path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint", path);
    std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes, path);
}

// ---- conversions ---------------------------------------------------------------

inline Checkpoint state_checkpoint(const TrainState& st, Json run = Json::object()) {
    return {CheckpointKind::state, st.cfg, st.constraint, st.kron, st.params, std::move(run)};
}

inline TrainState state_from_checkpoint(const Checkpoint& c) {
    if (c.kind != CheckpointKind::state) throw UsageError("checkpoint holds a model, not a training state");
    TrainState st;
    st.cfg = c.cfg;
    st.constraint = c.constraint;
    st.kron = c.kron;
    st.params = c.tensors;
    return st;
}

namespace detail {
inline std::string theta_name(std::size_t l, const char* role) { return "theta." + std::to_string(l) + "." + role; }
}  // namespace detail

inline Checkpoint model_checkpoint(const ModelParams& m, Json run = Json::object()) {
    Checkpoint c{CheckpointKind::model, m.config, Constraint::none, {}, m.direct, std::move(run)};
    for (std::size_t l = 0; l < m.theta.size(); ++l) {
        const LayerWeights& lw = m.theta[l];
        c.tensors[detail::theta_name(l, "wq")] = lw.wq.to_tensor();
        c.tensors[detail::theta_name(l, "wk")] = lw.wk.to_tensor();
        c.tensors[detail::theta_name(l, "wv")] = lw.wv.to_tensor();
        c.tensors[detail::theta_name(l, "wo")] = lw.wo.to_tensor();
        c.tensors[detail::theta_name(l, "win")] = lw.win.to_tensor();
        if (!lw.wgate.empty()) c.tensors[detail::theta_name(l, "wgate")] = lw.wgate.to_tensor();
        c.tensors[detail::theta_name(l, "wout")] = lw.wout.to_tensor();
    }
    return c;
}

inline ModelParams model_from_checkpoint(const Checkpoint& c) {
    if (c.kind != CheckpointKind::model) throw UsageError("checkpoint holds a training state, not a model");
    ModelParams m{c.cfg, std::vector<LayerWeights>(c.cfg.layers), {}};
    for (const auto& [name, t] : c.tensors)
        if (name.rfind("theta.", 0) != 0) m.direct.emplace(name, t);
    auto get = [&](std::size_t l, const char* role) {
        auto it = c.tensors.find(detail::theta_name(l, role));
        if (it == c.tensors.end()) throw FormatError("model checkpoint lacks " + detail::theta_name(l, role), 8);
        return DenseMatrix::from_tensor(it->second);
    };
    for (std::size_t l = 0; l < c.cfg.layers; ++l) {
        LayerWeights& lw = m.theta[l];
        lw.wq = get(l, "wq");
        lw.wk = get(l, "wk");
        lw.wv = get(l, "wv");
        lw.wo = get(l, "wo");
        lw.win = get(l, "win");
        if (c.cfg.swiglu) lw.wgate = get(l, "wgate");
        lw.wout = get(l, "wout");
    }
    return m;
}

inline void export_model(const ModelParams& m, const std::string& path, Json run = Json::object()) {
    save_checkpoint(path, model_checkpoint(m, std::move(run)));
}

inline ModelParams load_model(const std::string& path) { return model_from_checkpoint(load_checkpoint(path)); }

}  // namespace sweet
