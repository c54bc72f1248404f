#pragma once

// EAFC checkpoint files: magic "EAFC", u16 version, u32 JSON length and the
// JSON blob {"model": <config>, "meta": <free-form>}, then one record per
// persistent tensor: u16 name length, name, u8 dtype, u8 ndim, u32 dims,
// little-endian row-major payload.

#include <cstdint>
#include <filesystem>
#include <string>
#include <type_traits>
#include <vector>

#include "json.hpp"

#include "eafnet/binary_io.hpp"
#include "eafnet/model.hpp"

namespace eafnet::checkpoint {

inline constexpr char kMagic[4] = {'E', 'A', 'F', 'C'};
inline constexpr std::uint16_t kVersion = 1;

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <class T>
constexpr std::uint8_t dtype_code()
{
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
    return std::is_same_v<T, float> ? 0 : 1;
}

template <class T>
std::vector<std::uint8_t> encode(nn::Eafnet<T>& model, const nlohmann::json& meta = nlohmann::json::object())
{
    nlohmann::json blob;
    blob["model"] = model.config();
    blob["meta"] = meta;
    const std::string text = blob.dump();
    io::ByteWriter w;
    w.raw(kMagic, 4);
    w.u16(kVersion);
    w.u32(static_cast<std::uint32_t>(text.size()));
    w.raw(text.data(), text.size());
    for (const auto& [name, t] : model.named_tensors()) {
        if (!t->all_finite()) throw CheckpointError("checkpoint: tensor " + name + " has non-finite values");
        if (name.size() > 0xFFFF) throw CheckpointError("checkpoint: tensor name too long");
        w.u16(static_cast<std::uint16_t>(name.size()));
        w.raw(name.data(), name.size());
        w.u8(dtype_code<T>());
        w.u8(static_cast<std::uint8_t>(t->rank()));
        for (int d : t->shape()) w.u32(static_cast<std::uint32_t>(d));
        for (T v : t->values()) {
            if constexpr (std::is_same_v<T, float>) {
                w.f32(v);
            } else {
                w.f64(v);
            }
        }
    }
    return w.bytes();
}

template <class T>
struct Loaded {
    nn::Eafnet<T> model;
    nlohmann::json meta;
};

// Header only: config plus meta, no tensors.
struct Header {
    nn::EafnetConfig config;
    nlohmann::json meta;
};

inline Header decode_header(io::ByteReader& r, const std::string& what)
{
    if (r.remaining() < 4 || r.str(4) != std::string(kMagic, 4)) throw CheckpointError(what + ": bad magic (not an EAFC checkpoint)");
    const auto version = r.u16();
    if (version != kVersion) {
        throw CheckpointError(what + ": unsupported checkpoint version " + std::to_string(version));
    }
    const auto len = r.u32();
    const std::string text = r.str(len);
    nlohmann::json blob;
    try {
        blob = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(what + ": config blob is not valid JSON: " + e.what());
    }
    if (!blob.is_object() || !blob.contains("model")) throw CheckpointError(what + ": config blob lacks 'model'");
    Header h;
    try {
        h.config = blob.at("model").get<nn::EafnetConfig>();
    } catch (const std::exception& e) {
        throw CheckpointError(what + ": invalid model config: " + e.what());
    }
    h.meta = blob.contains("meta") ? blob.at("meta") : nlohmann::json::object();
    return h;
}

template <class T>
Loaded<T> decode(const std::vector<std::uint8_t>& bytes, const std::string& what = "checkpoint")
{
    try {
        io::ByteReader r(bytes, what);
        Header h = decode_header(r, what);
        Loaded<T> out{nn::Eafnet<T>(h.config), std::move(h.meta)};
        for (const auto& [name, t] : out.model.named_tensors()) {
            if (r.done()) throw CheckpointError(what + ": missing tensor " + name + " (file truncated?)");
            const std::string got = r.str(r.u16());
            if (got != name) {
                throw CheckpointError(what + ": expected tensor " + name + ", found " + got +
                                      " (config mismatch)");
            }
            const auto dtype = r.u8();
            if (dtype > 1) throw CheckpointError(what + ": tensor " + name + " has unknown dtype " + std::to_string(dtype));
            const int ndim = r.u8();
            Shape shape;
            for (int i = 0; i < ndim; ++i) shape.push_back(static_cast<int>(r.u32()));
            if (shape != t->shape()) {
                throw CheckpointError(what + ": tensor " + name + " has shape " + shape_str(shape) +
                                      " but the config expects " + shape_str(t->shape()) + " (config mismatch)");
            }
            for (T& v : t->values()) v = static_cast<T>(dtype == 0 ? static_cast<double>(r.f32()) : r.f64());
        }
        if (!r.done()) throw CheckpointError(what + ": unexpected trailing data");
        return out;
    } catch (const io::FormatError& e) {
        throw CheckpointError(e.what());
    }
}

template <class T>
void save(nn::Eafnet<T>& model, const std::filesystem::path& path, const nlohmann::json& meta = nlohmann::json::object())
{
    io::write_file(path.string(), encode(model, meta));
}

template <class T>
Loaded<T> load(const std::filesystem::path& path)
{
    return decode<T>(io::read_file(path.string()), path.string());
}

inline Header load_header(const std::filesystem::path& path)
{
    const auto bytes = io::read_file(path.string());
    try {
        io::ByteReader r(bytes, path.string());
        return decode_header(r, path.string());
    } catch (const io::FormatError& e) {
        throw CheckpointError(e.what());
    }
}

}  // namespace eafnet::checkpoint
