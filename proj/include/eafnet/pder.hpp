#pragma once

// PDER derived-tensor files:
//   "PDER" | u16 version=1 | u8 dtype (0=f32, 1=f64) | u8 ndim | ndim x u32 dims | payload
// All integers and the row-major payload are little-endian.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "eafnet/binary_io.hpp"
#include "eafnet/image.hpp"

namespace eafnet::pder {

using io::FormatError;

inline constexpr char kMagic[4] = {'P', 'D', 'E', 'R'};
inline constexpr std::uint16_t kVersion = 1;

enum class Dtype : std::uint8_t { f32 = 0, f64 = 1 };

struct Array {
    Dtype dtype = Dtype::f64;
    std::vector<std::uint32_t> dims;
    std::vector<double> values;  // f32 payloads are widened exactly
};

inline std::vector<std::uint8_t> encode(const Array& a)
{
    if (a.dims.empty() || a.dims.size() > 255) throw FormatError("PDER: ndim must be 1..255");
    std::uint64_t n = 1;
    for (auto d : a.dims) {
        if (d == 0) throw FormatError("PDER: empty dimension");
        n *= d;
        if (n > (std::uint64_t{1} << 40)) throw FormatError("PDER: dimension overflow");
    }
    if (n != a.values.size()) throw FormatError("PDER: value count does not match dims");
    io::ByteWriter w;
    w.raw(kMagic, 4);
    w.u16(kVersion);
    w.u8(static_cast<std::uint8_t>(a.dtype));
    w.u8(static_cast<std::uint8_t>(a.dims.size()));
    for (auto d : a.dims) w.u32(d);
    for (double v : a.values) {
        if (a.dtype == Dtype::f64) {
            w.f64(v);
        } else {
            w.f32(static_cast<float>(v));
        }
    }
    return std::move(w.bytes());
}

inline Array decode(const std::vector<std::uint8_t>& bytes, const std::string& what = "PDER")
{
    io::ByteReader r(bytes, what);
    if (r.str(4) != std::string(kMagic, 4)) throw FormatError(what + ": bad magic");
    const auto version = r.u16();
    if (version != kVersion) throw FormatError(what + ": unsupported version " + std::to_string(version));
    const auto dt = r.u8();
    if (dt > 1) throw FormatError(what + ": unknown dtype " + std::to_string(dt));
    Array a;
    a.dtype = static_cast<Dtype>(dt);
    const auto ndim = r.u8();
    if (ndim == 0) throw FormatError(what + ": zero dimensions");
    std::uint64_t n = 1;
    for (int i = 0; i < ndim; ++i) {
        const auto d = r.u32();
        if (d == 0) throw FormatError(what + ": empty dimension");
        a.dims.push_back(d);
        n *= d;
        if (n > (std::uint64_t{1} << 40)) throw FormatError(what + ": dimension overflow");
    }
    const std::uint64_t elem = a.dtype == Dtype::f64 ? 8 : 4;
    if (n * elem != r.remaining()) {
        throw FormatError(what + (n * elem > r.remaining() ? ": truncated payload" : ": trailing bytes after payload"));
    }
    a.values.resize(n);
    for (auto& v : a.values) v = a.dtype == Dtype::f64 ? r.f64() : static_cast<double>(r.f32());
    return a;
}

// Single-channel images are stored as H x W planes, others as C x H x W stacks.
inline Array from_image(const ImageD& img, Dtype dtype = Dtype::f64)
{
    if (img.empty()) throw FormatError("PDER: empty image");
    Array a;
    a.dtype = dtype;
    if (img.channels == 1) {
        a.dims = {static_cast<std::uint32_t>(img.height), static_cast<std::uint32_t>(img.width)};
    } else {
        a.dims = {static_cast<std::uint32_t>(img.channels), static_cast<std::uint32_t>(img.height),
                  static_cast<std::uint32_t>(img.width)};
    }
    a.values = img.data;
    return a;
}

inline ImageD to_image(const Array& a)
{
    const auto too_big = [](std::uint32_t d) { return d > static_cast<std::uint32_t>(std::numeric_limits<int>::max()); };
    for (auto d : a.dims) {
        if (too_big(d)) throw FormatError("PDER: dimension overflow");
    }
    ImageD img;
    if (a.dims.size() == 2) {
        img = ImageD(1, static_cast<int>(a.dims[0]), static_cast<int>(a.dims[1]));
    } else if (a.dims.size() == 3) {
        img = ImageD(static_cast<int>(a.dims[0]), static_cast<int>(a.dims[1]), static_cast<int>(a.dims[2]));
    } else {
        throw FormatError("PDER: expected a 2-D plane or 3-D stack, got ndim " + std::to_string(a.dims.size()));
    }
    img.data = a.values;
    return img;
}

inline void save_derived(const ImageD& img, const std::string& path, Dtype dtype = Dtype::f64)
{
    for (double v : img.data) {
        if (!std::isfinite(v)) throw FormatError("PDER: refusing to save non-finite values");
    }
    io::write_file(path, encode(from_image(img, dtype)));
}

inline ImageD load_derived(const std::string& path) { return to_image(decode(io::read_file(path), path)); }

}  // namespace eafnet::pder
