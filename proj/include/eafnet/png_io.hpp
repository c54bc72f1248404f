#pragma once

// Minimal libpng wrapper: 8/16-bit gray or RGB, plus indexed-palette output.

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "eafnet/image.hpp"

namespace eafnet::png {

struct PngError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Interleaved samples, row-major, `channels` per pixel.
struct RawImage {
    int width = 0;
    int height = 0;
    int channels = 0;   // 1 (gray) or 3 (rgb)
    int bit_depth = 8;  // 8 or 16
    std::vector<std::uint16_t> samples;

    int max_value() const { return bit_depth == 16 ? 65535 : 255; }
};

namespace detail {
struct FileCloser {
    void operator()(std::FILE* f) const
    {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;
}  // namespace detail

// Palette images are returned as their indices (gray, 8-bit); alpha is dropped.
inline RawImage read_png(const std::string& path)
{
    detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw PngError("cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw PngError("png_create_read_struct failed for " + path);
    png_infop info = png_create_info_struct(png);
    RawImage img;
    std::vector<png_bytep> rows;
    std::vector<unsigned char> buf;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw PngError("corrupt or unreadable PNG: " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);
    if (depth < 8) {
        if (color == PNG_COLOR_TYPE_GRAY) png_set_expand_gray_1_2_4_to_8(png);
        if (color == PNG_COLOR_TYPE_PALETTE) png_set_packing(png);
        depth = 8;
    }
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    img.bit_depth = png_get_bit_depth(png, info);
    img.channels = png_get_channels(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    buf.resize(rowbytes * static_cast<std::size_t>(img.height));
    rows.resize(static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y) rows[static_cast<std::size_t>(y)] = buf.data() + rowbytes * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    if (img.channels != 1 && img.channels != 3) throw PngError("unsupported channel count in " + path);
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height * img.channels;
    img.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        img.samples[i] = img.bit_depth == 16 ? static_cast<std::uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1]) : buf[i];
    }
    return img;
}

inline void write_png_impl(const std::string& path, int width, int height, int color_type, int bit_depth,
                           const std::vector<unsigned char>& bytes, const std::vector<png_color>* palette)
{
    detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw PngError("cannot create " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw PngError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    const int per_pixel = color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
    const std::size_t rowbytes = static_cast<std::size_t>(width) * per_pixel * (bit_depth / 8);
    std::vector<png_bytep> rows(static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y) rows[static_cast<std::size_t>(y)] = const_cast<unsigned char*>(bytes.data()) + rowbytes * y;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw PngError("failed writing " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth, color_type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    if (palette) png_set_PLTE(png, info, palette->data(), static_cast<int>(palette->size()));
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline void write_png(const std::string& path, const RawImage& img)
{
    if (img.channels != 1 && img.channels != 3) throw PngError("write_png: channels must be 1 or 3");
    if (img.bit_depth != 8 && img.bit_depth != 16) throw PngError("write_png: bit depth must be 8 or 16");
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height * img.channels;
    if (img.samples.size() != n) throw PngError("write_png: sample count mismatch");
    std::vector<unsigned char> bytes(n * (img.bit_depth / 8));
    for (std::size_t i = 0; i < n; ++i) {
        if (img.bit_depth == 16) {
            bytes[2 * i] = static_cast<unsigned char>(img.samples[i] >> 8);
            bytes[2 * i + 1] = static_cast<unsigned char>(img.samples[i] & 0xff);
        } else {
            bytes[i] = static_cast<unsigned char>(img.samples[i]);
        }
    }
    write_png_impl(path, img.width, img.height, img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                   img.bit_depth, bytes, nullptr);
}

inline void write_png_indexed(const std::string& path, const LabelMap& labels,
                              const std::vector<std::array<unsigned char, 3>>& palette)
{
    std::vector<png_color> plte;
    for (const auto& c : palette) plte.push_back({c[0], c[1], c[2]});
    for (unsigned char v : labels.data) {
        if (v >= palette.size()) throw PngError("write_png_indexed: index outside palette");
    }
    write_png_impl(path, labels.width, labels.height, PNG_COLOR_TYPE_PALETTE, 8, labels.data, &plte);
}

// Planar [0,1] image scaled by the bit depth's maximum sample value.
inline ImageD to_unit_image(const RawImage& raw)
{
    ImageD out(raw.channels, raw.height, raw.width);
    const double scale = 1.0 / raw.max_value();
    for (int y = 0; y < raw.height; ++y) {
        for (int x = 0; x < raw.width; ++x) {
            for (int c = 0; c < raw.channels; ++c) {
                out.at(c, y, x) = raw.samples[(static_cast<std::size_t>(y) * raw.width + x) * raw.channels + c] * scale;
            }
        }
    }
    return out;
}

// Quantizes a planar [0,1] image (1 or 3 channels); values are clamped.
inline RawImage from_unit_image(const ImageD& img, int bit_depth)
{
    RawImage raw;
    raw.width = img.width;
    raw.height = img.height;
    raw.channels = img.channels;
    raw.bit_depth = bit_depth;
    raw.samples.resize(img.size());
    const double mx = raw.max_value();
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < img.channels; ++c) {
                const double v = std::clamp(img.at(c, y, x), 0.0, 1.0);
                raw.samples[(static_cast<std::size_t>(y) * img.width + x) * img.channels + c] =
                    static_cast<std::uint16_t>(std::lround(v * mx));
            }
        }
    }
    return raw;
}

inline RawImage from_labels(const LabelMap& labels)
{
    RawImage raw;
    raw.width = labels.width;
    raw.height = labels.height;
    raw.channels = 1;
    raw.bit_depth = 8;
    raw.samples.assign(labels.data.begin(), labels.data.end());
    return raw;
}

}  // namespace eafnet::png
