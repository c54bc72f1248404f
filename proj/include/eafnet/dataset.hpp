#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "eafnet/image.hpp"
#include "eafnet/png_io.hpp"
#include "eafnet/polarimetry.hpp"

namespace eafnet::data {

namespace fs = std::filesystem;

inline constexpr int kNumClasses = 9;

inline const std::array<std::string, kNumClasses>& class_names()
{
    static const std::array<std::string, kNumClasses> names{"Background", "Building",   "Glass",
                                                            "Car",        "Road",       "Vegetation",
                                                            "Sky",        "Pedestrian", "Bicycle"};
    return names;
}

struct LoadError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class PlaneKind { aolp, dolp, disparity };

enum class ModalityMode { none, aolp, dolp, aolp_dolp, disparity };

inline std::string to_string(PlaneKind k)
{
    switch (k) {
        case PlaneKind::aolp: return "aolp";
        case PlaneKind::dolp: return "dolp";
        case PlaneKind::disparity: return "disparity";
    }
    return "?";
}

inline PlaneKind plane_kind_from_string(const std::string& s)
{
    for (auto k : {PlaneKind::aolp, PlaneKind::dolp, PlaneKind::disparity}) {
        if (to_string(k) == s) return k;
    }
    throw std::invalid_argument("unknown channel kind '" + s + "' (expected aolp, dolp or disparity)");
}

inline std::string to_string(ModalityMode m)
{
    switch (m) {
        case ModalityMode::none: return "none";
        case ModalityMode::aolp: return "aolp";
        case ModalityMode::dolp: return "dolp";
        case ModalityMode::aolp_dolp: return "aolp_dolp";
        case ModalityMode::disparity: return "disparity";
    }
    return "?";
}

inline ModalityMode modality_mode_from_string(const std::string& s)
{
    for (auto m : {ModalityMode::none, ModalityMode::aolp, ModalityMode::dolp, ModalityMode::aolp_dolp,
                   ModalityMode::disparity}) {
        if (to_string(m) == s) return m;
    }
    throw std::invalid_argument("unknown modality '" + s + "'");
}

inline std::vector<PlaneKind> planes_of(ModalityMode m)
{
    switch (m) {
        case ModalityMode::none: return {};
        case ModalityMode::aolp: return {PlaneKind::aolp};
        case ModalityMode::dolp: return {PlaneKind::dolp};
        case ModalityMode::aolp_dolp: return {PlaneKind::aolp, PlaneKind::dolp};
        case ModalityMode::disparity: return {PlaneKind::disparity};
    }
    return {};
}

struct Sample {
    std::string id;
    ImageD rgb;                    // 3 x H x W in [0, 1]
    ImageD modality;               // k x H x W in [0, 1], empty when k = 0
    std::vector<PlaneKind> kinds;  // one tag per modality plane
    LabelMap label;                // 1 x H x W class ids

    int height() const { return label.height; }
    int width() const { return label.width; }

    int plane_index(PlaneKind k) const
    {
        for (std::size_t i = 0; i < kinds.size(); ++i) {
            if (kinds[i] == k) return static_cast<int>(i);
        }
        return -1;
    }

    ImageD plane(PlaneKind k) const
    {
        const int i = plane_index(k);
        if (i < 0) throw std::invalid_argument("sample " + id + " has no " + to_string(k) + " plane");
        return extract_channel(modality, i);
    }

    void validate(int num_classes = kNumClasses) const
    {
        if (rgb.channels != 3) throw std::invalid_argument("sample " + id + ": rgb must have 3 channels");
        if (label.channels != 1) throw std::invalid_argument("sample " + id + ": label must have 1 channel");
        if (!rgb.same_extent(label)) throw std::invalid_argument("sample " + id + ": rgb/label extent mismatch");
        if (static_cast<int>(kinds.size()) != (modality.empty() ? 0 : modality.channels)) {
            throw std::invalid_argument("sample " + id + ": modality kind tags do not match plane count");
        }
        if (!modality.empty() && !modality.same_extent(label)) {
            throw std::invalid_argument("sample " + id + ": modality/label extent mismatch");
        }
        for (unsigned char v : label.data) {
            if (v >= num_classes) {
                throw std::invalid_argument("sample " + id + ": label id " + std::to_string(v) + " out of range");
            }
        }
    }

    bool operator==(const Sample&) const = default;
};

// Network planes from a (possibly multi-channel) quad. Color channels are
// combined at the Stokes level before DoLP/AoLP are taken.
inline ImageD derive_modality(const polar::IntensityQuad& quad, ModalityMode mode,
                              polar::AolpConvention conv = polar::AolpConvention::atan2_s1_s2)
{
    if (mode == ModalityMode::none || mode == ModalityMode::disparity) return {};
    const auto stokes = polar::channel_mean(polar::compute_stokes(quad));
    std::vector<ImageD> planes;
    for (PlaneKind k : planes_of(mode)) {
        if (k == PlaneKind::dolp) {
            planes.push_back(polar::compute_dolp(stokes));
        } else {
            ImageD a = polar::compute_aolp(stokes, conv);
            for (double& v : a.data) v /= 180.0;
            planes.push_back(std::move(a));
        }
    }
    std::vector<const ImageD*> parts;
    for (const auto& p : planes) parts.push_back(&p);
    return stack_channels(parts);
}

// Mean of the four polarizer images (S0 / 2), replicated to 3 channels for gray quads.
inline ImageD rgb_from_quad(const polar::IntensityQuad& quad)
{
    quad.validate();
    const int c = quad.i0.channels;
    if (c != 1 && c != 3) throw std::invalid_argument("intensity quad must have 1 or 3 channels");
    ImageD out(3, quad.i0.height, quad.i0.width);
    const std::size_t n = quad.i0.plane_size();
    for (int k = 0; k < 3; ++k) {
        const std::size_t src = static_cast<std::size_t>(c == 3 ? k : 0) * n;
        for (std::size_t i = 0; i < n; ++i) {
            out.data[k * n + i] =
                0.25 * (quad.i0.data[src + i] + quad.i45.data[src + i] + quad.i90.data[src + i] + quad.i135.data[src + i]);
        }
    }
    return out;
}

inline Sample sample_from_capture(std::string id, const polar::IntensityQuad& quad, LabelMap label, ModalityMode mode,
                                  const std::optional<ImageD>& rgb_override = std::nullopt,
                                  const std::optional<ImageD>& disparity = std::nullopt,
                                  polar::AolpConvention conv = polar::AolpConvention::atan2_s1_s2)
{
    Sample s;
    s.id = std::move(id);
    s.rgb = rgb_override ? *rgb_override : rgb_from_quad(quad);
    s.label = std::move(label);
    if (mode == ModalityMode::disparity) {
        if (!disparity) throw std::invalid_argument("sample " + s.id + ": disparity modality requested but absent");
        s.modality = *disparity;
    } else {
        s.modality = derive_modality(quad, mode, conv);
    }
    s.kinds = planes_of(mode);
    s.validate();
    return s;
}

// ---------------------------------------------------------------- loading

inline std::vector<std::string> list_sample_ids(const fs::path& root, const std::string& split)
{
    const fs::path dir = root / split;
    if (!fs::is_directory(dir)) throw LoadError("missing split directory " + dir.string());
    std::vector<std::string> ids;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_directory()) ids.push_back(e.path().filename().string());
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

inline ImageD load_unit_png(const fs::path& p)
{
    if (!fs::exists(p)) throw LoadError("missing file " + p.string());
    try {
        return png::to_unit_image(png::read_png(p.string()));
    } catch (const png::PngError& e) {
        throw LoadError(std::string(e.what()));
    }
}

inline LabelMap load_label_png(const fs::path& p, int num_classes)
{
    if (!fs::exists(p)) throw LoadError("missing file " + p.string());
    png::RawImage raw;
    try {
        raw = png::read_png(p.string());
    } catch (const png::PngError& e) {
        throw LoadError(std::string(e.what()));
    }
    if (raw.channels != 1 || raw.bit_depth != 8) throw LoadError(p.string() + ": label must be 8-bit single channel");
    LabelMap out(1, raw.height, raw.width);
    for (std::size_t i = 0; i < raw.samples.size(); ++i) {
        if (raw.samples[i] >= num_classes) {
            throw LoadError(p.string() + ": label id " + std::to_string(raw.samples[i]) + " outside 0.." +
                            std::to_string(num_classes - 1));
        }
        out.data[i] = static_cast<unsigned char>(raw.samples[i]);
    }
    return out;
}

inline Sample load_sample(const fs::path& root, const std::string& split, const std::string& id, ModalityMode mode,
                          int num_classes = kNumClasses, polar::AolpConvention conv = polar::AolpConvention::atan2_s1_s2)
{
    const fs::path dir = root / split / id;
    // check every required file up front so the error names the first one missing
    for (const char* name : {"i0.png", "i45.png", "i90.png", "i135.png", "label.png"}) {
        if (!fs::exists(dir / name)) throw LoadError("missing file " + (dir / name).string());
    }
    if (mode == ModalityMode::disparity && !fs::exists(dir / "disparity.png")) {
        throw LoadError("missing file " + (dir / "disparity.png").string());
    }
    polar::IntensityQuad quad{load_unit_png(dir / "i0.png"), load_unit_png(dir / "i45.png"),
                              load_unit_png(dir / "i90.png"), load_unit_png(dir / "i135.png")};
    const std::array<std::pair<const char*, const ImageD*>, 3> others{
        {{"i45.png", &quad.i45}, {"i90.png", &quad.i90}, {"i135.png", &quad.i135}}};
    for (const auto& [name, img] : others) {
        if (!img->same_dims(quad.i0)) {
            throw LoadError((dir / name).string() + ": dimensions " + img->dims_string() + " differ from i0.png " +
                            quad.i0.dims_string());
        }
    }
    LabelMap label = load_label_png(dir / "label.png", num_classes);
    if (!label.same_extent(quad.i0)) throw LoadError((dir / "label.png").string() + ": dimensions differ from i0.png");

    std::optional<ImageD> rgb;
    if (fs::exists(dir / "rgb.png")) {
        ImageD r = load_unit_png(dir / "rgb.png");
        if (!r.same_extent(quad.i0)) throw LoadError((dir / "rgb.png").string() + ": dimensions differ from i0.png");
        if (r.channels == 1) r = stack_channels<double>({&r, &r, &r});
        rgb = std::move(r);
    }
    std::optional<ImageD> disparity;
    if (mode == ModalityMode::disparity) {
        ImageD d = load_unit_png(dir / "disparity.png");
        if (!d.same_extent(quad.i0) || d.channels != 1) {
            throw LoadError((dir / "disparity.png").string() + ": expected a single-channel image matching i0.png");
        }
        disparity = std::move(d);
    }
    if (quad.i0.channels != 1 && quad.i0.channels != 3) {
        throw LoadError((dir / "i0.png").string() + ": expected gray or RGB");
    }
    return sample_from_capture(id, quad, std::move(label), mode, rgb, disparity, conv);
}

// Writes a capture in the on-disk layout; intensities as 16-bit PNGs.
inline void write_capture(const fs::path& root, const std::string& split, const std::string& id,
                          const polar::IntensityQuad& quad, const LabelMap& label, const ImageD* disparity = nullptr)
{
    const fs::path dir = root / split / id;
    fs::create_directories(dir);
    png::write_png((dir / "i0.png").string(), png::from_unit_image(quad.i0, 16));
    png::write_png((dir / "i45.png").string(), png::from_unit_image(quad.i45, 16));
    png::write_png((dir / "i90.png").string(), png::from_unit_image(quad.i90, 16));
    png::write_png((dir / "i135.png").string(), png::from_unit_image(quad.i135, 16));
    png::write_png((dir / "label.png").string(), png::from_labels(label));
    if (disparity) png::write_png((dir / "disparity.png").string(), png::from_unit_image(*disparity, 16));
}

// ---------------------------------------------------------------- seeding

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Per-sample stream seed; depends only on its arguments, never on visit order.
inline std::uint64_t sample_seed(std::uint64_t global, std::string_view id, std::uint64_t epoch = 0)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : id) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return splitmix64(splitmix64(global ^ h) + epoch);
}

// ---------------------------------------------------------------- augmentation

struct AugmentationConfig {
    double scale_min = 0.75;
    double scale_max = 1.25;
    int crop = 768;
    double hflip_prob = 0.5;
    std::uint64_t seed = 0;

    void validate() const
    {
        if (!(scale_min > 0.0) || !(scale_min <= scale_max)) {
            throw std::invalid_argument("augmentation: need 0 < scale_min <= scale_max");
        }
        if (crop <= 0) throw std::invalid_argument("augmentation: crop must be positive");
        if (!(hflip_prob >= 0.0 && hflip_prob <= 1.0)) {
            throw std::invalid_argument("augmentation: hflip_prob must be in [0, 1]");
        }
    }
};

struct AugmentDraw {
    double scale = 1.0;
    int offset_y = 0;
    int offset_x = 0;
    bool flip = false;
};

// Bilinear resize with half-pixel centers, edge-clamped.
inline ImageD resize_bilinear(const ImageD& src, int out_h, int out_w)
{
    ImageD out(src.channels, out_h, out_w);
    const double sy = static_cast<double>(src.height) / out_h, sx = static_cast<double>(src.width) / out_w;
    for (int y = 0; y < out_h; ++y) {
        const double fy = std::max(0.0, (y + 0.5) * sy - 0.5);
        const int y0 = std::min(static_cast<int>(fy), src.height - 1), y1 = std::min(y0 + 1, src.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            const double fx = std::max(0.0, (x + 0.5) * sx - 0.5);
            const int x0 = std::min(static_cast<int>(fx), src.width - 1), x1 = std::min(x0 + 1, src.width - 1);
            const double wx = fx - x0;
            for (int c = 0; c < src.channels; ++c) {
                const double top = src.at(c, y0, x0) * (1 - wx) + src.at(c, y0, x1) * wx;
                const double bot = src.at(c, y1, x0) * (1 - wx) + src.at(c, y1, x1) * wx;
                out.at(c, y, x) = top * (1 - wy) + bot * wy;
            }
        }
    }
    return out;
}

template <class T>
Image<T> resize_nearest(const Image<T>& src, int out_h, int out_w)
{
    Image<T> out(src.channels, out_h, out_w);
    for (int y = 0; y < out_h; ++y) {
        const int sy = std::min(src.height - 1, static_cast<int>((y + 0.5) * src.height / out_h));
        for (int x = 0; x < out_w; ++x) {
            const int sx = std::min(src.width - 1, static_cast<int>((x + 0.5) * src.width / out_w));
            for (int c = 0; c < src.channels; ++c) out.at(c, y, x) = src.at(c, sy, sx);
        }
    }
    return out;
}

// Mirror index without edge repetition: -1 -> 1, n -> n - 2.
inline int reflect_index(int i, int n)
{
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

// Pads to at least (h, w), centering the original. Images reflect, labels get `fill`.
template <class T>
Image<T> pad_to(const Image<T>& src, int h, int w, std::optional<T> fill)
{
    if (src.height >= h && src.width >= w) return src;
    const int oh = std::max(h, src.height), ow = std::max(w, src.width);
    const int top = (oh - src.height) / 2, left = (ow - src.width) / 2;
    Image<T> out(src.channels, oh, ow);
    for (int c = 0; c < src.channels; ++c) {
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                const int sy = y - top, sx = x - left;
                const bool inside = sy >= 0 && sy < src.height && sx >= 0 && sx < src.width;
                if (inside) {
                    out.at(c, y, x) = src.at(c, sy, sx);
                } else if (fill) {
                    out.at(c, y, x) = *fill;
                } else {
                    out.at(c, y, x) = src.at(c, reflect_index(sy, src.height), reflect_index(sx, src.width));
                }
            }
        }
    }
    return out;
}

template <class T>
Image<T> crop(const Image<T>& src, int y0, int x0, int h, int w)
{
    if (y0 < 0 || x0 < 0 || y0 + h > src.height || x0 + w > src.width) {
        throw std::out_of_range("crop window outside image");
    }
    Image<T> out(src.channels, h, w);
    for (int c = 0; c < src.channels; ++c) {
        for (int y = 0; y < h; ++y) {
            const auto* row = &src.at(c, y0 + y, x0);
            std::copy(row, row + w, &out.at(c, y, 0));
        }
    }
    return out;
}

template <class T>
Image<T> mirror_horizontal(const Image<T>& src)
{
    Image<T> out = src;
    for (int c = 0; c < src.channels; ++c) {
        for (int y = 0; y < src.height; ++y) std::reverse(&out.at(c, y, 0), &out.at(c, y, 0) + src.width);
    }
    return out;
}

inline int scaled_extent(int n, double s) { return std::max(1, static_cast<int>(std::lround(n * s))); }

// Horizontal mirror plus the AoLP value remap on aolp-kind planes.
inline Sample flip_sample(const Sample& in)
{
    Sample s = in;
    s.rgb = mirror_horizontal(in.rgb);
    s.label = mirror_horizontal(in.label);
    if (!in.modality.empty()) {
        s.modality = mirror_horizontal(in.modality);
        for (std::size_t k = 0; k < in.kinds.size(); ++k) {
            if (in.kinds[k] != PlaneKind::aolp) continue;
            for (double& v : s.modality.plane(static_cast<int>(k))) v = polar::flip_aolp(v * 180.0) / 180.0;
        }
    }
    return s;
}

// Scale, then crop (reflect-padding if needed), then optional flip.
inline Sample apply_augmentation(const Sample& in, int crop_size, const AugmentDraw& d)
{
    Sample s;
    s.id = in.id;
    s.kinds = in.kinds;
    s.rgb = in.rgb;
    s.modality = in.modality;
    s.label = in.label;
    if (d.scale != 1.0) {
        const int h = scaled_extent(in.height(), d.scale), w = scaled_extent(in.width(), d.scale);
        s.rgb = resize_bilinear(in.rgb, h, w);
        if (!in.modality.empty()) s.modality = resize_bilinear(in.modality, h, w);
        s.label = resize_nearest(in.label, h, w);
    }
    s.rgb = pad_to<double>(s.rgb, crop_size, crop_size, std::nullopt);
    if (!s.modality.empty()) s.modality = pad_to<double>(s.modality, crop_size, crop_size, std::nullopt);
    s.label = pad_to<unsigned char>(s.label, crop_size, crop_size, static_cast<unsigned char>(0));
    s.rgb = crop(s.rgb, d.offset_y, d.offset_x, crop_size, crop_size);
    if (!s.modality.empty()) s.modality = crop(s.modality, d.offset_y, d.offset_x, crop_size, crop_size);
    s.label = crop(s.label, d.offset_y, d.offset_x, crop_size, crop_size);
    if (d.flip) s = flip_sample(s);
    for (double& v : s.rgb.data) v = std::clamp(v, 0.0, 1.0);
    for (double& v : s.modality.data) v = std::clamp(v, 0.0, 1.0);
    return s;
}

inline AugmentDraw draw_augmentation(const Sample& in, const AugmentationConfig& cfg, std::mt19937_64& rng)
{
    cfg.validate();
    AugmentDraw d;
    std::uniform_real_distribution<double> scale(cfg.scale_min, cfg.scale_max);
    d.scale = cfg.scale_min == cfg.scale_max ? cfg.scale_min : scale(rng);
    const int h = std::max(cfg.crop, scaled_extent(in.height(), d.scale));
    const int w = std::max(cfg.crop, scaled_extent(in.width(), d.scale));
    d.offset_y = std::uniform_int_distribution<int>(0, h - cfg.crop)(rng);
    d.offset_x = std::uniform_int_distribution<int>(0, w - cfg.crop)(rng);
    d.flip = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < cfg.hflip_prob;
    return d;
}

inline Sample augment(const Sample& in, const AugmentationConfig& cfg, std::mt19937_64& rng)
{
    return apply_augmentation(in, cfg.crop, draw_augmentation(in, cfg, rng));
}

// Largest centered window whose sides are multiples of `multiple`.
inline Sample center_crop_multiple(const Sample& in, int multiple)
{
    const int h = in.height() / multiple * multiple, w = in.width() / multiple * multiple;
    if (h == 0 || w == 0) {
        throw std::invalid_argument("sample " + in.id + " is smaller than " + std::to_string(multiple) + " pixels");
    }
    if (h == in.height() && w == in.width()) return in;
    const int y0 = (in.height() - h) / 2, x0 = (in.width() - w) / 2;
    Sample s = in;
    s.rgb = crop(in.rgb, y0, x0, h, w);
    if (!in.modality.empty()) s.modality = crop(in.modality, y0, x0, h, w);
    s.label = crop(in.label, y0, x0, h, w);
    return s;
}

// ---------------------------------------------------------------- statistics

struct DatasetStats {
    PlaneKind kind = PlaneKind::dolp;
    std::vector<double> edges;  // bins + 1 uniform edges over [0, 1]
    std::vector<std::uint64_t> counts;
    std::uint64_t total = 0;

    DatasetStats() = default;
    DatasetStats(PlaneKind k, int bins) : kind(k)
    {
        if (bins < 2) throw std::invalid_argument("histogram needs at least 2 bins");
        counts.assign(static_cast<std::size_t>(bins), 0);
        for (int i = 0; i <= bins; ++i) edges.push_back(static_cast<double>(i) / bins);
    }

    int bins() const { return static_cast<int>(counts.size()); }

    // Bins are [lo, hi) except the last, which also takes 1.0.
    void add(double v)
    {
        if (!(v >= 0.0 && v <= 1.0)) throw std::domain_error("histogram value outside [0, 1]: " + std::to_string(v));
        const auto b = std::min(bins() - 1, static_cast<int>(v * bins()));
        ++counts[static_cast<std::size_t>(b)];
        ++total;
    }

    void add_plane(const ImageD& plane)
    {
        for (double v : plane.data) add(v);
    }

    void merge(const DatasetStats& o)
    {
        if (o.kind != kind || o.bins() != bins()) throw std::invalid_argument("cannot merge incompatible histograms");
        for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += o.counts[i];
        total += o.total;
    }

    // Fraction of values in bins lying entirely below `hi`.
    double mass_below(double hi) const
    {
        std::uint64_t n = 0;
        for (std::size_t i = 0; i < counts.size(); ++i) {
            if (edges[i + 1] <= hi + 1e-12) n += counts[i];
        }
        return total ? static_cast<double>(n) / static_cast<double>(total) : 0.0;
    }

    void write_csv(std::ostream& os) const
    {
        os << "bin_lo,bin_hi,count\n";
        for (std::size_t i = 0; i < counts.size(); ++i) os << edges[i] << ',' << edges[i + 1] << ',' << counts[i] << '\n';
    }
};

inline DatasetStats histogram(const std::vector<Sample>& samples, PlaneKind kind, int bins)
{
    if (samples.empty()) throw std::invalid_argument("histogram of an empty sample set");
    DatasetStats st(kind, bins);
    for (const auto& s : samples) st.add_plane(s.plane(kind));
    return st;
}

// ---------------------------------------------------------------- synthesis

struct Material {
    std::string name;
    int class_id = 0;
    double refractive_index = 1.5;
    std::array<double, 3> base_color{0.5, 0.5, 0.5};
    double roughness = 0.5;  // 0 = mirror-like, 1 = fully diffuse (no polarization)
};

inline std::vector<Material> default_materials()
{
    return {
        {"Background", 0, 1.40, {0.55, 0.50, 0.45}, 0.95}, {"Building", 1, 1.55, {0.70, 0.65, 0.60}, 0.75},
        {"Glass", 2, 1.50, {0.45, 0.60, 0.70}, 0.05},      {"Car", 3, 1.60, {0.75, 0.20, 0.20}, 0.35},
        {"Road", 4, 1.45, {0.35, 0.35, 0.35}, 0.85},       {"Vegetation", 5, 1.35, {0.25, 0.60, 0.25}, 0.95},
        {"Sky", 6, 1.0003, {0.60, 0.75, 0.95}, 0.98},      {"Pedestrian", 7, 1.45, {0.80, 0.60, 0.50}, 0.90},
        {"Bicycle", 8, 2.40, {0.30, 0.30, 0.70}, 0.45},
    };
}

struct SyntheticSceneConfig {
    int height = 64;
    int width = 64;
    std::vector<Material> materials = default_materials();  // [0] fills the frame
    double light_azimuth_deg = 30.0;
    double light_elevation_deg = 50.0;
    bool color_informative = false;
    std::uint64_t seed = 0;
    int min_shapes = 1;
    int max_shapes = 3;
    double min_shape_frac = 0.15;  // shape side relative to the frame side
    double max_shape_frac = 0.40;
    double object_tilt_min_deg = 40.0;
    double object_tilt_max_deg = 70.0;
    double background_tilt_min_deg = 5.0;
    double background_tilt_max_deg = 35.0;
    double noise_sigma = 0.01;
    polar::AolpConvention aolp_convention = polar::AolpConvention::atan2_s1_s2;

    void validate() const
    {
        if (height < 1 || width < 1) throw std::invalid_argument("synthetic scene: image size must be positive");
        if (materials.size() < 2) throw std::invalid_argument("synthetic scene: need at least 2 materials");
        for (const auto& m : materials) {
            if (!(m.refractive_index > 1.0)) {
                throw std::invalid_argument("synthetic scene: material " + m.name + " needs refractive index > 1");
            }
            if (!(m.roughness >= 0.0 && m.roughness <= 1.0)) {
                throw std::invalid_argument("synthetic scene: material " + m.name + " roughness outside [0, 1]");
            }
            if (m.class_id < 0 || m.class_id > 255) throw std::invalid_argument("synthetic scene: bad class id");
            for (double c : m.base_color) {
                if (!(c >= 0.0 && c <= 1.0)) throw std::invalid_argument("synthetic scene: base color outside [0, 1]");
            }
        }
        if (min_shapes < 0 || max_shapes < min_shapes) throw std::invalid_argument("synthetic scene: bad shape count");
        if (!(min_shape_frac > 0.0 && min_shape_frac <= max_shape_frac && max_shape_frac <= 1.0)) {
            throw std::invalid_argument("synthetic scene: bad shape size range");
        }
        const auto tilt_ok = [](double lo, double hi) { return lo >= 0.0 && lo <= hi && hi < 90.0; };
        if (!tilt_ok(object_tilt_min_deg, object_tilt_max_deg) ||
            !tilt_ok(background_tilt_min_deg, background_tilt_max_deg)) {
            throw std::invalid_argument("synthetic scene: tilt ranges must satisfy 0 <= lo <= hi < 90");
        }
        if (!(noise_sigma >= 0.0)) throw std::invalid_argument("synthetic scene: noise_sigma must be >= 0");
    }

    // Background plus one glossy dielectric; only polarization tells them apart.
    static SyntheticSceneConfig two_material()
    {
        SyntheticSceneConfig c;
        auto all = default_materials();
        c.materials = {all[0], all[2]};
        return c;
    }
};

struct SyntheticCapture {
    polar::IntensityQuad quad;
    LabelMap label;
    ImageD disparity;  // 1 x H x W in [0, 1]: ground ramp, shapes nearer
};

inline SyntheticCapture synthesize_capture(const SyntheticSceneConfig& cfg, std::mt19937_64& rng)
{
    cfg.validate();
    const int H = cfg.height, W = cfg.width;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const auto uni = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };

    // per-pixel surface: material index, tilt (incidence) and azimuth
    std::vector<int> mat(static_cast<std::size_t>(H) * W, 0);
    std::vector<double> tilt(mat.size()), azim(mat.size(), 90.0);
    ImageD disparity(1, H, W);
    for (int y = 0; y < H; ++y) {
        const double t = H > 1 ? static_cast<double>(y) / (H - 1) : 0.0;
        for (int x = 0; x < W; ++x) {
            tilt[static_cast<std::size_t>(y) * W + x] =
                cfg.background_tilt_max_deg + (cfg.background_tilt_min_deg - cfg.background_tilt_max_deg) * t;
            disparity.at(0, y, x) = 0.1 + 0.3 * t;
        }
    }
    const int shapes = std::uniform_int_distribution<int>(cfg.min_shapes, cfg.max_shapes)(rng);
    const int n_obj = static_cast<int>(cfg.materials.size()) - 1;
    for (int s = 0; s < shapes; ++s) {
        const int m = 1 + std::uniform_int_distribution<int>(0, n_obj - 1)(rng);
        const int sh = std::max(1, static_cast<int>(std::lround(uni(cfg.min_shape_frac, cfg.max_shape_frac) * H)));
        const int sw = std::max(1, static_cast<int>(std::lround(uni(cfg.min_shape_frac, cfg.max_shape_frac) * W)));
        const int y0 = std::uniform_int_distribution<int>(0, H - sh)(rng);
        const int x0 = std::uniform_int_distribution<int>(0, W - sw)(rng);
        const double t0 = uni(cfg.object_tilt_min_deg, cfg.object_tilt_max_deg);
        const double az = uni(0.0, 360.0);
        const double bend = uni(-10.0, 10.0);  // gentle curvature across the shape
        const double near = uni(0.5, 1.0);
        const double ca = std::cos(polar::deg_to_rad(az)), sa = std::sin(polar::deg_to_rad(az));
        for (int y = y0; y < y0 + sh; ++y) {
            for (int x = x0; x < x0 + sw; ++x) {
                const double v = ((x - x0 + 0.5) / sw - 0.5) * ca + ((y - y0 + 0.5) / sh - 0.5) * sa;
                const std::size_t i = static_cast<std::size_t>(y) * W + x;
                mat[i] = m;
                tilt[i] = std::clamp(t0 + bend * v, 0.0, 85.0);
                azim[i] = az;
                disparity.data[i] = near;
            }
        }
    }

    // global illumination ramp along the light's image-plane direction
    const double la = polar::deg_to_rad(cfg.light_azimuth_deg);
    const double spread = std::cos(polar::deg_to_rad(cfg.light_elevation_deg));
    polar::StokesMap st{ImageD(3, H, W), ImageD(3, H, W), ImageD(3, H, W)};
    LabelMap label(1, H, W);
    const std::size_t n = st.s0.plane_size();
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * W + x;
            const Material& m = cfg.materials[static_cast<std::size_t>(mat[i])];
            label.data[i] = static_cast<unsigned char>(m.class_id);
            const double ramp = ((x + 0.5) / W - 0.5) * std::cos(la) + ((y + 0.5) / H - 0.5) * std::sin(la);
            const double shade = 0.45 + 0.3 * spread * ramp;  // within [0.3, 0.6]
            const double p = (1.0 - m.roughness) * polar::reflected_dolp(1.0, m.refractive_index, tilt[i]);
            // reflected light is polarized perpendicular to the plane of incidence
            const double phi = polar::deg_to_rad(std::fmod(azim[i] + 90.0, 180.0));
            const double along_s1 = cfg.aolp_convention == polar::AolpConvention::atan2_s1_s2 ? std::sin(2 * phi)
                                                                                        : std::cos(2 * phi);
            const double along_s2 = cfg.aolp_convention == polar::AolpConvention::atan2_s1_s2 ? std::cos(2 * phi)
                                                                                        : std::sin(2 * phi);
            const auto& color = cfg.color_informative ? m.base_color : cfg.materials[0].base_color;
            for (int c = 0; c < 3; ++c) {
                const double s0 = 2.0 * color[static_cast<std::size_t>(c)] * shade;
                st.s0.data[c * n + i] = s0;
                st.s1.data[c * n + i] = s0 * p * along_s1;
                st.s2.data[c * n + i] = s0 * p * along_s2;
            }
        }
    }
    SyntheticCapture out{polar::synthesize_intensities(st), std::move(label), std::move(disparity)};
    if (cfg.noise_sigma > 0.0) {
        std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
        for (ImageD* q : {&out.quad.i0, &out.quad.i45, &out.quad.i90, &out.quad.i135}) {
            for (double& v : q->data) v = std::clamp(v + noise(rng), 0.0, 1.0);
        }
    } else {
        for (ImageD* q : {&out.quad.i0, &out.quad.i45, &out.quad.i90, &out.quad.i135}) {
            for (double& v : q->data) v = std::clamp(v, 0.0, 1.0);
        }
    }
    return out;
}

inline Sample synthesize_scene(const SyntheticSceneConfig& cfg, std::mt19937_64& rng, ModalityMode mode,
                               std::string id = "synthetic")
{
    auto cap = synthesize_capture(cfg, rng);
    return sample_from_capture(std::move(id), cap.quad, std::move(cap.label), mode, std::nullopt, cap.disparity,
                               cfg.aolp_convention);
}

inline std::string synthetic_id(int index)
{
    std::string s = std::to_string(index);
    return std::string(s.size() < 5 ? 5 - s.size() : 0, '0') + s;
}

// Scene `index` of `split`; seeded per (config seed, split, index).
inline SyntheticCapture synthetic_capture_at(const SyntheticSceneConfig& cfg, const std::string& split, int index)
{
    std::mt19937_64 rng(sample_seed(cfg.seed, split + "/" + synthetic_id(index)));
    return synthesize_capture(cfg, rng);
}

inline std::vector<Sample> synthesize_split(const SyntheticSceneConfig& cfg, const std::string& split, int count,
                                            ModalityMode mode)
{
    std::vector<Sample> out;
    out.reserve(static_cast<std::size_t>(std::max(0, count)));
    for (int i = 0; i < count; ++i) {
        auto cap = synthetic_capture_at(cfg, split, i);
        out.push_back(sample_from_capture(synthetic_id(i), cap.quad, std::move(cap.label), mode, std::nullopt,
                                          cap.disparity, cfg.aolp_convention));
    }
    return out;
}

inline std::vector<Sample> load_split(const fs::path& root, const std::string& split, ModalityMode mode,
                                      int num_classes = kNumClasses,
                                      polar::AolpConvention conv = polar::AolpConvention::atan2_s1_s2)
{
    std::vector<Sample> out;
    for (const auto& id : list_sample_ids(root, split)) out.push_back(load_sample(root, split, id, mode, num_classes, conv));
    if (out.empty()) throw LoadError("no samples under " + (root / split).string());
    return out;
}

}  // namespace eafnet::data
