#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace eafnet {

// Planar (channel-major) image: element (c, y, x) lives at (c * height + y) * width + x.
template <class T>
struct Image {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<T> data;

    Image() = default;
    Image(int c, int h, int w, T fill = T{})
        : channels(c), height(h), width(w)
    {
        if (c <= 0 || h <= 0 || w <= 0) {
            throw std::invalid_argument("image dims must be positive, got " + std::to_string(c) + "x" +
                                        std::to_string(h) + "x" + std::to_string(w));
        }
        data.assign(static_cast<std::size_t>(c) * h * w, fill);
    }

    bool empty() const { return data.empty(); }
    std::size_t size() const { return data.size(); }
    std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }

    T& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
    const T& at(int c, int y, int x) const
    {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }

    std::span<T> plane(int c) { return {data.data() + c * plane_size(), plane_size()}; }
    std::span<const T> plane(int c) const { return {data.data() + c * plane_size(), plane_size()}; }

    template <class U>
    bool same_dims(const Image<U>& o) const
    {
        return channels == o.channels && height == o.height && width == o.width;
    }
    template <class U>
    bool same_extent(const Image<U>& o) const
    {
        return height == o.height && width == o.width;
    }

    std::string dims_string() const
    {
        return std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width);
    }

    bool operator==(const Image&) const = default;
};

using ImageD = Image<double>;
using LabelMap = Image<unsigned char>;

// Copies channel `c` of `src` into a single-channel image.
template <class T>
Image<T> extract_channel(const Image<T>& src, int c)
{
    Image<T> out(1, src.height, src.width);
    auto p = src.plane(c);
    std::copy(p.begin(), p.end(), out.data.begin());
    return out;
}

template <class T>
Image<T> stack_channels(const std::vector<const Image<T>*>& parts)
{
    if (parts.empty()) throw std::invalid_argument("stack_channels: nothing to stack");
    int total = 0;
    for (const auto* p : parts) {
        if (!p->same_extent(*parts.front())) {
            throw std::invalid_argument("stack_channels: extent mismatch " + p->dims_string() + " vs " +
                                        parts.front()->dims_string());
        }
        total += p->channels;
    }
    Image<T> out(total, parts.front()->height, parts.front()->width);
    auto it = out.data.begin();
    for (const auto* p : parts) it = std::copy(p->data.begin(), p->data.end(), it);
    return out;
}

}  // namespace eafnet
