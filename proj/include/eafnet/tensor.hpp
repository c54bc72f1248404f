#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <new>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace eafnet {

using Shape = std::vector<int>;

// Vectorized kernels peel unaligned heads, so their rounding depends on the
// buffer address; a fixed 64-byte alignment makes results reproducible.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t kAlign{64};

    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept
    {
    }

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

    template <class U>
    bool operator==(const AlignedAllocator<U>&) const noexcept
    {
        return true;
    }
};

template <class T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

inline std::size_t shape_numel(const Shape& s)
{
    std::size_t n = 1;
    for (int d : s) n *= static_cast<std::size_t>(d);
    return n;
}

inline std::string shape_str(const Shape& s)
{
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

// Dense row-major array of rank 1..4. Images use N x C x H x W.
template <class T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;
    explicit Tensor(Shape shape, T fill = T(0)) : shape_(std::move(shape))
    {
        validate_shape();
        data_.assign(shape_numel(shape_), fill);
    }
    Tensor(Shape shape, const std::vector<T>& values) : shape_(std::move(shape)), data_(values.begin(), values.end())
    {
        validate_shape();
        if (data_.size() != shape_numel(shape_)) {
            throw std::invalid_argument("tensor value count " + std::to_string(data_.size()) +
                                        " does not match shape " + shape_str(shape_));
        }
    }

    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
    std::size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }
    AlignedVector<T>& storage() { return data_; }
    const AlignedVector<T>& storage() const { return data_; }
    std::vector<T> to_vector() const { return {data_.begin(), data_.end()}; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T& at(int n, int c, int h, int w)
    {
        return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }
    const T& at(int n, int c, int h, int w) const
    {
        return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const
    {
        return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
    }

    Tensor& operator+=(const Tensor& o)
    {
        require_same_shape(o, "+=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }

    template <class U>
    Tensor<U> cast() const
    {
        return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
    }

    void require_same_shape(const Tensor& o, const char* what) const
    {
        if (shape_ != o.shape_) {
            throw std::invalid_argument(std::string(what) + ": shape mismatch " + shape_str(shape_) + " vs " +
                                        shape_str(o.shape_));
        }
    }

    bool operator==(const Tensor&) const = default;

private:
    void validate_shape() const
    {
        if (shape_.empty() || shape_.size() > 4) {
            throw std::invalid_argument("tensor rank must be 1..4, got shape " + shape_str(shape_));
        }
        for (int d : shape_) {
            if (d <= 0) throw std::invalid_argument("tensor dims must be positive, got " + shape_str(shape_));
        }
    }

    Shape shape_;
    AlignedVector<T> data_;
};

}  // namespace eafnet
