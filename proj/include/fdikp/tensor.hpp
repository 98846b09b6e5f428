// SPDX-License-Identifier: Apache-2.0
#ifndef FDIKP_TENSOR_HPP
#define FDIKP_TENSOR_HPP

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace fdikp {

/// Dense row-major N-d array. Images use (channel, height, width) order,
/// single planes (height, width).
template <typename T>
class TensorT {
public:
    TensorT() = default;

    explicit TensorT(std::vector<int> shape, T fill = T(0))
        : shape_(std::move(shape)), data_(checked_size(shape_), fill) {}

    TensorT(std::vector<int> shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != checked_size(shape_))
            throw std::invalid_argument("tensor: data length does not match shape");
    }

    static TensorT zeros(std::vector<int> shape) { return TensorT(std::move(shape)); }
    static TensorT full(std::vector<int> shape, T v) { return TensorT(std::move(shape), v); }

    int rank() const { return static_cast<int>(shape_.size()); }
    int extent(int d) const { return shape_[static_cast<size_t>(d)]; }
    const std::vector<int>& shape() const { return shape_; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& vec() { return data_; }
    const std::vector<T>& vec() const { return data_; }

    T& operator[](std::int64_t i) { return data_[static_cast<size_t>(i)]; }
    T operator[](std::int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // 2-d plane access
    T& operator()(int y, int x) { return data_[static_cast<size_t>(y) * shape_[1] + x]; }
    T operator()(int y, int x) const { return data_[static_cast<size_t>(y) * shape_[1] + x]; }

    // 3-d (c, y, x) access
    T& operator()(int c, int y, int x) {
        return data_[(static_cast<size_t>(c) * shape_[1] + y) * shape_[2] + x];
    }
    T operator()(int c, int y, int x) const {
        return data_[(static_cast<size_t>(c) * shape_[1] + y) * shape_[2] + x];
    }

    bool same_shape(const TensorT& o) const { return shape_ == o.shape_; }

    bool all_finite() const {
        for (T v : data_)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    /// Spatial extents: last two dims.
    int height() const { return shape_[static_cast<size_t>(rank()) - 2]; }
    int width() const { return shape_[static_cast<size_t>(rank()) - 1]; }

private:
    static std::int64_t checked_size(const std::vector<int>& shape) {
        std::int64_t n = 1;
        for (int e : shape) {
            if (e < 0) throw std::invalid_argument("tensor: negative extent");
            n *= e;
        }
        return n;
    }

    std::vector<int> shape_;
    std::vector<T> data_;
};

using Tensor = TensorT<double>;
using TensorF = TensorT<float>;

template <typename T, typename U>
TensorT<T> tensor_cast(const TensorT<U>& src) {
    TensorT<T> out(src.shape());
    for (std::int64_t i = 0; i < src.size(); ++i) out[i] = static_cast<T>(src[i]);
    return out;
}

inline std::string shape_str(const std::vector<int>& s) {
    std::string r = "(";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) r += ",";
        r += std::to_string(s[i]);
    }
    return r + ")";
}

// Raw-tensor file format "FDKT": magic, version byte, u8 rank,
// little-endian u32 extents, then little-endian f32 data row-major.
void write_fdkt(const std::string& path, const Tensor& t);
void write_fdkt(const std::string& path, const TensorF& t);
Tensor read_fdkt(const std::string& path);
TensorF read_fdkt_f32(const std::string& path);

} // namespace fdikp

#endif
