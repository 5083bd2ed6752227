#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace deblur {

/// Dense rank-3 array, height x width x channels, row-major with
/// interleaved channels: index(y, x, c) = (y * width + x) * channels + c.
/// A scalar is represented as 1x1x1. Values are immutable by convention
/// once an operation has produced the tensor.
template <typename T>
class TensorT {
public:
    TensorT() = default;

    TensorT(int height, int width, int channels)
        : h_(height), w_(width), c_(channels),
          data_(check_dims(height, width, channels), T(0)) {}

    TensorT(int height, int width, int channels, std::vector<T> data)
        : h_(height), w_(width), c_(channels), data_(std::move(data)) {
        if (data_.size() != check_dims(height, width, channels))
            throw std::invalid_argument(
                "tensor data length " + std::to_string(data_.size()) +
                " does not match " + std::to_string(height) + "x" +
                std::to_string(width) + "x" + std::to_string(channels));
    }

    static TensorT full(int height, int width, int channels, T value) {
        TensorT t(height, width, channels);
        for (auto& v : t.data_) v = value;
        return t;
    }

    int height() const { return h_; }
    int width() const { return w_; }
    int channels() const { return c_; }
    std::size_t size() const { return data_.size(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& storage() { return data_; }
    const std::vector<T>& storage() const { return data_; }

    T& at(int y, int x, int c) { return data_[index(y, x, c)]; }
    T at(int y, int x, int c) const { return data_[index(y, x, c)]; }

    std::size_t index(int y, int x, int c) const {
        return (static_cast<std::size_t>(y) * w_ + x) * c_ + c;
    }

    bool same_shape(const TensorT& o) const {
        return h_ == o.h_ && w_ == o.w_ && c_ == o.c_;
    }

    bool all_finite() const {
        for (const T v : data_)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    template <typename U>
    TensorT<U> cast() const {
        std::vector<U> out(data_.size());
        for (std::size_t i = 0; i < data_.size(); ++i)
            out[i] = static_cast<U>(data_[i]);
        return TensorT<U>(h_, w_, c_, std::move(out));
    }

private:
    static std::size_t check_dims(int h, int w, int c) {
        if (h <= 0 || w <= 0 || c <= 0)
            throw std::invalid_argument("tensor dims must be positive, got " +
                                        std::to_string(h) + "x" + std::to_string(w) +
                                        "x" + std::to_string(c));
        return static_cast<std::size_t>(h) * w * c;
    }

    int h_ = 0, w_ = 0, c_ = 0;
    std::vector<T> data_;
};

using Tensor = TensorT<float>;

template <typename T>
void require_same_shape(const TensorT<T>& a, const TensorT<T>& b, const char* op) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(op) + ": shape mismatch, " +
                                    std::to_string(a.height()) + "x" + std::to_string(a.width()) +
                                    "x" + std::to_string(a.channels()) + " vs " +
                                    std::to_string(b.height()) + "x" + std::to_string(b.width()) +
                                    "x" + std::to_string(b.channels()));
}

} // namespace deblur
