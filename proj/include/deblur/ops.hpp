#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "deblur/tensor.hpp"

namespace deblur {

/// 2-D convolution kernel. Weight order is [out_channel][in_channel][row][col],
/// bias one entry per out channel. This flat order is also the checkpoint
/// serialization order, so it is fixed.
template <typename T>
struct ConvKernelT {
    int kh = 0, kw = 0;
    int in_channels = 0, out_channels = 0;
    std::vector<T> weights;
    std::vector<T> bias;

    ConvKernelT() = default;

    ConvKernelT(int kh_, int kw_, int in_c, int out_c)
        : kh(kh_), kw(kw_), in_channels(in_c), out_channels(out_c),
          weights(check(kh_, kw_, in_c, out_c), T(0)),
          bias(static_cast<std::size_t>(out_c), T(0)) {}

    std::size_t weight_count() const { return weights.size(); }

    std::size_t windex(int o, int i, int r, int c) const {
        return ((static_cast<std::size_t>(o) * in_channels + i) * kh + r) * kw + c;
    }

    template <typename U>
    ConvKernelT<U> cast() const {
        ConvKernelT<U> k(kh, kw, in_channels, out_channels);
        for (std::size_t i = 0; i < weights.size(); ++i) k.weights[i] = static_cast<U>(weights[i]);
        for (std::size_t i = 0; i < bias.size(); ++i) k.bias[i] = static_cast<U>(bias[i]);
        return k;
    }

private:
    static std::size_t check(int kh, int kw, int in_c, int out_c) {
        if (kh <= 0 || kw <= 0 || kh % 2 == 0 || kw % 2 == 0)
            throw std::invalid_argument("kernel dims must be odd positive, got " +
                                        std::to_string(kh) + "x" + std::to_string(kw));
        if (in_c <= 0 || out_c <= 0)
            throw std::invalid_argument("kernel channel counts must be positive");
        return static_cast<std::size_t>(kh) * kw * in_c * out_c;
    }
};

using ConvKernel = ConvKernelT<float>;

namespace detail {

// Weights repacked to [row][col][in][out] so the innermost accumulation
// runs contiguously over out channels.
template <typename T>
std::vector<T> repack_weights(const ConvKernelT<T>& k) {
    std::vector<T> rep(k.weights.size());
    const int ic = k.in_channels, oc = k.out_channels;
    for (int r = 0; r < k.kh; ++r)
        for (int c = 0; c < k.kw; ++c)
            for (int i = 0; i < ic; ++i)
                for (int o = 0; o < oc; ++o)
                    rep[((static_cast<std::size_t>(r) * k.kw + c) * ic + i) * oc + o] =
                        k.weights[k.windex(o, i, r, c)];
    return rep;
}

} // namespace detail

/// Cross-correlation (no kernel flip) with "same" zero padding: the output
/// has the input's spatial dims and kernel.out_channels channels.
template <typename T>
TensorT<T> conv2d(const TensorT<T>& input, const ConvKernelT<T>& kernel) {
    if (input.channels() != kernel.in_channels)
        throw std::invalid_argument("conv2d: input has " + std::to_string(input.channels()) +
                                    " channels, kernel expects " +
                                    std::to_string(kernel.in_channels));
    const int h = input.height(), w = input.width();
    const int ic = kernel.in_channels, oc = kernel.out_channels;
    const int ph = (kernel.kh - 1) / 2, pw = (kernel.kw - 1) / 2;

    const std::vector<T> rep = detail::repack_weights(kernel);
    TensorT<T> out(h, w, oc);
    const T* in = input.data();
    std::vector<T> acc(oc);

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int o = 0; o < oc; ++o) acc[o] = kernel.bias[o];
            const int ky0 = std::max(0, ph - y), ky1 = std::min(kernel.kh, h + ph - y);
            const int kx0 = std::max(0, pw - x), kx1 = std::min(kernel.kw, w + pw - x);
            for (int ky = ky0; ky < ky1; ++ky) {
                const int yy = y + ky - ph;
                for (int kx = kx0; kx < kx1; ++kx) {
                    const int xx = x + kx - pw;
                    const T* ip = in + (static_cast<std::size_t>(yy) * w + xx) * ic;
                    const T* wp = rep.data() +
                                  (static_cast<std::size_t>(ky) * kernel.kw + kx) * ic * oc;
                    for (int i = 0; i < ic; ++i) {
                        const T v = ip[i];
                        const T* wo = wp + static_cast<std::size_t>(i) * oc;
                        for (int o = 0; o < oc; ++o) acc[o] += v * wo[o];
                    }
                }
            }
            T* op = out.data() + (static_cast<std::size_t>(y) * w + x) * oc;
            for (int o = 0; o < oc; ++o) op[o] = acc[o];
        }
    }
    return out;
}

/// Elementwise max(0, v). The subgradient at exactly 0 is 0.
template <typename T>
TensorT<T> relu(const TensorT<T>& input) {
    TensorT<T> out(input.height(), input.width(), input.channels());
    const T* in = input.data();
    T* o = out.data();
    for (std::size_t i = 0; i < input.size(); ++i) o[i] = in[i] > T(0) ? in[i] : T(0);
    return out;
}

/// 2x2 average pooling with stride 2; a trailing odd row/column is dropped.
template <typename T>
TensorT<T> downsample2(const TensorT<T>& input) {
    const int h = input.height(), w = input.width(), c = input.channels();
    if (h < 2 || w < 2)
        throw std::invalid_argument("downsample2: input must be at least 2x2, got " +
                                    std::to_string(h) + "x" + std::to_string(w));
    const int oh = h / 2, ow = w / 2;
    TensorT<T> out(oh, ow, c);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x)
            for (int ch = 0; ch < c; ++ch)
                out.at(y, x, ch) = (input.at(2 * y, 2 * x, ch) + input.at(2 * y, 2 * x + 1, ch) +
                                    input.at(2 * y + 1, 2 * x, ch) +
                                    input.at(2 * y + 1, 2 * x + 1, ch)) /
                                   T(4);
    return out;
}

template <typename T>
TensorT<T> clamp01(const TensorT<T>& input) {
    TensorT<T> out(input.height(), input.width(), input.channels());
    const T* in = input.data();
    T* o = out.data();
    for (std::size_t i = 0; i < input.size(); ++i)
        o[i] = std::min(T(1), std::max(T(0), in[i]));
    return out;
}

/// Copies the size x size square whose top-left corner is (y0, x0).
template <typename T>
TensorT<T> crop(const TensorT<T>& input, int y0, int x0, int size) {
    if (y0 < 0 || x0 < 0 || y0 + size > input.height() || x0 + size > input.width())
        throw std::invalid_argument("crop: region out of bounds");
    TensorT<T> out(size, size, input.channels());
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            for (int c = 0; c < input.channels(); ++c)
                out.at(y, x, c) = input.at(y0 + y, x0 + x, c);
    return out;
}

/// Separable nonnegative window with 1-D weights summing to 1; the 2-D
/// window is the outer product, so it also sums to 1.
template <typename T>
struct WindowT {
    int size = 0;
    std::vector<T> w1;

    T weight(int r, int c) const { return w1[r] * w1[c]; }
};

using Window = WindowT<float>;

/// Gaussian window, weights proportional to exp(-d^2 / (2 sigma^2)).
template <typename T>
WindowT<T> gaussian_window(int size, double sigma) {
    if (size <= 0 || size % 2 == 0)
        throw std::invalid_argument("window size must be odd positive, got " +
                                    std::to_string(size));
    if (!(sigma > 0.0)) throw std::invalid_argument("window sigma must be positive");
    WindowT<T> win;
    win.size = size;
    win.w1.resize(size);
    const int half = size / 2;
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        const double d = i - half;
        const double v = std::exp(-(d * d) / (2.0 * sigma * sigma));
        win.w1[i] = static_cast<T>(v);
        sum += v;
    }
    for (int i = 0; i < size; ++i) win.w1[i] = static_cast<T>(win.w1[i] / sum);
    return win;
}

/// Weighted windowed mean at every valid (unpadded) position, per channel.
/// Output dims are (h - size + 1) x (w - size + 1) x channels. Evaluated as
/// two 1-D passes; the window is separable by construction.
template <typename T>
TensorT<T> window_mean(const TensorT<T>& input, const WindowT<T>& win) {
    const int h = input.height(), w = input.width(), c = input.channels();
    const int n = win.size;
    if (h < n || w < n)
        throw std::invalid_argument("window_mean: input " + std::to_string(h) + "x" +
                                    std::to_string(w) + " smaller than window " +
                                    std::to_string(n));
    const int ow = w - n + 1, oh = h - n + 1;

    // horizontal pass: (h, ow, c)
    TensorT<T> tmp(h, ow, c);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            const T* ip = input.data() + (static_cast<std::size_t>(y) * w + x) * c;
            T* tp = tmp.data() + (static_cast<std::size_t>(y) * ow + x) * c;
            for (int ch = 0; ch < c; ++ch) {
                T acc = T(0);
                for (int k = 0; k < n; ++k) acc += win.w1[k] * ip[static_cast<std::size_t>(k) * c + ch];
                tp[ch] = acc;
            }
        }

    // vertical pass: (oh, ow, c)
    TensorT<T> out(oh, ow, c);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            T* op = out.data() + (static_cast<std::size_t>(y) * ow + x) * c;
            for (int ch = 0; ch < c; ++ch) {
                T acc = T(0);
                for (int k = 0; k < n; ++k) acc += win.w1[k] * tmp.at(y + k, x, ch);
                op[ch] = acc;
            }
        }
    return out;
}

/// Mean over every element, returned as a 1x1x1 tensor.
template <typename T>
TensorT<T> global_mean(const TensorT<T>& input) {
    T acc = T(0);
    const T* in = input.data();
    for (std::size_t i = 0; i < input.size(); ++i) acc += in[i];
    TensorT<T> out(1, 1, 1);
    out.data()[0] = acc / static_cast<T>(input.size());
    return out;
}

} // namespace deblur
