#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "deblur/ops.hpp"
#include "deblur/tensor.hpp"

namespace deblur {

/// Window and stability constants for the structural similarity index.
/// Defaults are the standard SSIM choices: 11x11 Gaussian window with
/// sigma 1.5, k1 = 0.01, k2 = 0.03, dynamic range 1 for [0,1] images.
struct SsimParams {
    int window_size = 11;
    double window_sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;

    double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
    double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }

    void validate() const {
        if (window_size <= 0 || window_size % 2 == 0)
            throw std::invalid_argument("ssim window size must be odd positive");
        if (!(window_sigma > 0.0)) throw std::invalid_argument("ssim window sigma must be positive");
        if (!(k1 > 0.0) || !(k2 > 0.0)) throw std::invalid_argument("ssim k1/k2 must be positive");
        if (!(dynamic_range > 0.0))
            throw std::invalid_argument("ssim dynamic range must be positive");
    }
};

/// Multi-scale SSIM configuration. Weights are normalized to sum 1 at
/// construction; the default takes the first `scales` canonical MS-SSIM
/// weights and renormalizes them.
struct MsSsimParams {
    SsimParams base;
    int scales = 3;
    std::vector<double> scale_weights;

    MsSsimParams() { *this = with_canonical_weights(SsimParams{}, 3); }

    MsSsimParams(SsimParams base_, int scales_, std::vector<double> weights)
        : base(base_), scales(scales_), scale_weights(std::move(weights)) {
        base.validate();
        if (scales < 1) throw std::invalid_argument("ms-ssim needs at least one scale");
        if (static_cast<int>(scale_weights.size()) != scales)
            throw std::invalid_argument("ms-ssim weight count must equal scale count");
        double sum = 0.0;
        for (double w : scale_weights) {
            if (!(w > 0.0)) throw std::invalid_argument("ms-ssim scale weights must be positive");
            sum += w;
        }
        for (double& w : scale_weights) w /= sum;
    }

    static MsSsimParams with_canonical_weights(SsimParams base, int scales) {
        static const double canonical[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
        if (scales < 1 || scales > 5)
            throw std::invalid_argument("canonical ms-ssim weights cover 1..5 scales, got " +
                                        std::to_string(scales));
        return MsSsimParams(base, scales,
                            std::vector<double>(canonical, canonical + scales));
    }

    /// Smallest spatial dim the input must have so the coarsest scale
    /// still fits the window.
    int min_input_dim() const { return base.window_size << (scales - 1); }
};

/// Per-scale geometric-mean floor; keeps ln() finite when a clamped
/// scale value is exactly 0.
inline constexpr double kMsSsimFloor = 1e-8;

/// Components of the training objective. total = mse + l1 + (1 - ms_ssim).
struct LossBreakdown {
    double mse = 0.0;
    double l1 = 0.0;
    double ms_ssim = 0.0;
    double total = 0.0;
};

template <typename T>
double mse(const TensorT<T>& x, const TensorT<T>& y) {
    require_same_shape(x, y, "mse");
    const T* px = x.data();
    const T* py = y.data();
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = static_cast<double>(px[i]) - static_cast<double>(py[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(x.size());
}

template <typename T>
double l1(const TensorT<T>& x, const TensorT<T>& y) {
    require_same_shape(x, y, "l1");
    const T* px = x.data();
    const T* py = y.data();
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        acc += std::abs(static_cast<double>(px[i]) - static_cast<double>(py[i]));
    return acc / static_cast<double>(x.size());
}

/// 10 log10(L^2 / MSE) in dB; +infinity when the images are identical.
template <typename T>
double psnr(const TensorT<T>& x, const TensorT<T>& y, double dynamic_range) {
    require_same_shape(x, y, "psnr");
    if (!(dynamic_range > 0.0)) throw std::invalid_argument("psnr dynamic range must be positive");
    const double m = mse(x, y);
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(dynamic_range * dynamic_range / m);
}

/// Mean full SSIM and mean contrast-structure term over all valid window
/// positions and channels.
struct SsimTerms {
    double full = 0.0;
    double cs = 0.0;
};

namespace detail {

template <typename T>
TensorT<double> to_double(const TensorT<T>& t) {
    return t.template cast<double>();
}

inline TensorT<double> emul(const TensorT<double>& a, const TensorT<double>& b) {
    TensorT<double> r(a.height(), a.width(), a.channels());
    for (std::size_t i = 0; i < a.size(); ++i) r.data()[i] = a.data()[i] * b.data()[i];
    return r;
}

} // namespace detail

template <typename T>
SsimTerms ssim_terms(const TensorT<T>& x, const TensorT<T>& y, const SsimParams& params) {
    require_same_shape(x, y, "ssim");
    params.validate();
    if (x.height() < params.window_size || x.width() < params.window_size)
        throw std::invalid_argument("ssim: image " + std::to_string(x.height()) + "x" +
                                    std::to_string(x.width()) + " smaller than window " +
                                    std::to_string(params.window_size));

    const TensorT<double> xd = detail::to_double(x);
    const TensorT<double> yd = detail::to_double(y);
    const WindowT<double> win = gaussian_window<double>(params.window_size, params.window_sigma);

    const TensorT<double> mx = window_mean(xd, win);
    const TensorT<double> my = window_mean(yd, win);
    const TensorT<double> mxx = window_mean(detail::emul(xd, xd), win);
    const TensorT<double> myy = window_mean(detail::emul(yd, yd), win);
    const TensorT<double> mxy = window_mean(detail::emul(xd, yd), win);

    const double c1 = params.c1(), c2 = params.c2();
    double full_acc = 0.0, cs_acc = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
        const double ux = mx.data()[i], uy = my.data()[i];
        const double sx2 = mxx.data()[i] - ux * ux;
        const double sy2 = myy.data()[i] - uy * uy;
        const double sxy = mxy.data()[i] - ux * uy;
        const double cs = (2.0 * sxy + c2) / (sx2 + sy2 + c2);
        const double lum = (2.0 * ux * uy + c1) / (ux * ux + uy * uy + c1);
        cs_acc += cs;
        full_acc += lum * cs;
    }
    const double n = static_cast<double>(mx.size());
    return SsimTerms{full_acc / n, cs_acc / n};
}

/// Mean local SSIM: [(2 mu_x mu_y + C1)(2 sigma_xy + C2)] /
/// [(mu_x^2 + mu_y^2 + C1)(sigma_x^2 + sigma_y^2 + C2)], Gaussian-windowed
/// statistics per channel at every valid position.
template <typename T>
double ssim(const TensorT<T>& x, const TensorT<T>& y, const SsimParams& params) {
    return ssim_terms(x, y, params).full;
}

/// Multi-scale SSIM: contrast-structure term at every scale except the
/// coarsest, full SSIM there, each value clamped into [0,1] (the lower
/// clamp is the ReLU stabilization; the upper edge only trims float
/// rounding above 1), combined as exp(sum w_s ln(max(v_s, eps))).
template <typename T>
double ms_ssim(const TensorT<T>& x, const TensorT<T>& y, const MsSsimParams& params) {
    require_same_shape(x, y, "ms_ssim");
    const int need = params.min_input_dim();
    if (x.height() < need || x.width() < need)
        throw std::invalid_argument(
            "ms_ssim: image " + std::to_string(x.height()) + "x" + std::to_string(x.width()) +
            " too small for " + std::to_string(params.scales) + " scales with window " +
            std::to_string(params.base.window_size) + " (needs " + std::to_string(need) + ")");

    TensorT<double> cx = detail::to_double(x);
    TensorT<double> cy = detail::to_double(y);
    double log_acc = 0.0;
    for (int s = 0; s < params.scales; ++s) {
        const SsimTerms terms = ssim_terms(cx, cy, params.base);
        double v = (s == params.scales - 1) ? terms.full : terms.cs;
        v = std::min(1.0, std::max(0.0, v));
        log_acc += params.scale_weights[s] * std::log(std::max(v, kMsSsimFloor));
        if (s + 1 < params.scales) {
            cx = downsample2(cx);
            cy = downsample2(cy);
        }
    }
    return std::exp(log_acc);
}

/// Plain (non-graph) evaluation of the training objective.
template <typename T>
LossBreakdown combined_loss(const TensorT<T>& pred, const TensorT<T>& target,
                            const MsSsimParams& params) {
    require_same_shape(pred, target, "combined_loss");
    LossBreakdown b;
    b.mse = mse(pred, target);
    b.l1 = l1(pred, target);
    b.ms_ssim = ms_ssim(pred, target, params);
    b.total = b.mse + b.l1 + (1.0 - b.ms_ssim);
    return b;
}

} // namespace deblur
