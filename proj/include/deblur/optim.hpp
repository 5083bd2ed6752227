#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace deblur {

template <typename T>
struct AdamwHyperT {
    T lr = T(0.001);
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T eps = T(1e-8);
    T weight_decay = T(0.01);

    void validate() const {
        if (!(lr > T(0))) throw std::invalid_argument("adamw lr must be positive");
        if (!(beta1 > T(0) && beta1 < T(1)) || !(beta2 > T(0) && beta2 < T(1)))
            throw std::invalid_argument("adamw betas must lie in (0,1)");
        if (!(eps > T(0))) throw std::invalid_argument("adamw eps must be positive");
        if (weight_decay < T(0)) throw std::invalid_argument("adamw weight decay must be >= 0");
    }
};

using AdamwHyper = AdamwHyperT<float>;

/// First/second moment accumulators per parameter group plus the shared
/// step counter.
template <typename T>
class AdamwStateT {
public:
    AdamwStateT() = default;

    explicit AdamwStateT(const std::vector<std::size_t>& group_sizes) {
        m_.reserve(group_sizes.size());
        v_.reserve(group_sizes.size());
        for (std::size_t n : group_sizes) {
            m_.emplace_back(n, T(0));
            v_.emplace_back(n, T(0));
        }
    }

    std::uint64_t step_count() const { return t_; }
    std::size_t group_count() const { return m_.size(); }

    template <typename U>
    friend void adamw_step(std::vector<std::span<U>> params,
                           std::vector<std::span<const U>> grads, AdamwStateT<U>& state,
                           const AdamwHyperT<U>& hyper);

private:
    std::vector<std::vector<T>> m_;
    std::vector<std::vector<T>> v_;
    std::uint64_t t_ = 0;
};

using AdamwState = AdamwStateT<float>;

/// One AdamW update with decoupled weight decay:
///   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2,
///   p <- p - lr (m_hat / (sqrt(v_hat) + eps) + wd p)
/// with the usual bias corrections m_hat = m/(1-b1^t), v_hat = v/(1-b2^t).
template <typename T>
void adamw_step(std::vector<std::span<T>> params, std::vector<std::span<const T>> grads,
                AdamwStateT<T>& state, const AdamwHyperT<T>& hyper) {
    hyper.validate();
    if (params.size() != grads.size() || params.size() != state.m_.size())
        throw std::invalid_argument("adamw_step: group count mismatch");
    for (std::size_t gi = 0; gi < params.size(); ++gi)
        if (params[gi].size() != grads[gi].size() || params[gi].size() != state.m_[gi].size())
            throw std::invalid_argument("adamw_step: size mismatch in group " +
                                        std::to_string(gi));

    state.t_ += 1;
    const T bc1 = T(1) - static_cast<T>(std::pow(static_cast<double>(hyper.beta1),
                                                 static_cast<double>(state.t_)));
    const T bc2 = T(1) - static_cast<T>(std::pow(static_cast<double>(hyper.beta2),
                                                 static_cast<double>(state.t_)));

    for (std::size_t gi = 0; gi < params.size(); ++gi) {
        T* p = params[gi].data();
        const T* g = grads[gi].data();
        T* m = state.m_[gi].data();
        T* v = state.v_[gi].data();
        for (std::size_t i = 0; i < params[gi].size(); ++i) {
            m[i] = hyper.beta1 * m[i] + (T(1) - hyper.beta1) * g[i];
            v[i] = hyper.beta2 * v[i] + (T(1) - hyper.beta2) * g[i] * g[i];
            const T m_hat = m[i] / bc1;
            const T v_hat = v[i] / bc2;
            p[i] -= hyper.lr * (m_hat / (std::sqrt(v_hat) + hyper.eps) +
                                hyper.weight_decay * p[i]);
        }
    }
}

struct PlateauParams {
    int patience = 4;
    double factor = 0.5;
    double min_lr = 1e-6;
    double threshold = 1e-5; // absolute improvement needed to reset

    void validate() const {
        if (patience < 0) throw std::invalid_argument("plateau patience must be >= 0");
        if (!(factor > 0.0 && factor < 1.0))
            throw std::invalid_argument("plateau factor must lie in (0,1)");
        if (min_lr < 0.0) throw std::invalid_argument("plateau min_lr must be >= 0");
        if (threshold < 0.0) throw std::invalid_argument("plateau threshold must be >= 0");
    }
};

/// Reduce-on-plateau for a maximized metric: when the monitored value has
/// not improved past the best by more than the threshold for more than
/// `patience` consecutive steps, the learning rate is multiplied by
/// `factor` (floored at min_lr) and the stall counter resets.
class PlateauScheduler {
public:
    PlateauScheduler(double initial_lr, const PlateauParams& params)
        : lr_(initial_lr), params_(params) {
        params_.validate();
        if (!(initial_lr > 0.0)) throw std::invalid_argument("initial lr must be positive");
    }

    double lr() const { return lr_; }
    double best() const { return best_; }
    int stalled_epochs() const { return stalled_; }

    double step(double val_metric) {
        if (val_metric > best_ + params_.threshold) {
            best_ = val_metric;
            stalled_ = 0;
        } else {
            ++stalled_;
            if (stalled_ > params_.patience) {
                lr_ = std::max(lr_ * params_.factor, params_.min_lr);
                stalled_ = 0;
            }
        }
        return lr_;
    }

private:
    double lr_;
    PlateauParams params_;
    double best_ = -std::numeric_limits<double>::infinity();
    int stalled_ = 0;
};

} // namespace deblur
