#pragma once

#include <stdexcept>
#include <string>

#include "deblur/autograd.hpp"
#include "deblur/metrics.hpp"

namespace deblur {

// Graph-building counterparts of the plain metrics: every metric here is a
// differentiable node so the training loop can backpropagate through the
// full objective.

template <typename T>
NodeId mse_node(GraphT<T>& g, NodeId x, NodeId y) {
    return g.global_mean(g.square(g.sub(x, y)));
}

template <typename T>
NodeId l1_node(GraphT<T>& g, NodeId x, NodeId y) {
    return g.global_mean(g.abs(g.sub(x, y)));
}

template <typename T>
struct SsimScaleNodes {
    NodeId full; // mean local SSIM, 1x1x1
    NodeId cs;   // mean contrast-structure term, 1x1x1
};

template <typename T>
SsimScaleNodes<T> ssim_nodes(GraphT<T>& g, NodeId x, NodeId y, const SsimParams& params) {
    params.validate();
    const TensorT<T>& xv = g.value(x);
    if (xv.height() < params.window_size || xv.width() < params.window_size)
        throw std::invalid_argument("ssim_nodes: image smaller than window");

    const WindowT<T> win = gaussian_window<T>(params.window_size, params.window_sigma);
    const T c1 = static_cast<T>(params.c1());
    const T c2 = static_cast<T>(params.c2());

    const NodeId mx = g.window_mean(x, win);
    const NodeId my = g.window_mean(y, win);
    const NodeId mxx = g.window_mean(g.mul(x, x), win);
    const NodeId myy = g.window_mean(g.mul(y, y), win);
    const NodeId mxy = g.window_mean(g.mul(x, y), win);

    const NodeId mx2 = g.mul(mx, mx);
    const NodeId my2 = g.mul(my, my);
    const NodeId mxmy = g.mul(mx, my);
    const NodeId sx2 = g.sub(mxx, mx2);
    const NodeId sy2 = g.sub(myy, my2);
    const NodeId sxy = g.sub(mxy, mxmy);

    const NodeId lum_num = g.affine(mxmy, T(2), c1);
    const NodeId lum_den = g.affine(g.add(mx2, my2), T(1), c1);
    const NodeId cs_num = g.affine(sxy, T(2), c2);
    const NodeId cs_den = g.affine(g.add(sx2, sy2), T(1), c2);

    const NodeId full_map = g.div(g.mul(lum_num, cs_num), g.mul(lum_den, cs_den));
    const NodeId cs_map = g.div(cs_num, cs_den);
    return SsimScaleNodes<T>{g.global_mean(full_map), g.global_mean(cs_map)};
}

template <typename T>
NodeId ms_ssim_node(GraphT<T>& g, NodeId x, NodeId y, const MsSsimParams& params) {
    const TensorT<T>& xv = g.value(x);
    const int need = params.min_input_dim();
    if (xv.height() < need || xv.width() < need)
        throw std::invalid_argument("ms_ssim_node: image too small for " +
                                    std::to_string(params.scales) + " scales (needs " +
                                    std::to_string(need) + ")");

    NodeId cx = x, cy = y;
    NodeId log_acc{};
    for (int s = 0; s < params.scales; ++s) {
        const SsimScaleNodes<T> terms = ssim_nodes(g, cx, cy, params.base);
        NodeId v = (s == params.scales - 1) ? terms.full : terms.cs;
        // lower edge is the ReLU stabilization plus the geometric-mean
        // floor; upper edge trims float rounding above 1
        v = g.clamp(v, static_cast<T>(kMsSsimFloor), T(1));
        const NodeId term = g.affine(g.log(v), static_cast<T>(params.scale_weights[s]), T(0));
        log_acc = (s == 0) ? term : g.add(log_acc, term);
        if (s + 1 < params.scales) {
            cx = g.downsample2(cx);
            cy = g.downsample2(cy);
        }
    }
    return g.exp(log_acc);
}

template <typename T>
struct LossNodes {
    NodeId mse;
    NodeId l1;
    NodeId ms_ssim;
    NodeId total;
};

/// total = MSE + L1 + (1 - MS-SSIM), all as graph nodes over `pred`.
template <typename T>
LossNodes<T> combined_loss_nodes(GraphT<T>& g, NodeId pred, NodeId target,
                                 const MsSsimParams& params) {
    require_same_shape(g.value(pred), g.value(target), "combined_loss");
    LossNodes<T> nodes;
    nodes.mse = mse_node(g, pred, target);
    nodes.l1 = l1_node(g, pred, target);
    nodes.ms_ssim = ms_ssim_node(g, pred, target, params);
    nodes.total = g.add(g.add(nodes.mse, nodes.l1), g.affine(nodes.ms_ssim, T(-1), T(1)));
    return nodes;
}

template <typename T>
LossBreakdown read_breakdown(const GraphT<T>& g, const LossNodes<T>& nodes) {
    LossBreakdown b;
    b.mse = static_cast<double>(g.scalar(nodes.mse));
    b.l1 = static_cast<double>(g.scalar(nodes.l1));
    b.ms_ssim = static_cast<double>(g.scalar(nodes.ms_ssim));
    b.total = static_cast<double>(g.scalar(nodes.total));
    return b;
}

} // namespace deblur
