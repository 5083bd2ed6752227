#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "deblur/ops.hpp"
#include "deblur/tensor.hpp"

namespace deblur {

// Reverse-mode differentiation over a fixed operation set, just wide enough
// to express the training loss: conv2d, relu, downsample2, elementwise
// add/sub/mul/div/abs/square/log/exp, scalar affine, clamp, windowed and
// global means. Nodes are recorded in construction order, which is already
// topological because operands must exist before they are combined. Outputs
// are stored on the nodes, so a graph can replay its forward pass and a
// backward sweep has every saved activation it needs.
//
// A graph is confined to the thread that built it.

struct NodeId {
    int v = -1;
};
struct KernelId {
    int v = -1;
};

template <typename T>
struct KernelGradT {
    std::vector<T> weights;
    std::vector<T> bias;
};

template <typename T>
class GradientsT {
public:
    /// Gradient of the loss w.r.t. a differentiable input leaf. Leaves the
    /// loss never reached get a zero tensor of the leaf's shape.
    const TensorT<T>& for_input(NodeId id) const {
        auto it = inputs_.find(id.v);
        if (it == inputs_.end())
            throw std::invalid_argument("for_input: node is not a differentiable input leaf");
        return it->second;
    }

    const KernelGradT<T>& for_kernel(KernelId id) const {
        if (id.v < 0 || id.v >= static_cast<int>(kernels_.size()))
            throw std::invalid_argument("for_kernel: unknown kernel id");
        return kernels_[id.v];
    }

private:
    template <typename U>
    friend class GraphT;
    std::unordered_map<int, TensorT<T>> inputs_;
    std::vector<KernelGradT<T>> kernels_;
};

template <typename T>
class GraphT {
    enum class Op {
        Input,
        Constant,
        Conv2d,
        Relu,
        Downsample2,
        Add,
        Sub,
        Mul,
        Div,
        Abs,
        Square,
        Log,
        Exp,
        Clamp,
        Affine,
        WindowMean,
        GlobalMean,
    };

    struct Node {
        Op op;
        int a = -1, b = -1;
        int kernel = -1;
        T c0 = T(0), c1 = T(0); // affine scale/shift, clamp lo/hi
        WindowT<T> window;
        TensorT<T> out;
    };

public:
    /// Differentiable leaf; backward() reports a gradient for it.
    NodeId input(TensorT<T> value) {
        nodes_.push_back(Node{Op::Input, -1, -1, -1, T(0), T(0), {}, std::move(value)});
        return NodeId{static_cast<int>(nodes_.size() - 1)};
    }

    /// Non-differentiable leaf (targets, reference images).
    NodeId constant(TensorT<T> value) {
        nodes_.push_back(Node{Op::Constant, -1, -1, -1, T(0), T(0), {}, std::move(value)});
        return NodeId{static_cast<int>(nodes_.size() - 1)};
    }

    /// Registers a trainable convolution kernel. One kernel may feed any
    /// number of conv2d nodes; its gradient accumulates across all of them.
    KernelId kernel(ConvKernelT<T> k) {
        kernels_.push_back(std::move(k));
        return KernelId{static_cast<int>(kernels_.size() - 1)};
    }

    const ConvKernelT<T>& kernel_value(KernelId id) const { return kernels_.at(id.v); }

    NodeId conv2d(NodeId x, KernelId k) {
        Node n{Op::Conv2d, x.v, -1, k.v, T(0), T(0), {}, {}};
        n.out = deblur::conv2d(out(x.v), kernels_.at(k.v));
        return push(std::move(n));
    }

    NodeId relu(NodeId x) {
        Node n{Op::Relu, x.v, -1, -1, T(0), T(0), {}, deblur::relu(out(x.v))};
        return push(std::move(n));
    }

    NodeId downsample2(NodeId x) {
        Node n{Op::Downsample2, x.v, -1, -1, T(0), T(0), {}, deblur::downsample2(out(x.v))};
        return push(std::move(n));
    }

    NodeId add(NodeId a, NodeId b) { return binary(Op::Add, a, b, "add"); }
    NodeId sub(NodeId a, NodeId b) { return binary(Op::Sub, a, b, "sub"); }
    NodeId mul(NodeId a, NodeId b) { return binary(Op::Mul, a, b, "mul"); }

    /// Elementwise quotient; the denominator must be bounded away from zero
    /// (in the loss it always carries a +C stability constant).
    NodeId div(NodeId a, NodeId b) { return binary(Op::Div, a, b, "div"); }

    NodeId abs(NodeId x) { return unary(Op::Abs, x); }
    NodeId square(NodeId x) { return unary(Op::Square, x); }
    NodeId log(NodeId x) { return unary(Op::Log, x); }
    NodeId exp(NodeId x) { return unary(Op::Exp, x); }

    /// Elementwise clamp to [lo, hi]. Derivative is 1 for lo < v <= hi and
    /// 0 elsewhere, so with lo = 0 it keeps the ReLU convention at 0 while
    /// values sitting exactly at hi still pass gradient.
    NodeId clamp(NodeId x, T lo, T hi) {
        Node n{Op::Clamp, x.v, -1, -1, lo, hi, {}, {}};
        n.out = compute_clamp(out(x.v), lo, hi);
        return push(std::move(n));
    }

    /// scale * x + shift, elementwise with scalar coefficients.
    NodeId affine(NodeId x, T scale, T shift) {
        Node n{Op::Affine, x.v, -1, -1, scale, shift, {}, {}};
        n.out = compute_affine(out(x.v), scale, shift);
        return push(std::move(n));
    }

    NodeId window_mean(NodeId x, const WindowT<T>& win) {
        Node n{Op::WindowMean, x.v, -1, -1, T(0), T(0), win, {}};
        n.out = deblur::window_mean(out(x.v), win);
        return push(std::move(n));
    }

    NodeId global_mean(NodeId x) {
        Node n{Op::GlobalMean, x.v, -1, -1, T(0), T(0), {}, deblur::global_mean(out(x.v))};
        return push(std::move(n));
    }

    const TensorT<T>& value(NodeId id) const { return nodes_.at(id.v).out; }

    T scalar(NodeId id) const {
        const TensorT<T>& t = nodes_.at(id.v).out;
        if (t.size() != 1) throw std::invalid_argument("scalar: node is not 1x1x1");
        return t.data()[0];
    }

    std::size_t node_count() const { return nodes_.size(); }

    /// Reverse sweep from a scalar loss node. Returns d loss / d leaf for
    /// every differentiable input leaf and every registered kernel;
    /// parameters the loss never reached get zeros.
    GradientsT<T> backward(NodeId loss) const {
        const Node& ln = nodes_.at(loss.v);
        if (ln.out.size() != 1)
            throw std::invalid_argument("backward: loss node must be scalar (1x1x1)");

        std::vector<TensorT<T>> grads(nodes_.size());
        GradientsT<T> result;
        result.kernels_.resize(kernels_.size());
        for (std::size_t k = 0; k < kernels_.size(); ++k) {
            result.kernels_[k].weights.assign(kernels_[k].weights.size(), T(0));
            result.kernels_[k].bias.assign(kernels_[k].bias.size(), T(0));
        }

        grads[loss.v] = TensorT<T>(1, 1, 1);
        grads[loss.v].data()[0] = T(1);

        for (int i = loss.v; i >= 0; --i) {
            if (grads[i].size() == 0) continue;
            propagate(i, grads, result);
        }

        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            if (nodes_[i].op != Op::Input) continue;
            if (grads[i].size() != 0)
                result.inputs_.emplace(static_cast<int>(i), std::move(grads[i]));
            else
                result.inputs_.emplace(static_cast<int>(i),
                                       TensorT<T>(nodes_[i].out.height(), nodes_[i].out.width(),
                                                  nodes_[i].out.channels()));
        }
        return result;
    }

    /// Recomputes every non-leaf node from the recorded leaves and compares
    /// bit-for-bit with the stored outputs.
    bool replay_matches() const {
        for (const Node& n : nodes_) {
            if (n.op == Op::Input || n.op == Op::Constant) continue;
            TensorT<T> redo = recompute(n);
            if (redo.size() != n.out.size()) return false;
            if (std::memcmp(redo.data(), n.out.data(), redo.size() * sizeof(T)) != 0)
                return false;
        }
        return true;
    }

private:
    const TensorT<T>& out(int idx) const { return nodes_.at(idx).out; }

    NodeId push(Node n) {
        nodes_.push_back(std::move(n));
        return NodeId{static_cast<int>(nodes_.size() - 1)};
    }

    NodeId unary(Op op, NodeId x) {
        Node n{op, x.v, -1, -1, T(0), T(0), {}, {}};
        n.out = compute_unary(op, out(x.v));
        return push(std::move(n));
    }

    NodeId binary(Op op, NodeId a, NodeId b, const char* name) {
        require_same_shape(out(a.v), out(b.v), name);
        Node n{op, a.v, b.v, -1, T(0), T(0), {}, {}};
        n.out = compute_binary(op, out(a.v), out(b.v));
        return push(std::move(n));
    }

    static TensorT<T> compute_unary(Op op, const TensorT<T>& x) {
        TensorT<T> r(x.height(), x.width(), x.channels());
        const T* in = x.data();
        T* o = r.data();
        switch (op) {
            case Op::Abs:
                for (std::size_t i = 0; i < x.size(); ++i) o[i] = in[i] < T(0) ? -in[i] : in[i];
                break;
            case Op::Square:
                for (std::size_t i = 0; i < x.size(); ++i) o[i] = in[i] * in[i];
                break;
            case Op::Log:
                for (std::size_t i = 0; i < x.size(); ++i) o[i] = std::log(in[i]);
                break;
            case Op::Exp:
                for (std::size_t i = 0; i < x.size(); ++i) o[i] = std::exp(in[i]);
                break;
            default:
                throw std::logic_error("compute_unary: bad op");
        }
        return r;
    }

    static TensorT<T> compute_binary(Op op, const TensorT<T>& a, const TensorT<T>& b) {
        TensorT<T> r(a.height(), a.width(), a.channels());
        const T* pa = a.data();
        const T* pb = b.data();
        T* o = r.data();
        switch (op) {
            case Op::Add:
                for (std::size_t i = 0; i < a.size(); ++i) o[i] = pa[i] + pb[i];
                break;
            case Op::Sub:
                for (std::size_t i = 0; i < a.size(); ++i) o[i] = pa[i] - pb[i];
                break;
            case Op::Mul:
                for (std::size_t i = 0; i < a.size(); ++i) o[i] = pa[i] * pb[i];
                break;
            case Op::Div:
                for (std::size_t i = 0; i < a.size(); ++i) o[i] = pa[i] / pb[i];
                break;
            default:
                throw std::logic_error("compute_binary: bad op");
        }
        return r;
    }

    static TensorT<T> compute_clamp(const TensorT<T>& x, T lo, T hi) {
        TensorT<T> r(x.height(), x.width(), x.channels());
        const T* in = x.data();
        T* o = r.data();
        for (std::size_t i = 0; i < x.size(); ++i) o[i] = std::min(hi, std::max(lo, in[i]));
        return r;
    }

    static TensorT<T> compute_affine(const TensorT<T>& x, T scale, T shift) {
        TensorT<T> r(x.height(), x.width(), x.channels());
        const T* in = x.data();
        T* o = r.data();
        for (std::size_t i = 0; i < x.size(); ++i) o[i] = scale * in[i] + shift;
        return r;
    }

    TensorT<T> recompute(const Node& n) const {
        switch (n.op) {
            case Op::Conv2d:
                return deblur::conv2d(out(n.a), kernels_.at(n.kernel));
            case Op::Relu:
                return deblur::relu(out(n.a));
            case Op::Downsample2:
                return deblur::downsample2(out(n.a));
            case Op::Add:
            case Op::Sub:
            case Op::Mul:
            case Op::Div:
                return compute_binary(n.op, out(n.a), out(n.b));
            case Op::Abs:
            case Op::Square:
            case Op::Log:
            case Op::Exp:
                return compute_unary(n.op, out(n.a));
            case Op::Clamp:
                return compute_clamp(out(n.a), n.c0, n.c1);
            case Op::Affine:
                return compute_affine(out(n.a), n.c0, n.c1);
            case Op::WindowMean:
                return deblur::window_mean(out(n.a), n.window);
            case Op::GlobalMean:
                return deblur::global_mean(out(n.a));
            default:
                throw std::logic_error("recompute: bad op");
        }
    }

    static void ensure(TensorT<T>& g, const TensorT<T>& like) {
        if (g.size() == 0) g = TensorT<T>(like.height(), like.width(), like.channels());
    }

    void propagate(int i, std::vector<TensorT<T>>& grads, GradientsT<T>& result) const {
        const Node& n = nodes_[i];
        const TensorT<T>& g = grads[i];
        switch (n.op) {
            case Op::Input:
            case Op::Constant:
                return;
            case Op::Conv2d: {
                ensure(grads[n.a], out(n.a));
                conv2d_backward(g, out(n.a), kernels_.at(n.kernel), grads[n.a],
                                result.kernels_[n.kernel]);
                return;
            }
            case Op::Relu: {
                ensure(grads[n.a], out(n.a));
                const T* x = out(n.a).data();
                const T* gp = g.data();
                T* ga = grads[n.a].data();
                for (std::size_t j = 0; j < g.size(); ++j)
                    if (x[j] > T(0)) ga[j] += gp[j];
                return;
            }
            case Op::Downsample2: {
                ensure(grads[n.a], out(n.a));
                const int oh = n.out.height(), ow = n.out.width(), c = n.out.channels();
                for (int y = 0; y < oh; ++y)
                    for (int x = 0; x < ow; ++x)
                        for (int ch = 0; ch < c; ++ch) {
                            const T q = g.at(y, x, ch) / T(4);
                            grads[n.a].at(2 * y, 2 * x, ch) += q;
                            grads[n.a].at(2 * y, 2 * x + 1, ch) += q;
                            grads[n.a].at(2 * y + 1, 2 * x, ch) += q;
                            grads[n.a].at(2 * y + 1, 2 * x + 1, ch) += q;
                        }
                return;
            }
            case Op::Add: {
                accum_scaled(grads, n.a, g, T(1));
                accum_scaled(grads, n.b, g, T(1));
                return;
            }
            case Op::Sub: {
                accum_scaled(grads, n.a, g, T(1));
                accum_scaled(grads, n.b, g, T(-1));
                return;
            }
            case Op::Mul: {
                ensure(grads[n.a], out(n.a));
                ensure(grads[n.b], out(n.b));
                const T* pa = out(n.a).data();
                const T* pb = out(n.b).data();
                const T* gp = g.data();
                T* ga = grads[n.a].data();
                T* gb = grads[n.b].data();
                for (std::size_t j = 0; j < g.size(); ++j) {
                    ga[j] += gp[j] * pb[j];
                    gb[j] += gp[j] * pa[j];
                }
                return;
            }
            case Op::Div: {
                ensure(grads[n.a], out(n.a));
                ensure(grads[n.b], out(n.b));
                const T* pa = out(n.a).data();
                const T* pb = out(n.b).data();
                const T* gp = g.data();
                T* ga = grads[n.a].data();
                T* gb = grads[n.b].data();
                for (std::size_t j = 0; j < g.size(); ++j) {
                    ga[j] += gp[j] / pb[j];
                    gb[j] -= gp[j] * pa[j] / (pb[j] * pb[j]);
                }
                return;
            }
            case Op::Abs: {
                ensure(grads[n.a], out(n.a));
                const T* x = out(n.a).data();
                const T* gp = g.data();
                T* ga = grads[n.a].data();
                for (std::size_t j = 0; j < g.size(); ++j) {
                    if (x[j] > T(0))
                        ga[j] += gp[j];
                    else if (x[j] < T(0))
                        ga[j] -= gp[j];
                }
                return;
            }
            case Op::Square: {
                ensure(grads[n.a], out(n.a));
                const T* x = out(n.a).data();
                const T* gp = g.data();
                T* ga = grads[n.a].data();
                for (std::size_t j = 0; j < g.size(); ++j) ga[j] += T(2) * x[j] * gp[j];
                return;
            }
            case Op::Log: {
                ensure(grads[n.a], out(n.a));
                const T* x = out(n.a).data();
                const T* gp = g.data();
                T* ga = grads[n.a].data();
                for (std::size_t j = 0; j < g.size(); ++j) ga[j] += gp[j] / x[j];
                return;
            }
            case Op::Exp: {
                ensure(grads[n.a], out(n.a));
                const T* y = n.out.data();
                const T* gp = g.data();
                T* ga = grads[n.a].data();
                for (std::size_t j = 0; j < g.size(); ++j) ga[j] += gp[j] * y[j];
                return;
            }
            case Op::Clamp: {
                ensure(grads[n.a], out(n.a));
                const T* x = out(n.a).data();
                const T* gp = g.data();
                T* ga = grads[n.a].data();
                for (std::size_t j = 0; j < g.size(); ++j)
                    if (x[j] > n.c0 && x[j] <= n.c1) ga[j] += gp[j];
                return;
            }
            case Op::Affine: {
                accum_scaled(grads, n.a, g, n.c0);
                return;
            }
            case Op::WindowMean: {
                ensure(grads[n.a], out(n.a));
                window_mean_backward(g, n.window, grads[n.a]);
                return;
            }
            case Op::GlobalMean: {
                ensure(grads[n.a], out(n.a));
                const T q = g.data()[0] / static_cast<T>(out(n.a).size());
                T* ga = grads[n.a].data();
                for (std::size_t j = 0; j < grads[n.a].size(); ++j) ga[j] += q;
                return;
            }
        }
    }

    void accum_scaled(std::vector<TensorT<T>>& grads, int idx, const TensorT<T>& g, T s) const {
        ensure(grads[idx], out(idx));
        const T* gp = g.data();
        T* ga = grads[idx].data();
        for (std::size_t j = 0; j < g.size(); ++j) ga[j] += s * gp[j];
    }

    // Adjoint of the separable window mean: scatter vertically into a
    // (h, ow, c) buffer, then horizontally into the input gradient.
    static void window_mean_backward(const TensorT<T>& g, const WindowT<T>& win,
                                     TensorT<T>& ginput) {
        const int oh = g.height(), ow = g.width(), c = g.channels();
        const int n = win.size;
        const int h = ginput.height();
        TensorT<T> tmp(h, ow, c);
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x)
                for (int ch = 0; ch < c; ++ch) {
                    const T gv = g.at(y, x, ch);
                    for (int k = 0; k < n; ++k) tmp.at(y + k, x, ch) += gv * win.w1[k];
                }
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < ow; ++x)
                for (int ch = 0; ch < c; ++ch) {
                    const T tv = tmp.at(y, x, ch);
                    if (tv == T(0)) continue;
                    for (int k = 0; k < n; ++k) ginput.at(y, x + k, ch) += tv * win.w1[k];
                }
    }

    // Fused backward for same-padding cross-correlation: accumulates the
    // input gradient, and the kernel gradient in repacked layout which is
    // then folded back into the [out][in][row][col] accumulator.
    static void conv2d_backward(const TensorT<T>& gout, const TensorT<T>& input,
                                const ConvKernelT<T>& k, TensorT<T>& ginput,
                                KernelGradT<T>& gk) {
        const int h = input.height(), w = input.width();
        const int ic = k.in_channels, oc = k.out_channels;
        const int ph = (k.kh - 1) / 2, pw = (k.kw - 1) / 2;
        const std::vector<T> rep = detail::repack_weights(k);
        std::vector<T> grep(rep.size(), T(0));

        const T* gp = gout.data();
        const T* in = input.data();
        T* gin = ginput.data();

        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const T* go = gp + (static_cast<std::size_t>(y) * w + x) * oc;
                for (int o = 0; o < oc; ++o) gk.bias[o] += go[o];
                const int ky0 = std::max(0, ph - y), ky1 = std::min(k.kh, h + ph - y);
                const int kx0 = std::max(0, pw - x), kx1 = std::min(k.kw, w + pw - x);
                for (int ky = ky0; ky < ky1; ++ky) {
                    const int yy = y + ky - ph;
                    for (int kx = kx0; kx < kx1; ++kx) {
                        const int xx = x + kx - pw;
                        const std::size_t base = (static_cast<std::size_t>(yy) * w + xx) * ic;
                        const std::size_t wbase =
                            (static_cast<std::size_t>(ky) * k.kw + kx) * ic * oc;
                        for (int i = 0; i < ic; ++i) {
                            const T v = in[base + i];
                            const T* wo = rep.data() + wbase + static_cast<std::size_t>(i) * oc;
                            T* gwo = grep.data() + wbase + static_cast<std::size_t>(i) * oc;
                            T s = T(0);
                            for (int o = 0; o < oc; ++o) {
                                s += go[o] * wo[o];
                                gwo[o] += go[o] * v;
                            }
                            gin[base + i] += s;
                        }
                    }
                }
            }
        }

        for (int r = 0; r < k.kh; ++r)
            for (int c = 0; c < k.kw; ++c)
                for (int i = 0; i < ic; ++i)
                    for (int o = 0; o < oc; ++o)
                        gk.weights[k.windex(o, i, r, c)] +=
                            grep[((static_cast<std::size_t>(r) * k.kw + c) * ic + i) * oc + o];
    }

    std::vector<Node> nodes_;
    std::vector<ConvKernelT<T>> kernels_;
};

using Graph = GraphT<float>;
using Gradients = GradientsT<float>;
using KernelGrad = KernelGradT<float>;

} // namespace deblur
