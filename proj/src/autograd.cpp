#include "spikefet/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace spikefet {

namespace {

NodePtr make_node(Tensor value, std::vector<NodePtr> inputs, std::function<void(Node&)> bw,
                  std::string name = "") {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->inputs = std::move(inputs);
    for (const auto& in : n->inputs)
        if (in && in->requires_grad) n->requires_grad = true;
    if (n->requires_grad) n->backward_fn = std::move(bw);
    n->name = std::move(name);
    return n;
}

void check(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Tensor& Node::ensure_grad() {
    if (grad.numel() != value.numel()) grad = Tensor::zeros(value.shape());
    return grad;
}

Var Var::leaf(Tensor v, bool requires_grad, std::string name) {
    auto n = std::make_shared<Node>();
    n->value = std::move(v);
    n->requires_grad = requires_grad;
    n->name = std::move(name);
    return Var(n);
}

void ConvSpec::validate() const {
    check(in_channels > 0 && out_channels > 0, "conv channels must be positive");
    check(kernel >= 1 && stride >= 1 && padding >= 0, "bad conv kernel/stride/padding");
    if (kind == Kind::depthwise)
        check(in_channels == out_channels, "depthwise conv requires in_channels == out_channels");
    if (kind == Kind::pointwise) check(kernel == 1, "pointwise conv requires kernel 1");
}

int ConvSpec::out_extent(int in) const {
    return (in + 2 * padding - kernel) / stride + 1;
}

std::vector<int> ConvSpec::weight_shape() const {
    if (kind == Kind::depthwise) return {out_channels, 1, kernel, kernel};
    return {out_channels, in_channels, kernel, kernel};
}

void backward(const Var& out) {
    check(out.defined(), "backward on undefined Var");
    check(out.value().numel() == 1, "backward expects a scalar output");

    // Iterative DFS topo order over the subgraph that requires grad.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack;
    Node* root = out.node().get();
    if (!root->requires_grad) return;
    stack.push_back({root, 0});
    visited.insert(root);
    while (!stack.empty()) {
        auto& [n, i] = stack.back();
        bool descended = false;
        while (i < n->inputs.size()) {
            Node* in = n->inputs[i++].get();
            if (in && in->requires_grad && !visited.count(in)) {
                visited.insert(in);
                stack.push_back({in, 0});
                descended = true;
                break;
            }
        }
        if (!descended && (stack.empty() ? false : stack.back().first == n) && i >= n->inputs.size()) {
            order.push_back(n);
            stack.pop_back();
        }
    }

    for (Node* n : order) {
        n->ensure_grad();
        n->grad.fill(0.0);
    }
    root->grad.fill(1.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn) n->backward_fn(*n);
    }
}

// ---------------- elementwise / shape ----------------

Var add(const Var& a, const Var& b) {
    check(a.value().same_shape(b.value()), "add shape mismatch " + a.value().shape_str() + " vs " +
                                               b.value().shape_str());
    Tensor out = a.value();
    out.add_inplace(b.value());
    return Var(make_node(std::move(out), {a.node(), b.node()}, [](Node& n) {
        for (int k = 0; k < 2; ++k)
            if (n.inputs[k]->requires_grad) n.inputs[k]->ensure_grad().add_inplace(n.grad);
    }));
}

Var sub(const Var& a, const Var& b) {
    check(a.value().same_shape(b.value()), "sub shape mismatch");
    Tensor out = a.value();
    out.axpy_inplace(-1.0, b.value());
    return Var(make_node(std::move(out), {a.node(), b.node()}, [](Node& n) {
        if (n.inputs[0]->requires_grad) n.inputs[0]->ensure_grad().add_inplace(n.grad);
        if (n.inputs[1]->requires_grad) n.inputs[1]->ensure_grad().axpy_inplace(-1.0, n.grad);
    }));
}

Var scale(const Var& a, double s) {
    Tensor out = a.value();
    for (int i = 0; i < out.numel(); ++i) out[i] *= s;
    return Var(make_node(std::move(out), {a.node()}, [s](Node& n) {
        n.inputs[0]->ensure_grad().axpy_inplace(s, n.grad);
    }));
}

Var add_const(const Var& a, const Tensor& c) {
    check(a.value().same_shape(c), "add_const shape mismatch");
    Tensor out = a.value();
    out.add_inplace(c);
    return Var(make_node(std::move(out), {a.node()}, [](Node& n) {
        n.inputs[0]->ensure_grad().add_inplace(n.grad);
    }));
}

Var affine_elem(const Var& x, const Tensor& s, const Tensor& t) {
    check(x.value().same_shape(s) && x.value().same_shape(t), "affine_elem shape mismatch");
    Tensor out = x.value();
    for (int i = 0; i < out.numel(); ++i) out[i] = s[i] * out[i] + t[i];
    Tensor sc = s;
    return Var(make_node(std::move(out), {x.node()}, [sc](Node& n) {
        Tensor& g = n.inputs[0]->ensure_grad();
        for (int i = 0; i < g.numel(); ++i) g[i] += sc[i] * n.grad[i];
    }));
}

Var sum(const Var& a) {
    Tensor out = Tensor::scalar(a.value().sum());
    return Var(make_node(std::move(out), {a.node()}, [](Node& n) {
        Tensor& g = n.inputs[0]->ensure_grad();
        double s = n.grad[0];
        for (int i = 0; i < g.numel(); ++i) g[i] += s;
    }));
}

Var mean(const Var& a) { return scale(sum(a), 1.0 / a.value().numel()); }

Var logistic(const Var& a) {
    Tensor out = a.value();
    for (int i = 0; i < out.numel(); ++i) out[i] = sigmoid(out[i]);
    Tensor y = out;
    return Var(make_node(std::move(out), {a.node()}, [y](Node& n) {
        Tensor& g = n.inputs[0]->ensure_grad();
        for (int i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * y[i] * (1.0 - y[i]);
    }));
}

Var spike(const Var& a, const SpikeNeuronConfig& cfg, SpikeMode mode) {
    const double d = static_cast<double>(cfg.d_max);
    Tensor out = a.value();
    if (mode == SpikeMode::hard) {
        for (int i = 0; i < out.numel(); ++i)
            out[i] = std::min(std::max(std::round(out[i]), 0.0), d);
    } else {
        for (int i = 0; i < out.numel(); ++i) out[i] = std::min(std::max(out[i], 0.0), d);
    }
    Tensor pre = a.value();
    return Var(make_node(std::move(out), {a.node()}, [pre, d](Node& n) {
        Tensor& g = n.inputs[0]->ensure_grad();
        for (int i = 0; i < g.numel(); ++i)
            if (pre[i] > 0.0 && pre[i] < d) g[i] += n.grad[i];
    }));
}

Var reshape(const Var& a, std::vector<int> shape) {
    check(shape_numel(shape) == a.value().numel(), "reshape numel mismatch");
    Tensor out(std::move(shape), a.value().vec());
    return Var(make_node(std::move(out), {a.node()}, [](Node& n) {
        Tensor& g = n.inputs[0]->ensure_grad();
        for (int i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
    }));
}

Var crop_hw(const Var& x, int y0, int x0, int h, int w) {
    const Tensor& v = x.value();
    check(v.ndim() == 4, "crop_hw expects [T,C,H,W]");
    int T = v.dim(0), C = v.dim(1), H = v.dim(2), W = v.dim(3);
    check(y0 >= 0 && x0 >= 0 && y0 + h <= H && x0 + w <= W, "crop_hw out of bounds");
    Tensor out({T, C, h, w});
    for (int t = 0; t < T; ++t)
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < h; ++y)
                for (int xx = 0; xx < w; ++xx) out.at4(t, c, y, xx) = v.at4(t, c, y0 + y, x0 + xx);
    return Var(make_node(std::move(out), {x.node()}, [y0, x0, h, w](Node& n) {
        Tensor& g = n.inputs[0]->ensure_grad();
        int T = g.dim(0), C = g.dim(1);
        for (int t = 0; t < T; ++t)
            for (int c = 0; c < C; ++c)
                for (int y = 0; y < h; ++y)
                    for (int xx = 0; xx < w; ++xx)
                        g.at4(t, c, y0 + y, x0 + xx) += n.grad.at4(t, c, y, xx);
    }));
}

Var image_to_tokens(const Var& x) {
    const Tensor& v = x.value();
    check(v.ndim() == 4 && v.dim(0) == 1, "image_to_tokens expects [1,C,H,W]");
    int C = v.dim(1), H = v.dim(2), W = v.dim(3);
    Tensor out({H * W, C});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            for (int xx = 0; xx < W; ++xx) out.at2(y * W + xx, c) = v.at4(0, c, y, xx);
    return Var(make_node(std::move(out), {x.node()}, [C, H, W](Node& n) {
        Tensor& g = n.inputs[0]->ensure_grad();
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < H; ++y)
                for (int xx = 0; xx < W; ++xx) g.at4(0, c, y, xx) += n.grad.at2(y * W + xx, c);
    }));
}

Var tokens_to_image(const Var& x, int h, int w) {
    const Tensor& v = x.value();
    check(v.ndim() == 2 && v.dim(0) == h * w, "tokens_to_image row count mismatch");
    int C = v.dim(1);
    Tensor out({1, C, h, w});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) out.at4(0, c, y, xx) = v.at2(y * w + xx, c);
    return Var(make_node(std::move(out), {x.node()}, [C, h, w](Node& n) {
        Tensor& g = n.inputs[0]->ensure_grad();
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < h; ++y)
                for (int xx = 0; xx < w; ++xx) g.at2(y * w + xx, c) += n.grad.at4(0, c, y, xx);
    }));
}

Var concat_tokens(const std::vector<Var>& parts) {
    check(!parts.empty(), "concat_tokens of nothing");
    int C = parts[0].value().dim(1);
    int rows = 0;
    std::vector<NodePtr> ins;
    for (const auto& p : parts) {
        check(p.value().ndim() == 2 && p.value().dim(1) == C, "concat_tokens width mismatch");
        rows += p.value().dim(0);
        ins.push_back(p.node());
    }
    Tensor out({rows, C});
    int r = 0;
    for (const auto& p : parts) {
        const Tensor& v = p.value();
        std::copy(v.data(), v.data() + v.numel(), out.data() + static_cast<size_t>(r) * C);
        r += v.dim(0);
    }
    return Var(make_node(std::move(out), std::move(ins), [C](Node& n) {
        int r = 0;
        for (auto& in : n.inputs) {
            int nr = in->value.dim(0);
            if (in->requires_grad) {
                Tensor& g = in->ensure_grad();
                const double* src = n.grad.data() + static_cast<size_t>(r) * C;
                for (int i = 0; i < nr * C; ++i) g[i] += src[i];
            }
            r += nr;
        }
    }));
}

Var slice_tokens(const Var& x, int row0, int row1) {
    const Tensor& v = x.value();
    check(v.ndim() == 2 && row0 >= 0 && row1 <= v.dim(0) && row0 < row1, "slice_tokens bounds");
    int C = v.dim(1);
    Tensor out({row1 - row0, C});
    std::copy(v.data() + static_cast<size_t>(row0) * C, v.data() + static_cast<size_t>(row1) * C,
              out.data());
    return Var(make_node(std::move(out), {x.node()}, [row0, C](Node& n) {
        Tensor& g = n.inputs[0]->ensure_grad();
        double* dst = g.data() + static_cast<size_t>(row0) * C;
        for (int i = 0; i < n.grad.numel(); ++i) dst[i] += n.grad[i];
    }));
}

Var gather_rows(const Var& table, const std::vector<int>& ids) {
    const Tensor& v = table.value();
    check(v.ndim() == 2, "gather_rows expects [K,C]");
    int C = v.dim(1);
    Tensor out({static_cast<int>(ids.size()), C});
    for (size_t n = 0; n < ids.size(); ++n) {
        check(ids[n] >= 0 && ids[n] < v.dim(0), "gather_rows id out of range");
        std::copy(v.data() + static_cast<size_t>(ids[n]) * C,
                  v.data() + static_cast<size_t>(ids[n] + 1) * C, out.data() + n * C);
    }
    std::vector<int> idcopy = ids;
    return Var(make_node(std::move(out), {table.node()}, [idcopy, C](Node& n) {
        Tensor& g = n.inputs[0]->ensure_grad();
        for (size_t r = 0; r < idcopy.size(); ++r) {
            double* dst = g.data() + static_cast<size_t>(idcopy[r]) * C;
            const double* src = n.grad.data() + r * C;
            for (int c = 0; c < C; ++c) dst[c] += src[c];
        }
    }));
}

Var add_row_broadcast(const Var& x, const Var& v) {
    const Tensor& xv = x.value();
    check(xv.ndim() == 2 && v.value().ndim() == 1 && v.value().dim(0) == xv.dim(1),
          "add_row_broadcast width mismatch");
    int N = xv.dim(0), C = xv.dim(1);
    Tensor out = xv;
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) out.at2(n, c) += v.value()[c];
    return Var(make_node(std::move(out), {x.node(), v.node()}, [N, C](Node& n) {
        if (n.inputs[0]->requires_grad) n.inputs[0]->ensure_grad().add_inplace(n.grad);
        if (n.inputs[1]->requires_grad) {
            Tensor& gv = n.inputs[1]->ensure_grad();
            for (int r = 0; r < N; ++r)
                for (int c = 0; c < C; ++c) gv[c] += n.grad.at2(r, c);
        }
    }));
}

Var gather_cell(const Var& x, int y, int xcol) {
    const Tensor& v = x.value();
    check(v.ndim() == 4 && v.dim(0) == 1, "gather_cell expects [1,C,H,W]");
    check(y >= 0 && y < v.dim(2) && xcol >= 0 && xcol < v.dim(3), "gather_cell out of range");
    int C = v.dim(1);
    Tensor out({C});
    for (int c = 0; c < C; ++c) out[c] = v.at4(0, c, y, xcol);
    return Var(make_node(std::move(out), {x.node()}, [y, xcol, C](Node& n) {
        Tensor& g = n.inputs[0]->ensure_grad();
        for (int c = 0; c < C; ++c) g.at4(0, c, y, xcol) += n.grad[c];
    }));
}

Var concat_vec(const std::vector<Var>& parts) {
    int total = 0;
    std::vector<NodePtr> ins;
    for (const auto& p : parts) {
        check(p.value().ndim() == 1, "concat_vec expects 1-D parts");
        total += p.value().numel();
        ins.push_back(p.node());
    }
    Tensor out({total});
    int at = 0;
    for (const auto& p : parts) {
        std::copy(p.value().data(), p.value().data() + p.value().numel(), out.data() + at);
        at += p.value().numel();
    }
    return Var(make_node(std::move(out), std::move(ins), [](Node& n) {
        int at = 0;
        for (auto& in : n.inputs) {
            int m = in->value.numel();
            if (in->requires_grad) {
                Tensor& g = in->ensure_grad();
                for (int i = 0; i < m; ++i) g[i] += n.grad[at + i];
            }
            at += m;
        }
    }));
}

// ---------------- conv / linear / batch norm ----------------

Var conv2d(const Var& x, const Var& w, const Var& b, const ConvSpec& spec) {
    spec.validate();
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    check(xv.ndim() == 4, "conv2d input must be [T,C,H,W], got " + xv.shape_str());
    check(xv.dim(1) == spec.in_channels,
          "conv2d channel axis mismatch: input has " + std::to_string(xv.dim(1)) +
              " channels, spec expects " + std::to_string(spec.in_channels));
    check(wv.shape() == spec.weight_shape(), "conv2d weight shape mismatch: " + wv.shape_str());
    check(!b.defined() || b.value().numel() == spec.out_channels, "conv2d bias size mismatch");

    const int T = xv.dim(0), Ci = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
    const int Co = spec.out_channels, K = spec.kernel, S = spec.stride, P = spec.padding;
    const int Ho = spec.out_extent(H), Wo = spec.out_extent(W);
    check(Ho > 0 && Wo > 0, "conv2d output extent is empty for input " + xv.shape_str());
    const bool dw = spec.kind == ConvSpec::Kind::depthwise;

    Tensor out({T, Co, Ho, Wo});
    for (int t = 0; t < T; ++t) {
        for (int co = 0; co < Co; ++co) {
            const int ci_lo = dw ? co : 0;
            const int ci_hi = dw ? co + 1 : Ci;
            for (int ci = ci_lo; ci < ci_hi; ++ci) {
                const int wci = dw ? 0 : ci;
                for (int ky = 0; ky < K; ++ky) {
                    for (int kx = 0; kx < K; ++kx) {
                        const double wt = wv.at4(co, wci, ky, kx);
                        if (wt == 0.0) continue;
                        for (int oy = 0; oy < Ho; ++oy) {
                            const int iy = oy * S - P + ky;
                            if (iy < 0 || iy >= H) continue;
                            for (int ox = 0; ox < Wo; ++ox) {
                                const int ix = ox * S - P + kx;
                                if (ix < 0 || ix >= W) continue;
                                out.at4(t, co, oy, ox) += wt * xv.at4(t, ci, iy, ix);
                            }
                        }
                    }
                }
            }
            if (b.defined()) {
                const double bv = b.value()[co];
                for (int oy = 0; oy < Ho; ++oy)
                    for (int ox = 0; ox < Wo; ++ox) out.at4(t, co, oy, ox) += bv;
            }
        }
    }

    ConvSpec sp = spec;
    std::vector<NodePtr> ins = {x.node(), w.node()};
    if (b.defined()) ins.push_back(b.node());
    return Var(make_node(std::move(out), std::move(ins), [sp](Node& n) {
        Node& xin = *n.inputs[0];
        Node& win = *n.inputs[1];
        const Tensor& xv = xin.value;
        const Tensor& wv = win.value;
        const int T = xv.dim(0), Ci = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
        const int Co = sp.out_channels, K = sp.kernel, S = sp.stride, P = sp.padding;
        const int Ho = n.value.dim(2), Wo = n.value.dim(3);
        const bool dw = sp.kind == ConvSpec::Kind::depthwise;

        Tensor* gx = xin.requires_grad ? &xin.ensure_grad() : nullptr;
        Tensor* gw = win.requires_grad ? &win.ensure_grad() : nullptr;
        Tensor* gb = (n.inputs.size() > 2 && n.inputs[2]->requires_grad)
                         ? &n.inputs[2]->ensure_grad()
                         : nullptr;

        for (int t = 0; t < T; ++t) {
            for (int co = 0; co < Co; ++co) {
                const int ci_lo = dw ? co : 0;
                const int ci_hi = dw ? co + 1 : Ci;
                if (gb) {
                    double s = 0.0;
                    for (int oy = 0; oy < Ho; ++oy)
                        for (int ox = 0; ox < Wo; ++ox) s += n.grad.at4(t, co, oy, ox);
                    (*gb)[co] += s;
                }
                for (int ci = ci_lo; ci < ci_hi; ++ci) {
                    const int wci = dw ? 0 : ci;
                    for (int ky = 0; ky < K; ++ky) {
                        for (int kx = 0; kx < K; ++kx) {
                            const double wt = wv.at4(co, wci, ky, kx);
                            double acc = 0.0;
                            for (int oy = 0; oy < Ho; ++oy) {
                                const int iy = oy * S - P + ky;
                                if (iy < 0 || iy >= H) continue;
                                for (int ox = 0; ox < Wo; ++ox) {
                                    const int ix = ox * S - P + kx;
                                    if (ix < 0 || ix >= W) continue;
                                    const double go = n.grad.at4(t, co, oy, ox);
                                    if (gx) gx->at4(t, ci, iy, ix) += wt * go;
                                    acc += go * xv.at4(t, ci, iy, ix);
                                }
                            }
                            if (gw) gw->at4(co, wci, ky, kx) += acc;
                        }
                    }
                }
            }
        }
    }));
}

Var linear(const Var& x, const Var& w, const Var& b) {
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    check(xv.ndim() == 2 && wv.ndim() == 2, "linear expects [N,Ci] x [Ci,Co]");
    check(xv.dim(1) == wv.dim(0), "linear width mismatch: x " + xv.shape_str() + " w " +
                                      wv.shape_str() + " (contraction axis)");
    const int N = xv.dim(0), Ci = xv.dim(1), Co = wv.dim(1);
    check(!b.defined() || b.value().numel() == Co, "linear bias size mismatch");

    Tensor out({N, Co});
    for (int n = 0; n < N; ++n) {
        const double* xr = xv.data() + static_cast<size_t>(n) * Ci;
        double* orow = out.data() + static_cast<size_t>(n) * Co;
        if (b.defined())
            for (int c = 0; c < Co; ++c) orow[c] = b.value()[c];
        for (int i = 0; i < Ci; ++i) {
            const double xi = xr[i];
            if (xi == 0.0) continue;
            const double* wrow = wv.data() + static_cast<size_t>(i) * Co;
            for (int c = 0; c < Co; ++c) orow[c] += xi * wrow[c];
        }
    }

    std::vector<NodePtr> ins = {x.node(), w.node()};
    if (b.defined()) ins.push_back(b.node());
    return Var(make_node(std::move(out), std::move(ins), [](Node& n) {
        Node& xin = *n.inputs[0];
        Node& win = *n.inputs[1];
        const Tensor& xv = xin.value;
        const Tensor& wv = win.value;
        const int N = xv.dim(0), Ci = xv.dim(1), Co = wv.dim(1);
        Tensor* gx = xin.requires_grad ? &xin.ensure_grad() : nullptr;
        Tensor* gw = win.requires_grad ? &win.ensure_grad() : nullptr;
        Tensor* gb = (n.inputs.size() > 2 && n.inputs[2]->requires_grad)
                         ? &n.inputs[2]->ensure_grad()
                         : nullptr;
        for (int r = 0; r < N; ++r) {
            const double* go = n.grad.data() + static_cast<size_t>(r) * Co;
            const double* xr = xv.data() + static_cast<size_t>(r) * Ci;
            if (gb)
                for (int c = 0; c < Co; ++c) (*gb)[c] += go[c];
            for (int i = 0; i < Ci; ++i) {
                const double* wrow = wv.data() + static_cast<size_t>(i) * Co;
                double acc = 0.0;
                for (int c = 0; c < Co; ++c) acc += go[c] * wrow[c];
                if (gx) gx->data()[static_cast<size_t>(r) * Ci + i] += acc;
                if (gw) {
                    double* gwrow = gw->data() + static_cast<size_t>(i) * Co;
                    const double xi = xr[i];
                    for (int c = 0; c < Co; ++c) gwrow[c] += xi * go[c];
                }
            }
        }
    }));
}

namespace {

// Collect per-channel element indices for BN: 4-D stats over (T,H,W), 2-D over rows.
struct BNLayout {
    int channels;
    int per_channel;
    // index of element (c, j)
    static int index4(const Tensor& v, int c, int j) {
        int T = v.dim(0), H = v.dim(2), W = v.dim(3);
        int hw = H * W;
        int t = j / hw, r = j % hw;
        (void)T;
        return ((t * v.dim(1) + c) * H + r / W) * W + r % W;
    }
};

}  // namespace

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, BNState& state, bool training,
               double momentum, double eps) {
    const Tensor& xv = x.value();
    check(xv.ndim() == 4 || xv.ndim() == 2, "batch_norm expects [T,C,H,W] or [N,C]");
    const bool is4 = xv.ndim() == 4;
    const int C = is4 ? xv.dim(1) : xv.dim(1);
    const int M = is4 ? xv.dim(0) * xv.dim(2) * xv.dim(3) : xv.dim(0);
    check(gamma.value().numel() == C && beta.value().numel() == C, "batch_norm affine size");

    if (!state.initialized) {
        state.running_mean = Tensor::zeros({C});
        state.running_var = Tensor::full({C}, 1.0);
        state.initialized = true;
    }

    Tensor mu({C}), var({C});
    if (training) {
        for (int c = 0; c < C; ++c) {
            double s = 0.0;
            for (int j = 0; j < M; ++j)
                s += is4 ? xv[BNLayout::index4(xv, c, j)] : xv.at2(j, c);
            mu[c] = s / M;
            double v2 = 0.0;
            for (int j = 0; j < M; ++j) {
                double d = (is4 ? xv[BNLayout::index4(xv, c, j)] : xv.at2(j, c)) - mu[c];
                v2 += d * d;
            }
            var[c] = v2 / M;
            state.running_mean[c] = (1.0 - momentum) * state.running_mean[c] + momentum * mu[c];
            state.running_var[c] = (1.0 - momentum) * state.running_var[c] + momentum * var[c];
        }
    } else {
        mu = state.running_mean;
        var = state.running_var;
    }

    Tensor inv_sigma({C});
    for (int c = 0; c < C; ++c) inv_sigma[c] = 1.0 / std::sqrt(var[c] + eps);

    Tensor out(xv.shape());
    Tensor xhat(xv.shape());
    for (int c = 0; c < C; ++c) {
        const double g = gamma.value()[c], bshift = beta.value()[c];
        for (int j = 0; j < M; ++j) {
            int idx = is4 ? BNLayout::index4(xv, c, j) : j * C + c;
            double xh = (xv[idx] - mu[c]) * inv_sigma[c];
            xhat[idx] = xh;
            out[idx] = g * xh + bshift;
        }
    }

    bool train_stats = training;
    return Var(make_node(
        std::move(out), {x.node(), gamma.node(), beta.node()},
        [xhat, inv_sigma, train_stats, C, M, is4](Node& n) {
            Node& xin = *n.inputs[0];
            const Tensor& gammav = n.inputs[1]->value;
            Tensor* gx = xin.requires_grad ? &xin.ensure_grad() : nullptr;
            Tensor* gg = n.inputs[1]->requires_grad ? &n.inputs[1]->ensure_grad() : nullptr;
            Tensor* gb = n.inputs[2]->requires_grad ? &n.inputs[2]->ensure_grad() : nullptr;
            for (int c = 0; c < C; ++c) {
                double sum_g = 0.0, sum_gx = 0.0;
                for (int j = 0; j < M; ++j) {
                    int idx = is4 ? BNLayout::index4(n.value, c, j) : j * C + c;
                    sum_g += n.grad[idx];
                    sum_gx += n.grad[idx] * xhat[idx];
                }
                if (gb) (*gb)[c] += sum_g;
                if (gg) (*gg)[c] += sum_gx;
                if (gx) {
                    const double g = gammav[c];
                    if (train_stats) {
                        for (int j = 0; j < M; ++j) {
                            int idx = is4 ? BNLayout::index4(n.value, c, j) : j * C + c;
                            double dxhat = n.grad[idx] * g;
                            (*gx)[idx] += inv_sigma[c] *
                                          (dxhat - (g / M) * sum_g - xhat[idx] * (g / M) * sum_gx);
                        }
                    } else {
                        for (int j = 0; j < M; ++j) {
                            int idx = is4 ? BNLayout::index4(n.value, c, j) : j * C + c;
                            (*gx)[idx] += n.grad[idx] * g * inv_sigma[c];
                        }
                    }
                }
            }
        }));
}

// ---------------- stripe spiking self-attention ----------------

Var stripe_ssa(const Var& q, const Var& k, const Var& v, const StripePlan& plan, double scale,
               const SpikeNeuronConfig& cfg, SpikeMode mode) {
    const Tensor& qv = q.value();
    const Tensor& kv = k.value();
    const Tensor& vv = v.value();
    check(qv.ndim() == 2 && kv.same_shape(qv) && vv.ndim() == 2 && vv.dim(0) == qv.dim(0),
          "stripe_ssa operand shapes");
    const int N = qv.dim(0), C = qv.dim(1), Cv = vv.dim(1);
    check(plan.heads >= 2 && plan.heads % 2 == 0, "stripe_ssa heads must be even");
    check(C % plan.heads == 0 && Cv % plan.heads == 0, "stripe_ssa channels not divisible by heads");
    const int dq = C / plan.heads, dv = Cv / plan.heads;
    const double D = static_cast<double>(cfg.d_max);

    // pre[n, cv]: scale * (Q K^T) V before the output spike
    Tensor pre({N, Cv});
    auto run_group = [&](const std::vector<std::vector<int>>& stripes, int head_lo, int head_hi) {
        for (const auto& idx : stripes) {
            const int n = static_cast<int>(idx.size());
            std::vector<double> att(static_cast<size_t>(n) * n);
            for (int h = head_lo; h < head_hi; ++h) {
                const int qo = h * dq, vo = h * dv;
                // A = Q K^T on this stripe/head
                for (int a = 0; a < n; ++a) {
                    const double* qa = qv.data() + static_cast<size_t>(idx[a]) * C + qo;
                    for (int bj = 0; bj < n; ++bj) {
                        const double* kb = kv.data() + static_cast<size_t>(idx[bj]) * C + qo;
                        double s = 0.0;
                        for (int d = 0; d < dq; ++d) s += qa[d] * kb[d];
                        att[static_cast<size_t>(a) * n + bj] = s;
                    }
                }
                // pre = scale * A V
                for (int a = 0; a < n; ++a) {
                    double* prow = pre.data() + static_cast<size_t>(idx[a]) * Cv + vo;
                    for (int bj = 0; bj < n; ++bj) {
                        const double w = att[static_cast<size_t>(a) * n + bj];
                        if (w == 0.0) continue;
                        const double* vrow = vv.data() + static_cast<size_t>(idx[bj]) * Cv + vo;
                        for (int d = 0; d < dv; ++d) prow[d] += w * vrow[d];
                    }
                }
            }
        }
    };
    run_group(plan.horizontal, 0, plan.heads / 2);
    run_group(plan.vertical, plan.heads / 2, plan.heads);
    for (int i = 0; i < pre.numel(); ++i) pre[i] *= scale;

    Tensor out = pre;
    if (mode == SpikeMode::hard) {
        for (int i = 0; i < out.numel(); ++i)
            out[i] = std::min(std::max(std::round(out[i]), 0.0), D);
    } else {
        for (int i = 0; i < out.numel(); ++i) out[i] = std::min(std::max(out[i], 0.0), D);
    }

    StripePlan pl = plan;
    return Var(make_node(
        std::move(out), {q.node(), k.node(), v.node()},
        [pl, pre, scale, D, dq, dv, C, Cv](Node& n) {
            const Tensor& qv = n.inputs[0]->value;
            const Tensor& kv = n.inputs[1]->value;
            const Tensor& vv = n.inputs[2]->value;
            Tensor* gq = n.inputs[0]->requires_grad ? &n.inputs[0]->ensure_grad() : nullptr;
            Tensor* gk = n.inputs[1]->requires_grad ? &n.inputs[1]->ensure_grad() : nullptr;
            Tensor* gv = n.inputs[2]->requires_grad ? &n.inputs[2]->ensure_grad() : nullptr;

            // dpre = surrogate(pre) * dout * scale applied later per product
            auto run_group = [&](const std::vector<std::vector<int>>& stripes, int head_lo,
                                 int head_hi) {
                for (const auto& idx : stripes) {
                    const int m = static_cast<int>(idx.size());
                    std::vector<double> att(static_cast<size_t>(m) * m);
                    std::vector<double> datt(static_cast<size_t>(m) * m);
                    for (int h = head_lo; h < head_hi; ++h) {
                        const int qo = h * dq, vo = h * dv;
                        // recompute A = Q K^T
                        for (int a = 0; a < m; ++a) {
                            const double* qa = qv.data() + static_cast<size_t>(idx[a]) * C + qo;
                            for (int bj = 0; bj < m; ++bj) {
                                const double* kb = kv.data() + static_cast<size_t>(idx[bj]) * C + qo;
                                double s = 0.0;
                                for (int d = 0; d < dq; ++d) s += qa[d] * kb[d];
                                att[static_cast<size_t>(a) * m + bj] = s;
                            }
                        }
                        std::fill(datt.begin(), datt.end(), 0.0);
                        // dB[a, d] = scale * dout * 1(0 < pre < D); dA = dB V^T; dV = A^T dB
                        for (int a = 0; a < m; ++a) {
                            const double* prow = pre.data() + static_cast<size_t>(idx[a]) * Cv + vo;
                            const double* gout = n.grad.data() + static_cast<size_t>(idx[a]) * Cv + vo;
                            for (int bj = 0; bj < m; ++bj) {
                                const double* vrow = vv.data() + static_cast<size_t>(idx[bj]) * Cv + vo;
                                double s = 0.0;
                                for (int d = 0; d < dv; ++d) {
                                    if (prow[d] > 0.0 && prow[d] < D) s += gout[d] * vrow[d];
                                }
                                datt[static_cast<size_t>(a) * m + bj] = s * scale;
                            }
                            if (gv) {
                                for (int bj = 0; bj < m; ++bj) {
                                    const double w = att[static_cast<size_t>(a) * m + bj] * scale;
                                    if (w == 0.0) continue;
                                    double* gvrow = gv->data() + static_cast<size_t>(idx[bj]) * Cv + vo;
                                    for (int d = 0; d < dv; ++d) {
                                        if (prow[d] > 0.0 && prow[d] < D)
                                            gvrow[d] += w * gout[d];
                                    }
                                }
                            }
                        }
                        if (gq || gk) {
                            for (int a = 0; a < m; ++a) {
                                const double* qa = qv.data() + static_cast<size_t>(idx[a]) * C + qo;
                                double* gqa = gq ? gq->data() + static_cast<size_t>(idx[a]) * C + qo
                                                 : nullptr;
                                for (int bj = 0; bj < m; ++bj) {
                                    const double da = datt[static_cast<size_t>(a) * m + bj];
                                    if (da == 0.0) continue;
                                    const double* kb =
                                        kv.data() + static_cast<size_t>(idx[bj]) * C + qo;
                                    if (gqa)
                                        for (int d = 0; d < dq; ++d) gqa[d] += da * kb[d];
                                    if (gk) {
                                        double* gkb =
                                            gk->data() + static_cast<size_t>(idx[bj]) * C + qo;
                                        for (int d = 0; d < dq; ++d) gkb[d] += da * qa[d];
                                    }
                                }
                            }
                        }
                    }
                }
            };
            run_group(pl.horizontal, 0, pl.heads / 2);
            run_group(pl.vertical, pl.heads / 2, pl.heads);
        }));
}

// ---------------- losses ----------------

Var gwf_focal(const Var& pred, const Tensor& heat, double fa, double fb) {
    const Tensor& pv = pred.value();
    check(pv.numel() == heat.numel(), "gwf_focal pred/heat size mismatch");
    const double lo = 1e-6, hi = 1.0 - 1e-6;
    int npeak = 0;
    for (int i = 0; i < heat.numel(); ++i)
        if (heat[i] == 1.0) ++npeak;
    const double N = npeak > 0 ? npeak : 1;

    double loss = 0.0;
    for (int i = 0; i < pv.numel(); ++i) {
        double p = std::min(std::max(pv[i], lo), hi);
        double y = heat[i];
        if (y == 1.0)
            loss -= std::pow(1.0 - p, fa) * std::log(p);
        else
            loss -= std::pow(1.0 - y, fb) * std::pow(p, fa) * std::log(1.0 - p);
    }
    loss /= N;

    Tensor ht = heat;
    return Var(make_node(Tensor::scalar(loss), {pred.node()}, [ht, fa, fb, N, lo, hi](Node& n) {
        Tensor& g = n.inputs[0]->ensure_grad();
        const Tensor& pv = n.inputs[0]->value;
        const double go = n.grad[0];
        for (int i = 0; i < pv.numel(); ++i) {
            if (pv[i] <= lo || pv[i] >= hi) continue;  // clamped: zero slope
            double p = pv[i];
            double y = ht[i];
            double d;
            if (y == 1.0)
                d = -(-fa * std::pow(1.0 - p, fa - 1.0) * std::log(p) + std::pow(1.0 - p, fa) / p);
            else
                d = -std::pow(1.0 - y, fb) *
                    (fa * std::pow(p, fa - 1.0) * std::log(1.0 - p) - std::pow(p, fa) / (1.0 - p));
            g[i] += go * d / N;
        }
    }));
}

Var str_loss(const Var& f1, const Var& f2) {
    check(f1.value().same_shape(f2.value()), "str_loss shape mismatch");
    const int M = f1.value().numel();
    double loss = 0.0;
    for (int i = 0; i < M; ++i) {
        double d = f1.value()[i] - f2.value()[i];
        loss += d * d;
    }
    loss /= M;
    return Var(make_node(Tensor::scalar(loss), {f1.node(), f2.node()}, [M](Node& n) {
        const Tensor& a = n.inputs[0]->value;
        const Tensor& b = n.inputs[1]->value;
        const double go = n.grad[0];
        for (int k = 0; k < 2; ++k) {
            if (!n.inputs[k]->requires_grad) continue;
            Tensor& g = n.inputs[k]->ensure_grad();
            const double sign = k == 0 ? 1.0 : -1.0;
            for (int i = 0; i < M; ++i) g[i] += go * sign * 2.0 * (a[i] - b[i]) / M;
        }
    }));
}

namespace {

// Focal-weighted symmetric KL between temperature-squashed maps. KL and its
// gradient vanish at p == y, so the weighted sum stays minimal exactly at
// matching responses for any smooth positive weight.
struct RespTerms {
    double loss;
    double dp;  // d loss / d p
    double dy;  // d loss / d y
};

RespTerms resp_cell(double p, double y, double fa, double fb) {
    auto kl = [](double a, double b) {
        return a * std::log(a / b) + (1.0 - a) * std::log((1.0 - a) / (1.0 - b));
    };
    const double d = kl(y, p) + kl(p, y);
    const double dd_dp = (-y / p + (1.0 - y) / (1.0 - p)) +
                         (std::log(p / y) - std::log((1.0 - p) / (1.0 - y)));
    const double dd_dy = (-p / y + (1.0 - p) / (1.0 - y)) +
                         (std::log(y / p) - std::log((1.0 - y) / (1.0 - p)));
    const double w = 0.5 * (std::pow(1.0 - y, fb) * std::pow(p, fa) +
                            std::pow(1.0 - p, fb) * std::pow(y, fa));
    const double dw_dp = 0.5 * (std::pow(1.0 - y, fb) * fa * std::pow(p, fa - 1.0) -
                                fb * std::pow(1.0 - p, fb - 1.0) * std::pow(y, fa));
    const double dw_dy = 0.5 * (std::pow(1.0 - p, fb) * fa * std::pow(y, fa - 1.0) -
                                fb * std::pow(1.0 - y, fb - 1.0) * std::pow(p, fa));
    return {w * d, dw_dp * d + w * dd_dp, dw_dy * d + w * dd_dy};
}

}  // namespace

Var response_loss(const Var& rf, const Var& re, double tau, double fa, double fb) {
    check(rf.value().same_shape(re.value()), "response_loss shape mismatch");
    check(tau > 0.0, "response_loss tau must be positive");
    const int M = rf.value().numel();
    const double lo = 1e-9, hi = 1.0 - 1e-9;

    double loss = 0.0;
    for (int i = 0; i < M; ++i) {
        double p = std::min(std::max(sigmoid(rf.value()[i] / tau), lo), hi);
        double y = std::min(std::max(sigmoid(re.value()[i] / tau), lo), hi);
        loss += resp_cell(p, y, fa, fb).loss;
    }
    loss /= M;

    return Var(make_node(Tensor::scalar(loss), {rf.node(), re.node()},
                         [tau, fa, fb, M, lo, hi](Node& n) {
                             const Tensor& a = n.inputs[0]->value;
                             const Tensor& b = n.inputs[1]->value;
                             const double go = n.grad[0];
                             Tensor* ga = n.inputs[0]->requires_grad ? &n.inputs[0]->ensure_grad()
                                                                     : nullptr;
                             Tensor* gb = n.inputs[1]->requires_grad ? &n.inputs[1]->ensure_grad()
                                                                     : nullptr;
                             for (int i = 0; i < M; ++i) {
                                 double p = std::min(std::max(sigmoid(a[i] / tau), lo), hi);
                                 double y = std::min(std::max(sigmoid(b[i] / tau), lo), hi);
                                 RespTerms t = resp_cell(p, y, fa, fb);
                                 if (ga) (*ga)[i] += go * t.dp * p * (1.0 - p) / tau / M;
                                 if (gb) (*gb)[i] += go * t.dy * y * (1.0 - y) / tau / M;
                             }
                         }));
}

namespace {

struct Corners {
    double x1, y1, x2, y2;
};

Corners to_corners(const double* b) {
    return {b[0] - b[2] / 2.0, b[1] - b[3] / 2.0, b[0] + b[2] / 2.0, b[1] + b[3] / 2.0};
}

}  // namespace

double iou_cxcywh(const double* a, const double* b) {
    Corners A = to_corners(a), B = to_corners(b);
    double iw = std::max(0.0, std::min(A.x2, B.x2) - std::max(A.x1, B.x1));
    double ih = std::max(0.0, std::min(A.y2, B.y2) - std::max(A.y1, B.y1));
    double inter = iw * ih;
    double uni = a[2] * a[3] + b[2] * b[3] - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

double giou_cxcywh(const double* a, const double* b) {
    Corners A = to_corners(a), B = to_corners(b);
    double iw = std::max(0.0, std::min(A.x2, B.x2) - std::max(A.x1, B.x1));
    double ih = std::max(0.0, std::min(A.y2, B.y2) - std::max(A.y1, B.y1));
    double inter = iw * ih;
    double uni = a[2] * a[3] + b[2] * b[3] - inter;
    double hw = std::max(A.x2, B.x2) - std::min(A.x1, B.x1);
    double hh = std::max(A.y2, B.y2) - std::min(A.y1, B.y1);
    double hull = hw * hh;
    double iou = uni > 0.0 ? inter / uni : 0.0;
    return hull > 0.0 ? iou - (hull - uni) / hull : iou;
}

Var giou_loss(const Var& pred_box, const Tensor& gt_box) {
    check(pred_box.value().numel() == 4 && gt_box.numel() == 4, "giou_loss expects 4-vectors");
    const double* a = pred_box.value().data();
    const double* b = gt_box.data();
    double loss = 1.0 - giou_cxcywh(a, b);
    Tensor gt = gt_box;
    return Var(make_node(Tensor::scalar(loss), {pred_box.node()}, [gt](Node& n) {
        const double* a = n.inputs[0]->value.data();
        const double* b = gt.data();
        Corners A = to_corners(a), B = to_corners(b);
        double ix1 = std::max(A.x1, B.x1), iy1 = std::max(A.y1, B.y1);
        double ix2 = std::min(A.x2, B.x2), iy2 = std::min(A.y2, B.y2);
        double iw = std::max(0.0, ix2 - ix1), ih = std::max(0.0, iy2 - iy1);
        double inter = iw * ih;
        double areaA = a[2] * a[3], areaB = b[2] * b[3];
        double uni = areaA + areaB - inter;
        double hw = std::max(A.x2, B.x2) - std::min(A.x1, B.x1);
        double hh = std::max(A.y2, B.y2) - std::min(A.y1, B.y1);
        double hull = hw * hh;
        if (uni <= 0.0 || hull <= 0.0) return;  // degenerate: flat loss

        // d(loss)/dI, d(loss)/dU, d(loss)/dH with GIoU = I/U - 1 + U/H
        double dI = -1.0 / uni;
        double dU = inter / (uni * uni) - 1.0 / hull;
        double dH = uni / (hull * hull);

        // corner gradients of the pred box
        double gx1 = 0, gy1 = 0, gx2 = 0, gy2 = 0;
        bool overlap = iw > 0.0 && ih > 0.0;
        // I depends on pred corners only where pred attains the min/max
        double dI_dx1 = (overlap && A.x1 >= B.x1) ? -ih : 0.0;
        double dI_dx2 = (overlap && A.x2 <= B.x2) ? ih : 0.0;
        double dI_dy1 = (overlap && A.y1 >= B.y1) ? -iw : 0.0;
        double dI_dy2 = (overlap && A.y2 <= B.y2) ? iw : 0.0;
        // U = areaA + areaB - I; areaA = (x2-x1)(y2-y1)
        double dA_dx1 = -(A.y2 - A.y1), dA_dx2 = (A.y2 - A.y1);
        double dA_dy1 = -(A.x2 - A.x1), dA_dy2 = (A.x2 - A.x1);
        // H corners
        double dH_dx1 = (A.x1 <= B.x1) ? -hh : 0.0;
        double dH_dx2 = (A.x2 >= B.x2) ? hh : 0.0;
        double dH_dy1 = (A.y1 <= B.y1) ? -hw : 0.0;
        double dH_dy2 = (A.y2 >= B.y2) ? hw : 0.0;

        gx1 = dI * dI_dx1 + dU * (dA_dx1 - dI_dx1) + dH * dH_dx1;
        gx2 = dI * dI_dx2 + dU * (dA_dx2 - dI_dx2) + dH * dH_dx2;
        gy1 = dI * dI_dy1 + dU * (dA_dy1 - dI_dy1) + dH * dH_dy1;
        gy2 = dI * dI_dy2 + dU * (dA_dy2 - dI_dy2) + dH * dH_dy2;

        Tensor& g = n.inputs[0]->ensure_grad();
        const double go = n.grad[0];
        g[0] += go * (gx1 + gx2);
        g[1] += go * (gy1 + gy2);
        g[2] += go * (0.5 * gx2 - 0.5 * gx1);
        g[3] += go * (0.5 * gy2 - 0.5 * gy1);
    }));
}

Var l1_loss(const Var& pred_box, const Tensor& gt_box) {
    check(pred_box.value().numel() == gt_box.numel(), "l1_loss size mismatch");
    const int M = gt_box.numel();
    double loss = 0.0;
    for (int i = 0; i < M; ++i) loss += std::abs(pred_box.value()[i] - gt_box[i]);
    loss /= M;
    Tensor gt = gt_box;
    return Var(make_node(Tensor::scalar(loss), {pred_box.node()}, [gt, M](Node& n) {
        Tensor& g = n.inputs[0]->ensure_grad();
        const double go = n.grad[0];
        for (int i = 0; i < M; ++i) {
            double d = n.inputs[0]->value[i] - gt[i];
            g[i] += go * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / M;
        }
    }));
}

}  // namespace spikefet
