#include "affect/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace affect::nn {

namespace {

bool broadcastable(const Shape& a, const Shape& b) {
    return a == b || a.count() == 1 || b.count() == 1;
}

// pushes g (shaped like the op output) into a node that may be scalar
void accumulate(Node& into, const Arr& g) {
    if (into.value.data.size() == 1) into.grad_ref()[0] += g.sum();
    else into.grad_ref() += g;
}

Arr expand(const Tensor& t, Eigen::Index n) {
    if (t.data.size() == 1) return Arr::Constant(n, t.data[0]);
    return t.data;
}

double sp_tau(double t, double tau) {
    const double z = t / tau;
    if (z > 40.0) return t;
    if (z < -40.0) return 0.0;
    return tau * std::log1p(std::exp(z));
}

double sigma_tau(double t, double tau) {
    const double z = t / tau;
    if (z > 40.0) return 1.0;
    if (z < -40.0) return 0.0;
    return 1.0 / (1.0 + std::exp(-z));
}

} // namespace

Var add(const Var& a, const Var& b) {
    if (!broadcastable(a.shape(), b.shape()))
        throw std::invalid_argument("add: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    const Shape s = a.value().size() >= b.value().size() ? a.shape() : b.shape();
    Tensor out(s, expand(a.value(), s.count()) + expand(b.value(), s.count()));
    return make_op(std::move(out), {a, b}, [](Node& n) {
        accumulate(*n.inputs[0], n.grad.data);
        accumulate(*n.inputs[1], n.grad.data);
    });
}

Var sub(const Var& a, const Var& b) {
    if (!broadcastable(a.shape(), b.shape()))
        throw std::invalid_argument("sub: shape mismatch");
    const Shape s = a.value().size() >= b.value().size() ? a.shape() : b.shape();
    Tensor out(s, expand(a.value(), s.count()) - expand(b.value(), s.count()));
    return make_op(std::move(out), {a, b}, [](Node& n) {
        accumulate(*n.inputs[0], n.grad.data);
        accumulate(*n.inputs[1], Arr(-n.grad.data));
    });
}

Var mul(const Var& a, const Var& b) {
    if (!broadcastable(a.shape(), b.shape()))
        throw std::invalid_argument("mul: shape mismatch");
    const Shape s = a.value().size() >= b.value().size() ? a.shape() : b.shape();
    const Eigen::Index cnt = s.count();
    Tensor out(s, expand(a.value(), cnt) * expand(b.value(), cnt));
    return make_op(std::move(out), {a, b}, [cnt](Node& n) {
        const Arr av = expand(n.inputs[0]->value, cnt);
        const Arr bv = expand(n.inputs[1]->value, cnt);
        accumulate(*n.inputs[0], Arr(n.grad.data * bv));
        accumulate(*n.inputs[1], Arr(n.grad.data * av));
    });
}

Var divide(const Var& a, const Var& b) {
    if (!broadcastable(a.shape(), b.shape()))
        throw std::invalid_argument("divide: shape mismatch");
    const Shape s = a.value().size() >= b.value().size() ? a.shape() : b.shape();
    const Eigen::Index cnt = s.count();
    Tensor out(s, expand(a.value(), cnt) / expand(b.value(), cnt));
    return make_op(std::move(out), {a, b}, [cnt](Node& n) {
        const Arr av = expand(n.inputs[0]->value, cnt);
        const Arr bv = expand(n.inputs[1]->value, cnt);
        accumulate(*n.inputs[0], Arr(n.grad.data / bv));
        accumulate(*n.inputs[1], Arr(-n.grad.data * av / bv.square()));
    });
}

Var scale(const Var& x, Scalar k) {
    Tensor out(x.shape(), Arr(x.value().data * k));
    return make_op(std::move(out), {x}, [k](Node& n) { n.inputs[0]->grad_ref() += k * n.grad.data; });
}

Var add_const(const Var& x, Scalar k) {
    Tensor out(x.shape(), Arr(x.value().data + k));
    return make_op(std::move(out), {x}, [](Node& n) { n.inputs[0]->grad_ref() += n.grad.data; });
}

Var relu(const Var& x) {
    Tensor out(x.shape(), Arr(x.value().data.max(0.0)));
    return make_op(std::move(out), {x}, [](Node& n) {
        const Arr mask = (n.inputs[0]->value.data > 0.0).cast<Scalar>();
        n.inputs[0]->grad_ref() += n.grad.data * mask;
    });
}

Var silu(const Var& x) {
    const Arr& v = x.value().data;
    const Arr sg = 1.0 / (1.0 + (-v).exp());
    Tensor out(x.shape(), Arr(v * sg));
    return make_op(std::move(out), {x}, [sg](Node& n) {
        const Arr& v = n.inputs[0]->value.data;
        n.inputs[0]->grad_ref() += n.grad.data * (sg + v * sg * (1.0 - sg));
    });
}

Var sigmoid(const Var& x) {
    const Arr y = 1.0 / (1.0 + (-x.value().data).exp());
    Tensor out(x.shape(), y);
    return make_op(std::move(out), {x}, [y](Node& n) {
        n.inputs[0]->grad_ref() += n.grad.data * y * (1.0 - y);
    });
}

Var tanh_op(const Var& x) {
    const Arr y = x.value().data.tanh();
    Tensor out(x.shape(), y);
    return make_op(std::move(out), {x}, [y](Node& n) {
        n.inputs[0]->grad_ref() += n.grad.data * (1.0 - y.square());
    });
}

Var abs_op(const Var& x) {
    Tensor out(x.shape(), Arr(x.value().data.abs()));
    return make_op(std::move(out), {x}, [](Node& n) {
        const Arr sign = n.inputs[0]->value.data.sign();
        n.inputs[0]->grad_ref() += n.grad.data * sign;
    });
}

Var square(const Var& x) {
    Tensor out(x.shape(), Arr(x.value().data.square()));
    return make_op(std::move(out), {x}, [](Node& n) {
        n.inputs[0]->grad_ref() += 2.0 * n.grad.data * n.inputs[0]->value.data;
    });
}

Var sqrt_op(const Var& x) {
    const Arr y = x.value().data.sqrt();
    Tensor out(x.shape(), y);
    return make_op(std::move(out), {x}, [y](Node& n) {
        // subgradient 0 at the origin so a perfectly met target does not blow up
        const Arr d = (y > 1e-150).select(0.5 / y.max(1e-150), Arr::Zero(y.size()));
        n.inputs[0]->grad_ref() += n.grad.data * d;
    });
}

Var exp2_op(const Var& x) {
    const Arr y = (x.value().data * M_LN2).exp();
    Tensor out(x.shape(), y);
    return make_op(std::move(out), {x}, [y](Node& n) {
        n.inputs[0]->grad_ref() += n.grad.data * y * M_LN2;
    });
}

Var softclip01(const Var& x, Scalar tau) {
    const Arr& v = x.value().data;
    Arr y(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i)
        y[i] = v[i] - sp_tau(v[i] - 1.0, tau) + sp_tau(-v[i], tau);
    Tensor out(x.shape(), std::move(y));
    return make_op(std::move(out), {x}, [tau](Node& n) {
        const Arr& v = n.inputs[0]->value.data;
        Arr d(v.size());
        for (Eigen::Index i = 0; i < v.size(); ++i)
            d[i] = 1.0 - sigma_tau(v[i] - 1.0, tau) - sigma_tau(-v[i], tau);
        n.inputs[0]->grad_ref() += n.grad.data * d;
    });
}

Var sum_all(const Var& x) {
    Tensor out = Tensor::scalar(x.value().data.sum());
    return make_op(std::move(out), {x}, [](Node& n) {
        n.inputs[0]->grad_ref() += n.grad.data[0];
    });
}

Var mean_all(const Var& x) {
    const double inv = 1.0 / static_cast<double>(x.value().size());
    Tensor out = Tensor::scalar(x.value().data.mean());
    return make_op(std::move(out), {x}, [inv](Node& n) {
        n.inputs[0]->grad_ref() += n.grad.data[0] * inv;
    });
}

Var detach(const Var& x) { return Var::constant(x.value()); }

Var reshape(const Var& x, const Shape& s) {
    if (s.count() != x.value().size()) throw std::invalid_argument("reshape: element count mismatch");
    Tensor out(s, x.value().data);
    return make_op(std::move(out), {x}, [](Node& n) { n.inputs[0]->grad_ref() += n.grad.data; });
}

Var linear(const Var& x, const Var& W, const Var& b) {
    const int n = x.shape().n;
    const int in = W.shape().c, out_dim = W.shape().n;
    if (x.shape().c != in || x.shape().h != 1 || x.shape().w != 1)
        throw std::invalid_argument("linear: expected x [n," + std::to_string(in) + ",1,1], got " +
                                    x.shape().str());
    Tensor out(Shape{n, out_dim, 1, 1});
    Eigen::Map<const MatRM> Xm(x.value().data.data(), n, in);
    Eigen::Map<const MatRM> Wm(W.value().data.data(), out_dim, in);
    Eigen::Map<MatRM> Ym(out.data.data(), n, out_dim);
    Ym.noalias() = Xm * Wm.transpose();
    for (int i = 0; i < n; ++i) Ym.row(i) += Eigen::Map<const MatRM>(b.value().data.data(), 1, out_dim);
    return make_op(std::move(out), {x, W, b}, [n, in, out_dim](Node& nd) {
        Eigen::Map<const MatRM> G(nd.grad.data.data(), n, out_dim);
        Eigen::Map<const MatRM> Xm(nd.inputs[0]->value.data.data(), n, in);
        Eigen::Map<const MatRM> Wm(nd.inputs[1]->value.data.data(), out_dim, in);
        if (nd.inputs[0]->requires_grad) {
            Eigen::Map<MatRM> dX(nd.inputs[0]->grad_ref().data(), n, in);
            dX.noalias() += G * Wm;
        }
        if (nd.inputs[1]->requires_grad) {
            Eigen::Map<MatRM> dW(nd.inputs[1]->grad_ref().data(), out_dim, in);
            dW.noalias() += G.transpose() * Xm;
        }
        if (nd.inputs[2]->requires_grad) {
            Eigen::Map<MatRM> dB(nd.inputs[2]->grad_ref().data(), 1, out_dim);
            dB.noalias() += G.colwise().sum();
        }
    });
}

namespace {

void im2col(const Arr& x, int C, int H, int W, int kh, int kw, int pad, MatRM& col,
            Eigen::Index sample_offset) {
    const int P = H * W;
    for (int c = 0; c < C; ++c)
        for (int dy = 0; dy < kh; ++dy)
            for (int dx = 0; dx < kw; ++dx) {
                const int row = (c * kh + dy) * kw + dx;
                for (int y = 0; y < H; ++y) {
                    const int sy = y + dy - pad;
                    Scalar* dst = col.data() + static_cast<Eigen::Index>(row) * P +
                                  static_cast<Eigen::Index>(y) * W;
                    if (sy < 0 || sy >= H) {
                        for (int xw = 0; xw < W; ++xw) dst[xw] = 0.0;
                        continue;
                    }
                    const Scalar* src =
                        x.data() + sample_offset + (static_cast<Eigen::Index>(c) * H + sy) * W;
                    for (int xw = 0; xw < W; ++xw) {
                        const int sx = xw + dx - pad;
                        dst[xw] = (sx < 0 || sx >= W) ? 0.0 : src[sx];
                    }
                }
            }
}

void col2im_accum(const MatRM& col, int C, int H, int W, int kh, int kw, int pad, Arr& dx,
                  Eigen::Index sample_offset) {
    const int P = H * W;
    for (int c = 0; c < C; ++c)
        for (int dy = 0; dy < kh; ++dy)
            for (int dx_ = 0; dx_ < kw; ++dx_) {
                const int row = (c * kh + dy) * kw + dx_;
                for (int y = 0; y < H; ++y) {
                    const int sy = y + dy - pad;
                    if (sy < 0 || sy >= H) continue;
                    const Scalar* src = col.data() + static_cast<Eigen::Index>(row) * P +
                                        static_cast<Eigen::Index>(y) * W;
                    Scalar* dst =
                        dx.data() + sample_offset + (static_cast<Eigen::Index>(c) * H + sy) * W;
                    for (int xw = 0; xw < W; ++xw) {
                        const int sx = xw + dx_ - pad;
                        if (sx >= 0 && sx < W) dst[sx] += src[xw];
                    }
                }
            }
}

} // namespace

Var conv2d(const Var& x, const Var& W, const Var& b, int pad) {
    const Shape xs = x.shape();
    const Shape ws = W.shape();
    if (xs.c != ws.c) throw std::invalid_argument("conv2d: channel mismatch");
    const int N = xs.n, C = xs.c, H = xs.h, Wd = xs.w;
    const int OC = ws.n, KH = ws.h, KW = ws.w;
    const int K = C * KH * KW, P = H * Wd;

    Tensor out(Shape{N, OC, H, Wd});
    Eigen::Map<const MatRM> Wm(W.value().data.data(), OC, K);
    MatRM col(K, P);
    for (int s = 0; s < N; ++s) {
        im2col(x.value().data, C, H, Wd, KH, KW, pad, col, static_cast<Eigen::Index>(s) * C * P);
        Eigen::Map<MatRM> Ym(out.data.data() + static_cast<Eigen::Index>(s) * OC * P, OC, P);
        Ym.noalias() = Wm * col;
        for (int oc = 0; oc < OC; ++oc) Ym.row(oc).array() += b.value().data[oc];
    }
    return make_op(std::move(out), {x, W, b}, [N, C, H, Wd, OC, KH, KW, K, P, pad](Node& nd) {
        Eigen::Map<const MatRM> Wm(nd.inputs[1]->value.data.data(), OC, K);
        MatRM col(K, P);
        const bool need_dx = nd.inputs[0]->requires_grad;
        const bool need_dw = nd.inputs[1]->requires_grad;
        const bool need_db = nd.inputs[2]->requires_grad;
        for (int s = 0; s < N; ++s) {
            Eigen::Map<const MatRM> G(nd.grad.data.data() + static_cast<Eigen::Index>(s) * OC * P,
                                      OC, P);
            if (need_dw || need_dx)
                im2col(nd.inputs[0]->value.data, C, H, Wd, KH, KW, pad, col,
                       static_cast<Eigen::Index>(s) * C * P);
            if (need_dw) {
                Eigen::Map<MatRM> dW(nd.inputs[1]->grad_ref().data(), OC, K);
                dW.noalias() += G * col.transpose();
            }
            if (need_db) {
                Arr& db = nd.inputs[2]->grad_ref();
                for (int oc = 0; oc < OC; ++oc) db[oc] += G.row(oc).sum();
            }
            if (need_dx) {
                MatRM dcol(K, P);
                dcol.noalias() = Wm.transpose() * G;
                col2im_accum(dcol, C, H, Wd, KH, KW, pad, nd.inputs[0]->grad_ref(),
                             static_cast<Eigen::Index>(s) * C * P);
            }
        }
    });
}

Var maxpool2(const Var& x) {
    const Shape s = x.shape();
    if (s.h % 2 || s.w % 2) throw std::invalid_argument("maxpool2: odd spatial size");
    const int OH = s.h / 2, OW = s.w / 2;
    Tensor out(Shape{s.n, s.c, OH, OW});
    auto argmax = std::make_shared<std::vector<Eigen::Index>>(out.data.size());
    const Arr& v = x.value().data;
    Eigen::Index o = 0;
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int y = 0; y < OH; ++y)
                for (int xw = 0; xw < OW; ++xw, ++o) {
                    const Eigen::Index base =
                        ((static_cast<Eigen::Index>(n) * s.c + c) * s.h + 2 * y) * s.w + 2 * xw;
                    Eigen::Index best = base;
                    Scalar bv = v[base];
                    const Eigen::Index cand[3] = {base + 1, base + s.w, base + s.w + 1};
                    for (const Eigen::Index idx : cand)
                        if (v[idx] > bv) { bv = v[idx]; best = idx; }
                    out.data[o] = bv;
                    (*argmax)[o] = best;
                }
    return make_op(std::move(out), {x}, [argmax](Node& nd) {
        Arr& dx = nd.inputs[0]->grad_ref();
        for (Eigen::Index i = 0; i < nd.grad.data.size(); ++i) dx[(*argmax)[i]] += nd.grad.data[i];
    });
}

Var avgpool2(const Var& x) {
    const Shape s = x.shape();
    if (s.h % 2 || s.w % 2) throw std::invalid_argument("avgpool2: odd spatial size");
    const int OH = s.h / 2, OW = s.w / 2;
    Tensor out(Shape{s.n, s.c, OH, OW});
    const Arr& v = x.value().data;
    Eigen::Index o = 0;
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int y = 0; y < OH; ++y)
                for (int xw = 0; xw < OW; ++xw, ++o) {
                    const Eigen::Index base =
                        ((static_cast<Eigen::Index>(n) * s.c + c) * s.h + 2 * y) * s.w + 2 * xw;
                    out.data[o] = 0.25 * (v[base] + v[base + 1] + v[base + s.w] + v[base + s.w + 1]);
                }
    return make_op(std::move(out), {x}, [s, OH, OW](Node& nd) {
        Arr& dx = nd.inputs[0]->grad_ref();
        Eigen::Index o = 0;
        for (int n = 0; n < s.n; ++n)
            for (int c = 0; c < s.c; ++c)
                for (int y = 0; y < OH; ++y)
                    for (int xw = 0; xw < OW; ++xw, ++o) {
                        const Eigen::Index base =
                            ((static_cast<Eigen::Index>(n) * s.c + c) * s.h + 2 * y) * s.w + 2 * xw;
                        const Scalar g = 0.25 * nd.grad.data[o];
                        dx[base] += g;
                        dx[base + 1] += g;
                        dx[base + s.w] += g;
                        dx[base + s.w + 1] += g;
                    }
    });
}

Var upsample2(const Var& x) {
    const Shape s = x.shape();
    const int OH = s.h * 2, OW = s.w * 2;
    Tensor out(Shape{s.n, s.c, OH, OW});
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int y = 0; y < OH; ++y)
                for (int xw = 0; xw < OW; ++xw)
                    out(n, c, y, xw) = x.value()(n, c, y / 2, xw / 2);
    return make_op(std::move(out), {x}, [s, OH, OW](Node& nd) {
        Tensor& g = nd.grad;
        Arr& dx = nd.inputs[0]->grad_ref();
        for (int n = 0; n < s.n; ++n)
            for (int c = 0; c < s.c; ++c)
                for (int y = 0; y < OH; ++y)
                    for (int xw = 0; xw < OW; ++xw)
                        dx[((static_cast<Eigen::Index>(n) * s.c + c) * s.h + y / 2) * s.w + xw / 2] +=
                            g(n, c, y, xw);
    });
}

Var global_avg_pool(const Var& x) {
    const Shape s = x.shape();
    const double inv = 1.0 / (static_cast<double>(s.h) * s.w);
    Tensor out(Shape{s.n, s.c, 1, 1});
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c) {
            const Eigen::Index base = (static_cast<Eigen::Index>(n) * s.c + c) * s.h * s.w;
            out.data[static_cast<Eigen::Index>(n) * s.c + c] =
                x.value().data.segment(base, static_cast<Eigen::Index>(s.h) * s.w).sum() * inv;
        }
    return make_op(std::move(out), {x}, [s, inv](Node& nd) {
        Arr& dx = nd.inputs[0]->grad_ref();
        for (int n = 0; n < s.n; ++n)
            for (int c = 0; c < s.c; ++c) {
                const Eigen::Index base = (static_cast<Eigen::Index>(n) * s.c + c) * s.h * s.w;
                dx.segment(base, static_cast<Eigen::Index>(s.h) * s.w) +=
                    nd.grad.data[static_cast<Eigen::Index>(n) * s.c + c] * inv;
            }
    });
}

Var concat_c(const Var& a, const Var& b) {
    const Shape sa = a.shape(), sb = b.shape();
    if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w)
        throw std::invalid_argument("concat_c: shape mismatch");
    Tensor out(Shape{sa.n, sa.c + sb.c, sa.h, sa.w});
    const Eigen::Index plane = static_cast<Eigen::Index>(sa.h) * sa.w;
    for (int n = 0; n < sa.n; ++n) {
        out.data.segment((static_cast<Eigen::Index>(n) * (sa.c + sb.c)) * plane, sa.c * plane) =
            a.value().data.segment(static_cast<Eigen::Index>(n) * sa.c * plane, sa.c * plane);
        out.data.segment((static_cast<Eigen::Index>(n) * (sa.c + sb.c) + sa.c) * plane,
                         sb.c * plane) =
            b.value().data.segment(static_cast<Eigen::Index>(n) * sb.c * plane, sb.c * plane);
    }
    return make_op(std::move(out), {a, b}, [sa, sb, plane](Node& nd) {
        for (int n = 0; n < sa.n; ++n) {
            if (nd.inputs[0]->requires_grad)
                nd.inputs[0]->grad_ref().segment(static_cast<Eigen::Index>(n) * sa.c * plane,
                                                 sa.c * plane) +=
                    nd.grad.data.segment((static_cast<Eigen::Index>(n) * (sa.c + sb.c)) * plane,
                                         sa.c * plane);
            if (nd.inputs[1]->requires_grad)
                nd.inputs[1]->grad_ref().segment(static_cast<Eigen::Index>(n) * sb.c * plane,
                                                 sb.c * plane) +=
                    nd.grad.data.segment(
                        (static_cast<Eigen::Index>(n) * (sa.c + sb.c) + sa.c) * plane, sb.c * plane);
        }
    });
}

Var slice_c(const Var& x, int c0, int len) {
    const Shape s = x.shape();
    if (c0 < 0 || c0 + len > s.c) throw std::invalid_argument("slice_c: out of range");
    const Eigen::Index plane = static_cast<Eigen::Index>(s.h) * s.w;
    Tensor out(Shape{s.n, len, s.h, s.w});
    for (int n = 0; n < s.n; ++n)
        out.data.segment(static_cast<Eigen::Index>(n) * len * plane, len * plane) =
            x.value().data.segment((static_cast<Eigen::Index>(n) * s.c + c0) * plane, len * plane);
    return make_op(std::move(out), {x}, [s, c0, len, plane](Node& nd) {
        for (int n = 0; n < s.n; ++n)
            nd.inputs[0]->grad_ref().segment((static_cast<Eigen::Index>(n) * s.c + c0) * plane,
                                             len * plane) +=
                nd.grad.data.segment(static_cast<Eigen::Index>(n) * len * plane, len * plane);
    });
}

Var film(const Var& x, const Var& s, const Var& t) {
    const Shape xs = x.shape();
    if (s.shape().n != xs.n || s.shape().c != xs.c || t.shape().n != xs.n || t.shape().c != xs.c)
        throw std::invalid_argument("film: modulation shape mismatch");
    const Eigen::Index plane = static_cast<Eigen::Index>(xs.h) * xs.w;
    Tensor out(xs);
    for (int n = 0; n < xs.n; ++n)
        for (int c = 0; c < xs.c; ++c) {
            const Eigen::Index base = (static_cast<Eigen::Index>(n) * xs.c + c) * plane;
            const Eigen::Index vi = static_cast<Eigen::Index>(n) * xs.c + c;
            out.data.segment(base, plane) =
                x.value().data.segment(base, plane) * (1.0 + s.value().data[vi]) + t.value().data[vi];
        }
    return make_op(std::move(out), {x, s, t}, [xs, plane](Node& nd) {
        for (int n = 0; n < xs.n; ++n)
            for (int c = 0; c < xs.c; ++c) {
                const Eigen::Index base = (static_cast<Eigen::Index>(n) * xs.c + c) * plane;
                const Eigen::Index vi = static_cast<Eigen::Index>(n) * xs.c + c;
                const auto g = nd.grad.data.segment(base, plane);
                if (nd.inputs[0]->requires_grad)
                    nd.inputs[0]->grad_ref().segment(base, plane) +=
                        g * (1.0 + nd.inputs[1]->value.data[vi]);
                if (nd.inputs[1]->requires_grad)
                    nd.inputs[1]->grad_ref()[vi] +=
                        (g * nd.inputs[0]->value.data.segment(base, plane)).sum();
                if (nd.inputs[2]->requires_grad) nd.inputs[2]->grad_ref()[vi] += g.sum();
            }
    });
}

Var bilinear_resize(const Var& x, int oh, int ow) {
    const Shape s = x.shape();
    if (oh == s.h && ow == s.w) return x;
    struct Axis {
        std::vector<int> i0, i1;
        std::vector<Scalar> w1;
    };
    auto make_axis = [](int in, int out) {
        Axis a;
        a.i0.resize(out);
        a.i1.resize(out);
        a.w1.resize(out);
        const double sc = static_cast<double>(in) / out;
        for (int i = 0; i < out; ++i) {
            const double f = (i + 0.5) * sc - 0.5;
            int lo = static_cast<int>(std::floor(f));
            const double w = f - lo;
            a.i1[i] = std::clamp(lo + 1, 0, in - 1);
            a.i0[i] = std::clamp(lo, 0, in - 1);
            a.w1[i] = w;
        }
        return a;
    };
    auto ay = std::make_shared<Axis>(make_axis(s.h, oh));
    auto ax = std::make_shared<Axis>(make_axis(s.w, ow));

    Tensor out(Shape{s.n, s.c, oh, ow});
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int y = 0; y < oh; ++y) {
                const int y0 = ay->i0[y], y1 = ay->i1[y];
                const Scalar wy = ay->w1[y];
                for (int xw = 0; xw < ow; ++xw) {
                    const int x0 = ax->i0[xw], x1 = ax->i1[xw];
                    const Scalar wx = ax->w1[xw];
                    const auto& v = x.value();
                    out(n, c, y, xw) = (1 - wy) * ((1 - wx) * v(n, c, y0, x0) + wx * v(n, c, y0, x1)) +
                                       wy * ((1 - wx) * v(n, c, y1, x0) + wx * v(n, c, y1, x1));
                }
            }
    return make_op(std::move(out), {x}, [s, oh, ow, ay, ax](Node& nd) {
        Arr& dx = nd.inputs[0]->grad_ref();
        auto at = [&](int n, int c, int y, int xw) -> Scalar& {
            return dx[((static_cast<Eigen::Index>(n) * s.c + c) * s.h + y) * s.w + xw];
        };
        for (int n = 0; n < s.n; ++n)
            for (int c = 0; c < s.c; ++c)
                for (int y = 0; y < oh; ++y) {
                    const int y0 = ay->i0[y], y1 = ay->i1[y];
                    const Scalar wy = ay->w1[y];
                    for (int xw = 0; xw < ow; ++xw) {
                        const int x0 = ax->i0[xw], x1 = ax->i1[xw];
                        const Scalar wx = ax->w1[xw];
                        const Scalar g = nd.grad(n, c, y, xw);
                        at(n, c, y0, x0) += g * (1 - wy) * (1 - wx);
                        at(n, c, y0, x1) += g * (1 - wy) * wx;
                        at(n, c, y1, x0) += g * wy * (1 - wx);
                        at(n, c, y1, x1) += g * wy * wx;
                    }
                }
    });
}

Var pad_replicate(const Var& x, int r) {
    const Shape s = x.shape();
    const int OH = s.h + 2 * r, OW = s.w + 2 * r;
    Tensor out(Shape{s.n, s.c, OH, OW});
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int y = 0; y < OH; ++y) {
                const int sy = std::clamp(y - r, 0, s.h - 1);
                for (int xw = 0; xw < OW; ++xw)
                    out(n, c, y, xw) = x.value()(n, c, sy, std::clamp(xw - r, 0, s.w - 1));
            }
    return make_op(std::move(out), {x}, [s, r, OH, OW](Node& nd) {
        Arr& dx = nd.inputs[0]->grad_ref();
        for (int n = 0; n < s.n; ++n)
            for (int c = 0; c < s.c; ++c)
                for (int y = 0; y < OH; ++y) {
                    const int sy = std::clamp(y - r, 0, s.h - 1);
                    for (int xw = 0; xw < OW; ++xw)
                        dx[((static_cast<Eigen::Index>(n) * s.c + c) * s.h + sy) * s.w +
                           std::clamp(xw - r, 0, s.w - 1)] += nd.grad(n, c, y, xw);
                }
    });
}

Var conv1d_h(const Var& x, const Var& k) {
    const Shape s = x.shape();
    const int K = static_cast<int>(k.value().size());
    const int OW = s.w - K + 1;
    if (OW < 1) throw std::invalid_argument("conv1d_h: kernel wider than input");
    Tensor out(Shape{s.n, s.c, s.h, OW});
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int y = 0; y < s.h; ++y)
                for (int xw = 0; xw < OW; ++xw) {
                    Scalar acc = 0;
                    for (int i = 0; i < K; ++i) acc += k.value().data[i] * x.value()(n, c, y, xw + i);
                    out(n, c, y, xw) = acc;
                }
    return make_op(std::move(out), {x, k}, [s, K, OW](Node& nd) {
        const bool need_dx = nd.inputs[0]->requires_grad;
        const bool need_dk = nd.inputs[1]->requires_grad;
        for (int n = 0; n < s.n; ++n)
            for (int c = 0; c < s.c; ++c)
                for (int y = 0; y < s.h; ++y)
                    for (int xw = 0; xw < OW; ++xw) {
                        const Scalar g = nd.grad(n, c, y, xw);
                        for (int i = 0; i < K; ++i) {
                            if (need_dx)
                                nd.inputs[0]->grad_ref()[((static_cast<Eigen::Index>(n) * s.c + c) *
                                                              s.h + y) * s.w + xw + i] +=
                                    g * nd.inputs[1]->value.data[i];
                            if (need_dk)
                                nd.inputs[1]->grad_ref()[i] += g * nd.inputs[0]->value(n, c, y, xw + i);
                        }
                    }
    });
}

Var conv1d_v(const Var& x, const Var& k) {
    const Shape s = x.shape();
    const int K = static_cast<int>(k.value().size());
    const int OH = s.h - K + 1;
    if (OH < 1) throw std::invalid_argument("conv1d_v: kernel taller than input");
    Tensor out(Shape{s.n, s.c, OH, s.w});
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int y = 0; y < OH; ++y)
                for (int xw = 0; xw < s.w; ++xw) {
                    Scalar acc = 0;
                    for (int i = 0; i < K; ++i) acc += k.value().data[i] * x.value()(n, c, y + i, xw);
                    out(n, c, y, xw) = acc;
                }
    return make_op(std::move(out), {x, k}, [s, K, OH](Node& nd) {
        const bool need_dx = nd.inputs[0]->requires_grad;
        const bool need_dk = nd.inputs[1]->requires_grad;
        for (int n = 0; n < s.n; ++n)
            for (int c = 0; c < s.c; ++c)
                for (int y = 0; y < OH; ++y)
                    for (int xw = 0; xw < s.w; ++xw) {
                        const Scalar g = nd.grad(n, c, y, xw);
                        for (int i = 0; i < K; ++i) {
                            if (need_dx)
                                nd.inputs[0]->grad_ref()[((static_cast<Eigen::Index>(n) * s.c + c) *
                                                              s.h + y + i) * s.w + xw] +=
                                    g * nd.inputs[1]->value.data[i];
                            if (need_dk)
                                nd.inputs[1]->grad_ref()[i] += g * nd.inputs[0]->value(n, c, y + i, xw);
                        }
                    }
    });
}

Var gaussian_kernel(const Var& sigma, int radius) {
    const int K = 2 * radius + 1;
    const double sg = sigma.scalar_value();
    Tensor out(Shape{1, K, 1, 1});
    if (sg < 1e-4) {
        out.data[radius] = 1.0;
        return make_op(std::move(out), {sigma}, [](Node&) { /* flat region: d/dsigma = 0 */ });
    }
    Arr g(K);
    for (int i = -radius; i <= radius; ++i) g[i + radius] = std::exp(-0.5 * i * i / (sg * sg));
    const double Z = g.sum();
    out.data = g / Z;
    return make_op(std::move(out), {sigma}, [radius, K, g, Z, sg](Node& nd) {
        // w_i = g_i / Z;  dg_i/dsigma = g_i i^2 / sigma^3
        Arr dg(K);
        for (int i = -radius; i <= radius; ++i)
            dg[i + radius] = g[i + radius] * (static_cast<double>(i) * i) / (sg * sg * sg);
        const double dZ = dg.sum();
        double acc = 0;
        for (int i = 0; i < K; ++i)
            acc += nd.grad.data[i] * (dg[i] * Z - g[i] * dZ) / (Z * Z);
        nd.inputs[0]->grad_ref()[0] += acc;
    });
}

namespace {

// cubic B-spline segment weights over taps {i-1, i, i+1, i+2}
inline void bspline_w(double f, double w[4]) {
    const double f2 = f * f, f3 = f2 * f;
    w[0] = (1.0 - 3.0 * f + 3.0 * f2 - f3) / 6.0;
    w[1] = (3.0 * f3 - 6.0 * f2 + 4.0) / 6.0;
    w[2] = (-3.0 * f3 + 3.0 * f2 + 3.0 * f + 1.0) / 6.0;
    w[3] = f3 / 6.0;
}

inline void bspline_dw(double f, double dw[4]) {
    const double f2 = f * f;
    dw[0] = -(1.0 - f) * (1.0 - f) / 2.0;
    dw[1] = (3.0 * f2 - 4.0 * f) / 2.0;
    dw[2] = (-3.0 * f2 + 2.0 * f + 1.0) / 2.0;
    dw[3] = f2 / 2.0;
}

// Knot lookup with reflected virtual ends: y[-1] = 2 y0 - y1, y[K] = 2 y_{K-1} - y_{K-2}.
inline double knot_at(const Arr& yk, int K, int j) {
    if (j < 0) return 2.0 * yk[0] - yk[1];
    if (j >= K) return 2.0 * yk[K - 1] - yk[K - 2];
    return yk[j];
}

// routes gradient for index j (possibly virtual) back to real knots
inline void knot_accum(Arr& dyk, int K, int j, double g) {
    if (j < 0) {
        dyk[0] += 2.0 * g;
        dyk[1] -= g;
    } else if (j >= K) {
        dyk[K - 1] += 2.0 * g;
        dyk[K - 2] -= g;
    } else {
        dyk[j] += g;
    }
}

} // namespace

Var knot_curve(const Var& x, const Var& yk) {
    const int K = static_cast<int>(yk.value().size());
    if (K < 3) throw std::invalid_argument("curve: need at least three knots");
    const Shape s = x.shape();
    const double km1 = K - 1;
    const Arr& ykv = yk.value().data;
    Tensor out(s);
    for (Eigen::Index i = 0; i < x.value().size(); ++i) {
        const double xv = x.value().data[i];
        if (xv < 0.0) {
            out.data[i] = ykv[0] + xv * km1 * (ykv[1] - ykv[0]);
        } else if (xv > 1.0) {
            out.data[i] = ykv[K - 1] + (xv - 1.0) * km1 * (ykv[K - 1] - ykv[K - 2]);
        } else {
            const double u = xv * km1;
            const int idx = std::min(static_cast<int>(std::floor(u)), K - 2);
            const double f = u - idx;
            double w[4];
            bspline_w(f, w);
            double acc = 0;
            for (int j = 0; j < 4; ++j) acc += w[j] * knot_at(ykv, K, idx - 1 + j);
            out.data[i] = acc;
        }
    }
    return make_op(std::move(out), {x, yk}, [K, km1](Node& nd) {
        const Arr& xv = nd.inputs[0]->value.data;
        const Arr& ykv = nd.inputs[1]->value.data;
        const bool need_dx = nd.inputs[0]->requires_grad;
        const bool need_dy = nd.inputs[1]->requires_grad;
        for (Eigen::Index i = 0; i < nd.grad.data.size(); ++i) {
            const Scalar g = nd.grad.data[i];
            if (g == 0.0) continue;
            const double v = xv[i];
            if (v < 0.0) {
                if (need_dx) nd.inputs[0]->grad_ref()[i] += g * km1 * (ykv[1] - ykv[0]);
                if (need_dy) {
                    Arr& dyk = nd.inputs[1]->grad_ref();
                    dyk[0] += g * (1.0 - v * km1);
                    dyk[1] += g * v * km1;
                }
            } else if (v > 1.0) {
                if (need_dx) nd.inputs[0]->grad_ref()[i] += g * km1 * (ykv[K - 1] - ykv[K - 2]);
                if (need_dy) {
                    Arr& dyk = nd.inputs[1]->grad_ref();
                    dyk[K - 1] += g * (1.0 + (v - 1.0) * km1);
                    dyk[K - 2] -= g * (v - 1.0) * km1;
                }
            } else {
                const double u = v * km1;
                const int idx = std::min(static_cast<int>(std::floor(u)), K - 2);
                const double f = u - idx;
                if (need_dx) {
                    double dw[4];
                    bspline_dw(f, dw);
                    double acc = 0;
                    for (int j = 0; j < 4; ++j) acc += dw[j] * knot_at(ykv, K, idx - 1 + j);
                    nd.inputs[0]->grad_ref()[i] += g * acc * km1;
                }
                if (need_dy) {
                    double w[4];
                    bspline_w(f, w);
                    for (int j = 0; j < 4; ++j)
                        knot_accum(nd.inputs[1]->grad_ref(), K, idx - 1 + j, g * w[j]);
                }
            }
        }
    });
}

namespace {

// Catmull-Rom weights over taps {-1, 0, 1, 2}; interpolating, C1 in f
inline void catrom_w(double f, double w[4]) {
    const double f2 = f * f, f3 = f2 * f;
    w[0] = -0.5 * f + f2 - 0.5 * f3;
    w[1] = 1.0 - 2.5 * f2 + 1.5 * f3;
    w[2] = 0.5 * f + 2.0 * f2 - 1.5 * f3;
    w[3] = -0.5 * f2 + 0.5 * f3;
}

inline void catrom_dw(double f, double dw[4]) {
    const double f2 = f * f;
    dw[0] = -0.5 + 2.0 * f - 1.5 * f2;
    dw[1] = -5.0 * f + 4.5 * f2;
    dw[2] = 0.5 + 4.0 * f - 4.5 * f2;
    dw[3] = -f + 1.5 * f2;
}

} // namespace

Var warp_affine(const Var& x, const Var& dx, const Var& dy, const Var& s) {
    const Shape xs = x.shape();
    const int H = xs.h, W = xs.w;
    const double tx = dx.scalar_value(), ty = dy.scalar_value(), sc = s.scalar_value();
    if (sc <= 0) throw std::invalid_argument("warp: scale must be positive");
    const double cx = (W - 1) / 2.0, cy = (H - 1) / 2.0;

    struct Samp {
        int x0, y0;       // base tap (floor of source coords)
        Scalar fx, fy;
        Scalar dudS, dvdS; // d(source coord)/d(scale)
        bool live_u, live_v;
    };
    auto samp = std::make_shared<std::vector<Samp>>(static_cast<std::size_t>(H) * W);
    for (int yo = 0; yo < H; ++yo)
        for (int xo = 0; xo < W; ++xo) {
            double u = (xo - cx) / sc + cx - tx * W;
            double v = (yo - cy) / sc + cy - ty * H;
            Samp sp;
            sp.dudS = -(xo - cx) / (sc * sc);
            sp.dvdS = -(yo - cy) / (sc * sc);
            sp.live_u = u > 0.0 && u < W - 1;
            sp.live_v = v > 0.0 && v < H - 1;
            u = std::clamp(u, 0.0, static_cast<double>(W - 1));
            v = std::clamp(v, 0.0, static_cast<double>(H - 1));
            sp.x0 = std::min(static_cast<int>(std::floor(u)), W - 1);
            sp.y0 = std::min(static_cast<int>(std::floor(v)), H - 1);
            sp.fx = u - sp.x0;
            sp.fy = v - sp.y0;
            (*samp)[static_cast<std::size_t>(yo) * W + xo] = sp;
        }

    auto clampi = [](int i, int n) { return std::clamp(i, 0, n - 1); };
    Tensor out(xs);
    for (int n = 0; n < xs.n; ++n)
        for (int c = 0; c < xs.c; ++c)
            for (int yo = 0; yo < H; ++yo)
                for (int xo = 0; xo < W; ++xo) {
                    const Samp& sp = (*samp)[static_cast<std::size_t>(yo) * W + xo];
                    double wy[4], wx[4];
                    catrom_w(sp.fy, wy);
                    catrom_w(sp.fx, wx);
                    double acc = 0;
                    for (int i = 0; i < 4; ++i) {
                        const int yy = clampi(sp.y0 - 1 + i, H);
                        double rowacc = 0;
                        for (int j = 0; j < 4; ++j)
                            rowacc += wx[j] * x.value()(n, c, yy, clampi(sp.x0 - 1 + j, W));
                        acc += wy[i] * rowacc;
                    }
                    out(n, c, yo, xo) = acc;
                }
    return make_op(std::move(out), {x, dx, dy, s}, [xs, H, W, samp](Node& nd) {
        const bool need_dx = nd.inputs[0]->requires_grad;
        const bool need_tp = nd.inputs[1]->requires_grad || nd.inputs[2]->requires_grad ||
                             nd.inputs[3]->requires_grad;
        auto clampi = [](int i, int n) { return std::clamp(i, 0, n - 1); };
        double g_tx = 0, g_ty = 0, g_sc = 0;
        const auto& v = nd.inputs[0]->value;
        for (int n = 0; n < xs.n; ++n)
            for (int c = 0; c < xs.c; ++c)
                for (int yo = 0; yo < H; ++yo)
                    for (int xo = 0; xo < W; ++xo) {
                        const Samp& sp = (*samp)[static_cast<std::size_t>(yo) * W + xo];
                        const Scalar g = nd.grad(n, c, yo, xo);
                        if (g == 0.0) continue;
                        double wy[4], wx[4], dwy[4], dwx[4];
                        catrom_w(sp.fy, wy);
                        catrom_w(sp.fx, wx);
                        catrom_dw(sp.fy, dwy);
                        catrom_dw(sp.fx, dwx);
                        double ddu = 0, ddv = 0;
                        for (int i = 0; i < 4; ++i) {
                            const int yy = clampi(sp.y0 - 1 + i, H);
                            for (int j = 0; j < 4; ++j) {
                                const int xx = clampi(sp.x0 - 1 + j, W);
                                const Scalar pv = v(n, c, yy, xx);
                                if (need_dx)
                                    nd.inputs[0]->grad_ref()[((static_cast<Eigen::Index>(n) * xs.c + c) * H +
                                                              yy) * W + xx] += g * wy[i] * wx[j];
                                ddu += wy[i] * dwx[j] * pv;
                                ddv += dwy[i] * wx[j] * pv;
                            }
                        }
                        if (need_tp) {
                            if (sp.live_u) {
                                g_tx += g * ddu * (-W);
                                g_sc += g * ddu * sp.dudS;
                            }
                            if (sp.live_v) {
                                g_ty += g * ddv * (-H);
                                g_sc += g * ddv * sp.dvdS;
                            }
                        }
                    }
        if (nd.inputs[1]->requires_grad) nd.inputs[1]->grad_ref()[0] += g_tx;
        if (nd.inputs[2]->requires_grad) nd.inputs[2]->grad_ref()[0] += g_ty;
        if (nd.inputs[3]->requires_grad) nd.inputs[3]->grad_ref()[0] += g_sc;
    });
}

Var mse_loss(const Var& a, const Var& b) { return mean_all(square(sub(a, b))); }
Var l1_loss(const Var& a, const Var& b) { return mean_all(abs_op(sub(a, b))); }
Var sum_squares(const Var& x) { return sum_all(square(x)); }
Var euclidean(const Var& a, const Var& b) { return sqrt_op(sum_squares(sub(a, b))); }

Var cosine_sim(const Var& a, const Var& b) {
    Var num = sum_all(mul(a, b));
    Var den = mul(sqrt_op(sum_squares(a)), sqrt_op(sum_squares(b)));
    return divide(num, den);
}

} // namespace affect::nn
