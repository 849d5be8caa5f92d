#pragma once

#include "affect/nn/graph.hpp"

namespace affect::nn {

// Elementwise binaries accept equal shapes, or a 1-element tensor on either
// side (scalar broadcast).
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var divide(const Var& a, const Var& b);

Var scale(const Var& x, Scalar k);
Var add_const(const Var& x, Scalar k);

Var relu(const Var& x);
Var silu(const Var& x);
Var sigmoid(const Var& x);
Var tanh_op(const Var& x);
Var abs_op(const Var& x);
Var square(const Var& x);
Var sqrt_op(const Var& x);
Var exp2_op(const Var& x);

// x - sp(x-1) + sp(-x) with sp the softplus of width tau: a smooth squash
// that is numerically the identity away from the [0,1] borders and keeps a
// live gradient slightly beyond them.
Var softclip01(const Var& x, Scalar tau = 0.02);

Var sum_all(const Var& x);
Var mean_all(const Var& x);

Var detach(const Var& x);
Var reshape(const Var& x, const Shape& s);

// y = x W^T + b, x:[n,in] as [n,in,1,1], W:[out,in], b:[out]
Var linear(const Var& x, const Var& W, const Var& b);
// stride-1 zero-padded conv, W:[oc,ic,kh,kw], b:[oc]
Var conv2d(const Var& x, const Var& W, const Var& b, int pad);
Var maxpool2(const Var& x);
Var avgpool2(const Var& x);
Var upsample2(const Var& x);
Var global_avg_pool(const Var& x); // [n,c,h,w] -> [n,c]
Var concat_c(const Var& a, const Var& b);
Var slice_c(const Var& x, int c0, int len);
// per-channel affine from vectors: y[n,c,:,:] = x * (1 + s[n,c]) + t[n,c]
Var film(const Var& x, const Var& s, const Var& t);

Var bilinear_resize(const Var& x, int oh, int ow); // half-pixel centers
Var pad_replicate(const Var& x, int r);
// valid 1-D convs shrinking a padded tensor back; kernel k:[1,K,1,1], K=2r+1
Var conv1d_h(const Var& x, const Var& k);
Var conv1d_v(const Var& x, const Var& k);
// normalized gaussian taps of length 2*radius+1 as a function of sigma (a
// 1-element var); sigma below 1e-4 degenerates to the identity kernel with
// zero sigma-gradient
Var gaussian_kernel(const Var& sigma, int radius);

// Smooth monotone curve from K uniform knots over [0,1]: a cubic B-spline
// through the knot values (reflected end conditions, so f(0)=yk[0] and
// f(1)=yk[K-1]), linear extrapolation outside. Reproduces the identity ramp
// exactly and stays monotone whenever the knot values are increasing.
Var knot_curve(const Var& x, const Var& yk);

// inverse-warp by (translate dx,dy in fractions of size, scale about center)
// with Catmull-Rom resampling and edge replication; smooth in the warp
// parameters, which keeps finite-difference checks meaningful
Var warp_affine(const Var& x, const Var& dx, const Var& dy, const Var& s);

// composites
Var mse_loss(const Var& a, const Var& b);
Var l1_loss(const Var& a, const Var& b);
Var sum_squares(const Var& x);
Var euclidean(const Var& a, const Var& b);
Var cosine_sim(const Var& a, const Var& b);

} // namespace affect::nn
