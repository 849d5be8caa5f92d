#pragma once

#include "affect/core/image.hpp"
#include "affect/nn/layers.hpp"

#include <array>
#include <string>

namespace affect::tx {

// Global differentiable edit chain, applied in the fixed order
//   exposure -> color curves -> tone curve -> contrast -> sharpen -> blur
//   -> translate/scale
// Curves are K uniform knots of offsets added to the identity ramp; the knot
// bounds are chosen so any in-bounds offset keeps the curve monotone.
inline constexpr int kCurveKnots = 8;

struct TransformParams {
    double exposure = 0.0;                        // stops
    std::array<double, kCurveKnots> tone_curve{}; // shared luminance curve offsets
    std::array<std::array<double, kCurveKnots>, 3> color_curves{}; // per RGB channel
    double contrast = 1.0;                        // gain about mid-gray
    double sharpen_amount = 0.0;
    double blur_sigma = 0.0;                      // <= 0 acts as identity
    double translate_x = 0.0, translate_y = 0.0;  // fraction of image size
    double scale = 1.0;

    static constexpr int kCount = 1 + kCurveKnots + 3 * kCurveKnots + 1 + 1 + 1 + 2 + 1;
    std::array<double, kCount> flatten() const;
    static TransformParams unflatten(const std::array<double, kCount>& v);

    std::string to_json() const;
    static TransformParams from_json(const std::string& text);
};

struct ParamBounds {
    // per-field boxes; identity values are strictly interior. sharpen and
    // blur admit a small sub-zero range where they act as softening / the
    // identity, which keeps the identity point off the box boundary.
    double exposure_lo = -2.0, exposure_hi = 2.0;
    double curve_lo = -0.07, curve_hi = 0.07;
    double contrast_lo = 0.5, contrast_hi = 2.0;
    double sharpen_lo = -0.5, sharpen_hi = 2.0;
    double blur_lo = -0.25, blur_hi = 5.0;
    double translate_lo = -0.1, translate_hi = 0.1;
    double scale_lo = 0.9, scale_hi = 1.1;

    void validate() const;
    bool contains(const TransformParams& p) const;
};

TransformParams identity_params();

// componentwise projection onto the box; idempotent
TransformParams clamp_params(const TransformParams& p, const ParamBounds& b);

// Leaf variables for one optimization run; also usable to evaluate the chain
// on constants.
struct ParamVars {
    nn::Var exposure, tone, color_r, color_g, color_b, contrast, sharpen, blur, tx, ty, scale;

    static ParamVars leaves(const TransformParams& p, bool requires_grad);
    TransformParams to_params() const;
    std::vector<nn::Var> list() const;
    void project(const ParamBounds& b); // in-place box projection of values
};

// Differentiable chain on a [1,3,H,W] tensor. The returned value is passed
// through softclip01, so loss gradients stay alive slightly past the [0,1]
// range; materialized images are hard-projected instead (apply_transforms).
nn::Var transform_chain(const nn::Var& img, const ParamVars& p);

// Fixed blur radius; sigma stays differentiable through the kernel weights.
inline constexpr int kBlurRadius = 15;
inline constexpr double kSharpenSigma = 1.2;

// Pure application: hard [0,1] projection of the raw chain output. Identity
// parameters reproduce the input exactly.
core::Image apply_transforms(const core::Image& img, const TransformParams& p,
                             const ParamBounds& bounds = ParamBounds{});

// image <-> tensor plumbing shared with the other adapters
nn::Tensor image_to_tensor(const core::Image& img);
core::Image tensor_to_image(const nn::Tensor& t, bool clamp = true);

} // namespace affect::tx
