#include "affect/transforms/diff_transforms.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace affect::tx {

using nn::Var;

std::array<double, TransformParams::kCount> TransformParams::flatten() const {
    std::array<double, kCount> v{};
    int i = 0;
    v[i++] = exposure;
    for (double t : tone_curve) v[i++] = t;
    for (const auto& ch : color_curves)
        for (double t : ch) v[i++] = t;
    v[i++] = contrast;
    v[i++] = sharpen_amount;
    v[i++] = blur_sigma;
    v[i++] = translate_x;
    v[i++] = translate_y;
    v[i++] = scale;
    return v;
}

TransformParams TransformParams::unflatten(const std::array<double, kCount>& v) {
    TransformParams p;
    int i = 0;
    p.exposure = v[i++];
    for (double& t : p.tone_curve) t = v[i++];
    for (auto& ch : p.color_curves)
        for (double& t : ch) t = v[i++];
    p.contrast = v[i++];
    p.sharpen_amount = v[i++];
    p.blur_sigma = v[i++];
    p.translate_x = v[i++];
    p.translate_y = v[i++];
    p.scale = v[i++];
    return p;
}

std::string TransformParams::to_json() const {
    nlohmann::json j;
    j["exposure"] = exposure;
    j["tone_curve"] = tone_curve;
    j["color_curves"] = color_curves;
    j["contrast"] = contrast;
    j["sharpen_amount"] = sharpen_amount;
    j["blur_sigma"] = blur_sigma;
    j["translate"] = {translate_x, translate_y};
    j["scale"] = scale;
    return j.dump(2);
}

TransformParams TransformParams::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    TransformParams p;
    p.exposure = j.value("exposure", 0.0);
    if (j.contains("tone_curve")) p.tone_curve = j["tone_curve"].get<std::array<double, kCurveKnots>>();
    if (j.contains("color_curves"))
        p.color_curves = j["color_curves"].get<std::array<std::array<double, kCurveKnots>, 3>>();
    p.contrast = j.value("contrast", 1.0);
    p.sharpen_amount = j.value("sharpen_amount", 0.0);
    p.blur_sigma = j.value("blur_sigma", 0.0);
    if (j.contains("translate")) {
        p.translate_x = j["translate"][0].get<double>();
        p.translate_y = j["translate"][1].get<double>();
    }
    p.scale = j.value("scale", 1.0);
    return p;
}

void ParamBounds::validate() const {
    auto chk = [](double lo, double hi, const char* what) {
        if (!(lo < hi)) throw std::invalid_argument(std::string("bounds: lo >= hi for ") + what);
    };
    chk(exposure_lo, exposure_hi, "exposure");
    chk(curve_lo, curve_hi, "curves");
    chk(contrast_lo, contrast_hi, "contrast");
    chk(sharpen_lo, sharpen_hi, "sharpen");
    chk(blur_lo, blur_hi, "blur");
    chk(translate_lo, translate_hi, "translate");
    chk(scale_lo, scale_hi, "scale");
    const TransformParams id = identity_params();
    auto interior = [](double v, double lo, double hi) { return v > lo && v < hi; };
    if (!interior(id.exposure, exposure_lo, exposure_hi) ||
        !interior(id.contrast, contrast_lo, contrast_hi) ||
        !interior(id.sharpen_amount, sharpen_lo, sharpen_hi) ||
        !interior(id.blur_sigma, blur_lo, blur_hi) ||
        !interior(id.translate_x, translate_lo, translate_hi) ||
        !interior(id.scale, scale_lo, scale_hi) || !interior(0.0, curve_lo, curve_hi))
        throw std::invalid_argument("bounds: identity parameters must be strictly interior");
    // monotone-by-construction condition for the curves: worst-case offset
    // difference must not cancel the knot spacing
    if (curve_hi - curve_lo >= 1.0 / (kCurveKnots - 1))
        throw std::invalid_argument("bounds: curve offsets too wide for monotonicity");
}

bool ParamBounds::contains(const TransformParams& p) const {
    auto in = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
    bool ok = in(p.exposure, exposure_lo, exposure_hi) && in(p.contrast, contrast_lo, contrast_hi) &&
              in(p.sharpen_amount, sharpen_lo, sharpen_hi) && in(p.blur_sigma, blur_lo, blur_hi) &&
              in(p.translate_x, translate_lo, translate_hi) &&
              in(p.translate_y, translate_lo, translate_hi) && in(p.scale, scale_lo, scale_hi);
    for (double t : p.tone_curve) ok = ok && in(t, curve_lo, curve_hi);
    for (const auto& ch : p.color_curves)
        for (double t : ch) ok = ok && in(t, curve_lo, curve_hi);
    return ok;
}

TransformParams identity_params() { return TransformParams{}; }

TransformParams clamp_params(const TransformParams& p, const ParamBounds& b) {
    TransformParams q = p;
    auto cl = [](double v, double lo, double hi) { return std::clamp(v, lo, hi); };
    q.exposure = cl(p.exposure, b.exposure_lo, b.exposure_hi);
    for (double& t : q.tone_curve) t = cl(t, b.curve_lo, b.curve_hi);
    for (auto& ch : q.color_curves)
        for (double& t : ch) t = cl(t, b.curve_lo, b.curve_hi);
    q.contrast = cl(p.contrast, b.contrast_lo, b.contrast_hi);
    q.sharpen_amount = cl(p.sharpen_amount, b.sharpen_lo, b.sharpen_hi);
    q.blur_sigma = cl(p.blur_sigma, b.blur_lo, b.blur_hi);
    q.translate_x = cl(p.translate_x, b.translate_lo, b.translate_hi);
    q.translate_y = cl(p.translate_y, b.translate_lo, b.translate_hi);
    q.scale = cl(p.scale, b.scale_lo, b.scale_hi);
    return q;
}

namespace {

nn::Tensor vec_tensor(const double* v, int n) {
    nn::Tensor t(nn::Shape{1, n, 1, 1});
    for (int i = 0; i < n; ++i) t.data[i] = v[i];
    return t;
}

} // namespace

ParamVars ParamVars::leaves(const TransformParams& p, bool requires_grad) {
    ParamVars vars;
    auto leaf1 = [&](double v) { return Var::leaf(nn::Tensor::scalar(v), requires_grad); };
    vars.exposure = leaf1(p.exposure);
    vars.tone = Var::leaf(vec_tensor(p.tone_curve.data(), kCurveKnots), requires_grad);
    vars.color_r = Var::leaf(vec_tensor(p.color_curves[0].data(), kCurveKnots), requires_grad);
    vars.color_g = Var::leaf(vec_tensor(p.color_curves[1].data(), kCurveKnots), requires_grad);
    vars.color_b = Var::leaf(vec_tensor(p.color_curves[2].data(), kCurveKnots), requires_grad);
    vars.contrast = leaf1(p.contrast);
    vars.sharpen = leaf1(p.sharpen_amount);
    vars.blur = leaf1(p.blur_sigma);
    vars.tx = leaf1(p.translate_x);
    vars.ty = leaf1(p.translate_y);
    vars.scale = leaf1(p.scale);
    return vars;
}

TransformParams ParamVars::to_params() const {
    TransformParams p;
    p.exposure = exposure.scalar_value();
    for (int i = 0; i < kCurveKnots; ++i) {
        p.tone_curve[static_cast<std::size_t>(i)] = tone.value().data[i];
        p.color_curves[0][static_cast<std::size_t>(i)] = color_r.value().data[i];
        p.color_curves[1][static_cast<std::size_t>(i)] = color_g.value().data[i];
        p.color_curves[2][static_cast<std::size_t>(i)] = color_b.value().data[i];
    }
    p.contrast = contrast.scalar_value();
    p.sharpen_amount = sharpen.scalar_value();
    p.blur_sigma = blur.scalar_value();
    p.translate_x = tx.scalar_value();
    p.translate_y = ty.scalar_value();
    p.scale = scale.scalar_value();
    return p;
}

std::vector<Var> ParamVars::list() const {
    return {exposure, tone, color_r, color_g, color_b, contrast, sharpen, blur, tx, ty, scale};
}

void ParamVars::project(const ParamBounds& b) {
    const TransformParams q = clamp_params(to_params(), b);
    const ParamVars fresh = leaves(q, false);
    auto copy_val = [](const Var& dst, const Var& src) { dst.node()->value.data = src.value().data; };
    copy_val(exposure, fresh.exposure);
    copy_val(tone, fresh.tone);
    copy_val(color_r, fresh.color_r);
    copy_val(color_g, fresh.color_g);
    copy_val(color_b, fresh.color_b);
    copy_val(contrast, fresh.contrast);
    copy_val(sharpen, fresh.sharpen);
    copy_val(blur, fresh.blur);
    copy_val(tx, fresh.tx);
    copy_val(ty, fresh.ty);
    copy_val(scale, fresh.scale);
}

namespace {

Var identity_ramp() {
    nn::Tensor t(nn::Shape{1, kCurveKnots, 1, 1});
    for (int i = 0; i < kCurveKnots; ++i) t.data[i] = static_cast<double>(i) / (kCurveKnots - 1);
    return Var::constant(std::move(t));
}

Var blur_with_kernel(const Var& x, const Var& kernel, int radius) {
    Var padded = nn::pad_replicate(x, radius);
    return nn::conv1d_v(nn::conv1d_h(padded, kernel), kernel);
}

Var chain_raw(const Var& img, const ParamVars& p) {
    // exposure (gain in stops)
    Var y = nn::mul(img, nn::exp2_op(p.exposure));

    // per-channel color curves
    const Var ramp = identity_ramp();
    const Var curves[3] = {nn::add(ramp, p.color_r), nn::add(ramp, p.color_g),
                           nn::add(ramp, p.color_b)};
    Var chans[3];
    for (int c = 0; c < 3; ++c)
        chans[c] = nn::knot_curve(nn::slice_c(y, c, 1), curves[c]);
    y = nn::concat_c(nn::concat_c(chans[0], chans[1]), chans[2]);

    // shared tone curve
    y = nn::knot_curve(y, nn::add(ramp, p.tone));

    // contrast about mid-gray
    y = nn::add_const(nn::mul(nn::add_const(y, -0.5), p.contrast), 0.5);

    // unsharp mask with a fixed small radius; amount may be negative (soften)
    const int sharpen_radius = static_cast<int>(std::ceil(3.0 * kSharpenSigma));
    Var base = blur_with_kernel(y, nn::gaussian_kernel(Var::scalar(kSharpenSigma), sharpen_radius),
                                sharpen_radius);
    y = nn::add(y, nn::mul(nn::sub(y, base), p.sharpen));

    // variable-sigma gaussian blur
    y = blur_with_kernel(y, nn::gaussian_kernel(p.blur, kBlurRadius), kBlurRadius);

    // translate + scale, smooth resampling with replicated edges
    y = nn::warp_affine(y, p.tx, p.ty, p.scale);
    return y;
}

} // namespace

Var transform_chain(const Var& img, const ParamVars& p) {
    return nn::softclip01(chain_raw(img, p));
}

nn::Tensor image_to_tensor(const core::Image& img) {
    nn::Tensor t(nn::Shape{1, img.channels(), img.height(), img.width()});
    Eigen::Index i = 0;
    for (int c = 0; c < img.channels(); ++c)
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x) t.data[i++] = img.at(c, y, x);
    return t;
}

core::Image tensor_to_image(const nn::Tensor& t, bool clamp) {
    const auto& s = t.shape;
    if (s.n != 1 || (s.c != 1 && s.c != 3))
        throw std::invalid_argument("tensor_to_image: expected [1,{1|3},h,w], got " + s.str());
    core::Image img(s.h, s.w, s.c, s.c == 1 ? core::ColorSpace::GRAY : core::ColorSpace::RGB);
    Eigen::Index i = 0;
    for (int c = 0; c < s.c; ++c)
        for (int y = 0; y < s.h; ++y)
            for (int x = 0; x < s.w; ++x) img.at(c, y, x) = t.data[i++];
    if (clamp) img.clamp01();
    return img;
}

core::Image apply_transforms(const core::Image& img, const TransformParams& p,
                             const ParamBounds& bounds) {
    bounds.validate();
    if (!bounds.contains(p)) throw std::invalid_argument("apply_transforms: parameters out of bounds");
    if (img.channels() != 3 || img.color_space != core::ColorSpace::RGB)
        throw std::invalid_argument("apply_transforms: expected RGB input");
    const ParamVars vars = ParamVars::leaves(p, false);
    const Var x = Var::constant(image_to_tensor(img));
    const Var y = chain_raw(x, vars);
    return tensor_to_image(y.value(), /*clamp=*/true);
}

} // namespace affect::tx
