#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <vector>

namespace affect::core {

enum class ColorSpace { RGB, HSV, GRAY };

std::string to_string(ColorSpace cs);

// Planar raster with values in [0,1]. Channel planes are row-major H×W Eigen
// arrays so per-plane math stays expression-friendly. C is 1 (GRAY) or 3.
template <class Scalar>
class ImageT {
public:
    using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    ImageT() = default;
    ImageT(int height, int width, int channels, ColorSpace cs = ColorSpace::RGB)
        : color_space(cs), planes_(static_cast<std::size_t>(channels), Plane::Zero(height, width)) {
        if (channels != 1 && channels != 3)
            throw std::invalid_argument("image: channel count must be 1 or 3");
        if (height < 8 || width < 8)
            throw std::invalid_argument("image: minimum size is 8x8");
        if ((channels == 1) != (cs == ColorSpace::GRAY))
            throw std::invalid_argument("image: channel count inconsistent with color space");
    }

    int height() const { return planes_.empty() ? 0 : static_cast<int>(planes_[0].rows()); }
    int width() const { return planes_.empty() ? 0 : static_cast<int>(planes_[0].cols()); }
    int channels() const { return static_cast<int>(planes_.size()); }

    Plane& plane(int c) { return planes_.at(static_cast<std::size_t>(c)); }
    const Plane& plane(int c) const { return planes_.at(static_cast<std::size_t>(c)); }

    Scalar& at(int c, int y, int x) { return plane(c)(y, x); }
    Scalar at(int c, int y, int x) const { return plane(c)(y, x); }

    bool same_shape(const ImageT& o) const {
        return height() == o.height() && width() == o.width() && channels() == o.channels();
    }

    // [0,1] bound and finiteness; throws with a description on violation
    void validate() const;
    // hard projection onto [0,1]
    void clamp01();

    ColorSpace color_space = ColorSpace::RGB;

private:
    std::vector<Plane> planes_;
};

using Image = ImageT<double>;

template <class Scalar>
void ImageT<Scalar>::validate() const {
    if (planes_.empty()) throw std::runtime_error("image: empty");
    for (const auto& p : planes_) {
        if (!p.isFinite().all()) throw std::runtime_error("image: non-finite values");
        if ((p < Scalar(0)).any() || (p > Scalar(1)).any())
            throw std::runtime_error("image: values outside [0,1]");
    }
}

template <class Scalar>
void ImageT<Scalar>::clamp01() {
    for (auto& p : planes_) p = p.min(Scalar(1)).max(Scalar(0));
}

// ---- color conversions ------------------------------------------------------

template <class Scalar>
ImageT<Scalar> rgb_to_hsv(const ImageT<Scalar>& img);
template <class Scalar>
ImageT<Scalar> hsv_to_rgb(const ImageT<Scalar>& img);
template <class Scalar>
ImageT<Scalar> rgb_to_gray(const ImageT<Scalar>& img);
template <class Scalar>
ImageT<Scalar> gray_to_rgb(const ImageT<Scalar>& img);

// Routes through the standard conversions; throws if target == current space.
template <class Scalar>
ImageT<Scalar> convert_color(const ImageT<Scalar>& img, ColorSpace target);

// luminance plane (Rec. 601 weights for RGB; identity for GRAY)
template <class Scalar>
typename ImageT<Scalar>::Plane luminance(const ImageT<Scalar>& img);

// ---- geometry and filtering -------------------------------------------------

// Bilinear resize with half-pixel sample centers (so flips commute with
// resizing). Same-size requests return the input unchanged.
template <class Scalar>
ImageT<Scalar> resize_bilinear(const ImageT<Scalar>& img, int out_h, int out_w);

// Separable gaussian blur, replicated edges; sigma <= 0 is the identity.
template <class Scalar>
ImageT<Scalar> gaussian_blur(const ImageT<Scalar>& img, double sigma);

template <class Scalar>
ImageT<Scalar> mirror_horizontal(const ImageT<Scalar>& img);

// ---- comparisons ------------------------------------------------------------

template <class Scalar>
double mean_abs_diff(const ImageT<Scalar>& a, const ImageT<Scalar>& b);
template <class Scalar>
double mean_sq_diff(const ImageT<Scalar>& a, const ImageT<Scalar>& b);
// PSNR against peak 1.0, in dB
template <class Scalar>
double psnr(const ImageT<Scalar>& a, const ImageT<Scalar>& b);

extern template class ImageT<double>;
extern template ImageT<double> rgb_to_hsv<double>(const ImageT<double>&);
extern template ImageT<double> hsv_to_rgb<double>(const ImageT<double>&);
extern template ImageT<double> rgb_to_gray<double>(const ImageT<double>&);
extern template ImageT<double> gray_to_rgb<double>(const ImageT<double>&);
extern template ImageT<double> convert_color<double>(const ImageT<double>&, ColorSpace);
extern template ImageT<double>::Plane luminance<double>(const ImageT<double>&);
extern template ImageT<double> resize_bilinear<double>(const ImageT<double>&, int, int);
extern template ImageT<double> gaussian_blur<double>(const ImageT<double>&, double);
extern template ImageT<double> mirror_horizontal<double>(const ImageT<double>&);
extern template double mean_abs_diff<double>(const ImageT<double>&, const ImageT<double>&);
extern template double mean_sq_diff<double>(const ImageT<double>&, const ImageT<double>&);
extern template double psnr<double>(const ImageT<double>&, const ImageT<double>&);

} // namespace affect::core
