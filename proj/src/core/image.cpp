#include "affect/core/image.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace affect::core {

std::string to_string(ColorSpace cs) {
    switch (cs) {
        case ColorSpace::RGB: return "RGB";
        case ColorSpace::HSV: return "HSV";
        case ColorSpace::GRAY: return "GRAY";
    }
    return "?";
}

template <class Scalar>
ImageT<Scalar> rgb_to_hsv(const ImageT<Scalar>& img) {
    if (img.color_space != ColorSpace::RGB || img.channels() != 3)
        throw std::invalid_argument("rgb_to_hsv: input must be 3-channel RGB");
    ImageT<Scalar> out(img.height(), img.width(), 3, ColorSpace::HSV);
    const int h = img.height(), w = img.width();
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const Scalar r = img.at(0, y, x), g = img.at(1, y, x), b = img.at(2, y, x);
            const Scalar v = std::max({r, g, b});
            const Scalar mn = std::min({r, g, b});
            const Scalar d = v - mn;
            Scalar hue = 0;
            if (d > Scalar(0)) {
                if (v == r) hue = (g - b) / d;
                else if (v == g) hue = Scalar(2) + (b - r) / d;
                else hue = Scalar(4) + (r - g) / d;
                hue /= Scalar(6);
                if (hue < Scalar(0)) hue += Scalar(1);
            }
            const Scalar s = v > Scalar(0) ? d / v : Scalar(0);
            out.at(0, y, x) = hue;
            out.at(1, y, x) = s;
            out.at(2, y, x) = v;
        }
    return out;
}

template <class Scalar>
ImageT<Scalar> hsv_to_rgb(const ImageT<Scalar>& img) {
    if (img.color_space != ColorSpace::HSV || img.channels() != 3)
        throw std::invalid_argument("hsv_to_rgb: input must be 3-channel HSV");
    ImageT<Scalar> out(img.height(), img.width(), 3, ColorSpace::RGB);
    const int h = img.height(), w = img.width();
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const Scalar hue = img.at(0, y, x) * Scalar(6);
            const Scalar s = img.at(1, y, x), v = img.at(2, y, x);
            const int i = std::min(5, static_cast<int>(std::floor(hue)));
            const Scalar f = hue - Scalar(i);
            const Scalar p = v * (Scalar(1) - s);
            const Scalar q = v * (Scalar(1) - s * f);
            const Scalar t = v * (Scalar(1) - s * (Scalar(1) - f));
            Scalar r, g, b;
            switch (i) {
                case 0: r = v; g = t; b = p; break;
                case 1: r = q; g = v; b = p; break;
                case 2: r = p; g = v; b = t; break;
                case 3: r = p; g = q; b = v; break;
                case 4: r = t; g = p; b = v; break;
                default: r = v; g = p; b = q; break;
            }
            out.at(0, y, x) = r;
            out.at(1, y, x) = g;
            out.at(2, y, x) = b;
        }
    return out;
}

template <class Scalar>
ImageT<Scalar> rgb_to_gray(const ImageT<Scalar>& img) {
    if (img.color_space != ColorSpace::RGB || img.channels() != 3)
        throw std::invalid_argument("rgb_to_gray: input must be 3-channel RGB");
    ImageT<Scalar> out(img.height(), img.width(), 1, ColorSpace::GRAY);
    out.plane(0) = Scalar(0.299) * img.plane(0) + Scalar(0.587) * img.plane(1) +
                   Scalar(0.114) * img.plane(2);
    return out;
}

template <class Scalar>
ImageT<Scalar> gray_to_rgb(const ImageT<Scalar>& img) {
    if (img.color_space != ColorSpace::GRAY || img.channels() != 1)
        throw std::invalid_argument("gray_to_rgb: input must be 1-channel GRAY");
    ImageT<Scalar> out(img.height(), img.width(), 3, ColorSpace::RGB);
    for (int c = 0; c < 3; ++c) out.plane(c) = img.plane(0);
    return out;
}

template <class Scalar>
ImageT<Scalar> convert_color(const ImageT<Scalar>& img, ColorSpace target) {
    if (target == img.color_space)
        throw std::invalid_argument("convert_color: target equals current color space");
    switch (img.color_space) {
        case ColorSpace::RGB:
            return target == ColorSpace::HSV ? rgb_to_hsv(img) : rgb_to_gray(img);
        case ColorSpace::HSV: {
            const ImageT<Scalar> rgb = hsv_to_rgb(img);
            return target == ColorSpace::RGB ? rgb : rgb_to_gray(rgb);
        }
        case ColorSpace::GRAY: {
            const ImageT<Scalar> rgb = gray_to_rgb(img);
            return target == ColorSpace::RGB ? rgb : rgb_to_hsv(rgb);
        }
    }
    throw std::logic_error("convert_color: unreachable");
}

template <class Scalar>
typename ImageT<Scalar>::Plane luminance(const ImageT<Scalar>& img) {
    if (img.channels() == 1) return img.plane(0);
    if (img.color_space == ColorSpace::HSV)
        return luminance(hsv_to_rgb(img));
    return Scalar(0.299) * img.plane(0) + Scalar(0.587) * img.plane(1) + Scalar(0.114) * img.plane(2);
}

template <class Scalar>
ImageT<Scalar> resize_bilinear(const ImageT<Scalar>& img, int out_h, int out_w) {
    if (out_h == img.height() && out_w == img.width()) return img;
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("resize: bad target size");
    ImageT<Scalar> out(out_h, out_w, img.channels(), img.color_space);
    const int h = img.height(), w = img.width();
    const double sy = static_cast<double>(h) / out_h;
    const double sx = static_cast<double>(w) / out_w;
    for (int c = 0; c < img.channels(); ++c) {
        const auto& src = img.plane(c);
        auto& dst = out.plane(c);
        for (int y = 0; y < out_h; ++y) {
            const double fy = (y + 0.5) * sy - 0.5;
            int y0 = static_cast<int>(std::floor(fy));
            const double wy = fy - y0;
            const int y1 = std::clamp(y0 + 1, 0, h - 1);
            y0 = std::clamp(y0, 0, h - 1);
            for (int x = 0; x < out_w; ++x) {
                const double fx = (x + 0.5) * sx - 0.5;
                int x0 = static_cast<int>(std::floor(fx));
                const double wx = fx - x0;
                const int x1 = std::clamp(x0 + 1, 0, w - 1);
                x0 = std::clamp(x0, 0, w - 1);
                const double v = (1 - wy) * ((1 - wx) * src(y0, x0) + wx * src(y0, x1)) +
                                 wy * ((1 - wx) * src(y1, x0) + wx * src(y1, x1));
                dst(y, x) = static_cast<Scalar>(v);
            }
        }
    }
    return out;
}

template <class Scalar>
ImageT<Scalar> gaussian_blur(const ImageT<Scalar>& img, double sigma) {
    if (sigma <= 0.0) return img;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[static_cast<std::size_t>(i + radius)];
    }
    for (auto& v : k) v /= sum;

    const int h = img.height(), w = img.width();
    ImageT<Scalar> out = img;
    for (int c = 0; c < img.channels(); ++c) {
        typename ImageT<Scalar>::Plane tmp(h, w);
        const auto& src = img.plane(c);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += k[static_cast<std::size_t>(i + radius)] * src(y, std::clamp(x + i, 0, w - 1));
                tmp(y, x) = static_cast<Scalar>(acc);
            }
        auto& dst = out.plane(c);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += k[static_cast<std::size_t>(i + radius)] * tmp(std::clamp(y + i, 0, h - 1), x);
                dst(y, x) = static_cast<Scalar>(acc);
            }
    }
    return out;
}

template <class Scalar>
ImageT<Scalar> mirror_horizontal(const ImageT<Scalar>& img) {
    ImageT<Scalar> out = img;
    for (int c = 0; c < img.channels(); ++c) out.plane(c) = img.plane(c).rowwise().reverse();
    return out;
}

template <class Scalar>
double mean_abs_diff(const ImageT<Scalar>& a, const ImageT<Scalar>& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("mean_abs_diff: shape mismatch");
    double acc = 0.0;
    for (int c = 0; c < a.channels(); ++c)
        acc += (a.plane(c) - b.plane(c)).abs().sum();
    return acc / (static_cast<double>(a.channels()) * a.height() * a.width());
}

template <class Scalar>
double mean_sq_diff(const ImageT<Scalar>& a, const ImageT<Scalar>& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("mean_sq_diff: shape mismatch");
    double acc = 0.0;
    for (int c = 0; c < a.channels(); ++c)
        acc += (a.plane(c) - b.plane(c)).square().sum();
    return acc / (static_cast<double>(a.channels()) * a.height() * a.width());
}

template <class Scalar>
double psnr(const ImageT<Scalar>& a, const ImageT<Scalar>& b) {
    const double mse = mean_sq_diff(a, b);
    if (mse <= 0.0) return std::numeric_limits<double>::infinity();
    return -10.0 * std::log10(mse);
}

template class ImageT<double>;
template ImageT<double> rgb_to_hsv<double>(const ImageT<double>&);
template ImageT<double> hsv_to_rgb<double>(const ImageT<double>&);
template ImageT<double> rgb_to_gray<double>(const ImageT<double>&);
template ImageT<double> gray_to_rgb<double>(const ImageT<double>&);
template ImageT<double> convert_color<double>(const ImageT<double>&, ColorSpace);
template ImageT<double>::Plane luminance<double>(const ImageT<double>&);
template ImageT<double> resize_bilinear<double>(const ImageT<double>&, int, int);
template ImageT<double> gaussian_blur<double>(const ImageT<double>&, double);
template ImageT<double> mirror_horizontal<double>(const ImageT<double>&);
template double mean_abs_diff<double>(const ImageT<double>&, const ImageT<double>&);
template double mean_sq_diff<double>(const ImageT<double>&, const ImageT<double>&);
template double psnr<double>(const ImageT<double>&, const ImageT<double>&);

} // namespace affect::core
