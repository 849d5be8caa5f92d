#include "affect/metrics/property_metrics.hpp"

#include "affect/util/csv.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace affect::metrics {

namespace {

core::Image canonical(const core::Image& img) {
    core::Image rgb = img;
    if (img.color_space == core::ColorSpace::HSV) rgb = core::convert_color(img, core::ColorSpace::RGB);
    else if (img.channels() == 1) rgb = core::gray_to_rgb(img);
    // anti-alias prefilter sized to the downscale ratio, so inputs of
    // different resolutions land on the analysis grid with matched bandwidth
    const double ratio = std::max(rgb.height(), rgb.width()) / static_cast<double>(kAnalysisSize);
    if (ratio > 1.0) rgb = core::gaussian_blur(rgb, ratio);
    return core::resize_bilinear(rgb, kAnalysisSize, kAnalysisSize);
}

PlaneXd to_plane(const core::ImageT<double>::Plane& p) { return p; }

PlaneXd luminance_plane(const core::Image& img) { return to_plane(core::luminance(img)); }

PlaneXd box_blur_1d(const PlaneXd& x, int radius, bool horizontal) {
    const Eigen::Index rows = x.rows(), cols = x.cols();
    PlaneXd out(rows, cols);
    const double inv = 1.0 / (2 * radius + 1);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) {
            double acc = 0;
            for (int t = -radius; t <= radius; ++t) {
                Eigen::Index rr = r, cc = c;
                if (horizontal) cc = std::clamp<Eigen::Index>(c + t, 0, cols - 1);
                else rr = std::clamp<Eigen::Index>(r + t, 0, rows - 1);
                acc += x(rr, cc);
            }
            out(r, c) = acc * inv;
        }
    return out;
}

PlaneXd gauss_blur_plane(const PlaneXd& x, double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0;
    for (int i = -radius; i <= radius; ++i) {
        k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[static_cast<std::size_t>(i + radius)];
    }
    for (auto& v : k) v /= sum;
    const Eigen::Index rows = x.rows(), cols = x.cols();
    PlaneXd tmp(rows, cols), out(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) {
            double acc = 0;
            for (int t = -radius; t <= radius; ++t)
                acc += k[static_cast<std::size_t>(t + radius)] *
                       x(r, std::clamp<Eigen::Index>(c + t, 0, cols - 1));
            tmp(r, c) = acc;
        }
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) {
            double acc = 0;
            for (int t = -radius; t <= radius; ++t)
                acc += k[static_cast<std::size_t>(t + radius)] *
                       tmp(std::clamp<Eigen::Index>(r + t, 0, rows - 1), c);
            out(r, c) = acc;
        }
    return out;
}

} // namespace

std::vector<std::string> PropertyReport::csv_header() {
    return {"image",        "brightness", "saturation", "colorfulness",
            "contrast",     "blur",       "edge_orientation_entropy",
            "lowfreq_energy", "symmetry",  "extractor"};
}

std::vector<std::string> PropertyReport::csv_row() const {
    using csv::format_number;
    return {image_id,
            format_number(brightness),
            format_number(saturation),
            format_number(colorfulness),
            format_number(contrast),
            format_number(blur),
            format_number(edge_orientation_entropy),
            format_number(lowfreq_energy),
            format_number(symmetry),
            extractor};
}

double brightness(const core::Image& img) {
    const core::Image c = canonical(img);
    // HSV value channel is the per-pixel max over RGB
    double acc = 0;
    for (int y = 0; y < c.height(); ++y)
        for (int x = 0; x < c.width(); ++x)
            acc += std::max({c.at(0, y, x), c.at(1, y, x), c.at(2, y, x)});
    return acc / (static_cast<double>(c.height()) * c.width());
}

double saturation(const core::Image& img) {
    const core::Image c = canonical(img);
    double acc = 0;
    for (int y = 0; y < c.height(); ++y)
        for (int x = 0; x < c.width(); ++x) {
            const double v = std::max({c.at(0, y, x), c.at(1, y, x), c.at(2, y, x)});
            const double m = std::min({c.at(0, y, x), c.at(1, y, x), c.at(2, y, x)});
            acc += v > 0 ? (v - m) / v : 0.0;
        }
    return acc / (static_cast<double>(c.height()) * c.width());
}

double colorfulness(const core::Image& img) {
    const core::Image c = canonical(img);
    const Eigen::Index n = static_cast<Eigen::Index>(c.height()) * c.width();
    double mean_rg = 0, mean_yb = 0, m2_rg = 0, m2_yb = 0;
    for (int y = 0; y < c.height(); ++y)
        for (int x = 0; x < c.width(); ++x) {
            const double rg = c.at(0, y, x) - c.at(1, y, x);
            const double yb = 0.5 * (c.at(0, y, x) + c.at(1, y, x)) - c.at(2, y, x);
            mean_rg += rg;
            mean_yb += yb;
            m2_rg += rg * rg;
            m2_yb += yb * yb;
        }
    mean_rg /= n;
    mean_yb /= n;
    const double var_rg = std::max(0.0, m2_rg / n - mean_rg * mean_rg);
    const double var_yb = std::max(0.0, m2_yb / n - mean_yb * mean_yb);
    return std::sqrt(var_rg + var_yb) + 0.3 * std::sqrt(mean_rg * mean_rg + mean_yb * mean_yb);
}

double contrast(const core::Image& img) {
    const PlaneXd lum = luminance_plane(canonical(img));
    // lowpass stack; band k lives between sigma_{k-1} and sigma_k
    const double sigmas[4] = {1.0, 2.0, 4.0, 8.0};
    PlaneXd prev = lum;
    double acc = 0;
    for (double sg : sigmas) {
        const PlaneXd low = gauss_blur_plane(lum, sg);
        const PlaneXd band = prev - low;
        const PlaneXd local = band / low.max(0.05); // floor rejects dark-region blowups
        acc += std::sqrt(local.square().mean());
        prev = low;
    }
    return acc / 4.0;
}

double blur(const core::Image& img) {
    const PlaneXd f = luminance_plane(canonical(img));
    const int r = 4; // 9-tap mean filter

    auto direction_score = [&](bool horizontal) {
        const PlaneXd b = box_blur_1d(f, r, horizontal);
        double s_f = 0, s_v = 0;
        const Eigen::Index rows = f.rows(), cols = f.cols();
        for (Eigen::Index y = horizontal ? 0 : 1; y < rows; ++y)
            for (Eigen::Index x = horizontal ? 1 : 0; x < cols; ++x) {
                const double df = horizontal ? std::abs(f(y, x) - f(y, x - 1))
                                             : std::abs(f(y, x) - f(y - 1, x));
                const double db = horizontal ? std::abs(b(y, x) - b(y, x - 1))
                                             : std::abs(b(y, x) - b(y - 1, x));
                s_f += df;
                s_v += std::max(0.0, df - db);
            }
        if (s_f <= 0) return 1.0; // no variation: nothing sharp to lose
        return std::clamp((s_f - s_v) / s_f, 0.0, 1.0);
    };
    return std::max(direction_score(true), direction_score(false));
}

double edge_orientation_entropy(const core::Image& img) {
    const PlaneXd lum = luminance_plane(canonical(img));
    const Eigen::Index rows = lum.rows(), cols = lum.cols();
    std::vector<double> mag;
    std::vector<double> ang;
    mag.reserve(static_cast<std::size_t>((rows - 2) * (cols - 2)));
    for (Eigen::Index y = 1; y + 1 < rows; ++y)
        for (Eigen::Index x = 1; x + 1 < cols; ++x) {
            const double gx = (lum(y - 1, x + 1) + 2 * lum(y, x + 1) + lum(y + 1, x + 1)) -
                              (lum(y - 1, x - 1) + 2 * lum(y, x - 1) + lum(y + 1, x - 1));
            const double gy = (lum(y + 1, x - 1) + 2 * lum(y + 1, x) + lum(y + 1, x + 1)) -
                              (lum(y - 1, x - 1) + 2 * lum(y - 1, x) + lum(y - 1, x + 1));
            mag.push_back(std::hypot(gx, gy));
            double a = std::atan2(gy, gx);
            if (a < 0) a += M_PI; // orientations live on [0, pi)
            if (a >= M_PI) a -= M_PI;
            ang.push_back(a);
        }
    std::vector<double> sorted = mag;
    const std::size_t q = static_cast<std::size_t>(0.9 * (sorted.size() - 1));
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(q), sorted.end());
    const double thresh = sorted[q];
    if (thresh <= 0) return 0.0;

    constexpr int kBins = 16;
    double hist[kBins] = {};
    double total = 0;
    for (std::size_t i = 0; i < mag.size(); ++i) {
        if (mag[i] <= thresh) continue;
        int bin = static_cast<int>(ang[i] / M_PI * kBins);
        bin = std::clamp(bin, 0, kBins - 1);
        hist[bin] += 1.0;
        total += 1.0;
    }
    if (total <= 0) return 0.0;
    double h = 0;
    for (double c : hist) {
        if (c <= 0) continue;
        const double p = c / total;
        h -= p * std::log2(p);
    }
    return h;
}

double lowfreq_energy_raw(const core::Image& img) {
    const core::Image c = canonical(img);
    std::vector<PlaneXd> planes;
    for (int ch = 0; ch < 3; ++ch) planes.push_back(to_plane(c.plane(ch)));
    planes.push_back(luminance_plane(c));
    double acc = 0;
    for (const auto& p : planes) {
        const DwtPyramid pyr = dwt_pyramid(p, 4);
        acc += detail_energy(pyr.levels[2]) + detail_energy(pyr.levels[3]);
    }
    return acc;
}

double lowfreq_energy(const core::Image& img, const CorpusStats& stats) {
    if (stats.lowfreq_std <= 0) throw std::invalid_argument("lowfreq: degenerate corpus std");
    return (lowfreq_energy_raw(img) - stats.lowfreq_mean) / stats.lowfreq_std;
}

CorpusStats compute_corpus_stats(const std::vector<double>& raw) {
    if (raw.size() < 2) throw std::invalid_argument("corpus stats: need at least two images");
    CorpusStats s;
    s.n = static_cast<int>(raw.size());
    for (double v : raw) s.lowfreq_mean += v;
    s.lowfreq_mean /= s.n;
    double var = 0;
    for (double v : raw) var += (v - s.lowfreq_mean) * (v - s.lowfreq_mean);
    var /= s.n;
    s.lowfreq_std = std::sqrt(var);
    if (s.lowfreq_std <= 0)
        throw std::invalid_argument("corpus stats: zero variance across corpus");
    return s;
}

GaborBank::GaborBank() {
    constexpr int kSize = 15;
    constexpr double sigma = 3.0, lambda = 8.0, gamma = 0.8;
    const int r = kSize / 2;
    for (int o = 0; o < 4; ++o) {
        const double theta = o * M_PI / 4.0;
        PlaneXd k(kSize, kSize);
        for (int y = -r; y <= r; ++y)
            for (int x = -r; x <= r; ++x) {
                const double xr = x * std::cos(theta) + y * std::sin(theta);
                const double yr = -x * std::sin(theta) + y * std::cos(theta);
                k(y + r, x + r) = std::exp(-(xr * xr + gamma * gamma * yr * yr) / (2 * sigma * sigma)) *
                                  std::cos(2.0 * M_PI * xr / lambda);
            }
        k -= k.mean(); // zero-mean taps: responses ignore flat offsets
        kernels_.push_back(std::move(k));
    }
}

int GaborBank::mirror_channel(int c) const {
    static const int pair[4] = {0, 3, 2, 1};
    return pair[c];
}

PlaneXd GaborBank::feature_map(const core::Image& img, int channel) const {
    const PlaneXd lum = luminance_plane(canonical(img));
    const PlaneXd& k = kernels_.at(static_cast<std::size_t>(channel));
    const int r = static_cast<int>(k.rows()) / 2;
    const Eigen::Index rows = lum.rows(), cols = lum.cols();
    PlaneXd out(rows, cols);
    for (Eigen::Index y = 0; y < rows; ++y)
        for (Eigen::Index x = 0; x < cols; ++x) {
            double acc = 0;
            for (int dy = -r; dy <= r; ++dy) {
                const Eigen::Index yy = std::clamp<Eigen::Index>(y + dy, 0, rows - 1);
                for (int dx = -r; dx <= r; ++dx) {
                    const Eigen::Index xx = std::clamp<Eigen::Index>(x + dx, 0, cols - 1);
                    acc += k(dy + r, dx + r) * lum(yy, xx);
                }
            }
            out(y, x) = std::abs(acc);
        }
    return out;
}

double symmetry(const core::Image& img, const SymmetryFeatures& features) {
    const int C = features.channels();
    double sum_a = 0, sum_b = 0, sum_aa = 0, sum_bb = 0, sum_ab = 0;
    Eigen::Index count = 0;
    for (int c = 0; c < C; ++c) {
        const PlaneXd fa = features.feature_map(img, c);
        const PlaneXd fb = features.feature_map(img, features.mirror_channel(c));
        const Eigen::Index rows = fa.rows(), cols = fa.cols();
        const Eigen::Index half = cols / 2;
        for (Eigen::Index y = 0; y < rows; ++y)
            for (Eigen::Index x = 0; x < half; ++x) {
                const double a = fa(y, x);
                const double b = fb(y, cols - 1 - x);
                sum_a += a;
                sum_b += b;
                sum_aa += a * a;
                sum_bb += b * b;
                sum_ab += a * b;
                ++count;
            }
    }
    const double n = static_cast<double>(count);
    const double cov = sum_ab / n - (sum_a / n) * (sum_b / n);
    const double va = sum_aa / n - (sum_a / n) * (sum_a / n);
    const double vb = sum_bb / n - (sum_b / n) * (sum_b / n);
    double r;
    if (va < 1e-18 || vb < 1e-18) {
        // flat responses: identical halves count as fully symmetric
        r = std::abs(sum_a / n - sum_b / n) < 1e-12 ? 1.0 : 0.0;
    } else {
        r = cov / std::sqrt(va * vb);
    }
    return std::clamp(0.5 * (r + 1.0), 0.0, 1.0);
}

PropertyReport report(const core::Image& img, const CorpusStats& stats,
                      const SymmetryFeatures& features, const std::string& image_id) {
    PropertyReport rep;
    rep.image_id = image_id;
    rep.brightness = brightness(img);
    rep.saturation = saturation(img);
    rep.colorfulness = colorfulness(img);
    rep.contrast = contrast(img);
    rep.blur = blur(img);
    rep.edge_orientation_entropy = edge_orientation_entropy(img);
    rep.lowfreq_energy = lowfreq_energy(img, stats);
    rep.symmetry = symmetry(img, features);
    rep.extractor = features.name();
    return rep;
}

} // namespace affect::metrics
