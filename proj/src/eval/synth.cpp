#include "affect/eval/synth.hpp"

#include "affect/core/image_io.hpp"
#include "affect/metrics/property_metrics.hpp"
#include "affect/util/csv.hpp"
#include "affect/util/rng.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

namespace affect::eval {

namespace fs = std::filesystem;

namespace {

struct Hsv {
    double h, s, v;
};

void fill_gradient(core::Image& img, const Hsv& a, const Hsv& b, double angle, Rng& rng) {
    const int h = img.height(), w = img.width();
    const double ca = std::cos(angle), sa = std::sin(angle);
    core::Image hsv(h, w, 3, core::ColorSpace::HSV);
    const bool radial = rng.uniform() < 0.3;
    const double cx = rng.uniform(0.3, 0.7) * w, cy = rng.uniform(0.3, 0.7) * h;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double t;
            if (radial) {
                t = std::hypot(x - cx, y - cy) / (0.7 * std::hypot(w, h));
            } else {
                t = ((x - w / 2.0) * ca + (y - h / 2.0) * sa) / std::hypot(w, h) + 0.5;
            }
            t = std::clamp(t, 0.0, 1.0);
            hsv.at(0, y, x) = std::fmod(a.h + t * (b.h - a.h) + 1.0, 1.0);
            hsv.at(1, y, x) = std::clamp(a.s + t * (b.s - a.s), 0.0, 1.0);
            hsv.at(2, y, x) = std::clamp(a.v + t * (b.v - a.v), 0.0, 1.0);
        }
    img = core::convert_color(hsv, core::ColorSpace::RGB);
}

void draw_disc(core::Image& img, double cx, double cy, double radius, const Hsv& color) {
    core::Image one(8, 8, 3, core::ColorSpace::HSV);
    one.at(0, 0, 0) = color.h;
    one.at(1, 0, 0) = color.s;
    one.at(2, 0, 0) = color.v;
    const core::Image rgb = core::convert_color(one, core::ColorSpace::RGB);
    const double r = rgb.at(0, 0, 0), g = rgb.at(1, 0, 0), b = rgb.at(2, 0, 0);
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            if (std::hypot(x - cx, y - cy) > radius) continue;
            img.at(0, y, x) = r;
            img.at(1, y, x) = g;
            img.at(2, y, x) = b;
        }
}

void draw_rect(core::Image& img, int x0, int y0, int x1, int y1, const Hsv& color) {
    core::Image one(8, 8, 3, core::ColorSpace::HSV);
    one.at(0, 0, 0) = color.h;
    one.at(1, 0, 0) = color.s;
    one.at(2, 0, 0) = color.v;
    const core::Image rgb = core::convert_color(one, core::ColorSpace::RGB);
    for (int y = std::max(0, y0); y < std::min(img.height(), y1); ++y)
        for (int x = std::max(0, x0); x < std::min(img.width(), x1); ++x) {
            img.at(0, y, x) = rgb.at(0, 0, 0);
            img.at(1, y, x) = rgb.at(1, 0, 0);
            img.at(2, y, x) = rgb.at(2, 0, 0);
        }
}

void add_noise(core::Image& img, double amp, Rng& rng) {
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x)
                img.at(c, y, x) = std::clamp(img.at(c, y, x) + amp * rng.normal(), 0.0, 1.0);
}

core::Image make_affect(int size, Rng& rng, int index, int count) {
    // stratify target brightness/saturation over a grid so labels span the square
    const int grid = std::max(1, static_cast<int>(std::floor(std::sqrt(double(count)))));
    const int gi = index % grid, gj = (index / grid) % grid;
    const double v_target = 0.08 + (0.88 * (gi + rng.uniform(0.1, 0.9))) / grid;
    const double s_target = 0.02 + (0.92 * (gj + rng.uniform(0.1, 0.9))) / grid;

    core::Image img(size, size, 3);
    const double hue = rng.uniform();
    Hsv a{hue, std::clamp(s_target + rng.uniform(-0.15, 0.15), 0.0, 1.0),
          std::clamp(v_target + rng.uniform(-0.12, 0.12), 0.02, 1.0)};
    Hsv b{std::fmod(hue + rng.uniform(0.05, 0.5), 1.0),
          std::clamp(s_target + rng.uniform(-0.15, 0.15), 0.0, 1.0),
          std::clamp(v_target + rng.uniform(-0.12, 0.12), 0.02, 1.0)};
    fill_gradient(img, a, b, rng.uniform(0.0, 2 * M_PI), rng);

    const int shapes = 1 + static_cast<int>(rng.below(3));
    for (int s = 0; s < shapes; ++s) {
        Hsv c{rng.uniform(), std::clamp(s_target + rng.uniform(-0.25, 0.25), 0.0, 1.0),
              std::clamp(v_target + rng.uniform(-0.25, 0.25), 0.02, 1.0)};
        if (rng.uniform() < 0.5) {
            draw_disc(img, rng.uniform(0.2, 0.8) * size, rng.uniform(0.2, 0.8) * size,
                      rng.uniform(0.08, 0.3) * size, c);
        } else {
            const int x0 = static_cast<int>(rng.uniform(0.05, 0.6) * size);
            const int y0 = static_cast<int>(rng.uniform(0.05, 0.6) * size);
            draw_rect(img, x0, y0, x0 + static_cast<int>(rng.uniform(0.1, 0.35) * size),
                      y0 + static_cast<int>(rng.uniform(0.1, 0.35) * size), c);
        }
    }
    img = core::gaussian_blur(img, rng.uniform(0.4, 1.0));
    add_noise(img, 0.01, rng);
    return img;
}

struct ShapeSample {
    core::Image image;
    std::string caption;
};

ShapeSample make_shape(int size, Rng& rng) {
    ShapeSample out;
    core::Image img(size, size, 3);
    const bool circle_class = rng.uniform() < 0.5;
    if (circle_class) {
        // bright warm disc on a dark background
        Hsv bg{rng.uniform(0.5, 0.7), rng.uniform(0.2, 0.5), rng.uniform(0.05, 0.25)};
        Hsv fg{rng.uniform(0.0, 0.2), rng.uniform(0.5, 0.9), rng.uniform(0.75, 1.0)};
        fill_gradient(img, bg, bg, 0.0, rng);
        draw_disc(img, rng.uniform(0.35, 0.65) * size, rng.uniform(0.35, 0.65) * size,
                  rng.uniform(0.18, 0.3) * size, fg);
        out.caption = "a bright circle on a dark background";
    } else {
        // dark cool square on a bright background
        Hsv bg{rng.uniform(0.1, 0.2), rng.uniform(0.1, 0.4), rng.uniform(0.75, 0.98)};
        Hsv fg{rng.uniform(0.55, 0.7), rng.uniform(0.4, 0.9), rng.uniform(0.05, 0.3)};
        fill_gradient(img, bg, bg, 0.0, rng);
        const int half = static_cast<int>(rng.uniform(0.16, 0.28) * size);
        const int cx = static_cast<int>(rng.uniform(0.35, 0.65) * size);
        const int cy = static_cast<int>(rng.uniform(0.35, 0.65) * size);
        draw_rect(img, cx - half, cy - half, cx + half, cy + half, fg);
        out.caption = "a dark square on a bright background";
    }
    img = core::gaussian_blur(img, 0.6);
    add_noise(img, 0.008, rng);
    out.image = img;
    return out;
}

} // namespace

core::Image synth_affect_image(int size, std::uint64_t seed) {
    Rng rng(splitmix64(seed));
    return make_affect(size, rng, static_cast<int>(seed % 64), 64);
}

core::DatasetManifest synth_corpus(const std::string& kind, int count, int size,
                                   std::uint64_t seed, const std::string& out_dir) {
    if (count < 1) throw std::invalid_argument("synth: count must be positive");
    fs::create_directories(out_dir);

    csv::Table manifest;
    manifest.header = {"path", "valence", "arousal", "dataset", "caption"};

    Rng root(splitmix64(seed ^ 0x51AB5ULL));
    for (int i = 0; i < count; ++i) {
        Rng rng = root.fork(static_cast<std::uint64_t>(i));
        core::Image img;
        std::string caption;
        if (kind == "affect") {
            img = make_affect(size, rng, i, count);
        } else if (kind == "shapes") {
            auto s = make_shape(size, rng);
            img = s.image;
            caption = s.caption;
        } else {
            throw std::invalid_argument("synth: unknown kind " + kind);
        }
        char name[32];
        std::snprintf(name, sizeof(name), "%s_%04d.png", kind.c_str(), i);
        const fs::path file = fs::path(out_dir) / name;
        core::save_png(img, file.string());

        // labels measured on the quantized file, via the metric oracles
        const core::Image saved = core::load_image(file.string());
        const double v = metrics::brightness(saved);
        const double a = metrics::saturation(saved);
        manifest.rows.push_back({name, csv::format_number(v), csv::format_number(a), "synth",
                                 caption});
    }
    csv::Table scales;
    scales.header = {"dataset", "min", "max"};
    scales.rows.push_back({"synth", "0", "1"});

    const fs::path mpath = fs::path(out_dir) / "manifest.csv";
    const fs::path spath = fs::path(out_dir) / "scales.csv";
    csv::write_file(mpath.string(), manifest);
    csv::write_file(spath.string(), scales);

    return core::normalize_ratings(core::ingest_manifest(mpath.string(), spath.string()));
}

} // namespace affect::eval
