#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "affect/eval/synth.hpp"
#include "affect/metrics/property_metrics.hpp"
#include "support/testutil.hpp"

#include <cmath>

using namespace affect;
using namespace affect::metrics;

namespace {

core::Image constant_image(int size, double r, double g, double b) {
    core::Image img(size, size, 3);
    img.plane(0).setConstant(r);
    img.plane(1).setConstant(g);
    img.plane(2).setConstant(b);
    return img;
}

core::Image checkerboard(int size, int cell, double lo, double hi) {
    core::Image img(size, size, 3);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double v = ((x / cell + y / cell) % 2) ? hi : lo;
            for (int c = 0; c < 3; ++c) img.at(c, y, x) = v;
        }
    return img;
}

core::Image grating(int size, double period) {
    core::Image img(size, size, 3);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double v = 0.5 + 0.45 * std::sin(2 * M_PI * y / period);
            for (int c = 0; c < 3; ++c) img.at(c, y, x) = v;
        }
    return img;
}

core::Image noise_image(int size, Rng& rng) {
    core::Image img(size, size, 3);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) img.at(c, y, x) = rng.uniform();
    return img;
}

// naturalistic test image: smooth multi-scale content
core::Image naturalish(int size, std::uint64_t seed) {
    Rng rng(seed);
    core::Image img = eval::synth_affect_image(size, seed);
    return core::gaussian_blur(img, 1.0);
}

} // namespace

TEST_CASE("brightness endpoints and constants") {
    CHECK(brightness(constant_image(32, 0, 0, 0)) == doctest::Approx(0.0));
    CHECK(brightness(constant_image(32, 1, 1, 1)) == doctest::Approx(1.0));
    CHECK(brightness(constant_image(32, 0.3, 0.3, 0.3)) == doctest::Approx(0.3).epsilon(1e-9));
}

TEST_CASE("grayscale forces colorfulness and saturation to zero; pure red saturates") {
    Rng rng(1);
    core::Image img = testutil::random_image(48, 48, rng);
    const core::Image gray = core::gray_to_rgb(core::rgb_to_gray(img));
    CHECK(colorfulness(gray) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(saturation(gray) == doctest::Approx(0.0).epsilon(1e-12));

    CHECK(saturation(constant_image(32, 1, 0, 0)) == doctest::Approx(1.0));
}

TEST_CASE("colorfulness matches a literal two-pass recomputation") {
    Rng rng(7);
    for (int t = 0; t < 5; ++t) {
        // analysis-resolution input so the oracle needs no resize
        const core::Image img = noise_image(kAnalysisSize, rng);
        double mean_rg = 0, mean_yb = 0;
        const double n = static_cast<double>(kAnalysisSize) * kAnalysisSize;
        for (int y = 0; y < kAnalysisSize; ++y)
            for (int x = 0; x < kAnalysisSize; ++x) {
                mean_rg += img.at(0, y, x) - img.at(1, y, x);
                mean_yb += 0.5 * (img.at(0, y, x) + img.at(1, y, x)) - img.at(2, y, x);
            }
        mean_rg /= n;
        mean_yb /= n;
        double var_rg = 0, var_yb = 0;
        for (int y = 0; y < kAnalysisSize; ++y)
            for (int x = 0; x < kAnalysisSize; ++x) {
                const double rg = img.at(0, y, x) - img.at(1, y, x) - mean_rg;
                const double yb = 0.5 * (img.at(0, y, x) + img.at(1, y, x)) - img.at(2, y, x) - mean_yb;
                var_rg += rg * rg;
                var_yb += yb * yb;
            }
        const double oracle = std::sqrt(var_rg / n + var_yb / n) +
                              0.3 * std::hypot(mean_rg, mean_yb);
        CHECK(colorfulness(img) == doctest::Approx(oracle).epsilon(1e-9));
    }
}

TEST_CASE("contrast: constant is zero, damping lowers it, checkerboard amplitude orders") {
    CHECK(contrast(constant_image(64, 0.4, 0.4, 0.4)) == doctest::Approx(0.0).epsilon(1e-12));

    const core::Image img = naturalish(128, 99);
    double mean = 0;
    for (int c = 0; c < 3; ++c) mean += img.plane(c).mean();
    mean /= 3.0;
    core::Image damped = img;
    for (int c = 0; c < 3; ++c)
        damped.plane(c) = (0.5 + 0.5 * (img.plane(c) - mean)).min(1.0).max(0.0);
    CHECK(contrast(damped) < contrast(img));

    const core::Image full = checkerboard(128, 8, 0.0, 1.0);
    const core::Image half = checkerboard(128, 8, 0.25, 0.75);
    CHECK(contrast(full) > contrast(half));
}

TEST_CASE("blur is bounded, increases under gaussian blur, monotone in sigma") {
    Rng rng(21);
    for (int t = 0; t < 6; ++t) {
        const core::Image img = noise_image(32 + 16 * t, rng);
        const double b = blur(img);
        CHECK(b >= 0.0);
        CHECK(b <= 1.0);
    }
    const core::Image img = naturalish(128, 5);
    CHECK(blur(core::gaussian_blur(img, 3.0)) > blur(img));

    double prev = -1.0;
    int violations = 0;
    for (double sg : {0.0, 1.0, 2.0, 3.0, 4.0, 5.0}) {
        const double b = blur(sg > 0 ? core::gaussian_blur(img, sg) : img);
        if (b < prev) ++violations;
        prev = b;
    }
    CHECK(violations == 0);
}

TEST_CASE("edge orientation entropy: grating near zero, noise near the 4-bit cap") {
    CHECK(edge_orientation_entropy(grating(128, 16.0)) < 0.2);
    Rng rng(3);
    const double h = edge_orientation_entropy(noise_image(128, rng));
    CHECK(h > 3.8);
    CHECK(h <= 4.0 + 1e-12);
}

TEST_CASE("lowfreq energy z-scores are exact by construction") {
    std::vector<core::Image> corpus;
    std::vector<double> raw;
    for (int i = 0; i < 12; ++i) {
        corpus.push_back(naturalish(96, 100 + i));
        raw.push_back(lowfreq_energy_raw(corpus.back()));
    }
    const CorpusStats stats = compute_corpus_stats(raw);

    double zsum = 0, zsq = 0;
    for (const auto& img : corpus) {
        const double z = lowfreq_energy(img, stats);
        zsum += z;
        zsq += z * z;
    }
    const double n = static_cast<double>(corpus.size());
    CHECK(std::abs(zsum / n) < 1e-9);
    CHECK(std::abs(zsq / n - 1.0) < 1e-9);

    // a corpus member at exactly the mean raw energy scores 0
    CHECK(lowfreq_energy(corpus[0], CorpusStats{raw[0], 1.0, 1}) == doctest::Approx(0.0));

    // constant image has minimal raw coarse energy
    const double flat = lowfreq_energy_raw(constant_image(96, 0.5, 0.5, 0.5));
    for (double r : raw) CHECK(flat <= r);
    CHECK(flat == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("symmetry: mirrored composite maximal, flip-invariant, noise lower") {
    GaborBank bank;
    Rng rng(17);

    // composite [img | mirror(img)] is exactly mirror-symmetric
    const core::Image left = naturalish(64, 7);
    core::Image composite(64, 128, 3);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) {
                composite.at(c, y, x) = left.at(c, y, x);
                composite.at(c, y, 127 - x) = left.at(c, y, x);
            }
    const double s_mirror = symmetry(composite, bank);
    CHECK(s_mirror > 0.95);

    const double s_noise = symmetry(noise_image(128, rng), bank);
    CHECK(s_noise < s_mirror);

    std::vector<core::Image> others;
    for (int i = 0; i < 5; ++i) others.push_back(naturalish(96, 300 + i));
    for (const auto& o : others) CHECK(symmetry(o, bank) <= s_mirror);

    // score invariant to flipping the whole image
    for (const auto& o : others) {
        const double a = symmetry(o, bank);
        const double b = symmetry(core::mirror_horizontal(o), bank);
        CHECK(a == doctest::Approx(b).epsilon(1e-9));
    }
}

TEST_CASE("metrics are deterministic and stable under 2x downsampling") {
    GaborBank bank;
    for (int i = 0; i < 4; ++i) {
        const core::Image img = naturalish(200, 400 + i);
        const core::Image small = core::resize_bilinear(img, 100, 100);

        auto stable = [](double a, double b) {
            return std::abs(a - b) <= 0.02 * std::max({std::abs(a), std::abs(b), 1e-6});
        };
        CHECK(stable(brightness(img), brightness(small)));
        CHECK(stable(saturation(img), saturation(small)));
        CHECK(stable(colorfulness(img), colorfulness(small)));
        CHECK(stable(contrast(img), contrast(small)));
        CHECK(stable(blur(img), blur(small)));
        CHECK(stable(edge_orientation_entropy(img), edge_orientation_entropy(small)));
        CHECK(stable(lowfreq_energy_raw(img), lowfreq_energy_raw(small)));
        CHECK(stable(symmetry(img, bank), symmetry(small, bank)));

        CHECK(brightness(img) == brightness(img)); // determinism
        CHECK(symmetry(img, bank) == symmetry(img, bank));
    }
}

TEST_CASE("report bundles all eight statistics") {
    GaborBank bank;
    std::vector<double> raw;
    std::vector<core::Image> corpus;
    for (int i = 0; i < 4; ++i) {
        corpus.push_back(naturalish(64, 40 + i));
        raw.push_back(lowfreq_energy_raw(corpus.back()));
    }
    const CorpusStats stats = compute_corpus_stats(raw);
    const PropertyReport rep = report(corpus[0], stats, bank, "img0");
    CHECK(rep.image_id == "img0");
    CHECK(rep.extractor == bank.name());
    CHECK(std::isfinite(rep.contrast));
    CHECK(rep.blur >= 0.0);
    CHECK(rep.blur <= 1.0);
    CHECK(rep.symmetry >= 0.0);
    CHECK(rep.symmetry <= 1.0);
    CHECK(rep.edge_orientation_entropy <= 4.0 + 1e-12);
    CHECK(PropertyReport::csv_header().size() == rep.csv_row().size());
}
