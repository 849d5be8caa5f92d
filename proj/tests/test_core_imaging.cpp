#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "affect/core/image.hpp"
#include "affect/core/image_io.hpp"
#include "affect/core/manifest.hpp"
#include "support/png_oracle.hpp"
#include "support/testutil.hpp"

#include <jpeglib.h>

#include <filesystem>
#include <fstream>
#include <iomanip>

using namespace affect;
using namespace affect::core;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("affect_core_test_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write_jpeg_gray(const fs::path& p, int h, int w, std::uint8_t value) {
    jpeg_compress_struct cinfo;
    jpeg_error_mgr jerr;
    cinfo.err = jpeg_std_error(&jerr);
    jpeg_create_compress(&cinfo);
    FILE* fp = fopen(p.string().c_str(), "wb");
    REQUIRE(fp != nullptr);
    jpeg_stdio_dest(&cinfo, fp);
    cinfo.image_width = static_cast<JDIMENSION>(w);
    cinfo.image_height = static_cast<JDIMENSION>(h);
    cinfo.input_components = 1;
    cinfo.in_color_space = JCS_GRAYSCALE;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, 95, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    std::vector<JSAMPLE> row(static_cast<std::size_t>(w), value);
    JSAMPROW rp = row.data();
    while (cinfo.next_scanline < cinfo.image_height) jpeg_write_scanlines(&cinfo, &rp, 1);
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
    fclose(fp);
}

} // namespace

TEST_CASE("png round trip hits the 8-bit scale identities") {
    TempDir tmp;
    Image white(16, 16, 3);
    for (int c = 0; c < 3; ++c) white.plane(c).setConstant(1.0);
    save_png(white, (tmp.path / "white.png").string());
    const Image w = load_image((tmp.path / "white.png").string());
    CHECK(w.plane(0).minCoeff() == 1.0);
    CHECK(w.plane(2).maxCoeff() == 1.0);

    Image black(16, 16, 3);
    save_png(black, (tmp.path / "black.png").string());
    const Image b = load_image((tmp.path / "black.png").string());
    CHECK(b.plane(0).maxCoeff() == 0.0);
}

TEST_CASE("gradient png matches an independent decoder pixel by pixel") {
    TempDir tmp;
    // 16x16 gradient covering every byte value v; expect v/255 after load
    Image img(16, 16, 3);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            const int v = y * 16 + x;
            img.at(0, y, x) = v / 255.0;
            img.at(1, y, x) = (255 - v) / 255.0;
            img.at(2, y, x) = ((v * 7) % 256) / 255.0;
        }
    const auto path = (tmp.path / "grad.png").string();
    save_png(img, path);

    const Image loaded = load_image(path);
    const auto oracle = png_oracle::decode_file(path);
    REQUIRE(oracle.width == 16);
    REQUIRE(oracle.channels == 3);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            for (int c = 0; c < 3; ++c) {
                const double expect = oracle.samples[(static_cast<std::size_t>(y) * 16 + x) * 3 + c] / 255.0;
                CHECK(std::abs(loaded.at(c, y, x) - expect) < 1e-12);
            }
    // and the gradient itself survived quantization exactly
    CHECK(loaded.at(0, 3, 7) == doctest::Approx((3 * 16 + 7) / 255.0));
}

TEST_CASE("jpeg decodes to gray in [0,1]") {
    TempDir tmp;
    write_jpeg_gray(tmp.path / "flat.jpg", 16, 16, 200);
    const Image img = load_image((tmp.path / "flat.jpg").string());
    CHECK(img.channels() == 1);
    CHECK(img.color_space == ColorSpace::GRAY);
    CHECK(img.at(0, 8, 8) == doctest::Approx(200 / 255.0).epsilon(0.02));
    CHECK_NOTHROW(img.validate());
}

TEST_CASE("load errors: missing file, undecodable payload") {
    TempDir tmp;
    CHECK_THROWS(load_image((tmp.path / "nope.png").string()));
    std::ofstream((tmp.path / "junk.png").string()) << "not a png at all";
    CHECK_THROWS(load_image((tmp.path / "junk.png").string()));
}

TEST_CASE("color conversion definitions and round trip") {
    Image red(8, 8, 3);
    red.plane(0).setConstant(1.0);
    const Image hsv = convert_color(red, ColorSpace::HSV);
    CHECK(hsv.at(0, 4, 4) == doctest::Approx(0.0));
    CHECK(hsv.at(1, 4, 4) == doctest::Approx(1.0));
    CHECK(hsv.at(2, 4, 4) == doctest::Approx(1.0));

    Image gray(8, 8, 3);
    for (int c = 0; c < 3; ++c) gray.plane(c).setConstant(0.5);
    const Image ghsv = convert_color(gray, ColorSpace::HSV);
    CHECK(ghsv.at(1, 0, 0) == doctest::Approx(0.0));
    CHECK(ghsv.at(2, 0, 0) == doctest::Approx(0.5));

    // random round trip within 1e-6 per channel
    Rng rng(9);
    const Image img = testutil::random_image(16, 16, rng);
    const Image back = convert_color(convert_color(img, ColorSpace::HSV), ColorSpace::RGB);
    double max_err = 0;
    for (int c = 0; c < 3; ++c)
        max_err = std::max(max_err, (img.plane(c) - back.plane(c)).abs().maxCoeff());
    CHECK(max_err < 1e-6);

    CHECK_THROWS(convert_color(img, ColorSpace::RGB)); // target == current
}

TEST_CASE("loaded images always satisfy the range invariant (fuzz)") {
    TempDir tmp;
    Rng rng(33);
    for (int trial = 0; trial < 10; ++trial) {
        const int h = 8 + static_cast<int>(rng.below(24));
        const int w = 8 + static_cast<int>(rng.below(24));
        Image img = testutil::random_image(h, w, rng);
        const auto p = (tmp.path / ("fuzz" + std::to_string(trial) + ".png")).string();
        save_png(img, p);
        CHECK_NOTHROW(load_image(p).validate());
    }
}

TEST_CASE("manifest ingestion, normalization and error reporting") {
    TempDir tmp;
    // two tiny images the manifest can point at
    Image img(8, 8, 3);
    save_png(img, (tmp.path / "a.png").string());
    save_png(img, (tmp.path / "b.png").string());

    std::ofstream(tmp.path / "scales.csv") << "dataset,min,max\nsetA,1,9\nsetB,0,100\n";
    std::ofstream(tmp.path / "m.csv") << "path,valence,arousal,dataset,caption\n"
                                         "a.png,5,1,setA,\"a caption, with comma\"\n"
                                         "b.png,50,100,setB,\n";
    const auto m = ingest_manifest((tmp.path / "m.csv").string(), (tmp.path / "scales.csv").string());
    REQUIRE(m.entries.size() == 2);
    CHECK(m.entries[0].caption.value() == "a caption, with comma");
    CHECK_FALSE(m.entries[1].caption.has_value());
    CHECK_FALSE(m.normalized);

    const auto n = normalize_ratings(m);
    CHECK(n.normalized);
    CHECK(n.entries[0].valence == doctest::Approx(0.5)); // 5 on [1,9]
    CHECK(n.entries[0].arousal == doctest::Approx(0.0)); // 1 on [1,9]
    CHECK(n.entries[1].valence == doctest::Approx(0.5));
    CHECK(n.entries[1].arousal == doctest::Approx(1.0));

    // idempotent once scales are [0,1]
    const auto nn2 = normalize_ratings(n);
    CHECK(nn2.entries[0].valence == n.entries[0].valence);
    CHECK(nn2.entries[1].arousal == n.entries[1].arousal);

    // malformed row reports its line number
    std::ofstream(tmp.path / "bad.csv") << "path,valence,arousal,dataset,caption\n"
                                           "a.png,oops,1,setA,\n";
    try {
        ingest_manifest((tmp.path / "bad.csv").string(), (tmp.path / "scales.csv").string());
        FAIL("expected malformed-row error");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }

    // unknown dataset rejected
    std::ofstream(tmp.path / "unk.csv") << "path,valence,arousal,dataset,caption\n"
                                           "a.png,1,1,mystery,\n";
    CHECK_THROWS(ingest_manifest((tmp.path / "unk.csv").string(), (tmp.path / "scales.csv").string()));

    // degenerate scale rejected at normalization time
    std::ofstream(tmp.path / "degen_scales.csv") << "dataset,min,max\nsetA,3,3\n";
    std::ofstream(tmp.path / "degen.csv") << "path,valence,arousal,dataset,caption\n"
                                             "a.png,3,3,setA,\n";
    const auto dm = ingest_manifest((tmp.path / "degen.csv").string(),
                                    (tmp.path / "degen_scales.csv").string());
    CHECK_THROWS(normalize_ratings(dm));
}

TEST_CASE("normalization is monotone per source against a brute-force map") {
    TempDir tmp;
    Image img(8, 8, 3);
    save_png(img, (tmp.path / "x.png").string());
    std::ofstream(tmp.path / "scales.csv") << "dataset,min,max\ns1,-3,7\ns2,2,4\n";
    std::ofstream os(tmp.path / "m.csv");
    os << std::setprecision(17);
    os << "path,valence,arousal,dataset,caption\n";
    Rng rng(4);
    std::vector<double> raw1, raw2;
    for (int i = 0; i < 12; ++i) {
        const double v = rng.uniform(-3.0, 7.0);
        raw1.push_back(v);
        os << "x" << i << ".png," << v << ",0,s1,\n";
        save_png(img, (tmp.path / ("x" + std::to_string(i) + ".png")).string());
    }
    for (int i = 0; i < 12; ++i) {
        const double v = rng.uniform(2.0, 4.0);
        raw2.push_back(v);
        os << "y" << i << ".png," << v << ",3,s2,\n";
        save_png(img, (tmp.path / ("y" + std::to_string(i) + ".png")).string());
    }
    os.close();
    const auto n = normalize_ratings(
        ingest_manifest((tmp.path / "m.csv").string(), (tmp.path / "scales.csv").string()));
    for (std::size_t i = 0; i < 12; ++i) {
        const double brute1 = std::clamp((raw1[i] - (-3.0)) / 10.0, 0.0, 1.0);
        CHECK(n.entries[i].valence == doctest::Approx(brute1).epsilon(1e-12));
        const double brute2 = std::clamp((raw2[i] - 2.0) / 2.0, 0.0, 1.0);
        CHECK(n.entries[12 + i].valence == doctest::Approx(brute2).epsilon(1e-12));
        CHECK(n.entries[i].valence >= 0.0);
        CHECK(n.entries[i].valence <= 1.0);
    }
    // order preserved within each source
    for (std::size_t i = 1; i < 12; ++i) {
        const bool raw_up = raw1[i] > raw1[i - 1];
        const bool norm_up = n.entries[i].valence >= n.entries[i - 1].valence;
        if (raw_up) CHECK(norm_up);
    }
}

TEST_CASE("resize and mirror basics") {
    Rng rng(21);
    const Image img = testutil::random_image(16, 24, rng);
    const Image up = resize_bilinear(img, 32, 48);
    CHECK(up.height() == 32);
    const Image same = resize_bilinear(img, 16, 24);
    CHECK(mean_abs_diff(img, same) == 0.0);

    const Image m = mirror_horizontal(img);
    CHECK(m.at(0, 3, 0) == img.at(0, 3, 23));
    CHECK(mean_abs_diff(mirror_horizontal(m), img) == 0.0);

    // mirroring commutes with half-pixel resize for even sizes
    const Image a = mirror_horizontal(resize_bilinear(img, 8, 12));
    const Image b = resize_bilinear(mirror_horizontal(img), 8, 12);
    CHECK(mean_abs_diff(a, b) < 1e-12);
}
