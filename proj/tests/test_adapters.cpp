#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "affect/adapters/parametric.hpp"
#include "affect/adapters/style.hpp"
#include "affect/core/image_io.hpp"
#include "affect/eval/synth.hpp"
#include "affect/metrics/property_metrics.hpp"
#include "support/testutil.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>

using namespace affect;
using namespace affect::adapters;
namespace fs = std::filesystem;

namespace {

// one corpus + trained models shared across the binary
struct Fixture {
    fs::path dir;
    core::DatasetManifest manifest;
    reg::PixelRegressor regressor;
    sem::Embedder embedder;
    Disentangler disentangler;

    Fixture() : regressor(5), embedder(6), disentangler(7) {
        dir = fs::temp_directory_path() / "affect_adapters_fixture";
        fs::remove_all(dir);
        manifest = eval::synth_corpus("affect", 120, 48, 33, dir.string());

        reg::TrainConfig rcfg;
        rcfg.epochs = 30;
        rcfg.seed = 5;
        regressor.train(manifest, rcfg);

        auto images = reg::load_manifest_images(manifest, 48);
        embedder.train(images, 12, 2e-3);

        Disentangler::TrainConfig dcfg;
        dcfg.epochs = 30;
        dcfg.seed = 7;
        disentangler.train(manifest, dcfg);
    }
};

Fixture& fixture() {
    static Fixture f;
    return f;
}

} // namespace

TEST_CASE("parametric: w2=0 stays at identity and preserves the embedding") {
    auto& f = fixture();
    const core::Image img = core::load_image(f.manifest.entries[4].image_path);
    ParametricOptions opts;
    opts.w1 = 1.0;
    opts.w2 = 0.0;
    opts.iters = 40;
    const auto r = optimize_params(img, {0.5, 0.0}, f.regressor, f.embedder, opts);
    CHECK_NOTHROW(r.validate());

    // semantic loss of the returned image stays tiny
    const double sim = sem::cosine_similarity(f.embedder.embed(img), f.embedder.embed(r.adapted));
    CHECK(1.0 - sim <= 1e-3);
    // parameters stayed near the identity
    const auto p = tx::TransformParams::from_json(r.params_or_code);
    CHECK(std::abs(p.exposure) < 0.05);
    CHECK(std::abs(p.scale - 1.0) < 0.01);
    CHECK(core::mean_abs_diff(r.adapted, img) < 0.02);
}

TEST_CASE("parametric: best objective is monotone along the trace and improves the distance") {
    auto& f = fixture();
    core::EmotionReference ref{0.5, 0.0};
    int improved = 0, total = 0;
    for (int i = 0; i < 6; ++i) {
        const core::Image img = core::load_image(f.manifest.entries[static_cast<std::size_t>(i) * 9].image_path);
        ParametricOptions opts;
        opts.w2 = 0.2;
        opts.iters = 120;
        opts.seed = 100 + static_cast<std::uint64_t>(i);
        const auto r = optimize_params(img, ref, f.regressor, f.embedder, opts);

        // best-so-far is nonincreasing
        double best = std::numeric_limits<double>::infinity();
        for (double v : r.loss_trace) {
            const double new_best = std::min(best, v);
            CHECK(new_best <= best + 1e-15);
            best = new_best;
        }
        const double before = std::hypot(r.emotion_before.valence - ref.valence_ref,
                                         r.emotion_before.arousal - ref.arousal_ref);
        const double after = std::hypot(r.emotion_after.valence - ref.valence_ref,
                                        r.emotion_after.arousal - ref.arousal_ref);
        improved += after <= before ? 1 : 0;
        ++total;
    }
    CHECK(improved >= total - 1); // distance-to-reference reduction on nearly all
}

TEST_CASE("parametric: brightness oracle drives exposure down on over-bright images") {
    auto& f = fixture();
    // an over-bright image: valence label (brightness) far above the 0.5 target
    core::Image bright(48, 48, 3);
    bright.plane(0).setConstant(0.93);
    bright.plane(1).setConstant(0.88);
    bright.plane(2).setConstant(0.82);
    core::Image noisy = bright;
    Rng rng(3);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 48; ++y)
            for (int x = 0; x < 48; ++x)
                noisy.at(c, y, x) = std::clamp(noisy.at(c, y, x) + 0.03 * rng.normal(), 0.0, 1.0);

    ParametricOptions opts;
    opts.w1 = 0.5;
    opts.w2 = 1.0;
    opts.iters = 120;
    const auto r = optimize_params(noisy, {0.5, 0.0}, f.regressor, f.embedder, opts);
    const auto p = tx::TransformParams::from_json(r.params_or_code);
    CHECK(p.exposure < 0.0);
    CHECK(metrics::brightness(r.adapted) < metrics::brightness(noisy));
}

TEST_CASE("disentangler: rejects tiny corpora, reconstructs, and swaps stably") {
    auto& f = fixture();

    core::DatasetManifest small = f.manifest;
    small.entries.resize(50);
    Disentangler fresh(9);
    Disentangler::TrainConfig cfg;
    cfg.epochs = 1;
    CHECK_THROWS(fresh.train(small, cfg));

    // the fixture training must have produced a usable model
    Disentangler::TrainConfig dcfg;
    dcfg.epochs = 30;
    dcfg.seed = 7;
    Disentangler again(7);
    const auto rep = again.train(f.manifest, dcfg);
    CHECK(rep.recon_psnr >= 22.0);
    CHECK(rep.loss_per_epoch.back() < rep.loss_per_epoch.front());

    // swap then swap back: content codes stay within the trained tolerance
    const core::Image a = core::load_image(f.manifest.entries[1].image_path);
    const core::Image b = core::load_image(f.manifest.entries[2].image_path);
    const nn::Tensor ca = again.encode_content(a);
    const nn::Tensor sb = again.encode_style(b);
    const core::Image mixed = again.decode(ca, sb);
    const nn::Tensor c_back = again.encode_content(mixed);
    const double drift = (c_back.data - ca.data).abs().mean();
    CHECK(drift <= 3.0 * again.trained_consistency() + 1e-6);

    // determinism of encoders and checkpoint round trip
    CHECK((again.encode_style(a).data == again.encode_style(a).data).all());
    const Disentangler loaded = Disentangler::from_checkpoint(again.checkpoint());
    CHECK((loaded.encode_content(a).data == ca.data).all());
}

TEST_CASE("style: w2=0 keeps the style near s0 and the output near the reconstruction") {
    auto& f = fixture();
    const core::Image img = core::load_image(f.manifest.entries[5].image_path);
    StyleOptions opts;
    opts.w1 = 1.0;
    opts.w2 = 0.0;
    opts.iters = 40;
    const auto r = optimize_style(img, {0.5, 0.0}, f.regressor, f.disentangler, opts);
    CHECK_NOTHROW(r.validate());

    const auto code = nlohmann::json::parse(r.params_or_code);
    CHECK(code.at("style_delta_norm").get<double>() < 1.0);
    const core::Image recon =
        f.disentangler.decode(f.disentangler.encode_content(img), f.disentangler.encode_style(img));
    CHECK(core::mean_abs_diff(r.adapted, recon) < 0.05);
}

TEST_CASE("style: eq-2 gradient wrt the style vector matches finite differences") {
    auto& f = fixture();
    const core::Image img = core::load_image(f.manifest.entries[8].image_path);
    const nn::Tensor c0 = f.disentangler.encode_content(img);
    const nn::Tensor s0 = f.disentangler.encode_style(img);
    const nn::Var content = nn::Var::constant(c0);

    nn::Tensor ref_t(nn::Shape{1, 2, 1, 1});
    ref_t.data[0] = 0.5;
    ref_t.data[1] = 0.0;
    const nn::Var ref_v = nn::Var::constant(ref_t);

    nn::Var style = nn::Var::leaf(s0, true);
    auto objective = [&] {
        nn::Var out = f.disentangler.decode_var(content, style);
        nn::Var loss = nn::scale(nn::l1_loss(f.disentangler.encode_content_var(out), content), 1.0);
        return nn::add(loss, nn::scale(nn::euclidean(ref_v, f.regressor.predict_var(out)), 0.2));
    };
    const auto rep = testutil::fd_full(objective, style, 1e-5);
    CHECK(rep.rel < 1e-3);
}

TEST_CASE("style: brightness oracle pushes bright images darker") {
    auto& f = fixture();
    // pick the brightest corpus entry
    std::size_t best = 0;
    for (std::size_t i = 0; i < f.manifest.entries.size(); ++i)
        if (f.manifest.entries[i].valence > f.manifest.entries[best].valence) best = i;
    const core::Image img = core::load_image(f.manifest.entries[best].image_path);
    REQUIRE(f.manifest.entries[best].valence > 0.7);

    StyleOptions opts;
    opts.w1 = 1.0;
    opts.w2 = 0.6;
    opts.iters = 120;
    const auto r = optimize_style(img, {0.5, 0.0}, f.regressor, f.disentangler, opts);
    const core::Image recon =
        f.disentangler.decode(f.disentangler.encode_content(img), f.disentangler.encode_style(img));
    CHECK(metrics::brightness(r.adapted) < metrics::brightness(recon));

    // content code pinned: adapted image decodes from the original c0
    const auto code = nlohmann::json::parse(r.params_or_code);
    CHECK(code.at("style_delta_norm").get<double>() > 0.0);
}
