#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "affect/core/image_io.hpp"
#include "affect/semantic/caption.hpp"
#include "affect/semantic/embedder.hpp"
#include "affect/transforms/diff_transforms.hpp"
#include "support/testutil.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

using namespace affect;
using namespace affect::sem;
namespace fs = std::filesystem;

namespace {

std::vector<core::Image> small_corpus(int n, Rng& rng) {
    std::vector<core::Image> imgs;
    for (int i = 0; i < n; ++i) imgs.push_back(testutil::random_image(32, 32, rng, /*smooth=*/true));
    return imgs;
}

Embedder trained_embedder() {
    Rng rng(1001);
    Embedder e(7);
    auto corpus = small_corpus(48, rng);
    e.train(corpus, 12, 2e-3);
    return e;
}

} // namespace

TEST_CASE("cosine similarity identities and brute-force agreement") {
    SemanticEmbedding a, b;
    a.vector = Eigen::VectorXd::Zero(4);
    a.vector << 1, 0, 0, 0;
    b.vector = Eigen::VectorXd::Zero(4);
    b.vector << 0, 1, 0, 0;
    CHECK(cosine_similarity(a, a) == doctest::Approx(1.0));
    CHECK(cosine_similarity(a, b) == doctest::Approx(0.0));

    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        SemanticEmbedding x, y;
        x.vector = Eigen::VectorXd::NullaryExpr(16, [&](Eigen::Index) { return rng.normal(); });
        y.vector = Eigen::VectorXd::NullaryExpr(16, [&](Eigen::Index) { return rng.normal(); });
        double dot = 0, nx = 0, ny = 0;
        for (int i = 0; i < 16; ++i) {
            dot += x.vector[i] * y.vector[i];
            nx += x.vector[i] * x.vector[i];
            ny += y.vector[i] * y.vector[i];
        }
        const double brute = dot / (std::sqrt(nx) * std::sqrt(ny));
        CHECK(std::abs(cosine_similarity(x, y) - brute) < 1e-12);
        CHECK(cosine_similarity(x, y) == cosine_similarity(y, x));
        // scale invariance
        SemanticEmbedding xs;
        xs.vector = 3.7 * x.vector;
        CHECK(cosine_similarity(xs, y) == doctest::Approx(cosine_similarity(x, y)).epsilon(1e-12));
        CHECK(cosine_similarity(x, y) <= 1.0);
        CHECK(cosine_similarity(x, y) >= -1.0);
    }
}

TEST_CASE("embedder invariants: determinism, nonzero norm, continuity") {
    Embedder e = trained_embedder();
    Rng rng(5);
    const core::Image img = testutil::random_image(48, 40, rng, true);

    const auto e1 = e.embed(img);
    const auto e2 = e.embed(img);
    CHECK(e1.vector == e2.vector);
    CHECK(e1.vector.norm() > 0.0);
    CHECK(e1.vector.allFinite());

    // tiny perturbation keeps cosine close to 1
    core::Image noisy = img;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x)
                noisy.at(c, y, x) = std::clamp(noisy.at(c, y, x) + 1e-4 * rng.normal(), 0.0, 1.0);
    CHECK(cosine_similarity(e.embed(img), e.embed(noisy)) > 0.999);

    // untrained provider refuses
    Embedder raw(9);
    CHECK_THROWS(raw.embed(img));
}

TEST_CASE("embedder training reduces reconstruction loss and round-trips via checkpoint") {
    Rng rng(11);
    Embedder e(21);
    auto corpus = small_corpus(32, rng);
    const auto report = e.train(corpus, 10, 2e-3);
    REQUIRE(report.loss_per_epoch.size() == 10);
    CHECK(report.loss_per_epoch.back() < report.loss_per_epoch.front());

    const auto ck = e.checkpoint();
    Embedder e2 = Embedder::from_checkpoint(ck);
    const core::Image img = testutil::random_image(32, 32, rng);
    CHECK(e.embed(img).vector == e2.embed(img).vector);

    // differentiable path agrees with embed()
    const auto z = e.embed_var(nn::Var::constant(tx::image_to_tensor(img)));
    const auto direct = e.embed(img);
    for (int i = 0; i < Embedder::kDim; ++i)
        CHECK(z.value().data[i] == doctest::Approx(direct.vector[i]).epsilon(1e-12));
}

TEST_CASE("manifest caption provider looks up and rejects missing captions") {
    fs::path tmp = fs::temp_directory_path() / "affect_caption_test";
    fs::create_directories(tmp);
    core::Image img(8, 8, 3);
    core::save_png(img, (tmp / "a.png").string());
    core::save_png(img, (tmp / "b.png").string());
    std::ofstream(tmp / "scales.csv") << "dataset,min,max\ns,0,1\n";
    std::ofstream(tmp / "m.csv") << "path,valence,arousal,dataset,caption\n"
                                    "a.png,0.5,0.5,s,a quiet scene\n"
                                    "b.png,0.5,0.5,s,\n";
    const auto m = core::ingest_manifest((tmp / "m.csv").string(), (tmp / "scales.csv").string());
    ManifestCaptionProvider provider(m);
    const auto rec = provider.caption_image(m.entries[0].image_path);
    CHECK(rec.caption == "a quiet scene");
    CHECK(rec.provider == "manifest");
    CHECK_THROWS(provider.caption_image(m.entries[1].image_path)); // empty caption
    CHECK_THROWS(provider.caption_image("unknown.png"));
    fs::remove_all(tmp);
}

TEST_CASE("http caption provider retries, caches, and avoids repeat calls") {
    fs::path tmp = fs::temp_directory_path() / "affect_http_caption_test";
    fs::remove_all(tmp);
    fs::create_directories(tmp);
    core::Image img(8, 8, 3);
    img.plane(0).setConstant(0.25);
    core::save_png(img, (tmp / "img.png").string());

    std::atomic<int> hits{0};
    httplib::Server server;
    server.Post("/caption", [&](const httplib::Request& req, httplib::Response& res) {
        const int n = ++hits;
        if (n == 1) { // first attempt fails; the client must retry
            res.status = 500;
            return;
        }
        const auto j = nlohmann::json::parse(req.body);
        CHECK(j.contains("image_b64"));
        CHECK(j.contains("instruction"));
        res.set_content(R"({"caption":"a flat red square"})", "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    HttpCaptionConfig cfg;
    cfg.host = "127.0.0.1";
    cfg.port = port;
    cfg.cache_dir = (tmp / "cache").string();
    cfg.backoff_initial_s = 0.01;
    HttpCaptionProvider provider(cfg);

    const auto rec = provider.caption_image((tmp / "img.png").string());
    CHECK(rec.caption == "a flat red square");
    CHECK(hits.load() == 2); // one failure + one success

    // second request must be served from the cache: no further hits
    const auto rec2 = provider.caption_image((tmp / "img.png").string());
    CHECK(rec2.caption == "a flat red square");
    CHECK(hits.load() == 2);

    server.stop();
    th.join();
    fs::remove_all(tmp);
}

TEST_CASE("base64 reference vectors") {
    CHECK(base64_encode("") == "");
    CHECK(base64_encode("f") == "Zg==");
    CHECK(base64_encode("fo") == "Zm8=");
    CHECK(base64_encode("foo") == "Zm9v");
    CHECK(base64_encode("foobar") == "Zm9vYmFy");
}
