#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "affect/core/image_io.hpp"
#include "affect/eval/harness.hpp"
#include "affect/eval/synth.hpp"
#include "support/testutil.hpp"

#include <Eigen/Cholesky>

#include <filesystem>
#include <fstream>

using namespace affect;
using namespace affect::eval;
namespace fs = std::filesystem;

TEST_CASE("ols: exact line, constant response, brute-force normal equations") {
    std::vector<double> x{0, 1, 2, 3, 4, 5};
    std::vector<double> y;
    for (double v : x) y.push_back(2.0 * v + 1.0);
    const OLSFit exact = fit_ols(x, y);
    CHECK(exact.slope == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(exact.intercept == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(exact.p_value == 0.0);

    std::vector<double> flat(x.size(), 3.5);
    const OLSFit constant = fit_ols(x, flat);
    CHECK(constant.slope == doctest::Approx(0.0));
    CHECK(constant.p_value == 1.0);

    Rng rng(3);
    for (int t = 0; t < 5; ++t) {
        std::vector<double> xs, ys;
        for (int i = 0; i < 40; ++i) {
            xs.push_back(rng.uniform(-2, 2));
            ys.push_back(0.7 * xs.back() - 0.3 + 0.4 * rng.normal());
        }
        const OLSFit fit = fit_ols(xs, ys);
        // brute-force normal equations
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const double n = static_cast<double>(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) {
            sx += xs[i];
            sy += ys[i];
            sxx += xs[i] * xs[i];
            sxy += xs[i] * ys[i];
        }
        const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        const double intercept = (sy - slope * sx) / n;
        CHECK(fit.slope == doctest::Approx(slope).epsilon(1e-10));
        CHECK(fit.intercept == doctest::Approx(intercept).epsilon(1e-10));
        CHECK(fit.p_value >= 0.0);
        CHECK(fit.p_value <= 1.0);
    }
    CHECK_THROWS(fit_ols({1, 2}, {1, 2}));          // n < 3
    CHECK_THROWS(fit_ols({1, 1, 1}, {1, 2, 3}));    // constant x
}

TEST_CASE("p-values match the t distribution at reference points") {
    // t=2.228, nu=10 is the classic 5% two-sided critical value
    CHECK(t_test_two_sided(2.228, 10) == doctest::Approx(0.05).epsilon(2e-3));
    CHECK(t_test_two_sided(0.0, 7) == doctest::Approx(1.0));
    CHECK(t_test_two_sided(100.0, 5) < 1e-6);
}

TEST_CASE("fid: identity, symmetry, analytic gaussian value within 1%") {
    Rng rng(17);
    FeatureSet a;
    for (int i = 0; i < 200; ++i)
        a.push_back(Eigen::VectorXd::NullaryExpr(6, [&](Eigen::Index) { return rng.normal(); }));
    CHECK(compute_fid(a, a) <= 1e-6);

    // two synthetic gaussian clouds with known parameters
    const int d = 8, n = 10000;
    Eigen::VectorXd mu_a = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd mu_b = Eigen::VectorXd::Constant(d, 1.5);
    Eigen::MatrixXd sa = Eigen::MatrixXd::Identity(d, d);
    for (int i = 0; i < d; ++i) sa(i, i) = 0.5 + 0.2 * i;
    Eigen::MatrixXd sb = Eigen::MatrixXd::Identity(d, d) * 1.3;
    // correlation structure on b
    for (int i = 0; i + 1 < d; ++i) sb(i, i + 1) = sb(i + 1, i) = 0.3;

    const Eigen::MatrixXd la = sa.llt().matrixL();
    const Eigen::MatrixXd lb = sb.llt().matrixL();
    FeatureSet fa, fb;
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd za = Eigen::VectorXd::NullaryExpr(d, [&](Eigen::Index) { return rng.normal(); });
        Eigen::VectorXd zb = Eigen::VectorXd::NullaryExpr(d, [&](Eigen::Index) { return rng.normal(); });
        fa.push_back(mu_a + la * za);
        fb.push_back(mu_b + lb * zb);
    }
    // analytic Frechet distance between the true gaussians
    DistributionStats ta{mu_a, sa, n}, tb{mu_b, sb, n};
    const double analytic = frechet_distance(ta, tb);
    const double estimated = compute_fid(fa, fb);
    CHECK(std::abs(estimated - analytic) <= 0.01 * analytic);

    // symmetric in its arguments
    CHECK(std::abs(compute_fid(fa, fb) - compute_fid(fb, fa)) < 1e-6);
}

TEST_CASE("kid: identical sets zero, separated clusters positive, brute-force parity") {
    Rng rng(23);
    FeatureSet a, b;
    for (int i = 0; i < 120; ++i) {
        a.push_back(Eigen::VectorXd::NullaryExpr(5, [&](Eigen::Index) { return rng.normal(); }));
        b.push_back(Eigen::VectorXd::NullaryExpr(5, [&](Eigen::Index) { return 8.0 + rng.normal(); }));
    }
    CHECK(std::abs(compute_kid(a, a, 50, 10, 7)) <= 1e-4);
    CHECK(compute_kid(a, b, 50, 10, 7) > 0.0);

    // small-n brute-force double sum
    FeatureSet xs(a.begin(), a.begin() + 6), ys(b.begin(), b.begin() + 6);
    auto k = [](const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
        const double t = u.dot(v) / static_cast<double>(u.size()) + 1.0;
        return t * t * t;
    };
    double acc = 0;
    const int m = 6;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            if (i == j) continue;
            acc += k(xs[i], xs[j]) + k(ys[i], ys[j]) - k(xs[i], ys[j]) - k(ys[i], xs[j]);
        }
    acc /= m * (m - 1);
    CHECK(mmd2_unbiased(xs, ys) == doctest::Approx(acc).epsilon(1e-9));
}

namespace {

struct HarnessFixture {
    fs::path dir;
    core::DatasetManifest manifest;
    reg::PixelRegressor regressor;
    sem::Embedder embedder;

    HarnessFixture() : regressor(91), embedder(92) {
        dir = fs::temp_directory_path() / "affect_eval_fixture";
        fs::remove_all(dir);
        manifest = eval::synth_corpus("affect", 24, 48, 77, dir.string());
        reg::TrainConfig rcfg;
        rcfg.epochs = 10;
        rcfg.seed = 91;
        regressor.train(manifest, rcfg);
        auto images = reg::load_manifest_images(manifest, 48);
        embedder.train(images, 8, 2e-3);
    }
    ModelSet models() const {
        ModelSet m;
        m.regressor = &regressor;
        m.embedder = &embedder;
        return m;
    }
};

HarnessFixture& hfix() {
    static HarnessFixture f;
    return f;
}

} // namespace

TEST_CASE("sweep: grayscale zeroes colorfulness, original reconstructs exactly") {
    auto& f = hfix();
    SweepConfig cfg;
    cfg.method = Method::grayscale;
    cfg.weights = {0.1, 0.5};
    cfg.corpus_manifest = (f.dir / "manifest.csv").string();
    cfg.corpus_scales = (f.dir / "scales.csv").string();
    const SweepTables gray = run_weight_sweep(cfg, f.models());
    REQUIRE(gray.summary.rows.size() == 2);
    const auto header = gray.per_image.header;
    const auto col = [&](const char* name) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw std::logic_error("missing column");
    };
    for (const auto& row : gray.per_image.rows)
        CHECK(std::stod(row[col("colorfulness")]) == 0.0);

    cfg.method = Method::original;
    const SweepTables orig = run_weight_sweep(cfg, f.models());
    for (const auto& row : orig.per_image.rows) CHECK(std::stod(row[col("l1")]) == 0.0);
    // FID of a set against itself
    for (const auto& row : orig.summary.rows) {
        const auto scol = [&](const char* name) {
            for (std::size_t i = 0; i < orig.summary.header.size(); ++i)
                if (orig.summary.header[i] == name) return i;
            throw std::logic_error("missing summary column");
        };
        CHECK(std::stod(row[scol("fid")]) <= 1e-6);
        CHECK(std::abs(std::stod(row[scol("kid")])) <= 1e-4);
    }
}

TEST_CASE("sweep summaries equal a brute-force recomputation of the per-image rows") {
    auto& f = hfix();
    SweepConfig cfg;
    cfg.method = Method::parametric;
    cfg.weights = {0.1, 0.4};
    cfg.iters = 25;
    cfg.corpus_manifest = (f.dir / "manifest.csv").string();
    cfg.corpus_scales = (f.dir / "scales.csv").string();
    cfg.seed = 5;
    const SweepTables t = run_weight_sweep(cfg, f.models());

    for (std::size_t wi = 0; wi < cfg.weights.size(); ++wi) {
        double acc_v = 0, acc_l1 = 0;
        int count = 0;
        for (const auto& row : t.per_image.rows) {
            if (std::stod(row[1]) != cfg.weights[wi]) continue;
            acc_v += std::stod(row[3]);
            acc_l1 += std::stod(row[6]);
            ++count;
        }
        REQUIRE(count == 24);
        CHECK(std::stod(t.summary.rows[wi][2]) == doctest::Approx(acc_v / count).epsilon(1e-9));
        CHECK(std::stod(t.summary.rows[wi][5]) == doctest::Approx(acc_l1 / count).epsilon(1e-9));
    }
}

TEST_CASE("sweep determinism: identical config and seed give identical tables") {
    auto& f = hfix();
    SweepConfig cfg;
    cfg.method = Method::parametric;
    cfg.weights = {0.3};
    cfg.iters = 15;
    cfg.corpus_manifest = (f.dir / "manifest.csv").string();
    cfg.corpus_scales = (f.dir / "scales.csv").string();
    cfg.seed = 11;
    const SweepTables a = run_weight_sweep(cfg, f.models());
    const SweepTables b = run_weight_sweep(cfg, f.models());
    CHECK(a.summary.rows == b.summary.rows);
    CHECK(a.per_image.rows == b.per_image.rows);
}

TEST_CASE("bidirectional: zero offset rows carry the original inferences") {
    auto& f = hfix();
    BidirectionalConfig cfg;
    cfg.method = Method::parametric;
    cfg.offsets = {-0.1, 0.1};
    cfg.iters = 12;
    cfg.corpus_manifest = (f.dir / "manifest.csv").string();
    cfg.corpus_scales = (f.dir / "scales.csv").string();
    const SweepTables t = run_bidirectional(cfg, f.models());
    REQUIRE(t.summary.rows.size() == 3); // -0.1, 0, +0.1

    // offset-0 per-image rows equal direct regressor predictions
    for (const auto& row : t.per_image.rows) {
        if (std::stod(row[1]) != 0.0) continue;
        bool found = false;
        for (std::size_t i = 0; i < f.manifest.entries.size(); ++i) {
            if (fs::path(f.manifest.entries[i].image_path).filename().string() != row[2]) continue;
            const auto pred = f.regressor.predict(core::load_image(f.manifest.entries[i].image_path));
            CHECK(std::stod(row[5]) == doctest::Approx(pred.valence).epsilon(1e-12));
            found = true;
        }
        CHECK(found);
    }
}

TEST_CASE("metrics report and plot rendering produce the expected artifacts") {
    auto& f = hfix();
    const auto table = metrics_report((f.dir / "manifest.csv").string(),
                                      (f.dir / "scales.csv").string(), f.models());
    CHECK(table.rows.size() == f.manifest.entries.size());
    CHECK(table.header == metrics::PropertyReport::csv_header());

    const fs::path out = fs::temp_directory_path() / "affect_eval_report";
    fs::remove_all(out);
    fs::create_directories(out);
    SweepConfig cfg;
    cfg.method = Method::grayscale;
    cfg.weights = {0.1, 0.2, 0.3};
    cfg.corpus_manifest = (f.dir / "manifest.csv").string();
    cfg.corpus_scales = (f.dir / "scales.csv").string();
    const SweepTables t = run_weight_sweep(cfg, f.models());
    csv::write_file((out / "sweep_summary.csv").string(), t.summary);
    render_report(out.string(), (out / "plots").string());
    int svgs = 0;
    for (const auto& e : fs::directory_iterator(out / "plots"))
        if (e.path().extension() == ".svg") ++svgs;
    CHECK(svgs >= 10); // one per numeric summary column
    fs::remove_all(out);
}
