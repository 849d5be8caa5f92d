#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "affect/nn/layers.hpp"
#include "affect/nn/serialize.hpp"
#include "support/testutil.hpp"

#include <cstdio>
#include <filesystem>

using namespace affect;
using namespace affect::nn;
using testutil::fd_directional;
using testutil::random_dir;

namespace {

Tensor random_tensor(const Shape& s, Rng& rng, double scale = 1.0) {
    Tensor t(s);
    for (Eigen::Index i = 0; i < t.data.size(); ++i) t.data[i] = scale * rng.normal();
    return t;
}

} // namespace

TEST_CASE("elementwise and reduction gradients match finite differences") {
    Rng rng(42);
    const Shape s{2, 3, 4, 4};
    Var x = Var::leaf(random_tensor(s, rng), true);
    Var y = Var::leaf(random_tensor(s, rng), true);

    auto checks = std::vector<std::pair<const char*, std::function<Var()>>>{
        {"add", [&] { return sum_all(mul(add(x, y), add(x, y))); }},
        {"sub_mul", [&] { return mean_all(mul(sub(x, y), x)); }},
        {"div", [&] { return mean_all(divide(x, add_const(square(y), 1.0))); }},
        {"silu", [&] { return mean_all(silu(x)); }},
        {"sigmoid", [&] { return mean_all(sigmoid(x)); }},
        {"tanh", [&] { return mean_all(tanh_op(x)); }},
        {"square", [&] { return mean_all(square(x)); }},
        {"exp2", [&] { return mean_all(exp2_op(scale(x, 0.3))); }},
        {"softclip", [&] { return mean_all(softclip01(x)); }},
        {"mse", [&] { return mse_loss(x, y); }},
        {"cosine", [&] { return cosine_sim(x, y); }},
        {"euclidean", [&] { return euclidean(x, y); }},
    };
    for (auto& [name, build] : checks) {
        CAPTURE(name);
        for (int k = 0; k < 3; ++k) {
            auto r = fd_directional(build, x, random_dir(s.count(), rng), 1e-5);
            CHECK(r.rel < 1e-5);
            r = fd_directional(build, y, random_dir(s.count(), rng), 1e-5);
            CHECK(r.rel < 1e-5);
        }
    }
}

TEST_CASE("conv/pool/linear/film gradients match finite differences") {
    Rng rng(7);
    Var x = Var::leaf(random_tensor(Shape{2, 3, 8, 8}, rng), true);
    Var W = Var::leaf(init_conv(4, 3, 3, 3, rng), true);
    Var b = Var::leaf(Tensor(Shape{4, 1, 1, 1}), true);
    Var W2 = Var::leaf(init_linear(2, 4, rng), true);
    Var b2 = Var::leaf(Tensor(Shape{2, 1, 1, 1}), true);
    Var sv = Var::leaf(random_tensor(Shape{2, 4, 1, 1}, rng, 0.3), true);
    Var tv = Var::leaf(random_tensor(Shape{2, 4, 1, 1}, rng, 0.3), true);

    auto build = [&] {
        Var h = conv2d(x, W, b, 1);
        h = film(h, sv, tv);
        h = silu(h);
        h = maxpool2(h);
        h = avgpool2(h);
        h = upsample2(h);
        h = global_avg_pool(h);
        h = linear(h, W2, b2);
        return sum_squares(sigmoid(h));
    };
    for (Var leaf : {x, W, b, W2, b2, sv, tv}) {
        for (int k = 0; k < 2; ++k) {
            auto r = fd_directional(build, leaf, random_dir(leaf.value().size(), rng), 1e-5);
            CHECK(r.rel < 1e-4);
        }
    }
}

TEST_CASE("resize, pad, separable conv, curve, warp gradients") {
    Rng rng(11);
    Var x = Var::leaf(random_tensor(Shape{1, 3, 10, 12}, rng, 0.2), true);
    Var sigma = Var::leaf(Tensor::scalar(1.3), true);
    Var yk = Var::leaf(random_tensor(Shape{1, 6, 1, 1}, rng, 0.05), true);
    Var dx = Var::leaf(Tensor::scalar(0.03), true);
    Var dy = Var::leaf(Tensor::scalar(-0.02), true);
    Var sc = Var::leaf(Tensor::scalar(1.05), true);

    auto build = [&] {
        Var h = bilinear_resize(x, 7, 9);
        h = pad_replicate(h, 2);
        Var k = gaussian_kernel(sigma, 2);
        h = conv1d_v(conv1d_h(h, k), k);
        h = knot_curve(h, yk);
        h = warp_affine(h, dx, dy, sc);
        return mean_all(square(h));
    };
    for (Var leaf : {x, sigma, yk, dx, dy, sc}) {
        auto r = fd_directional(build, leaf, random_dir(leaf.value().size(), rng), 1e-5);
        CAPTURE(r.analytic);
        CAPTURE(r.numeric);
        CHECK(r.rel < 1e-4);
    }
}

TEST_CASE("concat/slice round trip and gradient routing") {
    Rng rng(3);
    Var a = Var::leaf(random_tensor(Shape{1, 2, 4, 4}, rng), true);
    Var b = Var::leaf(random_tensor(Shape{1, 3, 4, 4}, rng), true);
    Var cat = concat_c(a, b);
    CHECK(cat.shape().c == 5);
    Var back = slice_c(cat, 2, 3);
    CHECK((back.value().data - b.value().data).abs().maxCoeff() == 0.0);

    auto build = [&] { return sum_squares(slice_c(concat_c(a, b), 1, 3)); };
    auto r = fd_directional(build, a, random_dir(a.value().size(), rng), 1e-5);
    CHECK(r.rel < 1e-6);
    r = fd_directional(build, b, random_dir(b.value().size(), rng), 1e-5);
    CHECK(r.rel < 1e-6);
}

TEST_CASE("adam with beta2=0 reduces a quadratic deterministically") {
    auto run = [] {
        Var p = Var::leaf(Tensor::scalar(3.0), true);
        Adam opt({p}, 0.05, 0.9, 0.0);
        std::vector<double> trace;
        for (int i = 0; i < 120; ++i) {
            Var loss = square(add_const(p, -1.0));
            backward(loss);
            trace.push_back(loss.scalar_value());
            opt.step();
        }
        return trace;
    };
    auto t1 = run(), t2 = run();
    CHECK(t1 == t2); // bit-identical across runs
    // the sign-style update hovers around the minimum; the best iterate is tight
    CHECK(*std::min_element(t1.begin(), t1.end()) < 1e-2);
}

TEST_CASE("checkpoint round trip preserves weights and metadata") {
    Rng rng(5);
    ParamStore store;
    store.add("conv.w", init_conv(4, 3, 3, 3, rng));
    store.add("conv.b", Tensor(Shape{4, 1, 1, 1}));
    const auto path = std::filesystem::temp_directory_path() / "affect_ckpt_test.bin";

    auto ckpt = snapshot("test-kind", 1234, R"({"width":4})", store);
    save_checkpoint(ckpt, path.string());
    auto loaded = load_checkpoint(path.string());
    CHECK(loaded.kind == "test-kind");
    CHECK(loaded.seed == 1234);

    ParamStore store2;
    store2.add("conv.w", Tensor(Shape{4, 3, 3, 3}));
    store2.add("conv.b", Tensor(Shape{4, 1, 1, 1}));
    restore(loaded, store2);
    CHECK(weights_digest(store) == weights_digest(store2));
    std::filesystem::remove(path);
}
