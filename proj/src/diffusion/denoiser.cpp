#include "affect/diffusion/denoiser.hpp"

#include "affect/diffusion/ddim.hpp"
#include "affect/regressor/pixel_regressor.hpp"
#include "affect/transforms/diff_transforms.hpp"
#include "affect/util/rng.hpp"

#include <nlohmann/json.hpp>

#include <cctype>
#include <cmath>
#include <stdexcept>

namespace affect::diffusion {

using nn::Var;

DenoiserModel::DenoiserModel(int image_size, std::uint64_t seed) : size_(image_size), seed_(seed) {
    if (image_size < 8 || image_size % 4 != 0 || image_size > 64)
        throw std::invalid_argument("denoiser: image size must be a multiple of 4 in [8,64]");
    Rng rng(splitmix64(seed ^ 0xD1FFC0DEULL));
    auto conv = [&](const char* name, int oc, int ic, int k) {
        Var w = params_.add(std::string(name) + ".w", nn::init_conv(oc, ic, k, k, rng));
        Var b = params_.add(std::string(name) + ".b", nn::Tensor(nn::Shape{oc, 1, 1, 1}));
        return std::pair{w, b};
    };
    auto lin = [&](const char* name, int out, int in) {
        Var w = params_.add(std::string(name) + ".w", nn::init_linear(out, in, rng));
        Var b = params_.add(std::string(name) + ".b", nn::Tensor(nn::Shape{out, 1, 1, 1}));
        return std::pair{w, b};
    };
    std::tie(f1w_, f1b_) = lin("cond1", 32, 32);
    std::tie(f2w_, f2b_) = lin("cond2", 32, 32);
    auto film = [&](const char* name, int c) {
        // start the modulation at identity: zero-init projections
        Var s = params_.add(std::string(name) + ".scale", nn::Tensor(nn::Shape{c, 32, 1, 1}));
        Var t = params_.add(std::string(name) + ".shift", nn::Tensor(nn::Shape{c, 32, 1, 1}));
        return std::pair{s, t};
    };
    std::tie(c0w_, c0b_) = conv("in", 16, 3, 3);
    std::tie(film0s_, film0t_) = film("film0", 16);
    std::tie(d1w_, d1b_) = conv("down", 24, 16, 3);
    std::tie(film1s_, film1t_) = film("film1", 24);
    std::tie(mw_, mb_) = conv("mid", kMidChannels, 24, 3);
    std::tie(film2s_, film2t_) = film("film2", kMidChannels);
    std::tie(pw_, pb_) = conv("proj", 16, kMidChannels, 1);
    std::tie(u1w_, u1b_) = conv("up", 16, 16, 3);
    std::tie(film3s_, film3t_) = film("film3", 16);
    std::tie(ow_, ob_) = conv("out", 3, 16, 3);
}

nn::Tensor DenoiserModel::encode(const core::Image& img) const {
    core::Image rgb = img.channels() == 1 ? core::gray_to_rgb(img) : img;
    if (rgb.height() != size_ || rgb.width() != size_)
        rgb = core::resize_bilinear(rgb, size_, size_);
    return tx::image_to_tensor(rgb);
}

core::Image DenoiserModel::decode(const nn::Tensor& z) const {
    return tx::tensor_to_image(z, /*clamp=*/true);
}

nn::Tensor DenoiserModel::text_embedding(const std::string& caption) const {
    nn::Tensor e(nn::Shape{1, kCond, 1, 1});
    std::string word;
    auto flush = [&] {
        if (word.empty()) return;
        // FNV-1a then splitmix for bucket and sign
        std::uint64_t h = 1469598103934665603ULL;
        for (char c : word) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
        h = splitmix64(h);
        e.data[static_cast<Eigen::Index>(h % kCond)] += (h >> 32) & 1 ? 1.0 : -1.0;
        word.clear();
    };
    for (char c : caption) {
        if (std::isalnum(static_cast<unsigned char>(c))) word += static_cast<char>(std::tolower(c));
        else flush();
    }
    flush();
    const double norm = std::sqrt(e.data.square().sum());
    if (norm > 0) e.data /= norm;
    return e;
}

nn::Tensor DenoiserModel::null_embedding() const { return nn::Tensor(nn::Shape{1, kCond, 1, 1}); }

namespace {

nn::Tensor timestep_embedding(const std::vector<int>& ts) {
    const int n = static_cast<int>(ts.size());
    nn::Tensor e(nn::Shape{n, 16, 1, 1});
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < 8; ++k) {
            const double freq = std::pow(10000.0, -static_cast<double>(k) / 8.0);
            e.data[i * 16 + 2 * k] = std::sin(ts[static_cast<std::size_t>(i)] * freq);
            e.data[i * 16 + 2 * k + 1] = std::cos(ts[static_cast<std::size_t>(i)] * freq);
        }
    return e;
}

} // namespace

Var DenoiserModel::cond_vector(const std::vector<int>& ts, const Var& cond) const {
    const int n = static_cast<int>(ts.size());
    if (cond.shape().c != kCond || cond.shape().n != n)
        throw std::invalid_argument("denoiser: conditioning shape mismatch, got " +
                                    cond.shape().str());
    Var e = nn::concat_c(Var::constant(timestep_embedding(ts)), cond);
    e = nn::silu(nn::linear(e, f1w_, f1b_));
    return nn::silu(nn::linear(e, f2w_, f2b_));
}

Var DenoiserModel::run_half(const Var& z, const Var& e, Var* skip_out) const {
    auto modulate = [&](Var h, const Var& sw, const Var& tw) {
        Var s = nn::linear(e, sw, Var::constant(nn::Tensor(nn::Shape{sw.shape().n, 1, 1, 1})));
        Var t = nn::linear(e, tw, Var::constant(nn::Tensor(nn::Shape{tw.shape().n, 1, 1, 1})));
        return nn::film(h, s, t);
    };
    Var h = nn::silu(modulate(nn::conv2d(z, c0w_, c0b_, 1), film0s_, film0t_));
    if (skip_out) *skip_out = h;
    h = nn::avgpool2(h);
    h = nn::silu(modulate(nn::conv2d(h, d1w_, d1b_, 1), film1s_, film1t_));
    h = nn::silu(modulate(nn::conv2d(h, mw_, mb_, 1), film2s_, film2t_));
    return h; // u_t
}

Var DenoiserModel::mid_var(const Var& z, const std::vector<int>& ts, const Var& cond) const {
    if (z.shape().c != 3 || z.shape().h != size_ || z.shape().w != size_)
        throw std::invalid_argument("denoiser: latent shape mismatch, got " + z.shape().str());
    return run_half(z, cond_vector(ts, cond), nullptr);
}

Var DenoiserModel::eps_var(const Var& z, const std::vector<int>& ts, const Var& cond) const {
    if (z.shape().c != 3 || z.shape().h != size_ || z.shape().w != size_)
        throw std::invalid_argument("denoiser: latent shape mismatch, got " + z.shape().str());
    const Var e = cond_vector(ts, cond);
    Var skip;
    Var h = run_half(z, e, &skip);
    h = nn::conv2d(h, pw_, pb_, 0); // 1x1 projection back to the skip width
    h = nn::add(nn::upsample2(h), skip);
    {
        Var s = nn::linear(e, film3s_, Var::constant(nn::Tensor(nn::Shape{film3s_.shape().n, 1, 1, 1})));
        Var t = nn::linear(e, film3t_, Var::constant(nn::Tensor(nn::Shape{film3t_.shape().n, 1, 1, 1})));
        h = nn::silu(nn::film(nn::conv2d(h, u1w_, u1b_, 1), s, t));
    }
    return nn::conv2d(h, ow_, ob_, 1);
}

nn::Tensor DenoiserModel::eps(const nn::Tensor& z, int t, const nn::Tensor& cond) const {
    return eps_var(Var::constant(z), {t}, Var::constant(cond)).value();
}

nn::Tensor DenoiserModel::mid(const nn::Tensor& z, int t, const nn::Tensor& cond) const {
    return mid_var(Var::constant(z), {t}, Var::constant(cond)).value();
}

DenoiserModel::TrainReport DenoiserModel::train(const core::DatasetManifest& manifest,
                                                const NoiseSchedule& schedule,
                                                const TrainConfig& cfg) {
    schedule.validate();
    if (manifest.entries.empty()) throw std::invalid_argument("denoiser: empty manifest");
    const auto images = reg::load_manifest_images(manifest, size_);
    std::vector<nn::Tensor> z0s, conds;
    for (std::size_t i = 0; i < images.size(); ++i) {
        z0s.push_back(tx::image_to_tensor(images[i]));
        const auto& cap = manifest.entries[i].caption;
        conds.push_back(cap ? text_embedding(*cap) : null_embedding());
    }

    Rng rng(splitmix64(cfg.seed ^ 0xD1F2D1F2ULL));
    nn::Adam opt(params_.params(), cfg.lr);
    TrainReport report;
    const int window = 25;
    double win_acc = 0;
    int win_n = 0;
    const Eigen::Index latent = static_cast<Eigen::Index>(3) * size_ * size_;

    for (int step = 0; step < cfg.steps; ++step) {
        const int bn = cfg.batch_size;
        nn::Tensor zt(nn::Shape{bn, 3, size_, size_});
        nn::Tensor target(nn::Shape{bn, 3, size_, size_});
        nn::Tensor cond(nn::Shape{bn, kCond, 1, 1});
        std::vector<int> ts(static_cast<std::size_t>(bn));
        for (int i = 0; i < bn; ++i) {
            const std::size_t idx = rng.below(z0s.size());
            const int t = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(schedule.T)));
            ts[static_cast<std::size_t>(i)] = t;
            const double a = schedule.alpha(t);
            for (Eigen::Index j = 0; j < latent; ++j) {
                const double eps = rng.normal();
                target.data[i * latent + j] = eps;
                zt.data[i * latent + j] =
                    std::sqrt(a) * z0s[idx].data[j] + std::sqrt(1.0 - a) * eps;
            }
            const bool drop = rng.uniform() < cfg.null_drop;
            if (!drop)
                cond.data.segment(static_cast<Eigen::Index>(i) * kCond, kCond) = conds[idx].data;
        }
        Var loss = nn::mse_loss(eps_var(Var::constant(zt), ts, Var::constant(cond)),
                                Var::constant(target));
        nn::backward(loss);
        opt.step();
        win_acc += loss.scalar_value();
        if (++win_n == window || step + 1 == cfg.steps) {
            report.loss_trace.push_back(win_acc / win_n);
            win_acc = 0;
            win_n = 0;
        }
    }
    report.initial_loss = report.loss_trace.front();
    report.final_loss = report.loss_trace.back();
    trained_ = true;
    return report;
}

core::Image DenoiserModel::sample(const NoiseSchedule& schedule, std::uint64_t seed) const {
    Rng rng(splitmix64(seed ^ 0x5A3D1E5ULL));
    nn::Tensor z(latent_shape());
    for (Eigen::Index i = 0; i < z.data.size(); ++i) z.data[i] = rng.normal();
    const nn::Tensor null = null_embedding();
    for (int t = schedule.T; t >= 1; --t)
        z = ddim_step(z, t, schedule, eps(z, schedule.orig_t(t), null));
    return decode(z);
}

nn::Checkpoint DenoiserModel::checkpoint() const {
    nlohmann::json meta;
    meta["size"] = size_;
    meta["cond"] = kCond;
    meta["trained"] = trained_;
    return nn::snapshot("denoiser", seed_, meta.dump(), params_);
}

DenoiserModel DenoiserModel::from_checkpoint(const nn::Checkpoint& ckpt) {
    if (ckpt.kind != "denoiser") throw std::runtime_error("checkpoint kind mismatch: " + ckpt.kind);
    const auto meta = nlohmann::json::parse(ckpt.meta_json);
    DenoiserModel dm(meta.at("size").get<int>(), ckpt.seed);
    nn::restore(ckpt, dm.params_);
    dm.trained_ = meta.value("trained", true);
    return dm;
}

} // namespace affect::diffusion
