#include "affect/regressor/guidance_regressor.hpp"

#include "affect/diffusion/ddim.hpp"
#include "affect/transforms/diff_transforms.hpp"
#include "affect/util/rng.hpp"

#include <nlohmann/json.hpp>

#include <numeric>
#include <stdexcept>

namespace affect::reg {

using nn::Var;

GuidanceRegressor::GuidanceRegressor(const nn::Shape& mid_shape, std::uint64_t seed)
    : mid_shape_(mid_shape), seed_(seed) {
    if (mid_shape.h < 16 || mid_shape.w < 16 || mid_shape.h % 16 || mid_shape.w % 16)
        throw std::invalid_argument("guidance regressor: mid layer must be a multiple of 16 (four pools)");
    Rng rng(splitmix64(seed ^ 0x6D1DFULL));
    auto conv = [&](const char* name, int oc, int ic) {
        Var w = params_.add(std::string(name) + ".w", nn::init_conv(oc, ic, 3, 3, rng));
        Var b = params_.add(std::string(name) + ".b", nn::Tensor(nn::Shape{oc, 1, 1, 1}));
        return std::pair{w, b};
    };
    std::tie(c1w_, c1b_) = conv("conv1", 24, mid_shape.c);
    std::tie(c2w_, c2b_) = conv("conv2", 24, 24);
    std::tie(c3w_, c3b_) = conv("conv3", 24, 24);
    std::tie(c4w_, c4b_) = conv("conv4", 24, 24);
    flat_ = 24 * (mid_shape.h / 16) * (mid_shape.w / 16);
    f1w_ = params_.add("fc1.w", nn::init_linear(24, flat_, rng));
    f1b_ = params_.add("fc1.b", nn::Tensor(nn::Shape{24, 1, 1, 1}));
    f2w_ = params_.add("fc2.w", nn::init_linear(2, 24, rng));
    f2b_ = params_.add("fc2.b", nn::Tensor(nn::Shape{2, 1, 1, 1}));
}

Var GuidanceRegressor::predict_var(const Var& u) const {
    if (u.shape().c != mid_shape_.c || u.shape().h != mid_shape_.h || u.shape().w != mid_shape_.w)
        throw std::invalid_argument("guidance regressor: activation shape mismatch, got " +
                                    u.shape().str() + " expected " + mid_shape_.str());
    Var h = nn::maxpool2(nn::relu(nn::conv2d(u, c1w_, c1b_, 1)));
    h = nn::maxpool2(nn::relu(nn::conv2d(h, c2w_, c2b_, 1)));
    h = nn::maxpool2(nn::relu(nn::conv2d(h, c3w_, c3b_, 1)));
    h = nn::maxpool2(nn::relu(nn::conv2d(h, c4w_, c4b_, 1)));
    h = nn::reshape(h, nn::Shape{u.shape().n, flat_, 1, 1});
    h = nn::relu(nn::linear(h, f1w_, f1b_));
    return nn::sigmoid(nn::linear(h, f2w_, f2b_));
}

core::EmotionRating GuidanceRegressor::predict_emotion_mid(const nn::Tensor& u_t) const {
    if (!trained_) throw std::logic_error("guidance regressor: not trained");
    const Var y = predict_var(Var::constant(u_t));
    return core::EmotionRating{y.value().data[0], y.value().data[1]};
}

TrainReport GuidanceRegressor::train(const core::DatasetManifest& manifest,
                                     const diffusion::DenoiserModel& dm,
                                     const diffusion::NoiseSchedule& schedule,
                                     const TrainConfig& cfg) {
    cfg.validate();
    schedule.validate();
    if (manifest.entries.empty()) throw std::invalid_argument("guidance train: empty manifest");
    if (!manifest.normalized) throw std::invalid_argument("guidance train: ratings not normalized");
    if (!(dm.mid_shape().c == mid_shape_.c && dm.mid_shape().h == mid_shape_.h &&
          dm.mid_shape().w == mid_shape_.w))
        throw std::invalid_argument("guidance train: denoiser mid shape mismatch");

    const auto images = load_manifest_images(manifest, dm.image_size());
    std::vector<nn::Tensor> z0s;
    z0s.reserve(images.size());
    for (const auto& img : images) z0s.push_back(tx::image_to_tensor(img));
    const std::size_t n = z0s.size();

    Rng rng(splitmix64(cfg.seed ^ 0x6D1D7EA1ULL));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    const std::size_t n_val = static_cast<std::size_t>(std::round(n * cfg.validation_fraction));
    if (n_val < 2 || n - n_val < 2)
        throw std::invalid_argument("guidance train: split leaves too few samples");
    const std::vector<std::size_t> val_idx(order.begin(), order.begin() + n_val);
    std::vector<std::size_t> train_idx(order.begin() + n_val, order.end());

    const nn::Tensor null = dm.null_embedding();
    const Eigen::Index latent = z0s[0].data.size();

    // fixed validation set: one (t, noise) pair per held-out sample
    std::vector<nn::Tensor> val_uts;
    for (std::size_t i : val_idx) {
        const int t = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(schedule.T)));
        nn::Tensor noise(z0s[i].shape);
        for (Eigen::Index j = 0; j < latent; ++j) noise.data[j] = rng.normal();
        val_uts.push_back(dm.mid(diffusion::forward_diffuse(z0s[i], t, schedule, noise),
                                 schedule.orig_t(t), null));
    }
    auto val_mae = [&] {
        double mv = 0, ma = 0;
        for (std::size_t k = 0; k < val_idx.size(); ++k) {
            const Var y = predict_var(Var::constant(val_uts[k]));
            mv += std::abs(y.value().data[0] - manifest.entries[val_idx[k]].valence);
            ma += std::abs(y.value().data[1] - manifest.entries[val_idx[k]].arousal);
        }
        return std::pair{mv / val_idx.size(), ma / val_idx.size()};
    };

    nn::Adam opt(params_.params(), cfg.lr);
    TrainReport report;
    double best = 1e18;
    int since_best = 0;
    std::vector<nn::Tensor> best_weights;
    auto snap = [&] {
        best_weights.clear();
        for (const auto& p : params_.params()) best_weights.push_back(p.value());
    };
    snap();

    const auto& ms = mid_shape_;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = train_idx.size(); i > 1; --i)
            std::swap(train_idx[i - 1], train_idx[rng.below(i)]);
        double loss_acc = 0;
        int batches = 0;
        for (std::size_t start = 0; start < train_idx.size(); start += cfg.batch_size) {
            const int bn =
                static_cast<int>(std::min<std::size_t>(cfg.batch_size, train_idx.size() - start));
            nn::Tensor batch(nn::Shape{bn, ms.c, ms.h, ms.w});
            nn::Tensor target(nn::Shape{bn, 2, 1, 1});
            const Eigen::Index mid_count = static_cast<Eigen::Index>(ms.c) * ms.h * ms.w;
            for (int i = 0; i < bn; ++i) {
                const std::size_t idx = train_idx[start + i];
                const int t = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(schedule.T)));
                nn::Tensor noise(z0s[idx].shape);
                for (Eigen::Index j = 0; j < latent; ++j) noise.data[j] = rng.normal();
                const nn::Tensor ut = dm.mid(diffusion::forward_diffuse(z0s[idx], t, schedule, noise),
                                             schedule.orig_t(t), null);
                batch.data.segment(static_cast<Eigen::Index>(i) * mid_count, mid_count) = ut.data;
                target.data[2 * i] = manifest.entries[idx].valence;
                target.data[2 * i + 1] = manifest.entries[idx].arousal;
            }
            Var loss = nn::mse_loss(predict_var(Var::constant(batch)), Var::constant(target));
            nn::backward(loss);
            opt.step();
            loss_acc += loss.scalar_value();
            ++batches;
        }
        report.train_loss.push_back(loss_acc / batches);
        const auto [mv, ma] = val_mae();
        report.val_mae_valence.push_back(mv);
        report.val_mae_arousal.push_back(ma);
        const double mean_mae = 0.5 * (mv + ma);
        if (mean_mae < best - 1e-5) {
            best = mean_mae;
            since_best = 0;
            report.best_epoch = epoch;
            report.best_val_mae_valence = mv;
            report.best_val_mae_arousal = ma;
            snap();
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    for (std::size_t i = 0; i < params_.size(); ++i)
        params_.params()[i].node()->value = best_weights[i];
    trained_ = true;
    return report;
}

std::pair<double, double> GuidanceRegressor::mae_at_timestep(
    const core::DatasetManifest& manifest, const diffusion::DenoiserModel& dm,
    const diffusion::NoiseSchedule& schedule, int t, std::uint64_t noise_seed) const {
    if (!trained_) throw std::logic_error("guidance regressor: not trained");
    const auto images = load_manifest_images(manifest, dm.image_size());
    Rng rng(splitmix64(noise_seed ^ 0xAB12ULL));
    const nn::Tensor null = dm.null_embedding();
    double mv = 0, ma = 0;
    for (std::size_t i = 0; i < images.size(); ++i) {
        const nn::Tensor z0 = tx::image_to_tensor(images[i]);
        nn::Tensor noise(z0.shape);
        for (Eigen::Index j = 0; j < noise.data.size(); ++j) noise.data[j] = rng.normal();
        const nn::Tensor ut =
            dm.mid(diffusion::forward_diffuse(z0, t, schedule, noise), schedule.orig_t(t), null);
        const auto r = predict_emotion_mid(ut);
        mv += std::abs(r.valence - manifest.entries[i].valence);
        ma += std::abs(r.arousal - manifest.entries[i].arousal);
    }
    return {mv / images.size(), ma / images.size()};
}

nn::Checkpoint GuidanceRegressor::checkpoint() const {
    nlohmann::json meta;
    meta["mid"] = {mid_shape_.n, mid_shape_.c, mid_shape_.h, mid_shape_.w};
    meta["trained"] = trained_;
    return nn::snapshot("guidance-regressor", seed_, meta.dump(), params_);
}

GuidanceRegressor GuidanceRegressor::from_checkpoint(const nn::Checkpoint& ckpt) {
    if (ckpt.kind != "guidance-regressor")
        throw std::runtime_error("checkpoint kind mismatch: " + ckpt.kind);
    const auto meta = nlohmann::json::parse(ckpt.meta_json);
    const auto ms = meta.at("mid");
    GuidanceRegressor g(nn::Shape{ms[0].get<int>(), ms[1].get<int>(), ms[2].get<int>(),
                                  ms[3].get<int>()},
                        ckpt.seed);
    nn::restore(ckpt, g.params_);
    g.trained_ = meta.value("trained", true);
    return g;
}

} // namespace affect::reg
