#include "affect/regressor/pixel_regressor.hpp"

#include "affect/core/image_io.hpp"
#include "affect/transforms/diff_transforms.hpp"
#include "affect/util/rng.hpp"

#include <nlohmann/json.hpp>

#include <numeric>
#include <stdexcept>

namespace affect::reg {

using nn::Var;

void TrainConfig::validate() const {
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
        throw std::invalid_argument("train config: validation fraction must be in (0,1)");
    if (epochs < 1 || batch_size < 1 || lr <= 0.0)
        throw std::invalid_argument("train config: bad epochs/batch/lr");
}

std::vector<core::Image> load_manifest_images(const core::DatasetManifest& m, int size) {
    std::vector<core::Image> out;
    out.reserve(m.entries.size());
    for (const auto& e : m.entries) {
        core::Image img = core::load_image(e.image_path);
        if (img.channels() == 1) img = core::gray_to_rgb(img);
        out.push_back(core::resize_bilinear(img, size, size));
    }
    return out;
}

PixelRegressor::PixelRegressor(std::uint64_t seed) : seed_(seed) { build(seed); }

void PixelRegressor::build(std::uint64_t seed) {
    Rng rng(splitmix64(seed ^ 0x9E6E550DULL));
    auto conv = [&](const char* name, int oc, int ic) {
        Var w = params_.add(std::string(name) + ".w", nn::init_conv(oc, ic, 3, 3, rng));
        Var b = params_.add(std::string(name) + ".b", nn::Tensor(nn::Shape{oc, 1, 1, 1}));
        return std::pair{w, b};
    };
    std::tie(c1w_, c1b_) = conv("block1", 12, 3);
    std::tie(c2w_, c2b_) = conv("block2", 24, 12);
    std::tie(c3w_, c3b_) = conv("block3", 32, 24);
    std::tie(c4w_, c4b_) = conv("block4", kFeat, 32);
    hw_ = params_.add("head.w", nn::init_linear(2, kFeat, rng));
    hb_ = params_.add("head.b", nn::Tensor(nn::Shape{2, 1, 1, 1}));
}

Var PixelRegressor::early_features_var(const Var& x) const {
    Var h = nn::bilinear_resize(x, kInput, kInput);
    h = nn::avgpool2(nn::silu(nn::conv2d(h, c1w_, c1b_, 1)));  // 32
    h = nn::avgpool2(nn::silu(nn::conv2d(h, c2w_, c2b_, 1)));  // 16
    return h;
}

Var PixelRegressor::features_var(const Var& x) const {
    Var h = early_features_var(x);
    h = nn::avgpool2(nn::silu(nn::conv2d(h, c3w_, c3b_, 1)));  // 8
    h = nn::avgpool2(nn::silu(nn::conv2d(h, c4w_, c4b_, 1)));  // 4
    return nn::global_avg_pool(h);
}

Var PixelRegressor::predict_var(const Var& x) const {
    return nn::sigmoid(nn::linear(features_var(x), hw_, hb_));
}

core::EmotionRating PixelRegressor::predict(const core::Image& img) const {
    if (!trained_) throw std::logic_error("pixel regressor: not trained");
    const core::Image rgb = img.channels() == 1 ? core::gray_to_rgb(img) : img;
    const Var y = predict_var(Var::constant(tx::image_to_tensor(rgb)));
    return core::EmotionRating{y.value().data[0], y.value().data[1]};
}

Eigen::VectorXd PixelRegressor::features(const core::Image& img) const {
    if (!trained_) throw std::logic_error("pixel regressor: not trained");
    const core::Image rgb = img.channels() == 1 ? core::gray_to_rgb(img) : img;
    const Var f = features_var(Var::constant(tx::image_to_tensor(rgb)));
    return Eigen::VectorXd::Map(f.value().data.data(), f.value().size());
}

TrainReport PixelRegressor::train(const core::DatasetManifest& manifest, const TrainConfig& cfg) {
    cfg.validate();
    if (manifest.entries.empty()) throw std::invalid_argument("train: empty manifest");
    if (!manifest.normalized) throw std::invalid_argument("train: manifest ratings not normalized");

    const auto images = load_manifest_images(manifest, kInput);
    const std::size_t n = images.size();
    const std::size_t n_val = static_cast<std::size_t>(std::round(n * cfg.validation_fraction));
    if (n_val < 2 || n - n_val < 2)
        throw std::invalid_argument("train: need at least 2 samples on each side of the split");

    Rng rng(splitmix64(cfg.seed ^ 0x5EED5EEDULL));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    const std::vector<std::size_t> val_idx(order.begin(), order.begin() + n_val);
    std::vector<std::size_t> train_idx(order.begin() + n_val, order.end());

    // originals at [0, n), mirrored copies at [n, 2n)
    std::vector<nn::Tensor> tensors;
    tensors.reserve(cfg.augment_hflip ? 2 * n : n);
    for (const auto& img : images) tensors.push_back(tx::image_to_tensor(img));
    if (cfg.augment_hflip)
        for (const auto& img : images)
            tensors.push_back(tx::image_to_tensor(core::mirror_horizontal(img)));

    auto label = [&](std::size_t i) {
        return std::pair{manifest.entries[i].valence, manifest.entries[i].arousal};
    };

    auto val_mae = [&] {
        double mv = 0, ma = 0;
        for (std::size_t i : val_idx) {
            const Var y = predict_var(Var::constant(tensors[i]));
            const auto [lv, la] = label(i);
            mv += std::abs(y.value().data[0] - lv);
            ma += std::abs(y.value().data[1] - la);
        }
        return std::pair{mv / val_idx.size(), ma / val_idx.size()};
    };

    nn::Adam opt(params_.params(), cfg.lr);
    TrainReport report;
    double best = 1e18;
    int since_best = 0;
    std::vector<nn::Tensor> best_weights;
    auto snapshot_weights = [&] {
        best_weights.clear();
        for (const auto& p : params_.params()) best_weights.push_back(p.value());
    };
    snapshot_weights();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = train_idx.size(); i > 1; --i)
            std::swap(train_idx[i - 1], train_idx[rng.below(i)]);
        double loss_acc = 0;
        int batches = 0;
        for (std::size_t start = 0; start < train_idx.size(); start += cfg.batch_size) {
            const int bn =
                static_cast<int>(std::min<std::size_t>(cfg.batch_size, train_idx.size() - start));
            nn::Tensor batch(nn::Shape{bn, 3, kInput, kInput});
            nn::Tensor targets(nn::Shape{bn, 2, 1, 1});
            for (int i = 0; i < bn; ++i) {
                const std::size_t idx = train_idx[start + i];
                // each appearance flips with p=1/2, drawn from the run stream
                const bool flip = cfg.augment_hflip && rng.uniform() < 0.5;
                const nn::Tensor& src = flip ? tensors[n + idx] : tensors[idx];
                batch.data.segment(static_cast<Eigen::Index>(i) * 3 * kInput * kInput,
                                   3 * kInput * kInput) = src.data;
                const auto [lv, la] = label(idx);
                targets.data[2 * i] = lv;
                targets.data[2 * i + 1] = la;
            }
            Var loss = nn::mse_loss(predict_var(Var::constant(batch)), Var::constant(targets));
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
            snapshot_weights();
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    for (std::size_t i = 0; i < params_.size(); ++i)
        params_.params()[i].node()->value = best_weights[i];
    trained_ = true;
    return report;
}

std::pair<double, double> PixelRegressor::evaluate_mae(const core::DatasetManifest& manifest) const {
    if (!trained_) throw std::logic_error("pixel regressor: not trained");
    if (manifest.entries.empty()) throw std::invalid_argument("evaluate_mae: empty manifest");
    double mv = 0, ma = 0;
    for (const auto& e : manifest.entries) {
        core::Image img = core::load_image(e.image_path);
        const auto r = predict(img);
        mv += std::abs(r.valence - e.valence);
        ma += std::abs(r.arousal - e.arousal);
    }
    const double n = static_cast<double>(manifest.entries.size());
    return {mv / n, ma / n};
}

nn::Checkpoint PixelRegressor::checkpoint() const {
    nlohmann::json meta;
    meta["input"] = kInput;
    meta["features"] = kFeat;
    meta["trained"] = trained_;
    return nn::snapshot("pixel-regressor", seed_, meta.dump(), params_);
}

PixelRegressor PixelRegressor::from_checkpoint(const nn::Checkpoint& ckpt) {
    if (ckpt.kind != "pixel-regressor")
        throw std::runtime_error("checkpoint kind mismatch: " + ckpt.kind);
    PixelRegressor r(ckpt.seed);
    nn::restore(ckpt, r.params_);
    r.trained_ = nlohmann::json::parse(ckpt.meta_json).value("trained", true);
    return r;
}

} // namespace affect::reg
