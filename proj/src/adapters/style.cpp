#include "affect/adapters/style.hpp"

#include "affect/transforms/diff_transforms.hpp"
#include "affect/util/rng.hpp"

#include <nlohmann/json.hpp>

#include <numeric>
#include <stdexcept>

namespace affect::adapters {

using nn::Var;

Disentangler::Disentangler(std::uint64_t seed) : seed_(seed) {
    Rng rng(splitmix64(seed ^ 0x57E1EULL));
    auto conv = [&](const char* name, int oc, int ic, int k) {
        Var w = params_.add(std::string(name) + ".w", nn::init_conv(oc, ic, k, k, rng));
        Var b = params_.add(std::string(name) + ".b", nn::Tensor(nn::Shape{oc, 1, 1, 1}));
        return std::pair{w, b};
    };
    std::tie(ec1w_, ec1b_) = conv("ec1", 12, 3, 3);
    std::tie(ec2w_, ec2b_) = conv("ec2", 24, 12, 3);
    std::tie(ec3w_, ec3b_) = conv("ec3", kContentChannels, 24, 3);

    std::tie(es1w_, es1b_) = conv("es1", 12, 3, 3);
    std::tie(es2w_, es2b_) = conv("es2", 16, 12, 3);
    std::tie(es3w_, es3b_) = conv("es3", 16, 16, 3);
    esfw_ = params_.add("esf.w", nn::init_linear(kStyleDim, 16, rng));
    esfb_ = params_.add("esf.b", nn::Tensor(nn::Shape{kStyleDim, 1, 1, 1}));

    // style -> FiLM modulation of the two decoder stages
    fs1_ = params_.add("film1.scale", nn::init_linear(kContentChannels, kStyleDim, rng));
    ft1_ = params_.add("film1.shift", nn::init_linear(kContentChannels, kStyleDim, rng));
    fs2_ = params_.add("film2.scale", nn::init_linear(14, kStyleDim, rng));
    ft2_ = params_.add("film2.shift", nn::init_linear(14, kStyleDim, rng));

    std::tie(d1w_, d1b_) = conv("d1", kContentChannels, kContentChannels, 3);
    std::tie(d2w_, d2b_) = conv("d2", 14, kContentChannels, 3);
    std::tie(d3w_, d3b_) = conv("d3", 10, 14, 3);
    std::tie(d4w_, d4b_) = conv("d4", 3, 10, 3);
}

nn::Tensor Disentangler::prep(const core::Image& img) const {
    core::Image rgb = img.channels() == 1 ? core::gray_to_rgb(img) : img;
    if (rgb.height() != kImage || rgb.width() != kImage)
        rgb = core::resize_bilinear(rgb, kImage, kImage);
    return tx::image_to_tensor(rgb);
}

Var Disentangler::encode_content_var(const Var& x) const {
    Var h = nn::avgpool2(nn::silu(nn::conv2d(x, ec1w_, ec1b_, 1)));  // 24
    h = nn::avgpool2(nn::silu(nn::conv2d(h, ec2w_, ec2b_, 1)));     // 12
    return nn::conv2d(h, ec3w_, ec3b_, 1);                           // linear content code
}

Var Disentangler::encode_style_var(const Var& x) const {
    Var h = nn::avgpool2(nn::silu(nn::conv2d(x, es1w_, es1b_, 1)));  // 24
    h = nn::avgpool2(nn::silu(nn::conv2d(h, es2w_, es2b_, 1)));     // 12
    h = nn::avgpool2(nn::silu(nn::conv2d(h, es3w_, es3b_, 1)));     // 6
    return nn::linear(nn::global_avg_pool(h), esfw_, esfb_);
}

Var Disentangler::decode_var(const Var& content, const Var& style) const {
    const int n = content.shape().n;
    auto zero_bias = [&](const Var& w) {
        return Var::constant(nn::Tensor(nn::Shape{w.shape().n, 1, 1, 1}));
    };
    Var s1 = nn::linear(style, fs1_, zero_bias(fs1_));
    Var t1 = nn::linear(style, ft1_, zero_bias(ft1_));
    Var s2 = nn::linear(style, fs2_, zero_bias(fs2_));
    Var t2 = nn::linear(style, ft2_, zero_bias(ft2_));
    (void)n;
    Var h = nn::silu(nn::film(nn::conv2d(content, d1w_, d1b_, 1), s1, t1)); // 12
    h = nn::upsample2(h);                                                   // 24
    h = nn::silu(nn::film(nn::conv2d(h, d2w_, d2b_, 1), s2, t2));
    h = nn::upsample2(h);                                                   // 48
    h = nn::silu(nn::conv2d(h, d3w_, d3b_, 1));
    return nn::sigmoid(nn::conv2d(h, d4w_, d4b_, 1));
}

nn::Tensor Disentangler::encode_content(const core::Image& img) const {
    if (!trained_) throw std::logic_error("disentangler: not trained");
    return encode_content_var(Var::constant(prep(img))).value();
}

nn::Tensor Disentangler::encode_style(const core::Image& img) const {
    if (!trained_) throw std::logic_error("disentangler: not trained");
    return encode_style_var(Var::constant(prep(img))).value();
}

core::Image Disentangler::decode(const nn::Tensor& content, const nn::Tensor& style) const {
    if (!trained_) throw std::logic_error("disentangler: not trained");
    return tx::tensor_to_image(decode_var(Var::constant(content), Var::constant(style)).value());
}

Disentangler::TrainReport Disentangler::train(const core::DatasetManifest& corpus,
                                              const TrainConfig& cfg) {
    if (corpus.entries.size() < 100)
        throw std::invalid_argument("disentangler: corpus too small (< 100 images)");
    const auto images = reg::load_manifest_images(corpus, kImage);
    std::vector<nn::Tensor> data;
    data.reserve(images.size());
    for (const auto& img : images) data.push_back(tx::image_to_tensor(img));
    const std::size_t n = data.size();

    Rng rng(splitmix64(cfg.seed ^ 0x57E1E7EAULL));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    const std::size_t n_val = std::max<std::size_t>(4, static_cast<std::size_t>(
                                                            std::round(n * cfg.validation_fraction)));
    const std::vector<std::size_t> val_idx(order.begin(), order.begin() + n_val);
    std::vector<std::size_t> train_idx(order.begin() + n_val, order.end());

    nn::Adam opt(params_.params(), cfg.lr);
    TrainReport report;
    const Eigen::Index img_count = data[0].data.size();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = train_idx.size(); i > 1; --i)
            std::swap(train_idx[i - 1], train_idx[rng.below(i)]);
        double acc = 0;
        int batches = 0;
        for (std::size_t start = 0; start + 1 < train_idx.size(); start += cfg.batch_size) {
            const int bn =
                static_cast<int>(std::min<std::size_t>(cfg.batch_size, train_idx.size() - start));
            nn::Tensor batch(nn::Shape{bn, 3, kImage, kImage});
            nn::Tensor swapped(nn::Shape{bn, 3, kImage, kImage});
            for (int i = 0; i < bn; ++i) {
                batch.data.segment(static_cast<Eigen::Index>(i) * img_count, img_count) =
                    data[train_idx[start + i]].data;
                // swap partner: the batch rotated by one
                swapped.data.segment(static_cast<Eigen::Index>(i) * img_count, img_count) =
                    data[train_idx[start + (static_cast<std::size_t>(i) + 1) % bn]].data;
            }
            const Var x = Var::constant(batch);
            const Var y = Var::constant(swapped);
            Var cx = encode_content_var(x);
            Var sx = encode_style_var(x);
            Var recon = decode_var(cx, sx);
            Var loss = nn::mse_loss(recon, x);

            // style swap: decode x's content with y's style, then both latents
            // must be recoverable
            Var sy = encode_style_var(y);
            Var mixed = decode_var(cx, sy);
            Var c_back = encode_content_var(mixed);
            Var s_back = encode_style_var(mixed);
            loss = nn::add(loss, nn::scale(nn::l1_loss(c_back, nn::detach(cx)), 0.5));
            loss = nn::add(loss, nn::scale(nn::l1_loss(s_back, nn::detach(sy)), 0.5));

            nn::backward(loss);
            opt.step();
            acc += loss.scalar_value();
            ++batches;
        }
        report.loss_per_epoch.push_back(acc / batches);
    }
    trained_ = true;

    // held-out diagnostics
    double psnr_acc = 0, cons_acc = 0, style_acc = 0;
    for (std::size_t k = 0; k < val_idx.size(); ++k) {
        const nn::Tensor& a = data[val_idx[k]];
        const nn::Tensor& b = data[val_idx[(k + 1) % val_idx.size()]];
        const Var xa = Var::constant(a);
        const Var xb = Var::constant(b);
        const nn::Tensor ca = encode_content_var(xa).value();
        const nn::Tensor sa = encode_style_var(xa).value();
        const nn::Tensor rec = decode_var(Var::constant(ca), Var::constant(sa)).value();
        psnr_acc += core::psnr(tx::tensor_to_image(rec), tx::tensor_to_image(a));

        const nn::Tensor sb = encode_style_var(xb).value();
        const nn::Tensor mixed = decode_var(Var::constant(ca), Var::constant(sb)).value();
        const nn::Tensor c_back = encode_content_var(Var::constant(mixed)).value();
        cons_acc += (c_back.data - ca.data).abs().mean();
        const nn::Tensor s_back = encode_style_var(Var::constant(mixed)).value();
        style_acc += (s_back.data - sb.data).abs().mean();
    }
    report.recon_psnr = psnr_acc / val_idx.size();
    report.content_consistency = cons_acc / val_idx.size();
    report.style_recovery_l1 = style_acc / val_idx.size();
    consistency_ = report.content_consistency;
    return report;
}

nn::Checkpoint Disentangler::checkpoint() const {
    nlohmann::json meta;
    meta["image"] = kImage;
    meta["style_dim"] = kStyleDim;
    meta["trained"] = trained_;
    meta["consistency"] = consistency_;
    return nn::snapshot("disentangler", seed_, meta.dump(), params_);
}

Disentangler Disentangler::from_checkpoint(const nn::Checkpoint& ckpt) {
    if (ckpt.kind != "disentangler")
        throw std::runtime_error("checkpoint kind mismatch: " + ckpt.kind);
    Disentangler d(ckpt.seed);
    nn::restore(ckpt, d.params_);
    const auto meta = nlohmann::json::parse(ckpt.meta_json);
    d.trained_ = meta.value("trained", true);
    d.consistency_ = meta.value("consistency", 0.0);
    return d;
}

AdaptationResult optimize_style(const core::Image& img, const core::EmotionReference& ref,
                                const reg::PixelRegressor& R, const Disentangler& model,
                                const StyleOptions& opts) {
    if (opts.w1 < 0 || opts.w2 < 0) throw std::invalid_argument("optimize_style: negative weights");
    ref.validate();
    if (!R.trained() || !model.trained())
        throw std::logic_error("optimize_style: models must be trained");

    const nn::Tensor c0 = model.encode_content(img);
    const nn::Tensor s0 = model.encode_style(img);
    const Var content = Var::constant(c0);

    nn::Tensor ref_t(nn::Shape{1, 2, 1, 1});
    ref_t.data[0] = ref.valence_ref;
    ref_t.data[1] = ref.arousal_ref;
    const Var ref_v = Var::constant(ref_t);

    Var style = Var::leaf(s0, true);
    nn::Adam opt({style}, opts.lr, 0.9, 0.0);

    auto objective = [&] {
        Var out = model.decode_var(content, style);
        Var loss = Var::scalar(0.0);
        if (opts.w1 > 0)
            loss = nn::add(loss, nn::scale(nn::l1_loss(model.encode_content_var(out), content),
                                           opts.w1));
        if (opts.w2 > 0)
            loss = nn::add(loss, nn::scale(nn::euclidean(ref_v, R.predict_var(out)), opts.w2));
        return loss;
    };

    AdaptationResult result;
    nn::Tensor best_style = s0;
    double best_loss = std::numeric_limits<double>::infinity();
    double best_at_window_start = best_loss;
    int window_count = 0;

    for (int it = 0; it < opts.iters; ++it) {
        Var loss = objective();
        const double value = loss.scalar_value();
        if (!std::isfinite(value)) break;
        result.loss_trace.push_back(value);
        if (value < best_loss) {
            best_loss = value;
            best_style = style.value();
        }
        if (++window_count >= opts.stop_window) {
            if (best_loss > best_at_window_start - opts.stop_tol) break;
            best_at_window_start = best_loss;
            window_count = 0;
        }
        nn::backward(loss);
        opt.step();
    }

    result.adapted = model.decode(c0, best_style);
    result.emotion_before = R.predict(img);
    result.emotion_after = R.predict(result.adapted);

    nlohmann::json code;
    code["style"] = std::vector<double>(best_style.data.data(),
                                        best_style.data.data() + best_style.data.size());
    code["style_delta_norm"] = std::sqrt((best_style.data - s0.data).square().sum());
    code["objective"] = best_loss;
    code["w1"] = opts.w1;
    code["w2"] = opts.w2;
    result.params_or_code = code.dump();
    result.validate();
    return result;
}

} // namespace affect::adapters
