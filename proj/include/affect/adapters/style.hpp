#pragma once

#include "affect/adapters/result.hpp"
#include "affect/core/manifest.hpp"
#include "affect/nn/layers.hpp"
#include "affect/nn/serialize.hpp"
#include "affect/regressor/pixel_regressor.hpp"

namespace affect::adapters {

// Content/style autoencoder: a spatial content code, a small global style
// vector, and a FiLM-modulated decoder. Desk-scale training drops the
// adversarial term and relies on image + latent reconstruction after style
// swaps, which is all the style optimization needs.
class Disentangler {
public:
    static constexpr int kImage = 48;
    static constexpr int kStyleDim = 8;
    static constexpr int kContentChannels = 20;

    explicit Disentangler(std::uint64_t seed);

    struct TrainConfig {
        int epochs = 60;
        int batch_size = 8;
        double lr = 2e-3;
        std::uint64_t seed = 0;
        double validation_fraction = 0.12;
    };
    struct TrainReport {
        std::vector<double> loss_per_epoch;
        double recon_psnr = 0.0;          // held-out reconstruction
        double content_consistency = 0.0; // mean L1 content drift across swaps
        double style_recovery_l1 = 0.0;   // style recovered after a swap
    };
    // rejects corpora under 100 images
    TrainReport train(const core::DatasetManifest& corpus, const TrainConfig& cfg);

    nn::Var encode_content_var(const nn::Var& x) const; // [n,Cc,12,12]
    nn::Var encode_style_var(const nn::Var& x) const;   // [n,S]
    nn::Var decode_var(const nn::Var& content, const nn::Var& style) const;

    nn::Tensor encode_content(const core::Image& img) const;
    nn::Tensor encode_style(const core::Image& img) const;
    core::Image decode(const nn::Tensor& content, const nn::Tensor& style) const;

    // consistency bound measured on validation data at train time
    double trained_consistency() const { return consistency_; }
    bool trained() const { return trained_; }
    nn::Checkpoint checkpoint() const;
    static Disentangler from_checkpoint(const nn::Checkpoint& ckpt);
    std::string weights_digest() const { return nn::weights_digest(params_); }

private:
    nn::Tensor prep(const core::Image& img) const;

    std::uint64_t seed_;
    bool trained_ = false;
    double consistency_ = 0.0;
    nn::ParamStore params_;
    nn::Var ec1w_, ec1b_, ec2w_, ec2b_, ec3w_, ec3b_;
    nn::Var es1w_, es1b_, es2w_, es2b_, es3w_, es3b_, esfw_, esfb_;
    nn::Var fs1_, ft1_, fs2_, ft2_;
    nn::Var d1w_, d1b_, d2w_, d2b_, d3w_, d3b_, d4w_, d4b_;
};

struct StyleOptions {
    double w1 = 1.0; // content-consistency weight
    double w2 = 0.2; // emotion-distance weight
    int iters = 200;
    double lr = 0.05; // Adam with beta1=0.9, beta2=0
    std::uint64_t seed = 0;
    double stop_tol = 1e-6;
    int stop_window = 20;
};

// Eq.-style latent optimization: minimizes
//   w1 * mean|E_c(I) - E_c(D(c0, s))| + w2 * |[v',a'] - R(D(c0, s))|
// over the style vector s from s0 = E_s(I); the content code stays pinned.
AdaptationResult optimize_style(const core::Image& img, const core::EmotionReference& ref,
                                const reg::PixelRegressor& R, const Disentangler& model,
                                const StyleOptions& opts);

} // namespace affect::adapters
