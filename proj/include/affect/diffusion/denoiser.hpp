#pragma once

#include "affect/core/image.hpp"
#include "affect/core/manifest.hpp"
#include "affect/diffusion/schedule.hpp"
#include "affect/nn/layers.hpp"
#include "affect/nn/serialize.hpp"

#include <optional>
#include <string>
#include <vector>

namespace affect::diffusion {

// Small text-conditionable noise-prediction network for pixel-space
// diffusion on square desk-scale images. Conditioning enters as FiLM
// modulation from [timestep embedding | caption embedding]; the mid-block
// activation u_t is exposed for guidance-regressor use. The latent codec is
// the identity at this scale: encode/decode just move pixels in and out of
// tensor form.
class DenoiserModel {
public:
    static constexpr int kCond = 16;    // caption embedding width
    static constexpr int kMidChannels = 32;

    DenoiserModel(int image_size, std::uint64_t seed);

    int image_size() const { return size_; }
    nn::Shape latent_shape() const { return nn::Shape{1, 3, size_, size_}; }
    nn::Shape mid_shape() const { return nn::Shape{1, kMidChannels, size_ / 2, size_ / 2}; }

    // identity codec
    nn::Tensor encode(const core::Image& img) const;
    core::Image decode(const nn::Tensor& z) const;

    // hashing bag-of-words caption embedding; psi("") is the all-zero null
    nn::Tensor text_embedding(const std::string& caption) const;
    nn::Tensor null_embedding() const;

    // eps prediction; ts has one (original-schedule) timestep per sample
    nn::Var eps_var(const nn::Var& z, const std::vector<int>& ts, const nn::Var& cond) const;
    nn::Tensor eps(const nn::Tensor& z, int t, const nn::Tensor& cond) const;

    // first half only, up to and including the mid block
    nn::Var mid_var(const nn::Var& z, const std::vector<int>& ts, const nn::Var& cond) const;
    nn::Tensor mid(const nn::Tensor& z, int t, const nn::Tensor& cond) const;

    struct TrainConfig {
        int steps = 1500;
        int batch_size = 8;
        double lr = 1.5e-3;
        std::uint64_t seed = 0;
        double null_drop = 0.1; // unconditional exposure per sample
    };
    struct TrainReport {
        std::vector<double> loss_trace; // per logging window
        double initial_loss = 0.0;
        double final_loss = 0.0;
    };
    // images+captions from the manifest; captionless samples train
    // unconditionally
    TrainReport train(const core::DatasetManifest& manifest, const NoiseSchedule& schedule,
                      const TrainConfig& cfg);

    bool trained() const { return trained_; }
    nn::Checkpoint checkpoint() const;
    static DenoiserModel from_checkpoint(const nn::Checkpoint& ckpt);
    std::string weights_digest() const { return nn::weights_digest(params_); }

    // deterministic unconditional sample from pure noise (diagnostics)
    core::Image sample(const NoiseSchedule& schedule, std::uint64_t seed) const;

private:
    struct Blocks;
    nn::Var cond_vector(const std::vector<int>& ts, const nn::Var& cond) const;
    nn::Var run_half(const nn::Var& z, const nn::Var& e, nn::Var* skip_out) const;

    int size_;
    std::uint64_t seed_;
    bool trained_ = false;
    nn::ParamStore params_;
    // conditioning trunk
    nn::Var f1w_, f1b_, f2w_, f2b_;
    // film projections per injection site
    nn::Var film0s_, film0t_, film1s_, film1t_, film2s_, film2t_, film3s_, film3t_;
    // unet
    nn::Var c0w_, c0b_, d1w_, d1b_, mw_, mb_, pw_, pb_, u1w_, u1b_, ow_, ob_;
};

} // namespace affect::diffusion
