#pragma once

#include "affect/core/manifest.hpp"
#include "affect/diffusion/denoiser.hpp"
#include "affect/regressor/pixel_regressor.hpp"

namespace affect::reg {

// Valence/arousal head on a denoiser mid-layer activation u_t: four conv
// layers, each followed by ReLU and max-pooling, then two fully connected
// layers into a logistic [0,1]^2 output.
class GuidanceRegressor {
public:
    GuidanceRegressor(const nn::Shape& mid_shape, std::uint64_t seed);

    nn::Var predict_var(const nn::Var& u) const; // [n,2]
    core::EmotionRating predict_emotion_mid(const nn::Tensor& u_t) const;

    // Implements the training loop: z0 = E(I), t uniform, z_t forward
    // diffusion, u_t = first denoiser half under the null embedding, then
    // regression of (v,a) on u_t. Runs until the validation MAE stops
    // improving (patience from cfg).
    TrainReport train(const core::DatasetManifest& manifest, const diffusion::DenoiserModel& dm,
                      const diffusion::NoiseSchedule& schedule, const TrainConfig& cfg);

    // validation-style MAE at a fixed timestep over a manifest (diagnostics)
    std::pair<double, double> mae_at_timestep(const core::DatasetManifest& manifest,
                                              const diffusion::DenoiserModel& dm,
                                              const diffusion::NoiseSchedule& schedule, int t,
                                              std::uint64_t noise_seed) const;

    const nn::Shape& mid_shape() const { return mid_shape_; }
    bool trained() const { return trained_; }
    nn::Checkpoint checkpoint() const;
    static GuidanceRegressor from_checkpoint(const nn::Checkpoint& ckpt);
    std::string weights_digest() const { return nn::weights_digest(params_); }

private:
    nn::Shape mid_shape_;
    std::uint64_t seed_;
    bool trained_ = false;
    nn::ParamStore params_;
    nn::Var c1w_, c1b_, c2w_, c2b_, c3w_, c3b_, c4w_, c4b_, f1w_, f1b_, f2w_, f2b_;
    int flat_ = 0;
};

} // namespace affect::reg
