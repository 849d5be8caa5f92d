#pragma once

#include "affect/diffusion/denoiser.hpp"
#include "affect/diffusion/schedule.hpp"
#include "affect/nn/layers.hpp"

namespace affect::diffusion {

// z_t = sqrt(a_t) z0 + sqrt(1 - a_t) noise, with a the cumulative alpha
nn::Tensor forward_diffuse(const nn::Tensor& z0, int t, const NoiseSchedule& s,
                           const nn::Tensor& noise);

// Deterministic DDIM update z_t -> z_{t-1} given a noise estimate:
//   x0 = (z_t - sqrt(1-a_t) eps) / sqrt(a_t)
//   z_{t-1} = sqrt(a_{t-1}) x0 + sqrt(1-a_{t-1}) eps
nn::Tensor ddim_step(const nn::Tensor& z_t, int t, const NoiseSchedule& s,
                     const nn::Tensor& eps_hat);
// graph form used inside the null-text inner loop
nn::Var ddim_step_var(const nn::Var& z_t, int t, const NoiseSchedule& s, const nn::Var& eps_hat);

// Inverted trajectory. z[k] is z*_k for k = 0..T, with z[0] the encoded
// input; cond is the caption conditioning used for every epsilon query.
struct LatentTrajectory {
    std::vector<nn::Tensor> z;
    nn::Tensor cond;
    int T = 0;

    void validate(const nn::Shape& latent) const;
};

// DDIM inversion z0 -> zT, evaluating eps at the source step of each hop
LatentTrajectory ddim_invert(const nn::Tensor& z0, const nn::Tensor& cond,
                             const NoiseSchedule& s, const DenoiserModel& dm);

} // namespace affect::diffusion
