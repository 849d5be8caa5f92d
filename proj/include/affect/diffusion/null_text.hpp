#pragma once

#include "affect/diffusion/ddim.hpp"

namespace affect::diffusion {

// Per-timestep unconditional embeddings recovered by tracking the inversion
// trajectory under classifier-free-guided resampling.
struct NullTextResult {
    std::vector<nn::Tensor> null_embeddings; // index t-1 holds the embedding for step t
    struct StepReport {
        int t = 0;
        double initial = 0.0;
        double final = 0.0;
        bool reduced = false;
    };
    std::vector<StepReport> steps; // ordered t = T .. 1

    const nn::Tensor& at(int t) const { return null_embeddings.at(static_cast<std::size_t>(t) - 1); }
};

struct NullTextConfig {
    double guidance_scale = 2.0; // the CFG scale the embeddings are tuned for
    int inner_iters = 10;
    double lr = 1e-2;
};

// For t = T..1: minimize | z*_{t-1} - step(z~_t, eps_cfg(null_t)) |^2 over
// null_t, then advance z~_{t-1} with the optimized embedding. Each step
// starts from the previous step's solution.
NullTextResult null_text_optimize(const LatentTrajectory& traj, const nn::Tensor& cond,
                                  const DenoiserModel& dm, const NoiseSchedule& schedule,
                                  const NullTextConfig& cfg = NullTextConfig{});

// Resample from z_T down to z_0 with CFG only (no guidance term). Passing an
// empty NullTextResult uses the fixed null embedding at every step.
nn::Tensor cfg_resample(const LatentTrajectory& traj, const nn::Tensor& cond,
                        const DenoiserModel& dm, const NoiseSchedule& schedule, double w,
                        const NullTextResult* nulls = nullptr);

} // namespace affect::diffusion
