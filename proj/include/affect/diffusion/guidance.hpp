#pragma once

#include "affect/adapters/result.hpp"
#include "affect/diffusion/null_text.hpp"
#include "affect/regressor/guidance_regressor.hpp"

#include <optional>

namespace affect::diffusion {

struct GuidanceConfig {
    double cfg_scale = 2.0;      // w in the blended noise prediction
    double guidance_scale = 0.0; // s on the emotion score term
    core::EmotionReference reference;

    void validate() const;
};

// Latent-space descent direction on the squared emotion distance:
//   G = -grad_z || [v',a'] - R_u(DM_half(z_t, t, null)) ||^2
// computed by differentiating through the first denoiser half only. Returns
// zero exactly when the mid-layer prediction equals the reference.
nn::Tensor guidance_score(const reg::GuidanceRegressor& g, const DenoiserModel& dm,
                          const nn::Tensor& z_t, int t, const NoiseSchedule& schedule,
                          const core::EmotionReference& ref);

// One resampling step: classifier-free blend w*eps_c + (1-w)*eps_u plus the
// scaled emotion score, then the standard DDIM update. s = 0 reproduces the
// unguided step bit-exactly; w in {0,1} collapses to a single branch.
nn::Tensor dual_conditioned_step(const nn::Tensor& z_t, int t, const nn::Tensor& cond,
                                 const nn::Tensor& null_t, const GuidanceConfig& cfg,
                                 const DenoiserModel& dm, const reg::GuidanceRegressor* g,
                                 const NoiseSchedule& schedule);

struct AdaptOptions {
    GuidanceConfig guidance;
    double nto_scale = 0.0; // 0 = follow cfg_scale; both knobs exposed separately
    int nto_iters = 10;
    double nto_lr = 1e-2;
    bool use_null_text = true; // CG-only ablations resample with the fixed null
    std::string cache_dir;     // empty disables the inversion cache
};

// Step 2 (encode, invert, null-text optimize) then step 3 (dual-conditioned
// resampling). Inversion products are cached by content hash so re-runs with
// new (w, s) skip straight to resampling. Emotion before/after are the
// guidance regressor's own view at the final timestep of the schedule.
adapters::AdaptationResult adapt_image_diffusion(const core::Image& img,
                                                 const std::optional<std::string>& caption,
                                                 const core::EmotionReference& ref,
                                                 const AdaptOptions& opts, const DenoiserModel& dm,
                                                 const reg::GuidanceRegressor* g,
                                                 const NoiseSchedule& schedule);

// cache plumbing, exposed for tests
struct InversionProducts {
    LatentTrajectory trajectory;
    NullTextResult nulls;
    bool from_cache = false;
};
std::string inversion_cache_key(const nn::Tensor& z0, const std::string& caption_text,
                                double nto_scale, int nto_iters, const NoiseSchedule& schedule,
                                const DenoiserModel& dm);
InversionProducts invert_with_cache(const nn::Tensor& z0, const nn::Tensor& cond,
                                    const std::string& cache_key, const std::string& cache_dir,
                                    const DenoiserModel& dm, const NoiseSchedule& schedule,
                                    const NullTextConfig& nto_cfg, bool use_null_text);

} // namespace affect::diffusion
