#include "affect/diffusion/null_text.hpp"

#include <stdexcept>

namespace affect::diffusion {

using nn::Var;

namespace {

nn::Tensor cfg_mix(const DenoiserModel& dm, const nn::Tensor& z, int orig_t,
                   const nn::Tensor& cond, const nn::Tensor& null_t, double w) {
    if (w == 1.0) return dm.eps(z, orig_t, cond);
    if (w == 0.0) return dm.eps(z, orig_t, null_t);
    nn::Tensor eps_c = dm.eps(z, orig_t, cond);
    const nn::Tensor eps_u = dm.eps(z, orig_t, null_t);
    eps_c.data = w * eps_c.data + (1.0 - w) * eps_u.data;
    return eps_c;
}

} // namespace

NullTextResult null_text_optimize(const LatentTrajectory& traj, const nn::Tensor& cond,
                                  const DenoiserModel& dm, const NoiseSchedule& schedule,
                                  const NullTextConfig& cfg) {
    schedule.validate();
    traj.validate(dm.latent_shape());
    if (schedule.T != traj.T) throw std::invalid_argument("null-text: schedule/trajectory mismatch");
    if (cfg.guidance_scale == 1.0)
        throw std::invalid_argument(
            "null-text: guidance scale 1 leaves no unconditional pathway to optimize");

    NullTextResult result;
    result.null_embeddings.assign(static_cast<std::size_t>(schedule.T), dm.null_embedding());

    nn::Tensor cur = traj.z.back(); // z~_T = z*_T
    nn::Tensor warm = dm.null_embedding();
    const double w = cfg.guidance_scale;

    for (int t = schedule.T; t >= 1; --t) {
        const int orig_t = schedule.orig_t(t);
        const nn::Tensor& target = traj.z[static_cast<std::size_t>(t) - 1];
        // the conditional branch does not depend on the optimized embedding
        const nn::Tensor eps_c = dm.eps(cur, orig_t, cond);

        Var null_leaf = Var::leaf(warm, true);
        nn::Adam opt({null_leaf}, cfg.lr);
        const Var z_const = Var::constant(cur);
        const Var target_const = Var::constant(target);
        const Var eps_c_scaled = Var::constant(
            nn::Tensor(eps_c.shape, nn::Arr(eps_c.data * w)));

        auto objective = [&] {
            Var eps_u = dm.eps_var(z_const, {orig_t}, null_leaf);
            Var eps_hat = nn::add(eps_c_scaled, nn::scale(eps_u, 1.0 - w));
            Var z_prev = ddim_step_var(z_const, t, schedule, eps_hat);
            return nn::sum_squares(nn::sub(z_prev, target_const));
        };

        NullTextResult::StepReport rep;
        rep.t = t;
        Var loss = objective();
        rep.initial = loss.scalar_value();
        double best = rep.initial;
        nn::Tensor best_null = null_leaf.value();
        for (int it = 0; it < cfg.inner_iters; ++it) {
            nn::backward(loss);
            opt.step();
            loss = objective(); // doubles as the post-step value and the next tape
            if (loss.scalar_value() < best) {
                best = loss.scalar_value();
                best_null = null_leaf.value();
            }
        }
        rep.final = best;
        rep.reduced = best < rep.initial;
        result.steps.push_back(rep);
        result.null_embeddings[static_cast<std::size_t>(t) - 1] = best_null;
        warm = best_null;

        // advance the tracked latent with the embedding actually kept
        cur = ddim_step(cur, t, schedule, cfg_mix(dm, cur, orig_t, cond, best_null, w));
    }
    return result;
}

nn::Tensor cfg_resample(const LatentTrajectory& traj, const nn::Tensor& cond,
                        const DenoiserModel& dm, const NoiseSchedule& schedule, double w,
                        const NullTextResult* nulls) {
    schedule.validate();
    traj.validate(dm.latent_shape());
    const nn::Tensor fixed_null = dm.null_embedding();
    nn::Tensor cur = traj.z.back();
    for (int t = schedule.T; t >= 1; --t) {
        const nn::Tensor& null_t = nulls ? nulls->at(t) : fixed_null;
        cur = ddim_step(cur, t, schedule, cfg_mix(dm, cur, schedule.orig_t(t), cond, null_t, w));
    }
    return cur;
}

} // namespace affect::diffusion
