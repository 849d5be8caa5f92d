#include "affect/diffusion/ddim.hpp"

#include <cmath>
#include <stdexcept>

namespace affect::diffusion {

nn::Tensor forward_diffuse(const nn::Tensor& z0, int t, const NoiseSchedule& s,
                           const nn::Tensor& noise) {
    if (t < 1 || t > s.T) throw std::invalid_argument("forward_diffuse: t out of range");
    if (!(noise.shape == z0.shape)) throw std::invalid_argument("forward_diffuse: noise shape");
    const double a = s.alpha(t);
    nn::Tensor out = z0;
    out.data = std::sqrt(a) * z0.data + std::sqrt(1.0 - a) * noise.data;
    return out;
}

nn::Tensor ddim_step(const nn::Tensor& z_t, int t, const NoiseSchedule& s,
                     const nn::Tensor& eps_hat) {
    if (t < 1 || t > s.T) throw std::invalid_argument("ddim_step: t out of range");
    if (!(eps_hat.shape == z_t.shape)) throw std::invalid_argument("ddim_step: eps shape");
    const double a_t = s.alpha(t), a_prev = s.alpha(t - 1);
    nn::Tensor out = z_t;
    // x0-prediction form of the deterministic update
    out.data = std::sqrt(a_prev) * ((z_t.data - std::sqrt(1.0 - a_t) * eps_hat.data) / std::sqrt(a_t)) +
               std::sqrt(1.0 - a_prev) * eps_hat.data;
    if (!out.data.isFinite().all()) throw std::runtime_error("ddim_step: non-finite latent");
    return out;
}

nn::Var ddim_step_var(const nn::Var& z_t, int t, const NoiseSchedule& s, const nn::Var& eps_hat) {
    const double a_t = s.alpha(t), a_prev = s.alpha(t - 1);
    const double cz = std::sqrt(a_prev) / std::sqrt(a_t);
    const double ce = std::sqrt(1.0 - a_prev) - std::sqrt(a_prev) * std::sqrt(1.0 - a_t) / std::sqrt(a_t);
    return nn::add(nn::scale(z_t, cz), nn::scale(eps_hat, ce));
}

void LatentTrajectory::validate(const nn::Shape& latent) const {
    if (z.size() != static_cast<std::size_t>(T) + 1)
        throw std::invalid_argument("trajectory: expected T+1 latents");
    for (const auto& zt : z) {
        if (!(zt.shape == latent)) throw std::invalid_argument("trajectory: latent shape mismatch");
        if (!zt.data.isFinite().all()) throw std::invalid_argument("trajectory: non-finite latent");
    }
}

LatentTrajectory ddim_invert(const nn::Tensor& z0, const nn::Tensor& cond,
                             const NoiseSchedule& s, const DenoiserModel& dm) {
    s.validate();
    LatentTrajectory traj;
    traj.T = s.T;
    traj.cond = cond;
    traj.z.reserve(static_cast<std::size_t>(s.T) + 1);
    traj.z.push_back(z0);
    nn::Tensor cur = z0;
    for (int k = 0; k < s.T; ++k) {
        // reverse hop k -> k+1; epsilon queried at the source step
        const nn::Tensor eps = dm.eps(cur, s.orig_t(k), cond);
        const double a_src = s.alpha(k), a_dst = s.alpha(k + 1);
        nn::Tensor next = cur;
        next.data = std::sqrt(a_dst) * ((cur.data - std::sqrt(1.0 - a_src) * eps.data) / std::sqrt(a_src)) +
                    std::sqrt(1.0 - a_dst) * eps.data;
        if (!next.data.isFinite().all()) throw std::runtime_error("ddim_invert: non-finite latent");
        traj.z.push_back(next);
        cur = std::move(next);
    }
    return traj;
}

} // namespace affect::diffusion
