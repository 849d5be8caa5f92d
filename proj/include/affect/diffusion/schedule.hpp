#pragma once

#include <string>
#include <vector>

namespace affect::diffusion {

// Variance schedule. alphas_cum[t] is the cumulative product of (1 - beta_i)
// for i <= t, with alphas_cum[0] = 1 by convention. timestep_map carries the
// original training timestep behind each index when the schedule is a strided
// view of a longer one (identity otherwise).
struct NoiseSchedule {
    std::vector<double> betas;      // size T; betas[t-1] is beta_t
    std::vector<double> alphas_cum; // size T+1; [0] = 1, strictly decreasing
    std::vector<int> timestep_map;  // size T+1
    int T = 0;

    double alpha(int t) const { return alphas_cum.at(static_cast<std::size_t>(t)); }
    // denoiser conditioning timestep behind sub-step k; k=0 borrows step 1
    int orig_t(int k) const { return timestep_map.at(static_cast<std::size_t>(std::max(k, 1))); }

    void validate() const;
    std::string digest() const; // stable id for cache keys
};

// linear betas in [beta_lo, beta_hi]
NoiseSchedule make_schedule(int T, double beta_lo, double beta_hi);

// n uniformly strided steps over a full schedule (DDIM-style sub-sequence)
NoiseSchedule substride(const NoiseSchedule& full, int n);

} // namespace affect::diffusion
