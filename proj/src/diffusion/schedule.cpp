#include "affect/diffusion/schedule.hpp"

#include "affect/util/sha256.hpp"

#include <cmath>
#include <stdexcept>

namespace affect::diffusion {

void NoiseSchedule::validate() const {
    if (T < 1 || betas.size() != static_cast<std::size_t>(T) ||
        alphas_cum.size() != static_cast<std::size_t>(T) + 1 ||
        timestep_map.size() != static_cast<std::size_t>(T) + 1)
        throw std::invalid_argument("schedule: inconsistent sizes");
    if (alphas_cum[0] != 1.0) throw std::invalid_argument("schedule: alpha_0 must be 1");
    for (int t = 1; t <= T; ++t) {
        const double b = betas[static_cast<std::size_t>(t - 1)];
        if (!(b > 0.0 && b < 1.0)) throw std::invalid_argument("schedule: beta out of (0,1)");
        if (!(alphas_cum[static_cast<std::size_t>(t)] < alphas_cum[static_cast<std::size_t>(t - 1)]))
            throw std::invalid_argument("schedule: alphas not strictly decreasing");
    }
}

std::string NoiseSchedule::digest() const {
    Sha256 h;
    h.update(&T, sizeof(T));
    h.update(betas.data(), betas.size() * sizeof(double));
    h.update(timestep_map.data(), timestep_map.size() * sizeof(int));
    return h.hex();
}

NoiseSchedule make_schedule(int T, double beta_lo, double beta_hi) {
    if (T < 1) throw std::invalid_argument("schedule: T must be positive");
    if (!(beta_lo > 0.0 && beta_hi < 1.0 && beta_lo <= beta_hi))
        throw std::invalid_argument("schedule: need 0 < beta_lo <= beta_hi < 1");
    NoiseSchedule s;
    s.T = T;
    s.betas.resize(static_cast<std::size_t>(T));
    s.alphas_cum.assign(static_cast<std::size_t>(T) + 1, 1.0);
    s.timestep_map.resize(static_cast<std::size_t>(T) + 1);
    for (int t = 1; t <= T; ++t) {
        const double b =
            T == 1 ? beta_lo : beta_lo + (beta_hi - beta_lo) * (t - 1) / static_cast<double>(T - 1);
        s.betas[static_cast<std::size_t>(t - 1)] = b;
        s.alphas_cum[static_cast<std::size_t>(t)] =
            s.alphas_cum[static_cast<std::size_t>(t - 1)] * (1.0 - b);
        s.timestep_map[static_cast<std::size_t>(t)] = t;
    }
    s.timestep_map[0] = 1;
    s.validate();
    return s;
}

NoiseSchedule substride(const NoiseSchedule& full, int n) {
    full.validate();
    if (n < 1 || n > full.T) throw std::invalid_argument("substride: bad step count");
    NoiseSchedule s;
    s.T = n;
    s.alphas_cum.assign(static_cast<std::size_t>(n) + 1, 1.0);
    s.betas.resize(static_cast<std::size_t>(n));
    s.timestep_map.resize(static_cast<std::size_t>(n) + 1);
    for (int k = 1; k <= n; ++k) {
        const int tau = static_cast<int>(std::llround(static_cast<double>(k) * full.T / n));
        s.timestep_map[static_cast<std::size_t>(k)] = tau;
        s.alphas_cum[static_cast<std::size_t>(k)] = full.alphas_cum[static_cast<std::size_t>(tau)];
        s.betas[static_cast<std::size_t>(k - 1)] =
            1.0 - s.alphas_cum[static_cast<std::size_t>(k)] / s.alphas_cum[static_cast<std::size_t>(k - 1)];
    }
    s.timestep_map[0] = s.timestep_map[1];
    s.validate();
    return s;
}

} // namespace affect::diffusion
