#pragma once

#include <Eigen/Core>

#include <vector>

namespace affect::metrics {

using PlaneXd = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// One decomposition level of a separable 2-D DWT (Daubechies 4-tap filters,
// periodized). Input sides must be even.
struct DwtLevel {
    PlaneXd ll, lh, hl, hh;
};

DwtLevel dwt2(const PlaneXd& x);

// Multi-level pyramid: details[k] holds the (lh,hl,hh) bands of level k+1,
// approx is the final LL. Requires sides divisible by 2^levels.
struct DwtPyramid {
    std::vector<DwtLevel> levels;
    PlaneXd approx;
};

DwtPyramid dwt_pyramid(const PlaneXd& x, int levels);

// mean squared detail energy of one level
double detail_energy(const DwtLevel& lvl);

} // namespace affect::metrics
