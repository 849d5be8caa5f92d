#include "affect/metrics/wavelet.hpp"

#include <cmath>
#include <stdexcept>

namespace affect::metrics {

namespace {

// Daubechies 4-tap analysis pair
struct Db4 {
    double h[4]; // lowpass
    double g[4]; // highpass
    Db4() {
        const double s3 = std::sqrt(3.0);
        const double z = 4.0 * std::sqrt(2.0);
        h[0] = (1 + s3) / z;
        h[1] = (3 + s3) / z;
        h[2] = (3 - s3) / z;
        h[3] = (1 - s3) / z;
        for (int i = 0; i < 4; ++i) g[i] = (i % 2 ? -1.0 : 1.0) * h[3 - i];
    }
};

const Db4& db4() {
    static const Db4 f;
    return f;
}

// periodized single-level transform of the rows: out has half the columns
void rows_step(const PlaneXd& x, PlaneXd& lo, PlaneXd& hi) {
    const auto& f = db4();
    const Eigen::Index rows = x.rows(), cols = x.cols();
    lo.resize(rows, cols / 2);
    hi.resize(rows, cols / 2);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index k = 0; k < cols / 2; ++k) {
            double a = 0, d = 0;
            for (int t = 0; t < 4; ++t) {
                const Eigen::Index c = (2 * k + t) % cols;
                a += f.h[t] * x(r, c);
                d += f.g[t] * x(r, c);
            }
            lo(r, k) = a;
            hi(r, k) = d;
        }
}

PlaneXd transpose(const PlaneXd& x) { return x.transpose(); }

} // namespace

DwtLevel dwt2(const PlaneXd& x) {
    if (x.rows() % 2 || x.cols() % 2) throw std::invalid_argument("dwt2: sides must be even");
    PlaneXd lo, hi;
    rows_step(x, lo, hi);
    PlaneXd lo_t = transpose(lo), hi_t = transpose(hi);
    PlaneXd ll_t, lh_t, hl_t, hh_t;
    rows_step(lo_t, ll_t, lh_t);
    rows_step(hi_t, hl_t, hh_t);
    DwtLevel out;
    out.ll = transpose(ll_t);
    out.lh = transpose(lh_t);
    out.hl = transpose(hl_t);
    out.hh = transpose(hh_t);
    return out;
}

DwtPyramid dwt_pyramid(const PlaneXd& x, int levels) {
    DwtPyramid p;
    PlaneXd cur = x;
    for (int k = 0; k < levels; ++k) {
        DwtLevel lvl = dwt2(cur);
        cur = lvl.ll;
        p.levels.push_back(std::move(lvl));
    }
    p.approx = cur;
    return p;
}

double detail_energy(const DwtLevel& lvl) {
    const double n = static_cast<double>(lvl.lh.size() + lvl.hl.size() + lvl.hh.size());
    return (lvl.lh.square().sum() + lvl.hl.square().sum() + lvl.hh.square().sum()) / n;
}

} // namespace affect::metrics
