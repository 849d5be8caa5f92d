#include "affect/eval/stats.hpp"

#include <cmath>
#include <stdexcept>

namespace affect::eval {

namespace {

double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-14, kFpMin = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

} // namespace

double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                         a * std::log(x) + b * std::log1p(-x);
    const double bt = std::exp(ln_bt);
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
    return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

double t_test_two_sided(double t, double nu) {
    if (!std::isfinite(t)) return 0.0;
    if (nu <= 0.0) throw std::invalid_argument("t-test: bad degrees of freedom");
    return incomplete_beta(0.5 * nu, 0.5, nu / (nu + t * t));
}

OLSFit fit_ols(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("ols: size mismatch");
    const int n = static_cast<int>(x.size());
    if (n < 3) throw std::invalid_argument("ols: need at least 3 points");
    double mx = 0, my = 0;
    for (int i = 0; i < n; ++i) {
        mx += x[static_cast<std::size_t>(i)];
        my += y[static_cast<std::size_t>(i)];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        const double dx = x[static_cast<std::size_t>(i)] - mx;
        sxx += dx * dx;
        sxy += dx * (y[static_cast<std::size_t>(i)] - my);
    }
    if (sxx <= 0.0) throw std::invalid_argument("ols: x must vary");

    OLSFit fit;
    fit.n = n;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;

    double rss = 0;
    for (int i = 0; i < n; ++i) {
        const double r = y[static_cast<std::size_t>(i)] - fit.intercept -
                         fit.slope * x[static_cast<std::size_t>(i)];
        rss += r * r;
    }
    const double nu = n - 2;
    const double sigma2 = rss / nu;
    if (sigma2 <= 1e-30) {
        fit.p_value = fit.slope == 0.0 ? 1.0 : 0.0;
        return fit;
    }
    const double se = std::sqrt(sigma2 / sxx);
    fit.p_value = t_test_two_sided(fit.slope / se, nu);
    return fit;
}

} // namespace affect::eval
