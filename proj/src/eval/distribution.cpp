#include "affect/eval/distribution.hpp"

#include "affect/util/rng.hpp"

#include <Eigen/Eigenvalues>

#include <numeric>
#include <stdexcept>

namespace affect::eval {

DistributionStats feature_stats(const FeatureSet& features) {
    if (features.size() < 2) throw std::invalid_argument("feature_stats: need at least 2 samples");
    const Eigen::Index d = features[0].size();
    DistributionStats s;
    s.n = static_cast<int>(features.size());
    s.mu = Eigen::VectorXd::Zero(d);
    for (const auto& f : features) {
        if (f.size() != d) throw std::invalid_argument("feature_stats: dimension mismatch");
        s.mu += f;
    }
    s.mu /= static_cast<double>(s.n);
    s.sigma = Eigen::MatrixXd::Zero(d, d);
    for (const auto& f : features) {
        const Eigen::VectorXd c = f - s.mu;
        s.sigma.noalias() += c * c.transpose();
    }
    s.sigma /= static_cast<double>(s.n); // population covariance
    return s;
}

namespace {

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
    Eigen::VectorXd ev = es.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) ev[i] = ev[i] > 0.0 ? std::sqrt(ev[i]) : 0.0;
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

} // namespace

double frechet_distance(const DistributionStats& a, const DistributionStats& b) {
    if (a.mu.size() != b.mu.size()) throw std::invalid_argument("frechet: dimension mismatch");
    const Eigen::MatrixXd ra = psd_sqrt(a.sigma);
    const Eigen::MatrixXd inner = ra * b.sigma * ra;
    const Eigen::MatrixXd cross = psd_sqrt(inner);
    const double dist = (a.mu - b.mu).squaredNorm() + a.sigma.trace() + b.sigma.trace() -
                        2.0 * cross.trace();
    // tiny negatives are numerical; the distance is nonnegative by definition
    return std::max(dist, 0.0);
}

double compute_fid(const FeatureSet& a, const FeatureSet& b) {
    return frechet_distance(feature_stats(a), feature_stats(b));
}

double compute_fid(const std::vector<core::Image>& a, const std::vector<core::Image>& b,
                   const FeatureFn& embed) {
    FeatureSet fa, fb;
    fa.reserve(a.size());
    fb.reserve(b.size());
    for (const auto& img : a) fa.push_back(embed(img));
    for (const auto& img : b) fb.push_back(embed(img));
    return compute_fid(fa, fb);
}

namespace {

inline double poly3(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    const double v = x.dot(y) / static_cast<double>(x.size()) + 1.0;
    return v * v * v;
}

} // namespace

double mmd2_unbiased(const FeatureSet& a, const FeatureSet& b) {
    if (a.size() != b.size()) throw std::invalid_argument("mmd: sets must have equal size");
    const int m = static_cast<int>(a.size());
    if (m < 2) throw std::invalid_argument("mmd: need at least 2 samples");
    double acc = 0.0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            if (i == j) continue;
            acc += poly3(a[static_cast<std::size_t>(i)], a[static_cast<std::size_t>(j)]) +
                   poly3(b[static_cast<std::size_t>(i)], b[static_cast<std::size_t>(j)]) -
                   poly3(a[static_cast<std::size_t>(i)], b[static_cast<std::size_t>(j)]) -
                   poly3(b[static_cast<std::size_t>(i)], a[static_cast<std::size_t>(j)]);
        }
    return acc / (static_cast<double>(m) * (m - 1));
}

double compute_kid(const FeatureSet& a, const FeatureSet& b, int subset_size, int n_subsets,
                   std::uint64_t seed) {
    if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("kid: sets too small");
    const int m = std::min<int>({subset_size, static_cast<int>(a.size()), static_cast<int>(b.size())});
    Rng rng(splitmix64(seed ^ 0x1D1DULL));
    auto draw = [&](const FeatureSet& src) {
        std::vector<std::size_t> idx(src.size());
        std::iota(idx.begin(), idx.end(), 0);
        for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
        FeatureSet out;
        out.reserve(static_cast<std::size_t>(m));
        for (int k = 0; k < m; ++k) out.push_back(src[idx[static_cast<std::size_t>(k)]]);
        return out;
    };
    double acc = 0.0;
    for (int s = 0; s < n_subsets; ++s) acc += mmd2_unbiased(draw(a), draw(b));
    return acc / n_subsets;
}

double compute_kid(const std::vector<core::Image>& a, const std::vector<core::Image>& b,
                   const FeatureFn& embed, int subset_size, int n_subsets, std::uint64_t seed) {
    FeatureSet fa, fb;
    fa.reserve(a.size());
    fb.reserve(b.size());
    for (const auto& img : a) fa.push_back(embed(img));
    for (const auto& img : b) fb.push_back(embed(img));
    return compute_kid(fa, fb, subset_size, n_subsets, seed);
}

} // namespace affect::eval
