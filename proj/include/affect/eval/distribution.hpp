#pragma once

#include "affect/core/image.hpp"

#include <Eigen/Core>

#include <functional>
#include <vector>

namespace affect::eval {

using FeatureFn = std::function<Eigen::VectorXd(const core::Image&)>;
using FeatureSet = std::vector<Eigen::VectorXd>;

struct DistributionStats {
    Eigen::VectorXd mu;
    Eigen::MatrixXd sigma; // symmetric PSD
    int n = 0;
};

DistributionStats feature_stats(const FeatureSet& features);

// |mu_a - mu_b|^2 + Tr(Sa + Sb - 2 (Sa^1/2 Sb Sa^1/2)^1/2); matrix roots via
// eigendecomposition with small negative eigenvalues clipped to zero
double frechet_distance(const DistributionStats& a, const DistributionStats& b);

double compute_fid(const FeatureSet& a, const FeatureSet& b);
double compute_fid(const std::vector<core::Image>& a, const std::vector<core::Image>& b,
                   const FeatureFn& embed);

// Unbiased degree-3 polynomial-kernel MMD^2 for equal-size sets: the paired
// U-statistic, which is exactly zero on identical sets.
double mmd2_unbiased(const FeatureSet& a, const FeatureSet& b);

// subset-averaged KID; subsets drawn without replacement with the given seed
double compute_kid(const FeatureSet& a, const FeatureSet& b, int subset_size = 50,
                   int n_subsets = 10, std::uint64_t seed = 0);
double compute_kid(const std::vector<core::Image>& a, const std::vector<core::Image>& b,
                   const FeatureFn& embed, int subset_size = 50, int n_subsets = 10,
                   std::uint64_t seed = 0);

} // namespace affect::eval
