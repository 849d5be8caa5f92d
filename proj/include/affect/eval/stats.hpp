#pragma once

#include <vector>

namespace affect::eval {

struct OLSFit {
    double slope = 0.0;     // beta_1
    double intercept = 0.0; // beta_0
    double p_value = 1.0;   // two-sided t-test on the slope
    int n = 0;
};

// Closed-form simple linear regression with the usual t-test. Requires
// n >= 3 and nonconstant x. A perfect fit collapses the p-value to 0
// (or to 1 when the slope itself is 0).
OLSFit fit_ols(const std::vector<double>& x, const std::vector<double>& y);

// regularized incomplete beta I_x(a,b) (Lentz continued fraction)
double incomplete_beta(double a, double b, double x);
// two-sided p for a t statistic with nu degrees of freedom
double t_test_two_sided(double t, double nu);

} // namespace affect::eval
