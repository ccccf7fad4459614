#pragma once

#include "dcme/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dcme {

// One grid point of a Monte Carlo check. bound is the analytical value the
// empirical side must not exceed (clamped to 1 for probability bounds);
// bound_raw keeps the unclamped formula so clamping can never hide a
// violation. pass means empirical <= bound + 3 * std_error.
struct ValidationPoint {
    std::string label;
    double t = 0.0;
    double empirical = 0.0;
    double std_error = 0.0;
    double bound = 0.0;
    double bound_raw = 0.0;
    bool pass = false;
};

struct ValidationReport {
    std::string name;
    std::vector<ValidationPoint> points;
    bool pass = false;  // conjunction over points
    int trials = 0;
    std::uint64_t seed = 0;
};

std::string report_json(const ValidationReport& report);

// P[||(1/m) sum X_i Y_i^T||_op >= 10 sigma1 sigma2 t] against
// 9^(d1+d2) exp(-m min(t, t^2)), X and Y independent centered Gaussians.
// Requires trials >= 1000.
ValidationReport validate_cov_tail(int d1, int d2, int m, double sigma1, double sigma2,
                                   const std::vector<double>& t_grid, int trials,
                                   std::uint64_t seed);

// Operator norm of a d x n matrix with i.i.d. N(0, sigma^2) entries:
// tail P[||A||_op >= 6 sigma sqrt(d+n)] vs exp(-2(d+n)), plus the first and
// second moment bounds 9 sigma sqrt(d+n) and 36 sigma^2 (d+n).
ValidationReport validate_opnorm_tail(int d, int n, double sigma, int trials, std::uint64_t seed);

// Empirical MGF of the centered Gaussian product X*Y against
// exp(25 l^2 s1^2 s2^2 / (2 (1 - 2.5 |l| s1 s2))). Needs |l| < 1/(2.5 s1 s2).
ValidationReport validate_subgamma_mgf(double sigma1, double sigma2,
                                       const std::vector<double>& lambda_grid, int trials,
                                       std::uint64_t seed);

// P[(1/m) sum X_i Y_i >= 10 sigma1 sigma2 t] against exp(-m min(t, t^2)).
ValidationReport validate_sum_tail(double sigma1, double sigma2, int m,
                                   const std::vector<double>& t_grid, int trials,
                                   std::uint64_t seed);

// E[max of n centered sub-gamma draws] against sigma sqrt(2 ln n) + alpha ln n.
// alpha = 0 draws pure N(0, sigma^2); alpha > 0 draws scaled Gaussian products
// (alpha/2.5) g g', whose sub-gamma parameters are (2 alpha, alpha), so the
// stated bound applies only when sigma >= 2 alpha (enforced).
ValidationReport validate_max_inequality(double sigma, double alpha, int n, int trials,
                                         std::uint64_t seed);

// Documented default grids, one per validator, keyed by these names:
// cov_tail, opnorm_tail, subgamma_mgf, sum_tail, max_inequality.
const std::vector<std::string>& validator_names();
ValidationReport run_validator(const std::string& name, int trials, std::uint64_t seed);

} // namespace dcme
