#pragma once
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dcme/model.hpp"

namespace dcme {

// State-dependent Gaussian channel Y = A_v X + Z_v with V ~ p.
struct MixtureState {
    Matrix a;  // d_y x d_x
    double p = 0.0;
};

struct MixtureChannel {
    std::vector<MixtureState> states;
    int d_x = 0;
    int d_y = 0;
};

void check_channel(const MixtureChannel& ch);

// ||E_V[A_V^T A_V]||_op, the exact contraction coefficient of the mixture channel
double csdpi_mixture(const MixtureChannel& ch);

// E_V ||A_V^T A_V||_op, the straightforward bound the exact coefficient improves on
double csdpi_naive_upper(const MixtureChannel& ch);

// KL ratio attained by a mean-shifted Gaussian input along mu
double mean_shift_ratio(const MixtureChannel& ch, const Vector& mu);

// Product channel with perfectly correlated state (states paired by index);
// its coefficient always equals the max of the component coefficients.
std::pair<MixtureChannel, double> csdpi_product(const MixtureChannel& ch1,
                                                const MixtureChannel& ch2);

struct GaussianJoint {
    Matrix c11;
    Matrix c12;
    Matrix c22;
};

double sdpi_gaussian(const GaussianJoint& joint);

// For jointly Gaussian vectors the symmetric coefficient coincides with the
// one-directional one; separate entry point kept so call sites say what they mean.
double symmetric_sdpi_gaussian(const GaussianJoint& joint);

struct BoundInputs {
    double sigma = 1.0;
    double m = 1.0;
    double d1 = 1.0;
    double d2 = 1.0;
    double b1 = 1.0;
    double b2 = 1.0;
};

// value plus which constant convention it carries, so callers never mistake a
// rate expression for a fully-constanted bound
struct BoundValue {
    double value = 0.0;
    std::string convention;
};

BoundValue lower_bound_op(const BoundInputs& inp);
BoundValue lower_bound_op_cross(const BoundInputs& inp);
BoundValue lower_bound_fr(const BoundInputs& inp);
BoundValue lower_bound_fr_cross(const BoundInputs& inp);

BoundValue lower_bound_multi(double sigma, double m, const std::vector<double>& d_k,
                             const std::vector<double>& b_k);

// E[A^T B A] over uniformly random signed permutation matrices = (Tr(B)/d) I
Matrix signed_perm_expectation_exact(const Matrix& b);
Matrix signed_perm_expectation_mc(const Matrix& b, long trials, std::uint64_t seed);

} // namespace dcme
