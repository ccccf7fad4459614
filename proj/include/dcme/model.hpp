#pragma once
#include <cstdint>
#include <Eigen/Dense>

namespace dcme {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Columns are samples: rows = dimension, cols = sample count.
using SampleMatrix = Eigen::MatrixXd;

enum class Source { Gaussian, ScaledRademacher, UniformBall };

// Ground-truth covariance split across two agents: agent 1 owns the first d1
// coordinates, agent 2 the remaining d2 (d2 may be 0 for single-block use).
// sigma is the sub-Gaussian parameter of the source, so ||cov||_op <= sigma^2.
struct CovarianceModel {
    int d1 = 0;
    int d2 = 0;
    double sigma = 1.0;
    Matrix cov;
    Source source = Source::Gaussian;

    int d() const { return d1 + d2; }
    Matrix c11() const { return cov.topLeftCorner(d1, d1); }
    Matrix c12() const { return cov.topRightCorner(d1, d2); }
    Matrix c22() const { return cov.bottomRightCorner(d2, d2); }
};

struct EigenDecomposition {
    Vector eigenvalues;   // descending
    Matrix eigenvectors;  // orthonormal columns, matching order
};

// Symmetrizes the input as (M + M^T)/2 before decomposing.
EigenDecomposition eigen_sym(const Matrix& m);

// C = (sigma^2/2) [[I, delta*D^T], [delta*D, I]] with D d2-by-d1, ||D||_op <= 1.
CovarianceModel build_block_covariance(int d1, int d2, double sigma, double delta,
                                       const Matrix& d_mix, Source source = Source::Gaussian);

// Throws if the model violates symmetry, PSD, or the sigma^2 op-norm cap.
void check_model(const CovarianceModel& model);

SampleMatrix sample(const CovarianceModel& model, int count, std::uint64_t seed);

double operator_norm(const Matrix& m);
double frobenius_norm(const Matrix& m);

Matrix psd_project(const Matrix& m);

// KL(N(0,S1) || N(0,S0)) for positive definite S0, S1.
double kl_centered_gaussian(const Matrix& s1, const Matrix& s0);

} // namespace dcme
