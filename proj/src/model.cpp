#include "dcme/model.hpp"
#include "dcme/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace dcme {

EigenDecomposition eigen_sym(const Matrix& m) {
    if (m.rows() != m.cols())
        throw std::invalid_argument("eigen_sym: matrix must be square");
    Matrix sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("eigen_sym: eigensolver failed to converge");
    const Eigen::Index n = m.rows();
    EigenDecomposition dec;
    dec.eigenvalues = solver.eigenvalues().reverse();
    dec.eigenvectors.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        dec.eigenvectors.col(i) = solver.eigenvectors().col(n - 1 - i);
    return dec;
}

CovarianceModel build_block_covariance(int d1, int d2, double sigma, double delta,
                                       const Matrix& d_mix, Source source) {
    if (d1 < 1 || d2 < 0)
        throw std::invalid_argument("build_block_covariance: need d1 >= 1, d2 >= 0");
    if (!(delta >= 0.0 && delta <= 1.0))
        throw std::invalid_argument("build_block_covariance: delta must lie in [0, 1]");
    if (!(sigma > 0.0))
        throw std::invalid_argument("build_block_covariance: sigma must be positive");
    if (d_mix.rows() != d2 || d_mix.cols() != d1)
        throw std::invalid_argument("build_block_covariance: D must be d2 x d1");
    if (d2 > 0 && operator_norm(d_mix) > 1.0 + 1e-12)
        throw std::invalid_argument("build_block_covariance: ||D||_op exceeds 1");

    const int d = d1 + d2;
    const double half_var = 0.5 * sigma * sigma;
    CovarianceModel model;
    model.d1 = d1;
    model.d2 = d2;
    model.sigma = sigma;
    model.source = source;
    model.cov = half_var * Matrix::Identity(d, d);
    if (d2 > 0) {
        model.cov.topRightCorner(d1, d2) = half_var * delta * d_mix.transpose();
        model.cov.bottomLeftCorner(d2, d1) = half_var * delta * d_mix;
    }
    return model;
}

void check_model(const CovarianceModel& model) {
    const int d = model.d();
    if (model.d1 < 0 || model.d2 < 0 || d < 1)
        throw std::invalid_argument("model: nonpositive dimension");
    if (model.cov.rows() != d || model.cov.cols() != d)
        throw std::invalid_argument("model: cov shape does not match d1 + d2");
    const double scale = model.cov.cwiseAbs().maxCoeff();
    if ((model.cov - model.cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(scale, 1.0))
        throw std::invalid_argument("model: cov is not symmetric");
    const double op = operator_norm(model.cov);
    EigenDecomposition dec = eigen_sym(model.cov);
    if (dec.eigenvalues.minCoeff() < -1e-10 * op)
        throw std::invalid_argument("model: cov is not positive semi-definite");
    if (op > model.sigma * model.sigma * (1.0 + 1e-10))
        throw std::invalid_argument("model: ||cov||_op exceeds sigma^2");
}

namespace {

Matrix sqrt_psd(const Matrix& m) {
    EigenDecomposition dec = eigen_sym(m);
    Vector root = dec.eigenvalues.cwiseMax(0.0).cwiseSqrt();
    return dec.eigenvectors * root.asDiagonal() * dec.eigenvectors.transpose();
}

} // namespace

SampleMatrix sample(const CovarianceModel& model, int count, std::uint64_t seed) {
    if (count < 1)
        throw std::invalid_argument("sample: count must be >= 1");
    check_model(model);
    const int d = model.d();
    const Matrix root = sqrt_psd(model.cov);

    Rng rng(seed);
    SampleMatrix raw(d, count);
    switch (model.source) {
    case Source::Gaussian:
        for (int j = 0; j < count; ++j)
            for (int i = 0; i < d; ++i)
                raw(i, j) = rng.normal();
        break;
    case Source::ScaledRademacher:
        for (int j = 0; j < count; ++j)
            for (int i = 0; i < d; ++i)
                raw(i, j) = rng.rademacher();
        break;
    case Source::UniformBall:
        // uniform on the unit ball has covariance I/(d+2); rescale to get cov
        for (int j = 0; j < count; ++j) {
            Vector g(d);
            for (int i = 0; i < d; ++i)
                g(i) = rng.normal();
            const double norm = g.norm();
            const double radius = std::pow(rng.uniform_pos(), 1.0 / d);
            raw.col(j) = norm > 0.0 ? Vector(g * (radius * std::sqrt(double(d) + 2.0) / norm))
                                    : Vector::Zero(d);
        }
        break;
    }
    return root * raw;
}

double operator_norm(const Matrix& m) {
    if (m.size() == 0)
        return 0.0;
    if (!m.allFinite())
        throw std::invalid_argument("operator_norm: non-finite entries");
    Eigen::BDCSVD<Matrix> svd(m);
    return svd.singularValues()(0);
}

double frobenius_norm(const Matrix& m) {
    if (!m.allFinite())
        throw std::invalid_argument("frobenius_norm: non-finite entries");
    return m.norm();
}

Matrix psd_project(const Matrix& m) {
    EigenDecomposition dec = eigen_sym(m);
    Vector lam = dec.eigenvalues.cwiseMax(0.0);
    Matrix p = dec.eigenvectors * lam.asDiagonal() * dec.eigenvectors.transpose();
    return 0.5 * (p + p.transpose());
}

double kl_centered_gaussian(const Matrix& s1, const Matrix& s0) {
    if (s1.rows() != s1.cols() || s0.rows() != s0.cols() || s1.rows() != s0.rows())
        throw std::invalid_argument("kl_centered_gaussian: shapes must match and be square");
    EigenDecomposition d0 = eigen_sym(s0);
    if (d0.eigenvalues.minCoeff() <= 0.0)
        throw std::invalid_argument("kl_centered_gaussian: S0 must be positive definite");
    Matrix w_half = d0.eigenvectors * d0.eigenvalues.cwiseSqrt().cwiseInverse().asDiagonal()
                  * d0.eigenvectors.transpose();
    // whiten: eigenvalues of S0^{-1/2} S1 S0^{-1/2} reduce KL to a scalar sum
    EigenDecomposition dw = eigen_sym(w_half * s1 * w_half);
    double kl = 0.0;
    for (Eigen::Index i = 0; i < dw.eigenvalues.size(); ++i) {
        const double mu = dw.eigenvalues(i);
        if (mu <= 0.0)
            throw std::invalid_argument("kl_centered_gaussian: S1 must be positive definite");
        kl += mu - 1.0 - std::log(mu);
    }
    return 0.5 * kl;
}

} // namespace dcme
