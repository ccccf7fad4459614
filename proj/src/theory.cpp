#include "dcme/theory.hpp"
#include "dcme/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dcme {

void check_channel(const MixtureChannel& ch) {
    if (ch.states.empty() || ch.d_x < 1 || ch.d_y < 1)
        throw std::invalid_argument("channel: need at least one state and positive dims");
    double total = 0.0;
    for (const MixtureState& st : ch.states) {
        if (st.a.rows() != ch.d_y || st.a.cols() != ch.d_x)
            throw std::invalid_argument("channel: state matrix shape mismatch");
        if (!(st.p >= 0.0))
            throw std::invalid_argument("channel: negative state probability");
        total += st.p;
        // A A^T <= I keeps the additive noise covariance I - A A^T valid
        Matrix gram = st.a * st.a.transpose();
        EigenDecomposition dec = eigen_sym(gram);
        if (dec.eigenvalues(0) > 1.0 + 1e-10)
            throw std::invalid_argument("channel: A A^T exceeds identity");
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw std::invalid_argument("channel: probabilities must sum to 1");
}

namespace {

Matrix averaged_gram(const MixtureChannel& ch) {
    Matrix acc = Matrix::Zero(ch.d_x, ch.d_x);
    for (const MixtureState& st : ch.states)
        acc += st.p * (st.a.transpose() * st.a);
    return acc;
}

} // namespace

double csdpi_mixture(const MixtureChannel& ch) {
    check_channel(ch);
    return operator_norm(averaged_gram(ch));
}

double csdpi_naive_upper(const MixtureChannel& ch) {
    check_channel(ch);
    double acc = 0.0;
    for (const MixtureState& st : ch.states)
        acc += st.p * operator_norm(st.a.transpose() * st.a);
    return acc;
}

double mean_shift_ratio(const MixtureChannel& ch, const Vector& mu) {
    check_channel(ch);
    if (mu.size() != ch.d_x)
        throw std::invalid_argument("mean_shift_ratio: mu dimension mismatch");
    const double norm2 = mu.squaredNorm();
    if (!(norm2 > 0.0))
        throw std::invalid_argument("mean_shift_ratio: mu must be nonzero");
    return mu.dot(averaged_gram(ch) * mu) / norm2;
}

std::pair<MixtureChannel, double> csdpi_product(const MixtureChannel& ch1,
                                                const MixtureChannel& ch2) {
    check_channel(ch1);
    check_channel(ch2);
    if (ch1.states.size() != ch2.states.size())
        throw std::invalid_argument("csdpi_product: state counts differ");
    MixtureChannel prod;
    prod.d_x = ch1.d_x + ch2.d_x;
    prod.d_y = ch1.d_y + ch2.d_y;
    for (std::size_t v = 0; v < ch1.states.size(); ++v) {
        if (std::abs(ch1.states[v].p - ch2.states[v].p) > 1e-12)
            throw std::invalid_argument("csdpi_product: state probabilities differ");
        MixtureState st;
        st.p = ch1.states[v].p;
        st.a = Matrix::Zero(prod.d_y, prod.d_x);
        st.a.topLeftCorner(ch1.d_y, ch1.d_x) = ch1.states[v].a;
        st.a.bottomRightCorner(ch2.d_y, ch2.d_x) = ch2.states[v].a;
        prod.states.push_back(std::move(st));
    }
    return {prod, csdpi_mixture(prod)};
}

namespace {

Matrix inv_sqrt_pd(const Matrix& m, const char* who) {
    EigenDecomposition dec = eigen_sym(m);
    const double top = dec.eigenvalues(0);
    if (!(top > 0.0) || dec.eigenvalues(dec.eigenvalues.size() - 1) <= 0.0)
        throw std::invalid_argument(std::string(who) + ": block must be positive definite");
    Vector lam = dec.eigenvalues.cwiseMax(1e-12 * top);
    return dec.eigenvectors * lam.cwiseSqrt().cwiseInverse().asDiagonal()
         * dec.eigenvectors.transpose();
}

} // namespace

double sdpi_gaussian(const GaussianJoint& joint) {
    const Eigen::Index d1 = joint.c11.rows();
    const Eigen::Index d2 = joint.c22.rows();
    if (joint.c11.cols() != d1 || joint.c22.cols() != d2
        || joint.c12.rows() != d1 || joint.c12.cols() != d2)
        throw std::invalid_argument("sdpi_gaussian: block shapes inconsistent");
    Matrix full(d1 + d2, d1 + d2);
    full.topLeftCorner(d1, d1) = joint.c11;
    full.topRightCorner(d1, d2) = joint.c12;
    full.bottomLeftCorner(d2, d1) = joint.c12.transpose();
    full.bottomRightCorner(d2, d2) = joint.c22;
    EigenDecomposition dec = eigen_sym(full);
    if (dec.eigenvalues(dec.eigenvalues.size() - 1) < -1e-10 * std::max(dec.eigenvalues(0), 0.0))
        throw std::invalid_argument("sdpi_gaussian: joint covariance not PSD");
    const double rho = operator_norm(inv_sqrt_pd(joint.c11, "sdpi_gaussian") * joint.c12
                                     * inv_sqrt_pd(joint.c22, "sdpi_gaussian"));
    return rho * rho;
}

double symmetric_sdpi_gaussian(const GaussianJoint& joint) {
    return sdpi_gaussian(joint);
}

namespace {

constexpr const char* kExplicit = "explicit sigma^2/32 prefactor";
constexpr const char* kRate = "rate expression, constant 1";

void check_inputs(const BoundInputs& inp) {
    if (!(inp.sigma > 0.0) || !(inp.m > 0.0) || !(inp.d1 > 0.0) || !(inp.d2 > 0.0)
        || !(inp.b1 > 0.0) || !(inp.b2 > 0.0))
        throw std::invalid_argument("lower bound: all inputs must be positive");
}

double alpha_op_cc(const BoundInputs& inp) {
    const double dmax = std::max(inp.d1, inp.d2);
    return std::max(std::sqrt(inp.d1 * dmax / (2.0 * inp.b1)),
                    std::sqrt(inp.d2 * dmax / (2.0 * inp.b2)));
}

double alpha_op_sc(const BoundInputs& inp) {
    return std::sqrt((inp.d1 + inp.d2) / (3.0 * inp.m));
}

double alpha_fr_cc(const BoundInputs& inp) {
    return std::sqrt(inp.d1 * inp.d2 / 14.0 * std::max(inp.d1 / inp.b1, inp.d2 / inp.b2));
}

double alpha_fr_self(const BoundInputs& inp) {
    return 4.0 / 7.0 * std::max(
        std::sqrt(inp.d1) * std::exp2(-16.0 * inp.b1 / (inp.d1 * inp.d1)),
        std::sqrt(inp.d2) * std::exp2(-16.0 * inp.b2 / (inp.d2 * inp.d2)));
}

} // namespace

BoundValue lower_bound_op(const BoundInputs& inp) {
    check_inputs(inp);
    const double alpha = std::max(alpha_op_cc(inp), alpha_op_sc(inp));
    return {inp.sigma * inp.sigma / 32.0 * std::min(alpha, 2.0), kExplicit};
}

BoundValue lower_bound_op_cross(const BoundInputs& inp) {
    // cross-covariance distortion obeys the same op-norm expression
    return lower_bound_op(inp);
}

BoundValue lower_bound_fr(const BoundInputs& inp) {
    check_inputs(inp);
    const double d = inp.d1 + inp.d2;
    const double alpha_sc = std::sqrt(d * d / (42.0 * inp.m));
    const double cross_part = std::min(std::max(alpha_fr_cc(inp), alpha_sc), std::sqrt(d) / 7.0);
    return {inp.sigma * inp.sigma / 32.0 * std::max(cross_part, alpha_fr_self(inp)), kExplicit};
}

BoundValue lower_bound_fr_cross(const BoundInputs& inp) {
    check_inputs(inp);
    const double d = inp.d1 + inp.d2;
    const double dmin = std::min(inp.d1, inp.d2);
    const double alpha_sc = std::sqrt(d * dmin / (42.0 * inp.m));
    const double alpha = std::max(alpha_fr_cc(inp), alpha_sc);
    return {inp.sigma * inp.sigma / 32.0 * std::min(alpha, std::sqrt(dmin) / 7.0), kExplicit};
}

BoundValue lower_bound_multi(double sigma, double m, const std::vector<double>& d_k,
                             const std::vector<double>& b_k) {
    if (d_k.empty() || d_k.size() != b_k.size())
        throw std::invalid_argument("lower_bound_multi: need matching nonempty d_k, B_k lists");
    if (!(sigma > 0.0) || !(m > 0.0))
        throw std::invalid_argument("lower_bound_multi: sigma and m must be positive");
    double d = 0.0;
    double worst = 0.0;
    for (std::size_t k = 0; k < d_k.size(); ++k) {
        if (!(d_k[k] > 0.0) || !(b_k[k] > 0.0))
            throw std::invalid_argument("lower_bound_multi: entries must be positive");
        d += d_k[k];
        worst = std::max(worst, d_k[k] / b_k[k]);
    }
    return {sigma * sigma * std::sqrt(std::max(d * worst, d / m)), kRate};
}

Matrix signed_perm_expectation_exact(const Matrix& b) {
    const int d = int(b.rows());
    if (b.cols() != d)
        throw std::invalid_argument("signed_perm_expectation: matrix must be square");
    if (d < 1 || d > 5)
        throw std::invalid_argument("signed_perm_expectation: exact enumeration needs d <= 5");
    std::vector<int> perm(static_cast<std::size_t>(d));
    std::iota(perm.begin(), perm.end(), 0);
    Matrix acc = Matrix::Zero(d, d);
    long count = 0;
    do {
        for (unsigned signs = 0; signs < (1u << d); ++signs) {
            // A has s_j in row perm[j] of column j, so (A^T B A)_{jk} = s_j s_k B_{perm j, perm k}
            for (int j = 0; j < d; ++j) {
                const double sj = (signs >> j) & 1u ? -1.0 : 1.0;
                for (int k = 0; k < d; ++k) {
                    const double sk = (signs >> k) & 1u ? -1.0 : 1.0;
                    acc(j, k) += sj * sk * b(perm[std::size_t(j)], perm[std::size_t(k)]);
                }
            }
            ++count;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return acc / double(count);
}

Matrix signed_perm_expectation_mc(const Matrix& b, long trials, std::uint64_t seed) {
    const int d = int(b.rows());
    if (b.cols() != d || d < 1)
        throw std::invalid_argument("signed_perm_expectation: matrix must be square");
    if (trials < 1)
        throw std::invalid_argument("signed_perm_expectation: trials must be positive");
    Rng rng(seed);
    std::vector<int> perm(static_cast<std::size_t>(d));
    Matrix acc = Matrix::Zero(d, d);
    for (long t = 0; t < trials; ++t) {
        std::iota(perm.begin(), perm.end(), 0);
        for (int i = d - 1; i > 0; --i)
            std::swap(perm[std::size_t(i)], perm[rng.next_u64() % std::uint64_t(i + 1)]);
        std::vector<double> sign(static_cast<std::size_t>(d));
        for (int i = 0; i < d; ++i)
            sign[std::size_t(i)] = rng.rademacher();
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k)
                acc(j, k) += sign[std::size_t(j)] * sign[std::size_t(k)]
                           * b(perm[std::size_t(j)], perm[std::size_t(k)]);
    }
    return acc / double(trials);
}

} // namespace dcme
