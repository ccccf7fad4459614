#include "dcme/protocol.hpp"

#include <cmath>
#include <stdexcept>

namespace dcme {

namespace {

constexpr double kSelfCapFactor = 11.0;  // ||C~_kk||_op threshold, in sigma^2 units
constexpr double kDataCapFactor = 6.0;   // ||X||_op threshold, in sigma*sqrt(d_k + n) units

double data_cap(double sigma, int d_k, long n) {
    return kDataCapFactor * sigma * std::sqrt(double(d_k) + double(n));
}

long cross_sample_count(const SchemeParamsTwoAgent& params) {
    const double n = params.n;
    if (!(n >= 1.0) || n > 9e15)
        throw std::invalid_argument("two_agent: cross-block sample count out of range");
    return std::llround(std::floor(n));
}

} // namespace

SchemeParamsTwoAgent two_agent_params(double sigma, double eps, int d1, int d2, Norm norm) {
    if (d1 < 1 || d2 < 1)
        throw std::invalid_argument("two_agent_params: need d1, d2 >= 1");
    if (!(sigma > 0.0) || !(eps > 0.0))
        throw std::invalid_argument("two_agent_params: need positive sigma and eps");
    const double d = double(d1) + double(d2);
    const double d_min = double(std::min(d1, d2));
    const double s2 = sigma * sigma;

    SchemeParamsTwoAgent p;
    p.sigma = sigma;
    p.eps = eps;
    p.d1 = d1;
    p.d2 = d2;
    p.norm = norm;
    if (norm == Norm::Op) {
        p.eps_tilde = eps / s2;
        if (p.eps_tilde > 1.0)
            throw std::invalid_argument("two_agent_params: op norm needs eps <= sigma^2");
    } else {
        p.eps_tilde = eps / (s2 * std::sqrt(d));
        p.high_distortion = eps >= 512.0 * s2 * std::sqrt(d_min);
        if (p.eps_tilde > 1.0 && !p.high_distortion)
            throw std::invalid_argument(
                "two_agent_params: fr norm needs eps <= sigma^2 sqrt(d) or the "
                "high-distortion regime eps >= 512 sigma^2 sqrt(d_min)");
    }
    p.beta = 2.0 * std::log2(6912.0 / p.eps_tilde);
    if (!(p.beta > 0.0))
        throw std::invalid_argument("two_agent_params: eps too large for the scheme constants");
    const double et2 = p.eps_tilde * p.eps_tilde;
    p.m_min = std::exp2(19) * d / et2;
    for (int k = 0; k < 2; ++k) {
        const double d_k = k == 0 ? double(d1) : double(d2);
        if (norm == Norm::Op)
            p.b_min[std::size_t(k)] = std::exp2(18) * p.beta * d_k * d / et2;
        else
            p.b_min[std::size_t(k)] = std::max(std::exp2(18) * p.beta * d_k * d_min / et2,
                                               2.0 * d_k * d_k * std::log2(528.0 / p.eps_tilde));
    }
    // no cross block is ever sent in high-distortion mode, so n has no meaning there
    p.n = p.high_distortion
              ? 0.0
              : std::min(std::min(p.b_min[0] / double(d1), p.b_min[1] / double(d2)) / p.beta,
                         p.m_min);
    return p;
}

AgentMessage two_agent_encode(const SampleMatrix& samples, const SchemeParamsTwoAgent& params,
                              int agent_id, std::uint64_t budget) {
    const int d_k = int(samples.rows());
    const long m = long(samples.cols());
    if (d_k < 1 || m < 1)
        throw std::invalid_argument("two_agent_encode: empty sample matrix");
    const long n = params.high_distortion ? 0 : cross_sample_count(params);
    if (m < n)
        throw std::invalid_argument("two_agent_encode: fewer samples than params.n");

    AgentMessage msg;
    msg.agent_id = agent_id;
    msg.budget = budget;
    msg.kind = MessageKind::Error;

    const double s2 = params.sigma * params.sigma;
    const Matrix selfcov = samples * samples.transpose() / double(m);
    if (operator_norm(selfcov) > kSelfCapFactor * s2)
        return msg;
    if (!params.high_distortion
        && operator_norm(samples.leftCols(n)) >= data_cap(params.sigma, d_k, n))
        return msg;

    msg.kind = MessageKind::Payload;
    const std::uint64_t self_budget = params.high_distortion ? budget : budget / 2;
    const double self_eps = invert_budget(d_k, d_k, kSelfCapFactor * s2, self_budget);
    auto [q_self, self_report] = matrix_uniform_encode(selfcov, kSelfCapFactor * s2, self_eps);
    msg.bits_used = q_self.bits_used;
    msg.selfcov = std::move(q_self);

    if (!params.high_distortion) {
        const double cap = data_cap(params.sigma, d_k, n);
        const double eps = invert_budget(d_k, int(n), cap, budget / 2);
        auto [q_data, data_report] = matrix_uniform_encode(samples.leftCols(n), cap, eps);
        msg.bits_used += q_data.bits_used;
        msg.data = std::move(q_data);
    }
    if (msg.bits_used > budget)
        throw std::logic_error("two_agent_encode: budget law violated");
    return msg;
}

namespace {

Matrix decode_selfcov(const AgentMessage& msg, const SchemeParamsTwoAgent& params, int d_k) {
    if (!msg.selfcov || msg.selfcov->rows != d_k || msg.selfcov->cols != d_k)
        throw std::invalid_argument("two_agent_decode: self-covariance section missing or misshapen");
    const double cap = kSelfCapFactor * params.sigma * params.sigma;
    const std::uint64_t self_budget = params.high_distortion ? msg.budget : msg.budget / 2;
    return matrix_uniform_decode(*msg.selfcov, cap, invert_budget(d_k, d_k, cap, self_budget));
}

Matrix decode_data(const AgentMessage& msg, const SchemeParamsTwoAgent& params, int d_k, long n) {
    if (!msg.data || msg.data->rows != d_k || msg.data->cols != n)
        throw std::invalid_argument("two_agent_decode: data section missing or misshapen");
    const double cap = data_cap(params.sigma, d_k, n);
    return matrix_uniform_decode(*msg.data, cap, invert_budget(d_k, int(n), cap, msg.budget / 2));
}

} // namespace

ServerEstimate two_agent_decode(const AgentMessage& msg1, const AgentMessage& msg2,
                                const SchemeParamsTwoAgent& params) {
    const int d1 = params.d1;
    const int d2 = params.d2;
    if (d1 < 1 || d2 < 1)
        throw std::invalid_argument("two_agent_decode: params carry no dimensions");
    const int d = d1 + d2;

    ServerEstimate est;
    est.bits_total = msg1.bits_used + msg2.bits_used;
    if (msg1.kind == MessageKind::Error || msg2.kind == MessageKind::Error) {
        est.error_triggered = true;
        est.c_hat = Matrix::Zero(d, d);
        est.c12_hat = Matrix::Zero(d1, d2);
        return est;
    }

    const Matrix c11 = decode_selfcov(msg1, params, d1);
    const Matrix c22 = decode_selfcov(msg2, params, d2);
    if (params.high_distortion) {
        // block-diagonal return; projecting per block keeps the cross zeros exact
        est.c_hat = Matrix::Zero(d, d);
        est.c_hat.topLeftCorner(d1, d1) = psd_project(c11);
        est.c_hat.bottomRightCorner(d2, d2) = psd_project(c22);
        est.c12_hat = Matrix::Zero(d1, d2);
        return est;
    }

    const long n = cross_sample_count(params);
    const Matrix x1 = decode_data(msg1, params, d1, n);
    const Matrix x2 = decode_data(msg2, params, d2, n);
    Matrix star(d, d);
    star.topLeftCorner(d1, d1) = c11;
    star.topRightCorner(d1, d2) = x1 * x2.transpose() / double(n);
    star.bottomLeftCorner(d2, d1) = star.topRightCorner(d1, d2).transpose();
    star.bottomRightCorner(d2, d2) = c22;
    est.c_hat = psd_project(star);
    est.c12_hat = est.c_hat.topRightCorner(d1, d2);
    return est;
}

SchemeParamsMulti multi_agent_params(double sigma, double eps, int d) {
    if (d < 1)
        throw std::invalid_argument("multi_agent_params: need d >= 1");
    if (!(sigma > 0.0) || !(eps > 0.0) || eps > sigma * sigma)
        throw std::invalid_argument("multi_agent_params: need 0 < eps <= sigma^2");
    SchemeParamsMulti p;
    p.sigma = sigma;
    p.eps = eps;
    p.d = d;
    p.eps_tilde = eps / (1520.0 * sigma * sigma);
    p.n = double(d) / (p.eps_tilde * p.eps_tilde);
    p.beta_fail = eps / (2.0 * sigma * sigma);
    p.l_clip = sigma * std::sqrt(2.0 * std::log(double(d) * p.n / p.beta_fail));
    p.dither = make_dither_config(p.l_clip, sigma * p.eps_tilde);
    p.b_per_dim = p.n * std::log2(2.0 * double(p.dither.N) + 1.0);
    return p;
}

SchemeParamsMulti multi_agent_override(const SchemeParamsMulti& base, double n, long grid_n,
                                       double l_clip) {
    if (!(n >= 1.0) || grid_n < 1 || !(l_clip > 0.0))
        throw std::invalid_argument("multi_agent_override: need n >= 1, N >= 1, L > 0");
    SchemeParamsMulti p = base;
    p.n = n;
    p.l_clip = l_clip;
    p.dither.N = grid_n;
    p.dither.step = l_clip / double(grid_n);
    p.dither.L = double(grid_n) * p.dither.step;
    p.eps_tilde = p.dither.step / p.sigma;
    p.b_per_dim = n * std::log2(2.0 * double(grid_n) + 1.0);
    return p;
}

AgentMessage multi_agent_encode(const SampleMatrix& samples, const SchemeParamsMulti& params,
                                int agent_id, Rng& rng) {
    const int d_k = int(samples.rows());
    if (d_k < 1)
        throw std::invalid_argument("multi_agent_encode: empty sample matrix");
    if (!(params.n >= 1.0) || params.n > 2e9)
        throw std::invalid_argument("multi_agent_encode: params.n out of range for a run");
    const long n = std::llround(std::floor(params.n));
    if (long(samples.cols()) < n)
        throw std::invalid_argument("multi_agent_encode: fewer samples than params.n");
    const double two_n_plus_1 = 2.0 * double(params.dither.N) + 1.0;
    if (two_n_plus_1 > 4294967295.0)
        throw std::invalid_argument("multi_agent_encode: dither alphabet exceeds 32-bit codes");

    AgentMessage msg;
    msg.agent_id = agent_id;
    msg.kind = MessageKind::Error;
    const Matrix block = samples.leftCols(n);
    if (block.cwiseAbs().maxCoeff() > params.dither.L)
        return msg;

    QuantizedMatrix q;
    q.rows = d_k;
    q.cols = int(n);
    q.alphabet = std::uint32_t(two_n_plus_1);
    q.codes.reserve(std::size_t(d_k) * std::size_t(n));
    for (int i = 0; i < d_k; ++i)
        for (long j = 0; j < n; ++j)
            q.codes.push_back(dither_encode(block(i, j), params.dither, rng));
    q.bits_used = std::uint64_t(q.codes.size()) * std::uint64_t(bits_per_symbol(q.alphabet));

    msg.kind = MessageKind::Payload;
    msg.bits_used = q.bits_used;
    msg.budget = q.bits_used;  // assigned budget is d_k * n * ceil(log2(2N+1)) by construction
    msg.data = std::move(q);
    return msg;
}

ServerEstimate multi_agent_decode(const std::vector<AgentMessage>& messages,
                                  const SchemeParamsMulti& params) {
    if (messages.empty())
        throw std::invalid_argument("multi_agent_decode: no messages");
    ServerEstimate est;
    for (const AgentMessage& msg : messages)
        est.bits_total += msg.bits_used;
    const int d = params.d;
    for (const AgentMessage& msg : messages)
        if (msg.kind == MessageKind::Error) {
            est.error_triggered = true;
            est.c_hat = Matrix::Zero(d, d);
            return est;
        }

    const long n = std::llround(std::floor(params.n));
    Matrix stacked(d, n);
    int row = 0;
    for (const AgentMessage& msg : messages) {
        if (!msg.data)
            throw std::invalid_argument("multi_agent_decode: payload without data section");
        const QuantizedMatrix& q = *msg.data;
        if (q.cols != n || row + q.rows > d)
            throw std::invalid_argument("multi_agent_decode: section shape mismatch");
        if (q.alphabet != std::uint32_t(2 * params.dither.N + 1))
            throw std::invalid_argument("multi_agent_decode: alphabet mismatch");
        std::size_t idx = 0;
        for (int i = 0; i < q.rows; ++i)
            for (long j = 0; j < n; ++j)
                stacked(row + i, j) = dither_decode(q.codes[idx++], params.dither);
        row += q.rows;
    }
    if (row != d)
        throw std::invalid_argument("multi_agent_decode: agent dimensions do not sum to d");
    est.c_hat = stacked * stacked.transpose() / double(n);
    return est;
}

InteractiveResult interactive_run(const SampleMatrix& alice, const SampleMatrix& bob,
                                  double sigma, double eps, std::uint64_t bob_budget) {
    if (alice.cols() != bob.cols())
        throw std::invalid_argument("interactive_run: sample counts differ");
    if (!(sigma > 0.0) || !(eps > 0.0) || eps > sigma * sigma)
        throw std::invalid_argument("interactive_run: need 0 < eps <= sigma^2");
    if (alice.rows() < bob.rows()) {
        InteractiveResult swapped = interactive_run(bob, alice, sigma, eps, bob_budget);
        swapped.c12_hat = swapped.c12_hat.transpose().eval();
        return swapped;
    }

    const int d1 = int(alice.rows());
    const int d2 = int(bob.rows());
    const long m = long(alice.cols());
    if (d1 < 1 || d2 < 1 || m < 1)
        throw std::invalid_argument("interactive_run: empty sample matrices");

    const double s2 = sigma * sigma;
    const double eps_tilde = eps / s2;
    const double beta = 2.0 * std::log2(6912.0 / eps_tilde);
    const double n_theorem = std::exp2(18) * double(d1 + d2) / (eps_tilde * eps_tilde);
    const long n = std::min<double>(double(m), std::floor(n_theorem)) < 1.0
                       ? 1
                       : long(std::min<double>(double(m), std::floor(n_theorem)));

    InteractiveResult res;
    res.n = n;
    const double cap = data_cap(sigma, d2, n);
    const Matrix x2 = bob.leftCols(n);
    if (operator_norm(x2) >= cap) {
        res.error_triggered = true;
        res.c12_hat = Matrix::Zero(d1, d2);
        return res;
    }

    // round 1: the server-side party writes nothing (0 bits), then the narrow
    // party posts its data block at the theorem rate beta/2 bits per entry
    if (bob_budget == 0)
        bob_budget = std::max<std::uint64_t>(
            std::uint64_t(d2) * std::uint64_t(n),
            std::uint64_t(std::floor(double(n) * double(d2) * beta / 2.0)));
    const double data_eps = invert_budget(d2, int(n), cap, bob_budget);
    auto [q_data, data_report] = matrix_uniform_encode(x2, cap, data_eps);
    const Matrix x2_hat = matrix_uniform_decode(q_data, cap, data_eps);

    // round 2: cross estimate, clipped into the op-norm ball the covering
    // argument presumes, then broadcast at half the distortion target
    Matrix c12 = alice.leftCols(n) * x2_hat.transpose() / double(n);
    const double c12_norm = operator_norm(c12);
    if (c12_norm > s2)
        c12 *= s2 / c12_norm;
    auto [q_cross, cross_report] = matrix_uniform_encode(c12, s2, eps / 2.0);
    res.c12_hat = matrix_uniform_decode(q_cross, s2, eps / 2.0);
    res.data_bits = q_data.bits_used;
    res.cross_bits = q_cross.bits_used;
    res.transcript_bits = res.data_bits + res.cross_bits;
    return res;
}

WireMessage to_wire(const AgentMessage& msg) {
    WireMessage wire;
    wire.agent_id = std::uint16_t(msg.agent_id);
    wire.is_error = msg.kind == MessageKind::Error;
    if (!wire.is_error) {
        if (msg.selfcov)
            wire.sections.push_back(*msg.selfcov);
        if (msg.data)
            wire.sections.push_back(*msg.data);
    }
    return wire;
}

AgentMessage from_wire(const WireMessage& wire, std::uint64_t budget) {
    AgentMessage msg;
    msg.agent_id = wire.agent_id;
    msg.budget = budget;
    if (wire.is_error) {
        msg.kind = MessageKind::Error;
        return msg;
    }
    msg.kind = MessageKind::Payload;
    // sections are ordered (selfcov, data); a lone square section is read as
    // a self block, a lone rectangular one as data
    if (wire.sections.size() == 2) {
        msg.selfcov = wire.sections[0];
        msg.data = wire.sections[1];
    } else if (wire.sections.size() == 1) {
        if (wire.sections[0].rows == wire.sections[0].cols)
            msg.selfcov = wire.sections[0];
        else
            msg.data = wire.sections[0];
    } else if (!wire.sections.empty()) {
        throw std::invalid_argument("from_wire: unexpected section count");
    }
    for (const QuantizedMatrix& q : wire.sections)
        msg.bits_used += q.bits_used;
    return msg;
}

} // namespace dcme
