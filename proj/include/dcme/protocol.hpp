#pragma once
#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "dcme/model.hpp"
#include "dcme/quantize.hpp"

namespace dcme {

enum class Norm { Op, Fr };

// Theorem-driven constants. m_min and b_min are the conservative theorem
// values kept for audit; n is the cross-block sample count and may be
// overridden (together with the per-agent budgets handed to the encoders)
// for desk-scale runs without touching the reported minima.
struct SchemeParamsTwoAgent {
    double sigma = 1.0;
    double eps = 0.0;
    int d1 = 0;
    int d2 = 0;
    Norm norm = Norm::Op;
    bool high_distortion = false;  // Frobenius high-distortion mode: budgets go to self blocks only
    double eps_tilde = 0.0;
    double beta = 0.0;
    double m_min = 0.0;
    std::array<double, 2> b_min{0.0, 0.0};
    double n = 0.0;
};

struct SchemeParamsMulti {
    double sigma = 1.0;
    double eps = 0.0;
    int d = 0;
    double eps_tilde = 0.0;
    double n = 0.0;  // sample count; theorem value, overridable
    double beta_fail = 0.0;
    double l_clip = 0.0;
    ScalarDitherConfig dither;
    double b_per_dim = 0.0;
};

enum class MessageKind { Error, Payload };

struct AgentMessage {
    int agent_id = 0;
    MessageKind kind = MessageKind::Error;
    std::optional<QuantizedMatrix> selfcov;
    std::optional<QuantizedMatrix> data;
    std::uint64_t bits_used = 0;
    std::uint64_t budget = 0;  // assigned B_k; the server knows it and rebuilds the grids
};

struct ServerEstimate {
    Matrix c_hat;
    Matrix c12_hat;
    bool error_triggered = false;
    std::uint64_t bits_total = 0;
};

SchemeParamsTwoAgent two_agent_params(double sigma, double eps, int d1, int d2, Norm norm);

// Self-covariance over all columns, cross-block payload from the first n.
// Returns an error message when either op-norm threshold trips.
AgentMessage two_agent_encode(const SampleMatrix& samples, const SchemeParamsTwoAgent& params,
                              int agent_id, std::uint64_t budget);

ServerEstimate two_agent_decode(const AgentMessage& msg1, const AgentMessage& msg2,
                                const SchemeParamsTwoAgent& params);

SchemeParamsMulti multi_agent_params(double sigma, double eps, int d);

// Desk-scale knob: keep the dither structure but choose (n, N, L) directly.
SchemeParamsMulti multi_agent_override(const SchemeParamsMulti& base, double n, long grid_n,
                                       double l_clip);

AgentMessage multi_agent_encode(const SampleMatrix& samples, const SchemeParamsMulti& params,
                                int agent_id, Rng& rng);

ServerEstimate multi_agent_decode(const std::vector<AgentMessage>& messages,
                                  const SchemeParamsMulti& params);

struct InteractiveResult {
    Matrix c12_hat;  // the shared estimate, d1 x d2 in caller orientation
    std::uint64_t transcript_bits = 0;
    std::uint64_t data_bits = 0;   // narrow party's quantized block (round 1)
    std::uint64_t cross_bits = 0;  // server's broadcast of the cross estimate (round 2)
    bool error_triggered = false;
    long n = 0;
};

// Board protocol: the wider-block party acts as server. Round 1 writes
// nothing (0 bits), the narrow party posts its quantized data block, the
// server clips its cross estimate to the sigma^2 ball and broadcasts it.
// bob_budget = 0 derives the data budget from the theorem rate beta/2 per entry.
InteractiveResult interactive_run(const SampleMatrix& alice, const SampleMatrix& bob,
                                  double sigma, double eps, std::uint64_t bob_budget = 0);

// Frame conversion for byte-level dumps and the wire round trip.
WireMessage to_wire(const AgentMessage& msg);
AgentMessage from_wire(const WireMessage& wire, std::uint64_t budget);

} // namespace dcme
