#pragma once
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dcme/model.hpp"
#include "dcme/rng.hpp"

namespace dcme {

struct InsufficientBudget : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// 2N+1 grid points {-N*step, ..., 0, ..., N*step}; L is inflated to N*step.
struct ScalarDitherConfig {
    double L = 0.0;
    double step = 0.0;
    long N = 0;
};

ScalarDitherConfig make_dither_config(double clip_radius, double step);

// Randomized rounding onto the dither grid, unbiased: E[decode(code) | x] = x.
std::uint32_t dither_encode(double x, const ScalarDitherConfig& cfg, Rng& rng);
double dither_decode(std::uint32_t code, const ScalarDitherConfig& cfg);

struct QuantizedMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint32_t> codes;  // row-major
    std::uint32_t alphabet = 2;
    std::uint64_t bits_used = 0;
};

struct CodecReport {
    std::uint64_t bits_used = 0;
    double max_entry_error = 0.0;
    double op_error_bound = 0.0;
};

// ceil(log2(alphabet)) bits per packed symbol
int bits_per_symbol(std::uint32_t alphabet);

// Entrywise uniform grid with spacing 2*eps/sqrt(rows*cols), rounded nearest
// (ties toward -inf), so ||decode - M||_F <= eps and a fortiori the op norm.
std::pair<QuantizedMatrix, CodecReport> matrix_uniform_encode(const Matrix& m, double r, double eps);
Matrix matrix_uniform_decode(const QuantizedMatrix& q, double r, double eps);

// Largest eps the uniform codec can promise for a bit budget: bits are split
// evenly per entry and the grid step solves floor(2r/step)+2 <= 2^(bits/entry).
// Throws InsufficientBudget when fewer than one bit per entry is available.
double invert_budget(int rows, int cols, double r, std::uint64_t budget_bits);

double net_bits_theoretical(int rows, int cols, double r, double eps);

enum class PackingNorm { Op, Fr };
double packing_log_lower(int rows, int cols, double r, double eps, PackingNorm norm);

struct WireMessage {
    std::uint16_t agent_id = 0;
    bool is_error = false;
    std::vector<QuantizedMatrix> sections;
};

std::vector<std::uint8_t> serialize_payload(const WireMessage& msg);
WireMessage deserialize_payload(const std::vector<std::uint8_t>& bytes);

} // namespace dcme
