#include "dcme/quantize.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

namespace dcme {

ScalarDitherConfig make_dither_config(double clip_radius, double step) {
    if (!(clip_radius > 0.0) || !(step > 0.0))
        throw std::invalid_argument("make_dither_config: need positive radius and step");
    ScalarDitherConfig cfg;
    cfg.N = static_cast<long>(std::ceil(clip_radius / step));
    if (cfg.N < 1)
        cfg.N = 1;
    cfg.step = step;
    cfg.L = double(cfg.N) * step;
    return cfg;
}

std::uint32_t dither_encode(double x, const ScalarDitherConfig& cfg, Rng& rng) {
    if (!(std::abs(x) <= cfg.L))
        throw std::invalid_argument("dither_encode: |x| exceeds clip radius");
    if (x == cfg.L)
        return std::uint32_t(2 * cfg.N);
    if (x == -cfg.L)
        return 0;
    long j = long(std::floor(x / cfg.step));
    if (j < -cfg.N)
        j = -cfg.N;
    if (j > cfg.N - 1)
        j = cfg.N - 1;
    const double p_up = (x - double(j) * cfg.step) / cfg.step;
    const long up = rng.uniform() < p_up ? 1 : 0;
    return std::uint32_t(j + up + cfg.N);
}

double dither_decode(std::uint32_t code, const ScalarDitherConfig& cfg) {
    if (code > std::uint32_t(2 * cfg.N))
        throw std::invalid_argument("dither_decode: code out of range");
    return (double(code) - double(cfg.N)) * cfg.step;
}

int bits_per_symbol(std::uint32_t alphabet) {
    if (alphabet < 2)
        throw std::invalid_argument("bits_per_symbol: alphabet must be >= 2");
    return std::bit_width(alphabet - 1u);
}

namespace {

struct UniformGrid {
    double delta;
    long kmin;
    std::uint32_t alphabet;
};

UniformGrid make_grid(int rows, int cols, double r, double eps) {
    if (rows < 1 || cols < 1)
        throw std::invalid_argument("matrix codec: empty shape");
    if (!(eps > 0.0) || !(r > 0.0))
        throw std::invalid_argument("matrix codec: need positive r and eps");
    UniformGrid g;
    g.delta = 2.0 * eps / std::sqrt(double(rows) * double(cols));
    const double span = 2.0 * r / g.delta;
    if (span >= double(std::numeric_limits<std::uint32_t>::max()) - 2.0)
        throw std::invalid_argument("matrix codec: grid too fine for 32-bit codes");
    g.kmin = long(std::ceil(-r / g.delta - 0.5));
    g.alphabet = std::uint32_t(std::floor(span)) + 2u;
    return g;
}

class BitWriter {
public:
    void put(std::uint32_t value, int width) {
        for (int b = width - 1; b >= 0; --b) {
            if (fill_ == 0)
                bytes_.push_back(0);
            bytes_.back() = std::uint8_t(bytes_.back() | (((value >> b) & 1u) << (7 - fill_)));
            fill_ = (fill_ + 1) % 8;
        }
    }
    const std::vector<std::uint8_t>& bytes() const { return bytes_; }

private:
    std::vector<std::uint8_t> bytes_;
    int fill_ = 0;
};

class BitReader {
public:
    BitReader(const std::uint8_t* data, std::size_t nbytes) : data_(data), nbytes_(nbytes) {}
    std::uint32_t get(int width) {
        std::uint32_t v = 0;
        for (int b = 0; b < width; ++b) {
            const std::size_t byte = pos_ / 8;
            if (byte >= nbytes_)
                throw std::invalid_argument("payload: packed bits truncated");
            v = (v << 1) | ((data_[byte] >> (7 - pos_ % 8)) & 1u);
            ++pos_;
        }
        return v;
    }

private:
    const std::uint8_t* data_;
    std::size_t nbytes_;
    std::size_t pos_ = 0;
};

} // namespace

std::pair<QuantizedMatrix, CodecReport> matrix_uniform_encode(const Matrix& m, double r, double eps) {
    if (!m.allFinite())
        throw std::invalid_argument("matrix_uniform_encode: non-finite entries");
    if (operator_norm(m) > r * (1.0 + 1e-12))
        throw std::invalid_argument("matrix_uniform_encode: ||M||_op exceeds cap r");
    const int rows = int(m.rows());
    const int cols = int(m.cols());
    const UniformGrid g = make_grid(rows, cols, r, eps);

    QuantizedMatrix q;
    q.rows = rows;
    q.cols = cols;
    q.alphabet = g.alphabet;
    q.codes.reserve(std::size_t(rows) * std::size_t(cols));
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
            // nearest grid point, ties toward -inf
            long k = long(std::ceil(m(i, j) / g.delta - 0.5));
            if (k < g.kmin)
                k = g.kmin;
            if (k > g.kmin + long(g.alphabet) - 1)
                k = g.kmin + long(g.alphabet) - 1;
            q.codes.push_back(std::uint32_t(k - g.kmin));
        }
    q.bits_used = std::uint64_t(q.codes.size()) * std::uint64_t(bits_per_symbol(g.alphabet));

    CodecReport report;
    report.bits_used = q.bits_used;
    report.max_entry_error = 0.5 * g.delta;
    report.op_error_bound = eps;
    return {q, report};
}

Matrix matrix_uniform_decode(const QuantizedMatrix& q, double r, double eps) {
    const UniformGrid g = make_grid(q.rows, q.cols, r, eps);
    if (q.alphabet != g.alphabet)
        throw std::invalid_argument("matrix_uniform_decode: alphabet does not match grid");
    if (q.codes.size() != std::size_t(q.rows) * std::size_t(q.cols))
        throw std::invalid_argument("matrix_uniform_decode: code count does not match shape");
    Matrix m(q.rows, q.cols);
    std::size_t idx = 0;
    for (int i = 0; i < q.rows; ++i)
        for (int j = 0; j < q.cols; ++j) {
            const std::uint32_t code = q.codes[idx++];
            if (code >= q.alphabet)
                throw std::invalid_argument("matrix_uniform_decode: code outside alphabet");
            m(i, j) = double(long(code) + g.kmin) * g.delta;
        }
    return m;
}

double invert_budget(int rows, int cols, double r, std::uint64_t budget_bits) {
    if (rows < 1 || cols < 1 || !(r > 0.0))
        throw std::invalid_argument("invert_budget: need positive shape and cap");
    const std::uint64_t entries = std::uint64_t(rows) * std::uint64_t(cols);
    std::uint64_t bpe = budget_bits / entries;
    if (bpe < 1)
        throw InsufficientBudget("invert_budget: fewer than one bit per entry");
    if (bpe > 31)
        bpe = 31;  // alphabet must stay within 32-bit codes
    const double a_max = double(std::uint64_t(1) << bpe);
    // smallest step with floor(2r/step)+2 <= a_max, nudged so flooring is safe
    const double delta = 2.0 * r / (a_max - 1.0) * (1.0 + 1e-12);
    return 0.5 * delta * std::sqrt(double(entries));
}

double net_bits_theoretical(int rows, int cols, double r, double eps) {
    if (rows < 1 || cols < 1 || !(r > 0.0) || !(eps > 0.0))
        throw std::invalid_argument("net_bits_theoretical: need positive arguments");
    if (eps >= 3.0 * r)
        throw std::invalid_argument("net_bits_theoretical: eps must be below 3r");
    return double(rows) * double(cols) * std::log2(3.0 * r / eps);
}

double packing_log_lower(int rows, int cols, double r, double eps, PackingNorm norm) {
    if (rows < 1 || cols < 1 || !(r > 0.0) || !(eps > 0.0))
        throw std::invalid_argument("packing_log_lower: need positive arguments");
    const double entries = double(rows) * double(cols);
    if (norm == PackingNorm::Op)
        return entries * std::log2(r / eps);
    const double root_min = std::sqrt(double(std::min(rows, cols)));
    return entries * std::log2(r * root_min / (14.0 * eps));
}

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(std::uint8_t(v & 0xff));
    out.push_back(std::uint8_t(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
        out.push_back(std::uint8_t((v >> (8 * i)) & 0xff));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i)
        out.push_back(std::uint8_t((v >> (8 * i)) & 0xff));
}

class ByteReader {
public:
    ByteReader(const std::vector<std::uint8_t>& b) : b_(b) {}
    std::uint8_t u8() { return need(1), b_[pos_++]; }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = std::uint16_t(b_[pos_] | (b_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i)
            v = (v << 8) | b_[pos_ + std::size_t(i)];
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i)
            v = (v << 8) | b_[pos_ + std::size_t(i)];
        pos_ += 8;
        return v;
    }
    const std::uint8_t* raw(std::size_t n) {
        need(n);
        const std::uint8_t* p = b_.data() + pos_;
        pos_ += n;
        return p;
    }
    bool exhausted() const { return pos_ == b_.size(); }

private:
    void need(std::size_t n) {
        if (pos_ + n > b_.size())
            throw std::invalid_argument("payload: truncated frame");
    }
    const std::vector<std::uint8_t>& b_;
    std::size_t pos_ = 0;
};

constexpr std::uint16_t kMagic = 0xDC3E;
constexpr std::uint8_t kVersion = 1;

} // namespace

std::vector<std::uint8_t> serialize_payload(const WireMessage& msg) {
    std::vector<std::uint8_t> out;
    put_u16(out, kMagic);
    out.push_back(kVersion);
    put_u16(out, msg.agent_id);
    out.push_back(msg.is_error ? 0 : 1);
    if (msg.is_error)
        return out;
    if (msg.sections.size() > 255)
        throw std::invalid_argument("serialize_payload: too many sections");
    out.push_back(std::uint8_t(msg.sections.size()));
    for (const QuantizedMatrix& q : msg.sections) {
        if (q.codes.size() != std::size_t(q.rows) * std::size_t(q.cols))
            throw std::invalid_argument("serialize_payload: code count does not match shape");
        const int width = bits_per_symbol(q.alphabet);
        put_u32(out, std::uint32_t(q.rows));
        put_u32(out, std::uint32_t(q.cols));
        put_u32(out, q.alphabet);
        put_u64(out, std::uint64_t(q.codes.size()) * std::uint64_t(width));
        BitWriter writer;
        for (std::uint32_t code : q.codes) {
            if (code >= q.alphabet)
                throw std::invalid_argument("serialize_payload: code outside alphabet");
            writer.put(code, width);
        }
        out.insert(out.end(), writer.bytes().begin(), writer.bytes().end());
    }
    return out;
}

WireMessage deserialize_payload(const std::vector<std::uint8_t>& bytes) {
    ByteReader in(bytes);
    if (in.u16() != kMagic)
        throw std::invalid_argument("payload: bad magic");
    if (in.u8() != kVersion)
        throw std::invalid_argument("payload: unsupported version");
    WireMessage msg;
    msg.agent_id = in.u16();
    const std::uint8_t kind = in.u8();
    if (kind == 0) {
        msg.is_error = true;
        if (!in.exhausted())
            throw std::invalid_argument("payload: trailing bytes after error frame");
        return msg;
    }
    if (kind != 1)
        throw std::invalid_argument("payload: unknown frame kind");
    const std::uint8_t count = in.u8();
    for (int s = 0; s < count; ++s) {
        QuantizedMatrix q;
        q.rows = int(in.u32());
        q.cols = int(in.u32());
        q.alphabet = in.u32();
        if (q.rows < 0 || q.cols < 0 || q.alphabet < 2)
            throw std::invalid_argument("payload: malformed section header");
        const std::uint64_t nbits = in.u64();
        const int width = bits_per_symbol(q.alphabet);
        const std::uint64_t ncodes = std::uint64_t(q.rows) * std::uint64_t(q.cols);
        if (nbits != ncodes * std::uint64_t(width))
            throw std::invalid_argument("payload: bit length does not match shape");
        BitReader reader(in.raw((nbits + 7) / 8), std::size_t((nbits + 7) / 8));
        q.codes.reserve(ncodes);
        for (std::uint64_t i = 0; i < ncodes; ++i) {
            const std::uint32_t code = reader.get(width);
            if (code >= q.alphabet)
                throw std::invalid_argument("payload: code outside alphabet");
            q.codes.push_back(code);
        }
        q.bits_used = nbits;
        msg.sections.push_back(std::move(q));
    }
    if (!in.exhausted())
        throw std::invalid_argument("payload: trailing bytes");
    return msg;
}

} // namespace dcme
