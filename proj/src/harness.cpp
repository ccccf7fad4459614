#include "dcme/harness.hpp"

#include "dcme/protocol.hpp"
#include "dcme/quantize.hpp"
#include "dcme/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace dcme {

namespace {

std::string trim(const std::string& s) {
    const std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos)
        return "";
    const std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> items;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ','))
        items.push_back(trim(item));
    return items;
}

double parse_double(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad number for " + key + ": '" + value + "'");
    }
    if (used != value.size())
        throw std::invalid_argument("config: trailing junk for " + key + ": '" + value + "'");
    return v;
}

long parse_long(const std::string& key, const std::string& value) {
    const double v = parse_double(key, value);
    if (v != std::floor(v) || std::abs(v) > 9e15)
        throw std::invalid_argument("config: " + key + " must be an integer, got '" + value + "'");
    return std::llround(v);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    const long v = parse_long(key, value);
    if (v < 0)
        throw std::invalid_argument("config: " + key + " must be nonnegative");
    return std::uint64_t(v);
}

} // namespace

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    bool saw_budget = false;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: expected key = value, got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (value.empty())
            throw std::invalid_argument("config: empty value for " + key);

        if (key == "scheme") {
            cfg.scheme = value;
        } else if (key == "d1") {
            cfg.d1 = int(parse_long(key, value));
        } else if (key == "d2") {
            cfg.d2 = int(parse_long(key, value));
        } else if (key == "sigma") {
            cfg.sigma = parse_double(key, value);
        } else if (key == "delta") {
            cfg.delta = parse_double(key, value);
        } else if (key == "d_seed") {
            cfg.d_seed = parse_u64(key, value);
        } else if (key == "source") {
            cfg.source = value;
        } else if (key == "m") {
            cfg.m_values.clear();
            for (const std::string& item : split_list(value))
                cfg.m_values.push_back(parse_long(key, item));
        } else if (key == "budget") {
            cfg.budgets.clear();
            for (const std::string& item : split_list(value))
                cfg.budgets.push_back(parse_u64(key, item));
            saw_budget = true;
        } else if (key == "eps") {
            cfg.eps_values.clear();
            for (const std::string& item : split_list(value))
                cfg.eps_values.push_back(parse_double(key, item));
        } else if (key == "n") {
            cfg.n_override = parse_long(key, value);
        } else if (key == "grid_n") {
            cfg.grid_n = parse_long(key, value);
        } else if (key == "l_clip") {
            cfg.l_clip = parse_double(key, value);
        } else if (key == "agents") {
            cfg.agents = int(parse_long(key, value));
        } else if (key == "trials") {
            cfg.trials = int(parse_long(key, value));
        } else if (key == "master_seed") {
            cfg.master_seed = parse_u64(key, value);
        } else if (key == "out") {
            cfg.out = value;
        } else if (key == "format") {
            cfg.format = value;
        } else {
            throw std::invalid_argument("config: unknown key '" + key + "'");
        }
    }
    if (!saw_budget)
        cfg.budgets = {0};
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::invalid_argument("config: cannot open '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

void validate_config(const ExperimentConfig& cfg) {
    const bool known = cfg.scheme == "two_agent_op" || cfg.scheme == "two_agent_fr"
                       || cfg.scheme == "multi_agent" || cfg.scheme == "interactive";
    if (!known)
        throw std::invalid_argument("config: unknown scheme '" + cfg.scheme + "'");
    if (cfg.source != "gaussian" && cfg.source != "rademacher" && cfg.source != "uniform_ball")
        throw std::invalid_argument("config: unknown source '" + cfg.source + "'");
    if (cfg.d1 < 1 || cfg.d2 < 1)
        throw std::invalid_argument("config: need d1, d2 >= 1");
    if (!(cfg.sigma > 0.0))
        throw std::invalid_argument("config: need sigma > 0");
    if (cfg.delta < 0.0 || cfg.delta > 1.0)
        throw std::invalid_argument("config: need delta in [0, 1]");
    if (cfg.m_values.empty())
        throw std::invalid_argument("config: the m sweep axis is empty");
    for (long m : cfg.m_values)
        if (m < 1)
            throw std::invalid_argument("config: m values must be >= 1");
    if (cfg.eps_values.empty())
        throw std::invalid_argument("config: the eps sweep axis is empty");
    for (double e : cfg.eps_values)
        if (!(e > 0.0))
            throw std::invalid_argument("config: eps values must be positive");
    if (cfg.budgets.empty())
        throw std::invalid_argument("config: the budget sweep axis is empty");
    if (cfg.trials < 1)
        throw std::invalid_argument("config: need trials >= 1");
    if (cfg.n_override < 0 || cfg.grid_n < 0 || cfg.l_clip < 0.0)
        throw std::invalid_argument("config: overrides must be nonnegative");
    if (cfg.agents < 1 || cfg.agents > cfg.d1 + cfg.d2)
        throw std::invalid_argument("config: agents must lie in [1, d]");
    if (cfg.format != "csv" && cfg.format != "json")
        throw std::invalid_argument("config: format must be csv or json");
}

CovarianceModel config_model(const ExperimentConfig& cfg) {
    Rng rng(cfg.d_seed);
    Matrix d_mix(cfg.d2, cfg.d1);
    for (int j = 0; j < cfg.d1; ++j)
        for (int i = 0; i < cfg.d2; ++i)
            d_mix(i, j) = rng.normal();
    const double norm = operator_norm(d_mix);
    if (norm > 0.0)
        d_mix /= norm;
    Source source = Source::Gaussian;
    if (cfg.source == "rademacher")
        source = Source::ScaledRademacher;
    else if (cfg.source == "uniform_ball")
        source = Source::UniformBall;
    return build_block_covariance(cfg.d1, cfg.d2, cfg.sigma, cfg.delta, d_mix, source);
}

namespace {

struct SweepPoint {
    double eps = 0.0;
    std::uint64_t budget = 0;
    long m = 0;
    int index = 0;
};

std::vector<SweepPoint> enumerate_points(const ExperimentConfig& cfg) {
    std::vector<SweepPoint> points;
    int index = 0;
    for (double eps : cfg.eps_values)
        for (std::uint64_t budget : cfg.budgets)
            for (long m : cfg.m_values)
                points.push_back({eps, budget, m, index++});
    return points;
}

long effective_n(const ExperimentConfig& cfg, long m, double theorem_n) {
    long n = cfg.n_override;
    if (n == 0)
        n = long(std::min(double(m), std::floor(theorem_n)));
    if (n < 1)
        n = 1;
    if (n > m)
        throw std::invalid_argument("config: n override exceeds the sample count m");
    return n;
}

void dump_frame(const ExperimentConfig& cfg, const SweepPoint& pt, int trial,
                const AgentMessage& msg) {
    if (cfg.dump_dir.empty())
        return;
    char name[96];
    std::snprintf(name, sizeof name, "p%03d_t%04d_a%d.bin", pt.index, trial, msg.agent_id);
    const std::filesystem::path path = std::filesystem::path(cfg.dump_dir) / name;
    std::ofstream out(path, std::ios::binary);
    const std::vector<std::uint8_t> bytes = serialize_payload(to_wire(msg));
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out)
        throw std::runtime_error("dump-messages: failed to write " + path.string());
}

std::vector<int> agent_rows(int d, int agents) {
    std::vector<int> rows(std::size_t(agents), d / agents);
    for (int k = 0; k < d % agents; ++k)
        rows[std::size_t(k)] += 1;
    return rows;
}

TrialRecord run_trial(const ExperimentConfig& cfg, const CovarianceModel& model,
                      const SweepPoint& pt, int trial) {
    TrialRecord rec;
    rec.scheme = cfg.scheme;
    rec.d1 = cfg.d1;
    rec.d2 = cfg.d2;
    rec.m = pt.m;
    rec.b1 = pt.budget;
    rec.b2 = pt.budget;
    rec.trial = trial;
    rec.seed = derive_seed(cfg.master_seed, std::uint64_t(pt.index), std::uint64_t(trial));
    const SampleMatrix x = sample(model, int(pt.m), rec.seed);

    if (cfg.scheme == "two_agent_op" || cfg.scheme == "two_agent_fr") {
        const Norm norm = cfg.scheme == "two_agent_op" ? Norm::Op : Norm::Fr;
        SchemeParamsTwoAgent params = two_agent_params(cfg.sigma, pt.eps, cfg.d1, cfg.d2, norm);
        if (!params.high_distortion)
            params.n = double(effective_n(cfg, pt.m, params.n));
        rec.n = long(params.n);
        const AgentMessage m1 = two_agent_encode(x.topRows(cfg.d1), params, 1, pt.budget);
        const AgentMessage m2 = two_agent_encode(x.bottomRows(cfg.d2), params, 2, pt.budget);
        dump_frame(cfg, pt, trial, m1);
        dump_frame(cfg, pt, trial, m2);
        const ServerEstimate est = two_agent_decode(m1, m2, params);
        rec.bits1 = m1.bits_used;
        rec.bits2 = m2.bits_used;
        rec.error_triggered = est.error_triggered;
        rec.dist_op = operator_norm(est.c_hat - model.cov);
        rec.dist_fr = frobenius_norm(est.c_hat - model.cov);
        return rec;
    }

    if (cfg.scheme == "multi_agent") {
        const int d = cfg.d1 + cfg.d2;
        const SchemeParamsMulti base = multi_agent_params(cfg.sigma, pt.eps, d);
        const long n = effective_n(cfg, pt.m, base.n);
        rec.n = n;
        const std::vector<int> rows = agent_rows(d, cfg.agents);
        const int widest = *std::max_element(rows.begin(), rows.end());

        SchemeParamsMulti params = base;
        if (cfg.grid_n == 0 && pt.budget == 0 && cfg.l_clip == 0.0) {
            params.n = double(n); // theorem grid untouched
        } else {
            long grid = cfg.grid_n;
            if (grid == 0 && pt.budget > 0) {
                // largest dither grid every agent can afford at this budget
                const std::uint64_t bpe = pt.budget / (std::uint64_t(widest) * std::uint64_t(n));
                if (bpe < 2)
                    throw InsufficientBudget(
                        "multi-agent budget below 2 bits per coordinate");
                grid = long(((std::uint64_t(1) << std::min<std::uint64_t>(bpe, 31)) - 1) / 2);
            }
            if (grid == 0)
                grid = base.dither.N;
            const double l = cfg.l_clip > 0.0 ? cfg.l_clip : base.l_clip;
            params = multi_agent_override(base, double(n), grid, l);
        }

        std::vector<AgentMessage> msgs;
        int row = 0;
        for (int k = 0; k < cfg.agents; ++k) {
            Rng rng(rec.seed, std::uint64_t(k) + 1); // stream 0 belongs to sample()
            msgs.push_back(multi_agent_encode(x.middleRows(row, rows[std::size_t(k)]), params,
                                              k + 1, rng));
            dump_frame(cfg, pt, trial, msgs.back());
            row += rows[std::size_t(k)];
        }
        const ServerEstimate est = multi_agent_decode(msgs, params);
        rec.bits1 = msgs[0].bits_used;
        for (std::size_t k = 1; k < msgs.size(); ++k)
            rec.bits2 += msgs[k].bits_used;
        rec.error_triggered = est.error_triggered;
        rec.dist_op = operator_norm(est.c_hat - model.cov);
        rec.dist_fr = frobenius_norm(est.c_hat - model.cov);
        return rec;
    }

    // interactive: cross block only; b1 = 0 records the unconstrained server side
    const InteractiveResult res =
        interactive_run(x.topRows(cfg.d1), x.bottomRows(cfg.d2), cfg.sigma, pt.eps, pt.budget);
    rec.b1 = 0;
    rec.n = res.n;
    rec.bits1 = res.cross_bits;
    rec.bits2 = res.data_bits;
    rec.error_triggered = res.error_triggered;
    const Matrix diff = res.c12_hat - model.cov.topRightCorner(cfg.d1, cfg.d2);
    rec.dist_op = operator_norm(diff);
    rec.dist_fr = frobenius_norm(diff);
    return rec;
}

std::vector<TrialRecord> sweep_impl(const ExperimentConfig& cfg, bool parallel) {
    validate_config(cfg);
    const CovarianceModel model = config_model(cfg);
    const std::vector<SweepPoint> points = enumerate_points(cfg);
    if (!cfg.dump_dir.empty())
        std::filesystem::create_directories(cfg.dump_dir);

    std::vector<TrialRecord> records(points.size() * std::size_t(cfg.trials));
    const long total = long(records.size());
    std::exception_ptr failure = nullptr;
    std::atomic<bool> failed{false};
    if (parallel) {
#pragma omp parallel for schedule(dynamic)
        for (long i = 0; i < total; ++i) {
            if (failed.load(std::memory_order_relaxed))
                continue;
            try {
                const SweepPoint& pt = points[std::size_t(i) / std::size_t(cfg.trials)];
                records[std::size_t(i)] =
                    run_trial(cfg, model, pt, int(std::size_t(i) % std::size_t(cfg.trials)));
            } catch (...) {
#pragma omp critical
                {
                    if (!failure)
                        failure = std::current_exception();
                    failed.store(true, std::memory_order_relaxed);
                }
            }
        }
    } else {
        for (long i = 0; i < total; ++i) {
            const SweepPoint& pt = points[std::size_t(i) / std::size_t(cfg.trials)];
            records[std::size_t(i)] =
                run_trial(cfg, model, pt, int(std::size_t(i) % std::size_t(cfg.trials)));
        }
    }
    if (failure)
        std::rethrow_exception(failure);
    return records;
}

} // namespace

std::vector<TrialRecord> run_sweep(const ExperimentConfig& cfg) { return sweep_impl(cfg, true); }

std::vector<TrialRecord> run_sweep_serial(const ExperimentConfig& cfg) {
    return sweep_impl(cfg, false);
}

ScalingFit scaling_fit(const std::vector<TrialRecord>& records, Axis axis, Response response) {
    std::set<double> values;
    for (const TrialRecord& r : records)
        values.insert(axis == Axis::M ? double(r.m) : double(r.b1 + r.b2));
    if (values.size() < 4)
        throw std::invalid_argument("scaling_fit: needs >= 4 distinct axis values");

    std::vector<double> xs, ys;
    for (double v : values) {
        double sum = 0.0;
        long count = 0;
        for (const TrialRecord& r : records) {
            const double axis_value = axis == Axis::M ? double(r.m) : double(r.b1 + r.b2);
            if (axis_value == v) {
                sum += response == Response::Op ? r.dist_op : r.dist_fr;
                ++count;
            }
        }
        if (count < 50)
            throw std::invalid_argument("scaling_fit: needs >= 50 trials per axis value");
        const double mean = sum / double(count);
        if (!(mean > 0.0))
            throw std::invalid_argument("scaling_fit: mean distortion must be positive");
        xs.push_back(std::log(v));
        ys.push_back(std::log(mean));
    }

    const double k = double(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= k;
    my /= k;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    ScalingFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double rss = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
        rss += r * r;
    }
    fit.std_error = std::sqrt(rss / (k - 2.0) / sxx);
    return fit;
}

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

std::string records_csv(const std::vector<TrialRecord>& records) {
    std::string out = "scheme,d1,d2,m,n,B1,B2,trial,seed,dist_op,dist_fr,bits1,bits2,error\n";
    for (const TrialRecord& r : records) {
        out += r.scheme;
        out += ',' + std::to_string(r.d1) + ',' + std::to_string(r.d2);
        out += ',' + std::to_string(r.m) + ',' + std::to_string(r.n);
        out += ',' + std::to_string(r.b1) + ',' + std::to_string(r.b2);
        out += ',' + std::to_string(r.trial) + ',' + std::to_string(r.seed);
        out += ',' + fmt_double(r.dist_op) + ',' + fmt_double(r.dist_fr);
        out += ',' + std::to_string(r.bits1) + ',' + std::to_string(r.bits2);
        out += ',' + std::string(r.error_triggered ? "1" : "0");
        out += '\n';
    }
    return out;
}

std::string records_json(const std::vector<TrialRecord>& records) {
    nlohmann::json arr = nlohmann::json::array();
    for (const TrialRecord& r : records)
        arr.push_back({{"scheme", r.scheme},
                       {"d1", r.d1},
                       {"d2", r.d2},
                       {"m", r.m},
                       {"n", r.n},
                       {"B1", r.b1},
                       {"B2", r.b2},
                       {"trial", r.trial},
                       {"seed", r.seed},
                       {"dist_op", r.dist_op},
                       {"dist_fr", r.dist_fr},
                       {"bits1", r.bits1},
                       {"bits2", r.bits2},
                       {"error", r.error_triggered}});
    return arr.dump(2);
}

void emit(const std::vector<TrialRecord>& records, const std::string& format,
          const std::string& path) {
    if (format != "csv" && format != "json")
        throw std::invalid_argument("emit: format must be csv or json");
    std::ofstream out(path, std::ios::binary); // binary keeps line endings LF
    if (!out)
        throw std::runtime_error("emit: cannot open '" + path + "'");
    out << (format == "csv" ? records_csv(records) : records_json(records));
    out.flush();
    if (!out)
        throw std::runtime_error("emit: write failed for '" + path + "'");
}

} // namespace dcme
