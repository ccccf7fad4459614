#include "dcme/validate.hpp"

#include "dcme/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dcme {

namespace {

// Trials run in parallel, each with a position-derived seed; the returned
// per-trial statistics are reduced later in index order so the report is
// bit-identical at any thread count.
template <typename F>
std::vector<double> per_trial(int trials, std::uint64_t seed, F&& statistic) {
    std::vector<double> stats(static_cast<std::size_t>(trials));
#pragma omp parallel for schedule(static)
    for (int t = 0; t < trials; ++t) {
        Rng rng(derive_seed(seed, 0, std::uint64_t(t)));
        stats[std::size_t(t)] = statistic(rng);
    }
    return stats;
}

double frequency(const std::vector<double>& stats, double threshold, double* out_se) {
    double count = 0.0;
    for (double s : stats)
        if (s >= threshold)
            count += 1.0;
    const double p = count / double(stats.size());
    *out_se = std::sqrt(p * (1.0 - p) / double(stats.size()));
    return p;
}

double mean_se(const std::vector<double>& values, double* out_se) {
    double sum = 0.0;
    for (double v : values)
        sum += v;
    const double mean = sum / double(values.size());
    double ss = 0.0;
    for (double v : values)
        ss += (v - mean) * (v - mean);
    *out_se = std::sqrt(ss / double(values.size())) / std::sqrt(double(values.size()));
    return mean;
}

ValidationPoint make_point(std::string label, double t, double empirical, double se,
                           double bound_raw, bool clamp_to_one) {
    ValidationPoint p;
    p.label = std::move(label);
    p.t = t;
    p.empirical = empirical;
    p.std_error = se;
    p.bound_raw = bound_raw;
    p.bound = clamp_to_one ? std::min(1.0, bound_raw) : bound_raw;
    p.pass = empirical <= p.bound + 3.0 * se;
    return p;
}

void finish(ValidationReport& report) {
    report.pass = true;
    for (const ValidationPoint& p : report.points)
        report.pass = report.pass && p.pass;
}

} // namespace

std::string report_json(const ValidationReport& report) {
    nlohmann::json j;
    j["name"] = report.name;
    j["pass"] = report.pass;
    j["trials"] = report.trials;
    j["seed"] = report.seed;
    j["points"] = nlohmann::json::array();
    for (const ValidationPoint& p : report.points)
        j["points"].push_back({{"label", p.label},
                               {"t", p.t},
                               {"empirical", p.empirical},
                               {"std_error", p.std_error},
                               {"bound", p.bound},
                               {"bound_raw", p.bound_raw},
                               {"pass", p.pass}});
    return j.dump(2);
}

ValidationReport validate_cov_tail(int d1, int d2, int m, double sigma1, double sigma2,
                                   const std::vector<double>& t_grid, int trials,
                                   std::uint64_t seed) {
    if (d1 < 1 || d2 < 1 || m < 1 || !(sigma1 > 0.0) || !(sigma2 > 0.0))
        throw std::invalid_argument("validate_cov_tail: bad dimensions or scales");
    if (trials < 1000)
        throw std::invalid_argument("validate_cov_tail: needs at least 1000 trials");
    if (t_grid.empty())
        throw std::invalid_argument("validate_cov_tail: empty grid");

    // unit-scale statistic: sigma1 sigma2 cancels between event and threshold,
    // so the frequencies are exactly invariant under rescaling both sigmas
    const std::vector<double> stats = per_trial(trials, seed, [&](Rng& rng) {
        Matrix u(d1, m), v(d2, m);
        for (int j = 0; j < m; ++j)
            for (int i = 0; i < d1; ++i)
                u(i, j) = rng.normal();
        for (int j = 0; j < m; ++j)
            for (int i = 0; i < d2; ++i)
                v(i, j) = rng.normal();
        return operator_norm(u * v.transpose() / double(m));
    });

    ValidationReport report;
    report.name = "cov_tail";
    report.trials = trials;
    report.seed = seed;
    for (double t : t_grid) {
        double se = 0.0;
        const double freq = frequency(stats, 10.0 * t, &se);
        const double raw =
            std::pow(9.0, double(d1 + d2)) * std::exp(-double(m) * std::min(t, t * t));
        report.points.push_back(make_point("t=" + std::to_string(t), t, freq, se, raw, true));
    }
    finish(report);
    return report;
}

ValidationReport validate_opnorm_tail(int d, int n, double sigma, int trials,
                                      std::uint64_t seed) {
    if (d < 1 || n < 1 || sigma < 0.0 || trials < 1)
        throw std::invalid_argument("validate_opnorm_tail: bad arguments");

    const std::vector<double> stats = per_trial(trials, seed, [&](Rng& rng) {
        Matrix a(d, n);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < d; ++i)
                a(i, j) = rng.normal();
        return operator_norm(a); // unit scale; sigma multiplies in afterwards
    });

    const double root = std::sqrt(double(d + n));
    ValidationReport report;
    report.name = "opnorm_tail";
    report.trials = trials;
    report.seed = seed;

    double se = 0.0;
    const double freq = frequency(stats, 6.0 * root, &se); // sigma cancels in the indicator
    report.points.push_back(
        make_point("tail", 6.0 * sigma * root, freq, se, std::exp(-2.0 * double(d + n)), true));

    const double mean = mean_se(stats, &se);
    report.points.push_back(
        make_point("mean", 1.0, sigma * mean, sigma * se, 9.0 * sigma * root, false));

    std::vector<double> squares(stats.size());
    for (std::size_t i = 0; i < stats.size(); ++i)
        squares[i] = stats[i] * stats[i];
    const double mean2 = mean_se(squares, &se);
    report.points.push_back(make_point("second_moment", 2.0, sigma * sigma * mean2,
                                       sigma * sigma * se, 36.0 * sigma * sigma * double(d + n),
                                       false));
    finish(report);
    return report;
}

ValidationReport validate_subgamma_mgf(double sigma1, double sigma2,
                                       const std::vector<double>& lambda_grid, int trials,
                                       std::uint64_t seed) {
    if (!(sigma1 > 0.0) || !(sigma2 > 0.0) || trials < 1 || lambda_grid.empty())
        throw std::invalid_argument("validate_subgamma_mgf: bad arguments");
    const double s = sigma1 * sigma2;
    for (double l : lambda_grid)
        if (!(std::abs(l) < 1.0 / (2.5 * s)))
            throw std::invalid_argument("validate_subgamma_mgf: lambda outside the MGF domain");

    // centered product of independent Gaussians, stored in unit scale
    const std::vector<double> stats =
        per_trial(trials, seed, [](Rng& rng) { return rng.normal() * rng.normal(); });

    ValidationReport report;
    report.name = "subgamma_mgf";
    report.trials = trials;
    report.seed = seed;
    for (double l : lambda_grid) {
        std::vector<double> mgf(stats.size());
        for (std::size_t i = 0; i < stats.size(); ++i)
            mgf[i] = std::exp(l * s * stats[i]);
        double se = 0.0;
        const double mean = mean_se(mgf, &se);
        const double raw = std::exp(25.0 * l * l * s * s / (2.0 * (1.0 - 2.5 * std::abs(l) * s)));
        report.points.push_back(
            make_point("lambda=" + std::to_string(l), l, mean, se, raw, false));
    }
    finish(report);
    return report;
}

ValidationReport validate_sum_tail(double sigma1, double sigma2, int m,
                                   const std::vector<double>& t_grid, int trials,
                                   std::uint64_t seed) {
    if (!(sigma1 > 0.0) || !(sigma2 > 0.0) || m < 1 || trials < 1 || t_grid.empty())
        throw std::invalid_argument("validate_sum_tail: bad arguments");

    const std::vector<double> stats = per_trial(trials, seed, [&](Rng& rng) {
        double sum = 0.0;
        for (int i = 0; i < m; ++i)
            sum += rng.normal() * rng.normal();
        return sum / double(m); // unit scale again
    });

    ValidationReport report;
    report.name = "sum_tail";
    report.trials = trials;
    report.seed = seed;
    for (double t : t_grid) {
        double se = 0.0;
        const double freq = frequency(stats, 10.0 * t, &se);
        const double raw = std::exp(-double(m) * std::min(t, t * t));
        report.points.push_back(make_point("t=" + std::to_string(t), t, freq, se, raw, true));
    }
    finish(report);
    return report;
}

ValidationReport validate_max_inequality(double sigma, double alpha, int n, int trials,
                                         std::uint64_t seed) {
    if (sigma < 0.0 || alpha < 0.0 || n < 1 || trials < 1)
        throw std::invalid_argument("validate_max_inequality: bad arguments");
    if (alpha > 0.0 && sigma < 2.0 * alpha)
        throw std::invalid_argument(
            "validate_max_inequality: Gaussian products have sub-gamma scale (2 alpha, alpha), "
            "so the bound needs sigma >= 2 alpha");

    const std::vector<double> stats = per_trial(trials, seed, [&](Rng& rng) {
        double best = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
            const double x =
                alpha > 0.0 ? (alpha / 2.5) * rng.normal() * rng.normal() : sigma * rng.normal();
            best = std::max(best, x);
        }
        return best;
    });

    double se = 0.0;
    const double mean = mean_se(stats, &se);
    const double log_n = std::log(double(n));
    ValidationReport report;
    report.name = "max_inequality";
    report.trials = trials;
    report.seed = seed;
    report.points.push_back(make_point("mean_max", double(n), mean, se,
                                       sigma * std::sqrt(2.0 * log_n) + alpha * log_n, false));
    finish(report);
    return report;
}

const std::vector<std::string>& validator_names() {
    static const std::vector<std::string> names = {"cov_tail", "opnorm_tail", "subgamma_mgf",
                                                   "sum_tail", "max_inequality"};
    return names;
}

ValidationReport run_validator(const std::string& name, int trials, std::uint64_t seed) {
    if (name == "cov_tail")
        return validate_cov_tail(2, 2, 32, 1.0, 1.0, {0.25, 0.5, 1.0, 2.0}, trials, seed);
    if (name == "opnorm_tail")
        return validate_opnorm_tail(4, 4, 1.0, trials, seed);
    if (name == "subgamma_mgf")
        return validate_subgamma_mgf(1.0, 1.0, {-0.35, -0.2, -0.1, 0.0, 0.1, 0.2, 0.35}, trials,
                                     seed);
    if (name == "sum_tail")
        return validate_sum_tail(1.0, 1.0, 50, {0.0, 0.1, 0.25, 0.5, 1.0}, trials, seed);
    if (name == "max_inequality")
        return validate_max_inequality(1.0, 0.0, 1024, trials, seed);
    throw std::invalid_argument("run_validator: unknown validator '" + name + "'");
}

} // namespace dcme
