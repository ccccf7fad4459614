#pragma once

#include "dcme/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dcme {

// Parsed from the flat key = value config format (see README). Lists are
// comma-separated; m, budget and eps are sweep axes and the run enumerates
// their cartesian product with m varying fastest, then budget, then eps.
struct ExperimentConfig {
    std::string scheme = "two_agent_op";  // two_agent_op | two_agent_fr | multi_agent | interactive
    int d1 = 2;
    int d2 = 2;
    double sigma = 1.0;
    double delta = 0.5;
    std::uint64_t d_seed = 1;        // seed for the mixing-direction generator
    std::string source = "gaussian"; // gaussian | rademacher | uniform_ball
    std::vector<long> m_values;
    std::vector<std::uint64_t> budgets{0}; // per-agent bits; 0 = scheme-derived where allowed
    std::vector<double> eps_values;
    long n_override = 0;   // cross-block sample count; 0 = min(m, theorem value)
    long grid_n = 0;       // multi-agent dither half-width override; 0 = derive
    double l_clip = 0.0;   // multi-agent clip radius override; 0 = theorem value
    int agents = 2;        // multi-agent row split
    int trials = 1;
    std::uint64_t master_seed = 1;
    std::string out;
    std::string format = "csv";
    std::string dump_dir; // CLI only: write each agent frame here when nonempty
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
void validate_config(const ExperimentConfig& cfg); // throws invalid_argument

// The covariance model a config describes; the mixing direction is drawn
// from d_seed and normalized to unit operator norm, so it is reproducible.
CovarianceModel config_model(const ExperimentConfig& cfg);

struct TrialRecord {
    std::string scheme;
    int d1 = 0;
    int d2 = 0;
    long m = 0;
    long n = 0;
    std::uint64_t b1 = 0;
    std::uint64_t b2 = 0;
    int trial = 0;
    std::uint64_t seed = 0; // derive_seed(master, point_index, trial)
    double dist_op = 0.0;
    double dist_fr = 0.0;
    std::uint64_t bits1 = 0;
    std::uint64_t bits2 = 0;
    bool error_triggered = false;
};

// One record per (sweep point, trial). Trials run in parallel with
// position-derived seeds and land in a preallocated slot each, so the
// result is bit-identical to the serial reference at any thread count.
std::vector<TrialRecord> run_sweep(const ExperimentConfig& cfg);
std::vector<TrialRecord> run_sweep_serial(const ExperimentConfig& cfg);

enum class Axis { M, B };          // B means total assigned bits b1 + b2
enum class Response { Op, Fr };

struct ScalingFit {
    double slope = 0.0;
    double intercept = 0.0;
    double std_error = 0.0; // of the slope
};

// OLS on (log axis value, log mean distortion); needs >= 4 distinct axis
// values with >= 50 records each.
ScalingFit scaling_fit(const std::vector<TrialRecord>& records, Axis axis, Response response);

std::string records_csv(const std::vector<TrialRecord>& records);
std::string records_json(const std::vector<TrialRecord>& records);
void emit(const std::vector<TrialRecord>& records, const std::string& format,
          const std::string& path);

} // namespace dcme
