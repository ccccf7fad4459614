// Times run_sweep against the serial reference on identical workloads and
// checks that the two produce bit-identical records. Trial counts can be
// scaled from the command line: bench_trials [trials]

#include "dcme/harness.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>
#ifdef _OPENMP
#include <omp.h>
#endif

using namespace dcme;

namespace {

template <typename F> double wall_seconds(F&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool identical(const std::vector<TrialRecord>& a, const std::vector<TrialRecord>& b) {
    if (a.size() != b.size())
        return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].seed != b[i].seed || a[i].dist_op != b[i].dist_op || a[i].dist_fr != b[i].dist_fr
            || a[i].bits1 != b[i].bits1 || a[i].bits2 != b[i].bits2
            || a[i].error_triggered != b[i].error_triggered)
            return false;
    return true;
}

ExperimentConfig base_config(const std::string& scheme, int trials) {
    ExperimentConfig cfg;
    cfg.scheme = scheme;
    cfg.d1 = cfg.d2 = 4;
    cfg.delta = 0.5;
    cfg.m_values = {2048};
    cfg.eps_values = {0.5};
    cfg.trials = trials;
    cfg.master_seed = 11;
    if (scheme == "two_agent_op") {
        cfg.budgets = {1 << 18};
        cfg.n_override = 512;
    } else if (scheme == "multi_agent") {
        cfg.grid_n = 1L << 15;
    }
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    int trials = 400;
    if (argc > 1)
        trials = std::atoi(argv[1]);
    if (trials < 1) {
        std::fprintf(stderr, "usage: bench_trials [trials >= 1]\n");
        return 2;
    }

#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (compiled without OpenMP)\n");
#endif
    std::printf("%-14s %8s %12s %12s %9s %10s\n", "scheme", "trials", "serial [s]", "openmp [s]",
                "speedup", "identical");

    bool all_identical = true;
    for (const std::string scheme : {"two_agent_op", "multi_agent", "interactive"}) {
        const ExperimentConfig cfg = base_config(scheme, trials);
        std::vector<TrialRecord> serial, parallel;
        const double t_serial = wall_seconds([&] { serial = run_sweep_serial(cfg); });
        const double t_parallel = wall_seconds([&] { parallel = run_sweep(cfg); });
        const bool same = identical(serial, parallel);
        all_identical = all_identical && same;
        std::printf("%-14s %8d %12.3f %12.3f %8.2fx %10s\n", scheme.c_str(), trials, t_serial,
                    t_parallel, t_serial / t_parallel, same ? "yes" : "NO");
    }
    if (!all_identical) {
        std::fprintf(stderr, "parallel records diverged from the serial reference\n");
        return 1;
    }
    return 0;
}
