#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "dcme/harness.hpp"
#include "dcme/protocol.hpp"
#include "dcme/quantize.hpp"
#include "dcme/rng.hpp"

#include "json.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#ifdef _OPENMP
#include <omp.h>
#endif

using namespace dcme;

namespace {

bool records_equal(const std::vector<TrialRecord>& a, const std::vector<TrialRecord>& b) {
    if (a.size() != b.size())
        return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const TrialRecord &r = a[i], &s = b[i];
        if (r.scheme != s.scheme || r.d1 != s.d1 || r.d2 != s.d2 || r.m != s.m || r.n != s.n
            || r.b1 != s.b1 || r.b2 != s.b2 || r.trial != s.trial || r.seed != s.seed
            || r.dist_op != s.dist_op || r.dist_fr != s.dist_fr || r.bits1 != s.bits1
            || r.bits2 != s.bits2 || r.error_triggered != s.error_triggered)
            return false;
    }
    return true;
}

ExperimentConfig small_two_agent() {
    ExperimentConfig cfg;
    cfg.scheme = "two_agent_op";
    cfg.d1 = cfg.d2 = 2;
    cfg.sigma = 1.0;
    cfg.delta = 0.7;
    cfg.m_values = {32};
    cfg.budgets = {20000};
    cfg.eps_values = {0.5};
    cfg.n_override = 32;
    cfg.trials = 3;
    cfg.master_seed = 5;
    return cfg;
}

std::vector<std::string> csv_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ','))
        fields.push_back(f);
    return fields;
}

} // namespace

TEST_CASE("config text parses keys, lists and comments") {
    const std::string text = "# sweep definition\n"
                             "scheme = multi_agent\n"
                             "d1 = 3\n"
                             "d2 = 1   # trailing comment\n"
                             "sigma = 2.0\n"
                             "delta = 0.25\n"
                             "d_seed = 42\n"
                             "source = rademacher\n"
                             "m = 64, 256, 1024\n"
                             "budget = 0\n"
                             "eps = 0.5, 1.0\n"
                             "n = 16\n"
                             "grid_n = 128\n"
                             "l_clip = 6.5\n"
                             "agents = 4\n"
                             "trials = 7\n"
                             "master_seed = 99\n"
                             "out = results.csv\n"
                             "format = json\n";
    const ExperimentConfig cfg = parse_config(text);
    CHECK(cfg.scheme == "multi_agent");
    CHECK(cfg.d1 == 3);
    CHECK(cfg.d2 == 1);
    CHECK(cfg.sigma == 2.0);
    CHECK(cfg.delta == 0.25);
    CHECK(cfg.d_seed == 42);
    CHECK(cfg.source == "rademacher");
    CHECK(cfg.m_values == std::vector<long>{64, 256, 1024});
    CHECK(cfg.budgets == std::vector<std::uint64_t>{0});
    CHECK(cfg.eps_values == std::vector<double>{0.5, 1.0});
    CHECK(cfg.n_override == 16);
    CHECK(cfg.grid_n == 128);
    CHECK(cfg.l_clip == 6.5);
    CHECK(cfg.agents == 4);
    CHECK(cfg.trials == 7);
    CHECK(cfg.master_seed == 99);
    CHECK(cfg.out == "results.csv");
    CHECK(cfg.format == "json");
    validate_config(cfg);

    CHECK_THROWS_AS(parse_config("bogus_key = 1\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("d1 = banana\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("d1 = 2 trailing\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("just a line\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("m =\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("trials = 2.5\n"), std::invalid_argument);
}

TEST_CASE("config validation rejects inconsistent setups") {
    ExperimentConfig cfg = small_two_agent();
    validate_config(cfg); // baseline is fine

    ExperimentConfig bad = cfg;
    bad.scheme = "carrier_pigeon";
    CHECK_THROWS_AS(validate_config(bad), std::invalid_argument);
    bad = cfg;
    bad.m_values.clear();
    CHECK_THROWS_AS(validate_config(bad), std::invalid_argument);
    bad = cfg;
    bad.eps_values = {-1.0};
    CHECK_THROWS_AS(validate_config(bad), std::invalid_argument);
    bad = cfg;
    bad.trials = 0;
    CHECK_THROWS_AS(validate_config(bad), std::invalid_argument);
    bad = cfg;
    bad.agents = 9;
    CHECK_THROWS_AS(validate_config(bad), std::invalid_argument);
    bad = cfg;
    bad.delta = 1.5;
    CHECK_THROWS_AS(validate_config(bad), std::invalid_argument);
    bad = cfg;
    bad.format = "xml";
    CHECK_THROWS_AS(validate_config(bad), std::invalid_argument);
    bad = cfg;
    bad.source = "cauchy";
    CHECK_THROWS_AS(validate_config(bad), std::invalid_argument);
}

TEST_CASE("config model is reproducible and respects delta") {
    ExperimentConfig cfg = small_two_agent();
    const CovarianceModel a = config_model(cfg);
    const CovarianceModel b = config_model(cfg);
    CHECK((a.cov - b.cov).isZero(0.0));
    check_model(a);

    cfg.d_seed = 1234;
    const CovarianceModel c = config_model(cfg);
    CHECK(operator_norm(a.cov - c.cov) > 1e-6); // different mixing direction

    cfg.delta = 0.0;
    const CovarianceModel diag = config_model(cfg);
    CHECK(diag.cov.topRightCorner(2, 2).isZero(0.0));
}

TEST_CASE("sweeps are deterministic across runs, threads and the serial reference") {
    const ExperimentConfig cfg = small_two_agent();
    const std::vector<TrialRecord> first = run_sweep(cfg);
    const std::vector<TrialRecord> second = run_sweep(cfg);
    CHECK(records_equal(first, second));

    const std::vector<TrialRecord> serial = run_sweep_serial(cfg);
    CHECK(records_equal(first, serial));

#ifdef _OPENMP
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const std::vector<TrialRecord> single = run_sweep(cfg);
    omp_set_num_threads(saved);
    CHECK(records_equal(first, single));
#endif

    REQUIRE(first.size() == 3);
    for (std::size_t i = 0; i < first.size(); ++i) {
        const TrialRecord& r = first[i];
        CHECK(r.scheme == "two_agent_op");
        CHECK(r.m == 32);
        CHECK(r.n == 32);
        CHECK(r.b1 == 20000);
        CHECK(r.trial == int(i));
        CHECK(r.seed == derive_seed(5, 0, i));
        CHECK(r.dist_op >= 0.0);
        CHECK(r.dist_fr >= r.dist_op);
        if (!r.error_triggered) {
            CHECK(r.bits1 <= r.b1);
            CHECK(r.bits2 <= r.b2);
        }
    }
}

TEST_CASE("sweep points enumerate eps, then budget, then m") {
    ExperimentConfig cfg = small_two_agent();
    cfg.m_values = {8, 16};
    cfg.budgets = {100000, 200000};
    cfg.eps_values = {0.5, 1.0};
    cfg.n_override = 8;
    cfg.trials = 1;
    const std::vector<TrialRecord> recs = run_sweep_serial(cfg);
    REQUIRE(recs.size() == 8);
    const long expect_m[] = {8, 16, 8, 16, 8, 16, 8, 16};
    const std::uint64_t expect_b[] = {100000, 100000, 200000, 200000,
                                      100000, 100000, 200000, 200000};
    for (int i = 0; i < 8; ++i) {
        CHECK(recs[std::size_t(i)].m == expect_m[i]);
        CHECK(recs[std::size_t(i)].b1 == expect_b[i]);
        CHECK(recs[std::size_t(i)].seed == derive_seed(5, std::uint64_t(i), 0));
    }
}

TEST_CASE("multi-agent sweep with a fine grid matches the raw plug-in estimator") {
    ExperimentConfig cfg;
    cfg.scheme = "multi_agent";
    cfg.d1 = cfg.d2 = 2;
    cfg.delta = 0.5;
    cfg.m_values = {64};
    cfg.eps_values = {0.5};
    cfg.grid_n = 1L << 28;
    cfg.l_clip = 8.0;
    cfg.trials = 2;
    cfg.master_seed = 31;
    const std::vector<TrialRecord> recs = run_sweep(cfg);
    const CovarianceModel model = config_model(cfg);
    for (const TrialRecord& r : recs) {
        REQUIRE_FALSE(r.error_triggered);
        const SampleMatrix x = sample(model, 64, r.seed);
        const double plug = operator_norm(x * x.transpose() / 64.0 - model.cov);
        CHECK(r.dist_op == doctest::Approx(plug).epsilon(1e-4));
        CHECK(r.n == 64);
        CHECK(r.bits1 == r.bits2); // equal row split, equal code length
    }
}

TEST_CASE("interactive sweep with zero cross signal measures the cross block") {
    ExperimentConfig cfg;
    cfg.scheme = "interactive";
    cfg.d1 = 3;
    cfg.d2 = 2;
    cfg.delta = 0.0; // true cross block is exactly zero
    cfg.m_values = {256};
    cfg.eps_values = {0.5};
    cfg.trials = 2;
    cfg.master_seed = 77;
    const std::vector<TrialRecord> recs = run_sweep(cfg);
    const CovarianceModel model = config_model(cfg);
    for (const TrialRecord& r : recs) {
        const SampleMatrix x = sample(model, 256, r.seed);
        const InteractiveResult res =
            interactive_run(x.topRows(3), x.bottomRows(2), 1.0, 0.5, 0);
        CHECK(r.dist_op == operator_norm(res.c12_hat));
        CHECK(r.bits1 == res.cross_bits);
        CHECK(r.bits2 == res.data_bits);
        CHECK(r.b1 == 0);
        CHECK(r.n == res.n);
    }
}

TEST_CASE("insufficient budgets propagate out of the sweep") {
    ExperimentConfig cfg = small_two_agent();
    cfg.budgets = {10};
    CHECK_THROWS_AS(run_sweep(cfg), InsufficientBudget);
    CHECK_THROWS_AS(run_sweep_serial(cfg), InsufficientBudget);
}

TEST_CASE("scaling fit recovers exact power laws") {
    std::vector<TrialRecord> recs;
    for (long m : {16L, 64L, 256L, 1024L})
        for (int t = 0; t < 50; ++t) {
            TrialRecord r;
            r.m = m;
            r.b1 = r.b2 = std::uint64_t(m) * 10;
            r.dist_op = 2.0 / std::sqrt(double(m));
            r.dist_fr = 3.0;
            recs.push_back(r);
        }
    const ScalingFit fit = scaling_fit(recs, Axis::M, Response::Op);
    CHECK(fit.slope == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(fit.std_error <= 1e-12);
    CHECK(std::exp(fit.intercept) == doctest::Approx(2.0).epsilon(1e-12));

    const ScalingFit flat = scaling_fit(recs, Axis::B, Response::Fr);
    CHECK(flat.slope == doctest::Approx(0.0).epsilon(1e-12));

    std::vector<TrialRecord> few(recs.begin(), recs.begin() + 150); // 3 distinct m values
    CHECK_THROWS_AS(scaling_fit(few, Axis::M, Response::Op), std::invalid_argument);
    std::vector<TrialRecord> thin;
    for (long m : {16L, 64L, 256L, 1024L}) {
        TrialRecord r;
        r.m = m;
        r.dist_op = 1.0;
        thin.push_back(r);
    }
    CHECK_THROWS_AS(scaling_fit(thin, Axis::M, Response::Op), std::invalid_argument);
}

TEST_CASE("csv output is stable, parseable and matches json numerically") {
    CHECK(records_csv({}) == "scheme,d1,d2,m,n,B1,B2,trial,seed,dist_op,dist_fr,bits1,bits2,error\n");

    TrialRecord r;
    r.scheme = "x";
    r.d1 = 1;
    r.d2 = 2;
    r.m = 3;
    r.n = 4;
    r.b1 = 5;
    r.b2 = 6;
    r.trial = 7;
    r.seed = 8;
    r.dist_op = 0.5;
    r.dist_fr = 1.5;
    r.bits1 = 9;
    r.bits2 = 10;
    r.error_triggered = true;
    CHECK(records_csv({r})
          == "scheme,d1,d2,m,n,B1,B2,trial,seed,dist_op,dist_fr,bits1,bits2,error\n"
             "x,1,2,3,4,5,6,7,8,0.5,1.5,9,10,1\n");

    const std::vector<TrialRecord> recs = run_sweep(small_two_agent());
    const std::string csv = records_csv(recs);
    CHECK(csv.find('\r') == std::string::npos);
    const nlohmann::json arr = nlohmann::json::parse(records_json(recs));
    std::stringstream lines(csv);
    std::string line;
    std::getline(lines, line); // header
    for (std::size_t i = 0; i < recs.size(); ++i) {
        REQUIRE(std::getline(lines, line));
        const std::vector<std::string> f = csv_fields(line);
        REQUIRE(f.size() == 14);
        CHECK(std::stod(f[9]) == recs[i].dist_op);  // 17 digits round-trip exactly
        CHECK(std::stod(f[10]) == recs[i].dist_fr);
        CHECK(arr[i]["dist_op"].get<double>() == recs[i].dist_op);
        CHECK(arr[i]["dist_fr"].get<double>() == recs[i].dist_fr);
        CHECK(arr[i]["seed"].get<std::uint64_t>() == recs[i].seed);
        CHECK(std::stoull(f[8]) == recs[i].seed);
    }
}

TEST_CASE("emit writes files and surfaces io failures") {
    const std::filesystem::path dir =
        std::filesystem::temp_directory_path() / "dcme_emit_test";
    std::filesystem::create_directories(dir);
    const std::vector<TrialRecord> recs = run_sweep(small_two_agent());

    const std::string csv_path = (dir / "out.csv").string();
    emit(recs, "csv", csv_path);
    std::ifstream in(csv_path, std::ios::binary);
    std::stringstream got;
    got << in.rdbuf();
    CHECK(got.str() == records_csv(recs));

    const std::string json_path = (dir / "out.json").string();
    emit(recs, "json", json_path);
    std::ifstream jin(json_path, std::ios::binary);
    std::stringstream jgot;
    jgot << jin.rdbuf();
    CHECK(nlohmann::json::parse(jgot.str()).size() == recs.size());

    CHECK_THROWS_AS(emit(recs, "yaml", csv_path), std::invalid_argument);
    CHECK_THROWS_AS(emit(recs, "csv", (dir / "no_such" / "sub" / "x.csv").string()),
                    std::runtime_error);
    std::filesystem::remove_all(dir);
}

TEST_CASE("message dumps land on disk as valid frames") {
    ExperimentConfig cfg = small_two_agent();
    cfg.trials = 1;
    const std::filesystem::path dir =
        std::filesystem::temp_directory_path() / "dcme_dump_test";
    std::filesystem::remove_all(dir);
    cfg.dump_dir = dir.string();
    run_sweep(cfg);

    int count = 0;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        std::ifstream in(entry.path(), std::ios::binary);
        std::stringstream buf;
        buf << in.rdbuf();
        const std::string bytes = buf.str();
        const WireMessage wire = deserialize_payload(
            std::vector<std::uint8_t>(bytes.begin(), bytes.end()));
        CHECK((wire.agent_id == 1 || wire.agent_id == 2));
        CHECK_FALSE(wire.is_error);
        ++count;
    }
    CHECK(count == 2);
    std::filesystem::remove_all(dir);
}
