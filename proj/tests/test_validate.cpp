#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "dcme/rng.hpp"
#include "dcme/validate.hpp"

#include "json.hpp"

#include <cmath>
#include <stdexcept>

using namespace dcme;

namespace {

bool reports_equal(const ValidationReport& a, const ValidationReport& b) {
    if (a.name != b.name || a.pass != b.pass || a.trials != b.trials || a.seed != b.seed
        || a.points.size() != b.points.size())
        return false;
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        const ValidationPoint &p = a.points[i], &q = b.points[i];
        if (p.label != q.label || p.t != q.t || p.empirical != q.empirical
            || p.std_error != q.std_error || p.bound != q.bound || p.bound_raw != q.bound_raw
            || p.pass != q.pass)
            return false;
    }
    return true;
}

} // namespace

TEST_CASE("cov tail validator: clamping, zero counts, scale invariance") {
    const ValidationReport clamped =
        validate_cov_tail(2, 2, 32, 1.0, 1.0, {0.05}, 1000, 11);
    CHECK(clamped.points[0].bound == 1.0);
    CHECK(clamped.points[0].bound_raw == doctest::Approx(6056.5663486427175).epsilon(1e-13));
    CHECK(clamped.points[0].pass); // any frequency clears a clamped bound of 1

    const ValidationReport tiny = validate_cov_tail(1, 1, 200, 1.0, 1.0, {1.0}, 2000, 12);
    CHECK(tiny.points[0].bound_raw == doctest::Approx(1.1209561866567574e-85));
    CHECK(tiny.points[0].empirical == 0.0);
    CHECK(tiny.points[0].pass);

    const ValidationReport base = validate_cov_tail(2, 2, 16, 1.0, 1.0, {0.1, 0.3}, 1500, 13);
    const ValidationReport scaled = validate_cov_tail(2, 2, 16, 2.0, 2.0, {0.1, 0.3}, 1500, 13);
    for (std::size_t i = 0; i < base.points.size(); ++i) {
        CHECK(base.points[i].empirical == scaled.points[i].empirical);
        CHECK(base.points[i].std_error == scaled.points[i].std_error);
    }

    CHECK_THROWS_AS(validate_cov_tail(2, 2, 32, 1.0, 1.0, {0.5}, 999, 1), std::invalid_argument);
    CHECK_THROWS_AS(validate_cov_tail(0, 2, 32, 1.0, 1.0, {0.5}, 1000, 1), std::invalid_argument);
    CHECK_THROWS_AS(validate_cov_tail(2, 2, 32, 1.0, 1.0, {}, 1000, 1), std::invalid_argument);
}

TEST_CASE("opnorm validator: tail, moments, degenerate scale") {
    const ValidationReport r = validate_opnorm_tail(4, 4, 1.0, 4000, 21);
    REQUIRE(r.points.size() == 3);
    CHECK(r.points[0].label == "tail");
    CHECK(r.points[0].bound == doctest::Approx(1.1253517471925912e-07));
    CHECK(r.points[0].empirical == 0.0); // 6 sqrt(8) is far beyond a 4x4 Gaussian op norm
    CHECK(r.points[1].bound == doctest::Approx(25.455844122715714));
    CHECK(r.points[1].empirical > 2.0);
    CHECK(r.points[1].empirical < 6.0);
    CHECK(r.points[2].bound == 36.0 * 8.0);
    CHECK(r.points[2].empirical < 40.0);
    CHECK(r.pass);

    const ValidationReport zero = validate_opnorm_tail(3, 5, 0.0, 500, 22);
    CHECK(zero.points[1].empirical == 0.0);
    CHECK(zero.points[1].bound == 0.0);
    CHECK(zero.points[2].empirical == 0.0);
    CHECK(zero.pass);
}

TEST_CASE("subgamma MGF validator: unit point, frozen bound, domain check") {
    const ValidationReport r = validate_subgamma_mgf(1.0, 1.0, {0.0, 0.1, 0.35}, 3000, 31);
    CHECK(r.points[0].empirical == 1.0);
    CHECK(r.points[0].std_error == 0.0);
    CHECK(r.points[0].bound == 1.0);
    CHECK(r.points[1].bound == doctest::Approx(1.1813604128656459).epsilon(1e-14));
    CHECK(r.points[2].bound == doctest::Approx(208981.28886971259).epsilon(1e-12));
    // the exact MGF of a unit Gaussian product at 0.1 is (1 - 0.01)^(-1/2) = 1.005
    CHECK(r.points[1].empirical == doctest::Approx(1.005).epsilon(0.02));
    CHECK(r.pass);

    CHECK_THROWS_AS(validate_subgamma_mgf(1.0, 1.0, {0.4}, 1000, 1), std::invalid_argument);
    CHECK_THROWS_AS(validate_subgamma_mgf(2.0, 1.0, {0.21}, 1000, 1), std::invalid_argument);
}

TEST_CASE("sum tail validator: trivial point, tiny bound, sign symmetry") {
    const ValidationReport r = validate_sum_tail(1.0, 1.0, 50, {0.0, 0.5}, 5000, 41);
    CHECK(r.points[0].bound == 1.0); // t = 0 clamps
    CHECK(r.points[0].pass);
    CHECK(r.points[1].bound == doctest::Approx(3.7266531720786709e-06));
    CHECK(r.points[1].empirical == 0.0);
    CHECK(r.pass);

    // the statistic is symmetric in distribution under flipping X, so upper and
    // lower tail frequencies agree up to Monte Carlo noise
    const int trials = 20000, m = 8;
    double up = 0.0, down = 0.0;
    for (int t = 0; t < trials; ++t) {
        Rng rng(derive_seed(99, 4, std::uint64_t(t)));
        double s = 0.0;
        for (int i = 0; i < m; ++i)
            s += rng.normal() * rng.normal();
        s /= double(m);
        if (s >= 0.5)
            up += 1.0;
        if (-s >= 0.5)
            down += 1.0;
    }
    up /= trials;
    down /= trials;
    const double band = 6.0 * std::sqrt(up * (1.0 - up) / trials);
    CHECK(std::abs(up - down) <= band);
}

TEST_CASE("max inequality validator: degenerate, Gaussian, product regimes") {
    const ValidationReport one = validate_max_inequality(1.0, 0.0, 1, 2000, 51);
    CHECK(one.points[0].bound == 0.0);
    CHECK(one.points[0].pass); // E[single draw] = 0 within 3 standard errors

    const ValidationReport gauss = validate_max_inequality(1.0, 0.0, 1024, 2000, 52);
    CHECK(gauss.points[0].bound == doctest::Approx(3.723297411059034).epsilon(1e-14));
    CHECK(gauss.points[0].empirical > 2.8);
    CHECK(gauss.points[0].empirical < 3.6);
    CHECK(gauss.pass);

    const ValidationReport prod = validate_max_inequality(2.0, 1.0, 256, 2000, 53);
    CHECK(prod.points[0].bound == doctest::Approx(12.205614333741144).epsilon(1e-14));
    CHECK(prod.pass);

    const ValidationReport zero = validate_max_inequality(0.0, 0.0, 16, 500, 54);
    CHECK(zero.points[0].empirical == 0.0);
    CHECK(zero.points[0].bound == 0.0);
    CHECK(zero.pass);

    CHECK_THROWS_AS(validate_max_inequality(1.0, 1.0, 16, 500, 1), std::invalid_argument);
    CHECK_THROWS_AS(validate_max_inequality(1.0, 0.0, 0, 500, 1), std::invalid_argument);
}

TEST_CASE("validators are deterministic and order-independent") {
    for (const std::string& name : validator_names()) {
        const ValidationReport a = run_validator(name, 1500, 777);
        const ValidationReport b = run_validator(name, 1500, 777);
        CHECK(reports_equal(a, b));
        CHECK(a.name == name);
    }
    CHECK_THROWS_AS(run_validator("nonsense", 1000, 1), std::invalid_argument);
}

TEST_CASE("default grids pass at full trial counts") {
    for (const std::string& name : validator_names()) {
        const ValidationReport r = run_validator(name, 10000, 20260814);
        INFO(name);
        CHECK(r.pass);
    }
}

TEST_CASE("reports serialize to parseable JSON") {
    const ValidationReport r = run_validator("sum_tail", 2000, 61);
    const nlohmann::json j = nlohmann::json::parse(report_json(r));
    CHECK(j["name"] == "sum_tail");
    CHECK(j["pass"] == r.pass);
    CHECK(j["trials"] == 2000);
    CHECK(j["seed"] == 61);
    REQUIRE(j["points"].size() == r.points.size());
    CHECK(j["points"][0]["bound"] == r.points[0].bound);
    CHECK(j["points"][0]["empirical"] == r.points[0].empirical);
    CHECK(j["points"][1]["label"] == r.points[1].label);
}
