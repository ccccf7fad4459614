#include "dcme/harness.hpp"
#include "dcme/protocol.hpp"
#include "dcme/quantize.hpp"
#include "dcme/theory.hpp"
#include "dcme/validate.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>
#ifdef _OPENMP
#include <omp.h>
#endif

using namespace dcme;
using nlohmann::json;

namespace {

Matrix json_to_matrix(const json& j) {
    if (!j.is_array() || j.empty() || !j[0].is_array() || j[0].empty())
        throw std::invalid_argument("theory: expected a matrix as a nonempty array of rows");
    const int rows = int(j.size());
    const int cols = int(j[0].size());
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        if (!j[i].is_array() || int(j[i].size()) != cols)
            throw std::invalid_argument("theory: matrix rows must all have the same length");
        for (int k = 0; k < cols; ++k)
            m(i, k) = j[i][k].get<double>();
    }
    return m;
}

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (int k = 0; k < m.cols(); ++k)
            row.push_back(m(i, k));
        rows.push_back(row);
    }
    return rows;
}

Vector json_to_vector(const json& j) {
    if (!j.is_array() || j.empty())
        throw std::invalid_argument("theory: expected a vector as a nonempty array");
    Vector v(long(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i)
        v(long(i)) = j[i].get<double>();
    return v;
}

MixtureChannel json_to_channel(const json& j) {
    if (!j.contains("states") || !j["states"].is_array() || j["states"].empty())
        throw std::invalid_argument("theory: channel needs a nonempty 'states' array");
    MixtureChannel ch;
    for (const json& item : j["states"]) {
        MixtureState st;
        st.p = item.at("p").get<double>();
        st.a = json_to_matrix(item.at("a"));
        ch.states.push_back(std::move(st));
    }
    ch.d_y = int(ch.states[0].a.rows());
    ch.d_x = int(ch.states[0].a.cols());
    check_channel(ch);
    return ch;
}

BoundInputs json_to_bound_inputs(const json& j) {
    BoundInputs inp;
    inp.sigma = j.value("sigma", inp.sigma);
    inp.m = j.value("m", inp.m);
    inp.d1 = j.value("d1", inp.d1);
    inp.d2 = j.value("d2", inp.d2);
    inp.b1 = j.value("b1", inp.b1);
    inp.b2 = j.value("b2", inp.b2);
    return inp;
}

GaussianJoint json_to_joint(const json& j) {
    GaussianJoint joint;
    joint.c11 = json_to_matrix(j.at("c11"));
    joint.c12 = json_to_matrix(j.at("c12"));
    joint.c22 = json_to_matrix(j.at("c22"));
    return joint;
}

json bound_to_json(const BoundValue& v) {
    return json{{"value", v.value}, {"convention", v.convention}};
}

int cmd_simulate(const std::string& config_path, const std::string& out,
                 const std::string& format, const std::string& dump_dir, int threads) {
    ExperimentConfig cfg = load_config(config_path);
    if (!out.empty())
        cfg.out = out;
    if (!format.empty())
        cfg.format = format;
    if (!dump_dir.empty())
        cfg.dump_dir = dump_dir;
    if (const char* env = std::getenv("DCME_SEED")) {
        const std::string text(env);
        std::size_t used = 0;
        unsigned long long seed = 0;
        try {
            seed = std::stoull(text, &used);
        } catch (const std::exception&) {
            throw std::invalid_argument("DCME_SEED must be an unsigned integer");
        }
        if (used != text.size())
            throw std::invalid_argument("DCME_SEED must be an unsigned integer");
        cfg.master_seed = seed;
    }
#ifdef _OPENMP
    if (threads > 0)
        omp_set_num_threads(threads);
#else
    (void)threads;
#endif
    const std::vector<TrialRecord> records = run_sweep(cfg);
    if (cfg.out.empty()) {
        std::cout << (cfg.format == "csv" ? records_csv(records) : records_json(records));
    } else {
        emit(records, cfg.format, cfg.out);
        std::cerr << "wrote " << records.size() << " records to " << cfg.out << "\n";
    }
    return 0;
}

int cmd_theory(const std::string& op, const std::string& args_text) {
    const json j = json::parse(args_text);
    json out;
    if (op == "lower_bound_op") {
        out = bound_to_json(lower_bound_op(json_to_bound_inputs(j)));
    } else if (op == "lower_bound_op_cross") {
        out = bound_to_json(lower_bound_op_cross(json_to_bound_inputs(j)));
    } else if (op == "lower_bound_fr") {
        out = bound_to_json(lower_bound_fr(json_to_bound_inputs(j)));
    } else if (op == "lower_bound_fr_cross") {
        out = bound_to_json(lower_bound_fr_cross(json_to_bound_inputs(j)));
    } else if (op == "lower_bound_multi") {
        const BoundValue v =
            lower_bound_multi(j.value("sigma", 1.0), j.at("m").get<double>(),
                              j.at("d_k").get<std::vector<double>>(),
                              j.at("b_k").get<std::vector<double>>());
        out = bound_to_json(v);
    } else if (op == "csdpi_mixture") {
        out = json{{"value", csdpi_mixture(json_to_channel(j))}};
    } else if (op == "csdpi_naive_upper") {
        out = json{{"value", csdpi_naive_upper(json_to_channel(j))}};
    } else if (op == "mean_shift_ratio") {
        out = json{{"value", mean_shift_ratio(json_to_channel(j), json_to_vector(j.at("mu")))}};
    } else if (op == "sdpi_gaussian") {
        out = json{{"value", sdpi_gaussian(json_to_joint(j))}};
    } else if (op == "symmetric_sdpi_gaussian") {
        out = json{{"value", symmetric_sdpi_gaussian(json_to_joint(j))}};
    } else if (op == "signed_perm_exact") {
        out = json{{"matrix", matrix_to_json(signed_perm_expectation_exact(json_to_matrix(j.at("b"))))}};
    } else if (op == "signed_perm_mc") {
        const Matrix m = signed_perm_expectation_mc(json_to_matrix(j.at("b")),
                                                    j.value("trials", 10000L),
                                                    j.value("seed", std::uint64_t(1)));
        out = json{{"matrix", matrix_to_json(m)}};
    } else if (op == "net_bits") {
        out = json{{"value", net_bits_theoretical(j.at("rows").get<int>(), j.at("cols").get<int>(),
                                                  j.at("r").get<double>(),
                                                  j.at("eps").get<double>())}};
    } else if (op == "packing_log_lower") {
        const std::string norm = j.value("norm", "op");
        if (norm != "op" && norm != "fr")
            throw std::invalid_argument("theory: norm must be op or fr");
        out = json{{"value", packing_log_lower(j.at("rows").get<int>(), j.at("cols").get<int>(),
                                               j.at("r").get<double>(), j.at("eps").get<double>(),
                                               norm == "op" ? PackingNorm::Op : PackingNorm::Fr)}};
    } else {
        throw std::invalid_argument(
            "theory: unknown op '" + op
            + "' (expected one of lower_bound_op, lower_bound_op_cross, lower_bound_fr, "
              "lower_bound_fr_cross, lower_bound_multi, csdpi_mixture, csdpi_naive_upper, "
              "mean_shift_ratio, sdpi_gaussian, symmetric_sdpi_gaussian, signed_perm_exact, "
              "signed_perm_mc, net_bits, packing_log_lower)");
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_validate(std::vector<std::string> names, int trials, std::uint64_t seed) {
    if (names.empty())
        names = validator_names();
    json arr = json::array();
    bool all_pass = true;
    for (const std::string& name : names) {
        const ValidationReport report = run_validator(name, trials, seed);
        all_pass = all_pass && report.pass;
        arr.push_back(json::parse(report_json(report)));
    }
    std::cout << arr.dump(2) << "\n";
    return all_pass ? 0 : 1;
}

int cmd_params(const std::string& mode, double sigma, double eps, int d1, int d2,
               const std::string& norm) {
    json out;
    if (mode == "two-agent") {
        const SchemeParamsTwoAgent p =
            two_agent_params(sigma, eps, d1, d2, norm == "op" ? Norm::Op : Norm::Fr);
        out = json{{"scheme", norm == "op" ? "two_agent_op" : "two_agent_fr"},
                   {"sigma", p.sigma},
                   {"eps", p.eps},
                   {"d1", p.d1},
                   {"d2", p.d2},
                   {"high_distortion", p.high_distortion},
                   {"eps_tilde", p.eps_tilde},
                   {"beta", p.beta},
                   {"m_min", p.m_min},
                   {"b_min", {p.b_min[0], p.b_min[1]}},
                   {"n", p.n}};
    } else {
        const SchemeParamsMulti p = multi_agent_params(sigma, eps, d1 + d2);
        out = json{{"scheme", "multi_agent"},
                   {"sigma", p.sigma},
                   {"eps", p.eps},
                   {"d", p.d},
                   {"eps_tilde", p.eps_tilde},
                   {"n", p.n},
                   {"beta_fail", p.beta_fail},
                   {"l_clip", p.l_clip},
                   {"dither", {{"L", p.dither.L}, {"step", p.dither.step}, {"N", p.dither.N}}},
                   {"b_per_dim", p.b_per_dim}};
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"communication-constrained distributed covariance estimation toolkit"};
    app.require_subcommand(1);

    auto* sim = app.add_subcommand("simulate", "run a sweep described by a config file");
    std::string config_path, sim_out, sim_format, sim_dump;
    int sim_threads = 0;
    sim->add_option("--config", config_path, "path to a key = value config file")->required();
    sim->add_option("--out", sim_out, "output path (default: config 'out', else stdout)");
    sim->add_option("--format", sim_format, "csv or json (overrides the config)")
        ->check(CLI::IsMember({"csv", "json"}));
    sim->add_option("--threads", sim_threads, "worker thread count (0 = library default)");
    sim->add_option("--dump-messages", sim_dump, "directory for serialized agent messages");

    auto* theory = app.add_subcommand("theory", "evaluate a calculator op on JSON arguments");
    std::string theory_op;
    std::string theory_args = "{}";
    theory->add_option("op", theory_op, "operation name")->required();
    theory->add_option("--args", theory_args, "JSON object of arguments");

    auto* val = app.add_subcommand("validate", "run Monte Carlo concentration validators");
    std::vector<std::string> val_names;
    int val_trials = 10000;
    std::uint64_t val_seed = 1;
    val->add_option("names", val_names, "validators to run (default: all)");
    val->add_option("--trials", val_trials, "Monte Carlo trials per validator");
    val->add_option("--seed", val_seed, "master seed");

    auto* par = app.add_subcommand("params", "print derived scheme parameters as JSON");
    std::string par_mode, par_norm = "op";
    double par_sigma = 1.0, par_eps = 0.0;
    int par_d1 = 2, par_d2 = 2;
    par->add_option("mode", par_mode, "two-agent or multi")
        ->required()
        ->check(CLI::IsMember({"two-agent", "multi"}));
    par->add_option("--sigma", par_sigma, "noise scale");
    par->add_option("--eps", par_eps, "target distortion")->required();
    par->add_option("--d1", par_d1, "agent 1 dimension");
    par->add_option("--d2", par_d2, "agent 2 dimension");
    par->add_option("--norm", par_norm, "op or fr (two-agent only)")
        ->check(CLI::IsMember({"op", "fr"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2; // --help exits 0, every parse failure is a config error
    }

    try {
        if (sim->parsed())
            return cmd_simulate(config_path, sim_out, sim_format, sim_dump, sim_threads);
        if (theory->parsed())
            return cmd_theory(theory_op, theory_args);
        if (val->parsed())
            return cmd_validate(val_names, val_trials, val_seed);
        return cmd_params(par_mode, par_sigma, par_eps, par_d1, par_d2, par_norm);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
