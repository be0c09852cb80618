#include "cbsim/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "cbsim/counterexample.hpp"
#include "cbsim/io.hpp"
#include "cbsim/model_space.hpp"
#include "cbsim/rng.hpp"
#include "cbsim/similarity.hpp"

namespace cbsim {

namespace {

constexpr const char* kVersion = "1.0.0";

struct RunConfig {
    std::string command;
    std::string input_path;
    std::string output_path = "report.json";
    std::uint64_t seed = 1;
    int budget = 16;
    int grid = 16;
    std::map<std::string, double> tolerances;  // defaults merged with overrides
    std::string csv;                           // per-root table, model/carleson only
};

std::map<std::string, double> default_tolerances(const std::string& command) {
    if (command == "paulsen") return {{"cc_tol", 1e-7}, {"kappa_tol", 5e-4}};
    if (command == "iterate" || command == "almost-isometric") return {{"cc_tol", 1e-7}};
    if (command == "counterexample") return {{"lemma_tol", 1e-8}};
    if (command == "model") return {{"sandwich_tol", 1e-6}};
    return {};
}

void apply_tolerance_overrides(RunConfig& cfg, const std::vector<std::string>& raw) {
    for (const std::string& item : raw) {
        auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ValidationError("expected <name>=<value>", "tol");
        std::string name = item.substr(0, eq);
        if (!cfg.tolerances.count(name))
            throw ValidationError("unknown tolerance for this command: " + name, "tol");
        double value = 0;
        try {
            std::size_t used = 0;
            value = std::stod(item.substr(eq + 1), &used);
            if (used != item.size() - eq - 1) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ValidationError("tolerance value not a number: " + item, "tol");
        }
        if (!(value >= 1e-14))
            throw ValidationError("tolerance must be at least 1e-14", "tol");
        cfg.tolerances[name] = value;
    }
}

Json load_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open input file: " + path, "input");
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    if (text.find_first_not_of(" \t\r\n") == std::string::npos)
        throw ValidationError("input file is empty", "input");
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ValidationError("malformed JSON at line " + std::to_string(line) +
                                  ", column " + std::to_string(col),
                              "input");
    }
}

Json complex_vector_to_json(const std::vector<Complex>& v) {
    Json out = Json::array();
    for (Complex z : v) out.push_back(complex_to_json(z));
    return out;
}

Json chain_to_json(const std::vector<std::vector<double>>& chain) {
    Json out = Json::array();
    for (const auto& row : chain) out.push_back(row);
    return out;
}

std::uint64_t fnv1a(std::uint64_t h, const std::string& s) {
    for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
    return h;
}

std::uint64_t scene_hash(const CounterexampleScene& scene) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](const CMat& m) {
        char buf[64];
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                std::snprintf(buf, sizeof buf, "%.12e:%.12e;", m(r, c).real(),
                              m(r, c).imag());
                h = fnv1a(h, buf);
            }
    };
    for (const CMat& b : scene.A_R.basis()) feed(b);
    for (const CMat& b : scene.A_D.basis()) feed(b);
    for (const CMat& b : scene.Psi.images()) feed(b);
    return h;
}

Complex random_complex(std::mt19937_64& gen) {
    std::normal_distribution<double> nd;
    return Complex(nd(gen), nd(gen));
}

Complex random_phase(std::mt19937_64& gen) {
    std::uniform_real_distribution<double> ud(0.0, 2.0 * M_PI);
    return std::polar(1.0, ud(gen));
}

// The two constructed equality families exercised by the lemma table.
UTParams phase_instance(std::mt19937_64& gen) {
    UTParams p;
    p.alpha = random_complex(gen);
    p.beta = random_complex(gen);
    p.gamma = random_complex(gen);
    Complex ph = random_phase(gen);
    p.alpha_p = p.alpha * random_phase(gen);
    p.beta_p = p.beta * ph;
    p.gamma_p = p.gamma * ph;
    p.delta_p = 0.0;
    return p;
}

UTParams kernel_instance(std::mt19937_64& gen) {
    UTParams p;
    p.beta = random_complex(gen);
    p.gamma = random_complex(gen) + Complex(1.0, 0);
    std::uniform_real_distribution<double> ud(0.0, 0.9);
    p.delta_p = std::polar(ud(gen) * std::abs(p.gamma), std::arg(random_complex(gen)));
    double gp = std::sqrt(std::norm(p.gamma) - std::norm(p.delta_p));
    p.gamma_p = std::polar(gp, std::arg(random_complex(gen)));
    p.beta_p = std::conj(std::conj(p.beta) * p.gamma / p.gamma_p);
    p.alpha = std::sqrt(std::norm(p.beta_p) - std::norm(p.beta));
    p.alpha_p = 0.0;
    return p;
}

const Json& field_or_throw(const Json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw ValidationError("missing field", key);
    return j.at(key);
}

Json run_cbnorm(const RunConfig& cfg, const Json& input) {
    CBLinearMap f = map_from_json(input, "");
    CbEstimate est = cb_norm_estimate(f, cfg.budget, cfg.seed);
    return Json{{"cb_lower", est.lower},
                {"level_used", est.level_used},
                {"witness_input_norm", est.witness.input_norm},
                {"witness_output_norm", est.witness.output_norm}};
}

Json run_paulsen(const RunConfig& cfg, const Json& input) {
    CBLinearMap f = map_from_json(input, "");
    PaulsenOptions opts;
    opts.cc_tol = cfg.tolerances.at("cc_tol");
    opts.kappa_tol = cfg.tolerances.at("kappa_tol");
    SimilarityStepResult r = paulsen_step(f, cfg.budget, cfg.seed, opts);
    return Json{{"kappa", r.kappa},
                {"achieved_cb_bound", r.achieved_cb_bound},
                {"target_cb", r.target_cb},
                {"X", matrix_to_json(r.X)}};
}

Json run_iterate(const RunConfig& cfg, const Json& input) {
    CBLinearMap f = map_from_json(input.contains("map") ? input.at("map") : input,
                                  input.contains("map") ? "map" : "");
    int iterations = input.value("iterations", 4);
    int probe_count = input.value("probe_count", 3);
    int probe_level = input.value("probe_level", 2);
    if (iterations < 1) throw ValidationError("iterations must be positive", "iterations");
    if (probe_count < 1 || probe_level < 1)
        throw ValidationError("probe settings must be positive", "probe_count");

    std::vector<BlockGrid> probes;
    for (int p = 0; p < probe_count; ++p) {
        auto gen = substream(cfg.seed, 0xabcULL + static_cast<std::uint64_t>(p));
        BlockGrid grid(static_cast<std::size_t>(probe_level));
        for (int i = 0; i < probe_level; ++i)
            for (int j = 0; j < probe_level; ++j) {
                CMat entry =
                    CMat::Zero(f.domain().ambient_dim(), f.domain().ambient_dim());
                for (const CMat& b : f.domain().basis()) entry += random_complex(gen) * b;
                grid[static_cast<std::size_t>(i)].push_back(std::move(entry));
            }
        probes.push_back(std::move(grid));
    }

    IterateOptions opts;
    opts.cc_tol = cfg.tolerances.at("cc_tol");
    IterationTrace tr = iterate_xy(f, probes, iterations, cfg.budget, cfg.seed, opts);
    Json result{{"iterations", iterations},
                {"probe_count", probe_count},
                {"probe_level", probe_level},
                {"chain", chain_to_json(tr.chain)}};
    if (!tr.X_seq.empty()) {
        result["X_final"] = matrix_to_json(tr.X_seq.back());
        result["Y_final"] = matrix_to_json(tr.Y_seq.back());
    }
    return result;
}

Json run_almost_isometric(const RunConfig& cfg, const Json& input) {
    CBLinearMap f = map_from_json(field_or_throw(input, "map"), "map");
    if (!input.contains("elements") || !input.at("elements").is_array() ||
        input.at("elements").empty())
        throw ValidationError("expected a nonempty array", "elements");
    std::vector<CMat> a0;
    for (std::size_t k = 0; k < input.at("elements").size(); ++k)
        a0.push_back(matrix_from_json(input.at("elements")[k],
                                      "elements[" + std::to_string(k) + "]"));
    if (!input.contains("epsilon") || !input.at("epsilon").is_number())
        throw ValidationError("expected a number", "epsilon");
    double epsilon = input.at("epsilon").get<double>();
    if (!(epsilon > 0)) throw ValidationError("epsilon must be positive", "epsilon");

    AlmostIsometricOptions opts;
    opts.cc_tol = cfg.tolerances.at("cc_tol");
    if (cfg.grid >= 3) {
        opts.grid_radii = cfg.grid;
        opts.grid_angles = cfg.grid;
    }
    AlmostIsometryReport rep = almost_isometric(f, a0, epsilon, cfg.budget, cfg.seed, opts);
    return Json{{"epsilon", rep.epsilon},
                {"N", rep.N},
                {"delta", rep.delta},
                {"zeta", complex_vector_to_json(rep.zeta)},
                {"rho", rep.rho},
                {"sigma", rep.sigma},
                {"bound_factor", rep.bound_factor},
                {"measured_ratios", rep.measured_ratios},
                {"quasinilpotent_branch", rep.quasinilpotent_branch},
                {"X", matrix_to_json(rep.X)},
                {"Y", matrix_to_json(rep.Y)}};
}

Json run_counterexample(const RunConfig& cfg, const Json& input) {
    double kappa_cap = input.value("kappa_cap", 10.0);
    if (!(kappa_cap >= 1.0)) throw ValidationError("kappa_cap must be >= 1", "kappa_cap");
    double lemma_tol = cfg.tolerances.at("lemma_tol");

    CounterexampleScene scene = build_scene();
    CMat id = CMat::Identity(2, 2);
    double identity_defect = isometry_defect(scene, id, id, id, id, cfg.grid);
    DefectResult best = defect_minimize(scene, kappa_cap, cfg.budget, cfg.seed, cfg.grid);

    int phase_ok = 0, kernel_ok = 0, diag_ok = 0;
    const int draws = 25;
    auto gen = substream(cfg.seed, 0x1e44aULL);
    for (int t = 0; t < draws; ++t) {
        LemmaRelReport r = lemma_rel_check(phase_instance(gen), lemma_tol, cfg.grid);
        if (r.hypothesis_holds && r.eq_gamma_ok && r.eq_alpha_ok && r.ineq_betagamma_ok &&
            r.equality_implies_degenerate_ok)
            ++phase_ok;
        r = lemma_rel_check(kernel_instance(gen), lemma_tol, cfg.grid);
        if (r.hypothesis_holds && r.eq_gamma_ok && r.eq_alpha_ok && r.ineq_betagamma_ok &&
            r.equality_implies_degenerate_ok)
            ++kernel_ok;
        UTParams rand_p;
        rand_p.alpha = random_complex(gen);
        rand_p.beta = random_complex(gen);
        rand_p.gamma = random_complex(gen);
        rand_p.alpha_p = random_complex(gen) + Complex(0.5, 0);
        rand_p.beta_p = random_complex(gen);
        rand_p.gamma_p = random_complex(gen) + Complex(0.5, 0);
        rand_p.delta_p = random_complex(gen) + Complex(0.5, 0);
        if (lemma_diag_check(rand_p, lemma_tol, cfg.grid)) ++diag_ok;
    }

    char hash_hex[32];
    std::snprintf(hash_hex, sizeof hash_hex, "%016llx",
                  static_cast<unsigned long long>(scene_hash(scene)));
    return Json{{"scene_hash", hash_hex},
                {"grid_density", cfg.grid},
                {"kappa_cap", kappa_cap},
                {"identity_defect", identity_defect},
                {"best_defect", best.best_defect},
                {"X1", matrix_to_json(best.X1)},
                {"X2", matrix_to_json(best.X2)},
                {"Y1", matrix_to_json(best.Y1)},
                {"Y2", matrix_to_json(best.Y2)},
                {"lemma_checks", Json{{"draws", draws},
                                      {"phase_family_ok", phase_ok},
                                      {"kernel_family_ok", kernel_ok},
                                      {"diag_no_false_positive", diag_ok}}}};
}

std::string root_table_csv(const BlaschkeProduct& b) {
    std::ostringstream csv;
    csv << "index,re,im,mult,abs,separation_product\n";
    bool simple = has_simple_roots(b);
    for (std::size_t i = 0; i < b.roots.size(); ++i) {
        const BlaschkeRoot& r = b.roots[i];
        double sep = 1.0;
        if (simple)
            for (std::size_t k = 0; k < b.roots.size(); ++k) {
                if (k == i) continue;
                Complex lk = b.roots[k].lambda;
                sep *= std::abs((r.lambda - lk) / (1.0 - std::conj(lk) * r.lambda));
            }
        char line[160];
        std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%d,%.17g,%.17g\n", i,
                      r.lambda.real(), r.lambda.imag(), r.mult, std::abs(r.lambda),
                      simple ? sep : std::nan(""));
        csv << line;
    }
    return csv.str();
}

Json run_model(RunConfig& cfg, const Json& input) {
    BlaschkeProduct b = blaschke_from_json(input, "");
    ModelOperator m = model_operator(b);
    double sandwich_tol = cfg.tolerances.at("sandwich_tol");

    Json result{{"degree", b.degree()},
                {"gram_condition", condition(m.gram)},
                {"annihilation_residual", op_norm(blaschke_apply(b, m.S))},
                {"S", matrix_to_json(m.S)},
                {"eigenvalues", complex_vector_to_json(eigenvalues(m.S))},
                {"simple_roots", has_simple_roots(b)}};

    if (has_simple_roots(b) && b.degree() > 1) {
        VasyuninResult v = vasyunin_similarity(b);
        bool sandwich_ok = true;
        double worst_gap = 0.0;
        for (int k = 0; k < b.degree(); ++k) {
            Poly u(static_cast<std::size_t>(k) + 1, Complex(0, 0));
            u.back() = 1.0;
            double qn = op_norm(functional_calculus(u, m));
            double sup = 0.0;
            for (const BlaschkeRoot& r : b.roots)
                sup = std::max(sup, std::abs(poly_eval(u, r.lambda)));
            double lo = v.delta_bound * qn - sup;
            double hi = sup - qn;
            worst_gap = std::max({worst_gap, lo, hi});
            if (lo > sandwich_tol || hi > sandwich_tol) sandwich_ok = false;
        }
        result["sandwich"] = Json{{"kappa", v.kappa},
                                  {"delta_bound", v.delta_bound},
                                  {"carleson_delta", carleson_delta(b)},
                                  {"verified", sandwich_ok},
                                  {"worst_gap", worst_gap}};
    } else {
        result["sandwich"] = nullptr;
    }
    cfg.csv = root_table_csv(b);
    return result;
}

Json run_carleson(RunConfig& cfg, const Json& input) {
    BlaschkeProduct b = blaschke_from_json(input, "");
    double delta = carleson_delta(b);
    Json result{{"delta", delta}};
    if (b.degree() > 1) {
        VasyuninResult v = vasyunin_similarity(b);
        result["kappa"] = v.kappa;
        result["delta_bound"] = v.delta_bound;
    } else {
        result["kappa"] = 1.0;
        result["delta_bound"] = 1.0;
    }
    cfg.csv = root_table_csv(b);
    return result;
}

Json run_clbp(const RunConfig& cfg, const Json& input) {
    OperatorSubspace alg = subspace_from_json(field_or_throw(input, "algebra"), "algebra");
    CMat x = matrix_from_json(field_or_throw(input, "X"), "X");
    ClbpResult r = clbp_defect(x, alg, cfg.budget, cfg.seed);
    return Json{{"ratio", r.ratio}, {"cb_est", r.cb_est}, {"kappa", r.kappa}};
}

std::string one_line_summary(const RunConfig& cfg, const Json& result) {
    std::ostringstream s;
    s << cfg.command << ":";
    if (cfg.command == "cbnorm")
        s << " cb_lower=" << result["cb_lower"].get<double>();
    else if (cfg.command == "paulsen")
        s << " kappa=" << result["kappa"].get<double>();
    else if (cfg.command == "iterate")
        s << " iterations=" << result["iterations"].get<int>();
    else if (cfg.command == "almost-isometric")
        s << " N=" << result["N"].get<int>()
          << " bound_factor=" << result["bound_factor"].get<double>();
    else if (cfg.command == "counterexample")
        s << " best_defect=" << result["best_defect"].get<double>();
    else if (cfg.command == "model")
        s << " degree=" << result["degree"].get<int>();
    else if (cfg.command == "carleson")
        s << " delta=" << result["delta"].get<double>();
    else if (cfg.command == "clbp")
        s << " ratio=" << result["ratio"].get<double>();
    s << " -> " << cfg.output_path;
    return s.str();
}

int execute(RunConfig cfg, std::ostream& out) {
    auto t0 = std::chrono::steady_clock::now();
    Json input = load_input(cfg.input_path);

    Json result;
    if (cfg.command == "cbnorm") result = run_cbnorm(cfg, input);
    else if (cfg.command == "paulsen") result = run_paulsen(cfg, input);
    else if (cfg.command == "iterate") result = run_iterate(cfg, input);
    else if (cfg.command == "almost-isometric") result = run_almost_isometric(cfg, input);
    else if (cfg.command == "counterexample") result = run_counterexample(cfg, input);
    else if (cfg.command == "model") result = run_model(cfg, input);
    else if (cfg.command == "carleson") result = run_carleson(cfg, input);
    else if (cfg.command == "clbp") result = run_clbp(cfg, input);
    else throw ValidationError("unknown command", "command");

    double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    Json report{{"command", cfg.command},
                {"version", kVersion},
                {"seed", cfg.seed},
                {"budget", cfg.budget},
                {"grid", cfg.grid},
                {"tolerances", cfg.tolerances},
                {"input_path", cfg.input_path},
                {"input", input},
                {"result", result}};
    // Timing lives outside the deterministic part of the report.
    report["timing"] = Json{{"seconds", seconds}};

    std::ofstream of(cfg.output_path, std::ios::binary);
    if (!of) throw ValidationError("cannot open output file: " + cfg.output_path, "output");
    of << report.dump(2) << "\n";

    if (!cfg.csv.empty()) {
        std::string csv_path = cfg.output_path + ".csv";
        std::ofstream cf(csv_path, std::ios::binary);
        if (!cf) throw ValidationError("cannot open output file: " + csv_path, "output");
        cf << cfg.csv;
    }

    out << one_line_summary(cfg, result) << "\n";
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"numerical workbench for similarity and model-operator experiments",
                 "cbsim"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::vector<std::string> tol_args;
    const std::vector<std::string> commands = {"cbnorm",         "paulsen",
                                               "iterate",        "almost-isometric",
                                               "counterexample", "model",
                                               "carleson",       "clbp"};
    for (const std::string& name : commands) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--input", cfg.input_path, "input JSON file")->required();
        sub->add_option("--output", cfg.output_path, "report JSON file");
        sub->add_option("--seed", cfg.seed, "64-bit run seed");
        sub->add_option("--budget", cfg.budget, "optimizer restart budget")
            ->check(CLI::PositiveNumber);
        sub->add_option("--grid", cfg.grid, "sample grid density")
            ->check(CLI::PositiveNumber);
        sub->add_option("--tol", tol_args, "tolerance override <name>=<value>");
    }

    std::vector<const char*> argv;
    argv.push_back("cbsim");
    for (const std::string& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "argument error: " << e.what() << "\n";
        return 2;
    }

    cfg.command = app.get_subcommands().front()->get_name();
    try {
        cfg.tolerances = default_tolerances(cfg.command);
        apply_tolerance_overrides(cfg, tol_args);
        return execute(std::move(cfg), out);
    } catch (const ValidationError& e) {
        err << "validation error";
        if (!e.field.empty()) err << " (" << e.field << ")";
        err << ": " << e.what() << "\n";
        return 2;
    } catch (const OptimizerFailure& e) {
        err << "engine error: " << e.what() << " (best ratio " << e.best_ratio << ")\n";
        return 3;
    } catch (const ConditioningError& e) {
        err << "engine error: " << e.what() << " (condition " << e.condition << ")\n";
        return 3;
    } catch (const std::exception& e) {
        err << "engine error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace cbsim
