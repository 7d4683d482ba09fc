#include "phinv/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "phinv/collision.hpp"
#include "phinv/dispersion.hpp"
#include "phinv/error.hpp"
#include "phinv/nullspace.hpp"
#include "phinv/verifier.hpp"

namespace phinv::cli {

namespace fs = std::filesystem;
using io::Json;

namespace {

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

fs::path prepare_output(const RunConfig& cfg, const std::string& command) {
    fs::path dir(cfg.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + cfg.out + ": " + ec.message());
    Json config = cfg.to_json();
    Json manifest;
    manifest["tool"] = "phinv";
    manifest["version"] = kToolVersion;
    manifest["command"] = command;
    manifest["config_hash"] = fnv1a_hex(io::dump_json(config));
    manifest["config"] = config;
    io::write_json((dir / "manifest.json").string(), manifest);
    return dir;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream os(p);
    if (!os) throw Error("cannot write " + p.string());
    return os;
}

Json to_json_array(const std::vector<double>& v) {
    Json a = Json::array();
    for (double x : v) a.push_back(x);
    return a;
}

GridSpec make_grid(const RunConfig& cfg, const FourierDispersion& disp) {
    return GridSpec(disp.dim(), cfg.n, cfg.offset);
}

GridFunction resolve_candidate(const RunConfig& cfg, const GridFunction& omega) {
    const Candidate& cand = cfg.candidate;
    std::vector<double> v(omega.size());
    if (cand.kind == "affine") {
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = cand.a * omega[i] + cand.c;
    } else if (cand.kind == "omegasq") {
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = omega[i] * omega[i];
    } else if (cand.kind == "file") {
        std::ifstream in(cand.path);
        if (!in) throw ConfigError("cannot open candidate file " + cand.path);
        v = io::read_values_csv(in);
        if (v.size() != omega.size())
            throw ConfigError("candidate file " + cand.path + " has " + std::to_string(v.size()) +
                              " values, grid has " + std::to_string(omega.size()));
    } else {
        throw ConfigError("unknown candidate kind \"" + cand.kind + "\"");
    }
    return GridFunction(omega.spec, std::move(v));
}

Json candidate_json(const Candidate& c) {
    Json j;
    j["kind"] = c.kind;
    if (c.kind == "affine") {
        j["a"] = c.a;
        j["c"] = c.c;
    }
    if (c.kind == "file") j["path"] = c.path;
    return j;
}

}  // namespace

void RunConfig::validate() const {
    if (dim < 1) throw ConfigError("dim must be >= 1");
    if (n < 2) throw ConfigError("n must be >= 2");
    if (!(offset >= 0.0 && offset < 1.0)) throw ConfigError("offset must lie in [0, 1)");
    if (epsilon_e && !(*epsilon_e >= 0.0 && std::isfinite(*epsilon_e)))
        throw ConfigError("epsilon_e must be finite and >= 0");
    if (sigma_tol && !(*sigma_tol >= 0.0 && std::isfinite(*sigma_tol)))
        throw ConfigError("sigma_tol must be finite and >= 0");
    if (!(eps0 > 0.0)) throw ConfigError("eps0 must be > 0");
    if (bumps < 3) throw ConfigError("bumps must be >= 3");
    if (cap < 1) throw ConfigError("cap must be >= 1");
    if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
    if (!(kappa_max > 1.0)) throw ConfigError("kappa_max must be > 1");
    if (!(margin >= 0.0)) throw ConfigError("margin must be >= 0");
    for (std::size_t i = 0; i < deltas.size(); ++i)
        if (!(deltas[i] > 0.0) || (i > 0 && !(deltas[i] > deltas[i - 1])))
            throw ConfigError("deltas must be positive and ascending");
    if (candidate.kind != "affine" && candidate.kind != "omegasq" && candidate.kind != "file")
        throw ConfigError("candidate kind must be affine, omegasq or file");
    if (candidate.kind == "file" && candidate.path.empty()) throw ConfigError("candidate file path missing");
}

Json RunConfig::to_json() const {
    Json j;
    j["model"] = model;
    j["dim"] = dim;
    j["n"] = n;
    j["offset"] = offset;
    j["epsilon_e"] = epsilon_e ? Json(*epsilon_e) : Json("auto");
    j["sigma_tol"] = sigma_tol ? Json(*sigma_tol) : Json("auto");
    j["eps0"] = eps0;
    j["seed"] = seed;
    j["bumps"] = bumps;
    j["threads"] = threads;
    j["cap"] = cap;
    j["dense_cap"] = dense_cap;
    j["max_iterations"] = max_iterations;
    j["kappa_max"] = kappa_max;
    j["margin"] = margin;
    j["deltas"] = to_json_array(deltas);
    j["candidate"] = candidate_json(candidate);
    return j;
}

void apply_config_json(RunConfig& cfg, const Json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    auto number = [](const Json& v, const std::string& key) {
        if (!v.is_number()) throw ConfigError("config key \"" + key + "\" must be a number");
        return v.get<double>();
    };
    auto integer = [](const Json& v, const std::string& key) {
        if (!v.is_number_integer()) throw ConfigError("config key \"" + key + "\" must be an integer");
        return v.get<long long>();
    };
    auto non_negative = [&](const Json& v, const std::string& key) {
        long long x = integer(v, key);
        if (x < 0) throw ConfigError("config key \"" + key + "\" must be >= 0");
        return static_cast<unsigned long long>(x);
    };
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        const Json& v = it.value();
        if (key == "model") {
            if (!v.is_string()) throw ConfigError("config key \"model\" must be a string");
            cfg.model = v.get<std::string>();
        } else if (key == "dim") {
            cfg.dim = static_cast<int>(integer(v, key));
        } else if (key == "n" || key == "n_per_axis") {
            cfg.n = static_cast<int>(integer(v, key));
        } else if (key == "offset") {
            cfg.offset = number(v, key);
        } else if (key == "epsilon_e") {
            if (v.is_string() && v.get<std::string>() == "auto")
                cfg.epsilon_e.reset();
            else
                cfg.epsilon_e = number(v, key);
        } else if (key == "sigma_tol") {
            if (v.is_string() && v.get<std::string>() == "auto")
                cfg.sigma_tol.reset();
            else
                cfg.sigma_tol = number(v, key);
        } else if (key == "eps0") {
            cfg.eps0 = number(v, key);
        } else if (key == "seed") {
            cfg.seed = non_negative(v, key);
        } else if (key == "bumps" || key == "bump_family_size") {
            cfg.bumps = static_cast<int>(integer(v, key));
        } else if (key == "out" || key == "output_dir") {
            if (!v.is_string()) throw ConfigError("config key \"" + key + "\" must be a string");
            cfg.out = v.get<std::string>();
        } else if (key == "threads") {
            cfg.threads = static_cast<unsigned>(non_negative(v, key));
        } else if (key == "cap") {
            cfg.cap = non_negative(v, key);
        } else if (key == "dense_cap") {
            cfg.dense_cap = non_negative(v, key);
        } else if (key == "max_iterations") {
            cfg.max_iterations = static_cast<int>(integer(v, key));
        } else if (key == "kappa_max") {
            cfg.kappa_max = number(v, key);
        } else if (key == "margin") {
            cfg.margin = number(v, key);
        } else if (key == "deltas") {
            if (!v.is_array()) throw ConfigError("config key \"deltas\" must be an array");
            cfg.deltas.clear();
            for (const auto& x : v) cfg.deltas.push_back(number(x, key));
        } else if (key == "candidate") {
            if (!v.is_object()) throw ConfigError("config key \"candidate\" must be an object");
            for (auto c = v.begin(); c != v.end(); ++c) {
                if (c.key() == "kind" && c.value().is_string())
                    cfg.candidate.kind = c.value().get<std::string>();
                else if (c.key() == "a")
                    cfg.candidate.a = number(c.value(), "candidate.a");
                else if (c.key() == "c")
                    cfg.candidate.c = number(c.value(), "candidate.c");
                else if (c.key() == "path" && c.value().is_string())
                    cfg.candidate.path = c.value().get<std::string>();
                else
                    throw ConfigError("unknown or malformed candidate key \"" + c.key() + "\"");
            }
        } else {
            throw ConfigError("unknown config key \"" + key + "\"");
        }
    }
}

int cmd_dispersion(const RunConfig& cfg) {
    FourierDispersion disp = make_model(cfg.model, cfg.dim);
    GridSpec grid = make_grid(cfg, disp);
    fs::path dir = prepare_output(cfg, "dispersion");

    GridFunction omega = sample_grid(disp, grid);
    {
        auto os = open_out(dir / "omega.csv");
        io::write_grid_csv(os, omega, "omega");
    }
    std::vector<double> dets = hessian_determinants(disp, grid, cfg.eps0);
    {
        auto os = open_out(dir / "hessdet.csv");
        for (int j = 0; j < grid.dim(); ++j) os << 'k' << j << ',';
        os << "hess_det\n";
        std::vector<double> k(static_cast<std::size_t>(grid.dim()));
        for (std::size_t i = 0; i < grid.size(); ++i) {
            grid.point(static_cast<PointIndex>(i), k);
            for (double x : k) os << io::format_double(x) << ',';
            os << io::format_double(dets[i]) << '\n';
        }
    }
    DegeneracyProfile prof = degeneracy_profile(disp, grid, cfg.deltas, cfg.eps0);
    Json rep;
    rep["deltas"] = to_json_array(prof.deltas);
    rep["fractions"] = to_json_array(prof.fractions);
    rep["excluded_fraction"] = prof.excluded_fraction;
    rep["points"] = grid.size();
    rep["config"] = cfg.to_json();
    io::write_json((dir / "degeneracy.json").string(), rep);
    return kOk;
}

int cmd_nullspace(const RunConfig& cfg) {
    FourierDispersion disp = make_model(cfg.model, cfg.dim);
    GridSpec grid = make_grid(cfg, disp);
    fs::path dir = prepare_output(cfg, "nullspace");

    GridFunction omega = sample_grid(disp, grid);
    double eps_e = cfg.epsilon_e ? *cfg.epsilon_e : default_energy_tolerance(disp, grid, cfg.eps0);
    if (!cfg.epsilon_e && eps_e == 0.0)
        throw ConfigError("automatic epsilon_e is 0 for a flat band; pass --epsilon-e");
    QuadrupleSet qs = enumerate_quadruples(omega, eps_e, {cfg.cap, cfg.threads});
    ConstraintMatrix m(qs);
    {
        auto os = open_out(dir / "quadruples.csv");
        io::write_quadruples_csv(os, qs);
    }
    {
        auto os = open_out(dir / "constraints.mtx");
        io::write_matrix_market(os, m);
    }

    Json rep;
    rep["epsilon_e"] = eps_e;
    rep["rows"] = m.rows();
    rep["cols"] = m.cols();
    ResidualStats omega_res = residual_stats(omega, qs);
    rep["omega_residual_max_abs"] = omega_res.max_abs;

    if (m.rows() == 0) {
        // Every grid function satisfies an empty constraint set.
        rep["empty_constraint_set"] = true;
        rep["dimension"] = m.cols();
        rep["config"] = cfg.to_json();
        io::write_json((dir / "nullspace.json").string(), rep);
        auto os = open_out(dir / "basis.csv");
        return kOk;
    }

    NullspaceOptions opts;
    opts.sigma_tol = cfg.sigma_tol ? *cfg.sigma_tol : default_sigma_tol(m, omega, eps_e);
    opts.dense_cap = cfg.dense_cap;
    opts.seed = cfg.seed;
    opts.max_iterations = cfg.max_iterations;
    InvariantBasis basis = compute_invariant_basis(m, opts);
    SubspaceComparison cmp = compare_to_affine_span(basis, omega);
    InvariantDimension dim = invariant_dimension(basis.singular_values, basis.sigma_tol);
    {
        auto os = open_out(dir / "basis.csv");
        io::write_basis_csv(os, basis);
    }
    rep["empty_constraint_set"] = false;
    rep["sigma_tol"] = basis.sigma_tol;
    rep["path"] = basis.iterative ? "iterative" : "dense";
    rep["dimension"] = basis.dimension();
    rep["spectral_gap"] = dim.gap_ratio ? Json(*dim.gap_ratio) : Json(nullptr);
    rep["singular_values"] = to_json_array(basis.singular_values);
    rep["contains_constant"] = cmp.contains_constant;
    rep["contains_omega"] = cmp.contains_omega;
    rep["contains_omega_perp"] = cmp.contains_omega_perp;
    rep["principal_angles"] = to_json_array(cmp.principal_angles);
    rep["degenerate_span"] = cmp.degenerate_span;
    rep["reference_dimension"] = cmp.reference_dimension;
    // More invariants than span{1, ω} holds.
    rep["excess_dimension"] = basis.dimension() > cmp.reference_dimension;
    rep["config"] = cfg.to_json();
    io::write_json((dir / "nullspace.json").string(), rep);
    return kOk;
}

int cmd_verify(const RunConfig& cfg) {
    FourierDispersion disp = make_model(cfg.model, cfg.dim);
    GridSpec grid = make_grid(cfg, disp);
    GridFunction omega = sample_grid(disp, grid);
    GridFunction psi = resolve_candidate(cfg, omega);
    fs::path dir = prepare_output(cfg, "verify");

    VerifierOptions vopts;
    vopts.eps0 = cfg.eps0;
    vopts.kappa_max = cfg.kappa_max;
    vopts.margin = cfg.margin;
    std::vector<BumpTestFunction> family =
        make_bump_family(omega, static_cast<std::size_t>(cfg.bumps), cfg.seed, vopts);
    if (family.size() < 3)
        throw InsufficientTestFunctions("only " + std::to_string(family.size()) + " admissible test functions found");
    VerificationReport vr = verify_candidate(psi, omega, family, vopts);

    Json rep;
    rep["a_est"] = vr.scalar.a_est;
    rep["c_est"] = vr.fit.c;
    rep["a_spread"] = vr.scalar.a_spread;
    rep["offdiag_max"] = vr.scalar.offdiag_max;
    rep["residual_l1"] = vr.fit.residual_l1;
    rep["residual_linf"] = vr.fit.residual_linf;
    rep["cond_B_list"] = to_json_array(vr.scalar.cond_B);
    rep["verdict"] = std::string(to_string(vr.verdict));
    rep["tau_a"] = vr.tau_a;
    rep["tau_r"] = vr.tau_r;
    Json fam = Json::array();
    for (const auto& f : family) {
        Json b;
        b["center"] = to_json_array(std::vector<double>(f.center.data(), f.center.data() + f.center.size()));
        b["width"] = to_json_array(std::vector<double>(f.width.data(), f.width.data() + f.width.size()));
        fam.push_back(b);
    }
    rep["bumps"] = fam;
    rep["config"] = cfg.to_json();
    io::write_json((dir / "verification.json").string(), rep);
    return kOk;
}

int cmd_reduce(const RunConfig& cfg) {
    FourierDispersion disp = make_model(cfg.model, cfg.dim);
    GridSpec grid = make_grid(cfg, disp);
    GridFunction omega = sample_grid(disp, grid);
    GridFunction psi = resolve_candidate(cfg, omega);
    fs::path dir = prepare_output(cfg, "reduce");

    double eps_e = cfg.epsilon_e ? *cfg.epsilon_e : default_energy_tolerance(disp, grid, cfg.eps0);
    TripleSet ts = enumerate_3to1(omega, eps_e, {cfg.cap, cfg.threads});
    ReductionStats st = check_nonconserving_reduction(psi, ts);

    Json rep;
    rep["epsilon_e"] = eps_e;
    rep["count"] = st.count;
    rep["mean_residual"] = st.mean_residual;
    rep["max_abs_residual"] = st.max_abs_residual;
    if (st.empty) {
        rep["inferred_c"] = nullptr;
        rep["verdict"] = "inconclusive";
    } else {
        double c = st.mean_residual / 2.0;
        rep["inferred_c"] = c;
        rep["verdict"] = std::abs(c) <= eps_e ? "c-zero" : "c-nonzero";
    }
    rep["config"] = cfg.to_json();
    io::write_json((dir / "reduction.json").string(), rep);
    return kOk;
}

int run(int argc, const char* const* argv) {
    CLI::App app{"Collisional invariants of the phonon pair-collision structure on discrete Brillouin zones", "phinv"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", kToolVersion);

    std::string config_path;
    std::optional<std::string> model, out, candidate, candidate_file;
    std::optional<int> dim, n, bumps, max_iterations;
    std::optional<double> offset, epsilon_e, sigma_tol, eps0, a, c, kappa_max, margin;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::optional<std::size_t> cap, dense_cap;

    app.add_option("--config", config_path, "JSON config file; flags override its values");
    app.add_option("--model", model, "nn | nn-gap(m) | constant(c) | coefficient file");
    app.add_option("--dim", dim, "Dimension d for built-in models");
    app.add_option("--n", n, "Grid points per axis");
    app.add_option("--offset", offset, "Grid offset in [0, 1)");
    app.add_option("--epsilon-e", epsilon_e, "Energy tolerance (default: max|grad omega| / N^2)");
    app.add_option("--sigma-tol", sigma_tol, "Null-space singular value threshold");
    app.add_option("--eps0", eps0, "omega threshold marking the singular set");
    app.add_option("--seed", seed, "Seed for iterative solver and bump family");
    app.add_option("--bumps", bumps, "Test-function family size");
    app.add_option("--out", out, "Output directory");
    app.add_option("--threads", threads, "Worker threads for enumeration (0 = all cores)");
    app.add_option("--cap", cap, "Maximum number of enumerated collisions");
    app.add_option("--dense-cap", dense_cap, "Largest column count handled by dense SVD");
    app.add_option("--max-iterations", max_iterations, "Iteration limit of the iterative null-space path");
    app.add_option("--kappa-max", kappa_max, "Largest admissible cond(B)");
    app.add_option("--margin", margin, "Bump distance from near-singular points");
    app.add_option("--candidate", candidate, "affine | omegasq | file");
    app.add_option("--a", a, "Affine candidate slope");
    app.add_option("--c", c, "Affine candidate offset");
    app.add_option("--candidate-file", candidate_file, "CSV with candidate values in grid order");

    auto* sub_disp = app.add_subcommand("dispersion", "Sample omega, Hessian determinants, degeneracy profile");
    auto* sub_null = app.add_subcommand("nullspace", "Enumerate collisions and compute the invariant subspace");
    auto* sub_verify = app.add_subcommand("verify", "Moment-matrix verification of a candidate invariant");
    auto* sub_reduce = app.add_subcommand("reduce", "3<->1 substitution check for the constant part");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfig;
    }

    try {
        RunConfig cfg;
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw ConfigError("cannot open config file " + config_path);
            Json j;
            try {
                j = Json::parse(in);
            } catch (const Json::parse_error& e) {
                throw ConfigError("config file is not valid JSON: " + std::string(e.what()));
            }
            apply_config_json(cfg, j);
        }
        if (model) cfg.model = *model;
        if (dim) cfg.dim = *dim;
        if (n) cfg.n = *n;
        if (offset) cfg.offset = *offset;
        if (epsilon_e) cfg.epsilon_e = *epsilon_e;
        if (sigma_tol) cfg.sigma_tol = *sigma_tol;
        if (eps0) cfg.eps0 = *eps0;
        if (seed) cfg.seed = *seed;
        if (bumps) cfg.bumps = *bumps;
        if (out) cfg.out = *out;
        if (threads) cfg.threads = *threads;
        if (cap) cfg.cap = *cap;
        if (dense_cap) cfg.dense_cap = *dense_cap;
        if (max_iterations) cfg.max_iterations = *max_iterations;
        if (kappa_max) cfg.kappa_max = *kappa_max;
        if (margin) cfg.margin = *margin;
        if (candidate) cfg.candidate.kind = *candidate;
        if (a) cfg.candidate.a = *a;
        if (c) cfg.candidate.c = *c;
        if (candidate_file) {
            cfg.candidate.path = *candidate_file;
            if (!candidate) cfg.candidate.kind = "file";
        }
        cfg.validate();

        if (sub_disp->parsed()) return cmd_dispersion(cfg);
        if (sub_null->parsed()) return cmd_nullspace(cfg);
        if (sub_verify->parsed()) return cmd_verify(cfg);
        if (sub_reduce->parsed()) return cmd_reduce(cfg);
        return kConfig;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const GridMismatch& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const InvalidDispersion& e) {
        std::cerr << "model error: " << e.what() << '\n';
        return kModel;
    } catch (const CapacityExceeded& e) {
        std::cerr << "capacity exceeded: " << e.what() << '\n';
        return kCapacity;
    } catch (const ConvergenceFailure& e) {
        std::cerr << "convergence failure: " << e.what() << '\n';
        return kConvergence;
    } catch (const InsufficientTestFunctions& e) {
        std::cerr << "admissibility: " << e.what() << '\n';
        return kAdmissibility;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
}

}  // namespace phinv::cli
