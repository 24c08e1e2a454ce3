// heomcp command-line front end
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "heomcp/certify.hpp"
#include "heomcp/nonmarkov.hpp"
#include "heomcp/synthesis.hpp"

using namespace heomcp;
using nlohmann::json;

namespace {

constexpr int kSchema = 1;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// parameter flags shared by every model-taking subcommand; flag name -> model parameter key
const std::vector<std::pair<std::string, std::string>>& param_flags() {
    static const std::vector<std::pair<std::string, std::string>> f = {
        {"gamma", "gamma"},       {"zeta", "zeta"},   {"gamma1", "gamma1"},
        {"gamma2", "gamma2"},     {"omega", "omega"}, {"alpha", "alpha"},
        {"beta", "beta"},         {"delta", "Delta"}, {"gamma-plus", "gamma_plus"},
        {"gamma-minus", "gamma_minus"}, {"xi", "xi"},
    };
    return f;
}

struct ModelArgs {
    std::string name, json_path;
    std::map<std::string, double> flags;
    std::vector<std::string> extra;  // key=value
    bool stationary = false;
};

void add_model_options(CLI::App* sub, ModelArgs& a) {
    auto* m = sub->add_option("--model", a.name, "builtin model name");
    auto* j = sub->add_option("--model-json", a.json_path, "model file in the JSON model schema")->check(CLI::ExistingFile);
    m->excludes(j);  // "neither" is checked once the subcommand knows whether it needs a model
    for (auto& [flag, key] : param_flags()) sub->add_option("--" + flag, a.flags[key], "parameter " + key);
    sub->add_option("--param", a.extra, "extra parameter as key=value (repeatable)");
    sub->add_flag("--stationary-init", a.stationary, "reviving_2level: start the auxiliary level at -L11 rho");
}

Params resolved_params(const ModelArgs& a, const CLI::App* sub) {
    Params p;
    for (auto& [flag, key] : param_flags())
        if (sub->count("--" + flag)) p[key] = a.flags.at(key);
    for (auto& kv : a.extra) {
        auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) throw UsageError("--param expects key=value, got " + kv);
        try {
            p[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
        } catch (const std::exception&) {
            throw UsageError("--param value is not a number: " + kv);
        }
    }
    if (a.stationary) p["stationary_init"] = 1;
    return p;
}

HeomModel load_model(const ModelArgs& a, const CLI::App* sub, json& cfg) {
    Params p = resolved_params(a, sub);
    if (!a.json_path.empty()) {
        if (!p.empty()) throw UsageError("parameter flags conflict with --model-json");
        std::ifstream in(a.json_path);
        json j;
        try {
            j = json::parse(in);
            if (j.contains("tool") && j.contains("model")) j = j.at("model");  // output of `models --model`
            auto m = model_from_json(j);
            cfg["model_json"] = a.json_path;
            cfg["model"] = m.name;
            return m;
        } catch (const std::exception& e) {
            throw UsageError(std::string("malformed JSON model: ") + e.what());
        }
    }
    if (a.name.empty()) throw UsageError("one of --model or --model-json is required");
    cfg["model"] = a.name;
    try {
        auto m = build_model(a.name, p);
        cfg["params"] = p;
        return m;
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

json envelope(const std::string& command, const json& cfg) {
    json out;
    out["tool"] = "heomcp";
    out["version"] = HEOMCP_VERSION;
    out["schema"] = kSchema;
    json c = cfg;
    c["command"] = command;
    out["config"] = c;
    return out;
}

void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream f(path);
    if (!f) throw UsageError("cannot write " + path);
    f << text;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// "a:b:n" -> n points from a to b inclusive
std::vector<double> parse_range(const std::string& s) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    for (std::string x; std::getline(ss, x, ':');) parts.push_back(x);
    if (parts.size() != 3) throw UsageError("range must be start:stop:count, got " + s);
    double a, b;
    int n;
    try {
        a = std::stod(parts[0]);
        b = std::stod(parts[1]);
        n = std::stoi(parts[2]);
    } catch (const std::exception&) {
        throw UsageError("range must be start:stop:count, got " + s);
    }
    if (n < 1) throw UsageError("range count must be positive: " + s);
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = n == 1 ? a : a + (b - a) * i / (n - 1);
    return v;
}

int thread_count() {
    if (const char* e = std::getenv("HEOMCP_THREADS")) {
        int n = std::atoi(e);
        if (n > 0) return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

template <class F>
void parallel_for(size_t n, F f) {
    const size_t nt = std::min<size_t>(thread_count(), std::max<size_t>(n, 1));
    if (nt <= 1) {
        for (size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr err;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (size_t t = 0; t < nt; ++t)
        pool.emplace_back([&] {
            for (size_t i; (i = next++) < n;) {
                try {
                    f(i);
                } catch (...) {
                    std::lock_guard lk(mu);
                    if (!err) err = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

json options_json(const CertifyOptions& o) {
    return {{"tol_v", o.tol_v}, {"tol_psd", o.tol_psd}, {"tol_eq", o.tol_eq}, {"verify_rel", o.verify_rel},
            {"eps_pos", o.eps_pos}, {"n_char", o.n_char}};
}

void add_tolerance_options(CLI::App* sub, CertifyOptions& o) {
    sub->add_option("--tol-v", o.tol_v, "acceptance threshold on the SDP value")->capture_default_str();
    sub->add_option("--tol-psd", o.tol_psd, "semidefinite slack")->capture_default_str();
    sub->add_option("--eps-pos", o.eps_pos, "strictness margin at t_p")->capture_default_str();
}

std::string csv_header(const json& env) {
    // config travels as a comment line so CSV outputs stay reproducible too
    return "# " + env.dump() + "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Complete-positivity certificates for hierarchy equations of motion"};
    app.set_version_flag("--version", std::string(HEOMCP_VERSION));
    app.require_subcommand(1);
    app.fallthrough();

    std::string out_path;
    app.add_option("-o,--out", out_path, "output file (default stdout)");

    // models
    auto* c_models = app.add_subcommand("models", "list builtin models, or print one in the JSON model schema");
    ModelArgs ma_models;
    add_model_options(c_models, ma_models);

    // propagate
    auto* c_prop = app.add_subcommand("propagate", "propagate the reduced system and record chi(t)");
    ModelArgs ma_prop;
    add_model_options(c_prop, ma_prop);
    double prop_nchar = 20, prop_tend = 0;
    int prop_steps = 2000;
    std::string prop_format = "csv";
    c_prop->add_option("--n-char", prop_nchar, "horizon in characteristic times")->capture_default_str();
    auto* o_tend = c_prop->add_option("--t-end", prop_tend, "absolute horizon");
    o_tend->excludes(c_prop->get_option("--n-char"));
    c_prop->add_option("--steps", prop_steps, "time steps")->capture_default_str()->check(CLI::PositiveNumber);
    c_prop->add_option("--format", prop_format, "csv or json")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();

    // certify
    auto* c_cert = app.add_subcommand("certify", "certify complete positivity for all t >= 0");
    ModelArgs ma_cert;
    CertifyOptions co_cert;
    add_model_options(c_cert, ma_cert);
    add_tolerance_options(c_cert, co_cert);

    // certify-after-tp
    auto* c_ctp = app.add_subcommand("certify-after-tp", "certify positivity after a propagated t_p");
    ModelArgs ma_ctp;
    CertifyOptions co_ctp;
    double tp_override = 0;
    add_model_options(c_ctp, ma_ctp);
    add_tolerance_options(c_ctp, co_ctp);
    c_ctp->add_option("--tp", tp_override, "use this t_p instead of detecting it")->check(CLI::PositiveNumber);

    // bound-floor
    auto* c_floor = app.add_subcommand("bound-floor", "prove min eig chi(t) >= -delta_min");
    ModelArgs ma_floor;
    FloorOptions fo;
    double delta_min = 0;
    add_model_options(c_floor, ma_floor);
    add_tolerance_options(c_floor, fo.cert);
    c_floor->add_option("--delta-min", delta_min, "eigenvalue floor")->required()->check(CLI::NonNegativeNumber);

    // nonmarkov
    auto* c_nm = app.add_subcommand("nonmarkov", "trace-distance non-Markovianity measure");
    ModelArgs ma_nm;
    BlpOptions bo;
    double nm_horizon = 0;
    std::string nm_csv;
    add_model_options(c_nm, ma_nm);
    c_nm->add_option("--horizon", nm_horizon, "fixed horizon (default: extend until the backflow plateaus)")
        ->check(CLI::PositiveNumber);
    c_nm->add_option("--n-theta", bo.n_theta, "polar grid size")->capture_default_str()->check(CLI::PositiveNumber);
    c_nm->add_option("--n-phi", bo.n_phi, "azimuthal grid size")->capture_default_str()->check(CLI::PositiveNumber);
    c_nm->add_option("--csv", nm_csv, "write the accumulated backflow N(t) of the best pair");

    // synthesize
    auto* c_syn = app.add_subcommand("synthesize", "build a HEOM reproducing target dynamics");
    std::string syn_target;
    std::map<std::string, double> syn_vals;
    int max_depth = 6;
    std::string syn_model_out;
    c_syn->add_option("--target", syn_target, "target family")->required()->check(CLI::IsMember(target_names()));
    for (auto k : {"gamma", "omega", "alpha", "zeta"}) c_syn->add_option(std::string("--") + k, syn_vals[k], k);
    c_syn->add_option("--max-depth", max_depth, "hierarchy depth limit")->capture_default_str()->check(CLI::PositiveNumber);
    c_syn->add_option("--model-out", syn_model_out, "write the synthesized model (JSON model schema)");

    // sweep
    auto* c_sweep = app.add_subcommand("sweep", "parameter sweep, CSV output");
    ModelArgs ma_sweep;
    std::string at_range, bt_range;
    std::vector<std::string> vary;
    CertifyOptions co_sweep;
    add_model_options(c_sweep, ma_sweep);
    add_tolerance_options(c_sweep, co_sweep);
    c_sweep->add_option("--alpha-tilde", at_range, "reviving_3level region map: alpha range start:stop:count");
    c_sweep->add_option("--beta-tilde", bt_range, "reviving_3level region map: beta range start:stop:count");
    c_sweep->add_option("--vary", vary, "key=start:stop:count, certify at every grid point (at most two)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        json cfg;
        if (*c_models) {
            if (ma_models.name.empty() && ma_models.json_path.empty()) {
                json out = envelope("models", cfg);
                out["models"] = model_names();
                out["synthesis_targets"] = target_names();
                emit(out_path, dump(out));
                return 0;
            }
            auto m = load_model(ma_models, c_models, cfg);
            json out = envelope("models", cfg);
            out["model"] = model_to_json(m);
            emit(out_path, dump(out));
            return 0;
        }

        if (*c_prop) {
            auto m = load_model(ma_prop, c_prop, cfg);
            auto r = reduced_system(m);
            double T = prop_tend > 0 ? prop_tend : prop_nchar / slowest_decay_rate(r.l);
            cfg["t_end"] = T;
            cfg["steps"] = prop_steps;
            cfg["format"] = prop_format;
            auto tr = propagate(r, T, T / prop_steps);
            json out = envelope("propagate", cfg);
            if (prop_format == "csv") {
                std::ostringstream os;
                os << csv_header(out);
                write_trajectory_csv(tr, os);
                emit(out_path, os.str());
                return 0;
            }
            double mn = std::numeric_limits<double>::infinity();
            for (auto& ev : tr.eig) mn = std::min(mn, ev(0));
            out["min_eig"] = mn;
            out["h"] = detect_h(tr);
            json rows = json::array();
            for (size_t k = 0; k < tr.t.size(); ++k)
                rows.push_back({{"t", tr.t[k]},
                                {"lambda", vec_json(tr.lambda[k])},
                                {"eig", {tr.eig[k](0), tr.eig[k](1), tr.eig[k](2), tr.eig[k](3)}}});
            out["trajectory"] = rows;
            emit(out_path, dump(out));
            return 0;
        }

        if (*c_cert) {
            auto m = load_model(ma_cert, c_cert, cfg);
            cfg["options"] = options_json(co_cert);
            auto c = certify_model(m, co_cert);
            json out = envelope("certify", cfg);
            out["certificate"] = certificate_to_json(c);
            auto a = analytic_certificate(m);
            if (a.available) out["analytic"] = analytic_to_json(a);
            emit(out_path, dump(out));
            return c.ok() ? 0 : 1;
        }

        if (*c_ctp) {
            auto m = load_model(ma_ctp, c_ctp, cfg);
            cfg["options"] = options_json(co_ctp);
            std::optional<double> tp;
            if (c_ctp->count("--tp")) tp = tp_override, cfg["tp"] = tp_override;
            auto c = certify_after_tp(m, co_ctp, tp);
            json out = envelope("certify-after-tp", cfg);
            out["certificate"] = certificate_to_json(c);
            emit(out_path, dump(out));
            return c.ok() ? 0 : 1;
        }

        if (*c_floor) {
            auto m = load_model(ma_floor, c_floor, cfg);
            cfg["options"] = options_json(fo.cert);
            cfg["delta_min"] = delta_min;
            auto c = bound_eigenvalue_floor(m, delta_min, fo);
            json out = envelope("bound-floor", cfg);
            out["certificate"] = certificate_to_json(c);
            emit(out_path, dump(out));
            return c.ok() ? 0 : 1;
        }

        if (*c_nm) {
            auto m = load_model(ma_nm, c_nm, cfg);
            std::optional<double> hz;
            if (c_nm->count("--horizon")) hz = nm_horizon, cfg["horizon"] = nm_horizon;
            cfg["n_theta"] = bo.n_theta;
            cfg["n_phi"] = bo.n_phi;
            auto res = blp_measure(m, hz, bo);
            json out = envelope("nonmarkov", cfg);
            out["N"] = res.N;
            out["direction"] = {res.direction(0), res.direction(1), res.direction(2)};
            out["horizon"] = res.horizon;
            out["converged"] = res.converged;
            if (!nm_csv.empty()) {
                std::ofstream f(nm_csv);
                if (!f) throw UsageError("cannot write " + nm_csv);
                f << csv_header(out);
                write_blp_csv(f, res);
                out["csv"] = nm_csv;
            }
            emit(out_path, dump(out));
            return 0;
        }

        if (*c_syn) {
            Params p;
            for (auto& [k, v] : syn_vals)
                if (c_syn->count("--" + k)) p[k] = v;
            TargetDynamics t;
            try {
                t = build_target(syn_target, p);
            } catch (const std::invalid_argument& e) {
                throw UsageError(e.what());
            }
            cfg["target"] = syn_target;
            cfg["params"] = p;
            cfg["max_depth"] = max_depth;
            json out = envelope("synthesize", cfg);
            int rc = 0;
            try {
                auto res = synthesize_heom(t, max_depth);
                out["synthesis"] = synthesis_to_json(res);
                if (res.terminated) out["verify_deviation"] = verify_synthesis(res.model, t);
                auto pm = reference_model(t);
                out["reference_residuals"] = constraint_residuals(t, lower_blocks(pm));
                if (!syn_model_out.empty()) {
                    std::ofstream f(syn_model_out);
                    if (!f) throw UsageError("cannot write " + syn_model_out);
                    f << model_to_json(res.model).dump(2) << "\n";
                }
                rc = res.terminated ? 0 : 1;
            } catch (const std::runtime_error& e) {
                if (dynamic_cast<const UsageError*>(&e)) throw;
                out["error"] = e.what();
                rc = 1;
            }
            emit(out_path, dump(out));
            return rc;
        }

        if (*c_sweep) {
            bool region = c_sweep->count("--alpha-tilde") || c_sweep->count("--beta-tilde");
            if (region && !vary.empty()) throw UsageError("--vary conflicts with --alpha-tilde/--beta-tilde");
            cfg["options"] = options_json(co_sweep);
            std::ostringstream os;
            if (region) {
                if (ma_sweep.name != "reviving_3level")
                    throw UsageError("--alpha-tilde/--beta-tilde apply to --model reviving_3level only");
                if (at_range.empty() || bt_range.empty()) throw UsageError("region map needs both --alpha-tilde and --beta-tilde");
                auto A = parse_range(at_range), B = parse_range(bt_range);
                cfg["model"] = ma_sweep.name;
                cfg["alpha_tilde"] = at_range;
                cfg["beta_tilde"] = bt_range;
                std::vector<RegionPoint> pts(A.size() * B.size());
                parallel_for(pts.size(), [&](size_t i) {
                    pts[i] = classify_three_level(A[i / B.size()], B[i % B.size()], co_sweep);
                });
                os << csv_header(envelope("sweep", cfg));
                os << "alpha_tilde,beta_tilde,label,min_eig\n";
                os.precision(12);
                for (auto& p : pts) os << p.alpha_tilde << ',' << p.beta_tilde << ',' << p.label() << ',' << p.min_eig << '\n';
                emit(out_path, os.str());
                return 0;
            }
            if (vary.empty() || vary.size() > 2) throw UsageError("sweep needs one or two --vary key=start:stop:count");
            Params base = resolved_params(ma_sweep, c_sweep);
            if (!ma_sweep.json_path.empty()) throw UsageError("sweep works on builtin models");
            if (ma_sweep.name.empty()) throw UsageError("--model is required");
            std::vector<std::string> keys;
            std::vector<std::vector<double>> axes;
            for (auto& v : vary) {
                auto eq = v.find('=');
                if (eq == std::string::npos) throw UsageError("--vary expects key=start:stop:count");
                keys.push_back(v.substr(0, eq));
                axes.push_back(parse_range(v.substr(eq + 1)));
            }
            if (axes.size() == 1) axes.push_back({0.0});
            size_t n1 = axes[1].size();
            cfg["model"] = ma_sweep.name;
            cfg["params"] = base;
            cfg["vary"] = vary;
            // surface model errors before spending time on the grid
            {
                Params p = base;
                p[keys[0]] = axes[0][0];
                if (keys.size() > 1) p[keys[1]] = axes[1][0];
                try {
                    build_model(ma_sweep.name, p);
                } catch (const std::invalid_argument& e) {
                    throw UsageError(e.what());
                }
            }
            struct Row {
                std::string status;
                double min_eig;
            };
            std::vector<Row> rows(axes[0].size() * n1);
            parallel_for(rows.size(), [&](size_t i) {
                Params p = base;
                p[keys[0]] = axes[0][i / n1];
                if (keys.size() > 1) p[keys[1]] = axes[1][i % n1];
                auto m = build_model(ma_sweep.name, p);
                auto c = certify_model(m, co_sweep);
                auto r = reduced_system(m);
                auto hz = default_horizon(r);
                auto tr = propagate(r, hz.t_end, hz.dt);
                double mn = std::numeric_limits<double>::infinity();
                for (auto& ev : tr.eig) mn = std::min(mn, ev(0));
                rows[i] = {c.status, mn};
            });
            os << csv_header(envelope("sweep", cfg));
            os << keys[0];
            if (keys.size() > 1) os << ',' << keys[1];
            os << ",status,min_eig\n";
            os.precision(12);
            for (size_t i = 0; i < rows.size(); ++i) {
                os << axes[0][i / n1];
                if (keys.size() > 1) os << ',' << axes[1][i % n1];
                os << ',' << rows[i].status << ',' << rows[i].min_eig << '\n';
            }
            emit(out_path, os.str());
            return 0;
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        // numerical breakdown: nothing was certified
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
