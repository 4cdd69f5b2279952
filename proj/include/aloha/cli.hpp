// Command-line front end: eval, optimize, regions, simulate, examples.
//
// Everything a command prints is assembled in memory first and written only
// once the command has succeeded, so error paths never leave partial output.
#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "aloha/closed_form.hpp"
#include "aloha/io.hpp"
#include "aloha/optimizer.hpp"
#include "aloha/reproduce.hpp"
#include "aloha/simulator.hpp"

namespace aloha::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNoConvergence = 3;
inline constexpr int kExitStatisticalFailure = 4;

class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct KRange {
    int first = 0;
    int last = 0;
};

/// "a..b" (inclusive) or a single integer.
inline KRange parse_k_range(const std::string& text) {
    auto to_int = [&](const std::string& s) {
        if (s.empty() || !std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); }))
            throw UsageError("bad K range '" + text + "' (expected N or A..B)");
        return std::stoi(s);
    };
    const auto dots = text.find("..");
    KRange r;
    if (dots == std::string::npos) {
        r.first = r.last = to_int(text);
    } else {
        r.first = to_int(text.substr(0, dots));
        r.last = to_int(text.substr(dots + 2));
    }
    if (r.first > r.last) throw UsageError("empty K range '" + text + "'");
    return r;
}

// ---------------------------------------------------------------------------
// Config file merging
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline bool mentions(const std::vector<std::string>& args, const std::string& key) {
    const auto flag = "--" + key;
    return std::any_of(args.begin(), args.end(),
                       [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
}

}  // namespace detail

/// Expands `--config FILE` into extra arguments. The file holds `key=value`
/// lines (`#` starts a comment); a key already given on the command line is
/// skipped, so command-line flags always win. `true`/`false` values toggle
/// flags.
inline std::vector<std::string> merge_config(std::vector<std::string> args) {
    std::optional<std::string> path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw UsageError("--config needs a file name");
            path = args[i + 1];
            args.erase(args.begin() + i, args.begin() + i + 2);
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            args.erase(args.begin() + i);
            break;
        }
    }
    if (!path) return args;
    std::ifstream in(*path);
    if (!in) throw UsageError("cannot read config file '" + *path + "'");
    const bool family_given = detail::mentions(args, "finite") || detail::mentions(args, "poisson");
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = detail::trim(line.substr(0, line.find('#')));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError(*path + ":" + std::to_string(lineno) + ": expected key=value");
        const auto key = detail::trim(line.substr(0, eq));
        const auto value = detail::trim(line.substr(eq + 1));
        if (detail::mentions(args, key)) continue;
        if ((key == "finite" || key == "poisson") && family_given) continue;
        if (value == "true") {
            args.push_back("--" + key);
        } else if (value != "false") {
            args.push_back("--" + key);
            args.push_back(value);
        }
    }
    return args;
}

// ---------------------------------------------------------------------------
// Shared model flags
// ---------------------------------------------------------------------------

struct ModelFlags {
    bool finite = false;
    bool poisson = false;
    std::optional<int> n;
    std::optional<double> q;
    std::optional<double> lambda;
    double epsilon = 0.0;
    std::string variant = "preemptive";
};

inline void add_model_flags(CLI::App& cmd, ModelFlags& f) {
    auto* fin = cmd.add_flag("--finite", f.finite, "Finite population of Markov sources");
    auto* poi = cmd.add_flag("--poisson", f.poisson, "Infinite population (Poisson arrivals)");
    fin->excludes(poi);
    cmd.add_option("--n", f.n, "Number of sources N (finite)");
    cmd.add_option("--q", f.q, "Per-slot activation probability q (finite)");
    cmd.add_option("--lambda", f.lambda,
                   "Arrival rate; for --finite without --q, sets q = lambda / (N - lambda)");
    cmd.add_option("--epsilon", f.epsilon, "Noise loss probability on a lone transmission")->required();
    cmd.add_option("--variant", f.variant, "preemptive | history");
}

using AnyModel = std::variant<FiniteModel, PoissonModel>;

inline AnyModel resolve_model(const ModelFlags& f, int k) {
    if (f.finite == f.poisson) throw UsageError("choose exactly one of --finite or --poisson");
    if (f.poisson) {
        if (!f.lambda) throw UsageError("--poisson needs --lambda");
        PoissonModel m{*f.lambda, f.epsilon, k};
        validate(m);
        return m;
    }
    if (!f.n) throw UsageError("--finite needs --n");
    double q = 0.0;
    if (f.q) {
        q = *f.q;
    } else if (f.lambda) {
        q = q_for_rate(*f.n, *f.lambda);
    } else {
        throw UsageError("--finite needs --q or --lambda");
    }
    FiniteModel m{*f.n, q, f.epsilon, k};
    validate(m);
    return m;
}

inline nlohmann::json model_parameters(const ModelFlags& f) {
    nlohmann::json p;
    p["family"] = f.poisson ? "poisson" : "finite";
    if (f.n) p["n"] = *f.n;
    if (f.q) p["q"] = io::json_number(*f.q);
    if (f.lambda) p["lambda"] = io::json_number(*f.lambda);
    p["epsilon"] = io::json_number(f.epsilon);
    p["variant"] = f.variant;
    return p;
}

inline io::OutputRecord base_record(const std::string& scenario, const AnyModel& model, Variant v) {
    io::OutputRecord r;
    r.scenario = scenario;
    if (const auto* m = std::get_if<FiniteModel>(&model)) {
        r.family = "finite";
        r.n = m->n_users;
        r.q = m->q;
        r.lambda = arrival_rate(*m);
        r.epsilon = m->epsilon;
        r.k = m->k_retx;
        r.variant = to_string(v);
    } else {
        const auto& p = std::get<PoissonModel>(model);
        r.family = "poisson";
        r.lambda = p.lambda;
        r.epsilon = p.epsilon;
        r.k = p.k_retx;
        r.variant = "none";
    }
    return r;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct Context {
    std::ostringstream out;
    std::ostream& err;
    io::Format format = io::Format::table;
};

inline int cmd_eval(Context& ctx, const ModelFlags& flags, const std::string& k_text) {
    const auto range = parse_k_range(k_text);
    const auto variant = parse_variant(flags.variant);
    std::vector<io::OutputRecord> rows;
    for (int k = range.first; k <= range.last; ++k) {
        const auto model = resolve_model(flags, k);
        auto r = base_record("eval", model, variant);
        r.provenance = "analytic";
        if (const auto* m = std::get_if<FiniteModel>(&model)) {
            const bool hist = variant == Variant::history;
            const double v = hist ? v_finite_history(*m) : v_finite(*m);
            const auto w = SystemProbability::of(arrival_rate(*m) * v);
            if (w.above_one)
                ctx.err << "warning: W=" << io::format_number(w.value) << " exceeds 1 at K=" << k << '\n';
            r.metric = hist ? "V_hist" : "V";
            r.value = v;
            r.extras = {{hist ? "1-V_hist" : "1-V", 1.0 - v}, {hist ? "W_hist" : "W", w.value}};
        } else {
            const auto& p = std::get<PoissonModel>(model);
            const double v = v_infinite(p);
            r.metric = "V_inf";
            r.value = v;
            r.extras = {{"1-V_inf", 1.0 - v}, {"W_inf", w_infinite(p)}};
        }
        rows.push_back(std::move(r));
    }
    auto params = model_parameters(flags);
    params["k"] = k_text;
    io::write_records(ctx.out, ctx.format, rows, params);
    return kExitOk;
}

inline int cmd_optimize(Context& ctx, const ModelFlags& flags, std::optional<int> k_cap, bool newton,
                        int newton_max_iter = 100) {
    const auto variant = parse_variant(flags.variant);
    const auto probe = resolve_model(flags, 0);
    std::vector<io::OutputRecord> rows;
    double rate = 0.0;
    int k_star = 0;
    AnyModel best = probe;
    const WarningSink warn = [&](const std::string& m) { ctx.err << "warning: " << m << '\n'; };
    if (const auto* m = std::get_if<FiniteModel>(&probe)) {
        k_star = variant == Variant::history ? optimal_k_finite_history(*m, k_cap) : optimal_k_finite(*m, k_cap);
        auto at = *m;
        at.k_retx = k_star;
        best = at;
        rate = arrival_rate(*m);
        const double v = variant == Variant::history ? v_finite_history(at) : v_finite(at);
        auto r = base_record("optimize", best, variant);
        r.metric = "K_star";
        r.value = k_star;
        r.provenance = "optimizer";
        rows.push_back(r);
        r.provenance = "analytic";
        r.metric = variant == Variant::history ? "V_hist" : "V";
        r.value = v;
        rows.push_back(r);
        r.metric = variant == Variant::history ? "W_hist" : "W";
        r.value = rate * v;
        rows.push_back(r);
    } else {
        const auto& p = std::get<PoissonModel>(probe);
        rate = p.lambda;
        k_star = optimal_k_infinite(p.lambda, p.epsilon, k_cap, p.epsilon > 0.0 ? warn : WarningSink{});
        best = PoissonModel{p.lambda, p.epsilon, k_star};
        auto r = base_record("optimize", best, variant);
        r.metric = "K_star";
        r.value = k_star;
        r.provenance = "optimizer";
        rows.push_back(r);
        r.provenance = "analytic";
        r.metric = "V_inf";
        r.value = v_infinite(std::get<PoissonModel>(best));
        rows.push_back(r);
        r.metric = "W_inf";
        r.value = w_infinite(std::get<PoissonModel>(best));
        rows.push_back(r);
    }

    bool converged = true;
    if (newton) {
        if (!(flags.epsilon > 0.0)) throw UsageError("--newton needs epsilon in (0, 1)");
        NewtonOptions nopt;
        nopt.max_iter = newton_max_iter;
        const auto root = solve_xstar(rate, flags.epsilon, nopt);
        converged = root.converged;
        auto r = base_record("optimize", best, variant);
        r.metric = "x_star";
        r.value = root.x_star;
        r.provenance = "optimizer";
        r.extras = {{"newton_lambda", rate},
                    {"iterations", static_cast<double>(root.iterations)},
                    {"residual", root.residual},
                    {"converged", root.converged ? 1.0 : 0.0},
                    {"k_newton", static_cast<double>(newton_k(root))}};
        rows.push_back(std::move(r));
        if (!converged) ctx.err << "error: Newton iteration did not converge\n";
    }
    auto params = model_parameters(flags);
    if (k_cap) params["k_cap"] = *k_cap;
    params["newton"] = newton;
    io::write_records(ctx.out, ctx.format, rows, params);
    return converged ? kExitOk : kExitNoConvergence;
}

struct RegionFlags {
    double eps_min = 0.01, eps_max = 0.99;
    int eps_points = 99;
    double lambda_min = 0.01, lambda_max = 0.75;
    int lambda_points = 75;
    std::optional<int> k_cap;
    bool bucket = false;
    unsigned threads = 1;
};

inline int cmd_regions(Context& ctx, const RegionFlags& f) {
    const auto grid = region_grid({f.eps_min, f.eps_max, f.eps_points},
                                  {f.lambda_min, f.lambda_max, f.lambda_points}, {f.k_cap, f.threads});
    if (ctx.format == io::Format::json) {
        nlohmann::json params{{"epsilon_range", {io::json_number(f.eps_min), io::json_number(f.eps_max)}},
                              {"epsilon_points", f.eps_points},
                              {"lambda_range", {io::json_number(f.lambda_min), io::json_number(f.lambda_max)}},
                              {"lambda_points", f.lambda_points},
                              {"bucket", f.bucket}};
        if (f.k_cap) params["k_cap"] = *f.k_cap;
        ctx.out << io::document(params, io::region_to_json(grid, f.bucket)).dump(2) << '\n';
    } else {
        io::write_region_csv(ctx.out, grid, f.bucket);
    }
    return kExitOk;
}

struct SimFlags {
    int k = 0;
    std::int64_t slots = 10'000'000;
    int replications = 20;
    std::optional<std::int64_t> warmup;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::string dump_path;
};

inline int cmd_simulate(Context& ctx, const ModelFlags& flags, const SimFlags& s) {
    SimConfig cfg;
    cfg.model = resolve_model(flags, s.k);
    cfg.variant = parse_variant(flags.variant);
    if (s.replications < 1) throw UsageError("--replications must be positive");
    cfg.replications = s.replications;
    cfg.horizon_slots = s.slots / s.replications;
    cfg.warmup_slots = s.warmup;
    cfg.seed = s.seed;
    cfg.threads = s.threads;
    validate(cfg);
    const auto rep = compare_with_analytic(cfg);

    const auto& st = rep.stats;
    const bool finite = std::holds_alternative<FiniteModel>(cfg.model);
    const std::string v_name = finite ? (cfg.variant == Variant::history ? "V_hist" : "V") : "V_inf";
    const std::string w_name = finite ? (cfg.variant == Variant::history ? "W_hist" : "W") : "W_inf";
    std::vector<io::OutputRecord> rows;
    auto r = base_record("simulate", cfg.model, cfg.variant);
    r.provenance = "simulated";
    r.metric = "v_hat";
    r.value = st.v_hat;
    r.extras = {{"stderr", st.v_stderr}, {"analytic", rep.v_analytic}, {"z", rep.z_v}, {"pass", rep.pass_v ? 1.0 : 0.0}};
    rows.push_back(r);
    r.metric = "w_hat";
    r.value = st.w_hat;
    r.extras = {{"stderr", st.w_stderr}, {"analytic", rep.w_analytic}, {"z", rep.z_w}, {"pass", rep.pass_w ? 1.0 : 0.0}};
    rows.push_back(r);
    r.provenance = "analytic";
    r.extras.clear();
    r.metric = v_name;
    r.value = rep.v_analytic;
    rows.push_back(r);
    r.metric = w_name;
    r.value = rep.w_analytic;
    rows.push_back(r);
    if (rep.v_enumerated) {
        r.metric = v_name + "_enumerated";
        r.value = *rep.v_enumerated;
        rows.push_back(r);
    }
    r.provenance = "simulated";
    r.metric = "arrivals";
    r.value = static_cast<double>(st.arrivals);
    rows.push_back(r);
    r.metric = "delivered_messages";
    r.value = static_cast<double>(st.delivered_messages);
    rows.push_back(r);

    auto params = model_parameters(flags);
    params["k"] = s.k;
    params["slots"] = s.slots;
    params["replications"] = s.replications;
    params["horizon_per_replication"] = cfg.horizon_slots;
    params["warmup_per_replication"] = warmup_of(cfg);

    if (ctx.format == io::Format::json) {
        nlohmann::json records = nlohmann::json::array();
        for (const auto& row : rows) records.push_back(io::to_json(row));
        nlohmann::json results{{"records", records}, {"stats", io::to_json(st)}, {"pass", rep.pass()}};
        ctx.out << io::document(params, results, s.seed).dump(2) << '\n';
    } else {
        io::write_records(ctx.out, ctx.format, rows, params, s.seed);
        if (ctx.format == io::Format::table)
            ctx.out << "result: " << (rep.pass() ? "PASS" : "FAIL") << " at " << kZThreshold << " sigma\n";
    }
    if (!s.dump_path.empty()) {
        std::ofstream dump(s.dump_path);
        if (!dump) throw UsageError("cannot write '" + s.dump_path + "'");
        io::write_replications_csv(dump, st);
    }
    return rep.pass() ? kExitOk : kExitStatisticalFailure;
}

inline int cmd_examples(Context& ctx, int which, const std::string& curves_dir) {
    std::vector<int> ids;
    if (which == 0) {
        for (int i = 1; i <= reproduce::kNumExamples; ++i) ids.push_back(i);
    } else {
        ids.push_back(which);
    }
    std::vector<reproduce::ExampleReport> reports;
    for (int id : ids) reports.push_back(reproduce::example(id));

    for (const auto& rep : reports) {
        if (curves_dir.empty()) continue;
        const auto path = curves_dir + "/example" + std::to_string(rep.id) + "_curves.csv";
        std::ofstream f(path);
        if (!f) throw UsageError("cannot write '" + path + "'");
        io::write_csv(f, rep.curves);
    }

    if (ctx.format == io::Format::json) {
        nlohmann::json results = nlohmann::json::array();
        for (const auto& rep : reports) {
            nlohmann::json h = nlohmann::json::array();
            for (const auto& row : rep.headlines) h.push_back(io::to_json(row));
            results.push_back({{"id", rep.id}, {"title", rep.title}, {"headlines", h}, {"notes", rep.notes}});
        }
        ctx.out << io::document({{"example", which}}, results).dump(2) << '\n';
        return kExitOk;
    }
    std::vector<io::OutputRecord> all;
    for (const auto& rep : reports) all.insert(all.end(), rep.headlines.begin(), rep.headlines.end());
    if (ctx.format == io::Format::csv) {
        io::write_csv(ctx.out, all);
        for (const auto& rep : reports)
            for (const auto& n : rep.notes) ctx.err << "note: example" << rep.id << ": " << n << '\n';
        return kExitOk;
    }
    for (const auto& rep : reports) {
        ctx.out << "== Example " << rep.id << ": " << rep.title << " ==\n";
        io::write_table(ctx.out, rep.headlines);
        for (const auto& n : rep.notes) ctx.out << "note: " << n << '\n';
        ctx.out << '\n';
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

/// Runs the tool on `args` (without the program name). Output goes to `out`
/// only when the command completes; diagnostics go to `err`.
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Delivery probability, optimal retransmissions and Monte Carlo checks for noisy "
                 "slotted random access",
                 "aloha-retx"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string format = "table";
    app.add_option("--format", format, "table | csv | json")->check(CLI::IsMember({"table", "csv", "json"}));
    app.add_option("--config", "key=value file merged under the command-line flags");

    ModelFlags eval_flags, opt_flags, sim_flags_model;
    std::string k_text = "0";
    auto* eval = app.add_subcommand("eval", "Evaluate delivery probabilities over a K range");
    add_model_flags(*eval, eval_flags);
    eval->add_option("--k", k_text, "K or inclusive range A..B");

    std::optional<int> k_cap;
    bool newton = false;
    auto* optimize = app.add_subcommand("optimize", "Find the optimal number of retransmissions");
    add_model_flags(*optimize, opt_flags);
    optimize->add_option("--k-cap", k_cap, "Largest K scanned");
    optimize->add_flag("--newton", newton, "Also solve the continuous relaxation");
    int newton_max_iter = 100;
    optimize->add_option("--newton-max-iter", newton_max_iter, "Newton iteration limit")
        ->check(CLI::NonNegativeNumber);

    RegionFlags rf;
    auto* regions = app.add_subcommand("regions", "Optimal-K map over (epsilon, lambda)");
    regions->add_option("--eps-min", rf.eps_min);
    regions->add_option("--eps-max", rf.eps_max);
    regions->add_option("--eps-points", rf.eps_points);
    regions->add_option("--lambda-min", rf.lambda_min);
    regions->add_option("--lambda-max", rf.lambda_max);
    regions->add_option("--lambda-points", rf.lambda_points);
    regions->add_option("--k-cap", rf.k_cap, "Largest K scanned per cell");
    regions->add_flag("--bucket", rf.bucket, "Report every K* >= 5 as 5");
    regions->add_option("--threads", rf.threads);

    SimFlags sf;
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo run checked against the closed form");
    add_model_flags(*simulate, sim_flags_model);
    simulate->add_option("--k", sf.k, "Retransmissions K");
    simulate->add_option("--slots", sf.slots, "Total slots, split evenly across replications");
    simulate->add_option("--replications", sf.replications, "Independent replications (batch means)");
    simulate->add_option("--warmup", sf.warmup, "Warmup slots per replication (default 10(K+1))");
    simulate->add_option("--seed", sf.seed, "Random seed")->required();
    simulate->add_option("--threads", sf.threads);
    simulate->add_option("--dump-replications", sf.dump_path, "Write per-replication tallies as CSV");

    int which = 0;
    std::string curves_dir;
    auto* examples = app.add_subcommand("examples", "Reproduce the worked examples");
    examples->add_option("--example", which, "1..5, or 0 for all")->check(CLI::Range(0, reproduce::kNumExamples));
    examples->add_option("--curves-dir", curves_dir, "Directory for per-example curve CSVs");

    Context ctx{std::ostringstream{}, err};
    try {
        args = merge_config(std::move(args));
        std::reverse(args.begin(), args.end());
        app.parse(args);
        ctx.format = io::parse_format(format);
        int code = kExitOk;
        if (*eval) code = cmd_eval(ctx, eval_flags, k_text);
        else if (*optimize) code = cmd_optimize(ctx, opt_flags, k_cap, newton, newton_max_iter);
        else if (*regions) code = cmd_regions(ctx, rf);
        else if (*simulate) code = cmd_simulate(ctx, sim_flags_model, sf);
        else if (*examples) code = cmd_examples(ctx, which, curves_dir);
        out << ctx.out.str();
        return code;
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::logic_error& e) {
        // DomainError, SizeError
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
}

}  // namespace aloha::cli
