#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "CLI11.hpp"

#include "chainbsde/csv.hpp"

namespace chainbsde::app {

namespace fs = std::filesystem;

namespace {

constexpr int kResidualSteps = 10000;
constexpr int kResidualPaths = 10;

CheckRecord bound_record(std::string name, double value, double bound) {
    return {std::move(name), value, bound, 0.0, value <= bound};
}

CheckRecord contraction_record(const ContractionCheck& c) {
    return {"contraction_margin", c.worst_margin, 0.0, 0.0, c.holds};
}

bool all_pass(const std::vector<CheckRecord>& records) {
    return std::all_of(records.begin(), records.end(), [](const CheckRecord& r) { return r.pass; });
}

void write(const fs::path& file, const csv::Table& table, std::ostream& log) {
    csv::write_table(file, table);
    log << "wrote " << file.string() << '\n';
}

csv::Table obstacle_table(const StateGridFunction& g) {
    csv::Table t{{"time", "state", "g"}, {}};
    for (int k = 0; k < g.grid.nodes(); ++k)
        for (int i = 0; i < g.n_states(); ++i)
            t.rows.push_back({csv::format(g.grid.time(k)), std::to_string(i), csv::format(g(k, i))});
    return t;
}

csv::Table contraction_table(const ContractionReport& r) {
    csv::Table t{{"constant", "value"}, {}};
    const std::pair<const char*, double> entries[] = {
        {"c1", r.c1}, {"c4", r.c4}, {"c5", r.c5}, {"c6", r.c6}, {"exact_l2", r.exact_l2}, {"m", r.m},
        {"c6_margin", r.check.worst_margin}, {"exact_margin", r.exact_check.worst_margin}};
    for (const auto& [name, value] : entries) t.rows.push_back({name, csv::format(value)});
    return t;
}

void report(const std::vector<CheckRecord>& records, std::ostream& log) {
    for (const auto& r : records)
        log << (r.pass ? "PASS " : "FAIL ") << r.name << " lhs=" << csv::format(r.lhs) << " rhs=" << csv::format(r.rhs)
            << '\n';
}

// Obstacle for solve-rbsde / verify; put obstacles need stock curves.
struct ObstacleSetup {
    std::optional<StockCurves> curves;
    Obstacle obstacle;
};

ObstacleSetup obstacle_setup(const RunConfig& c) {
    ObstacleSetup s;
    if (c.obstacle.type == "put") s.curves = make_curves(c, c.solver.steps);
    s.obstacle = make_obstacle(c, s.curves ? &*s.curves : nullptr);
    return s;
}

void require_market(const RunConfig& c, const char* job) {
    if (!c.market) throw ConfigError(std::string(job) + " needs a market section");
    if (!c.payoff.present()) throw ConfigError(std::string(job) + " needs a payoff");
}

std::vector<CheckRecord> replication_records(const RunConfig& c, const MarketSpec& market, const StockCurves& curves,
                                             const HedgeStrategy& strategy, const Payoff& payoff) {
    ReplicationReport worst;
    worst.min_surplus = std::numeric_limits<double>::infinity();
    for (long p = 0; p < c.solver.replication_paths; ++p) {
        const auto path = simulate_path(c.chain, c.solver.seed + static_cast<std::uint64_t>(p));
        const auto r = replicate_forward(market, curves, strategy, payoff, path);
        worst.max_gap = std::max(worst.max_gap, r.max_gap);
        worst.dominates = worst.dominates && r.dominates;
        worst.min_surplus = std::min(worst.min_surplus, r.min_surplus);
    }
    return {bound_record("hedge_solve_residual", strategy.solve_residual, 1e-12),
            bound_record("replication_max_gap", worst.max_gap, 1e-6),
            {"replication_dominates", worst.min_surplus, 0.0, 0.0, worst.dominates}};
}

struct Priced {
    StockCurves curves;
    Payoff payoff;
    RbsdeSolution solution;
};

Priced price(const RunConfig& c, int steps) {
    StockCurves curves = make_curves(c, steps);
    Payoff payoff = make_payoff(c, &curves);
    RbsdeSolution solution = price_american(*c.market, payoff, steps, c.solver.predictor);
    return {std::move(curves), std::move(payoff), std::move(solution)};
}

int job_validate(const RunConfig& c, std::ostream& log) {
    const MarkovDriver driver = make_driver(c);
    std::vector<CheckRecord> records{contraction_record(check_contraction(c.chain, driver.lipschitz_z, c.solver.steps))};
    std::optional<ContractionReport> contraction;
    if (c.market) {
        contraction = contraction_report(*c.market, c.solver.steps);
        records.push_back({"hedge_contraction_margin", contraction->exact_check.worst_margin, 0.0, 0.0,
                           contraction->exact_check.holds});
        double r_sup = -std::numeric_limits<double>::infinity();
        for (double t : merge_breakpoints({0.0}, c.market->breakpoints(), c.chain.horizon()))
            for (int i = 0; i < c.chain.n_states(); ++i) r_sup = std::max(r_sup, short_rate(*c.market, t, i));
        records.push_back(bound_record("short_rate_max", r_sup, c.market->r_max));
    }
    if (c.obstacle.present()) {
        const auto s = obstacle_setup(c);
        records.push_back({"terminal_compatible", 0.0, 0.0, 0.0,
                           s.obstacle.terminal_compatible(make_terminal(c), c.chain.horizon())});
    }
    report(records, log);
    write(c.output_dir / "report.csv", csv::report_table(records), log);
    if (contraction) write(c.output_dir / "contraction.csv", contraction_table(*contraction), log);
    return all_pass(records) ? kOk : kCheckFailed;
}

int job_simulate(const RunConfig& c, std::ostream& log) {
    for (int p = 0; p < c.solver.simulate_paths; ++p) {
        const std::uint64_t seed = c.solver.seed + static_cast<std::uint64_t>(p);
        write(c.output_dir / "paths" / ("path_" + std::to_string(seed) + ".csv"),
              csv::path_table(simulate_path(c.chain, seed)), log);
    }
    return kOk;
}

int job_solve_bsde(const RunConfig& c, std::ostream& log) {
    const MarkovDriver driver = make_driver(c);
    const auto sol = solve_bsde(c.chain, driver, make_terminal(c), c.solver.steps, c.solver.scheme,
                                c.solver.strict_contraction);
    const std::vector<CheckRecord> records{contraction_record(sol.contraction)};
    write(c.output_dir / "bsde.csv", csv::bsde_table(sol.y), log);
    write(c.output_dir / "report.csv", csv::report_table(records), log);
    log << "Y_0 = " << csv::format(sol.y(0, c.chain.initial_state())) << '\n';
    return kOk;
}

int job_solve_rbsde(const RunConfig& c, std::ostream& log) {
    if (!c.obstacle.present()) throw ConfigError("solve-rbsde needs an obstacle");
    const MarkovDriver driver = make_driver(c);
    const Vector terminal = make_terminal(c);
    const auto contraction = check_contraction(c.chain, driver.lipschitz_z, c.solver.steps);
    if (c.solver.strict_contraction && !contraction.holds)
        throw ContractionViolated("driver does not satisfy the contraction condition");
    const auto s = obstacle_setup(c);
    const auto sol = solve_reflected(c.chain, driver, terminal, s.obstacle, c.solver.steps, c.solver.predictor);
    write(c.output_dir / "rbsde.csv", csv::rbsde_table(sol), log);
    write(c.output_dir / "obstacle.csv", obstacle_table(s.obstacle.sample(sol.v.grid, c.chain.n_states())), log);
    std::vector<CheckRecord> records{contraction_record(contraction),
                                     bound_record("skorokhod", std::abs(skorokhod_integral(sol, s.obstacle)), 1e-9)};
    if (c.solver.penalization) {
        try {
            const auto lim = penalization_limit(c.chain, driver, terminal, s.obstacle, c.solver.steps,
                                                c.solver.penalization_tol);
            write(c.output_dir / "trace.csv", csv::trace_table(lim.penalization_trace), log);
            // the two schemes differ by O(dt), so this is reported, not gated
            log << "penalization limit vs reflected: " << csv::format(sup_distance(lim.v, sol.v)) << '\n';
        } catch (const NoConvergence& e) {
            write(c.output_dir / "trace.csv", csv::trace_table(e.trace()), log);
            throw;
        }
    }
    report(records, log);
    write(c.output_dir / "report.csv", csv::report_table(records), log);
    log << "V_0 = " << csv::format(sol.v(0, c.chain.initial_state())) << '\n';
    return all_pass(records) ? kOk : kCheckFailed;
}

int job_price(const RunConfig& c, std::ostream& log, bool with_hedge) {
    require_market(c, with_hedge ? "hedge" : "price-american");
    const MarketSpec& market = *c.market;
    const auto contraction = contraction_report(market, c.solver.steps);
    if (c.solver.strict_contraction && !contraction.exact_check.holds)
        throw ContractionViolated("hedging driver does not satisfy the contraction condition");
    const int steps = with_hedge ? c.solver.replication_steps : c.solver.steps;
    const Priced p = price(c, steps);
    write(c.output_dir / "rbsde.csv", csv::rbsde_table(p.solution), log);
    write(c.output_dir / "obstacle.csv", obstacle_table(p.payoff.obstacle().sample(p.solution.v.grid, market.n_states())),
          log);
    write(c.output_dir / "stocks.csv", csv::stocks_table(p.curves), log);
    write(c.output_dir / "contraction.csv", contraction_table(contraction), log);
    std::vector<CheckRecord> records{
        {"hedge_contraction_margin", contraction.exact_check.worst_margin, 0.0, 0.0, contraction.exact_check.holds}};
    if (with_hedge) {
        const auto strategy = extract_hedge(market, p.curves, p.solution);
        write(c.output_dir / "hedge.csv", csv::hedge_table(strategy), log);
        const auto rep = replication_records(c, market, p.curves, strategy, p.payoff);
        records.insert(records.end(), rep.begin(), rep.end());
    }
    report(records, log);
    write(c.output_dir / "report.csv", csv::report_table(records), log);
    log << "V_0 = " << csv::format(p.solution.v(0, c.chain.initial_state())) << '\n';
    return all_pass(records) ? kOk : kCheckFailed;
}

int job_verify(const RunConfig& c, std::ostream& log) {
    const int n = c.chain.n_states();
    const MarkovDriver driver = make_driver(c);
    const Vector terminal = make_terminal(c);
    const auto& o = c.solver;
    std::vector<CheckRecord> records;
    auto note = [&](const CheckRecord& r) {
        records.push_back(r);
        report({r}, log);
    };

    const auto bsde = solve_bsde(c.chain, driver, terminal, o.steps, o.scheme, o.strict_contraction);
    note(contraction_record(bsde.contraction));

    Vector z = c.verify_z.value_or(Vector::Unit(n, 0));
    note(isometry_check(c.chain, z, o.n_paths, o.seed).record());

    double residual = 0.0;
    for (int p = 0; p < kResidualPaths; ++p)
        residual = std::max(residual, pathwise_residual(bsde, simulate_path(c.chain, o.seed + p), c.chain, driver,
                                                        terminal));
    note(bound_record("bsde_pathwise_residual", residual, 1e-6));

    if (c.obstacle.present()) {
        const auto s = obstacle_setup(c);
        const auto sol = solve_reflected(c.chain, driver, terminal, s.obstacle, o.steps, o.predictor);
        const auto snell = snell_oracle(c.chain, driver, terminal, s.obstacle, o.steps, o.predictor);
        note(bound_record("reflected_vs_snell", sup_distance(sol.v, snell), 1e-12));
        note(bound_record("skorokhod", std::abs(skorokhod_integral(sol, s.obstacle)), 1e-9));
        double below = 0.0;
        for (int k = 0; k < sol.v.grid.nodes(); ++k)
            for (int i = 0; i < n; ++i) below = std::max(below, s.obstacle(sol.v.grid.time(k), i) - sol.v(k, i));
        note(bound_record("obstacle_domination", below, 0.0));
        if (o.penalization) {
            const auto lim = penalization_limit(c.chain, driver, terminal, s.obstacle, o.steps, o.penalization_tol);
            note(bound_record("penalization_vs_reflected", sup_distance(lim.v, sol.v), o.penalization_tol));
        }
    }

    if (c.market) {
        const MarketSpec& market = *c.market;
        const StockCurves fine = make_curves(c, kResidualSteps);
        double sdf_res = 0.0;
        double stock_res = 0.0;
        for (int p = 0; p < kResidualPaths; ++p) {
            const auto path = simulate_path(c.chain, o.seed + p);
            sdf_res = std::max(sdf_res, sdf_dynamics_residual(market, path, kResidualSteps));
            stock_res = std::max(stock_res, stock_sde_residual(market, fine, path, kResidualSteps));
        }
        note(bound_record("sdf_dynamics_residual", sdf_res, 1e-8));
        note(bound_record("stock_sde_residual", stock_res, 1e-8));

        const auto contraction = contraction_report(market, o.steps);
        note({"hedge_contraction_margin", contraction.exact_check.worst_margin, 0.0, 0.0,
              contraction.exact_check.holds});

        std::optional<Payoff> payoff;
        std::optional<StockCurves> curves;
        if (c.payoff.present()) {
            curves = make_curves(c, o.steps);
            payoff = make_payoff(c, &*curves);
        }
        const Vector claim = payoff ? payoff->terminal : terminal;
        note(european_consistency(market, claim, o.n_paths, o.steps, o.seed).record());

        if (payoff) {
            const auto sol = price_american(market, *payoff, o.steps, o.predictor);
            const auto disc = discounted_value_check(market, *payoff, sol, o.n_paths, o.seed);
            note(disc.record());
            note({"discounted_domination", disc.violation_fraction, 0.0, 0.0, disc.dominates});

            if (market.n_stocks == n) {
                const Priced p = price(c, o.replication_steps);
                const auto strategy = extract_hedge(market, p.curves, p.solution);
                for (const auto& r : replication_records(c, market, p.curves, strategy, p.payoff)) note(r);
            }
        }
    }

    write(c.output_dir / "report.csv", csv::report_table(records), log);
    const bool ok = all_pass(records);
    log << (ok ? "all checks passed" : "some checks failed") << '\n';
    return ok ? kOk : kCheckFailed;
}

// First node where V and G meet, per state; NaN when the state never exercises.
std::vector<double> exercise_boundary(const csv::Table& values, const csv::Table& obstacle) {
    const int tv = values.column("time"), sv = values.column("state"), vv = values.column("v");
    const int go = obstacle.column("g");
    if (tv < 0 || sv < 0 || vv < 0 || go < 0 || values.rows.size() != obstacle.rows.size())
        throw MissingInputs("rbsde.csv and obstacle.csv do not line up");
    std::map<int, double> first;
    for (std::size_t r = 0; r < values.rows.size(); ++r) {
        const int state = std::stoi(values.rows[r][sv]);
        first.try_emplace(state, std::numeric_limits<double>::quiet_NaN());
        const double v = std::stod(values.rows[r][vv]);
        const double g = std::stod(obstacle.rows[r][go]);
        if (std::isnan(first[state]) && std::abs(v - g) <= 1e-9 * (1.0 + std::abs(g)))
            first[state] = std::stod(values.rows[r][tv]);
    }
    std::vector<double> out;
    for (const auto& [state, t] : first) out.push_back(t);
    return out;
}

}  // namespace

void apply_overrides(RunConfig& c, const Overrides& o) {
    if (o.out) c.output_dir = *o.out;
    if (o.seed) c.solver.seed = *o.seed;
    if (o.steps) {
        if (*o.steps < 2) throw ConfigError("--steps must be at least 2");
        c.solver.steps = *o.steps;
    }
    if (o.paths) {
        if (*o.paths < 2) throw ConfigError("--paths must be at least 2");
        c.solver.n_paths = *o.paths;
        c.solver.simulate_paths = static_cast<int>(*o.paths);
    }
    if (o.strict_contraction) c.solver.strict_contraction = true;
}

int run_job(const std::string& job, const RunConfig& config, std::ostream& log) {
    if (job == "validate") return job_validate(config, log);
    if (job == "simulate") return job_simulate(config, log);
    if (job == "solve-bsde") return job_solve_bsde(config, log);
    if (job == "solve-rbsde") return job_solve_rbsde(config, log);
    if (job == "price-american") return job_price(config, log, false);
    if (job == "hedge") return job_price(config, log, true);
    if (job == "verify") return job_verify(config, log);
    throw ConfigError("unknown subcommand '" + job + "'");
}

void emit_plot_data(const fs::path& dir, std::ostream& log) {
    const fs::path out = dir / "plot";
    const bool has_rbsde = fs::exists(dir / "rbsde.csv");
    const bool has_bsde = fs::exists(dir / "bsde.csv");
    const bool has_trace = fs::exists(dir / "trace.csv");
    if (!has_rbsde && !has_bsde && !has_trace)
        throw MissingInputs("no rbsde.csv, bsde.csv or trace.csv in " + dir.string());

    if (has_rbsde || has_bsde) {
        const csv::Table values = csv::read_table(dir / (has_rbsde ? "rbsde.csv" : "bsde.csv"));
        const int t = values.column("time"), s = values.column("state");
        const int v = values.column(has_rbsde ? "v" : "y_value");
        if (t < 0 || s < 0 || v < 0) throw MissingInputs("value table has an unexpected header");
        csv::Table plot{{"time", "state", "value"}, {}};
        for (const auto& row : values.rows) plot.rows.push_back({row[t], row[s], row[v]});
        write(out / "value.csv", plot, log);

        if (has_rbsde && fs::exists(dir / "obstacle.csv")) {
            const auto boundary = exercise_boundary(values, csv::read_table(dir / "obstacle.csv"));
            csv::Table b{{"state", "first_exercise_time"}, {}};
            for (std::size_t i = 0; i < boundary.size(); ++i)
                b.rows.push_back({std::to_string(i), csv::format(boundary[i])});
            write(out / "exercise_boundary.csv", b, log);
        }
    }
    if (has_trace) {
        const csv::Table trace = csv::read_table(dir / "trace.csv");
        const int n = trace.column("n"), d = trace.column("sup_distance");
        if (n < 0 || d < 0) throw MissingInputs("trace.csv has an unexpected header");
        csv::Table plot{{"n", "sup_distance"}, {}};
        for (const auto& row : trace.rows) plot.rows.push_back({row[n], row[d]});
        write(out / "penalization.csv", plot, log);
    }
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Solvers for chain-driven BSDEs, reflected BSDEs and American hedging"};
    app.require_subcommand(1, 1);
    std::string config_path;
    Overrides overrides;
    std::string out_dir;
    std::uint64_t seed = 0;
    int steps = 0;
    long paths = 0;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* opt = sub->add_option("--config", config_path, "JSON run configuration");
        if (needs_config) opt->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory (overrides output_dir)");
        sub->add_option("--seed", seed, "base seed");
        sub->add_option("--steps", steps, "grid steps");
        sub->add_option("--paths", paths, "Monte Carlo paths (simulate: number of path files)");
        sub->add_flag("--strict-contraction", overrides.strict_contraction,
                      "abort when the contraction condition fails");
    };
    for (const auto& name : job_names()) add_common(app.add_subcommand(name, "run the " + name + " job"), true);
    auto* plot = app.add_subcommand("plot-data", "write plot-ready CSVs from a result directory");
    add_common(plot, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    CLI::App* sub = app.get_subcommands().front();
    if (!out_dir.empty()) overrides.out = fs::path(out_dir);
    if (sub->count("--seed")) overrides.seed = seed;
    if (sub->count("--steps")) overrides.steps = steps;
    if (sub->count("--paths")) overrides.paths = paths;

    if (sub == plot) {
        try {
            fs::path dir;
            if (overrides.out) {
                dir = *overrides.out;
            } else if (!config_path.empty()) {
                dir = load_config(config_path).output_dir;
            } else {
                throw ConfigError("plot-data needs --out or --config");
            }
            emit_plot_data(dir, out);
            return kOk;
        } catch (const ConfigError& e) {
            err << "error: " << e.what() << '\n';
            return kUsage;
        } catch (const Error& e) {
            err << "error: " << e.what() << '\n';
            return kCheckFailed;
        }
    }

    RunConfig config;
    try {
        config = load_config(config_path);
        apply_overrides(config, overrides);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    }
    try {
        return run_job(sub->get_name(), config, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kCheckFailed;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kCheckFailed;
    }
}

}  // namespace chainbsde::app
