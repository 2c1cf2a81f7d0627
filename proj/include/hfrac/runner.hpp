#pragma once

#include <filesystem>
#include <string>

#include "hfrac/report_io.hpp"

// Batch experiment pipelines shared by the command-line tool and the
// acceptance suite: configure an instance, solve it, run the requested
// checks, and emit CSV/JSON artifacts. Identical config + seed reproduce
// the artifacts byte for byte on one platform.

namespace hfrac {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int input_error = 1;
inline constexpr int numerical_failure = 2;
} // namespace exit_code

struct LabInstance {
    std::shared_ptr<Grid> grid;
    std::shared_ptr<KernelContext> ctx;
    DirichletProblem problem;
};

inline LabInstance build_instance(const ExperimentConfig& cfg) {
    LabInstance lab;
    lab.grid = std::make_shared<Grid>(cfg.grid_spec());
    lab.ctx = std::make_shared<KernelContext>(lab.grid, cfg.kernel_params());
    lab.problem = make_problem(lab.ctx, cfg.omega_mask(*lab.grid), cfg.field_of("g"), cfg.field_of("f"));
    return lab;
}

struct SolveOutcome {
    SolveResult result;
    bool oracle_checked = false;
    double oracle_sup_diff = 0.0;
};

inline SolveOutcome run_solve(const LabInstance& lab, const ExperimentConfig& cfg) {
    SolveOutcome out;
    const SolverConfig scfg = cfg.solver_config();
    if (lab.ctx->params().p == 2.0) {
        out.result = solve_linear_p2(lab.problem, scfg);
        if (cfg.get_bool("solver.oracle_check", true)) {
            SolverConfig dcfg = scfg;
            dcfg.tol = std::min(scfg.tol, 1e-8);
            dcfg.warm_start = nullptr;
            const SolveResult descent = solve_energy_descent(lab.problem, dcfg);
            for (std::int64_t c = 0; c < lab.grid->cells(); ++c)
                out.oracle_sup_diff =
                    std::max(out.oracle_sup_diff, std::fabs(descent.u[c] - out.result.u[c]));
            out.oracle_checked = true;
        }
    } else {
        out.result = solve_energy_descent(lab.problem, scfg);
    }
    return out;
}

inline Json solve_report_json(const ExperimentConfig& cfg, const SolveOutcome& out,
                              const std::string& solution_csv) {
    Json j;
    j["params"] = to_json(cfg.kernel_params());
    j["grid"] = to_json(cfg.grid_spec());
    j["solve"] = to_json(out.result);
    j["oracle_checked"] = out.oracle_checked;
    if (out.oracle_checked) j["oracle_sup_diff"] = out.oracle_sup_diff;
    const std::string resolved = cfg.resolved_text();
    j["resolved_config"] = resolved;
    j["config_checksum"] = checksum_hex(resolved);
    j["solution_checksum"] = checksum_hex(solution_csv);
    return j;
}

inline int cmd_solve(const ExperimentConfig& cfg, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const LabInstance lab = build_instance(cfg);
    SolveOutcome out;
    try {
        out = run_solve(lab, cfg);
    } catch (const numerical_error&) {
        return exit_code::numerical_failure;
    }
    const std::string csv = grid_function_csv(out.result.u);
    write_text(out_dir + "/solution.csv", csv);
    write_text(out_dir + "/result.json", solve_report_json(cfg, out, csv).dump(2) + "\n");
    return out.result.converged ? exit_code::ok : exit_code::numerical_failure;
}

// --- Verification pipeline -----------------------------------------------------

namespace detail_runner {

inline bool check_needs_solution(const std::string& name) {
    return name != "lemma_gamma" && name != "kernel_tail_scaling";
}

/// Median of the solution over the check ball, the default pivot level for
/// the truncated-log estimate.
inline double median_on_ball(const GridFunction& u, const Grid& g, const GroupPoint& c, double r) {
    std::vector<double> vals;
    const Mask mask = ball_mask(g, Ball(c, r));
    for (std::int64_t i = 0; i < g.cells(); ++i)
        if (mask[static_cast<std::size_t>(i)]) vals.push_back(u[i]);
    require(!vals.empty(), "check ball resolves no cells");
    std::sort(vals.begin(), vals.end());
    return vals[vals.size() / 2];
}

} // namespace detail_runner

struct VerifyOutcome {
    int exit = exit_code::ok;
    bool all_pass = true;
    std::string batch_csv;
    std::vector<std::pair<std::string, Json>> reports;
    struct Row {
        std::string check;
        double lhs, rhs, fitted;
        bool pass;
    };
    std::vector<Row> rows;
};

inline VerifyOutcome run_checks(const ExperimentConfig& cfg, const LabInstance& lab,
                                const GridFunction* solution) {
    VerifyOutcome out;
    const auto checks = cfg.get_strings("checks");
    require(!checks.empty(), "config: 'checks' must name at least one check");
    const KernelContext& ctx = *lab.ctx;
    const std::string instance = cfg.instance_descriptor();
    const std::int64_t resolution = cfg.get_int("grid.resolution");
    out.batch_csv = "inequality,instance,resolution,lhs,rhs_total,fitted_c,pass\n";
    Rng rng(cfg.seed());

    const GroupPoint center = cfg.point_of("check.center", ctx.params().n);
    const double r = cfg.get_real("check.r", 0.0);

    const FluxRule flux(ctx, lab.problem.g);
    Certification cert;
    if (solution) cert = certify_subsolution(*solution, lab.problem.f, ctx, flux, rng.fork(1));

    for (const std::string& name : checks) {
        Json j;
        bool pass = false;
        double lhs = 0.0, rhs = 0.0, fitted = 0.0;
        if (detail_runner::check_needs_solution(name))
            require(solution != nullptr, "check '" + name + "' needs a solution artifact");

        if (name == "lemma_gamma") {
            Rng draw = rng.fork(2);
            const std::vector<double> ps{1.5, 2.0, 3.0, 5.0, ctx.params().p};
            std::int64_t violations = 0;
            const std::int64_t total = cfg.get_int("check.levels", 1000000);
            double min_slack = std::numeric_limits<double>::infinity();
            for (std::int64_t k = 0; k < total; ++k) {
                const LemmaGammaParams lg(ps[static_cast<std::size_t>(k % ps.size())]);
                const auto chk = check_lemma_gamma(draw.uniform(-10, 10), draw.uniform(-10, 10),
                                                   draw.uniform(1e-9, 1.0), lg);
                if (!chk.ok) ++violations;
                min_slack = std::min(min_slack, chk.slack);
            }
            pass = violations == 0;
            j = Json{{"inequality", name}, {"draws", total}, {"violations", violations},
                     {"min_slack", min_slack}, {"pass", pass}};
            fitted = static_cast<double>(violations);
        } else if (name == "kernel_tail_scaling") {
            const auto rep = check_kernel_tail_scaling(cfg.get_reals("check.gammas", {0.5, 1.0, 2.0}),
                                                       cfg.get_reals("check.scaling_radii", {0.5, 1.0, 2.0}),
                                                       ctx.params());
            pass = rep.pass;
            j = to_json(rep);
            fitted = rep.rows.empty() ? 0.0 : rep.rows.front().fitted_slope;
        } else if (name == "caccioppoli") {
            require(r > 0.0, "config: missing required key 'check.r'");
            const double inner = cfg.get_real("check.phi_inner", 0.5 * r);
            const double outer = cfg.get_real("check.phi_outer", 0.9 * r);
            const CutoffFunction phi(center, inner, outer);
            auto rep = check_caccioppoli(*solution, cfg.get_real("check.k", 0.0), phi,
                                         Ball(center, r), ctx, lab.problem.f, lab.problem.f_sup, &cert);
            rep.instance = instance;
            j = to_json(rep);
            j["lhs_gagliardo"] = rep.lhs;
            j["cutoff_gradient_sup"] = phi.measured_gradient_sup(ctx.grid());
            pass = rep.pass;
            lhs = rep.lhs;
            rhs = rep.rhs_total();
            fitted = rep.fitted_c;
        } else if (name == "log_lemma" || name == "log_corollary") {
            require(r > 0.0, "config: missing required key 'check.r'");
            const double R = cfg.get_real("check.R", 2.0 * r);
            const auto dvals = cfg.get_reals("check.d_values", {0.01, 0.1, 1.0});
            Json sub = Json::array();
            pass = true;
            for (const double d : dvals) {
                EstimateReport rep;
                if (name == "log_lemma") {
                    rep = check_log_lemma(*solution, d, center, r, R, ctx, lab.problem.f,
                                          lab.problem.f_sup);
                } else {
                    const double a = cfg.get_real(
                        "check.a_level",
                        std::max(detail_runner::median_on_ball(*solution, ctx.grid(), center, r), 1e-6));
                    const double b = cfg.get_real("check.b_level", 2.718281828459045);
                    rep = check_log_corollary(*solution, a, b, d, center, r, R, ctx, lab.problem.f,
                                              lab.problem.f_sup);
                }
                rep.instance = instance;
                pass = pass && rep.pass;
                lhs = rep.lhs;
                rhs = rep.rhs_total();
                fitted = std::max(fitted, rep.fitted_c);
                Json dj = to_json(rep);
                dj["d"] = d;
                sub.push_back(dj);
            }
            j = Json{{"inequality", name}, {"instance", instance}, {"per_d", sub}, {"pass", pass}};
        } else if (name == "boundedness") {
            require(r > 0.0, "config: missing required key 'check.r'");
            std::vector<double> deltas = cfg.get_reals("check.delta_values", {});
            if (deltas.empty())
                for (int k = 1; k <= 10; ++k) deltas.push_back(0.1 * k);
            const auto sweep = check_boundedness(*solution, center, r, deltas, ctx, &cert);
            pass = sweep.pass;
            j = to_json(sweep);
            j["instance"] = instance;
            for (const double c : sweep.c_of_delta) fitted = std::max(fitted, c);
            lhs = sweep.sup_half;
        } else if (name == "degiorgi") {
            require(r > 0.0, "config: missing required key 'check.r'");
            double c_struct = cfg.get_real("check.c_struct", 0.0);
            if (c_struct <= 0.0) {
                // default: the measured boundedness constant at δ = 1
                const auto sweep = check_boundedness(*solution, center, r, {1.0}, ctx, &cert);
                c_struct = std::max(1.0, sweep.c_of_delta.front());
            }
            const auto pipe = degiorgi_pipeline(*solution, center, r, cfg.get_real("check.k", 0.0),
                                                cfg.get_real("check.degiorgi_delta", 0.5), ctx,
                                                c_struct, lab.problem.f_sup);
            pass = pipe.run.converged && pipe.sup_bound_holds;
            j = to_json(pipe);
            j["instance"] = instance;
            lhs = pipe.sup_half;
            rhs = pipe.schedule.k + pipe.schedule.k_tilde;
            fitted = pipe.A0;
        } else if (name == "holder_fit") {
            require(r > 0.0, "config: missing required key 'check.r'");
            std::vector<double> radii = cfg.get_reals("check.radii", {});
            if (radii.empty())
                for (double rho = 0.9 * r; rho > 0.3 * r; rho *= 0.85) radii.push_back(rho);
            const auto fit = fit_holder_exponent(*solution, center, radii, ctx);
            pass = fit.flat || (fit.fit_valid && fit.alpha_hat > 0.0);
            j = to_json(fit);
            j["instance"] = instance;
            fitted = fit.alpha_hat;
        } else if (name == "oscillation") {
            require(r > 0.0, "config: missing required key 'check.r'");
            const auto led = run_oscillation_scheme(
                *solution, center, r, ctx, std::max(cfg.get_real("check.c_struct", 1.0), 1.0),
                lab.problem.f_sup, static_cast<int>(cfg.get_int("check.levels", 5)));
            pass = !led.levels.empty();
            j = to_json(led);
            j["instance"] = instance;
            fitted = led.alpha;
        } else {
            throw ExperimentConfig::ParseError("config: unknown check '" + name + "'");
        }

        out.batch_csv += csv_row(name, instance, resolution, lhs, rhs, fitted, pass);
        out.rows.push_back({name, lhs, rhs, fitted, pass});
        out.all_pass = out.all_pass && pass;
        out.reports.emplace_back(name, std::move(j));
    }
    if (!out.all_pass) out.exit = exit_code::numerical_failure;
    return out;
}

inline int cmd_verify(const ExperimentConfig& cfg, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const auto checks = cfg.get_strings("checks");
    bool needs_solution = false;
    for (const auto& c : checks) needs_solution = needs_solution || detail_runner::check_needs_solution(c);

    const LabInstance lab = build_instance(cfg);
    GridFunction solution;
    if (needs_solution) {
        const std::string csv_path = out_dir + "/solution.csv";
        const std::string json_path = out_dir + "/result.json";
        if (!std::filesystem::exists(csv_path) || !std::filesystem::exists(json_path)) {
            if (!cfg.get_bool("solve_first", false)) {
                return exit_code::input_error; // missing solution artifact
            }
            const int rc = cmd_solve(cfg, out_dir);
            if (rc != exit_code::ok) return rc;
        }
        // integrity: the stored checksum must match the file
        const std::string csv = read_text(csv_path);
        const Json meta = Json::parse(read_text(json_path));
        if (!meta.contains("solution_checksum") ||
            meta["solution_checksum"].get<std::string>() != checksum_hex(csv))
            return exit_code::input_error; // checksum mismatch
        solution = read_csv(lab.grid, csv_path);
        solution.omega = lab.problem.omega;
        solution.exterior_datum = lab.problem.g;
    }

    const VerifyOutcome out = run_checks(cfg, lab, needs_solution ? &solution : nullptr);
    for (const auto& [name, j] : out.reports)
        write_text(out_dir + "/" + name + ".json", j.dump(2) + "\n");
    write_text(out_dir + "/reports.csv", out.batch_csv);
    return out.exit;
}

// --- Parameter sweeps -------------------------------------------------------------

inline int cmd_sweep(ExperimentConfig cfg, const std::string& axis,
                     const std::vector<std::string>& values, const std::string& out_dir) {
    if (values.empty()) throw ExperimentConfig::ParseError("sweep: empty values list");
    static const std::vector<std::string> axes{"s", "p", "resolution", "delta", "sigma", "d"};
    if (std::find(axes.begin(), axes.end(), axis) == axes.end())
        throw ExperimentConfig::ParseError("sweep: unsupported axis '" + axis + "'");
    std::filesystem::create_directories(out_dir);
    std::string csv = "axis,value,check,fitted_c,pass\n";

    const auto emit = [&](const std::string& value, const std::string& check, double fitted,
                          bool pass) {
        csv += axis + "," + value + "," + check + "," + format_g17(fitted) + "," +
               (pass ? "1" : "0") + "\n";
    };

    if (axis == "s" || axis == "p" || axis == "resolution") {
        for (const std::string& v : values) {
            ExperimentConfig local = cfg;
            local.set(axis == "resolution" ? "grid.resolution" : "kernel." + axis, v);
            const LabInstance lab = build_instance(local);
            const SolveOutcome sol = run_solve(lab, local);
            GridFunction u = sol.result.u;
            const VerifyOutcome out = run_checks(local, lab, &u);
            for (const auto& row : out.rows) emit(v, row.check, row.fitted, row.pass);
        }
    } else {
        // single solve, one check re-evaluated along the axis
        const LabInstance lab = build_instance(cfg);
        const SolveOutcome sol = run_solve(lab, cfg);
        const GridFunction& u = sol.result.u;
        const KernelContext& ctx = *lab.ctx;
        const GroupPoint center = cfg.point_of("check.center", ctx.params().n);
        const double r = cfg.get_real("check.r");
        const double R = cfg.get_real("check.R", 2.0 * r);
        for (const std::string& v : values) {
            const double value = std::strtod(v.c_str(), nullptr);
            if (axis == "delta") {
                const auto sweep = check_boundedness(u, center, r, {value}, ctx);
                emit(v, "boundedness", sweep.c_of_delta.front(), sweep.pass);
            } else if (axis == "d") {
                const auto rep =
                    check_log_lemma(u, value, center, r, R, ctx, lab.problem.f, lab.problem.f_sup);
                emit(v, "log_lemma", rep.fitted_c, rep.pass);
            } else { // sigma
                const auto led = run_oscillation_scheme(u, center, r, ctx, 1.0, lab.problem.f_sup,
                                                        static_cast<int>(cfg.get_int("check.levels", 5)),
                                                        value);
                emit(v, "oscillation", led.alpha, !led.levels.empty());
            }
        }
    }
    write_text(out_dir + "/sweep.csv", csv);
    return exit_code::ok;
}

} // namespace hfrac
