// Acceptance suite: runs every criterion at its stated tolerance and prints
// one pass/fail line per criterion. Exit code 0 iff all criteria pass.
//
// Everything is pinned here: grids stay at desk scale (<= 32^3 cells), all
// randomness flows from fixed seeds, and the solved-instance pool is shared
// across the criteria that need it.

#include "hfrac/runner.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>

using namespace hfrac;

namespace {

struct Harness {
    int failures = 0;

    template <class Body>
    void criterion(int id, const std::string& name, const Body& body) {
        const auto t0 = std::chrono::steady_clock::now();
        bool pass = false;
        std::string detail;
        try {
            detail = body(pass);
        } catch (const std::exception& e) {
            pass = false;
            detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!pass) ++failures;
        std::printf("criterion %2d %s (%6.1fs) %s%s%s\n", id, pass ? "PASS" : "FAIL", secs,
                    name.c_str(), detail.empty() ? "" : " -- ", detail.c_str());
        std::fflush(stdout);
    }
};

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

GroupPoint random_point(Rng& rng, double scale = 4.0) {
    return GroupPoint(rng.uniform(-scale, scale), rng.uniform(-scale, scale),
                      rng.uniform(-scale * scale, scale * scale));
}

double rel_coord_error(const GroupPoint& a, const GroupPoint& b) {
    double err = 0.0, scale = 1.0;
    for (std::size_t i = 0; i < a.c.size(); ++i) {
        err = std::max(err, std::fabs(a.c[i] - b.c[i]));
        scale = std::max(scale, std::fabs(a.c[i]));
    }
    return err / scale;
}

// --- shared solved-instance pool ---------------------------------------------------

struct PoolKey {
    double p, s;
    std::int64_t res;
    bool operator<(const PoolKey& o) const {
        return std::tie(p, s, res) < std::tie(o.p, o.s, o.res);
    }
};

struct PoolEntry {
    ExperimentConfig cfg;
    LabInstance lab;
    SolveOutcome sol;
};

std::string pool_config_text(double p, double s, std::int64_t res, std::uint64_t seed) {
    std::ostringstream os;
    os << "kernel.n = 1\n"
       << "kernel.s = " << s << "\n"
       << "kernel.p = " << p << "\n"
       << "grid.z_half = 2.4\n"
       << "grid.t_half = 4.0\n"
       << "grid.resolution = " << res << "\n"
       << "omega.kind = gauge_ball\n"
       << "omega.radius = 1.4\n"
       << "g.kind = smooth_bump\n"
       << "g.value = 10.0\n"
       << "g.radius = 1.9\n"
       << "f.kind = zero\n"
       << "solver.tol = " << (p < 2.0 ? "1e-2" : (p == 2.0 ? "1e-7" : "1e-6")) << "\n"
       << "solver.max_iterations = " << (p < 2.0 ? 500 : 3000) << "\n"
       << "solver.oracle_check = false\n"
       << "checks = caccioppoli\n"
       << "check.r = 1.2\n"
       << "check.phi_inner = 0.6\n"
       << "check.phi_outer = 1.08\n"
       << "check.k = 0.15\n"
       << "seed = " << seed << "\n";
    return os.str();
}

class Pool {
public:
    const std::vector<PoolKey>& keys() {
        build();
        return keys_;
    }

    PoolEntry& at(const PoolKey& k) {
        build();
        return entries_.at(k);
    }

    /// The criterion-7 batch: per pool instance one truncation-energy row.
    /// Rebuilt from scratch on every call so determinism can be exercised.
    static std::string run_caccioppoli_batch() {
        std::string csv = "inequality,instance,resolution,lhs,rhs_total,fitted_c,pass\n";
        for (const PoolKey& k : pool_keys()) {
            const ExperimentConfig cfg =
                ExperimentConfig::from_string(pool_config_text(k.p, k.s, k.res, seed_of(k)));
            LabInstance lab = build_instance(cfg);
            const SolveOutcome sol = run_solve(lab, cfg);
            GridFunction u = sol.result.u;
            const VerifyOutcome out = run_checks(cfg, lab, &u);
            std::istringstream rows(out.batch_csv);
            std::string line;
            std::getline(rows, line); // header
            while (std::getline(rows, line))
                if (!line.empty()) csv += line + "\n";
        }
        return csv;
    }

    static std::vector<PoolKey> pool_keys() {
        std::vector<PoolKey> keys;
        for (const std::int64_t res : {16, 24})
            for (const double p : {1.5, 2.0, 3.0})
                for (const double s : {0.3, 0.6, 0.9}) keys.push_back({p, s, res});
        keys.push_back({2.0, 0.5, 16});
        keys.push_back({2.0, 0.5, 24}); // 20 instances
        return keys;
    }

    static std::uint64_t seed_of(const PoolKey& k) {
        return 1000 + static_cast<std::uint64_t>(k.p * 10) * 100 +
               static_cast<std::uint64_t>(k.s * 10) * 10 + static_cast<std::uint64_t>(k.res);
    }

private:
    void build() {
        if (built_) return;
        built_ = true;
        keys_ = pool_keys();
        for (const PoolKey& k : keys_) {
            PoolEntry entry{
                ExperimentConfig::from_string(pool_config_text(k.p, k.s, k.res, seed_of(k))),
                {}, {}};
            entry.lab = build_instance(entry.cfg);
            entry.sol = run_solve(entry.lab, entry.cfg);
            entries_.emplace(k, std::move(entry));
        }
    }

    bool built_ = false;
    std::vector<PoolKey> keys_;
    std::map<PoolKey, PoolEntry> entries_;
};

Pool pool;

} // namespace

int main() {
    Harness h;

    // 1 ------------------------------------------------------------------------
    h.criterion(1, "group and norm suite", [&](bool& pass) {
        Rng rng(101);
        double worst = 0.0;
        for (int it = 0; it < 10000; ++it) {
            const GroupPoint a = random_point(rng), b = random_point(rng), c = random_point(rng);
            worst = std::max(worst, rel_coord_error(group_mul(group_mul(a, b), c),
                                                    group_mul(a, group_mul(b, c))));
            worst = std::max(worst, rel_coord_error(group_mul(a, group_identity(1)), a));
            worst = std::max(worst, rel_coord_error(group_mul(a, group_inv(a)), group_identity(1)));
            const double lam = std::exp(rng.uniform(-1.5, 1.5));
            worst = std::max(worst, rel_coord_error(dilate(lam, group_mul(a, b)),
                                                    group_mul(dilate(lam, a), dilate(lam, b))));
            const double na = gauge_norm(a);
            if (na > 0.0) {
                worst = std::max(worst, std::fabs(gauge_norm(dilate(lam, a)) - lam * na) / (lam * na));
                worst = std::max(worst, std::fabs(gauge_norm(group_inv(a)) - na) / na);
            }
        }
        double triangle_violation = 0.0;
        for (int it = 0; it < 100000; ++it) {
            const GroupPoint a = random_point(rng), b = random_point(rng), c = random_point(rng);
            const double lhs = pseudo_distance(a, b);
            const double rhs = pseudo_distance(a, c) + pseudo_distance(c, b);
            if (rhs > 0.0) triangle_violation = std::max(triangle_violation, (lhs - rhs) / rhs);
        }
        pass = worst <= 1e-12 && triangle_violation <= 1e-12;
        return "max relative error " + fmt(worst) + ", triangle slack " + fmt(triangle_violation);
    });

    // 2 ------------------------------------------------------------------------
    h.criterion(2, "radial kernel integral against the layer-cake closed form", [&](bool& pass) {
        const KernelParams kp(1, 0.5, 2.0);
        const double omega_mc = oracles::mc_unit_ball_volume(1, 4242);
        double worst_value = 0.0, worst_doubling = 0.0;
        for (const double gamma : {0.5, 1.0, 2.0}) {
            for (const double r : {0.5, 1.0, 2.0}) {
                const double val = kernel_integral_outside_ball(r, gamma, kp);
                const double closed = 4.0 * omega_mc / gamma * std::pow(r, -gamma);
                worst_value = std::max(worst_value, std::fabs(val / closed - 1.0));
                const double ratio = kernel_integral_outside_ball(2.0 * r, gamma, kp) / val;
                worst_doubling =
                    std::max(worst_doubling, std::fabs(ratio * std::pow(2.0, gamma) - 1.0));
            }
        }
        pass = worst_value <= 0.02 && worst_doubling <= 0.01;
        return "closed-form deviation " + fmt(worst_value) + ", doubling deviation " +
               fmt(worst_doubling);
    });

    // 3 ------------------------------------------------------------------------
    h.criterion(3, "seminorm dilation law on a smooth bump (24^3)", [&](bool& pass) {
        const double s = 0.6, p = 3.0;
        const auto bump = [](const GroupPoint& q) {
            const double g = gauge_norm(q);
            const double w = 1.0 - (g / 0.9) * (g / 0.9);
            return w > 0.0 ? w * w * w : 0.0;
        };
        auto grid = std::make_shared<Grid>(GridSpec::cube(1, 1.0, 1.0, 24));
        const KernelContext ctx(grid, KernelParams(1, s, p));
        const GridFunction u = GridFunction::sample(grid, bump);
        const double base = std::pow(gagliardo_seminorm(u, ctx, full_mask(*grid)), p);
        double worst = 0.0;
        for (const double lam : {0.5, 2.0}) {
            auto dgrid = std::make_shared<Grid>(GridSpec::box(
                1, {-1.0 / lam, -1.0 / lam, -1.0 / (lam * lam)},
                {1.0 / lam, 1.0 / lam, 1.0 / (lam * lam)}, {24, 24, 24}));
            const KernelContext dctx(dgrid, KernelParams(1, s, p));
            const GridFunction v =
                GridFunction::sample(dgrid, [&](const GroupPoint& q) { return bump(dilate(lam, q)); });
            const double scaled = std::pow(gagliardo_seminorm(v, dctx, full_mask(*dgrid)), p);
            worst = std::max(worst, std::fabs(scaled / (std::pow(lam, s * p - 4.0) * base) - 1.0));
        }
        pass = worst <= 0.02;
        return "worst deviation " + fmt(worst);
    });

    // 4 ------------------------------------------------------------------------
    h.criterion(4, "energy descent matches the direct linear solve (p = 2, 9^3)", [&](bool& pass) {
        auto grid = std::make_shared<Grid>(GridSpec::cube(1, 1.0, 1.0, 9));
        auto ctx = std::make_shared<KernelContext>(grid, KernelParams(1, 0.5, 2.0));
        const Mask omega = ball_mask(*grid, Ball(GroupPoint(1), 0.55));
        const DirichletProblem prob =
            make_problem(ctx, omega, ScalarField::smooth_bump(1.0, 1.2), ScalarField::constant(0.25));
        const SolveResult direct = solve_linear_p2(prob);
        SolverConfig cfg;
        cfg.tol = 1e-8;
        const SolveResult descent = solve_energy_descent(prob, cfg);
        double supdiff = 0.0;
        for (std::int64_t c = 0; c < grid->cells(); ++c)
            supdiff = std::max(supdiff, std::fabs(descent.u[c] - direct.u[c]));
        pass = descent.converged && supdiff <= 1e-6;
        return "sup difference " + fmt(supdiff);
    });

    // 5 ------------------------------------------------------------------------
    h.criterion(5, "analytic energy gradient against finite differences", [&](bool& pass) {
        auto grid = std::make_shared<Grid>(GridSpec::cube(1, 1.0, 1.0, 7));
        const Mask omega = ball_mask(*grid, Ball(GroupPoint(1), 0.6));
        Rng rng(505);
        double worst = 0.0;
        for (const double p : {1.5, 2.0, 3.0}) {
            auto ctx = std::make_shared<KernelContext>(grid, KernelParams(1, 0.5, p));
            const ScalarField g = ScalarField::constant(0.4);
            const FluxRule flux(*ctx, g);
            GridFunction u = GridFunction::sample(grid, [&](const GroupPoint& q) {
                return 0.4 + 0.3 * std::sin(3 * q.x(0)) * std::cos(2 * q.y(0)) + 0.1 * q.t();
            });
            u.omega = omega;
            u.exterior_datum = g;
            std::vector<double> f(static_cast<std::size_t>(grid->cells()));
            for (auto& v : f) v = 0.2 * rng.normal();
            const auto cells = mask_cells(omega);
            const double m = grid->cell_measure();
            for (int k = 0; k < 10; ++k) {
                const std::int64_t cell = cells[static_cast<std::size_t>(rng.next_u64() % cells.size())];
                const double eps = 1e-5;
                GridFunction up = u, dn = u;
                up[cell] += eps;
                dn[cell] -= eps;
                const double fd =
                    (fractional_energy(up, f, *ctx, flux) - fractional_energy(dn, f, *ctx, flux)) /
                    (2 * eps);
                const double an =
                    (apply_operator(u, cell, *ctx, flux) - f[static_cast<std::size_t>(cell)]) * m;
                worst = std::max(worst, std::fabs(an - fd) / std::max(std::fabs(fd), 1e-30));
            }
        }
        pass = worst <= 1e-6;
        return "worst relative error " + fmt(worst);
    });

    // 6 ------------------------------------------------------------------------
    h.criterion(6, "scalar inequality property suite (1e6 draws)", [&](bool& pass) {
        Rng rng(606);
        const std::vector<double> ps{1.5, 2.0, 3.0, 5.0};
        std::int64_t violations = 0;
        double min_rel_slack = std::numeric_limits<double>::infinity();
        for (std::int64_t k = 0; k < 1000000; ++k) {
            const LemmaGammaParams lg(ps[static_cast<std::size_t>(k % ps.size())]);
            const double a = rng.uniform(-10, 10), b = rng.uniform(-10, 10);
            const double eps = rng.uniform(1e-9, 1.0);
            const auto chk = check_lemma_gamma(a, b, eps, lg);
            if (!chk.ok) ++violations;
            const double rhs = power_abs(a, lg.p) + chk.slack;
            if (rhs > 0.0) min_rel_slack = std::min(min_rel_slack, chk.slack / rhs);
        }
        pass = violations == 0 && min_rel_slack >= -1e-12;
        return "violations " + std::to_string(violations) + ", min relative slack " +
               fmt(min_rel_slack);
    });

    // 7 ------------------------------------------------------------------------
    h.criterion(7, "truncation energy bound: hand identity and the 20-instance batch",
                [&](bool& pass) {
        // constant-field identity
        auto grid = std::make_shared<Grid>(GridSpec::cube(1, 2.4, 4.0, 16));
        auto ctx = std::make_shared<KernelContext>(grid, KernelParams(1, 0.6, 2.0));
        GridFunction cu(grid);
        cu.omega = ball_mask(*grid, Ball(GroupPoint(1), 1.4));
        for (auto& v : cu.values) v = 2.0;
        cu.exterior_datum = ScalarField::constant(2.0);
        const CutoffFunction phi(GroupPoint(1), 0.6, 1.08);
        const std::vector<double> zf(static_cast<std::size_t>(grid->cells()), 0.0);
        const auto const_rep =
            check_caccioppoli(cu, 0.5, phi, Ball(GroupPoint(1), 1.2), *ctx, zf, 0.0);
        const bool identity_ok = const_rep.fitted_c <= 1.0 + 1e-10;

        // the 20-instance batch (also the determinism artifact for criterion 12)
        const std::string csv = Pool::run_caccioppoli_batch();
        write_text("criterion7_batch.csv", csv);
        std::map<std::pair<double, double>, std::map<std::int64_t, double>> fitted;
        std::istringstream rows(csv);
        std::string line;
        std::getline(rows, line);
        std::size_t idx = 0;
        const auto keys = Pool::pool_keys();
        bool all_finite = true;
        while (std::getline(rows, line)) {
            if (line.empty()) continue;
            const auto last_comma = line.rfind(',');
            const auto prev_comma = line.rfind(',', last_comma - 1);
            const double f = std::strtod(line.substr(prev_comma + 1).c_str(), nullptr);
            all_finite = all_finite && std::isfinite(f) && f > 0.0;
            const PoolKey& k = keys[idx++];
            fitted[{k.p, k.s}][k.res] = f;
        }
        double worst_ratio = 0.0;
        for (const auto& [ps_pair, by_res] : fitted) {
            if (by_res.size() != 2) continue;
            const double a = by_res.at(16), b = by_res.at(24);
            worst_ratio = std::max(worst_ratio, std::max(a, b) / std::min(a, b));
        }
        pass = identity_ok && all_finite && worst_ratio <= 3.0;
        return "constant-field fitted " + fmt(const_rep.fitted_c) + ", worst 16^3/24^3 ratio " +
               fmt(worst_ratio);
    });

    // 8 ------------------------------------------------------------------------
    h.criterion(8, "logarithmic estimates on nonnegative solutions", [&](bool& pass) {
        // constant field: the log term vanishes exactly
        auto grid = std::make_shared<Grid>(GridSpec::cube(1, 2.4, 4.0, 16));
        auto ctx = std::make_shared<KernelContext>(grid, KernelParams(1, 0.6, 2.0));
        GridFunction cu(grid);
        cu.omega = ball_mask(*grid, Ball(GroupPoint(1), 1.4));
        for (auto& v : cu.values) v = 1.2;
        cu.exterior_datum = ScalarField::constant(1.2);
        const std::vector<double> zf(static_cast<std::size_t>(grid->cells()), 0.0);
        const auto const_rep = check_log_lemma(cu, 0.1, GroupPoint(1), 0.6, 1.2, *ctx, zf, 0.0);
        bool ok = const_rep.lhs == 0.0;

        int instances = 0;
        double worst_fitted = 0.0;
        for (const PoolKey& k : pool.keys()) {
            if (k.res != 16) continue; // ten 16^3 instances
            PoolEntry& e = pool.at(k);
            double min_u = 1e300;
            for (double v : e.sol.result.u.values) min_u = std::min(min_u, v);
            if (min_u < -1e-10) {
                ok = false;
                continue;
            }
            ++instances;
            for (const double d : {0.01, 0.1, 1.0}) {
                const auto lem = check_log_lemma(e.sol.result.u, d, GroupPoint(1), 0.6, 1.2,
                                                 *e.lab.ctx, e.lab.problem.f, e.lab.problem.f_sup);
                const double a =
                    std::max(detail_runner::median_on_ball(e.sol.result.u, *e.lab.grid,
                                                           GroupPoint(1), 0.6),
                             1e-6);
                const auto cor = check_log_corollary(e.sol.result.u, a, 2.718281828459045, d,
                                                     GroupPoint(1), 0.6, 1.2, *e.lab.ctx,
                                                     e.lab.problem.f, e.lab.problem.f_sup);
                ok = ok && lem.pass && cor.pass;
                worst_fitted = std::max({worst_fitted, lem.fitted_c, cor.fitted_c});
            }
        }
        pass = ok && instances == 10;
        return std::to_string(instances) + " instances x 3 levels, worst fitted " +
               fmt(worst_fitted) + ", constant-field log term " + fmt(const_rep.lhs);
    });

    // 9 ------------------------------------------------------------------------
    h.criterion(9, "local boundedness: closed form and resolution stability", [&](bool& pass) {
        // constant-function closed form at 24^3
        const double s = 0.5, p = 2.0, c0 = 1.4;
        auto grid = std::make_shared<Grid>(GridSpec::box(1, {-1.1, -1.1, -1.21}, {1.1, 1.1, 1.21},
                                                         {24, 24, 24}));
        auto ctx = std::make_shared<KernelContext>(grid, KernelParams(1, s, p));
        GridFunction cu(grid);
        cu.omega = ball_mask(*grid, Ball(GroupPoint(1), 0.9));
        for (auto& v : cu.values) v = c0;
        cu.exterior_datum = ScalarField::constant(c0);
        std::vector<double> deltas;
        for (int k = 1; k <= 10; ++k) deltas.push_back(0.1 * k);
        const auto sweep = check_boundedness(cu, GroupPoint(1), 0.8, deltas, *ctx);
        const double tau = std::pow(4.0 * unit_ball_volume(1) / (s * p), 1.0 / (p - 1.0));
        const double expo = (p - 1.0) * 4.0 / (s * p * p);
        double closed_err = 0.0;
        for (std::size_t i = 0; i < deltas.size(); ++i) {
            const double predicted = std::max(0.0, 1.0 - deltas[i] * tau) * std::pow(deltas[i], expo);
            if (predicted > 1e-6)
                closed_err = std::max(closed_err,
                                      std::fabs(sweep.c_of_delta[i] / predicted - 1.0));
        }
        bool ok = closed_err <= 0.03;

        // solved instances: finite everywhere, stable across resolutions
        double worst_ratio = 0.0;
        for (const double ss : {0.3, 0.6, 0.9}) {
            std::map<std::int64_t, std::vector<double>> curves;
            for (const std::int64_t res : {16, 24}) {
                PoolEntry& e = pool.at({2.0, ss, res});
                const auto sw =
                    check_boundedness(e.sol.result.u, GroupPoint(1), 1.2, deltas, *e.lab.ctx);
                ok = ok && sw.pass;
                curves[res] = sw.c_of_delta;
            }
            for (std::size_t i = 0; i < deltas.size(); ++i) {
                const double a = curves[16][i], b = curves[24][i];
                if (std::max(a, b) <= 1e-9) continue;
                if (std::min(a, b) <= 0.0) {
                    ok = false;
                    continue;
                }
                worst_ratio = std::max(worst_ratio, std::max(a, b) / std::min(a, b));
            }
        }
        pass = ok && worst_ratio <= 2.0;
        return "closed-form deviation " + fmt(closed_err) + ", worst resolution ratio " +
               fmt(worst_ratio);
    });

    // 10 -----------------------------------------------------------------------
    h.criterion(10, "level-set recursion: synthetic threshold and grid pipeline", [&](bool& pass) {
        Rng rng(1010);
        bool ok = true;
        for (int k = 0; k < 100; ++k) {
            const double M = std::exp(rng.uniform(-1.0, 3.0));
            const double C = std::exp(rng.uniform(0.3, 2.5));
            const double beta = rng.uniform(0.2, 1.5);
            const double thr = std::pow(M, -1.0 / beta) * std::pow(C, -1.0 / (beta * beta));
            for (const double factor : {0.98, 1.02}) {
                double l = std::log(factor * thr);
                for (int j = 0; j < 600; ++j) l = std::log(M) + j * std::log(C) + (1.0 + beta) * l;
                ok = ok && ((l < std::log(thr) - 200.0) == (factor < 1.0));
            }
        }
        // production verdict agrees with its own threshold
        const KernelParams kp(1, 0.5, 2.0);
        const auto sched = DeGiorgiSchedule::subcritical(kp, 0.8, 0.0, 1.0, 0.7, 1.3, 0.2);
        ok = ok && degiorgi_iterate(0.95 * sched.threshold() * sched.k_tilde, sched).converged;
        ok = ok && !degiorgi_iterate(1.05 * sched.threshold() * sched.k_tilde, sched).converged;

        // measured pipeline on five solved instances
        int converged = 0, bounded = 0;
        const std::vector<PoolKey> five{{2.0, 0.3, 16}, {2.0, 0.6, 16}, {2.0, 0.9, 24},
                                        {3.0, 0.6, 16}, {3.0, 0.3, 24}};
        for (const PoolKey& k : five) {
            PoolEntry& e = pool.at(k);
            const auto sweep =
                check_boundedness(e.sol.result.u, GroupPoint(1), 1.2, {1.0}, *e.lab.ctx);
            const double c_struct = std::max(1.0, sweep.c_of_delta.front());
            const auto pipe = degiorgi_pipeline(e.sol.result.u, GroupPoint(1), 1.2, 0.0, 0.5,
                                                *e.lab.ctx, c_struct, 0.0);
            if (pipe.run.converged) ++converged;
            if (pipe.sup_bound_holds) ++bounded;
        }
        pass = ok && converged == 5 && bounded == 5;
        return "synthetic exact, pipeline converged " + std::to_string(converged) +
               "/5, sup bound " + std::to_string(bounded) + "/5";
    });

    // 11 -----------------------------------------------------------------------
    h.criterion(11, "oscillation decay exponents", [&](bool& pass) {
        // gauge powers on an odd grid (a cell center sits at the origin)
        auto grid = std::make_shared<Grid>(GridSpec::box(1, {-1.1, -1.1, -1.21},
                                                         {1.1, 1.1, 1.21}, {31, 31, 31}));
        auto ctx = std::make_shared<KernelContext>(grid, KernelParams(1, 0.5, 2.0));
        double worst = 0.0;
        for (const double beta : {0.2, 0.4, 0.6}) {
            GridFunction u = GridFunction::sample(
                grid, [&](const GroupPoint& q) { return std::pow(gauge_norm(q), beta); });
            std::vector<double> radii;
            for (double rho = 1.0; rho > 0.3; rho *= 0.82) radii.push_back(rho);
            const auto fit = fit_holder_exponent(u, GroupPoint(1), radii, *ctx);
            worst = std::max(worst, std::fabs(fit.alpha_hat - beta));
        }
        bool ok = worst <= 0.05;

        // solved smooth-data instances: positive exponent, monotone table
        int positive = 0;
        for (const PoolKey& k : {PoolKey{2.0, 0.6, 24}, PoolKey{3.0, 0.6, 24}}) {
            PoolEntry& e = pool.at(k);
            std::vector<double> radii;
            for (double rho = 1.3; rho > 0.45; rho *= 0.85) radii.push_back(rho);
            const auto fit = fit_holder_exponent(e.sol.result.u, GroupPoint(1), radii, *e.lab.ctx);
            bool monotone = true;
            double prev = std::numeric_limits<double>::infinity();
            for (const auto& row : fit.table) {
                if (!row.used) continue;
                monotone = monotone && row.osc <= prev + 1e-15;
                prev = row.osc;
            }
            if (fit.fit_valid && fit.alpha_hat > 0.0 && monotone) ++positive;
        }
        pass = ok && positive == 2;
        return "worst gauge-power error " + fmt(worst) + ", solved fits positive " +
               std::to_string(positive) + "/2";
    });

    // 12 -----------------------------------------------------------------------
    h.criterion(12, "determinism: the criterion-7 batch reruns bit-identically", [&](bool& pass) {
        const std::string again = Pool::run_caccioppoli_batch();
        const std::string first = read_text("criterion7_batch.csv");
        pass = !first.empty() && first == again;
        return pass ? "byte-identical CSV (" + std::to_string(first.size()) + " bytes)"
                    : "CSV bytes differ";
    });

    std::printf("%d of 12 criteria passed\n", 12 - h.failures);
    return h.failures == 0 ? 0 : 1;
}
