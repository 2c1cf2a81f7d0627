#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "hfrac/exterior.hpp"
#include "hfrac/grid.hpp"
#include "hfrac/kernel.hpp"
#include "hfrac/parallel.hpp"

// Double-sum conventions
// ----------------------
// Norm-like quantities (Gagliardo seminorm, the left/right sides of the
// estimate reports) mirror the full double integral: every ordered pair
// (ξ, η), ξ ≠ η, contributes, i.e. each unordered pair is counted twice.
// The variational family (fractional_energy, apply_operator, weak_residual)
// counts each unordered pair once, so that (apply_operator(ξ) - f(ξ))·|cell|
// is exactly the partial derivative of fractional_energy at u(ξ).

namespace hfrac {

inline double signed_power(double w, double p) {
    // |w|^{p-2} w, continuous at 0 for p > 1
    if (p == 2.0) return w;
    if (p == 3.0) return std::fabs(w) * w;
    if (p == 1.5) return std::copysign(std::sqrt(std::fabs(w)), w);
    if (w == 0.0) return 0.0;
    return std::copysign(std::pow(std::fabs(w), p - 1.0), w);
}

inline double power_abs(double w, double p) {
    // |w|^p
    if (p == 1.0) return std::fabs(w);
    if (p == 2.0) return w * w;
    if (p == 3.0) {
        const double a = std::fabs(w);
        return a * a * a;
    }
    if (p == 1.5) {
        const double a = std::fabs(w);
        return a * std::sqrt(a);
    }
    if (p == 0.5) return std::sqrt(std::fabs(w));
    if (w == 0.0) return 0.0;
    return std::pow(std::fabs(w), p);
}

/// Shared immutable discretization state for one (grid, params) pair: the
/// refined pair-weight table, the graded exterior meshes, and the per-cell
/// exterior kernel mass κ(ξ) = ∫_{H^n \ Λ} Ψ(ξ,η)^{-Q-sp} dη.
///
/// Warm the lazy pieces (meshes, κ) from a single thread — e.g. via
/// ensure_kappa — before entering parallel loops; afterwards all reads are
/// concurrent-safe. A cold kappa() call inside a parallel region computes
/// the value locally without memoizing.
class KernelContext {
public:
    struct Options {
        int refine_depth = 1;
        ExteriorMesh::Options flux_mesh{};   // coarse, for solver-facing coupling
        ExteriorMesh::Options report_mesh{}; // finer, for tails and reports
        Options() {
            flux_mesh.res0 = 16;
            flux_mesh.res1 = 16;
            flux_mesh.res_far = 8;
            flux_mesh.levels = 12;
            report_mesh.res0 = 32;
            report_mesh.res1 = 16;
            report_mesh.res_far = 8;
            report_mesh.levels = 14;
        }
    };

    KernelContext(std::shared_ptr<const Grid> grid, KernelParams params, Options opt = {})
        : grid_(std::move(grid)),
          params_(params),
          opt_(opt),
          table_(grid_, params, opt.refine_depth),
          kappa_(static_cast<std::size_t>(grid_->cells()), std::numeric_limits<double>::quiet_NaN()) {}

    const Grid& grid() const { return *grid_; }
    std::shared_ptr<const Grid> grid_ptr() const { return grid_; }
    const KernelParams& params() const { return params_; }
    const KernelTable& table() const { return table_; }

    const ExteriorMesh& flux_mesh() const {
        if (!flux_mesh_) flux_mesh_ = std::make_unique<ExteriorMesh>(*grid_, opt_.flux_mesh);
        return *flux_mesh_;
    }

    const ExteriorMesh& report_mesh() const {
        if (!report_mesh_) report_mesh_ = std::make_unique<ExteriorMesh>(*grid_, opt_.report_mesh);
        return *report_mesh_;
    }

    void ensure_kappa(const std::vector<std::int64_t>& cells) const {
        std::vector<std::int64_t> missing;
        for (std::int64_t c : cells)
            if (std::isnan(kappa_[static_cast<std::size_t>(c)])) missing.push_back(c);
        if (missing.empty()) return;
        const ExteriorMesh& mesh = flux_mesh();
        parallel_for(static_cast<std::int64_t>(missing.size()), [&](std::int64_t k) {
            const std::int64_t c = missing[static_cast<std::size_t>(k)];
            kappa_[static_cast<std::size_t>(c)] = compute_kappa(mesh, c);
        });
    }

    void ensure_all_kappa() const {
        std::vector<std::int64_t> all(static_cast<std::size_t>(grid_->cells()));
        for (std::int64_t c = 0; c < grid_->cells(); ++c) all[static_cast<std::size_t>(c)] = c;
        ensure_kappa(all);
    }

    double kappa(std::int64_t cell) const {
        const double v = kappa_[static_cast<std::size_t>(cell)];
        return std::isnan(v) ? compute_kappa(flux_mesh(), cell) : v;
    }

private:
    double compute_kappa(const ExteriorMesh& mesh, std::int64_t cell) const {
        const GroupPoint xi = grid_->point(cell);
        const auto one = [](const double*) { return 1.0; };
        // mesh part inside the enclosing radius + the closed-form power tail
        const double split = grid_->enclosing_gauge_radius(xi);
        const auto ext = exterior_integral(mesh, *grid_, xi, params_.exponent(), one,
                                           RemainderKind::None, {}, split);
        const double tail = static_cast<double>(params_.Q()) * unit_ball_volume(params_.n) /
                            params_.sp() * std::pow(split, -params_.sp());
        return ext.mesh_part + tail;
    }

    std::shared_ptr<const Grid> grid_;
    KernelParams params_;
    Options opt_;
    KernelTable table_;
    mutable std::unique_ptr<ExteriorMesh> flux_mesh_, report_mesh_;
    mutable std::vector<double> kappa_;
};

inline std::vector<std::int64_t> mask_cells(const Mask& mask) {
    std::vector<std::int64_t> out;
    for (std::size_t c = 0; c < mask.size(); ++c)
        if (mask[c]) out.push_back(static_cast<std::int64_t>(c));
    return out;
}

/// Σ over ordered pairs (ξ ≠ η) of masked cells of term(i, j)·K_ij·|cell|²;
/// term must be symmetric — each unordered pair is evaluated once and
/// doubled. Deterministic chunked reduction over the outer index.
template <class Term>
double masked_pair_integral(const KernelContext& ctx, const std::vector<std::int64_t>& cells,
                            const Term& term) {
    const double m2 = ctx.grid().cell_measure() * ctx.grid().cell_measure();
    const auto count = static_cast<std::int64_t>(cells.size());
    const double sum = chunked_sum(count, [&](std::int64_t b, std::int64_t e) {
        double acc = 0.0;
        for (std::int64_t a = b; a < e; ++a) {
            const std::int64_t i = cells[static_cast<std::size_t>(a)];
            double row = 0.0;
            for (std::int64_t k = a + 1; k < count; ++k) {
                const std::int64_t j = cells[static_cast<std::size_t>(k)];
                row += term(i, j) * ctx.table().weight(i, j);
            }
            acc += row;
        }
        return acc;
    });
    return 2.0 * sum * m2;
}

/// Gagliardo seminorm over a domain mask:
/// (∬_{D×D} |u(ξ)-u(η)|^p Ψ^{-Q-sp})^{1/p} with the full ordered double sum.
inline double gagliardo_seminorm(const GridFunction& u, const KernelContext& ctx, const Mask& mask) {
    const auto cells = mask_cells(mask);
    require(!cells.empty(), "gagliardo_seminorm: empty mask");
    const double p = ctx.params().p;
    const double s = masked_pair_integral(
        ctx, cells, [&](std::int64_t i, std::int64_t j) { return power_abs(u[i] - u[j], p); });
    return std::pow(s, 1.0 / p);
}

// --- Exterior coupling of the Dirichlet energy -------------------------------

/// Per-cell far-field term F_i(v) = ∫_{H^n \ Λ} |v - g(η)|^p Ψ(ξ_i,η)^{-Q-sp} dη
/// and its flux F_i'(v)/p. Data that are constant (or identically zero)
/// beyond the window use the exact radial route through κ; everything else
/// sums the graded flux mesh and continues radially with the datum frozen at
/// its profile value at the split (documented approximation).
///
/// Call warm() with the hot cells from a single thread before parallel use.
class FluxRule {
public:
    FluxRule(const KernelContext& ctx, const ScalarField& g) : ctx_(&ctx), g_(g) {
        const Grid& grid = ctx.grid();
        if (auto r = g.vanishing_radius()) {
            if (*r <= window_inradius(grid, GroupPoint(grid.n()))) {
                mode_ = Mode::Constant;
                c_ = 0.0;
                return;
            }
        }
        if (g.is_gauge_radial()) {
            const double v0 = g.radial_profile(1.0), v1 = g.radial_profile(2.0), v2 = g.radial_profile(5.0);
            if (v0 == v1 && v1 == v2) {
                mode_ = Mode::Constant;
                c_ = v0;
                return;
            }
        }
        mode_ = Mode::Mesh;
        const ExteriorMesh& mesh = ctx.flux_mesh();
        g_nodes_.resize(static_cast<std::size_t>(mesh.count()));
        for (std::int64_t q = 0; q < mesh.count(); ++q) {
            const double* pt = mesh.node(q);
            g_nodes_[static_cast<std::size_t>(q)] = g_(GroupPoint(std::vector<double>(pt, pt + mesh.dim())));
        }
        GroupPoint center(grid.n());
        for (int a = 0; a < grid.dim(); ++a)
            center.c[static_cast<std::size_t>(a)] =
                0.5 * (grid.spec().lower[static_cast<std::size_t>(a)] + grid.spec().upper[static_cast<std::size_t>(a)]);
        split_ref_ = mesh.covered_radius(center);
        g_far_ = g_.is_gauge_radial() ? g_.radial_profile(split_ref_) : 0.0;
        tail_mass_.assign(static_cast<std::size_t>(grid.cells()), std::numeric_limits<double>::quiet_NaN());
    }

    bool constant_mode() const { return mode_ == Mode::Constant; }
    double constant_value() const { return c_; }
    const ScalarField& datum() const { return g_; }

    /// F_i(v).
    double energy_term(std::int64_t cell, double v) const {
        const double p = ctx_->params().p;
        if (mode_ == Mode::Constant) {
            const double d = v - c_;
            return d == 0.0 ? 0.0 : power_abs(d, p) * ctx_->kappa(cell);
        }
        double acc = mesh_sum(cell, [&](double gq, double kw) { return power_abs(v - gq, p) * kw; });
        acc += power_abs(v - g_far_, p) * tail_mass(cell);
        return acc;
    }

    /// F_i'(v) / p — the far-field flux entering the operator.
    double flux(std::int64_t cell, double v) const {
        const double p = ctx_->params().p;
        if (mode_ == Mode::Constant) {
            const double d = v - c_;
            return d == 0.0 ? 0.0 : signed_power(d, p) * ctx_->kappa(cell);
        }
        double acc = mesh_sum(cell, [&](double gq, double kw) { return signed_power(v - gq, p) * kw; });
        acc += signed_power(v - g_far_, p) * tail_mass(cell);
        return acc;
    }

    /// κ_total and first datum moment for the p = 2 assembly:
    /// flux(v) = v·first − second.
    std::pair<double, double> linear_coefficients(std::int64_t cell) const {
        require(ctx_->params().p == 2.0, "FluxRule: linear coefficients require p = 2");
        if (mode_ == Mode::Constant) {
            const double kap = ctx_->kappa(cell);
            return {kap, c_ * kap};
        }
        const double tm = tail_mass(cell);
        const double acc_k = mesh_sum(cell, [&](double, double kw) { return kw; });
        const double acc_m = mesh_sum(cell, [&](double gq, double kw) { return gq * kw; });
        return {tm + acc_k, g_far_ * tm + acc_m};
    }

    /// Precomputes per-cell state (κ or kernel rows against the flux mesh).
    /// Single-threaded entry point.
    void warm(const std::vector<std::int64_t>& cells) const {
        if (mode_ == Mode::Constant) {
            ctx_->ensure_kappa(cells);
            return;
        }
        std::vector<std::int64_t> todo;
        for (std::int64_t c : cells) {
            if (std::isnan(tail_mass_[static_cast<std::size_t>(c)]))
                tail_mass_[static_cast<std::size_t>(c)] = compute_tail_mass(c);
            if (!rows_.count(c)) {
                rows_.emplace(c, std::vector<float>());
                todo.push_back(c);
            }
        }
        const ExteriorMesh& mesh = ctx_->flux_mesh();
        const std::int64_t nn = mesh.count();
        std::vector<std::vector<float>*> slots;
        slots.reserve(todo.size());
        for (std::int64_t c : todo) slots.push_back(&rows_.find(c)->second);
        parallel_for(static_cast<std::int64_t>(todo.size()), [&](std::int64_t k) {
            const std::int64_t c = todo[static_cast<std::size_t>(k)];
            std::vector<float>& row = *slots[static_cast<std::size_t>(k)];
            row.resize(static_cast<std::size_t>(nn));
            const double* xi = ctx_->grid().coords(c);
            const double split = split_radius(c);
            const double split4 = split * split * split * split;
            for (std::int64_t q = 0; q < nn; ++q) {
                const double q4 = detail::gauge4_of_difference(mesh.node(q), xi, ctx_->params().n);
                row[static_cast<std::size_t>(q)] =
                    q4 >= split4 ? 0.0f
                                 : static_cast<float>(std::pow(q4, -0.25 * ctx_->params().exponent()) *
                                                      mesh.weight(q));
            }
        });
    }

private:
    enum class Mode { Constant, Mesh };

    double split_radius(std::int64_t cell) const {
        return ctx_->flux_mesh().covered_radius(ctx_->grid().point(cell));
    }

    double compute_tail_mass(std::int64_t cell) const {
        const double split = split_radius(cell);
        return static_cast<double>(ctx_->params().Q()) * unit_ball_volume(ctx_->params().n) /
               ctx_->params().sp() * std::pow(split, -ctx_->params().sp());
    }

    double tail_mass(std::int64_t cell) const {
        const double v = tail_mass_[static_cast<std::size_t>(cell)];
        return std::isnan(v) ? compute_tail_mass(cell) : v;
    }

    template <class Term>
    double mesh_sum(std::int64_t cell, const Term& term) const {
        const ExteriorMesh& mesh = ctx_->flux_mesh();
        const auto it = rows_.find(cell);
        if (it != rows_.end() && !it->second.empty()) {
            const auto& row = it->second;
            double acc = 0.0;
            for (std::int64_t q = 0; q < mesh.count(); ++q) {
                const float kw = row[static_cast<std::size_t>(q)];
                if (kw != 0.0f) acc += term(g_nodes_[static_cast<std::size_t>(q)], static_cast<double>(kw));
            }
            return acc;
        }
        const double* xi = ctx_->grid().coords(cell);
        const double split = split_radius(cell);
        const double split4 = split * split * split * split;
        double acc = 0.0;
        for (std::int64_t q = 0; q < mesh.count(); ++q) {
            const double q4 = detail::gauge4_of_difference(mesh.node(q), xi, ctx_->params().n);
            if (q4 >= split4) continue;
            acc += term(g_nodes_[static_cast<std::size_t>(q)],
                        std::pow(q4, -0.25 * ctx_->params().exponent()) * mesh.weight(q));
        }
        return acc;
    }

    const KernelContext* ctx_;
    ScalarField g_;
    Mode mode_ = Mode::Constant;
    double c_ = 0.0;
    double g_far_ = 0.0;
    double split_ref_ = 0.0;
    std::vector<double> g_nodes_;
    mutable std::vector<double> tail_mass_;
    mutable std::unordered_map<std::int64_t, std::vector<float>> rows_;
};

/// Discrete Dirichlet energy
///   E(u) = (1/p)[ Σ_{unordered Λ pairs} |u_i-u_j|^p K_ij m² + Σ_i F_i(u_i) m ]
///          − Σ_{Ω} f_i u_i m.
inline double fractional_energy(const GridFunction& u, const std::vector<double>& f,
                                const KernelContext& ctx, const FluxRule& flux) {
    if (flux.constant_mode()) ctx.ensure_all_kappa();
    const Grid& g = ctx.grid();
    const double m = g.cell_measure();
    const double p = ctx.params().p;
    const std::int64_t N = g.cells();
    const double pair_sum = chunked_sum(N, [&](std::int64_t b, std::int64_t e) {
        double acc = 0.0;
        for (std::int64_t i = b; i < e; ++i) {
            double row = 0.0;
            const double ui = u[i];
            for (std::int64_t j = i + 1; j < N; ++j)
                row += power_abs(ui - u[j], p) * ctx.table().weight(i, j);
            acc += row;
        }
        return acc;
    });
    const double exterior_sum = chunked_sum(N, [&](std::int64_t b, std::int64_t e) {
        double acc = 0.0;
        for (std::int64_t i = b; i < e; ++i) acc += flux.energy_term(i, u[i]);
        return acc;
    });
    double source = 0.0;
    for (std::int64_t i = 0; i < N; ++i)
        if (u.omega[static_cast<std::size_t>(i)]) source += f[static_cast<std::size_t>(i)] * u[i];
    return (pair_sum * m * m + exterior_sum * m) / p - source * m;
}

/// Discrete nonlocal operator at a cell:
///   Σ_{j≠i, Λ} |u_i-u_j|^{p-2}(u_i-u_j) K_ij m + far-field flux.
/// (apply_operator(ξ) − f(ξ))·|cell| is the energy partial at u(ξ).
inline double apply_operator(const GridFunction& u, std::int64_t cell, const KernelContext& ctx,
                             const FluxRule& flux) {
    if (flux.constant_mode()) ctx.ensure_kappa({cell});
    const Grid& g = ctx.grid();
    const double p = ctx.params().p;
    const std::int64_t N = g.cells();
    const double pair = chunked_sum(N, [&](std::int64_t b, std::int64_t e) {
        double acc = 0.0;
        for (std::int64_t j = b; j < e; ++j) {
            if (j == cell) continue;
            acc += signed_power(u[cell] - u[j], p) * ctx.table().weight(cell, j);
        }
        return acc;
    });
    return pair * g.cell_measure() + flux.flux(cell, u[cell]);
}

/// Weak-form pairing against a test function supported in Ω:
///   Σ_{unordered pairs touching Ω} |Δu|^{p-2} Δu Δψ K m²
///   + Σ_Ω ψ·(far-field flux)·m − Σ_Ω f ψ m.
/// Vanishes at discrete solutions; ≤ 0 at discrete subsolutions for ψ ≥ 0.
inline double weak_residual(const GridFunction& u, const GridFunction& psi,
                            const std::vector<double>& f, const KernelContext& ctx,
                            const FluxRule& flux) {
    const Grid& g = ctx.grid();
    const std::int64_t N = g.cells();
    for (std::int64_t i = 0; i < N; ++i)
        if (psi[i] != 0.0 && !u.omega[static_cast<std::size_t>(i)])
            throw std::invalid_argument("weak_residual: test function not supported in the unknown set");
    const double p = ctx.params().p;
    const double m = g.cell_measure();
    const auto support = mask_cells(u.omega);
    if (flux.constant_mode()) ctx.ensure_kappa(support);
    const double pair_sum = chunked_sum(static_cast<std::int64_t>(support.size()),
                                        [&](std::int64_t b, std::int64_t e) {
        double acc = 0.0;
        for (std::int64_t a = b; a < e; ++a) {
            const std::int64_t i = support[static_cast<std::size_t>(a)];
            double row = 0.0;
            for (std::int64_t j = 0; j < N; ++j) {
                if (j == i) continue;
                if (u.omega[static_cast<std::size_t>(j)] && j < i) continue; // count Ω-Ω pairs once
                const double dpsi = psi[i] - psi[j];
                if (dpsi == 0.0) continue;
                row += signed_power(u[i] - u[j], p) * dpsi * ctx.table().weight(i, j);
            }
            acc += row;
        }
        return acc;
    });
    double flux_sum = 0.0, source = 0.0;
    for (const std::int64_t i : support) {
        if (psi[i] == 0.0) continue;
        flux_sum += psi[i] * flux.flux(i, u[i]);
        source += f[static_cast<std::size_t>(i)] * psi[i];
    }
    return pair_sum * m * m + flux_sum * m - source * m;
}

/// Σ over window cells at gauge distance ≥ R from ball_center of
/// value(cell)·Ψ(kernel_center, ·)^{-expo}·|cell|. Cells near the sphere are
/// classified and integrated subcell-wise (the cell value is held constant,
/// matching the piecewise-constant representation), as are cells close to
/// the kernel center, where the weight varies fastest.
template <class Value>
double complement_kernel_sum(const KernelContext& ctx, const Value& value,
                             const GroupPoint& ball_center, double R,
                             const GroupPoint& kernel_center, double expo) {
    const Grid& g = ctx.grid();
    const int n = g.n();
    const int d = g.dim();
    const double r4 = R * R * R * R;
    std::vector<double> hw(static_cast<std::size_t>(d));
    for (int a = 0; a < d; ++a) hw[static_cast<std::size_t>(a)] = 0.5 * g.spacing()[static_cast<std::size_t>(a)];
    const double* bc = ball_center.data();
    const double* kc = kernel_center.data();

    const double sum = chunked_sum(g.cells(), [&](std::int64_t b, std::int64_t e) {
        std::vector<double> sub(static_cast<std::size_t>(d));
        std::vector<int> sidx(static_cast<std::size_t>(d));
        double acc = 0.0;
        for (std::int64_t c = b; c < e; ++c) {
            const double* pt = g.coords(c);
            const auto ball = detail::cell_gauge_bounds(pt, bc, hw.data(), n);
            if (ball.q4_max <= r4) continue; // fully inside the excluded ball
            // refine where the sphere cuts the cell or the kernel varies by
            // more than ~2.4x across it (q4 ratio 2 = distance ratio 2^{1/4})
            bool refine = ball.q4_min < r4;
            if (!refine) {
                const auto kern = detail::cell_gauge_bounds(pt, kc, hw.data(), n);
                refine = kern.q4_max > 2.0 * kern.q4_min;
            }
            if (!refine) {
                const double q4b = detail::gauge4_of_difference(pt, bc, n);
                if (q4b < r4) continue;
                const double q4k = detail::gauge4_of_difference(pt, kc, n);
                acc += value(c) * std::pow(q4k, -0.25 * expo);
                continue;
            }
            constexpr int splits = 4;
            std::int64_t subcells = 1;
            for (int a = 0; a < d; ++a) subcells *= splits;
            const double vc = value(c);
            double cell_acc = 0.0;
            std::fill(sidx.begin(), sidx.end(), 0);
            for (std::int64_t sc = 0; sc < subcells; ++sc) {
                for (int a = 0; a < d; ++a)
                    sub[static_cast<std::size_t>(a)] =
                        pt[a] + hw[static_cast<std::size_t>(a)] * ((2.0 * sidx[static_cast<std::size_t>(a)] + 1.0) / splits - 1.0);
                const double q4b = detail::gauge4_of_difference(sub.data(), bc, n);
                if (q4b >= r4) {
                    const double q4k = detail::gauge4_of_difference(sub.data(), kc, n);
                    if (q4k > 0.0) cell_acc += std::pow(q4k, -0.25 * expo);
                }
                for (int a = d - 1; a >= 0; --a) {
                    if (++sidx[static_cast<std::size_t>(a)] < splits) break;
                    sidx[static_cast<std::size_t>(a)] = 0;
                }
            }
            acc += vc * cell_acc / static_cast<double>(subcells);
        }
        return acc;
    });
    return sum * g.cell_measure();
}

// --- Nonlocal tail ------------------------------------------------------------

/// Tail(u; ξ0, R) with its quadrature split at the window boundary:
/// value = (R^{sp}·(grid_part + farfield_part))^{1/(p-1)}. grid_part sums
/// |u|^{p-1}·Ψ(ξ0,·)^{-Q-sp}·|cell| over window cells at gauge distance ≥ R
/// from ξ0; farfield_part integrates the analytic datum beyond the window.
struct TailEstimate {
    double value = 0.0;
    double grid_part = 0.0;
    double farfield_part = 0.0;
    GroupPoint center;
    double radius = 0.0;
    double split_radius = 0.0;
    bool farfield_truncated = false; // no radial continuation was available
};

/// ∫_{H^n \ Λ} |field(η)|^{power} Ψ(center,η)^{-Q-sp} dη. Fields vanishing
/// inside the window contribute nothing; gauge-radial fields get the exact
/// (center at the origin) or offset-radialized continuation; otherwise the
/// integral is truncated at the mesh coverage and flagged.
struct FarFieldMass {
    double value = 0.0;
    double split_radius = 0.0;
    bool truncated = false;
};

inline FarFieldMass farfield_power_mass(const KernelContext& ctx, const GroupPoint& center,
                                        const ScalarField& field, double power) {
    const Grid& g = ctx.grid();
    const double expo = ctx.params().exponent();
    FarFieldMass out;
    const auto supp = field.vanishing_radius();
    if (supp && *supp <= window_inradius(g, GroupPoint(g.n()))) {
        out.split_radius = g.enclosing_gauge_radius(center);
        return out;
    }
    const auto integrand = [&](const double* pt) {
        return power_abs(field(GroupPoint(std::vector<double>(pt, pt + g.dim()))), power);
    };
    ExteriorIntegral ext;
    if (field.is_gauge_radial()) {
        const auto profile = [&](double rho) { return power_abs(field.radial_profile(rho), power); };
        const RemainderKind kind =
            gauge_norm(center) < 1e-14 ? RemainderKind::ExactRadial : RemainderKind::OffsetRadial;
        ext = exterior_integral(ctx.report_mesh(), g, center, expo, integrand, kind, profile);
    } else {
        ext = exterior_integral(ctx.report_mesh(), g, center, expo, integrand, RemainderKind::None);
        out.truncated = true;
    }
    out.value = ext.value;
    out.split_radius = ext.split_radius;
    return out;
}

inline TailEstimate nonlocal_tail(const GridFunction& u, const GroupPoint& xi0, double R,
                                  const KernelContext& ctx) {
    require(R > 0.0, "nonlocal_tail: radius must be positive");
    const KernelParams& kp = ctx.params();
    TailEstimate est;
    est.center = xi0;
    est.radius = R;
    const double expo = kp.exponent();
    const double pm1 = kp.p - 1.0;
    est.grid_part = complement_kernel_sum(
        ctx, [&](std::int64_t c) { return power_abs(u[c], pm1); }, xi0, R, xi0, expo);
    const FarFieldMass far = farfield_power_mass(ctx, xi0, u.exterior_datum, pm1);
    est.farfield_part = far.value;
    est.split_radius = far.split_radius;
    est.farfield_truncated = far.truncated;
    est.value = std::pow(std::pow(R, kp.sp()) * (est.grid_part + est.farfield_part), 1.0 / pm1);
    return est;
}

// --- Sobolev and embedding ratios ---------------------------------------------

/// ‖u‖_{L^{p*}}^p / [u]^p over the whole group for a compactly supported
/// sample (zero exterior); requires sp < Q.
inline double sobolev_ratio(const GridFunction& u, const KernelContext& ctx) {
    const KernelParams& kp = ctx.params();
    if (kp.sp() >= static_cast<double>(kp.Q()))
        throw std::domain_error("sobolev_ratio: requires sp < Q");
    const Grid& g = ctx.grid();
    double vmax = 0.0, boundary_max = 0.0;
    for (std::int64_t c = 0; c < g.cells(); ++c) {
        vmax = std::max(vmax, std::fabs(u[c]));
        const std::int32_t* idx = g.multi_index(c);
        for (int a = 0; a < g.dim(); ++a)
            if (idx[a] == 0 || idx[a] == g.spec().resolution[static_cast<std::size_t>(a)] - 1) {
                boundary_max = std::max(boundary_max, std::fabs(u[c]));
                break;
            }
    }
    if (vmax == 0.0) throw std::domain_error("sobolev_ratio: zero sample");
    require(boundary_max <= 1e-12 * vmax, "sobolev_ratio: sample is not compactly supported in the window");

    const double p = kp.p;
    const double pstar = static_cast<double>(kp.Q()) * p / (static_cast<double>(kp.Q()) - kp.sp());
    const double m = g.cell_measure();
    std::vector<std::int64_t> all(static_cast<std::size_t>(g.cells()));
    double lp = 0.0;
    for (std::int64_t c = 0; c < g.cells(); ++c) {
        all[static_cast<std::size_t>(c)] = c;
        lp += std::pow(std::fabs(u[c]), pstar);
    }
    lp = std::pow(lp * m, p / pstar);
    double semi = masked_pair_integral(ctx, all, [&](std::int64_t i, std::int64_t j) {
        return power_abs(u[i] - u[j], p);
    });
    ctx.ensure_kappa(all);
    double ext = 0.0;
    for (std::int64_t c = 0; c < g.cells(); ++c)
        if (u[c] != 0.0) ext += power_abs(u[c], p) * ctx.kappa(c);
    semi += 2.0 * ext * m; // pairs with the zero exterior, both orders
    if (semi == 0.0) throw std::domain_error("sobolev_ratio: zero seminorm");
    return lp / semi;
}

/// ‖u‖_{W^{s1,p}(D)} / ‖u‖_{W^{s,p}(D)} on the masked domain, 0 < s1 ≤ s.
/// Plain midpoint weights at both exponents keep the discretizations aligned.
inline double embedding_ratio(const GridFunction& u, double s1, const KernelContext& ctx,
                              const Mask& mask) {
    const KernelParams& kp = ctx.params();
    require(s1 > 0.0 && s1 <= kp.s, "embedding_ratio: requires 0 < s1 <= s");
    const auto cells = mask_cells(mask);
    require(!cells.empty(), "embedding_ratio: empty mask");
    const Grid& g = ctx.grid();
    const double p = kp.p;
    const double m = g.cell_measure();
    double lp = 0.0;
    for (const std::int64_t c : cells) lp += power_abs(u[c], p);
    lp *= m;

    const auto seminorm_p = [&](double sigma) {
        const double expo = static_cast<double>(kp.Q()) + sigma * p;
        const auto count = static_cast<std::int64_t>(cells.size());
        const double sum = chunked_sum(count, [&](std::int64_t b, std::int64_t e) {
            double acc = 0.0;
            for (std::int64_t a = b; a < e; ++a) {
                const std::int64_t i = cells[static_cast<std::size_t>(a)];
                for (std::int64_t k = a + 1; k < count; ++k) {
                    const std::int64_t j = cells[static_cast<std::size_t>(k)];
                    const double q4 = detail::gauge4_of_difference(g.coords(i), g.coords(j), kp.n);
                    acc += power_abs(u[i] - u[j], p) * std::pow(q4, -0.25 * expo);
                }
            }
            return acc;
        });
        return 2.0 * sum * m * m;
    };

    const double den = std::pow(lp + seminorm_p(kp.s), 1.0 / p);
    if (den == 0.0) throw std::domain_error("embedding_ratio: zero norm");
    return std::pow(lp + seminorm_p(s1), 1.0 / p) / den;
}

} // namespace hfrac
