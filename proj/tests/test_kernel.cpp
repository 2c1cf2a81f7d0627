#include "doctest.h"

#include "hfrac/kernelops.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace hfrac;

namespace {

std::shared_ptr<Grid> lab_grid(std::int64_t res, double zhalf = 1.0, double thalf = 1.0) {
    return std::make_shared<Grid>(GridSpec::cube(1, zhalf, thalf, res));
}

KernelContext make_ctx(std::shared_ptr<Grid> g, double s, double p) {
    return KernelContext(std::move(g), KernelParams(1, s, p));
}

} // namespace

TEST_CASE("kernel weight: hand value, scaling, singularity") {
    const KernelParams kp(1, 0.5, 2.0); // Q = 4, exponent 5
    // distance 2 -> 2^{-5}
    const GroupPoint a(1), b(0.0, 0.0, 4.0); // gauge of difference = (4^2)^{1/4} = 2
    CHECK(kernel_weight(b, a, kp) == doctest::Approx(0.03125).epsilon(1e-13));
    CHECK_THROWS_AS(kernel_weight(a, a, kp), std::domain_error);

    Rng rng(11);
    for (int it = 0; it < 2000; ++it) {
        GroupPoint xi(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-4, 4));
        GroupPoint eta(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-4, 4));
        if (gauge_distance(xi, eta) < 1e-6) continue;
        const double lam = std::exp(rng.uniform(-1, 1));
        const double lhs = kernel_weight(dilate(lam, xi), dilate(lam, eta), kp);
        const double rhs = std::pow(lam, -kp.exponent()) * kernel_weight(xi, eta, kp);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-11));
        CHECK(kernel_weight(xi, eta, kp) == doctest::Approx(kernel_weight(eta, xi, kp)).epsilon(1e-12));
    }
}

TEST_CASE("pair weights: symmetry and adjacency refinement exceeds the midpoint weight") {
    auto grid = lab_grid(6);
    const KernelContext ctx = make_ctx(grid, 0.6, 2.5);
    const std::int64_t c0 = grid->flat_index({2, 2, 2});
    const std::int64_t c1 = grid->flat_index({2, 2, 3});
    const std::int64_t c2 = grid->flat_index({3, 3, 3});
    const std::int64_t far = grid->flat_index({5, 5, 5});
    CHECK(ctx.table().weight(c0, c1) == ctx.table().weight(c1, c0));
    CHECK(ctx.table().weight(c0, c2) == ctx.table().weight(c2, c0));
    // the kernel is convex in the displacement; subcell averaging can only
    // increase the weight of touching cells
    CHECK(ctx.table().weight(c0, c1) > ctx.table().plain(c0, c1));
    // non-adjacent pairs fall back to the midpoint weight
    CHECK(ctx.table().weight(c0, far) == ctx.table().plain(c0, far));
}

TEST_CASE("gagliardo seminorm: constant, two-cell toy grid") {
    auto grid = lab_grid(4);
    const KernelContext ctx = make_ctx(grid, 0.5, 2.0);
    GridFunction u(grid);
    for (auto& v : u.values) v = 7.5;
    CHECK(gagliardo_seminorm(u, ctx, full_mask(*grid)) == 0.0);

    // two masked cells, u = (0,1): seminorm^p = 2 w m^2
    Mask two(static_cast<std::size_t>(grid->cells()), 0);
    const std::int64_t a = grid->flat_index({1, 1, 1});
    const std::int64_t b = grid->flat_index({2, 3, 1});
    two[static_cast<std::size_t>(a)] = two[static_cast<std::size_t>(b)] = 1;
    GridFunction w(grid);
    w[a] = 0.0;
    w[b] = 1.0;
    const double m = grid->cell_measure();
    const double expected = 2.0 * ctx.table().weight(a, b) * m * m;
    CHECK(std::pow(gagliardo_seminorm(w, ctx, two), 2.0) == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("seminorm dilation law via the automorphism change of variables") {
    // [u ∘ Φ_λ]^p on the Φ_{1/λ}-dilated window equals λ^{sp-Q} [u]^p
    const double s = 0.6, p = 2.5;
    auto grid = lab_grid(12, 1.0, 1.0);
    const KernelContext ctx = make_ctx(grid, s, p);
    const auto bump = [](const GroupPoint& q) {
        const double g = gauge_norm(q);
        const double w = 1.0 - (g / 0.9) * (g / 0.9);
        return w > 0.0 ? w * w * w : 0.0;
    };
    const GridFunction u = GridFunction::sample(grid, bump);
    const double base = std::pow(gagliardo_seminorm(u, ctx, full_mask(*grid)), p);

    for (const double l : {2.0, 0.5}) {
        auto dgrid = std::make_shared<Grid>(GridSpec::box(
            1, {-1.0 / l, -1.0 / l, -1.0 / (l * l)}, {1.0 / l, 1.0 / l, 1.0 / (l * l)}, {12, 12, 12}));
        const KernelContext dctx = make_ctx(dgrid, s, p);
        const GridFunction v =
            GridFunction::sample(dgrid, [&](const GroupPoint& q) { return bump(dilate(l, q)); });
        const double scaled = std::pow(gagliardo_seminorm(v, dctx, full_mask(*dgrid)), p);
        const double predicted = std::pow(l, s * p - 4.0) * base;
        CHECK(scaled == doctest::Approx(predicted).epsilon(0.02));
    }
}

TEST_CASE("kernel integral outside a ball: closed form, doubling, monotonicity") {
    const KernelParams kp(1, 0.5, 2.0);
    const double omega = unit_ball_volume(1);
    for (const double gamma : {0.5, 1.0, 2.0}) {
        for (const double r : {0.5, 1.0, 2.0}) {
            const double val = kernel_integral_outside_ball(r, gamma, kp);
            const double closed = 4.0 * omega / gamma * std::pow(r, -gamma);
            CHECK(val == doctest::Approx(closed).epsilon(1e-8));
            CHECK(kernel_integral_outside_ball(2.0 * r, gamma, kp) / val ==
                  doctest::Approx(std::pow(2.0, -gamma)).epsilon(0.01));
        }
        CHECK(kernel_integral_outside_ball(1.0, gamma, kp) >
              kernel_integral_outside_ball(1.5, gamma, kp));
    }
    CHECK_THROWS_AS(kernel_integral_outside_ball(1.0, -0.5, kp), std::invalid_argument);
    CHECK_THROWS_AS(kernel_integral_outside_ball(0.0, 1.0, kp), std::invalid_argument);
}

TEST_CASE("exterior kernel mass agrees with the shell Monte Carlo oracle") {
    auto grid = lab_grid(8, 1.0, 1.0);
    const KernelContext ctx = make_ctx(grid, 0.5, 2.0);
    const std::int64_t cell = grid->flat_index({5, 4, 3});
    const GroupPoint xi = grid->point(cell);
    const double kappa = ctx.kappa(cell);

    // oracle: shell MC over (H \ Λ) ∩ {dist < rho1} + exact radial tail beyond
    const double rho1 = 32.0;
    const auto in_window = [&](const double* pt) {
        return grid->contains(GroupPoint(std::vector<double>(pt, pt + 3)));
    };
    const auto f = [&](const double* pt) {
        return std::pow(detail::gauge4_of_difference(pt, xi.data(), 1), -0.25 * ctx.params().exponent());
    };
    const double mc = oracles::mc_shell_integral(xi, 0.25, rho1, f, in_window, 99);
    const double tail = radial_layer_integral(
        1, rho1, [&](double rho) { return std::pow(rho, -ctx.params().exponent()); });
    CHECK(kappa == doctest::Approx(mc + tail).epsilon(0.03));
}

TEST_CASE("nonlocal tail: vanishing and constant cases") {
    auto grid = lab_grid(12, 1.0, 1.0);
    const double s = 0.5, p = 2.0;
    const KernelContext ctx = make_ctx(grid, s, p);

    SUBCASE("zero outside the ball gives zero tail") {
        GridFunction u(grid);
        u.exterior_datum = ScalarField::constant(0.0);
        const Mask inside = ball_mask(*grid, Ball(GroupPoint(1), 0.4));
        for (std::int64_t c = 0; c < grid->cells(); ++c)
            u[c] = inside[static_cast<std::size_t>(c)] ? 3.0 : 0.0;
        const TailEstimate t = nonlocal_tail(u, GroupPoint(1), 0.5, ctx);
        CHECK(t.value == 0.0);
        CHECK(t.grid_part == 0.0);
        CHECK(t.farfield_part == 0.0);
    }

    SUBCASE("constant function tail has the layer-cake closed form") {
        const double c0 = 2.3;
        GridFunction u(grid);
        for (auto& v : u.values) v = c0;
        u.exterior_datum = ScalarField::constant(c0);
        for (const double R : {0.5, 0.8}) {
            const TailEstimate t = nonlocal_tail(u, GroupPoint(1), R, ctx);
            const double closed = c0 * std::pow(4.0 * unit_ball_volume(1) / (s * p), 1.0 / (p - 1.0));
            CHECK(t.value == doctest::Approx(closed).epsilon(0.03));
            // reconstruction identity
            CHECK(t.value == doctest::Approx(std::pow(
                      std::pow(R, s * p) * (t.grid_part + t.farfield_part), 1.0 / (p - 1.0))));
        }
    }
}

TEST_CASE("nonlocal tail split against a brute-force extended grid") {
    // decaying radial datum; brute force sums a 48-per-axis window 6x as wide
    const double s = 0.6, p = 2.0;
    auto grid = lab_grid(16, 1.0, 1.0);
    const KernelContext ctx = make_ctx(grid, s, p);
    const ScalarField datum = ScalarField::constant(2.0) /
                              (ScalarField::constant(1.0) + ScalarField::pow(ScalarField::gauge(), 4.0));
    GridFunction u = GridFunction::sample(grid, [&](const GroupPoint& q) { return datum(q); });
    u.exterior_datum = datum;
    const double R = 0.8;
    const GroupPoint xi0(1);

    GridSpec wide = GridSpec::cube(1, 2.0, 4.0, 48);
    wide.max_cells = 200000;
    auto wgrid = std::make_shared<Grid>(wide);
    const double expo = ctx.params().exponent();
    double brute = 0.0;
    for (std::int64_t c = 0; c < wgrid->cells(); ++c) {
        const double q4 = detail::gauge4_of_difference(wgrid->coords(c), xi0.data(), 1);
        const double dist = std::pow(q4, 0.25);
        if (dist < R) continue;
        const double gv = datum(wgrid->point(c));
        brute += std::pow(std::fabs(gv), p - 1.0) * std::pow(q4, -0.25 * expo);
    }
    brute *= wgrid->cell_measure();
    // radial continuation beyond the brute-force window (radial integrand)
    brute += radial_layer_integral(1, wgrid->enclosing_gauge_radius(xi0), [&](double rho) {
        return std::pow(datum.radial_profile(rho), p - 1.0) * std::pow(rho, -expo);
    });
    const double brute_tail = std::pow(std::pow(R, s * p) * brute, 1.0 / (p - 1.0));

    const TailEstimate t = nonlocal_tail(u, xi0, R, ctx);
    CHECK(t.value == doctest::Approx(brute_tail).epsilon(0.03));
}

TEST_CASE("tail split invariance when the window grows") {
    const double s = 0.5, p = 3.0;
    const ScalarField datum = ScalarField::constant(1.0);
    const GroupPoint xi0(1);
    double small_val = 0.0, small_far = 0.0;
    double big_val = 0.0;
    {
        auto grid = lab_grid(12, 1.0, 1.0);
        const KernelContext ctx = make_ctx(grid, s, p);
        GridFunction u = GridFunction::sample(grid, [&](const GroupPoint& q) { return datum(q); });
        u.exterior_datum = datum;
        const TailEstimate t = nonlocal_tail(u, xi0, 0.5, ctx);
        small_val = t.value;
        small_far = t.farfield_part;
    }
    {
        auto grid = lab_grid(24, 2.0, 4.0);
        const KernelContext ctx = make_ctx(grid, s, p);
        GridFunction u = GridFunction::sample(grid, [&](const GroupPoint& q) { return datum(q); });
        u.exterior_datum = datum;
        big_val = nonlocal_tail(u, xi0, 0.5, ctx).value;
    }
    // growing the window moves mass between the split parts without moving
    // the value by more than the far-field share
    const double pm1 = p - 1.0;
    const double far_bound = std::pow(std::pow(0.5, s * p) * small_far, 1.0 / pm1);
    CHECK(std::fabs(big_val - small_val) <= far_bound + 0.02 * small_val);
}

TEST_CASE("fractional energy and operator: consistency and degeneracies") {
    auto grid = lab_grid(6, 1.0, 1.0);
    const Mask omega = ball_mask(*grid, Ball(GroupPoint(1), 0.6));
    REQUIRE(mask_count(omega) >= 3);

    for (const double p : {1.5, 2.0, 3.0}) {
        CAPTURE(p);
        const KernelContext ctx = make_ctx(grid, 0.5, p);
        const ScalarField g = ScalarField::constant(0.5);
        const FluxRule flux(ctx, g);
        std::vector<double> f(static_cast<std::size_t>(grid->cells()), 0.0);
        Rng rng(5 + static_cast<std::uint64_t>(10 * p));
        GridFunction u = GridFunction::sample(grid, [&](const GroupPoint& q) {
            return 0.5 + 0.3 * std::sin(3 * q.x(0)) * std::cos(2 * q.y(0)) + 0.1 * q.t();
        });
        u.omega = omega;
        u.exterior_datum = g;
        for (std::size_t c = 0; c < f.size(); ++c) f[c] = 0.2 * rng.normal();

        // u == const == exterior datum: zero energy, zero operator
        GridFunction cu(grid);
        for (auto& v : cu.values) v = 0.5;
        cu.omega = omega;
        cu.exterior_datum = g;
        const std::vector<double> zf(static_cast<std::size_t>(grid->cells()), 0.0);
        CHECK(fractional_energy(cu, zf, ctx, flux) == doctest::Approx(0.0).epsilon(1e-14));
        CHECK(apply_operator(cu, grid->flat_index({3, 3, 3}), ctx, flux) == doctest::Approx(0.0));

        // oddness: L(-u) = -L(u) with mirrored datum
        const FluxRule nflux(ctx, ScalarField::constant(-0.5));
        GridFunction nu = u;
        for (auto& v : nu.values) v = -v;
        nu.omega = omega;
        nu.exterior_datum = ScalarField::constant(-0.5);
        const std::int64_t probe = grid->flat_index({2, 3, 3});
        CHECK(apply_operator(nu, probe, ctx, nflux) ==
              doctest::Approx(-apply_operator(u, probe, ctx, flux)).epsilon(1e-10));

        // operator equals the finite-difference energy gradient
        const double m = grid->cell_measure();
        const auto omega_cells = mask_cells(omega);
        for (int k = 0; k < 4; ++k) {
            const std::int64_t cell =
                omega_cells[static_cast<std::size_t>(rng.next_u64() % omega_cells.size())];
            const double eps = 1e-5;
            GridFunction up = u, dn = u;
            up[cell] += eps;
            dn[cell] -= eps;
            const double fd =
                (fractional_energy(up, f, ctx, flux) - fractional_energy(dn, f, ctx, flux)) / (2 * eps);
            const double an = (apply_operator(u, cell, ctx, flux) - f[static_cast<std::size_t>(cell)]) * m;
            CHECK(an == doctest::Approx(fd).epsilon(1e-6));
        }

        // convexity of the energy in the unknowns (f = 0)
        for (int k = 0; k < 5; ++k) {
            GridFunction a = u, b = u, mid = u;
            for (const std::int64_t c : omega_cells) {
                a[c] += rng.normal();
                b[c] += rng.normal();
                mid[c] = 0.5 * (a[c] + b[c]);
            }
            CHECK(fractional_energy(mid, zf, ctx, flux) <=
                  0.5 * fractional_energy(a, zf, ctx, flux) +
                      0.5 * fractional_energy(b, zf, ctx, flux) + 1e-10);
        }
    }
}

TEST_CASE("weak residual: zero test function, constant solutions") {
    auto grid = lab_grid(6, 1.0, 1.0);
    const KernelContext ctx = make_ctx(grid, 0.4, 2.5);
    const ScalarField g = ScalarField::constant(1.0);
    const FluxRule flux(ctx, g);
    const Mask omega = ball_mask(*grid, Ball(GroupPoint(1), 0.6));
    GridFunction u(grid);
    for (auto& v : u.values) v = 1.0;
    u.omega = omega;
    u.exterior_datum = g;
    const std::vector<double> f(static_cast<std::size_t>(grid->cells()), 0.0);

    GridFunction psi(grid);
    psi.omega = omega;
    CHECK(weak_residual(u, psi, f, ctx, flux) == 0.0);

    Rng rng(31);
    for (int k = 0; k < 10; ++k) {
        GridFunction t(grid);
        t.omega = omega;
        for (std::int64_t c = 0; c < grid->cells(); ++c)
            if (omega[static_cast<std::size_t>(c)]) t[c] = rng.normal();
        CHECK(weak_residual(u, t, f, ctx, flux) == doctest::Approx(0.0).epsilon(1e-12));
    }

    GridFunction badpsi(grid);
    badpsi.omega = omega;
    badpsi[grid->flat_index({0, 0, 0})] = 1.0;
    CHECK_THROWS_AS(weak_residual(u, badpsi, f, ctx, flux), std::invalid_argument);
}

TEST_CASE("sobolev ratio: dilation invariance and degenerate input") {
    const double s = 0.5, p = 2.0;
    const auto bump = [](const GroupPoint& q) {
        const double g = gauge_norm(q);
        const double w = 1.0 - (g / 0.8) * (g / 0.8);
        return w > 0.0 ? w * w * w : 0.0;
    };
    auto grid = lab_grid(16, 1.0, 1.0);
    const KernelContext ctx = make_ctx(grid, s, p);
    const GridFunction u = GridFunction::sample(grid, bump);
    const double r1 = sobolev_ratio(u, ctx);
    CHECK(std::isfinite(r1));

    // dilated sample on the dilated window
    auto dgrid =
        std::make_shared<Grid>(GridSpec::box(1, {-0.5, -0.5, -0.25}, {0.5, 0.5, 0.25}, {16, 16, 16}));
    const KernelContext dctx = make_ctx(dgrid, s, p);
    const GridFunction v =
        GridFunction::sample(dgrid, [&](const GroupPoint& q) { return bump(dilate(2.0, q)); });
    CHECK(sobolev_ratio(v, dctx) == doctest::Approx(r1).epsilon(0.03));

    GridFunction zero(grid);
    CHECK_THROWS_AS(sobolev_ratio(zero, ctx), std::domain_error);
    CHECK_THROWS_AS(sobolev_ratio(u, make_ctx(grid, 0.99, 8.0)), std::domain_error); // sp > Q
}

TEST_CASE("embedding ratio: unit at s1 = s, seminorm monotone on small domains") {
    auto grid = std::make_shared<Grid>(GridSpec::cube(1, 0.2, 0.04, 8)); // diameter well under 1
    const KernelContext ctx = make_ctx(grid, 0.7, 2.0);
    const Mask all = full_mask(*grid);
    Rng rng(41);
    GridFunction u(grid);
    for (auto& v : u.values) v = rng.normal();

    CHECK(embedding_ratio(u, 0.7, ctx, all) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(embedding_ratio(u, 0.9, ctx, all), std::invalid_argument);

    // all pair distances <= 1: the kernel grows with the exponent, so the
    // s-seminorm dominates and the ratio is nondecreasing in s1 and <= 1
    double prev = -1.0;
    for (const double s1 : {0.2, 0.4, 0.6}) {
        const double r = embedding_ratio(u, s1, ctx, all);
        CHECK(std::isfinite(r));
        CHECK(r <= 1.0 + 1e-12);
        if (prev > 0.0) CHECK(r >= prev * (1.0 - 1e-12));
        prev = r;
    }

    for (int k = 0; k < 20; ++k) {
        const double a = rng.uniform(0.5, 2.0), b = rng.uniform(-1, 1);
        GridFunction w = GridFunction::sample(grid, [&](const GroupPoint& q) {
            return std::sin(a * q.x(0) + b) * std::cos(a * q.y(0)) + 0.5 * q.t();
        });
        CHECK(std::isfinite(embedding_ratio(w, 0.35, ctx, all)));
    }
}
