#include "doctest.h"

#include "hfrac/exterior.hpp"
#include "hfrac/grid.hpp"
#include "hfrac/quadrature.hpp"
#include "oracles.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

using namespace hfrac;

TEST_CASE("1-D quadrature: adaptive Simpson and improper integrals") {
    CHECK(integrate_1d([](double x) { return x * x; }, 0.0, 1.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(integrate_1d([](double x) { return std::sin(x); }, 0.0, 3.14159265358979323846) ==
          doctest::Approx(2.0).epsilon(1e-10));
    CHECK(integrate_to_infinity([](double r) { return 1.0 / (r * r); }, 1.0) ==
          doctest::Approx(1.0).epsilon(1e-9));
    CHECK(integrate_to_infinity([](double r) { return std::pow(r, -2.2); }, 0.5) ==
          doctest::Approx(std::pow(0.5, -1.2) / 1.2).epsilon(1e-9));
}

TEST_CASE("grid construction: centers, ordering, cell counts") {
    auto spec = GridSpec::box(1, {-1.0, -2.0, -3.0}, {1.0, 2.0, 3.0}, {1, 1, 1});
    Grid g1(spec);
    CHECK(g1.cells() == 1);
    CHECK(g1.point(0).x(0) == doctest::Approx(0.0));
    CHECK(g1.point(0).y(0) == doctest::Approx(0.0));
    CHECK(g1.point(0).t() == doctest::Approx(0.0));

    Grid g(GridSpec::box(1, {0.0, 0.0, 0.0}, {2.0, 3.0, 4.0}, {2, 3, 4}));
    CHECK(g.cells() == 24);
    // flat index runs t fastest: cell (i,j,k) sits at ((i*3)+j)*4+k
    const std::int64_t c = g.flat_index({1, 2, 3});
    CHECK(c == ((1 * 3) + 2) * 4 + 3);
    // closed-form index -> coordinate map: lower + (idx + 1/2) * spacing
    CHECK(g.point(c).x(0) == doctest::Approx(0.0 + 1.5 * 1.0));
    CHECK(g.point(c).y(0) == doctest::Approx(0.0 + 2.5 * 1.0));
    CHECK(g.point(c).t() == doctest::Approx(0.0 + 3.5 * 1.0));
    CHECK(g.cell_measure() == doctest::Approx(1.0));
}

TEST_CASE("grid spec validation and the cell budget") {
    auto bad = GridSpec::box(1, {0, 0, 0}, {1, 1, -1}, {2, 2, 2});
    CHECK_THROWS_AS(Grid{bad}, std::invalid_argument);
    auto over = GridSpec::cube(1, 1.0, 1.0, 64); // 262144 > default budget
    CHECK_THROWS_AS(Grid{over}, resource_error);
    over.max_cells = 300000;
    CHECK_NOTHROW(Grid{over});
}

TEST_CASE("ball masks: degenerate radii and exact single-cell hit") {
    auto grid = std::make_shared<Grid>(GridSpec::cube(1, 1.0, 1.0, 5));
    const Ball everything(GroupPoint(1), 1e9);
    CHECK(mask_count(ball_mask(*grid, everything)) == grid->cells());

    // tiny ball around the central cell center captures exactly that cell
    const std::int64_t center = grid->flat_index({2, 2, 2});
    const Ball tiny(grid->point(center), 0.4 * grid->min_spacing());
    const Mask m = ball_mask(*grid, tiny);
    CHECK(mask_count(m) == 1);
    CHECK(m[static_cast<std::size_t>(center)] == 1);
}

namespace {

// Counting volume of B_r(0) on the gauge-shaped window adapted to r
// (z-halfwidth 1.1r, t-halfwidth 1.21r²); small gauge balls are r²-thin
// along t, so a window at a fixed aspect cannot resolve every radius.
double counted_ball_volume(double r, std::int64_t res) {
    Grid grid(GridSpec::box(1, {-1.1 * r, -1.1 * r, -1.21 * r * r}, {1.1 * r, 1.1 * r, 1.21 * r * r},
                            {res, res, res}));
    return grid.cell_measure() * static_cast<double>(mask_count(ball_mask(grid, Ball(GroupPoint(1), r))));
}

} // namespace

TEST_CASE("ball mask volume scales like r^Q") {
    std::vector<double> rs{0.5, 1.0, 2.0};
    std::vector<double> vols;
    for (double r : rs) vols.push_back(counted_ball_volume(r, 32));
    const int Q = 4;
    const double ref = vols[1];
    for (std::size_t i = 0; i < rs.size(); ++i)
        CHECK(vols[i] / std::pow(rs[i], Q) == doctest::Approx(ref).epsilon(0.03));
    // the counted unit volume itself is a real quadrature result
    CHECK(ref == doctest::Approx(unit_ball_volume(1)).epsilon(0.03));
    // fitted exponent over {0.25, 0.5, 1, 2} within 0.1 of Q
    std::vector<double> rfit{0.25, 0.5, 1.0, 2.0};
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (double r : rfit) {
        const double v = counted_ball_volume(r, 32);
        const double lx = std::log(r), ly = std::log(v);
        sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
    }
    const double npt = static_cast<double>(rfit.size());
    const double slope = (npt * sxy - sx * sy) / (npt * sxx - sx * sx);
    CHECK(slope == doctest::Approx(4.0).epsilon(0.025)); // within 0.1 of Q=4
}

TEST_CASE("midpoint integration: trivial cases and the ball volume oracle") {
    auto grid = std::make_shared<Grid>(GridSpec::box(1, {-1.1, -1.1, -1.3}, {1.1, 1.1, 1.3}, {28, 28, 28}));
    std::vector<double> zero(static_cast<std::size_t>(grid->cells()), 0.0);
    CHECK(integrate(*grid, zero) == 0.0);

    const Mask ball = ball_mask(*grid, Ball(GroupPoint(1), 1.0));
    std::vector<double> field(static_cast<std::size_t>(grid->cells()), 3.5);
    CHECK(integrate(*grid, field, ball) ==
          doctest::Approx(3.5 * static_cast<double>(mask_count(ball)) * grid->cell_measure()));

    // |B_1| against the rejection-sampling oracle and the 1-D reduction
    const double vol_grid =
        integrate(*grid, std::vector<double>(static_cast<std::size_t>(grid->cells()), 1.0), ball);
    const double vol_mc = oracles::mc_unit_ball_volume(1, 2024);
    CHECK(vol_grid == doctest::Approx(vol_mc).epsilon(0.02));
    CHECK(unit_ball_volume(1) == doctest::Approx(vol_mc).epsilon(0.02));
}

TEST_CASE("midpoint quadrature converges at second order on smooth fields") {
    // separable integrand with a product closed form
    const auto f = [](const GroupPoint& p) { return std::cos(p.x(0)) * std::cos(p.y(0)) * std::cos(p.t()); };
    const double exact = std::pow(2.0 * std::sin(1.0), 3);
    double prev = -1.0;
    for (std::int64_t res : {8, 16, 32}) {
        auto grid = std::make_shared<Grid>(GridSpec::cube(1, 1.0, 1.0, res));
        const GridFunction u = GridFunction::sample(grid, f);
        const double err = std::fabs(integrate(*grid, u.values) - exact);
        if (prev > 0.0) CHECK(prev / err > 3.5);
        prev = err;
    }
}

TEST_CASE("exterior datum evaluation") {
    auto grid = std::make_shared<Grid>(GridSpec::cube(1, 1.0, 1.0, 4));
    GridFunction u(grid);
    SUBCASE("zero datum") {
        u.exterior_datum = ScalarField::constant(0.0);
        CHECK(evaluate_exterior(u, GroupPoint(3.0, 1.0, -2.0)) == 0.0);
    }
    SUBCASE("inverse gauge at gauge 2") {
        u.exterior_datum = ScalarField::pow(ScalarField::gauge(), -1.0);
        CHECK(evaluate_exterior(u, GroupPoint(0.0, 0.0, 4.0)) == doctest::Approx(0.5).epsilon(1e-14));
    }
    SUBCASE("smooth decay against an independent evaluator") {
        const double c = 1.7;
        u.exterior_datum = ScalarField::constant(c) /
                           (ScalarField::constant(1.0) + ScalarField::pow(ScalarField::gauge(), 4.0));
        Rng rng(9);
        for (int it = 0; it < 200; ++it) {
            GroupPoint p(rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-9, 9));
            const double z2 = p.x(0) * p.x(0) + p.y(0) * p.y(0);
            const double g4 = z2 * z2 + p.t() * p.t();
            CHECK(evaluate_exterior(u, p) == doctest::Approx(c / (1.0 + g4)).epsilon(1e-12));
        }
    }
}

TEST_CASE("scalar field structure queries") {
    CHECK(ScalarField::gauge_power(0.5).is_gauge_radial());
    CHECK(!(ScalarField::coord_x() * ScalarField::gauge()).is_gauge_radial());
    CHECK(ScalarField::smooth_bump(2.0, 0.8).is_gauge_radial());
    auto r = ScalarField::smooth_bump(2.0, 0.8).vanishing_radius();
    REQUIRE(r.has_value());
    CHECK(*r == doctest::Approx(0.8));
    CHECK(ScalarField::constant(0.0).vanishing_radius().has_value());
    CHECK(!ScalarField::constant(1.0).vanishing_radius().has_value());
    // radial profile agrees with pointwise evaluation on a gauge sphere point
    const ScalarField f = ScalarField::gauge_power(1.5, 2.0);
    CHECK(f.radial_profile(2.0) == doctest::Approx(f(GroupPoint(0.0, 0.0, 4.0))).epsilon(1e-13));
}

TEST_CASE("csv round trip is exact and the header matches") {
    auto grid = std::make_shared<Grid>(GridSpec::box(1, {-1.0, -1.0, -2.0}, {1.0, 1.0, 2.0}, {3, 4, 5}));
    GridFunction u(grid);
    Rng rng(321);
    for (auto& v : u.values) v = rng.normal() * std::pow(10.0, rng.uniform(-12, 12));
    u.values[7] = 1.0 / 3.0;
    for (std::size_t c = 0; c < u.omega.size(); ++c) u.omega[c] = rng.uniform() < 0.4 ? 1 : 0;

    const std::string body = grid_function_csv(u);
    CHECK(body.substr(0, body.find('\n')) == "i,j,k,x,y,t,value,in_omega");

    const std::string path = (std::filesystem::temp_directory_path() / "hfrac_roundtrip.csv").string();
    write_csv(u, path);
    const GridFunction v = read_csv(grid, path);
    for (std::int64_t c = 0; c < grid->cells(); ++c) {
        CHECK(v[c] == u[c]); // bit-exact through %.17g
        CHECK(v.omega[static_cast<std::size_t>(c)] == u.omega[static_cast<std::size_t>(c)]);
    }
    std::remove(path.c_str());
}

TEST_CASE("omega margin validation") {
    auto grid = std::make_shared<Grid>(GridSpec::cube(1, 1.0, 1.0, 4));
    Mask omega(static_cast<std::size_t>(grid->cells()), 0);
    omega[static_cast<std::size_t>(grid->flat_index({1, 1, 1}))] = 1;
    CHECK(omega_mask_has_margin(*grid, omega));
    omega[static_cast<std::size_t>(grid->flat_index({0, 1, 1}))] = 1;
    CHECK(!omega_mask_has_margin(*grid, omega));
}
