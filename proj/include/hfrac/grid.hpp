#pragma once

#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "hfrac/expr.hpp"
#include "hfrac/group.hpp"

namespace hfrac {

inline std::int64_t default_max_cells() {
    if (const char* env = std::getenv("HFRAC_MAX_CELLS")) {
        char* end = nullptr;
        const long long v = std::strtoll(env, &end, 10);
        if (end != env && v > 0) return static_cast<std::int64_t>(v);
    }
    return 32768;
}

/// Uniform cell-centered box discretization of a window Λ ⊂ R^{2n+1}.
/// Axis order is [x_1..x_n, y_1..y_n, t]; the flat cell index runs with the
/// last axis (t) fastest: c = ((i_0·r_1 + i_1)·r_2 + i_2)·... for resolutions
/// r_a. Cell (i_0..i_d) has center lower[a] + (i_a + 1/2)·spacing[a].
struct GridSpec {
    int n = 1;
    std::vector<double> lower, upper;       // size 2n+1 each
    std::vector<std::int64_t> resolution;   // size 2n+1, all >= 1
    std::int64_t max_cells = default_max_cells();

    int dim() const { return 2 * n + 1; }

    static GridSpec box(int n, const std::vector<double>& lo, const std::vector<double>& hi,
                        const std::vector<std::int64_t>& res) {
        GridSpec s;
        s.n = n;
        s.lower = lo;
        s.upper = hi;
        s.resolution = res;
        return s;
    }

    /// Cubic window [-half, half]^{2n} × [-t_half, t_half] at a single resolution.
    static GridSpec cube(int n, double half, double t_half, std::int64_t res) {
        GridSpec s;
        s.n = n;
        const int d = s.dim();
        s.lower.assign(static_cast<std::size_t>(d), -half);
        s.upper.assign(static_cast<std::size_t>(d), half);
        s.lower.back() = -t_half;
        s.upper.back() = t_half;
        s.resolution.assign(static_cast<std::size_t>(d), res);
        return s;
    }

    void validate() const {
        require(n >= 1, "GridSpec: n must be >= 1");
        const auto d = static_cast<std::size_t>(dim());
        require(lower.size() == d && upper.size() == d && resolution.size() == d,
                "GridSpec: lower/upper/resolution must have 2n+1 entries");
        std::int64_t cells = 1;
        for (std::size_t a = 0; a < d; ++a) {
            require(upper[a] > lower[a], "GridSpec: upper must exceed lower componentwise");
            require(resolution[a] >= 1, "GridSpec: resolution must be positive");
            cells *= resolution[a];
        }
        if (cells > max_cells)
            throw resource_error("GridSpec: cell count " + std::to_string(cells) +
                                 " exceeds maximum " + std::to_string(max_cells));
    }
};

class Grid {
public:
    explicit Grid(GridSpec spec) : spec_(std::move(spec)) {
        spec_.validate();
        const int d = spec_.dim();
        spacing_.resize(static_cast<std::size_t>(d));
        cell_measure_ = 1.0;
        cells_ = 1;
        for (int a = 0; a < d; ++a) {
            spacing_[static_cast<std::size_t>(a)] =
                (spec_.upper[static_cast<std::size_t>(a)] - spec_.lower[static_cast<std::size_t>(a)]) /
                static_cast<double>(spec_.resolution[static_cast<std::size_t>(a)]);
            cell_measure_ *= spacing_[static_cast<std::size_t>(a)];
            cells_ *= spec_.resolution[static_cast<std::size_t>(a)];
        }
        centers_.resize(static_cast<std::size_t>(cells_ * d));
        multi_.resize(static_cast<std::size_t>(cells_ * d));
        std::vector<std::int64_t> idx(static_cast<std::size_t>(d), 0);
        for (std::int64_t c = 0; c < cells_; ++c) {
            for (int a = 0; a < d; ++a) {
                centers_[static_cast<std::size_t>(c * d + a)] =
                    spec_.lower[static_cast<std::size_t>(a)] +
                    (static_cast<double>(idx[static_cast<std::size_t>(a)]) + 0.5) * spacing_[static_cast<std::size_t>(a)];
                multi_[static_cast<std::size_t>(c * d + a)] = static_cast<std::int32_t>(idx[static_cast<std::size_t>(a)]);
            }
            for (int a = d - 1; a >= 0; --a) {
                if (++idx[static_cast<std::size_t>(a)] < spec_.resolution[static_cast<std::size_t>(a)]) break;
                idx[static_cast<std::size_t>(a)] = 0;
            }
        }
    }

    const GridSpec& spec() const { return spec_; }
    int n() const { return spec_.n; }
    int dim() const { return spec_.dim(); }
    std::int64_t cells() const { return cells_; }
    double cell_measure() const { return cell_measure_; }
    const std::vector<double>& spacing() const { return spacing_; }
    double min_spacing() const {
        double m = spacing_[0];
        for (double h : spacing_) m = std::min(m, h);
        return m;
    }

    const double* coords(std::int64_t c) const { return centers_.data() + c * dim(); }
    const std::int32_t* multi_index(std::int64_t c) const { return multi_.data() + c * dim(); }

    GroupPoint point(std::int64_t c) const {
        const double* p = coords(c);
        return GroupPoint(std::vector<double>(p, p + dim()));
    }

    std::int64_t flat_index(const std::vector<std::int64_t>& idx) const {
        std::int64_t c = 0;
        for (int a = 0; a < dim(); ++a)
            c = c * spec_.resolution[static_cast<std::size_t>(a)] + idx[static_cast<std::size_t>(a)];
        return c;
    }

    bool contains(const GroupPoint& p) const {
        for (int a = 0; a < dim(); ++a) {
            const double v = p.c[static_cast<std::size_t>(a)];
            if (v < spec_.lower[static_cast<std::size_t>(a)] || v > spec_.upper[static_cast<std::size_t>(a)])
                return false;
        }
        return true;
    }

    /// The 2^{2n+1} corner points of the window.
    std::vector<GroupPoint> corners() const {
        const int d = dim();
        std::vector<GroupPoint> out;
        out.reserve(static_cast<std::size_t>(1) << d);
        for (std::uint32_t bits = 0; bits < (1u << d); ++bits) {
            GroupPoint p(n());
            for (int a = 0; a < d; ++a)
                p.c[static_cast<std::size_t>(a)] =
                    (bits >> a) & 1u ? spec_.upper[static_cast<std::size_t>(a)] : spec_.lower[static_cast<std::size_t>(a)];
            out.push_back(std::move(p));
        }
        return out;
    }

    /// Smallest R with Λ ⊆ B_R(ξ). The fourth gauge power of the difference is
    /// convex over the box, so the maximum sits at a corner.
    double enclosing_gauge_radius(const GroupPoint& xi) const {
        double best = 0.0;
        for (const auto& corner : corners())
            best = std::max(best, gauge_distance(corner, xi));
        return best;
    }

private:
    GridSpec spec_;
    std::int64_t cells_ = 0;
    double cell_measure_ = 0.0;
    std::vector<double> spacing_;
    std::vector<double> centers_;
    std::vector<std::int32_t> multi_;
};

using Mask = std::vector<std::uint8_t>;

inline Mask full_mask(const Grid& g) { return Mask(static_cast<std::size_t>(g.cells()), 1); }

inline std::int64_t mask_count(const Mask& m) {
    std::int64_t c = 0;
    for (auto v : m) c += v ? 1 : 0;
    return c;
}

/// Cells whose centers lie strictly inside the gauge ball.
inline Mask ball_mask(const Grid& g, const Ball& ball) {
    Mask m(static_cast<std::size_t>(g.cells()), 0);
    const int n = g.n();
    const double* c0 = ball.center.data();
    const double r4 = ball.radius * ball.radius * ball.radius * ball.radius;
    for (std::int64_t c = 0; c < g.cells(); ++c)
        if (detail::gauge4_of_difference(g.coords(c), c0, n) < r4) m[static_cast<std::size_t>(c)] = 1;
    return m;
}

/// Midpoint-rule integral of cell values over masked cells.
inline double integrate(const Grid& g, const std::vector<double>& values, const Mask& mask) {
    require(values.size() == static_cast<std::size_t>(g.cells()) && mask.size() == values.size(),
            "integrate: value/mask length mismatch");
    double s = 0.0;
    for (std::size_t c = 0; c < values.size(); ++c)
        if (mask[c]) s += values[c];
    return s * g.cell_measure();
}

inline double integrate(const Grid& g, const std::vector<double>& values) {
    return integrate(g, values, full_mask(g));
}

/// A real field sampled on a grid, with the subset Ω of unknowns and the
/// analytic datum used beyond the window.
struct GridFunction {
    std::shared_ptr<const Grid> grid;
    std::vector<double> values;
    Mask omega;
    ScalarField exterior_datum = ScalarField::constant(0.0);

    GridFunction() = default;

    explicit GridFunction(std::shared_ptr<const Grid> g)
        : grid(std::move(g)),
          values(static_cast<std::size_t>(grid->cells()), 0.0),
          omega(static_cast<std::size_t>(grid->cells()), 0) {}

    template <class F>
    static GridFunction sample(std::shared_ptr<const Grid> g, const F& f) {
        GridFunction u(g);
        for (std::int64_t c = 0; c < u.grid->cells(); ++c)
            u.values[static_cast<std::size_t>(c)] = f(u.grid->point(c));
        return u;
    }

    double operator[](std::int64_t c) const { return values[static_cast<std::size_t>(c)]; }
    double& operator[](std::int64_t c) { return values[static_cast<std::size_t>(c)]; }

    bool finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline double evaluate_exterior(const GridFunction& u, const GroupPoint& xi) {
    return u.exterior_datum(xi);
}

/// Ω cells must keep at least one cell of margin to every face of the window.
inline bool omega_mask_has_margin(const Grid& g, const Mask& omega) {
    for (std::int64_t c = 0; c < g.cells(); ++c) {
        if (!omega[static_cast<std::size_t>(c)]) continue;
        const std::int32_t* idx = g.multi_index(c);
        for (int a = 0; a < g.dim(); ++a)
            if (idx[a] == 0 || idx[a] == g.spec().resolution[static_cast<std::size_t>(a)] - 1)
                return false;
    }
    return true;
}

// --- CSV serialization ------------------------------------------------------
//
// Header for n = 1: i,j,k,x,y,t,value,in_omega (i over x, j over y, k over t;
// rows in flat-index order, t fastest). For n > 1 the index columns become
// i0..i{2n} and the coordinate columns x1..xn,y1..yn,t. Doubles are printed
// with 17 significant digits so finite values round-trip exactly.

inline std::string csv_header(int n) {
    if (n == 1) return "i,j,k,x,y,t,value,in_omega";
    std::string h;
    for (int a = 0; a < 2 * n + 1; ++a) h += "i" + std::to_string(a) + ",";
    for (int j = 1; j <= n; ++j) h += "x" + std::to_string(j) + ",";
    for (int j = 1; j <= n; ++j) h += "y" + std::to_string(j) + ",";
    h += "t,value,in_omega";
    return h;
}

inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string grid_function_csv(const GridFunction& u) {
    const Grid& g = *u.grid;
    std::string out = csv_header(g.n()) + "\n";
    for (std::int64_t c = 0; c < g.cells(); ++c) {
        const std::int32_t* idx = g.multi_index(c);
        const double* p = g.coords(c);
        for (int a = 0; a < g.dim(); ++a) {
            out += std::to_string(idx[a]);
            out += ',';
        }
        for (int a = 0; a < g.dim(); ++a) {
            out += format_g17(p[a]);
            out += ',';
        }
        out += format_g17(u.values[static_cast<std::size_t>(c)]);
        out += ',';
        out += u.omega[static_cast<std::size_t>(c)] ? '1' : '0';
        out += '\n';
    }
    return out;
}

inline void write_csv(const GridFunction& u, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    require(f.good(), "write_csv: cannot open " + path);
    f << grid_function_csv(u);
}

/// Reads values and the Ω mask back onto an existing grid; the file must have
/// one row per cell in flat-index order.
inline GridFunction read_csv(std::shared_ptr<const Grid> grid, const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), "read_csv: cannot open " + path);
    std::string line;
    require(static_cast<bool>(std::getline(f, line)), "read_csv: empty file");
    require(line == csv_header(grid->n()), "read_csv: unexpected header in " + path);
    GridFunction u(grid);
    const int d = grid->dim();
    for (std::int64_t c = 0; c < grid->cells(); ++c) {
        require(static_cast<bool>(std::getline(f, line)), "read_csv: truncated file");
        std::size_t pos = 0;
        auto next_field = [&]() {
            const std::size_t comma = line.find(',', pos);
            std::string field = line.substr(pos, comma == std::string::npos ? comma : comma - pos);
            pos = comma == std::string::npos ? line.size() : comma + 1;
            return field;
        };
        for (int a = 0; a < 2 * d; ++a) next_field(); // indices and coordinates
        u.values[static_cast<std::size_t>(c)] = std::strtod(next_field().c_str(), nullptr);
        u.omega[static_cast<std::size_t>(c)] = next_field() == "1" ? 1 : 0;
    }
    return u;
}

} // namespace hfrac
