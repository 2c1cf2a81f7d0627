#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "hfrac/grid.hpp"
#include "hfrac/kernel.hpp"
#include "hfrac/parallel.hpp"
#include "hfrac/quadrature.hpp"

namespace hfrac {

/// Surface measure of the unit sphere S^{2n-1} in R^{2n}: 2 π^n / (n-1)!.
inline double euclidean_sphere_area(int n) {
    double fact = 1.0;
    for (int k = 2; k <= n - 1; ++k) fact *= k;
    return 2.0 * std::pow(3.14159265358979323846264338328, n) / fact;
}

/// Lebesgue volume ω of the unit gauge ball, via the 1-D profile
/// ω = 2 σ_{2n} ∫_0^1 ρ^{2n-1} sqrt(1-ρ^4) dρ. |B_r| = ω r^Q for every center.
inline double unit_ball_volume(int n) {
    require(n >= 1, "unit_ball_volume: n must be >= 1");
    static thread_local std::vector<double> cache;
    if (static_cast<int>(cache.size()) >= n && cache[static_cast<std::size_t>(n - 1)] > 0.0)
        return cache[static_cast<std::size_t>(n - 1)];
    const double sigma = euclidean_sphere_area(n);
    const double integral = integrate_1d(
        [n](double rho) {
            return std::pow(rho, 2 * n - 1) * std::sqrt(std::max(0.0, 1.0 - std::pow(rho, 4)));
        },
        0.0, 1.0, 1e-13);
    const double v = 2.0 * sigma * integral;
    if (static_cast<int>(cache.size()) < n) cache.resize(static_cast<std::size_t>(n), 0.0);
    cache[static_cast<std::size_t>(n - 1)] = v;
    return v;
}

/// ∫_{|ξ| > rho0} W(|ξ|) dξ = Q ω ∫_{rho0}^∞ W(ρ) ρ^{Q-1} dρ, exact for
/// gauge-radial integrands by dilation homogeneity of the Lebesgue measure.
template <class W>
double radial_layer_integral(int n, double rho0, const W& w, double rel_tol = 1e-12) {
    require(rho0 > 0.0, "radial_layer_integral: radius must be positive");
    const int Q = 2 * n + 2;
    const double qomega = static_cast<double>(Q) * unit_ball_volume(n);
    return qomega * integrate_to_infinity(
                        [&](double rho) { return w(rho) * std::pow(rho, Q - 1); }, rho0, rel_tol);
}

/// ∫_{H^n \ B_r(0)} gauge^{-Q-γ}; equals (Qω/γ) r^{-γ} in exact arithmetic.
inline double kernel_integral_outside_ball(double r, double gamma, const KernelParams& kp) {
    require(r > 0.0, "kernel_integral_outside_ball: r must be positive");
    require(gamma > 0.0, "kernel_integral_outside_ball: gamma must be positive");
    const double expo = static_cast<double>(kp.Q()) + gamma;
    return radial_layer_integral(kp.n, r, [&](double rho) { return std::pow(rho, -expo); });
}

/// Deterministic graded quadrature of the window's complement. Nested boxes
/// grow dyadically from the window (z-halfwidths double, the t-halfwidth
/// quadruples per level, matching the gauge scaling); each level carries its
/// own lattice whose cells tile box_l \ box_{l-1} exactly. Resolutions are
/// multiples of 8 so inner-box faces land on cell boundaries, never on cell
/// centers.
class ExteriorMesh {
public:
    struct Options {
        int levels = 12;
        std::int64_t res0 = 16; // level-0 lattice resolution per axis
        std::int64_t res1 = 16;
        std::int64_t res_far = 8; // levels >= 2
    };

    explicit ExteriorMesh(const Grid& grid) : ExteriorMesh(grid, Options()) {}

    ExteriorMesh(const Grid& grid, Options opt) : n_(grid.n()), dim_(grid.dim()), opt_(opt) {
        require(opt.levels >= 1, "ExteriorMesh: need at least one level");
        for (std::int64_t r : {opt.res0, opt.res1, opt.res_far})
            require(r >= 8 && r % 8 == 0, "ExteriorMesh: level resolutions must be multiples of 8");
        center_.assign(static_cast<std::size_t>(dim_), 0.0);
        half0_.assign(static_cast<std::size_t>(dim_), 0.0);
        for (int a = 0; a < dim_; ++a) {
            center_[static_cast<std::size_t>(a)] =
                0.5 * (grid.spec().lower[static_cast<std::size_t>(a)] + grid.spec().upper[static_cast<std::size_t>(a)]);
            half0_[static_cast<std::size_t>(a)] =
                0.5 * (grid.spec().upper[static_cast<std::size_t>(a)] - grid.spec().lower[static_cast<std::size_t>(a)]);
        }
        build();
    }

    std::int64_t count() const { return static_cast<std::int64_t>(weights_.size()); }
    const double* node(std::int64_t k) const { return coords_.data() + k * dim_; }
    double weight(std::int64_t k) const { return weights_[static_cast<std::size_t>(k)]; }
    int level_of(std::int64_t k) const { return level_of_[static_cast<std::size_t>(k)]; }
    /// Half the cell extent per axis for nodes on the given level.
    const double* level_halfwidths(int level) const { return level_half_.data() + level * dim_; }
    /// Conservative gauge diameter of cells on the given level.
    double level_gauge_diameter(int level) const { return level_diam_[static_cast<std::size_t>(level)]; }
    int dim() const { return dim_; }
    int n() const { return n_; }

    /// Largest rho with B_rho(xi) inside the outermost covered box (conservative).
    double covered_radius(const GroupPoint& xi) const {
        return inradius_of_box(box_halfwidths(opt_.levels - 1), xi);
    }

private:
    std::vector<double> box_halfwidths(int level) const {
        // level -1 is the window; level l >= 0 scales z by 2^{l+1}, t by 2·4^l.
        std::vector<double> h = half0_;
        if (level < 0) return h;
        const double zf = std::pow(2.0, level + 1);
        const double tf = 2.0 * std::pow(4.0, level);
        for (int a = 0; a < dim_ - 1; ++a) h[static_cast<std::size_t>(a)] *= zf;
        h.back() *= tf;
        return h;
    }

    double inradius_of_box(const std::vector<double>& half, const GroupPoint& xi) const {
        double rho = std::numeric_limits<double>::infinity();
        double z2 = 0.0;
        for (int a = 0; a < dim_ - 1; ++a) {
            const double off = xi.c[static_cast<std::size_t>(a)] - center_[static_cast<std::size_t>(a)];
            const double gap = half[static_cast<std::size_t>(a)] - std::fabs(off);
            if (gap <= 0.0) return 0.0;
            rho = std::min(rho, gap);
            z2 += xi.c[static_cast<std::size_t>(a)] * xi.c[static_cast<std::size_t>(a)];
        }
        const double znorm = std::sqrt(z2);
        const double tgap = half.back() - std::fabs(xi.t() - center_.back());
        if (tgap <= 0.0) return 0.0;
        // t-extent of B_rho(xi) is at most rho^2 + 2 rho |z(xi)|
        const double rho_t = -znorm + std::sqrt(znorm * znorm + tgap);
        return std::min(rho, rho_t);
    }

    void build() {
        level_half_.resize(static_cast<std::size_t>(opt_.levels * dim_));
        level_diam_.resize(static_cast<std::size_t>(opt_.levels));
        for (int level = 0; level < opt_.levels; ++level) {
            const std::vector<double> outer = box_halfwidths(level);
            const std::vector<double> inner = box_halfwidths(level - 1);
            const std::int64_t res = level == 0 ? opt_.res0 : (level == 1 ? opt_.res1 : opt_.res_far);
            std::vector<double> h(static_cast<std::size_t>(dim_));
            double vol = 1.0;
            for (int a = 0; a < dim_; ++a) {
                h[static_cast<std::size_t>(a)] = 2.0 * outer[static_cast<std::size_t>(a)] / static_cast<double>(res);
                vol *= h[static_cast<std::size_t>(a)];
                level_half_[static_cast<std::size_t>(level * dim_ + a)] = 0.5 * h[static_cast<std::size_t>(a)];
            }
            // conservative gauge diameter of a level cell; the twist inflates
            // t-differences by 2|z| per unit of z-offset
            double zmax = 0.0;
            for (int a = 0; a < dim_ - 1; ++a) {
                const double e = std::fabs(center_[static_cast<std::size_t>(a)]) + outer[static_cast<std::size_t>(a)];
                zmax += e * e;
            }
            zmax = std::sqrt(zmax);
            double dz2 = 0.0;
            for (int a = 0; a < dim_ - 1; ++a) dz2 += h[static_cast<std::size_t>(a)] * h[static_cast<std::size_t>(a)];
            const double dt_eff = h.back() + 2.0 * zmax * std::sqrt(dz2);
            level_diam_[static_cast<std::size_t>(level)] = std::pow(dz2 * dz2 + dt_eff * dt_eff, 0.25);

            std::vector<std::int64_t> idx(static_cast<std::size_t>(dim_), 0);
            std::vector<double> pt(static_cast<std::size_t>(dim_));
            for (;;) {
                bool inside_inner = true;
                for (int a = 0; a < dim_; ++a) {
                    pt[static_cast<std::size_t>(a)] =
                        center_[static_cast<std::size_t>(a)] - outer[static_cast<std::size_t>(a)] +
                        (static_cast<double>(idx[static_cast<std::size_t>(a)]) + 0.5) * h[static_cast<std::size_t>(a)];
                    if (std::fabs(pt[static_cast<std::size_t>(a)] - center_[static_cast<std::size_t>(a)]) >
                        inner[static_cast<std::size_t>(a)])
                        inside_inner = false;
                }
                if (!inside_inner) {
                    coords_.insert(coords_.end(), pt.begin(), pt.end());
                    weights_.push_back(vol);
                    level_of_.push_back(static_cast<std::uint8_t>(level));
                }
                int a = dim_ - 1;
                for (; a >= 0; --a) {
                    if (++idx[static_cast<std::size_t>(a)] < res) break;
                    idx[static_cast<std::size_t>(a)] = 0;
                }
                if (a < 0) break;
            }
        }
    }

    int n_, dim_;
    Options opt_;
    std::vector<double> center_, half0_;
    std::vector<double> coords_;
    std::vector<double> weights_;
    std::vector<std::uint8_t> level_of_;
    std::vector<double> level_half_;
    std::vector<double> level_diam_;
};

namespace detail {

struct GaugeCellBounds {
    double q4_min, q4_max;
};

/// Tight bounds on the fourth gauge power of ξ0^{-1} ∘ η as η ranges over the
/// box [pt ± hw]. The twist part of the gauge is affine in η, so the bounds
/// are componentwise exact up to the z-norm triangle inequality.
inline GaugeCellBounds cell_gauge_bounds(const double* pt, const double* c0, const double* hw, int n) {
    double dz2 = 0.0, rz2 = 0.0, tw = 0.0, dtw = 0.0;
    for (int j = 0; j < n; ++j) {
        const double dx = pt[j] - c0[j];
        const double dy = pt[n + j] - c0[n + j];
        dz2 += dx * dx + dy * dy;
        rz2 += hw[j] * hw[j] + hw[n + j] * hw[n + j];
        tw += c0[n + j] * pt[j] - c0[j] * pt[n + j];
        dtw += std::fabs(c0[n + j]) * hw[j] + std::fabs(c0[j]) * hw[n + j];
    }
    const double tcomp = pt[2 * n] - c0[2 * n] - 2.0 * tw;
    const double dz = std::sqrt(dz2), rz = std::sqrt(rz2);
    const double dt_half = hw[2 * n] + 2.0 * dtw;
    const double zlo = std::max(0.0, dz - rz), zhi = dz + rz;
    const double tlo = std::max(0.0, std::fabs(tcomp) - dt_half), thi = std::fabs(tcomp) + dt_half;
    return {zlo * zlo * zlo * zlo + tlo * tlo, zhi * zhi * zhi * zhi + thi * thi};
}

} // namespace detail

/// Conservative largest rho with B_rho(xi) contained in the window box.
/// Returns 0 when xi lies outside the window.
inline double window_inradius(const Grid& grid, const GroupPoint& xi) {
    double rho = std::numeric_limits<double>::infinity();
    double z2 = 0.0;
    for (int a = 0; a < grid.dim() - 1; ++a) {
        const double v = xi.c[static_cast<std::size_t>(a)];
        const double gap = std::min(grid.spec().upper[static_cast<std::size_t>(a)] - v,
                                    v - grid.spec().lower[static_cast<std::size_t>(a)]);
        if (gap <= 0.0) return 0.0;
        rho = std::min(rho, gap);
        z2 += v * v;
    }
    const double znorm = std::sqrt(z2);
    const double tgap = std::min(grid.spec().upper.back() - xi.t(), xi.t() - grid.spec().lower.back());
    if (tgap <= 0.0) return 0.0;
    return std::min(rho, -znorm + std::sqrt(znorm * znorm + tgap));
}

enum class RemainderKind {
    None,        // no radial continuation (integrand vanishes far out)
    ExactRadial, // integrand is gauge-radial about the integration center
    OffsetRadial // radial about the origin; the center offset is ignored beyond the split
};

struct ExteriorIntegral {
    double value = 0.0;
    double mesh_part = 0.0;
    double remainder = 0.0;
    double split_radius = 0.0;
    RemainderKind remainder_kind = RemainderKind::None;
};

/// ∫_{H^n \ Λ} G(η) Ψ(ξ*, η)^{-kernel_exponent} dη.
///
/// Mesh nodes with gauge distance below the split radius are summed directly
/// (cells straddling the split sphere are classified subcell-wise); the rest
/// is the 1-D radial layer integral of `profile` from the split outward. The
/// split radius always encloses the window, so the two regions partition the
/// complement exactly. For integrands radial about ξ* the split defaults to
/// the window-enclosing radius and the remainder is exact.
template <class G>
ExteriorIntegral exterior_integral(const ExteriorMesh& mesh, const Grid& grid, const GroupPoint& xi,
                                   double kernel_exponent, const G& integrand,
                                   RemainderKind remainder_kind,
                                   const std::function<double(double)>& profile = {},
                                   double split_radius = 0.0) {
    const int n = mesh.n();
    const int d = mesh.dim();
    ExteriorIntegral out;
    double split = split_radius;
    if (split <= 0.0) {
        split = remainder_kind == RemainderKind::ExactRadial ? grid.enclosing_gauge_radius(xi)
                                                             : mesh.covered_radius(xi);
    }
    split = std::max(split, grid.enclosing_gauge_radius(xi));
    require(split <= mesh.covered_radius(xi) * (1.0 + 1e-9),
            "exterior_integral: split radius exceeds mesh coverage");
    out.split_radius = split;
    out.remainder_kind = remainder_kind;

    const double split4 = split * split * split * split;
    const double* c0 = xi.data();

    out.mesh_part = chunked_sum(mesh.count(), [&](std::int64_t b, std::int64_t e) {
        std::vector<double> sub(static_cast<std::size_t>(d));
        std::vector<int> sidx(static_cast<std::size_t>(d));
        double acc = 0.0;
        for (std::int64_t k = b; k < e; ++k) {
            const double* pt = mesh.node(k);
            const double q4 = detail::gauge4_of_difference(pt, c0, n);
            const double* hw = mesh.level_halfwidths(mesh.level_of(k));
            const auto [q4_min, q4_max] = detail::cell_gauge_bounds(pt, c0, hw, n);
            if (q4_min >= split4) continue;
            if (q4_max <= split4) {
                acc += integrand(pt) * std::pow(q4, -0.25 * kernel_exponent) * mesh.weight(k);
                continue;
            }
            // straddles the split sphere: 4 subcells per axis
            constexpr int splits = 4;
            std::int64_t subcells = 1;
            for (int a = 0; a < d; ++a) subcells *= splits;
            const double wsub = mesh.weight(k) / static_cast<double>(subcells);
            std::fill(sidx.begin(), sidx.end(), 0);
            for (std::int64_t sc = 0; sc < subcells; ++sc) {
                for (int a = 0; a < d; ++a)
                    sub[static_cast<std::size_t>(a)] =
                        pt[a] + hw[a] * ((2.0 * sidx[static_cast<std::size_t>(a)] + 1.0) / splits - 1.0);
                const double sq4 = detail::gauge4_of_difference(sub.data(), c0, n);
                if (sq4 < split4)
                    acc += integrand(sub.data()) * std::pow(sq4, -0.25 * kernel_exponent) * wsub;
                for (int a = d - 1; a >= 0; --a) {
                    if (++sidx[static_cast<std::size_t>(a)] < splits) break;
                    sidx[static_cast<std::size_t>(a)] = 0;
                }
            }
        }
        return acc;
    });

    if (remainder_kind != RemainderKind::None) {
        require(static_cast<bool>(profile), "exterior_integral: remainder requested without a profile");
        out.remainder = radial_layer_integral(
            n, split, [&](double rho) { return profile(rho) * std::pow(rho, -kernel_exponent); });
    }
    out.value = out.mesh_part + out.remainder;
    return out;
}

} // namespace hfrac
