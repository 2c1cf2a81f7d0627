#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "hfrac/common.hpp"

namespace hfrac {

/// A point ξ = (x, y, t) of the Heisenberg group H^n, x and y of length n.
/// Coordinates are stored flat as [x_1..x_n, y_1..y_n, t]; hot loops work on
/// raw coordinate spans, this type is the value-semantics API around them.
struct GroupPoint {
    std::vector<double> c; // size 2n+1

    GroupPoint() : c{0.0, 0.0, 0.0} {}
    explicit GroupPoint(int n) : c(static_cast<std::size_t>(2 * n + 1), 0.0) { require(n >= 1, "GroupPoint: n must be >= 1"); }
    GroupPoint(double x, double y, double t) : c{x, y, t} {}
    explicit GroupPoint(std::vector<double> coords) : c(std::move(coords)) {
        require(c.size() >= 3 && c.size() % 2 == 1, "GroupPoint: coordinate count must be 2n+1, n>=1");
    }

    int n() const { return static_cast<int>((c.size() - 1) / 2); }
    int dim() const { return static_cast<int>(c.size()); }

    double x(int j) const { return c[static_cast<std::size_t>(j)]; }
    double y(int j) const { return c[static_cast<std::size_t>(n() + j)]; }
    double t() const { return c.back(); }
    double& x(int j) { return c[static_cast<std::size_t>(j)]; }
    double& y(int j) { return c[static_cast<std::size_t>(n() + j)]; }
    double& t() { return c.back(); }

    const double* data() const { return c.data(); }

    bool finite() const {
        for (double v : c)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline GroupPoint group_identity(int n) { return GroupPoint(n); }

namespace detail {

/// t-component of a ∘ b given flat coordinates.
inline double mul_t(const double* a, const double* b, int n) {
    double tw = 0.0;
    for (int j = 0; j < n; ++j)
        tw += a[n + j] * b[j] - a[j] * b[n + j]; // <y,x'> - <x,y'>
    return a[2 * n] + b[2 * n] + 2.0 * tw;
}

/// Writes b^{-1} ∘ a into out (size 2n+1).
inline void difference(const double* a, const double* b, int n, double* out) {
    for (int j = 0; j < 2 * n; ++j) out[j] = a[j] - b[j];
    double tw = 0.0;
    for (int j = 0; j < n; ++j)
        tw += b[n + j] * a[j] - b[j] * a[n + j]; // <y_b, x_a> - <x_b, y_a>
    out[2 * n] = a[2 * n] - b[2 * n] - 2.0 * tw;
}

/// Fourth power of the gauge of the flat point (|z|^4 + t^2).
inline double gauge4(const double* a, int n) {
    double z2 = 0.0;
    for (int j = 0; j < 2 * n; ++j) z2 += a[j] * a[j];
    const double t = a[2 * n];
    return z2 * z2 + t * t;
}

/// Fourth power of the gauge of b^{-1} ∘ a, allocation-free.
inline double gauge4_of_difference(const double* a, const double* b, int n) {
    double z2 = 0.0;
    for (int j = 0; j < 2 * n; ++j) {
        const double d = a[j] - b[j];
        z2 += d * d;
    }
    double tw = 0.0;
    for (int j = 0; j < n; ++j)
        tw += b[n + j] * a[j] - b[j] * a[n + j];
    const double dt = a[2 * n] - b[2 * n] - 2.0 * tw;
    return z2 * z2 + dt * dt;
}

} // namespace detail

/// ξ ∘ η = (x+x', y+y', t+t'+2<y,x'>-2<x,y'>).
inline GroupPoint group_mul(const GroupPoint& a, const GroupPoint& b) {
    require(a.n() == b.n(), "group_mul: dimension mismatch");
    const int n = a.n();
    GroupPoint out(n);
    for (int j = 0; j < 2 * n; ++j) out.c[static_cast<std::size_t>(j)] = a.c[static_cast<std::size_t>(j)] + b.c[static_cast<std::size_t>(j)];
    out.c.back() = detail::mul_t(a.data(), b.data(), n);
    return out;
}

/// ξ^{-1} = -ξ.
inline GroupPoint group_inv(const GroupPoint& a) {
    GroupPoint out = a;
    for (double& v : out.c) v = -v;
    return out;
}

/// Anisotropic dilation Φ_λ(ξ) = (λx, λy, λ²t), λ > 0.
inline GroupPoint dilate(double lambda, const GroupPoint& a) {
    require(lambda > 0.0, "dilate: lambda must be positive");
    const int n = a.n();
    GroupPoint out = a;
    for (int j = 0; j < 2 * n; ++j) out.c[static_cast<std::size_t>(j)] *= lambda;
    out.c.back() *= lambda * lambda;
    return out;
}

/// Koranyi gauge (|z|^4 + t^2)^{1/4}.
inline double gauge_norm(const GroupPoint& a) {
    return std::pow(detail::gauge4(a.data(), a.n()), 0.25);
}

/// η^{-1} ∘ ξ.
inline GroupPoint group_difference(const GroupPoint& xi, const GroupPoint& eta) {
    require(xi.n() == eta.n(), "group_difference: dimension mismatch");
    GroupPoint out(xi.n());
    detail::difference(xi.data(), eta.data(), xi.n(), out.c.data());
    return out;
}

inline double gauge_distance(const GroupPoint& xi, const GroupPoint& eta) {
    require(xi.n() == eta.n(), "gauge_distance: dimension mismatch");
    return std::pow(detail::gauge4_of_difference(xi.data(), eta.data(), xi.n()), 0.25);
}

/// A homogeneous norm together with its pseudo-triangle constant.
/// The gauge satisfies the triangle inequality with constant 1; custom norms
/// must supply their own constant (>= 1), which downstream estimates carry
/// through rather than assuming.
struct HomogeneousNorm {
    enum class Kind { Gauge, Custom };

    Kind kind = Kind::Gauge;
    double triangle_constant = 1.0;
    std::function<double(const GroupPoint&)> custom;

    static HomogeneousNorm gauge() { return HomogeneousNorm{}; }

    static HomogeneousNorm make_custom(std::function<double(const GroupPoint&)> fn, double c_tilde) {
        require(c_tilde >= 1.0, "HomogeneousNorm: triangle constant must be >= 1");
        HomogeneousNorm n;
        n.kind = Kind::Custom;
        n.triangle_constant = c_tilde;
        n.custom = std::move(fn);
        return n;
    }

    double operator()(const GroupPoint& p) const {
        return kind == Kind::Gauge ? gauge_norm(p) : custom(p);
    }
};

/// Ψ(ξ, η) = norm(η^{-1} ∘ ξ); a pseudometric, symmetric for symmetric norms.
inline double pseudo_distance(const GroupPoint& xi, const GroupPoint& eta,
                              const HomogeneousNorm& norm = HomogeneousNorm::gauge()) {
    if (norm.kind == HomogeneousNorm::Kind::Gauge) return gauge_distance(xi, eta);
    return norm(group_difference(xi, eta));
}

/// Gauge ball B_R(ξ0) = {ξ : |ξ0^{-1} ∘ ξ| < R}.
struct Ball {
    GroupPoint center;
    double radius = 1.0;

    Ball() = default;
    Ball(GroupPoint c, double r) : center(std::move(c)), radius(r) {
        require(radius > 0.0, "Ball: radius must be positive");
    }
};

/// Central-difference horizontal gradient (X_1 f, ..., X_{2n} f) at ξ, where
/// X_j = ∂_{x_j} + 2 y_j ∂_t and X_{n+j} = ∂_{y_j} - 2 x_j ∂_t. The field f
/// must be evaluable on the 2(2n+1)-point stencil of half-width h.
template <class Field>
std::vector<double> horizontal_gradient(const Field& f, const GroupPoint& xi, double h) {
    require(h > 0.0, "horizontal_gradient: step must be positive");
    const int n = xi.n();
    auto partial = [&](int axis) {
        GroupPoint plus = xi, minus = xi;
        plus.c[static_cast<std::size_t>(axis)] += h;
        minus.c[static_cast<std::size_t>(axis)] -= h;
        return (f(plus) - f(minus)) / (2.0 * h);
    };
    const double df_dt = partial(2 * n);
    std::vector<double> grad(static_cast<std::size_t>(2 * n));
    for (int j = 0; j < n; ++j) {
        grad[static_cast<std::size_t>(j)] = partial(j) + 2.0 * xi.y(j) * df_dt;
        grad[static_cast<std::size_t>(n + j)] = partial(n + j) - 2.0 * xi.x(j) * df_dt;
    }
    return grad;
}

template <class Field>
double horizontal_gradient_norm(const Field& f, const GroupPoint& xi, double h) {
    double s = 0.0;
    for (double g : horizontal_gradient(f, xi, h)) s += g * g;
    return std::sqrt(s);
}

} // namespace hfrac
