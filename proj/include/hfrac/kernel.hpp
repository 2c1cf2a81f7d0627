#pragma once

#include <cmath>
#include <memory>
#include <unordered_map>
#include <vector>

#include "hfrac/grid.hpp"
#include "hfrac/group.hpp"
#include "hfrac/parallel.hpp"

namespace hfrac {

/// Structural parameters of the nonlocal operator: differentiability s,
/// summability p, group index n, homogeneous dimension Q = 2n+2, and the
/// homogeneous norm the kernel is built from.
struct KernelParams {
    int n = 1;
    double s = 0.5;
    double p = 2.0;
    HomogeneousNorm norm = HomogeneousNorm::gauge();

    KernelParams() = default;
    KernelParams(int n_, double s_, double p_, HomogeneousNorm norm_ = HomogeneousNorm::gauge())
        : n(n_), s(s_), p(p_), norm(std::move(norm_)) {
        validate();
    }

    void validate() const {
        require(n >= 1, "KernelParams: n must be >= 1");
        require(s > 0.0 && s < 1.0, "KernelParams: s must lie in (0,1)");
        require(p > 1.0 && p <= 10.0, "KernelParams: p must lie in (1,10]");
    }

    int Q() const { return 2 * n + 2; }
    double sp() const { return s * p; }
    bool sp_le_Q() const { return sp() <= static_cast<double>(Q()); }
    /// Kernel exponent Q + sp.
    double exponent() const { return static_cast<double>(Q()) + sp(); }
};

/// Singular kernel weight Ψ(ξ,η)^{-Q-sp}. The diagonal is excluded by
/// contract; callers must not pass coincident points.
inline double kernel_weight(const GroupPoint& xi, const GroupPoint& eta, const KernelParams& kp) {
    if (kp.norm.kind == HomogeneousNorm::Kind::Gauge) {
        const double q4 = detail::gauge4_of_difference(xi.data(), eta.data(), kp.n);
        if (q4 == 0.0) throw std::domain_error("kernel_weight: coincident points");
        return std::pow(q4, -0.25 * kp.exponent());
    }
    const double d = pseudo_distance(xi, eta, kp.norm);
    if (d == 0.0) throw std::domain_error("kernel_weight: coincident points");
    return std::pow(d, -kp.exponent());
}

/// Pair weights between grid cells. Pairs of adjacent cells (Chebyshev
/// distance 1 in index space) get a tensor-product subcell midpoint rule,
/// cached at construction, since the kernel varies fastest there; all other
/// pairs use the plain midpoint weight. Weights are symmetric in the pair.
class KernelTable {
public:
    KernelTable(std::shared_ptr<const Grid> grid, KernelParams params, int refine_depth = 1)
        : grid_(std::move(grid)), params_(params), refine_depth_(refine_depth) {
        require(refine_depth_ >= 0 && refine_depth_ <= 3, "KernelTable: refine depth out of range");
        require(params_.n == grid_->n(), "KernelTable: grid and params disagree on n");
        build_offsets();
        build_adjacent_cache();
    }

    const Grid& grid() const { return *grid_; }
    const KernelParams& params() const { return params_; }

    /// Midpoint kernel weight between distinct cell centers, no refinement.
    double plain(std::int64_t i, std::int64_t j) const {
        if (params_.norm.kind == HomogeneousNorm::Kind::Gauge) {
            const double q4 = detail::gauge4_of_difference(grid_->coords(i), grid_->coords(j), params_.n);
            return std::pow(q4, -0.25 * params_.exponent());
        }
        return std::pow(pseudo_distance(grid_->point(i), grid_->point(j), params_.norm), -params_.exponent());
    }

    /// Refined weight; i != j.
    double weight(std::int64_t i, std::int64_t j) const {
        if (refine_depth_ == 0) return plain(i, j);
        const std::int32_t* a = grid_->multi_index(i);
        const std::int32_t* b = grid_->multi_index(j);
        int offset_id = -1;
        bool adjacent = true;
        bool flip = false;
        const int d = grid_->dim();
        for (int ax = 0; ax < d; ++ax) {
            const int delta = static_cast<int>(b[ax]) - static_cast<int>(a[ax]);
            if (delta < -1 || delta > 1) {
                adjacent = false;
                break;
            }
        }
        if (adjacent) {
            offset_id = offset_lookup(a, b, flip);
            if (offset_id >= 0) {
                const std::int64_t base = flip ? j : i;
                return adjacent_[static_cast<std::size_t>(base * n_offsets_ + offset_id)];
            }
        }
        return plain(i, j);
    }

private:
    void build_offsets() {
        const int d = grid_->dim();
        std::vector<int> delta(static_cast<std::size_t>(d), -1);
        for (;;) {
            int first_nonzero = 0;
            for (int a = 0; a < d; ++a) {
                if (delta[static_cast<std::size_t>(a)] != 0) {
                    first_nonzero = delta[static_cast<std::size_t>(a)];
                    break;
                }
            }
            if (first_nonzero > 0) offsets_.push_back(delta); // keep the positive half
            int a = d - 1;
            for (; a >= 0; --a) {
                if (++delta[static_cast<std::size_t>(a)] <= 1) break;
                delta[static_cast<std::size_t>(a)] = -1;
            }
            if (a < 0) break;
        }
        n_offsets_ = static_cast<int>(offsets_.size());
    }

    int offset_lookup(const std::int32_t* a, const std::int32_t* b, bool& flip) const {
        const int d = grid_->dim();
        int code = 0;
        int first_nonzero = 0;
        for (int ax = 0; ax < d; ++ax) {
            const int delta = static_cast<int>(b[ax]) - static_cast<int>(a[ax]);
            if (first_nonzero == 0 && delta != 0) first_nonzero = delta;
            code = code * 3 + (delta + 1);
        }
        if (first_nonzero == 0) return -1; // same cell
        flip = first_nonzero < 0;
        if (flip) {
            code = 0;
            for (int ax = 0; ax < d; ++ax) {
                const int delta = static_cast<int>(a[ax]) - static_cast<int>(b[ax]);
                code = code * 3 + (delta + 1);
            }
        }
        const auto it = offset_code_to_id_.find(code);
        return it == offset_code_to_id_.end() ? -1 : it->second;
    }

    void build_adjacent_cache() {
        const int d = grid_->dim();
        offset_code_to_id_.reserve(offsets_.size());
        for (int id = 0; id < n_offsets_; ++id) {
            int code = 0;
            for (int ax = 0; ax < d; ++ax) code = code * 3 + (offsets_[static_cast<std::size_t>(id)][static_cast<std::size_t>(ax)] + 1);
            offset_code_to_id_.emplace(code, id);
        }
        if (refine_depth_ == 0) return;

        const int splits = 1 << refine_depth_; // subcells per axis
        std::vector<double> sub_offsets(static_cast<std::size_t>(splits));
        for (int k = 0; k < splits; ++k)
            sub_offsets[static_cast<std::size_t>(k)] = (static_cast<double>(k) + 0.5) / static_cast<double>(splits) - 0.5;

        std::int64_t sub_count = 1;
        for (int a = 0; a < d; ++a) sub_count *= splits;

        // Precompute subcell center displacements relative to a cell center.
        std::vector<double> disp(static_cast<std::size_t>(sub_count * d));
        {
            std::vector<int> sidx(static_cast<std::size_t>(d), 0);
            for (std::int64_t k = 0; k < sub_count; ++k) {
                for (int a = 0; a < d; ++a)
                    disp[static_cast<std::size_t>(k * d + a)] =
                        sub_offsets[static_cast<std::size_t>(sidx[static_cast<std::size_t>(a)])] *
                        grid_->spacing()[static_cast<std::size_t>(a)];
                for (int a = d - 1; a >= 0; --a) {
                    if (++sidx[static_cast<std::size_t>(a)] < splits) break;
                    sidx[static_cast<std::size_t>(a)] = 0;
                }
            }
        }

        adjacent_.assign(static_cast<std::size_t>(grid_->cells() * n_offsets_), 0.0);
        const auto& res = grid_->spec().resolution;
        parallel_for(grid_->cells(), [&](std::int64_t c) {
            const std::int32_t* idx = grid_->multi_index(c);
            const double* pc = grid_->coords(c);
            std::vector<double> pa(static_cast<std::size_t>(d)), pb(static_cast<std::size_t>(d));
            for (int id = 0; id < n_offsets_; ++id) {
                bool ok = true;
                std::int64_t neighbor = 0;
                for (int a = 0; a < d; ++a) {
                    const std::int64_t ni = idx[a] + offsets_[static_cast<std::size_t>(id)][static_cast<std::size_t>(a)];
                    if (ni < 0 || ni >= res[static_cast<std::size_t>(a)]) {
                        ok = false;
                        break;
                    }
                    neighbor = neighbor * res[static_cast<std::size_t>(a)] + ni;
                }
                if (!ok) continue;
                const double* pn = grid_->coords(neighbor);
                double acc = 0.0;
                for (std::int64_t ka = 0; ka < sub_count; ++ka) {
                    for (int a = 0; a < d; ++a) pa[static_cast<std::size_t>(a)] = pc[a] + disp[static_cast<std::size_t>(ka * d + a)];
                    for (std::int64_t kb = 0; kb < sub_count; ++kb) {
                        for (int a = 0; a < d; ++a) pb[static_cast<std::size_t>(a)] = pn[a] + disp[static_cast<std::size_t>(kb * d + a)];
                        if (params_.norm.kind == HomogeneousNorm::Kind::Gauge) {
                            const double q4 = detail::gauge4_of_difference(pa.data(), pb.data(), params_.n);
                            acc += std::pow(q4, -0.25 * params_.exponent());
                        } else {
                            acc += std::pow(params_.norm(group_difference(GroupPoint(pa), GroupPoint(pb))), -params_.exponent());
                        }
                    }
                }
                adjacent_[static_cast<std::size_t>(c * n_offsets_ + id)] =
                    acc / static_cast<double>(sub_count * sub_count);
            }
        });
    }

    std::shared_ptr<const Grid> grid_;
    KernelParams params_;
    int refine_depth_;
    std::vector<std::vector<int>> offsets_;
    std::unordered_map<int, int> offset_code_to_id_;
    int n_offsets_ = 0;
    std::vector<double> adjacent_;
};

} // namespace hfrac
