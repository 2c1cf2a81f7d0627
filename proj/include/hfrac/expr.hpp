#pragma once

#include <algorithm>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include "hfrac/group.hpp"

namespace hfrac {

/// Closed-form scalar field on R^{2n+1}, used mainly as the analytic datum on
/// the complement of the computational window. Small expression tree over the
/// coordinates and the gauge; radial expressions (functions of the gauge only)
/// expose a 1-D profile so far-field integrals can collapse to radial form.
class ScalarField {
public:
    enum class Kind {
        Constant, CoordX, CoordY, CoordT, Gauge,
        Add, Sub, Mul, Div, Neg, Abs, PosPart, Pow, Min, Max
    };

    ScalarField() : ScalarField(constant(0.0)) {}

    static ScalarField constant(double v) { return leaf(Kind::Constant, v, 0); }
    static ScalarField coord_x(int j = 0) { return leaf(Kind::CoordX, 0.0, j); }
    static ScalarField coord_y(int j = 0) { return leaf(Kind::CoordY, 0.0, j); }
    static ScalarField coord_t() { return leaf(Kind::CoordT, 0.0, 0); }
    static ScalarField gauge() { return leaf(Kind::Gauge, 0.0, 0); }

    ScalarField operator+(const ScalarField& o) const { return node(Kind::Add, *this, o); }
    ScalarField operator-(const ScalarField& o) const { return node(Kind::Sub, *this, o); }
    ScalarField operator*(const ScalarField& o) const { return node(Kind::Mul, *this, o); }
    ScalarField operator/(const ScalarField& o) const { return node(Kind::Div, *this, o); }
    ScalarField operator-() const { return node(Kind::Neg, *this, {}); }

    static ScalarField abs(const ScalarField& e) { return node(Kind::Abs, e, {}); }
    static ScalarField positive_part(const ScalarField& e) { return node(Kind::PosPart, e, {}); }
    static ScalarField pow(const ScalarField& base, double exponent) {
        ScalarField f = node(Kind::Pow, base, {});
        const_cast<Node&>(*f.root_).param = exponent;
        return f;
    }
    static ScalarField min(const ScalarField& a, const ScalarField& b) { return node(Kind::Min, a, b); }
    static ScalarField max(const ScalarField& a, const ScalarField& b) { return node(Kind::Max, a, b); }

    /// c · |ξ|^β. Only meaningful away from the origin for β < 0.
    static ScalarField gauge_power(double beta, double scale = 1.0) {
        return constant(scale) * pow(gauge(), beta);
    }

    /// C² compactly supported bump h·(1 - (|ξ|/R)²)³ on the gauge ball of radius R.
    static ScalarField smooth_bump(double height, double radius) {
        require(radius > 0.0, "smooth_bump: radius must be positive");
        ScalarField s = constant(1.0) - pow(gauge() / constant(radius), 2.0);
        return constant(height) * pow(positive_part(s), 3.0);
    }

    double operator()(const GroupPoint& p) const { return eval(root_.get(), p); }

    /// True when the field depends on the point only through its gauge.
    bool is_gauge_radial() const { return radial(root_.get()); }

    /// Evaluates the field as a function of the gauge; requires is_gauge_radial().
    double radial_profile(double rho) const {
        require(is_gauge_radial(), "radial_profile: field is not gauge-radial");
        return eval_radial(root_.get(), rho);
    }

    /// Radius R such that the field vanishes identically outside the gauge
    /// ball B_R(0), when such an R is structurally known.
    std::optional<double> vanishing_radius() const { return vanishing(root_.get()); }

    std::string describe() const { return describe(root_.get()); }

private:
    struct Node {
        Kind kind;
        double param = 0.0; // Constant value or Pow exponent
        int index = 0;      // coordinate index for CoordX/CoordY
        std::shared_ptr<const Node> lhs, rhs;
    };

    std::shared_ptr<const Node> root_;

    explicit ScalarField(std::shared_ptr<const Node> r) : root_(std::move(r)) {}

    static ScalarField leaf(Kind k, double param, int index) {
        auto n = std::make_shared<Node>();
        n->kind = k;
        n->param = param;
        n->index = index;
        return ScalarField(std::move(n));
    }

    static ScalarField node(Kind k, const ScalarField& a, const ScalarField& b) {
        auto n = std::make_shared<Node>();
        n->kind = k;
        n->lhs = a.root_;
        n->rhs = b.root_;
        return ScalarField(std::move(n));
    }

    static double eval(const Node* n, const GroupPoint& p) {
        switch (n->kind) {
        case Kind::Constant: return n->param;
        case Kind::CoordX:
            require(n->index < p.n(), "ScalarField: x-coordinate index out of range");
            return p.x(n->index);
        case Kind::CoordY:
            require(n->index < p.n(), "ScalarField: y-coordinate index out of range");
            return p.y(n->index);
        case Kind::CoordT: return p.t();
        case Kind::Gauge: return gauge_norm(p);
        case Kind::Add: return eval(n->lhs.get(), p) + eval(n->rhs.get(), p);
        case Kind::Sub: return eval(n->lhs.get(), p) - eval(n->rhs.get(), p);
        case Kind::Mul: return eval(n->lhs.get(), p) * eval(n->rhs.get(), p);
        case Kind::Div: return eval(n->lhs.get(), p) / eval(n->rhs.get(), p);
        case Kind::Neg: return -eval(n->lhs.get(), p);
        case Kind::Abs: return std::fabs(eval(n->lhs.get(), p));
        case Kind::PosPart: return std::max(0.0, eval(n->lhs.get(), p));
        case Kind::Pow: return std::pow(eval(n->lhs.get(), p), n->param);
        case Kind::Min: return std::min(eval(n->lhs.get(), p), eval(n->rhs.get(), p));
        case Kind::Max: return std::max(eval(n->lhs.get(), p), eval(n->rhs.get(), p));
        }
        throw std::invalid_argument("ScalarField: unsupported expression node");
    }

    static double eval_radial(const Node* n, double rho) {
        switch (n->kind) {
        case Kind::Constant: return n->param;
        case Kind::Gauge: return rho;
        case Kind::Add: return eval_radial(n->lhs.get(), rho) + eval_radial(n->rhs.get(), rho);
        case Kind::Sub: return eval_radial(n->lhs.get(), rho) - eval_radial(n->rhs.get(), rho);
        case Kind::Mul: return eval_radial(n->lhs.get(), rho) * eval_radial(n->rhs.get(), rho);
        case Kind::Div: return eval_radial(n->lhs.get(), rho) / eval_radial(n->rhs.get(), rho);
        case Kind::Neg: return -eval_radial(n->lhs.get(), rho);
        case Kind::Abs: return std::fabs(eval_radial(n->lhs.get(), rho));
        case Kind::PosPart: return std::max(0.0, eval_radial(n->lhs.get(), rho));
        case Kind::Pow: return std::pow(eval_radial(n->lhs.get(), rho), n->param);
        case Kind::Min: return std::min(eval_radial(n->lhs.get(), rho), eval_radial(n->rhs.get(), rho));
        case Kind::Max: return std::max(eval_radial(n->lhs.get(), rho), eval_radial(n->rhs.get(), rho));
        default: throw std::invalid_argument("ScalarField: non-radial node in radial evaluation");
        }
    }

    static bool radial(const Node* n) {
        switch (n->kind) {
        case Kind::Constant:
        case Kind::Gauge: return true;
        case Kind::CoordX:
        case Kind::CoordY:
        case Kind::CoordT: return false;
        case Kind::Neg:
        case Kind::Abs:
        case Kind::PosPart:
        case Kind::Pow: return radial(n->lhs.get());
        default: return radial(n->lhs.get()) && radial(n->rhs.get());
        }
    }

    static std::optional<double> vanishing(const Node* n) {
        switch (n->kind) {
        case Kind::Constant:
            return n->param == 0.0 ? std::optional<double>(0.0) : std::nullopt;
        case Kind::Mul: {
            auto a = vanishing(n->lhs.get()), b = vanishing(n->rhs.get());
            if (a && b) return std::min(*a, *b);
            if (a) return a;
            return b;
        }
        case Kind::Add:
        case Kind::Sub: {
            auto a = vanishing(n->lhs.get()), b = vanishing(n->rhs.get());
            if (a && b) return std::max(*a, *b);
            return std::nullopt;
        }
        case Kind::Neg:
        case Kind::Abs: return vanishing(n->lhs.get());
        case Kind::PosPart: {
            // (1 - (gauge/R)^2)_+ vanishes beyond R.
            const Node* e = n->lhs.get();
            if (e->kind == Kind::Sub && e->lhs->kind == Kind::Constant && e->lhs->param <= 1.0 &&
                e->rhs->kind == Kind::Pow && e->rhs->param > 0.0) {
                const Node* base = e->rhs->lhs.get();
                if (base->kind == Kind::Div && base->lhs->kind == Kind::Gauge &&
                    base->rhs->kind == Kind::Constant && base->rhs->param > 0.0)
                    return base->rhs->param;
            }
            return vanishing(n->lhs.get());
        }
        case Kind::Pow:
            if (n->param > 0.0) return vanishing(n->lhs.get());
            return std::nullopt;
        default: return std::nullopt;
        }
    }

    static std::string describe(const Node* n) {
        std::ostringstream os;
        switch (n->kind) {
        case Kind::Constant: os << n->param; break;
        case Kind::CoordX: os << "x" << (n->index + 1); break;
        case Kind::CoordY: os << "y" << (n->index + 1); break;
        case Kind::CoordT: os << "t"; break;
        case Kind::Gauge: os << "gauge"; break;
        case Kind::Add: os << "(" << describe(n->lhs.get()) << " + " << describe(n->rhs.get()) << ")"; break;
        case Kind::Sub: os << "(" << describe(n->lhs.get()) << " - " << describe(n->rhs.get()) << ")"; break;
        case Kind::Mul: os << "(" << describe(n->lhs.get()) << " * " << describe(n->rhs.get()) << ")"; break;
        case Kind::Div: os << "(" << describe(n->lhs.get()) << " / " << describe(n->rhs.get()) << ")"; break;
        case Kind::Neg: os << "(-" << describe(n->lhs.get()) << ")"; break;
        case Kind::Abs: os << "abs(" << describe(n->lhs.get()) << ")"; break;
        case Kind::PosPart: os << "pos(" << describe(n->lhs.get()) << ")"; break;
        case Kind::Pow: os << "pow(" << describe(n->lhs.get()) << ", " << n->param << ")"; break;
        case Kind::Min: os << "min(" << describe(n->lhs.get()) << ", " << describe(n->rhs.get()) << ")"; break;
        case Kind::Max: os << "max(" << describe(n->lhs.get()) << ", " << describe(n->rhs.get()) << ")"; break;
        }
        return os.str();
    }
};

} // namespace hfrac
