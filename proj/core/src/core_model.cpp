#include "oswitch/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

namespace oswitch {

CostValidation validate_costs(std::span<const double> costs, int m) {
    if (m < 1) throw StructuralError("validate_costs: mode count must be >= 1");
    if (costs.size() != static_cast<std::size_t>(m) * m)
        throw StructuralError("validate_costs: cost matrix is not m x m");
    for (int i = 0; i < m; ++i) {
        if (costs[static_cast<std::size_t>(i) * m + i] != 0.0)
            throw StructuralError("validate_costs: diagonal entry k(" + std::to_string(i) +
                                  "," + std::to_string(i) + ") is not zero");
    }

    CostValidation report;
    auto k = [&](int i, int j) { return costs[static_cast<std::size_t>(i) * m + j]; };

    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            if (k(i, j) < 0.0) {
                report.weak_ok = false;
                report.strict_ok = false;
                report.violations.push_back({i, j, j, k(i, j), 0.0, false});
            }

    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            for (int l = 0; l < m; ++l) {
                const double lhs = k(i, j) + k(j, l);
                const double rhs = k(i, l);
                if (lhs < rhs) {
                    report.weak_ok = false;
                    report.strict_ok = false;
                    report.violations.push_back({i, j, l, lhs, rhs, false});
                } else if (i != j && j != l && lhs <= rhs) {
                    report.strict_ok = false;
                    report.violations.push_back({i, j, l, lhs, rhs, true});
                }
            }
    return report;
}

SwitchingStructure::SwitchingStructure(int m, std::vector<double> costs)
    : m_(m), costs_(std::move(costs)), validation_(validate_costs(costs_, m)) {}

MembershipResult in_Q_closure(std::span<const double> y, const SwitchingStructure& s,
                              double tol) {
    const int m = s.modes();
    if (y.size() != static_cast<std::size_t>(m))
        throw StructuralError("in_Q_closure: vector length != mode count");
    double worst = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i) {
        double bound = std::numeric_limits<double>::infinity();
        for (int j = 0; j < m; ++j)
            if (j != i) bound = std::min(bound, y[j] + s.cost(i, j));
        worst = std::max(worst, y[i] - bound);
    }
    return {worst <= tol, worst};
}

std::vector<double> oblique_project(std::span<const double> y, const SwitchingStructure& s) {
    const int m = s.modes();
    if (y.size() != static_cast<std::size_t>(m))
        throw StructuralError("oblique_project: vector length != mode count");
    for (double v : y)
        if (!std::isfinite(v)) throw PreconditionError("oblique_project: non-finite input");
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            if (s.cost(i, j) < 0.0)
                throw PreconditionError("oblique_project: negative switching cost");

    std::vector<double> yhat(y.begin(), y.end());
    // Chains have at most m-1 edges, so m sweeps always suffice for
    // nonnegative costs; a sweep with no change terminates early.
    for (int sweep = 0; sweep <= m; ++sweep) {
        bool changed = false;
        for (int i = 0; i < m; ++i) {
            double v = yhat[i];
            for (int j = 0; j < m; ++j)
                if (j != i) v = std::min(v, yhat[j] + s.cost(i, j));
            if (v < yhat[i]) {
                yhat[i] = v;
                changed = true;
            }
        }
        if (!changed) return yhat;
    }
    throw InternalError("oblique_project: no fixed point within m+1 sweeps");
}

namespace {

// A boundary face as a polyhedron: one difference equality plus the domain's
// difference inequalities.
struct DiffConstraint {
    int a, b;      // coefficient +1 on a, -1 on b
    double rhs;    // y_a - y_b (= or <=) rhs
    bool equality;
};

std::vector<DiffConstraint> face_constraints(const SwitchingStructure& s, int fi, int fj) {
    std::vector<DiffConstraint> cs;
    cs.push_back({fi, fj, s.cost(fi, fj), true});
    const int m = s.modes();
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
            if (a != b && !(a == fi && b == fj)) cs.push_back({a, b, s.cost(a, b), false});
    return cs;
}

// Dykstra projection of y0 onto the intersection of difference constraints.
std::vector<double> project_polyhedron(const std::vector<DiffConstraint>& cs,
                                       std::span<const double> y0, double tol,
                                       int max_cycles) {
    const std::size_t n = y0.size();
    std::vector<double> x(y0.begin(), y0.end());
    std::vector<std::vector<double>> corr(cs.size(), std::vector<double>(n, 0.0));
    for (int cycle = 0; cycle < max_cycles; ++cycle) {
        double moved = 0.0;
        for (std::size_t c = 0; c < cs.size(); ++c) {
            const auto& con = cs[c];
            std::vector<double> w(n);
            for (std::size_t t = 0; t < n; ++t) w[t] = x[t] + corr[c][t];
            double g = w[con.a] - w[con.b] - con.rhs;
            std::vector<double> xn = w;
            if (con.equality || g > 0.0) {
                // |gradient|^2 = 2 for a difference constraint
                xn[con.a] -= g / 2.0;
                xn[con.b] += g / 2.0;
            }
            for (std::size_t t = 0; t < n; ++t) {
                corr[c][t] = w[t] - xn[t];
                moved += std::abs(xn[t] - x[t]);
            }
            x = std::move(xn);
        }
        if (moved < tol) break;
    }
    return x;
}

}  // namespace

double face_distance(const SwitchingStructure& s, int i, int j, int j2, int l, double tol) {
    const auto cs1 = face_constraints(s, i, j);
    const auto cs2 = face_constraints(s, j2, l);
    const int m = s.modes();

    std::vector<double> p(m, 0.0), q(m, 0.0);
    p = project_polyhedron(cs1, p, tol, 4000);
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 2000; ++it) {
        q = project_polyhedron(cs2, p, tol, 4000);
        p = project_polyhedron(cs1, q, tol, 4000);
        double d2 = 0.0;
        for (int t = 0; t < m; ++t) d2 += (p[t] - q[t]) * (p[t] - q[t]);
        const double d = std::sqrt(d2);
        if (std::abs(prev - d) < tol) return d;
        prev = d;
    }
    return prev;
}

SeparationResult separation_constant(const SwitchingStructure& s) {
    if (!s.strict_ok()) return {false, 0.0};
    const int m = s.modes();
    double c = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            if (j == i) continue;
            for (int l = 0; l < m; ++l) {
                if (l == j) continue;
                c = std::min(c, face_distance(s, i, j, j, l));
            }
        }
    return {true, c};
}

}  // namespace oswitch
