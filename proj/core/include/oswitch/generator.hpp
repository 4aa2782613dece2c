#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "oswitch/core_model.hpp"

namespace oswitch {

/// Scalar driver psi(t, y, z, mode). The optional state span carries the
/// Markovian (or path-derived) state when one is attached to the solve;
/// otherwise it is empty.
struct Generator {
    using Fn = std::function<double(double t, double y, std::span<const double> z, int mode,
                                    std::span<const double> state)>;
    Fn psi;
    double lipschitz = 0.0;  // C in |psi(t,y,z,i)-psi(t,y',z',i)| <= C(|y-y'|+|z-z'|)
};

struct LipschitzProbe {
    bool ok;
    double worst_ratio;  // max observed |dpsi| / (C * (|dy|+|dz|))
};

/// Randomized spot-check of the declared Lipschitz constant.
LipschitzProbe probe_lipschitz(const Generator& g, int m, int d, std::uint64_t seed,
                               int trials, double t = 0.5,
                               std::span<const double> state = {});

/// Terminal payoff: either a constant vector (one entry per mode) or a
/// function g(x, i) of the terminal state.
struct TerminalCondition {
    std::vector<double> constants;  // non-empty iff constant
    std::function<double(std::span<const double> x, int mode)> g;

    bool is_constant() const { return !constants.empty(); }
    double value(std::span<const double> x, int mode) const {
        return is_constant() ? constants[static_cast<std::size_t>(mode)] : g(x, mode);
    }

    static TerminalCondition constant(std::vector<double> xi) {
        TerminalCondition tc;
        tc.constants = std::move(xi);
        return tc;
    }
    static TerminalCondition function(std::function<double(std::span<const double>, int)> fn) {
        TerminalCondition tc;
        tc.g = std::move(fn);
        return tc;
    }
};

/// Checks that a constant terminal vector lies in the domain closure.
/// Functional terminals are checked node-wise by the lattice solvers.
MembershipResult terminal_in_domain(const TerminalCondition& tc, const SwitchingStructure& s,
                                    double tol = 0.0);

}  // namespace oswitch
