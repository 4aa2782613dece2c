#include "oswitch/generator.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace oswitch {

LipschitzProbe probe_lipschitz(const Generator& g, int m, int d, std::uint64_t seed,
                               int trials, double t, std::span<const double> state) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    double worst = 0.0;
    std::vector<double> z(d), z2(d);
    for (int trial = 0; trial < trials; ++trial) {
        const int mode = static_cast<int>(rng() % static_cast<std::uint64_t>(m));
        const double y = u(rng), y2 = u(rng);
        double dz = 0.0;
        for (int r = 0; r < d; ++r) {
            z[r] = u(rng);
            z2[r] = u(rng);
            dz += (z[r] - z2[r]) * (z[r] - z2[r]);
        }
        dz = std::sqrt(dz);
        const double denom = std::abs(y - y2) + dz;
        if (denom < 1e-12) continue;
        const double dpsi = std::abs(g.psi(t, y, z, mode, state) - g.psi(t, y2, z2, mode, state));
        worst = std::max(worst, dpsi / (g.lipschitz * denom));
    }
    return {worst <= 1.0 + 1e-9, worst};
}

MembershipResult terminal_in_domain(const TerminalCondition& tc, const SwitchingStructure& s,
                                    double tol) {
    if (!tc.is_constant())
        return {true, -std::numeric_limits<double>::infinity()};  // checked on the lattice
    return in_Q_closure(tc.constants, s, tol);
}

}  // namespace oswitch
