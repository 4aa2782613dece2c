#include "oswitch/sde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "oswitch/bsde_lattice.hpp"

namespace oswitch {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Box-Muller on explicit 53-bit uniforms, identical across platforms.
class NormalStream {
  public:
    explicit NormalStream(std::uint64_t seed) : rng_(seed) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

  private:
    double uniform() { return (rng_() >> 11) * 0x1.0p-53; }

    std::mt19937_64 rng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

double pairwise_sum(const double* v, std::size_t n) {
    if (n <= 8) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += v[i];
        return acc;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

}  // namespace

PathEnsemble simulate_driverless(const DiffusionSpec& spec, double T, int steps,
                                 std::size_t n_paths, std::uint64_t seed,
                                 std::size_t double_cap) {
    if (steps <= 0 || !(T > 0.0))
        throw PreconditionError("simulate_driverless: need steps > 0 and T > 0");
    const std::size_t need = n_paths * (static_cast<std::size_t>(steps) * 2 + 1);
    if (need > double_cap)
        throw CapacityError("simulate_driverless: " + std::to_string(need) +
                            " stored values exceed the cap of " + std::to_string(double_cap));

    PathEnsemble paths;
    paths.T = T;
    paths.steps = steps;
    paths.n_paths = n_paths;
    paths.X.resize(n_paths * (steps + 1));
    paths.dW.resize(n_paths * static_cast<std::size_t>(steps));
    const double dt = T / steps, sq = std::sqrt(dt);

    for (std::size_t p = 0; p < n_paths; ++p) {
        NormalStream normals(splitmix64(seed ^ (0x5851f42d4c957f2dull * (p + 1))));
        double x = spec.x0;
        paths.X[p * (steps + 1)] = x;
        for (int k = 0; k < steps; ++k) {
            const double dw = sq * normals.next();
            paths.dW[p * steps + k] = dw;
            x += spec.sigma(k * dt, x) * dw;
            paths.X[p * (steps + 1) + k + 1] = x;
        }
    }
    return paths;
}

MarkovianFeedbackRule MarkovianFeedbackRule::bind(const LatticeModel& lattice,
                                                  const FeedbackStrategy& strat, int m) {
    if (lattice.dimension() != 1)
        throw PreconditionError("MarkovianFeedbackRule: needs a one-dimensional lattice");
    if (strat.decision.size() != lattice.levels().size())
        throw StructuralError("MarkovianFeedbackRule: strategy does not match the lattice");

    MarkovianFeedbackRule rule;
    rule.m_ = m;
    rule.initial_mode_ = strat.initial_mode;
    const int levels = static_cast<int>(lattice.levels().size());
    rule.coords_.resize(levels);
    rule.decisions_.resize(levels);
    for (int n = 0; n < levels; ++n) {
        const auto& level = lattice.levels()[n];
        std::vector<int> order(level.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            return node_state(level[a])[0] < node_state(level[b])[0];
        });
        rule.coords_[n].resize(level.size());
        rule.decisions_[n].resize(level.size() * m);
        for (std::size_t r = 0; r < order.size(); ++r) {
            const int v = order[r];
            rule.coords_[n][r] = node_state(level[v])[0];
            for (int a = 0; a < m; ++a)
                rule.decisions_[n][r * m + a] =
                    strat.decision[n][static_cast<std::size_t>(v) * m + a];
        }
    }
    return rule;
}

int MarkovianFeedbackRule::decide(int level, double x, int entering_mode) const {
    if (level < 0 || level >= static_cast<int>(coords_.size())) return entering_mode;
    const auto& c = coords_[level];
    const auto it = std::lower_bound(c.begin(), c.end(), x);
    std::size_t r;
    if (it == c.begin()) {
        r = 0;
    } else if (it == c.end()) {
        r = c.size() - 1;
    } else {
        const std::size_t hi = static_cast<std::size_t>(it - c.begin());
        r = (x - c[hi - 1] <= c[hi] - x) ? hi - 1 : hi;
    }
    return decisions_[level][r * m_ + entering_mode];
}

double girsanov_weight(const PathEnsemble& paths, std::size_t p,
                       const std::function<double(double, double, int)>& drift,
                       const std::vector<int>& modes) {
    const double dt = paths.dt();
    double logw = 0.0;
    for (int k = 0; k < paths.steps; ++k) {
        const double b = drift(k * dt, paths.x(p, k), modes[k]);
        logw += b * paths.dw(p, k) - 0.5 * b * b * dt;
    }
    return std::exp(logw);
}

CostEstimate estimate_cost(const PathEnsemble& paths, const SwitchingStructure& s,
                           const MarkovianFeedbackRule& rule, const CostModel& cost) {
    const double dt = paths.dt();
    const std::size_t P = paths.n_paths;
    std::vector<double> weighted(P), weights(P);
    std::vector<int> modes(paths.steps);
    double switch_cost_sum = 0.0;
    std::size_t switch_count = 0;

    for (std::size_t p = 0; p < P; ++p) {
        int mode = rule.initial_mode();
        double running = 0.0, switching = 0.0;
        for (int k = 0; k < paths.steps; ++k) {
            const double x = paths.x(p, k);
            const int next_mode = rule.decide(k, x, mode);
            if (next_mode != mode) {
                switching += s.cost(mode, next_mode);
                ++switch_count;
                mode = next_mode;
            }
            modes[k] = mode;
            running += cost.running(k * dt, x, mode) * dt;
        }
        const double xT = paths.x(p, paths.steps);
        const double terminal = cost.terminal.value({&xT, 1}, mode);
        const double w = girsanov_weight(paths, p, cost.drift, modes);
        weights[p] = w;
        weighted[p] = w * (running + switching + terminal);
        switch_cost_sum += switching;
    }

    CostEstimate est;
    est.n_paths = P;
    est.mean = pairwise_sum(weighted.data(), P) / P;
    est.mean_weight = pairwise_sum(weights.data(), P) / P;
    est.total_switch_cost = switch_cost_sum / P;
    est.avg_switches = static_cast<double>(switch_count) / P;
    double ss = 0.0, ssw = 0.0;
    for (std::size_t p = 0; p < P; ++p) {
        const double d = weighted[p] - est.mean;
        ss += d * d;
        const double dw = weights[p] - est.mean_weight;
        ssw += dw * dw;
    }
    est.se = P > 1 ? std::sqrt(ss / (static_cast<double>(P) * (P - 1))) : 0.0;
    est.weight_se = P > 1 ? std::sqrt(ssw / (static_cast<double>(P) * (P - 1))) : 0.0;
    return est;
}

LowerBoundCheck check_lower_bound(double reference, const PathEnsemble& paths,
                                  const SwitchingStructure& s,
                                  const std::vector<MarkovianFeedbackRule>& rules,
                                  const CostModel& cost) {
    LowerBoundCheck check;
    check.reference = reference;
    check.worst_margin = std::numeric_limits<double>::infinity();
    for (const auto& rule : rules) {
        CostEstimate est = estimate_cost(paths, s, rule, cost);
        check.worst_margin =
            std::min(check.worst_margin, est.mean + 3.0 * est.se - reference);
        check.costs.push_back(std::move(est));
    }
    check.pass = check.worst_margin >= 0.0;
    return check;
}

}  // namespace oswitch
