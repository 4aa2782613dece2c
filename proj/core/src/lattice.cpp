#include "oswitch/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>

namespace oswitch {

namespace {

double hermite_prob(int n, double x) {
    // probabilists' Hermite: He_{k+1} = x He_k - k He_{k-1}
    double h0 = 1.0, h1 = x;
    if (n == 0) return h0;
    for (int k = 1; k < n; ++k) {
        const double h2 = x * h1 - k * h0;
        h0 = h1;
        h1 = h2;
    }
    return h1;
}

}  // namespace

void gauss_hermite_normal(int q, std::vector<double>& nodes, std::vector<double>& weights) {
    if (q < 1) throw StructuralError("gauss_hermite_normal: q must be >= 1");
    nodes.clear();
    weights.clear();
    if (q == 1) {
        nodes = {0.0};
        weights = {1.0};
        return;
    }
    // Bracket the q simple roots of He_q on a fine grid, then bisect.
    const double lo = -2.0 * std::sqrt(static_cast<double>(q)) - 1.0;
    const double hi = -lo;
    const int grid = 400 * q;
    double prev_x = lo, prev_f = hermite_prob(q, lo);
    for (int g = 1; g <= grid; ++g) {
        const double x = lo + (hi - lo) * g / grid;
        const double f = hermite_prob(q, x);
        if (prev_f == 0.0) nodes.push_back(prev_x);
        else if (prev_f * f < 0.0) {
            double a = prev_x, b = x, fa = prev_f;
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (a + b);
                const double fm = hermite_prob(q, mid);
                if (fa * fm <= 0.0) b = mid;
                else {
                    a = mid;
                    fa = fm;
                }
            }
            nodes.push_back(0.5 * (a + b));
        }
        prev_x = x;
        prev_f = f;
    }
    if (static_cast<int>(nodes.size()) != q)
        throw InternalError("gauss_hermite_normal: root bracketing failed");
    double fact = 1.0;
    for (int k = 2; k <= q; ++k) fact *= k;
    weights.resize(q);
    double wsum = 0.0;
    for (int r = 0; r < q; ++r) {
        const double hm1 = hermite_prob(q - 1, nodes[r]);
        weights[r] = fact / (static_cast<double>(q) * q * hm1 * hm1);
        wsum += weights[r];
    }
    for (double& w : weights) w /= wsum;  // renormalize away root-finding error
    // symmetrize nodes exactly
    for (int r = 0; r < q / 2; ++r) {
        const double v = 0.5 * (nodes[q - 1 - r] - nodes[r]);
        nodes[r] = -v;
        nodes[q - 1 - r] = v;
        const double w = 0.5 * (weights[r] + weights[q - 1 - r]);
        weights[r] = weights[q - 1 - r] = w;
    }
    if (q % 2 == 1) nodes[q / 2] = 0.0;
}

namespace {

std::size_t binomial_level_size(int level, int d) {
    std::size_t s = 1;
    for (int k = 0; k < d; ++k) s *= static_cast<std::size_t>(level + 1);
    return s;
}

LatticeModel build_binomial(double T, int steps, int d, std::size_t node_cap) {
    std::size_t total = 0;
    for (int n = 0; n <= steps; ++n) {
        total += binomial_level_size(n, d);
        if (total > node_cap)
            throw CapacityError("lattice node count exceeds cap (" + std::to_string(node_cap) +
                                ")");
    }
    LatticeModel lat;
    lat.T_ = T;
    lat.steps_ = steps;
    lat.d_ = d;
    lat.dt_ = T / steps;
    const double root_dt = std::sqrt(lat.dt_);
    lat.levels_.resize(steps + 1);

    const int branches = 1 << d;
    const double p = 1.0 / branches;
    for (int n = 0; n <= steps; ++n) {
        auto& level = lat.levels_[n];
        level.resize(binomial_level_size(n, d));
        // node index = mixed radix over per-dimension up-counts, base (n+1)
        for (std::size_t idx = 0; idx < level.size(); ++idx) {
            LatticeNode& node = level[idx];
            node.w.resize(d);
            std::size_t rem = idx;
            for (int k = 0; k < d; ++k) {
                const int up = static_cast<int>(rem % (n + 1));
                rem /= (n + 1);
                node.w[k] = (2.0 * up - n) * root_dt;
            }
            if (n < steps) {
                node.edges.reserve(branches);
                for (int mask = 0; mask < branches; ++mask) {
                    LatticeEdge e;
                    e.prob = p;
                    e.dw.resize(d);
                    std::size_t child = 0, mult = 1;
                    rem = idx;
                    for (int k = 0; k < d; ++k) {
                        const int up = static_cast<int>(rem % (n + 1));
                        rem /= (n + 1);
                        const int bit = (mask >> k) & 1;
                        e.dw[k] = bit ? root_dt : -root_dt;
                        child += mult * static_cast<std::size_t>(up + bit);
                        mult *= static_cast<std::size_t>(n + 2);
                    }
                    e.next = static_cast<int>(child);
                    node.edges.push_back(std::move(e));
                }
            }
        }
    }

    lat.levels_[0][0].prob = 1.0;
    for (int n = 0; n < steps; ++n)
        for (auto& node : lat.levels_[n])
            for (const auto& e : node.edges) lat.levels_[n + 1][e.next].prob += node.prob * e.prob;
    return lat;
}

// Gauss-Hermite lattice, d = 1. A node is the multiset of increments taken so
// far; level n has C(n+q-1, q-1) nodes.
LatticeModel build_gauss_hermite(double T, int steps, int q, std::size_t node_cap) {
    if (q < 2 || q > 8)
        throw StructuralError("Gauss-Hermite branching requires 2 <= q <= 8");
    std::vector<double> xi, pw;
    gauss_hermite_normal(q, xi, pw);

    LatticeModel lat;
    lat.T_ = T;
    lat.steps_ = steps;
    lat.d_ = 1;
    lat.dt_ = T / steps;
    const double root_dt = std::sqrt(lat.dt_);
    lat.levels_.resize(steps + 1);

    // composition key: one byte per quadrature slot (counts <= steps <= 255)
    auto key_of = [&](const std::vector<std::uint8_t>& c) {
        std::uint64_t key = 0;
        for (int r = 0; r < q; ++r) key = key * 256 + c[r];
        return key;
    };

    std::vector<std::vector<std::uint8_t>> comps{std::vector<std::uint8_t>(q, 0)};
    std::size_t total = 0;
    for (int n = 0; n <= steps; ++n) {
        total += comps.size();
        if (total > node_cap) throw CapacityError("Gauss-Hermite lattice exceeds node cap");
        auto& level = lat.levels_[n];
        level.resize(comps.size());
        std::unordered_map<std::uint64_t, int> next_index;
        std::vector<std::vector<std::uint8_t>> next_comps;
        for (std::size_t idx = 0; idx < comps.size(); ++idx) {
            LatticeNode& node = level[idx];
            double w = 0.0;
            for (int r = 0; r < q; ++r) w += comps[idx][r] * xi[r];
            node.w = {w * root_dt};
            if (n < steps) {
                node.edges.reserve(q);
                for (int r = 0; r < q; ++r) {
                    auto child = comps[idx];
                    child[r] = static_cast<std::uint8_t>(child[r] + 1);
                    const std::uint64_t key = key_of(child);
                    auto [it, inserted] = next_index.try_emplace(
                        key, static_cast<int>(next_comps.size()));
                    if (inserted) next_comps.push_back(child);
                    node.edges.push_back({it->second, pw[r], {xi[r] * root_dt}});
                }
            }
        }
        comps = std::move(next_comps);
    }

    lat.levels_[0][0].prob = 1.0;
    for (int n = 0; n < steps; ++n)
        for (auto& node : lat.levels_[n])
            for (const auto& e : node.edges) lat.levels_[n + 1][e.next].prob += node.prob * e.prob;
    return lat;
}

}  // namespace

LatticeModel LatticeModel::build(double T, int steps, int d, BranchSpec spec,
                                 std::size_t node_cap) {
    if (T <= 0.0) throw StructuralError("lattice: horizon must be positive");
    if (steps < 1) throw StructuralError("lattice: steps must be >= 1");
    if (d < 1) throw StructuralError("lattice: dimension must be >= 1");
    if (spec.kind == BranchSpec::Kind::GaussHermite) {
        if (d != 1) throw StructuralError("Gauss-Hermite branching supports d = 1 only");
        return build_gauss_hermite(T, steps, spec.gh_nodes, node_cap);
    }
    if (d > 3) throw StructuralError("binomial lattice supports d <= 3");
    return build_binomial(T, steps, d, node_cap);
}

std::size_t LatticeModel::node_count() const {
    std::size_t n = 0;
    for (const auto& level : levels_) n += level.size();
    return n;
}

StateMap arithmetic_state(double x0, double drift, double sigma) {
    return [=](double t, std::span<const double> w) {
        return std::vector<double>{x0 + drift * t + sigma * w[0]};
    };
}

StateMap geometric_state(double x0, double sigma) {
    return [=](double t, std::span<const double> w) {
        return std::vector<double>{x0 * std::exp(sigma * w[0] - 0.5 * sigma * sigma * t)};
    };
}

void attach_state(LatticeModel& lattice, const StateMap& map) {
    for (int n = 0; n <= lattice.steps(); ++n) {
        const double t = lattice.time(n);
        for (auto& node : lattice.levels()[n]) node.state = map(t, node.w);
    }
}

LatticeModel build_euler_tree(double T, int steps, double x0,
                              const std::function<double(double, double)>& b,
                              const std::function<double(double, double)>& sigma,
                              std::size_t node_cap) {
    if (T <= 0.0 || steps < 1) throw StructuralError("euler tree: bad horizon/steps");
    std::size_t total = 0, sz = 1;
    for (int n = 0; n <= steps; ++n, sz *= 2) {
        total += sz;
        if (total > node_cap) throw CapacityError("euler tree exceeds node cap");
    }
    LatticeModel lat;
    lat.T_ = T;
    lat.steps_ = steps;
    lat.d_ = 1;
    lat.dt_ = T / steps;
    const double root_dt = std::sqrt(lat.dt_);
    lat.levels_.resize(steps + 1);
    lat.levels_[0].resize(1);
    lat.levels_[0][0].w = {0.0};
    lat.levels_[0][0].state = {x0};
    for (int n = 0; n < steps; ++n) {
        const double t = lat.time(n);
        auto& level = lat.levels_[n];
        auto& next = lat.levels_[n + 1];
        next.resize(level.size() * 2);
        for (std::size_t idx = 0; idx < level.size(); ++idx) {
            LatticeNode& node = level[idx];
            const double x = node.state[0];
            const double drift = b(t, x) * lat.dt_;
            const double diff = sigma(t, x) * root_dt;
            for (int bit = 0; bit < 2; ++bit) {
                const int child = static_cast<int>(2 * idx) + bit;
                const double dwv = bit ? root_dt : -root_dt;
                next[child].w = {node.w[0] + dwv};
                next[child].state = {x + drift + (bit ? diff : -diff)};
                node.edges.push_back({child, 0.5, {dwv}});
            }
        }
    }
    lat.levels_[0][0].prob = 1.0;
    for (int n = 0; n < steps; ++n)
        for (auto& node : lat.levels_[n])
            for (const auto& e : node.edges) lat.levels_[n + 1][e.next].prob += node.prob * e.prob;
    return lat;
}

}  // namespace oswitch
