#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "oswitch/errors.hpp"

namespace oswitch {

struct BranchSpec {
    enum class Kind { Binomial, GaussHermite };
    Kind kind = Kind::Binomial;
    int gh_nodes = 3;  // quadrature nodes per step (Gauss-Hermite, d = 1 only)
};

struct LatticeEdge {
    int next;  // node index in the next level
    double prob;
    std::vector<double> dw;  // Brownian increment along this edge
};

struct LatticeNode {
    std::vector<double> w;      // Brownian value at this node
    std::vector<double> state;  // attached state value (empty unless set)
    double prob = 0.0;          // probability of reaching this node from the root
    std::vector<LatticeEdge> edges;
};

/// Recombining lattice for the driving Brownian motion. Binomial branching in
/// d dimensions (+-sqrt(dt) per component), or Gauss-Hermite quadrature
/// increments for d = 1.
class LatticeModel {
  public:
    static constexpr std::size_t kDefaultNodeCap = 8'000'000;

    static LatticeModel build(double T, int steps, int d, BranchSpec spec = {},
                              std::size_t node_cap = kDefaultNodeCap);

    double horizon() const { return T_; }
    double dt() const { return dt_; }
    int steps() const { return steps_; }
    int dimension() const { return d_; }
    double time(int level) const { return dt_ * level; }

    const std::vector<std::vector<LatticeNode>>& levels() const { return levels_; }
    std::vector<std::vector<LatticeNode>>& levels() { return levels_; }
    const LatticeNode& node(int level, int idx) const { return levels_[level][idx]; }
    std::size_t node_count() const;

    double T_ = 0.0, dt_ = 0.0;
    int steps_ = 0, d_ = 0;
    std::vector<std::vector<LatticeNode>> levels_;
};

/// Maps (t, W_t) to a state vector; used to put Markovian coefficients on the
/// lattice when X is an explicit function of the Brownian value.
using StateMap = std::function<std::vector<double>(double t, std::span<const double> w)>;

/// X(t) = x0 + drift * t + sigma * W(t)  (d = 1)
StateMap arithmetic_state(double x0, double drift, double sigma);
/// X(t) = x0 * exp(sigma * W(t) - sigma^2 t / 2)  (d = 1, driftless geometric)
StateMap geometric_state(double x0, double sigma);

/// Fills node states from the map. Call once before state-dependent solves.
void attach_state(LatticeModel& lattice, const StateMap& map);

/// Non-recombining Euler tree in the state variable for genuinely
/// state-dependent coefficients (d = 1): X' = X + b dt +- sigma sqrt(dt).
/// Node count 2^steps; guarded by node_cap.
LatticeModel build_euler_tree(double T, int steps, double x0,
                              const std::function<double(double, double)>& b,
                              const std::function<double(double, double)>& sigma,
                              std::size_t node_cap = LatticeModel::kDefaultNodeCap);

/// Gauss-Hermite nodes/weights for the standard normal distribution.
void gauss_hermite_normal(int q, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace oswitch
