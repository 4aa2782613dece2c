#pragma once

#include <limits>
#include <span>
#include <vector>

#include "oswitch/errors.hpp"

namespace oswitch {

/// One violated triangle inequality k(i,j)+k(j,l) >= k(i,l) (or its strict
/// variant). Indices are 0-based modes.
struct TripleViolation {
    int i, j, l;
    double lhs;  // k(i,j) + k(j,l)
    double rhs;  // k(i,l)
    bool strict_only;  // holds weakly but not strictly
};

struct CostValidation {
    bool weak_ok = true;    // k >= 0 and weak triangle inequality
    bool strict_ok = true;  // strict triangle inequality for i!=j, j!=l
    std::vector<TripleViolation> violations;
};

/// Classifies an m x m cost matrix (row-major). Throws StructuralError if the
/// matrix is not square with a zero diagonal.
CostValidation validate_costs(std::span<const double> costs, int m);

/// Mode set and switching costs. Validation runs once at construction; the
/// strictness flag is queried by the strategy machinery.
class SwitchingStructure {
  public:
    SwitchingStructure(int m, std::vector<double> costs);

    int modes() const { return m_; }
    double cost(int i, int j) const { return costs_[static_cast<std::size_t>(i) * m_ + j]; }
    std::span<const double> costs() const { return costs_; }

    const CostValidation& validation() const { return validation_; }
    bool weak_ok() const { return validation_.weak_ok; }
    bool strict_ok() const { return validation_.strict_ok; }

  private:
    int m_;
    std::vector<double> costs_;
    CostValidation validation_;
};

struct MembershipResult {
    bool inside;
    // max_i ( y_i - min_{j != i} (y_j + k(i,j)) ); -inf when m == 1.
    double worst_violation;
};

/// Membership test for the closure of Q = { y : y_i < y_j + k(i,j) }.
MembershipResult in_Q_closure(std::span<const double> y, const SwitchingStructure& s,
                              double tol);

/// Componentwise-minimum fixed point: yhat_i = min(y_i, min_{j!=i} yhat_j + k(i,j)).
/// Sweeps ascend in mode index and repeat until stationary; each component only
/// decreases. Requires nonnegative costs.
std::vector<double> oblique_project(std::span<const double> y, const SwitchingStructure& s);

struct SeparationResult {
    bool strictly_separated;
    double c;  // min over face pairs of dist(B_{i,j}, B_{j,l}); meaningful only when separated
};

/// Minimum distance between distinct boundary faces B_{i,j} and B_{j,l} of the
/// domain closure. Returns strictly_separated=false when the strict triangle
/// inequality fails (faces may touch).
SeparationResult separation_constant(const SwitchingStructure& s);

/// Exact Euclidean distance between the faces B_{i,j} and B_{j,l}, computed by
/// alternating projections (Dykstra for each polyhedral face). Exposed for the
/// sampling-oracle tests.
double face_distance(const SwitchingStructure& s, int i, int j, int j2, int l,
                     double tol = 1e-12);

}  // namespace oswitch
