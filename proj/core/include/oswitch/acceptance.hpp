#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace oswitch {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;  // measured values, one line
    double seconds = 0.0;
};

struct AcceptanceReport {
    std::string tier;
    std::vector<CriterionResult> criteria;
    bool all_pass = false;
    double total_seconds = 0.0;
};

/// Runs the full acceptance battery. tier "quick" caps lattice sizes at N=32
/// and Monte Carlo at 1e4 paths; tier "full" uses the production sizes.
AcceptanceReport run_acceptance_suite(const std::string& tier);

/// One PASS/FAIL line per criterion plus a summary line.
void print_acceptance(const AcceptanceReport& report, std::ostream& out);

}  // namespace oswitch
