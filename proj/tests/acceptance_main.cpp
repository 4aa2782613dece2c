#include <iostream>
#include <string>

#include "oswitch/acceptance.hpp"

int main(int argc, char** argv) {
    const std::string tier = argc > 1 ? argv[1] : "full";
    try {
        const auto report = oswitch::run_acceptance_suite(tier);
        oswitch::print_acceptance(report, std::cout);
        return report.all_pass ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "acceptance suite error: " << e.what() << "\n";
        return 2;
    }
}
